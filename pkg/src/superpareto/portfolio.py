"""Position evaluation, the concentrated-position optimizer and the
VaR superadditivity experiment for heterogeneous losses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np
from scipy import optimize

from .dependence import Comonotone, Copula, Independence, _joint_block
from .distributions import Affine, Discrete, Empirical, LossDistribution
from .dominance import check_simplex, order_statistic_ci
from .risk_measures import RiskMeasure
from .rng import RngStream, as_stream, concat_blocks, map_blocks

__all__ = [
    "Compensation",
    "FixedTotal",
    "Free",
    "PositionProblem",
    "UnboundedBelowError",
    "OptimizationResult",
    "evaluate_position",
    "optimize_position",
    "SuperadditivityReport",
    "var_superadditivity_report",
    "SUPERADD_COLUMNS",
]

SUPERADD_COLUMNS = ("p", "var_sum", "var_sum_ci", "sum_var", "gap")
DEFAULT_W_MAX = 1e3


class UnboundedBelowError(RuntimeError):
    """The free-exposure objective keeps decreasing at the search boundary."""


@dataclass(frozen=True)
class Compensation:
    """``g(w)`` for total exposure ``w``: zero, linear, affine or quadratic."""

    kind: str = "zero"
    gamma: float = 0.0
    intercept: float = 0.0
    kappa: float = 0.0

    def __post_init__(self):
        if self.kind not in ("zero", "linear", "affine", "quadratic"):
            raise ValueError(f"unknown compensation kind '{self.kind}'")

    def __call__(self, w: float) -> float:
        if self.kind == "zero":
            return 0.0
        if self.kind == "linear":
            return self.gamma * w
        if self.kind == "affine":
            return self.intercept + self.gamma * w
        return self.gamma * w + self.kappa * w * w

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "gamma": self.gamma, "intercept": self.intercept, "kappa": self.kappa}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Compensation":
        return cls(d.get("kind", "zero"), d.get("gamma", 0.0), d.get("intercept", 0.0), d.get("kappa", 0.0))


@dataclass(frozen=True)
class FixedTotal:
    w: float

    def __post_init__(self):
        if not self.w > 0:
            raise ValueError("fixed total exposure must be positive")


@dataclass(frozen=True)
class Free:
    w_max: float = DEFAULT_W_MAX

    def __post_init__(self):
        if not self.w_max > 0:
            raise ValueError("w_max must be positive")


@dataclass(frozen=True)
class PositionProblem:
    marginal: LossDistribution
    copula: Copula
    n_assets: int
    rho: RiskMeasure
    compensation: Compensation | Callable[[float], float] = field(default_factory=Compensation)
    constraint: FixedTotal | Free = field(default_factory=Free)

    def __post_init__(self):
        if self.n_assets < 1:
            raise ValueError("need at least one asset")
        self.copula.check_dim(self.n_assets)

    def g(self, w: float) -> float:
        return float(self.compensation(w))


def _distortion_type(rho: RiskMeasure) -> bool:
    return rho.distortion_fn is not None


def _concentrated_value(problem: PositionProblem, total: float) -> float:
    """``ρ(total·X − g(total))`` evaluated on the analytic law."""
    g = problem.g(total)
    if total == 0.0:
        return float(problem.rho(Discrete([-g], [1.0])))
    return float(problem.rho(Affine(problem.marginal, total, -g)))


def evaluate_position(
    problem: PositionProblem,
    w_vec,
    n_mc: int = 10**6,
    stream: RngStream | int = 0,
    threads: int | None = None,
) -> float:
    """``ρ(w·X − g(‖w‖))``.

    Concentrated positions (and any position under the comonotone copula,
    where ``w·X = ‖w‖ X_1`` pathwise) use the analytic law of ``X``;
    everything else is a Monte Carlo estimate on the sampled portfolio loss.
    ES-type measures on infinite-mean losses return ``math.inf``.
    """
    w = np.asarray(w_vec, dtype=float).ravel()
    if w.size != problem.n_assets:
        raise ValueError(f"w_vec must have {problem.n_assets} entries")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("w_vec must be finite and nonnegative")
    total = float(w.sum())
    h = problem.rho.distortion_fn
    if total > 0 and h is not None and not h.vanishes_near_zero and not problem.marginal.has_finite_mean:
        return math.inf
    concentrated = np.count_nonzero(w) <= 1 or isinstance(problem.copula, Comonotone)
    if concentrated:
        return _concentrated_value(problem, total)
    if total == 0.0:
        return _concentrated_value(problem, 0.0)
    loss = position_loss_sample(problem, w, n_mc, stream, threads)
    return float(problem.rho(Empirical(loss)))


def position_loss_sample(
    problem: PositionProblem,
    w_vec,
    n_mc: int,
    stream: RngStream | int,
    threads: int | None = None,
) -> np.ndarray:
    """Sampled ``w·X − g(‖w‖)``."""
    w = np.asarray(w_vec, dtype=float)
    total = float(w.sum())
    theta = w / total
    anchor = int(np.argmax(theta))
    joint = _joint_block(problem.marginal, problem.copula, problem.n_assets)

    def block(rng, m):
        x = joint(rng, m)
        xa = x[:, anchor]
        return total * (xa + (x - xa[:, None]) @ theta)

    s = concat_blocks(map_blocks(block, n_mc, as_stream(stream), threads))
    return s - problem.g(total)


@dataclass
class OptimizationResult:
    w_vec: np.ndarray
    value: float
    certificate: dict[str, Any]


def _golden(f: Callable[[float], float], a: float, b: float, tol: float) -> float:
    res = optimize.minimize_scalar(f, bounds=(a, b), method="bounded", options={"xatol": tol})
    return float(res.x)


def optimize_position(
    problem: PositionProblem,
    n_mc: int = 10**6,
    stream: RngStream | int = 0,
    threads: int | None = None,
    grid_points: int = 201,
) -> OptimizationResult:
    """Minimize over concentrated positions ``w·e_i`` only.

    For a mildly monotone ``ρ`` the minimizers of the fixed-total problem are
    exactly the concentrated positions, and any minimizer of the free problem
    is concentrated, so the search reduces to one coordinate.  Identical
    marginals make all coordinates equivalent; the lowest index is returned.
    """
    rho = problem.rho
    if not rho.mildly_monotone:
        raise ValueError("risk measure is not mildly monotone (degenerate distortion)")
    d = problem.n_assets
    cert: dict[str, Any] = {
        "reduction": "searched concentrated positions w*e_i only",
        "mildly_monotone": True,
        "tie_break": "lowest index among equivalent coordinates",
    }
    if isinstance(problem.copula, Comonotone) and d > 1:
        cert["ties"] = "comonotone copula: every position with the same total has the same objective"

    def phi(w: float) -> float:
        e = np.zeros(d)
        e[0] = w
        return evaluate_position(problem, e, n_mc, stream, threads)

    if isinstance(problem.constraint, FixedTotal):
        w = problem.constraint.w
        e = np.zeros(d)
        e[0] = w
        cert["constraint"] = "fixed_total"
        return OptimizationResult(e, phi(w), cert)

    w_max = problem.constraint.w_max
    grid = np.linspace(0.0, w_max, grid_points)
    vals = np.array([phi(w) for w in grid])
    if np.any(np.isnan(vals)):
        raise FloatingPointError("objective evaluated to nan")
    step = grid[1] - grid[0]
    scale = 1.0 + float(np.max(np.abs(vals[np.isfinite(vals)]), initial=0.0))
    end_slope = (phi(w_max) - phi(w_max - 1e-3 * step)) / (1e-3 * step)
    if vals[-1] < vals[-2] - 1e-12 * scale and end_slope < 0:
        cert["constraint"] = "free"
        cert["end_slope"] = end_slope
        raise UnboundedBelowError(
            f"objective still decreasing at w_max={w_max:g} (slope {end_slope:.6g}); no minimizer on [0, w_max]"
        )
    i = int(np.argmin(vals))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
    best_w, best_v = float(grid[i]), float(vals[i])
    if hi > lo and np.isfinite(best_v):
        w_ref = _golden(phi, lo, hi, 1e-9 * max(w_max, 1.0))
        v_ref = phi(w_ref)
        if v_ref < best_v:
            best_w, best_v = w_ref, v_ref
    e = np.zeros(d)
    e[0] = best_w
    cert.update({"constraint": "free", "w_max": w_max, "grid_points": grid_points, "search": "grid + bounded golden refine"})
    return OptimizationResult(e, best_v, cert)


# ---------------------------------------------------------------------------
# VaR superadditivity for heterogeneous marginals


@dataclass
class SuperadditivityReport:
    p: np.ndarray
    var_sum: np.ndarray
    var_sum_ci: np.ndarray
    sum_var: np.ndarray
    separated: np.ndarray
    label: str = "empirical only"

    @property
    def gap(self) -> np.ndarray:
        return self.var_sum - self.sum_var

    @property
    def gap_increasing(self) -> bool:
        return bool(np.all(np.diff(self.gap) > 0))

    def rows(self) -> list[tuple]:
        return list(zip(self.p.tolist(), self.var_sum.tolist(), self.var_sum_ci.tolist(),
                        self.sum_var.tolist(), self.gap.tolist()))

    def summary(self) -> dict[str, Any]:
        return {
            "label": self.label,
            "all_separated": bool(np.all(self.separated)),
            "gap_increasing": self.gap_increasing,
            "points": int(self.p.size),
        }


def var_superadditivity_report(
    losses: Sequence[LossDistribution],
    theta,
    p_grid,
    n_mc: int = 10**6,
    stream: RngStream | int = 0,
    threads: int | None = None,
) -> SuperadditivityReport:
    """Monte Carlo ``VaR_p(Σθ_i X_i)`` for independent ``X_i`` against ``Σθ_i VaR_p(X_i)``.

    ``var_sum_ci`` is the larger side of a 99% order-statistic interval.
    A heterogeneous report is evidence only and never a dominance claim.
    """
    losses = list(losses)
    theta = check_simplex(theta, len(losses))
    p_grid = np.asarray(p_grid, dtype=float)
    if np.any((p_grid <= 0) | (p_grid >= 1)):
        raise ValueError("p levels must lie in (0, 1)")
    sum_var = np.array([sum(t * float(x.quantile(p)) for t, x in zip(theta, losses)) for p in p_grid])
    if len(losses) == 1:
        return SuperadditivityReport(p_grid, sum_var.copy(), np.zeros_like(sum_var), sum_var,
                                     np.zeros(p_grid.size, dtype=bool))

    def block(rng, m):
        s = np.zeros(m)
        for t, x in zip(theta, losses):
            draw = x.draw(rng, m)
            if t > 0:
                s += t * draw
        return s

    s = np.sort(concat_blocks(map_blocks(block, n_mc, as_stream(stream), threads)))
    est, half, sep = [], [], []
    for p, rhs in zip(p_grid, sum_var):
        v, lo, hi = order_statistic_ci(s, float(p))
        est.append(v)
        half.append(max(hi - v, v - lo))
        sep.append(lo > rhs)
    return SuperadditivityReport(p_grid, np.array(est), np.array(half), sum_var, np.array(sep))
