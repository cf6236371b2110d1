"""Stochastic-dominance experiments for diversified versus concentrated losses.

Every report compares a diversified side (``lhs``) against a concentrated
side (``rhs``) through exceedance probabilities ``P(. > t)`` on a grid.  The
claim under test is ``lhs_exceed >= rhs_exceed``.  Intervals are 99% Wilson
score intervals; a strict verdict needs separated intervals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
from scipy import stats

from .dependence import Copula, Independence, _joint_block
from .distributions import LossDistribution
from .rng import RngStream, as_stream, concat_blocks, map_blocks

__all__ = [
    "Z99",
    "DominanceReport",
    "VarComparison",
    "TruncatedReport",
    "CountLaw",
    "wilson_interval",
    "check_simplex",
    "default_grid",
    "penalty_experiment",
    "truncated_penalty_experiment",
    "collective_risk_experiment",
    "empirical_fsd",
    "one_sided_dominance_test",
    "REPORT_COLUMNS",
]

Z99 = float(stats.norm.ppf(0.995))
SIMPLEX_TOL = 1e-12
DEFAULT_N_MC = 10**6
REPORT_COLUMNS = ("t", "lhs_exceed", "lhs_ci", "rhs_exceed", "rhs_ci", "gap", "verdict")

HOLDS = "holds"
HOLDS_STRICTLY = "holds_strictly"
INCONCLUSIVE = "inconclusive"
VIOLATED = "violated"


def wilson_interval(count, n: int, z: float = Z99):
    """Wilson score interval; returns ``(center, half_width)`` arrays."""
    count = np.asarray(count, dtype=float)
    phat = count / n
    denom = 1.0 + z * z / n
    center = (phat + z * z / (2 * n)) / denom
    half = z * np.sqrt(phat * (1 - phat) / n + z * z / (4.0 * n * n)) / denom
    return center, half


def _verdicts(lhs_count, rhs_count, n_lhs: int, n_rhs: int, z: float) -> list[str]:
    cl, hl = wilson_interval(lhs_count, n_lhs, z)
    cr, hr = wilson_interval(rhs_count, n_rhs, z)
    pl = np.asarray(lhs_count) / n_lhs
    pr = np.asarray(rhs_count) / n_rhs
    out = []
    for i in range(pl.size):
        if pl[i] == pr[i]:
            out.append(HOLDS)
        elif cl[i] - hl[i] > cr[i] + hr[i]:
            out.append(HOLDS_STRICTLY)
        elif cl[i] + hl[i] < cr[i] - hr[i]:
            out.append(VIOLATED)
        elif pl[i] >= pr[i]:
            out.append(HOLDS)
        else:
            out.append(INCONCLUSIVE)
    return out


@dataclass
class DominanceReport:
    """Per-threshold exceedance comparison of a diversified and a concentrated loss."""

    grid: np.ndarray
    lhs_count: np.ndarray
    rhs_count: np.ndarray
    n_lhs: int
    n_rhs: int
    z: float = Z99
    label: str = ""
    extra: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.lhs_count = np.asarray(self.lhs_count, dtype=np.int64)
        self.rhs_count = np.asarray(self.rhs_count, dtype=np.int64)
        self.verdicts = _verdicts(self.lhs_count, self.rhs_count, self.n_lhs, self.n_rhs, self.z)

    @property
    def lhs_exceed(self) -> np.ndarray:
        return self.lhs_count / self.n_lhs

    @property
    def rhs_exceed(self) -> np.ndarray:
        return self.rhs_count / self.n_rhs

    @property
    def lhs_ci(self) -> np.ndarray:
        return wilson_interval(self.lhs_count, self.n_lhs, self.z)[1]

    @property
    def rhs_ci(self) -> np.ndarray:
        return wilson_interval(self.rhs_count, self.n_rhs, self.z)[1]

    @property
    def lhs_se(self) -> np.ndarray:
        return self.lhs_ci / self.z

    @property
    def rhs_se(self) -> np.ndarray:
        return self.rhs_ci / self.z

    @property
    def gap(self) -> np.ndarray:
        return self.lhs_exceed - self.rhs_exceed

    @property
    def ratio(self) -> np.ndarray:
        """``lhs_exceed / rhs_exceed``; a diagnostic only, nan where rhs is 0."""
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(self.rhs_count > 0, self.lhs_exceed / np.maximum(self.rhs_exceed, 1e-300), np.nan)

    @property
    def overall(self) -> str:
        v = self.verdicts
        if not v:
            return INCONCLUSIVE
        if VIOLATED in v:
            return VIOLATED
        if all(x == HOLDS_STRICTLY for x in v):
            return HOLDS_STRICTLY
        if INCONCLUSIVE in v:
            return INCONCLUSIVE
        return HOLDS

    def rows(self) -> list[tuple]:
        return list(
            zip(
                self.grid.tolist(),
                self.lhs_exceed.tolist(),
                self.lhs_ci.tolist(),
                self.rhs_exceed.tolist(),
                self.rhs_ci.tolist(),
                self.gap.tolist(),
                self.verdicts,
            )
        )

    def summary(self) -> dict[str, Any]:
        counts = {k: self.verdicts.count(k) for k in (HOLDS_STRICTLY, HOLDS, INCONCLUSIVE, VIOLATED)}
        gap = self.gap
        return {
            "label": self.label,
            "overall": self.overall,
            "n_lhs": self.n_lhs,
            "n_rhs": self.n_rhs,
            "grid_points": int(self.grid.size),
            "verdict_counts": counts,
            "max_gap": float(gap.max()) if gap.size else 0.0,
            "min_gap": float(gap.min()) if gap.size else 0.0,
            **{k: v for k, v in self.extra.items() if _jsonable(v)},
        }


def _jsonable(v) -> bool:
    return isinstance(v, (int, float, str, bool, type(None), list, dict, tuple))


# ---------------------------------------------------------------------------
# helpers


def check_simplex(theta, d: int | None = None) -> np.ndarray:
    th = np.asarray(theta, dtype=float).ravel()
    if th.size == 0 or (d is not None and th.size != d):
        raise ValueError("theta has the wrong length")
    if np.any(th < -SIMPLEX_TOL) or abs(th.sum() - 1.0) > SIMPLEX_TOL:
        raise ValueError(f"theta must lie on the simplex (sum={th.sum():.15g})")
    return np.clip(th, 0.0, None)


def default_grid(marginal: LossDistribution, points: int = 41) -> np.ndarray:
    """Log-spaced thresholds between the 0.5 and 0.999 quantiles."""
    lo, hi = float(marginal.quantile(0.5)), float(marginal.quantile(0.999))
    if lo > 0 and hi > lo:
        return np.geomspace(lo, hi, points)
    return np.linspace(lo, hi, points)


def _exceed_counts(values: np.ndarray, grid: np.ndarray) -> np.ndarray:
    s = np.sort(values)
    return s.size - np.searchsorted(s, grid, side="right")


def _diversified(x: np.ndarray, theta: np.ndarray, anchor: int) -> np.ndarray:
    # written around the anchor column so that degenerate cases are exact
    xa = x[:, anchor]
    return xa + (x - xa[:, None]) @ theta


# ---------------------------------------------------------------------------
# experiments


def penalty_experiment(
    marginal: LossDistribution,
    copula: Copula,
    theta,
    grid=None,
    n_mc: int = DEFAULT_N_MC,
    stream: RngStream | int = 0,
    threads: int | None = None,
    coupled: bool = True,
) -> DominanceReport:
    """Compare ``P(Σθ_i X_i > t)`` with ``P(X > t)``.

    With ``coupled=True`` the concentrated arm is the heaviest-weighted column
    of the same draw, so ``theta = e_i`` and the comonotone copula give
    identical arms path by path.
    """
    theta = check_simplex(theta)
    d = theta.size
    copula.check_dim(d)
    grid = default_grid(marginal) if grid is None else np.asarray(grid, dtype=float)
    stream = as_stream(stream)
    anchor = int(np.argmax(theta))
    joint = _joint_block(marginal, copula, d)

    def block(rng, m):
        x = joint(rng, m)
        lhs = _diversified(x, theta, anchor)
        rhs = x[:, anchor] if coupled else marginal.draw(rng, m)
        return np.stack([_exceed_counts(lhs, grid), _exceed_counts(rhs, grid)])

    counts = sum(map_blocks(block, n_mc, stream, threads))
    return DominanceReport(
        grid, counts[0], counts[1], n_mc, n_mc,
        label="penalty",
        extra={"theta": theta.tolist(), "copula": copula.kind, "coupled": coupled},
    )


@dataclass
class VarComparison:
    p: np.ndarray
    lhs: np.ndarray
    lhs_low: np.ndarray
    lhs_high: np.ndarray
    rhs: np.ndarray
    verdicts: list[str]

    def rows(self) -> list[tuple]:
        return list(zip(self.p.tolist(), self.lhs.tolist(), self.lhs_low.tolist(),
                        self.lhs_high.tolist(), self.rhs.tolist(), self.verdicts))


@dataclass
class TruncatedReport:
    report: DominanceReport
    c: float
    mismatches: int
    checked: int
    var_comparison: VarComparison

    @property
    def identity_holds(self) -> bool:
        return self.mismatches == 0


def order_statistic_ci(sorted_x: np.ndarray, p: float, z: float = Z99) -> tuple[float, float, float]:
    """Left empirical p-quantile with a distribution-free order-statistic interval."""
    n = sorted_x.size
    k = max(int(math.ceil(n * p)) - 1, 0)
    spread = z * math.sqrt(n * p * (1 - p))
    lo = min(max(int(math.floor(n * p - spread)) - 1, 0), n - 1)
    hi = min(max(int(math.ceil(n * p + spread)), 0), n - 1)
    return float(sorted_x[k]), float(sorted_x[lo]), float(sorted_x[hi])


def _truncation_level(theta: np.ndarray, c_levels: np.ndarray) -> float:
    pos = theta > 0
    return float(np.min(c_levels[pos] * theta[pos]))


def truncated_penalty_experiment(
    marginal: LossDistribution,
    copula: Copula,
    theta,
    c_levels,
    grid=None,
    p_levels=None,
    n_mc: int = DEFAULT_N_MC,
    stream: RngStream | int = 0,
    threads: int | None = None,
) -> TruncatedReport:
    """Truncated losses ``Y_i = min(X_i, c_i)`` against their untruncated sum.

    Checks the pathwise identity of the exceedance indicators on the grid
    (every grid point must lie in ``(z_X, c]`` with ``c = min θ_i c_i`` over
    positive weights) and compares ``VaR_p(Σθ_i Y_i)`` with
    ``Σθ_i VaR_p(Y_i)``.
    """
    theta = check_simplex(theta)
    d = theta.size
    copula.check_dim(d)
    c_levels = np.broadcast_to(np.asarray(c_levels, dtype=float), (d,)).copy()
    z_x = marginal.lower
    if np.any(c_levels < z_x):
        raise ValueError("every truncation level must be >= the support endpoint")
    c = _truncation_level(theta, c_levels)
    if grid is None:
        lo = max(z_x, 1e-12)
        grid = np.geomspace(lo, c, 42)[1:] if c > lo else np.array([c])
    grid = np.asarray(grid, dtype=float)
    if np.any(grid > c):
        raise ValueError(f"grid points must not exceed c = {c:g}")
    if np.any(grid <= z_x):
        raise ValueError(f"grid points must exceed the support endpoint {z_x:g}")
    q_c = float(marginal.cdf(c))
    if p_levels is None:
        p_levels = np.array([q_c / 2]) if q_c > 0 else np.array([])
    p_levels = np.asarray(p_levels, dtype=float)
    stream = as_stream(stream)
    anchor = int(np.argmax(theta))
    joint = _joint_block(marginal, copula, d)

    def block(rng, m):
        x = joint(rng, m)
        y = np.minimum(x, c_levels)
        lhs_y = _diversified(y, theta, anchor)
        lhs_x = _diversified(x, theta, anchor)
        mism = int(sum(np.count_nonzero((lhs_y > t) != (lhs_x > t)) for t in grid))
        counts = np.stack([_exceed_counts(lhs_y, grid), _exceed_counts(y[:, anchor], grid)])
        return counts, mism, lhs_y

    parts = map_blocks(block, n_mc, stream, threads)
    counts = sum(p[0] for p in parts)
    mismatches = sum(p[1] for p in parts)
    lhs_sorted = np.sort(concat_blocks([p[2] for p in parts]))

    rows = [order_statistic_ci(lhs_sorted, p) for p in p_levels]
    rhs = np.array([float(np.dot(theta, np.minimum(marginal.quantile(p), c_levels))) for p in p_levels])
    lhs_v = np.array([r[0] for r in rows])
    lo_v = np.array([r[1] for r in rows])
    hi_v = np.array([r[2] for r in rows])
    verdicts = []
    for i in range(p_levels.size):
        if lhs_v[i] == rhs[i] and lo_v[i] == hi_v[i]:
            verdicts.append(HOLDS)
        elif lo_v[i] > rhs[i]:
            verdicts.append(HOLDS_STRICTLY)
        elif hi_v[i] < rhs[i]:
            verdicts.append(VIOLATED)
        elif lhs_v[i] >= rhs[i]:
            verdicts.append(HOLDS)
        else:
            verdicts.append(INCONCLUSIVE)
    comparison = VarComparison(p_levels, lhs_v, lo_v, hi_v, rhs, verdicts)
    report = DominanceReport(
        grid, counts[0], counts[1], n_mc, n_mc,
        label="truncated",
        extra={"c": c, "p_upper": q_c, "mismatches": int(mismatches)},
    )
    return TruncatedReport(report, c, int(mismatches), int(n_mc * grid.size), comparison)


@dataclass(frozen=True)
class CountLaw:
    """Claim-count law on the nonnegative integers."""

    kind: str
    params: tuple = ()

    def __post_init__(self):
        if self.kind == "constant":
            (n,) = self.params
            if n < 0 or int(n) != n:
                raise ValueError("constant count must be a nonnegative integer")
        elif self.kind == "uniform":
            lo, hi = self.params
            if lo < 0 or hi < lo or int(lo) != lo or int(hi) != hi:
                raise ValueError("uniform count needs integers 0 <= lo <= hi")
        elif self.kind == "poisson":
            (lam,) = self.params
            if lam < 0:
                raise ValueError("Poisson mean must be nonnegative")
        elif self.kind == "categorical":
            values, probs = self.params
            v, pr = np.asarray(values), np.asarray(probs, dtype=float)
            if v.shape != pr.shape or np.any(v < 0) or np.any(pr < 0) or abs(pr.sum() - 1) > 1e-12:
                raise ValueError("categorical count needs nonnegative values and a probability vector")
        else:
            raise ValueError(f"unknown count law '{self.kind}'")

    @classmethod
    def constant(cls, n: int) -> "CountLaw":
        return cls("constant", (int(n),))

    @classmethod
    def uniform(cls, lo: int, hi: int) -> "CountLaw":
        return cls("uniform", (int(lo), int(hi)))

    @classmethod
    def poisson(cls, lam: float) -> "CountLaw":
        return cls("poisson", (float(lam),))

    @classmethod
    def categorical(cls, values, probs) -> "CountLaw":
        return cls("categorical", (tuple(int(v) for v in values), tuple(float(p) for p in probs)))

    def sample(self, rng: np.random.Generator, m: int) -> np.ndarray:
        if self.kind == "constant":
            return np.full(m, self.params[0], dtype=np.int64)
        if self.kind == "uniform":
            return rng.integers(self.params[0], self.params[1] + 1, size=m)
        if self.kind == "poisson":
            return rng.poisson(self.params[0], size=m)
        values, probs = self.params
        idx = np.searchsorted(np.cumsum(probs), rng.random(m), side="right")
        return np.asarray(values, dtype=np.int64)[np.minimum(idx, len(values) - 1)]

    def prob_at_least_two(self) -> float:
        if self.kind == "constant":
            return float(self.params[0] >= 2)
        if self.kind == "uniform":
            lo, hi = self.params
            return sum(1 for k in range(lo, hi + 1) if k >= 2) / (hi - lo + 1)
        if self.kind == "poisson":
            lam = self.params[0]
            return 1.0 - math.exp(-lam) * (1 + lam)
        values, probs = self.params
        return float(sum(p for v, p in zip(values, probs) if v >= 2))

    def to_dict(self) -> dict[str, Any]:
        if self.kind == "categorical":
            return {"kind": self.kind, "values": list(self.params[0]), "probs": list(self.params[1])}
        names = {"constant": ("n",), "uniform": ("lo", "hi"), "poisson": ("lam",)}[self.kind]
        return {"kind": self.kind, **dict(zip(names, self.params))}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "CountLaw":
        kind = d.get("kind")
        if kind == "constant":
            return cls.constant(d["n"])
        if kind == "uniform":
            return cls.uniform(d["lo"], d["hi"])
        if kind == "poisson":
            return cls.poisson(d["lam"])
        if kind == "categorical":
            return cls.categorical(d["values"], d["probs"])
        raise ValueError(f"unknown count law '{kind}'")


def collective_risk_experiment(
    marginal: LossDistribution,
    weight_law: LossDistribution | None,
    count_law: CountLaw,
    grid=None,
    n_mc: int = DEFAULT_N_MC,
    stream: RngStream | int = 0,
    threads: int | None = None,
) -> tuple[DominanceReport, DominanceReport]:
    """Randomly counted, randomly weighted claims.

    Returns two reports: the average-loss form compares
    ``ΣW_iX_i / ΣW_i`` with ``X·1{N>=1}``, the weighted-sum form compares
    ``ΣW_iX_i`` with ``(ΣW_i)·X``.  ``X`` is the first claim of each path.
    ``weight_law=None`` means unit weights.
    """
    if weight_law is not None and not weight_law.lower > 0:
        raise ValueError("claim weights must be strictly positive")
    grid = default_grid(marginal) if grid is None else np.asarray(grid, dtype=float)
    stream = as_stream(stream)

    def block(rng, m):
        n = count_law.sample(rng, m)
        total = int(n.sum())
        path = np.repeat(np.arange(m), n)
        x = marginal.draw(rng, total) if total else np.empty(0)
        w = weight_law.draw(rng, total) if (weight_law is not None and total) else np.ones(total)
        sw = np.bincount(path, weights=w, minlength=m)
        swx = np.bincount(path, weights=w * x, minlength=m)
        first = np.concatenate(([0], np.cumsum(n)[:-1]))
        has = n >= 1
        x1 = np.zeros(m)
        x1[has] = x[first[has]]
        avg = np.zeros(m)
        avg[has] = swx[has] / sw[has]
        single = n == 1
        avg[single] = x1[single]
        conc_sum = sw * x1
        return np.stack([
            _exceed_counts(avg, grid),
            _exceed_counts(x1, grid),
            _exceed_counts(swx, grid),
            _exceed_counts(conc_sum, grid),
        ])

    c = sum(map_blocks(block, n_mc, stream, threads))
    meta = {"count_law": count_law.kind, "p_n_ge_2": count_law.prob_at_least_two()}
    avg = DominanceReport(grid, c[0], c[1], n_mc, n_mc, label="collective_average", extra=meta)
    tot = DominanceReport(grid, c[2], c[3], n_mc, n_mc, label="collective_weighted_sum", extra=meta)
    return avg, tot


def empirical_fsd(sample_a, sample_b, grid=None, z: float = Z99) -> DominanceReport:
    """Two-sample check of ``A <=_st B``, i.e. ``F_a(t) >= F_b(t)``.

    The diversified side of the report is ``B``.  ``extra`` carries
    ``F_a - F_b`` on the grid, ``break_point`` (the smallest grid point with
    ``F_a < F_b``, or None) and the threshold of the largest violation.
    """
    a = np.sort(np.asarray(sample_a, dtype=float).ravel())
    b = np.sort(np.asarray(sample_b, dtype=float).ravel())
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be nonempty")
    grid = np.unique(np.concatenate([a, b])) if grid is None else np.asarray(grid, dtype=float)
    fa = np.searchsorted(a, grid, side="right") / a.size
    fb = np.searchsorted(b, grid, side="right") / b.size
    diff = fa - fb
    bad = diff < 0
    extra: dict[str, Any] = {
        "cdf_gap": diff.tolist() if diff.size <= 10_000 else None,
        "break_point": float(grid[np.argmax(bad)]) if bad.any() else None,
        "largest_violation": float(-diff.min()) if bad.any() else 0.0,
        "largest_violation_at": float(grid[np.argmin(diff)]) if bad.any() else None,
    }
    lhs_count = b.size - np.searchsorted(b, grid, side="right")
    rhs_count = a.size - np.searchsorted(a, grid, side="right")
    rep = DominanceReport(grid, lhs_count, rhs_count, b.size, a.size, z=z, label="empirical_fsd", extra=extra)
    rep.cdf_gap = diff
    return rep


def _ks_plus(fa: np.ndarray, fb: np.ndarray, n: int, m: int) -> np.ndarray:
    return math.sqrt(n * m / (n + m)) * np.maximum(fb - fa, 0.0).max(axis=-1)


def one_sided_dominance_test(
    sample_a,
    sample_b,
    n_boot: int = 999,
    stream: RngStream | int = 0,
    batch: int = 64,
) -> float:
    """Bootstrap p-value for H0: ``F_a(t) >= F_b(t)`` for all t.

    Statistic ``sup_t sqrt(nm/(n+m)) (F_b(t) - F_a(t))_+`` over the pooled
    points; the null is resampled from the pooled sample with replacement.
    """
    if n_boot < 100:
        raise ValueError("n_boot must be >= 100")
    a = np.asarray(sample_a, dtype=float).ravel()
    b = np.asarray(sample_b, dtype=float).ravel()
    n, m = a.size, b.size
    if n == 0 or m == 0:
        raise ValueError("both samples must be nonempty")
    pooled = np.sort(np.concatenate([a, b]))
    big = pooled.size
    # evaluate only at the last index of each run of tied values
    last = np.flatnonzero(np.append(pooled[1:] != pooled[:-1], True))
    fa = np.searchsorted(np.sort(a), pooled[last], side="right") / n
    fb = np.searchsorted(np.sort(b), pooled[last], side="right") / m
    observed = float(_ks_plus(fa, fb, n, m))

    rng = as_stream(stream).generator()
    exceed = 0
    done = 0
    while done < n_boot:
        rows = min(batch, n_boot - done)
        offs = (np.arange(rows) * big)[:, None]
        ia = rng.integers(0, big, size=(rows, n)) + offs
        ib = rng.integers(0, big, size=(rows, m)) + offs
        ca = np.bincount(ia.ravel(), minlength=rows * big).reshape(rows, big).cumsum(axis=1)[:, last] / n
        cb = np.bincount(ib.ravel(), minlength=rows * big).reshape(rows, big).cumsum(axis=1)[:, last] / m
        stat = _ks_plus(ca, cb, n, m)
        exceed += int(np.count_nonzero(stat >= observed - 1e-12))
        done += rows
    return (1.0 + exceed) / (1.0 + n_boot)
