"""Equilibria of risk-sharing markets for super-Pareto losses.

Three settings are covered:

* the internal market, where every agent starts with one loss and only
  permutations of the initial positions can clear;
* the external market, where ``k`` outside agents per loss take part of the
  risk against a premium and the price solves ``L_E(u) = L_I(-k u)``;
* a finite-mean contrast with ES agents, where losses are shared
  proportionally and each loss has its own price.

Risk values enter only as scalars ``ρ(X)``; helpers turn a risk measure and a
marginal into that scalar.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
from scipy import optimize, stats

from .dependence import Independence, _joint_block
from .distributions import LossDistribution
from .risk_measures import RiskMeasure
from .rng import RngStream, as_stream, concat_blocks, map_blocks

__all__ = [
    "CostFunction",
    "Zero",
    "Linear",
    "Quadratic",
    "ExcessOnly",
    "PiecewiseConvex",
    "cost_from_dict",
    "InternalMarketSpec",
    "ExternalMarketSpec",
    "PriceInterval",
    "EquilibriumResult",
    "EquilibriumError",
    "risk_value",
    "internal_equilibrium_price_interval",
    "identity_allocation",
    "validate_internal_equilibrium",
    "external_equilibrium",
    "external_case",
    "best_response_check",
    "assignment_residual",
    "comparative_statics",
    "es_finite_mean_equilibrium",
    "normal_rvar_constant",
    "normal_rvar_two_agent_check",
]

CONVEXITY_GRID = 128
CASE_TAGS = ("transfer_all", "partial_share", "no_trade", "internal_exchange", "proportional_share")


class EquilibriumError(ArithmeticError):
    """Internal inconsistency in an equilibrium computation (e.g. a lost sign change)."""


# ---------------------------------------------------------------------------
# cost functions


class CostFunction:
    """Convex cost with ``c(0) = 0`` and ``c >= 0``; one-sided derivatives everywhere."""

    kind = ""

    def __call__(self, x):
        raise NotImplementedError

    def d_left(self, x):
        raise NotImplementedError

    def d_right(self, x):
        raise NotImplementedError

    def smooth_away_from_zero(self) -> bool:
        return True

    def strictly_convex_on(self, lo: float, hi: float, points: int = CONVEXITY_GRID) -> bool:
        grid = np.linspace(lo, hi, points)
        d = np.asarray(self.d_right(grid), dtype=float)
        return bool(np.all(np.diff(d) > 0))

    def to_dict(self) -> dict[str, Any]:
        raise NotImplementedError


def _positive(lam: float, name: str = "lambda") -> float:
    lam = float(lam)
    if not (lam > 0 and math.isfinite(lam)):
        raise ValueError(f"{name} must be positive and finite")
    return lam


@dataclass(frozen=True)
class Zero(CostFunction):
    kind = "zero"

    def __call__(self, x):
        return np.zeros_like(np.asarray(x, dtype=float)) + 0.0

    def d_left(self, x):
        return self(x)

    def d_right(self, x):
        return self(x)

    def to_dict(self):
        return {"kind": self.kind}


@dataclass(frozen=True)
class Linear(CostFunction):
    """``λ|x|``."""

    lam: float
    kind = "linear"

    def __post_init__(self):
        object.__setattr__(self, "lam", _positive(self.lam))

    def __call__(self, x):
        return self.lam * np.abs(np.asarray(x, dtype=float))

    def d_left(self, x):
        return np.where(np.asarray(x, dtype=float) > 0, self.lam, -self.lam)

    def d_right(self, x):
        return np.where(np.asarray(x, dtype=float) >= 0, self.lam, -self.lam)

    def to_dict(self):
        return {"kind": self.kind, "lam": self.lam}


@dataclass(frozen=True)
class Quadratic(CostFunction):
    """``λx²``."""

    lam: float
    kind = "quadratic"

    def __post_init__(self):
        object.__setattr__(self, "lam", _positive(self.lam))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return self.lam * x * x

    def d_left(self, x):
        return 2.0 * self.lam * np.asarray(x, dtype=float)

    d_right = d_left

    def to_dict(self):
        return {"kind": self.kind, "lam": self.lam}


@dataclass(frozen=True)
class ExcessOnly(CostFunction):
    """``λ x₊``: only taking on extra exposure is charged."""

    lam: float
    kind = "excess_only"

    def __post_init__(self):
        object.__setattr__(self, "lam", _positive(self.lam))

    def __call__(self, x):
        return self.lam * np.maximum(np.asarray(x, dtype=float), 0.0)

    def d_left(self, x):
        return np.where(np.asarray(x, dtype=float) > 0, self.lam, 0.0)

    def d_right(self, x):
        return np.where(np.asarray(x, dtype=float) >= 0, self.lam, 0.0)

    def to_dict(self):
        return {"kind": self.kind, "lam": self.lam}


class PiecewiseConvex(CostFunction):
    """Cost given by a table of derivative values.

    ``x`` is nondecreasing and ``d`` is nondecreasing.  Between knots ``c'``
    is linear; beyond the end knots it continues with the end segments'
    slopes.  A knot listed twice carries a jump: the first value is the
    left derivative there and the second the right derivative.  The cost is
    ``c(x) = ∫_0^x c'``, so ``c(0) = 0``; nonnegativity requires
    ``c'(0-) <= 0 <= c'(0+)``.
    """

    kind = "piecewise_convex"

    def __init__(self, x: Sequence[float], d: Sequence[float]):
        x = np.asarray(x, dtype=float)
        d = np.asarray(d, dtype=float)
        if x.ndim != 1 or x.shape != d.shape or x.size < 2:
            raise ValueError("piecewise cost table needs at least two (x, c') rows")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(d))):
            raise ValueError("piecewise cost table has non-finite entries")
        if np.any(np.diff(x) < 0) or np.any(np.diff(d) < 0):
            raise ValueError("piecewise cost table needs nondecreasing x and nondecreasing c' (convexity)")
        ux, counts = np.unique(x, return_counts=True)
        if np.any(counts > 2):
            raise ValueError("a knot may appear at most twice (left and right derivative)")
        if ux.size < 2:
            raise ValueError("piecewise cost table needs two distinct knots")
        self.x = x
        self.d = d
        self._jumps = ux[counts == 2]
        # continuous interpolation nodes: distinct knots with left/right values
        self._ux = ux
        first = np.searchsorted(x, ux, side="left")
        last = np.searchsorted(x, ux, side="right") - 1
        self._dl = d[first]
        self._dr = d[last]
        self._lo_slope = (self._dl[1] - self._dr[0]) / (ux[1] - ux[0])
        self._hi_slope = (self._dl[-1] - self._dr[-2]) / (ux[-1] - ux[-2])
        if self.d_left(0.0) > 0 or self.d_right(0.0) < 0:
            raise ValueError("cost must be minimized at 0 (need c'(0-) <= 0 <= c'(0+))")

    def _deriv(self, x, side: str):
        xa = np.asarray(x, dtype=float)
        x1 = np.atleast_1d(xa)
        ux, dl, dr = self._ux, self._dl, self._dr
        j = np.clip(np.searchsorted(ux, x1, side="right") - 1, 0, ux.size - 2)
        t = (x1 - ux[j]) / (ux[j + 1] - ux[j])
        out = dr[j] + t * (dl[j + 1] - dr[j])
        below, above = x1 < ux[0], x1 > ux[-1]
        out[below] = dl[0] + self._lo_slope * (x1[below] - ux[0])
        out[above] = dr[-1] + self._hi_slope * (x1[above] - ux[-1])
        k = np.searchsorted(ux, x1)
        kc = np.minimum(k, ux.size - 1)
        at = ux[kc] == x1
        out[at] = (dl if side == "l" else dr)[kc[at]]
        return float(out[0]) if xa.ndim == 0 else out

    def d_left(self, x):
        return self._deriv(x, "l")

    def d_right(self, x):
        return self._deriv(x, "r")

    def __call__(self, x):
        xa = np.asarray(x, dtype=float)
        out = self._antideriv(np.atleast_1d(xa)) - self._antideriv(np.zeros(1))[0]
        return float(out[0]) if xa.ndim == 0 else out

    def _antideriv(self, x: np.ndarray) -> np.ndarray:
        """Exact ``∫_{ux_0}^x c'``; ``c'`` is linear on each segment, so each piece is quadratic."""
        ux, dl, dr = self._ux, self._dl, self._dr
        h = np.diff(ux)
        knots = np.concatenate(([0.0], np.cumsum(0.5 * h * (dr[:-1] + dl[1:]))))
        j = np.clip(np.searchsorted(ux, x, side="right") - 1, 0, ux.size - 2)
        s = x - ux[j]
        slope = (dl[j + 1] - dr[j]) / h[j]
        out = knots[j] + s * dr[j] + 0.5 * slope * s * s
        below, above = x < ux[0], x > ux[-1]
        sb = x[below] - ux[0]
        out[below] = sb * dl[0] + 0.5 * self._lo_slope * sb * sb
        sa = x[above] - ux[-1]
        out[above] = knots[-1] + sa * dr[-1] + 0.5 * self._hi_slope * sa * sa
        return out

    def smooth_away_from_zero(self) -> bool:
        return bool(np.all(self._jumps == 0.0))

    def to_dict(self):
        return {"kind": self.kind, "rows": [[float(a), float(b)] for a, b in zip(self.x, self.d)]}

    def __repr__(self):
        return f"PiecewiseConvex(rows={len(self.x)})"

    def __eq__(self, other):
        return isinstance(other, PiecewiseConvex) and np.array_equal(self.x, other.x) and np.array_equal(self.d, other.d)

    __hash__ = None


def cost_from_dict(d: dict[str, Any]) -> CostFunction:
    kind = d.get("kind")
    if kind == "zero":
        return Zero()
    if kind == "linear":
        return Linear(d["lam"])
    if kind == "quadratic":
        return Quadratic(d["lam"])
    if kind == "excess_only":
        return ExcessOnly(d["lam"])
    if kind == "piecewise_convex":
        rows = np.asarray(d["rows"], dtype=float)
        if rows.ndim != 2 or rows.shape[1] != 2:
            raise ValueError("piecewise cost rows must be (x, c') pairs")
        return PiecewiseConvex(rows[:, 0], rows[:, 1])
    raise ValueError(f"unknown cost kind '{kind}'")


def _f(x) -> float:
    return float(np.asarray(x, dtype=float))


# ---------------------------------------------------------------------------
# result containers


@dataclass(frozen=True)
class PriceInterval:
    lo: float
    hi: float

    @property
    def empty(self) -> bool:
        return not self.lo <= self.hi

    @property
    def single(self) -> bool:
        return self.lo == self.hi

    def __contains__(self, p: float) -> bool:
        return self.lo <= p <= self.hi

    def to_dict(self):
        return {"lo": self.lo, "hi": self.hi, "empty": self.empty}


@dataclass
class EquilibriumResult:
    case: str
    price: np.ndarray
    internal: np.ndarray
    external: np.ndarray
    price_interval: PriceInterval | None = None
    diagnostics: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.case not in CASE_TAGS:
            raise ValueError(f"unknown case tag '{self.case}'")

    @property
    def p(self) -> float:
        return float(self.price[0])

    def to_dict(self) -> dict[str, Any]:
        return {
            "case": self.case,
            "price": self.price.tolist(),
            "internal": self.internal.tolist(),
            "external": self.external.tolist(),
            "price_interval": None if self.price_interval is None else self.price_interval.to_dict(),
            "diagnostics": _jsonable(self.diagnostics),
        }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def risk_value(rho: RiskMeasure | float, marginal: LossDistribution | None = None) -> float:
    """``ρ(X)`` from a number or from a measure and a marginal."""
    if isinstance(rho, RiskMeasure):
        if marginal is None:
            raise ValueError("a marginal is required to evaluate a risk measure")
        return float(rho(marginal))
    v = float(rho)
    if not math.isfinite(v):
        raise ValueError("risk value must be finite")
    return v


# ---------------------------------------------------------------------------
# internal market


@dataclass
class InternalMarketSpec:
    a: np.ndarray
    risk_values: np.ndarray
    costs: list[CostFunction]

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=float).ravel()
        self.risk_values = np.asarray(self.risk_values, dtype=float).ravel()
        self.costs = list(self.costs)
        n = self.a.size
        if n < 1:
            raise ValueError("need at least one agent")
        if self.risk_values.size != n or len(self.costs) != n:
            raise ValueError("exposures, risk values and costs must have one entry per agent")
        if np.any(self.a <= 0) or not np.all(np.isfinite(self.a)):
            raise ValueError("exposures must be positive and finite")
        if not np.all(np.isfinite(self.risk_values)):
            raise ValueError("risk values must be finite")

    @property
    def n(self) -> int:
        return int(self.a.size)

    @classmethod
    def from_measures(cls, a, measures: Sequence[RiskMeasure], marginal: LossDistribution, costs):
        return cls(a, [risk_value(m, marginal) for m in measures], costs)


def internal_equilibrium_price_interval(spec: InternalMarketSpec) -> PriceInterval:
    """``∩_i [ρ_i + c'_{i-}(0), ρ_i + c'_{i+}(0)] ∩ [0, ∞)``.

    Every price in the interval makes the initial allocation an equilibrium.
    An empty interval is returned as is: this sufficient condition then says
    nothing and existence is unknown.
    """
    lo = max(float(r) + _f(c.d_left(0.0)) for r, c in zip(spec.risk_values, spec.costs))
    hi = min(float(r) + _f(c.d_right(0.0)) for r, c in zip(spec.risk_values, spec.costs))
    return PriceInterval(max(lo, 0.0), hi)


def identity_allocation(spec: InternalMarketSpec) -> np.ndarray:
    """Row ``i`` is agent ``i``'s exposure vector ``a_i e_i``."""
    return np.diag(spec.a)


def _close(x: float, y: float, rtol: float = 1e-12) -> bool:
    return abs(x - y) <= rtol * max(1.0, abs(x), abs(y))


def validate_internal_equilibrium(spec: InternalMarketSpec, p_vec, allocation) -> dict[str, Any]:
    """Check the necessary conditions on a candidate internal equilibrium.

    ``constant_price``: all prices equal.  ``permutation``: each agent holds
    exactly one whole initial position and every position is held once.
    ``necessary_condition``: for each ``i``,
    ``max_j c'_{i+}(a_j - a_i) >= p - ρ_i >= min_j c'_{i-}(a_j - a_i)``.
    ``clearance``: column sums equal the initial exposures.
    """
    n = spec.n
    p = np.asarray(p_vec, dtype=float).ravel()
    w = np.asarray(allocation, dtype=float)
    out: dict[str, Any] = {"checks": {}, "details": {}}
    checks = out["checks"]
    if p.size != n or w.shape != (n, n):
        checks.update(constant_price=False, permutation=False, necessary_condition=False, clearance=False)
        out["details"]["shape"] = f"expected {n} prices and an {n}x{n} allocation"
        out["passed"] = False
        return out
    checks["constant_price"] = bool(all(_close(x, p[0]) for x in p))

    held = []
    perm_ok = bool(np.all(w >= 0))
    for row in w:
        nz = np.flatnonzero(row != 0)
        if nz.size != 1:
            perm_ok = False
            held.append(-1)
            continue
        j = int(nz[0])
        held.append(j)
        perm_ok &= _close(row[j], spec.a[j])
    perm_ok &= sorted(held) == list(range(n))
    checks["permutation"] = bool(perm_ok)
    out["details"]["assignment"] = held

    tol = 1e-12 * (1.0 + abs(float(p[0])))
    slack = []
    cond_ok = True
    for i in range(n):
        diffs = spec.a - spec.a[i]
        upper = float(np.max(spec.costs[i].d_right(diffs)))
        lower = float(np.min(spec.costs[i].d_left(diffs)))
        gap = float(p[i]) - float(spec.risk_values[i])
        ok = lower - tol <= gap <= upper + tol
        cond_ok &= ok
        slack.append((lower, gap, upper))
    checks["necessary_condition"] = bool(cond_ok)
    out["details"]["condition_bounds"] = slack

    resid = w.sum(axis=0) - spec.a
    checks["clearance"] = bool(np.max(np.abs(resid)) <= 1e-12 * max(1.0, float(np.max(spec.a))))
    out["details"]["clearance_residual"] = float(np.max(np.abs(resid)))

    interval = internal_equilibrium_price_interval(spec)
    out["price_interval"] = interval.to_dict()
    out["sufficient_condition"] = bool(not interval.empty and interval.lo - tol <= p[0] <= interval.hi + tol)
    out["passed"] = bool(all(checks.values()))
    out["note"] = "any permutation of the initial positions is an equally valid allocation"
    return out


def internal_equilibrium(spec: InternalMarketSpec) -> EquilibriumResult:
    """Canonical equilibrium (lowest price of the interval, identity allocation) or ``unknown``."""
    interval = internal_equilibrium_price_interval(spec)
    n = spec.n
    if interval.empty:
        return EquilibriumResult(
            "internal_exchange",
            np.full(n, np.nan),
            np.zeros((n, n)),
            np.zeros((0, n)),
            interval,
            {"status": "unknown", "reason": "price interval is empty; the sufficient condition gives no equilibrium"},
        )
    p = interval.lo
    alloc = identity_allocation(spec)
    diag = validate_internal_equilibrium(spec, np.full(n, p), alloc)
    diag["status"] = "equilibrium"
    return EquilibriumResult("internal_exchange", np.full(n, p), alloc, np.zeros((0, n)), interval, diag)


# ---------------------------------------------------------------------------
# external market


@dataclass
class ExternalMarketSpec:
    n: int
    k: int
    a: float
    rho_i: float
    rho_e: float
    cost_i: CostFunction
    cost_e: CostFunction

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError("n must be a positive integer")
        if int(self.k) != self.k or self.k < 1:
            raise ValueError("k must be a positive integer")
        self.n, self.k = int(self.n), int(self.k)
        self.a = float(self.a)
        if not (self.a > 0 and math.isfinite(self.a)):
            raise ValueError("common exposure a must be positive")
        self.rho_i = risk_value(self.rho_i)
        self.rho_e = risk_value(self.rho_e)
        for name, c in (("internal", self.cost_i), ("external", self.cost_e)):
            if not c.strictly_convex_on(-2 * self.a, 2 * self.a):
                raise ValueError(f"{name} cost is not strictly convex on [-2a, 2a]")
            if not c.smooth_away_from_zero():
                raise ValueError(f"{name} cost must be differentiable away from 0")

    @property
    def m(self) -> int:
        return self.k * self.n

    def L_E(self, b: float) -> float:
        # only nonnegative external positions are allowed, so L_E(0) is the right derivative
        return _f(self.cost_e.d_right(b)) + self.rho_e

    def L_I(self, b: float) -> float:
        return _f(self.cost_i.d_right(b)) + self.rho_i

    def L_I_minus0(self) -> float:
        return _f(self.cost_i.d_left(0.0)) + self.rho_i

    def L_I_plus0(self) -> float:
        return _f(self.cost_i.d_right(0.0)) + self.rho_i

    def to_dict(self):
        return {
            "n": self.n, "k": self.k, "a": self.a, "rho_i": self.rho_i, "rho_e": self.rho_e,
            "cost_i": self.cost_i.to_dict(), "cost_e": self.cost_e.to_dict(),
        }


def external_case(spec: ExternalMarketSpec) -> str:
    """Exactly one of ``transfer_all``, ``partial_share``, ``no_trade``."""
    a, k = spec.a, spec.k
    c1 = spec.L_E(a / k) < spec.L_I(-a)
    c3 = spec.L_E(0.0) >= spec.L_I_minus0()
    c2 = (not c1) and not c3
    if c1 + c2 + c3 != 1:
        raise EquilibriumError("case predicates are not mutually exclusive")
    return "transfer_all" if c1 else ("partial_share" if c2 else "no_trade")


def _allocations(spec: ExternalMarketSpec, u: float, w: float) -> tuple[np.ndarray, np.ndarray]:
    n, k = spec.n, spec.k
    internal = np.diag(np.full(n, w))
    external = np.zeros((spec.m, n))
    external[np.arange(spec.m), np.arange(spec.m) // k] = u
    return internal, external


def assignment_residual(spec: ExternalMarketSpec, u: float, w: float, ext_loss, int_loss) -> float:
    """Largest ``|u·#{k_j=s} + w·#{ℓ_i=s} - a|`` over losses ``s``."""
    ext = np.bincount(np.asarray(ext_loss, dtype=int), minlength=spec.n)
    intl = np.bincount(np.asarray(int_loss, dtype=int), minlength=spec.n)
    return float(np.max(np.abs(u * ext + w * intl - spec.a)))


def external_equilibrium(spec: ExternalMarketSpec, tol: float | None = None) -> EquilibriumResult:
    """Equilibrium of the market with ``m = k n`` external agents.

    ``transfer_all``: ``p = L_E(a/k)``, all risk moves out.  ``partial_share``:
    ``u*`` solves ``L_E(u) = L_I(-k u)`` on ``(0, a/k]``, ``w* = a - k u*``.
    ``no_trade``: ``u* = 0``, ``w* = a``, any ``p`` in
    ``[L_I^-(0), min(L_E(0), L_I^+(0))]``; the lower end is reported.
    Canonical allocations give external agent ``j`` loss ``⌊j/k⌋`` and
    internal agent ``i`` loss ``i``.
    """
    a, k = spec.a, spec.k
    case = external_case(spec)
    diag: dict[str, Any] = {"case_values": {
        "L_E(a/k)": spec.L_E(a / k), "L_I(-a)": spec.L_I(-a),
        "L_E(0)": spec.L_E(0.0), "L_I-(0)": spec.L_I_minus0(), "L_I+(0)": spec.L_I_plus0(),
    }}
    interval = None
    if case == "transfer_all":
        u, w = a / k, 0.0
        p = spec.L_E(u)
    elif case == "no_trade":
        u, w = 0.0, a
        interval = PriceInterval(spec.L_I_minus0(), min(spec.L_E(0.0), spec.L_I_plus0()))
        p = interval.lo
    else:
        def g(x):
            return spec.L_E(x) - spec.L_I(-k * x)

        hi = a / k
        g_hi = g(hi)
        if g_hi == 0.0:
            u = hi
        else:
            # g(0+) uses the left derivative of c_I at 0
            g_lo = spec.L_E(0.0) - spec.L_I_minus0()
            if not (g_lo < 0 < g_hi):
                raise EquilibriumError(f"no sign change on (0, a/k]: g(0+)={g_lo}, g(a/k)={g_hi}")
            u = optimize.brentq(lambda x: g(x) if x > 0 else g_lo, 0.0, hi,
                                xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
        p = spec.L_E(u)
        w = a - k * u
        limit = (1e-10 * (1.0 + abs(p))) if tol is None else tol
        resid = abs(spec.L_E(u) - spec.L_I(-k * u))
        diag["bisection_residual"] = resid
        diag["tol"] = limit
        if resid > limit:
            raise EquilibriumError(f"root residual {resid:.3g} exceeds tolerance {limit:.3g}")
        if u < a / (2 * k):
            diag["structure"] = "each loss is shared by exactly one internal agent and k external agents"
        else:
            diag["structure"] = "other assignments may also clear; the canonical one is verified"
        ext_loss = np.arange(spec.m) // k
        int_loss = np.arange(spec.n)
        diag["assignment_residual"] = assignment_residual(spec, u, w, ext_loss, int_loss)
    internal, external = _allocations(spec, u, w)
    diag["clearance_residual"] = float(np.max(np.abs(internal.sum(axis=0) + external.sum(axis=0) - a)))
    diag["u"] = u
    diag["w"] = w
    return EquilibriumResult(case, np.full(spec.n, p), internal, external, interval, diag)


def best_response_check(spec: ExternalMarketSpec, result: EquilibriumResult, points: int = 2001) -> dict[str, Any]:
    """Grid search over each side's reduced objective at the returned price.

    External: ``u(ρ_E - p) + c_E(u)``; internal: ``w(ρ_I - p) + a p + c_I(w - a)``.
    The grid spans ``[0, 4a]``; a violation is the amount by which the best
    grid point beats the returned position.
    """
    p = result.p
    u, w = result.diagnostics["u"], result.diagnostics["w"]
    a = spec.a
    grid = np.linspace(0.0, 4.0 * a, points)

    def phi_e(x):
        return x * (spec.rho_e - p) + np.asarray(spec.cost_e(x), dtype=float)

    def phi_i(x):
        return x * (spec.rho_i - p) + a * p + np.asarray(spec.cost_i(np.asarray(x) - a), dtype=float)

    ve, vi = float(phi_e(u)), float(phi_i(w))
    ge, gi = np.asarray(phi_e(grid)), np.asarray(phi_i(grid))
    tol = 1e-9 * (1.0 + abs(ve) + abs(vi) + abs(p) * a)
    viol_e = max(0.0, ve - float(ge.min()))
    viol_i = max(0.0, vi - float(gi.min()))
    return {
        "external_violation": viol_e,
        "internal_violation": viol_i,
        "tol": tol,
        "passed": bool(viol_e <= tol and viol_i <= tol),
    }


def comparative_statics(spec: ExternalMarketSpec, ks: Sequence[int]) -> dict[str, np.ndarray]:
    """Price, ``u*`` and ``k u*`` as ``k`` varies with everything else fixed."""
    ps, us = [], []
    for k in ks:
        s = ExternalMarketSpec(spec.n, int(k), spec.a, spec.rho_i, spec.rho_e, spec.cost_i, spec.cost_e)
        r = external_equilibrium(s)
        ps.append(r.p)
        us.append(r.diagnostics["u"])
    ks_arr = np.asarray(ks, dtype=float)
    us_arr = np.asarray(us)
    return {"k": ks_arr, "p": np.asarray(ps), "u": us_arr, "ku": ks_arr * us_arr}


# ---------------------------------------------------------------------------
# finite-mean contrast


def es_finite_mean_equilibrium(
    a,
    marginal: LossDistribution,
    q: float,
    n_mc: int = 10**6,
    stream: RngStream | int = 0,
    threads: int | None = None,
) -> EquilibriumResult:
    """ES agents sharing iid finite-mean losses.

    The price of loss ``i`` is ``E[X_i | A]`` with
    ``A = {Σ a_j X_j >= VaR_q(Σ a_j X_j)}`` and agent ``i`` holds the fraction
    ``a_i / Σ a_j`` of every loss.  The Euler residual compares
    ``Σ a_i p_i`` with ``ES_q`` of the aggregate.
    """
    a = np.asarray(a, dtype=float).ravel()
    if a.size < 1 or np.any(a <= 0) or not np.all(np.isfinite(a)):
        raise ValueError("exposures must be positive and finite")
    if not 0.0 < q < 1.0:
        raise ValueError("q must lie in (0, 1)")
    if not marginal.has_finite_mean:
        raise ValueError(
            "marginal has infinite mean: ES is infinite, and for super-Pareto losses the "
            "internal market only clears by permuting whole positions"
        )
    n = a.size
    joint = _joint_block(marginal, Independence(), n)
    x = concat_blocks(map_blocks(joint, n_mc, as_stream(stream), threads))
    s = x @ a
    order = np.sort(s)
    kq = max(int(math.ceil(n_mc * q)) - 1, 0)
    var_q = float(order[kq])
    tail = s >= var_q
    cnt = int(tail.sum())
    xt = x[tail]
    price = xt.mean(axis=0)
    se = xt.std(axis=0, ddof=1) / math.sqrt(cnt) if cnt > 1 else np.zeros(n)
    st = s[tail]
    es_q = float(st.mean())
    es_se = float(st.std(ddof=1) / math.sqrt(cnt)) if cnt > 1 else 0.0
    euler = float(a @ price)
    internal = np.outer(a / a.sum(), a)
    diag = {
        "var_q": var_q,
        "tail_count": cnt,
        "price_se": se,
        "es_q": es_q,
        "es_se": es_se,
        "euler_sum": euler,
        "euler_residual": euler - es_q,
        "clearance_residual": float(np.max(np.abs(internal.sum(axis=0) - a))),
    }
    return EquilibriumResult("proportional_share", price, internal, np.zeros((0, n)), None, diag)


def normal_rvar_constant(p: float, q: float) -> float:
    """``C_{p,q}`` with ``RVaR_{p,q}(N(μ, σ²)) = μ + σ C_{p,q}``."""
    if not 0.0 <= p < q < 1.0:
        raise ValueError("need 0 <= p < q < 1")
    phi = stats.norm.pdf
    lo = 0.0 if p == 0.0 else float(phi(stats.norm.ppf(p)))
    return (lo - float(phi(stats.norm.ppf(q)))) / (q - p)


def normal_rvar_two_agent_check(p: float, q: float, grid_step: float = 0.05) -> dict[str, Any]:
    """Two agents, iid standard normal losses, RVaR preferences.

    With ``p* = C_{p,q}/√2`` the objective net of constants is
    ``r(x, y) = p* √(2x² + 2y²) - p*(x + y)``.  The check scans the
    ``grid_step`` lattice on ``[0, 1]²``, locates the minimizer on the budget
    line ``x + y = 1`` and reports how far ``r`` dips below zero anywhere.
    """
    c = normal_rvar_constant(p, q)
    ps = c / math.sqrt(2.0)
    steps = int(round(1.0 / grid_step))
    if steps < 1 or not math.isclose(steps * grid_step, 1.0, rel_tol=1e-9):
        raise ValueError("grid_step must divide 1")
    g = np.linspace(0.0, 1.0, steps + 1)
    xx, yy = np.meshgrid(g, g, indexing="ij")

    def r(x, y):
        return ps * np.sqrt(2 * x * x + 2 * y * y) - ps * (x + y)

    rv = r(xx, yy)
    line = r(g, 1.0 - g)
    i = int(np.argmin(line))
    diag_vals = r(g, g)
    return {
        "C": c,
        "p_star": ps,
        "argmin": (float(g[i]), float(1.0 - g[i])),
        "min_on_line": float(line[i]),
        "max_violation": float(max(0.0, -rv.min())),
        "diagonal_max_abs": float(np.max(np.abs(diag_vals))),
        "corner": float(r(1.0, 0.0)),
        "corner_expected": ps * (math.sqrt(2.0) - 1.0),
        "passed": bool(abs(g[i] - 0.5) < 1e-12 and rv.min() >= -1e-12),
    }
