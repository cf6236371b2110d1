"""VaR, ES, RVaR, distortion risk measures and expected disutility.

Distortion values are computed from the quantile representation
``∫ VaR_{1-s} dh(s)``: linear pieces of ``h`` contribute scaled quantile
integrals and jumps contribute a left or right quantile.  The survival-integral
form is available separately as ``distortion_survival`` and the two are
checked against each other in the tests.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np
from scipy import integrate

from .distributions import Discrete, Empirical, LossDistribution, loss_from_dict
from .rng import RngStream, as_stream

__all__ = [
    "UnreliableEstimateWarning",
    "as_distribution",
    "var",
    "es",
    "rvar",
    "DistortionFn",
    "distortion",
    "distortion_survival",
    "is_degenerate_distortion",
    "MonotoneFn",
    "Linear",
    "LimitedLiability",
    "SShape",
    "DisutilityEstimate",
    "expected_disutility",
    "RiskMeasure",
    "VaR",
    "ES",
    "RVaR",
    "Distortion",
    "ExpectedDisutility",
    "risk_measure_from_dict",
]

DEGENERACY_GRID = 4096
ES_PRESCREEN_ALPHA = 1.2


class UnreliableEstimateWarning(UserWarning):
    """A sample-based estimate whose integrand may not have a finite mean."""


def as_distribution(loss) -> LossDistribution:
    """Accept a distribution, a constant, or a sample."""
    if isinstance(loss, LossDistribution):
        return loss
    arr = np.asarray(loss, dtype=float)
    if arr.ndim == 0:
        return Discrete([float(arr)], [1.0])
    if arr.size == 0:
        raise ValueError("empty sample")
    if not np.all(np.isfinite(arr)):
        raise ValueError("sample contains non-finite values")
    return Empirical(arr)


def _point_mass(dist: LossDistribution) -> float | None:
    lo, hi = dist.lower, dist.upper
    return float(lo) if lo == hi else None


def _check_level(p: float, name: str = "p") -> float:
    p = float(p)
    if not 0.0 < p < 1.0:
        raise ValueError(f"{name} must lie in (0, 1), got {p}")
    return p


def var(loss, p: float) -> float:
    """Left p-quantile."""
    return float(as_distribution(loss).quantile(_check_level(p)))


def _prescreen_sample(loss) -> None:
    if isinstance(loss, LossDistribution):
        return
    arr = np.asarray(loss, dtype=float)
    if arr.ndim == 0 or arr.size < 40 or np.any(arr <= 0):
        return
    from .tail_estimation import default_threshold_k, hill_estimator

    res = hill_estimator(arr, default_threshold_k(arr))
    if res.alpha_hat <= ES_PRESCREEN_ALPHA:
        warnings.warn(
            f"Hill tail index {res.alpha_hat:.3f} <= {ES_PRESCREEN_ALPHA}: sample ES is unreliable",
            UnreliableEstimateWarning,
            stacklevel=3,
        )


def es(loss, p: float) -> float:
    """Expected shortfall; ``math.inf`` when the analytic mean is infinite."""
    p = _check_level(p)
    _prescreen_sample(loss)
    dist = as_distribution(loss)
    c = _point_mass(dist)
    if c is not None:
        return c
    if not dist.has_finite_mean:
        return math.inf
    return dist.quantile_integral(p, 1.0) / (1.0 - p)


def rvar(loss, p: float, q: float) -> float:
    """Average of VaR over (p, q)."""
    p, q = float(p), float(q)
    if not (0.0 <= p < q < 1.0):
        raise ValueError(f"need 0 <= p < q < 1, got p={p}, q={q}")
    dist = as_distribution(loss)
    c = _point_mass(dist)
    if c is not None:
        return c
    return dist.quantile_integral(p, q) / (q - p)


# ---------------------------------------------------------------------------
# distortion functions


class DistortionFn:
    """Nondecreasing ``h`` on [0, 1] with ``h(0)=0`` and ``h(1)=1``.

    Stored as knots ``0 = t_0 < ... < t_K = 1`` with the left limit, the value
    and the right limit at each knot; between knots ``h`` is linear from the
    right limit at ``t_i`` to the left limit at ``t_{i+1}``.
    """

    def __init__(self, t, left, value, right, name: str = "table"):
        t = np.asarray(t, dtype=float)
        left = np.asarray(left, dtype=float)
        value = np.asarray(value, dtype=float)
        right = np.asarray(right, dtype=float)
        if t.ndim != 1 or t.size < 2 or not (left.shape == value.shape == right.shape == t.shape):
            raise ValueError("distortion table needs matching arrays with at least two knots")
        if t[0] != 0.0 or t[-1] != 1.0 or np.any(np.diff(t) <= 0):
            raise ValueError("distortion knots must increase from 0 to 1")
        if value[0] != 0.0 or value[-1] != 1.0:
            raise ValueError("distortion must satisfy h(0)=0 and h(1)=1")
        left = left.copy()
        right = right.copy()
        left[0] = 0.0
        right[-1] = 1.0
        seq = np.column_stack([left, value, right]).ravel()
        if np.any(np.diff(seq) < -1e-15) or not np.all(np.isfinite(seq)):
            raise ValueError("distortion must be nondecreasing")
        self.t, self.left, self.value, self.right = t, left, value, right
        self.name = name

    # named forms
    @classmethod
    def identity(cls) -> "DistortionFn":
        return cls([0, 1], [0, 1], [0, 1], [0, 1], name="identity")

    @classmethod
    def var_step(cls, p: float) -> "DistortionFn":
        """``h(s) = 1{s > 1-p}``, the distortion of the left p-quantile."""
        p = _check_level(p)
        return cls([0, 1 - p, 1], [0, 0, 1], [0, 0, 1], [0, 1, 1], name=f"var_step({p:g})")

    @classmethod
    def es_ramp(cls, p: float) -> "DistortionFn":
        """``h(s) = min(s/(1-p), 1)``."""
        p = _check_level(p)
        return cls([0, 1 - p, 1], [0, 1, 1], [0, 1, 1], [0, 1, 1], name=f"es_ramp({p:g})")

    @classmethod
    def rvar_ramp(cls, p: float, q: float) -> "DistortionFn":
        if not (0.0 <= p < q < 1.0):
            raise ValueError("need 0 <= p < q < 1")
        if p == 0.0:
            t = [0, 1 - q, 1]
            v = [0, 0, 1]
        else:
            t = [0, 1 - q, 1 - p, 1]
            v = [0, 0, 1, 1]
        return cls(t, v, v, v, name=f"rvar_ramp({p:g},{q:g})")

    @classmethod
    def esssup(cls) -> "DistortionFn":
        """``h(s) = 1{0 < s <= 1}``."""
        return cls([0, 1], [0, 1], [0, 1], [1, 1], name="esssup")

    @classmethod
    def essinf(cls) -> "DistortionFn":
        """``h(s) = 1{s = 1}``."""
        return cls([0, 1], [0, 0], [0, 1], [0, 1], name="essinf")

    @classmethod
    def mixture(cls, weights: Sequence[float], parts: Sequence["DistortionFn"]) -> "DistortionFn":
        w = np.asarray(weights, dtype=float)
        if w.size != len(parts) or np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("mixture weights must be a probability vector matching the parts")
        t = np.unique(np.concatenate([h.t for h in parts]))
        left = sum(wi * h.limit(t, -1) for wi, h in zip(w, parts))
        value = sum(wi * h(t) for wi, h in zip(w, parts))
        right = sum(wi * h.limit(t, +1) for wi, h in zip(w, parts))
        value[0], value[-1] = 0.0, 1.0
        name = "+".join(f"{wi:g}*{h.name}" for wi, h in zip(w, parts))
        return cls(t, left, value, right, name=name)

    @classmethod
    def from_table(cls, t, h) -> "DistortionFn":
        """Build from (t, h(t)) rows sorted by t.

        Repeated t values encode a jump.  With two rows the first gives the
        left limit and the second the right limit; the value at the knot is
        the left limit except at t=1, where it is the last row.  Three rows
        give left limit, value and right limit explicitly.
        """
        t = np.asarray(t, dtype=float)
        h = np.asarray(h, dtype=float)
        if t.shape != h.shape or t.size == 0:
            raise ValueError("t and h must be nonempty and of equal length")
        if np.any(np.diff(t) < 0):
            raise ValueError("t must be sorted ascending")
        knots, lefts, vals, rights = [], [], [], []
        i = 0
        while i < t.size:
            j = i
            while j + 1 < t.size and t[j + 1] == t[i]:
                j += 1
            rows = h[i : j + 1]
            if rows.size > 3:
                raise ValueError(f"more than three rows at t={t[i]:g}")
            lo, hi = rows[0], rows[-1]
            if rows.size == 3:
                mid = rows[1]
            elif t[i] == 1.0:
                mid = hi
            else:
                mid = lo
            knots.append(t[i])
            lefts.append(lo)
            vals.append(mid)
            rights.append(hi)
            i = j + 1
        return cls(knots, lefts, vals, rights)

    def to_table(self) -> list[tuple[float, float]]:
        """Rows in the ``from_table`` convention."""
        rows = []
        for t, lo, v, hi in zip(self.t, self.left, self.value, self.right):
            if t == 0.0:
                trip = [v] if hi == v else [v, hi]
                if hi != v:
                    trip = [v, v, hi]
            elif t == 1.0:
                trip = [lo] if lo == v else [lo, v]
            elif lo == v == hi:
                trip = [v]
            elif lo == v:
                trip = [lo, hi]
            else:
                trip = [lo, v, hi]
            rows.extend((float(t), float(x)) for x in trip)
        return rows

    # evaluation
    def __call__(self, s):
        sa = np.asarray(s, dtype=float)
        if np.any((sa < 0) | (sa > 1)):
            raise ValueError("distortion argument must lie in [0, 1]")
        i = np.clip(np.searchsorted(self.t, sa, side="right") - 1, 0, self.t.size - 2)
        t0, t1 = self.t[i], self.t[i + 1]
        frac = (sa - t0) / (t1 - t0)
        out = self.right[i] + (self.left[i + 1] - self.right[i]) * frac
        exact = np.searchsorted(self.t, sa, side="left")
        hit = (exact < self.t.size) & (self.t[np.minimum(exact, self.t.size - 1)] == sa)
        out = np.where(hit, self.value[np.minimum(exact, self.t.size - 1)], out)
        return float(out) if np.ndim(s) == 0 else out

    def limit(self, s, side: int):
        """One-sided limit ``h(s-)`` (side=-1) or ``h(s+)`` (side=+1)."""
        sa = np.asarray(s, dtype=float)
        out = np.asarray(self(sa), dtype=float).copy()
        exact = np.searchsorted(self.t, sa, side="left")
        idx = np.minimum(exact, self.t.size - 1)
        hit = (exact < self.t.size) & (self.t[idx] == sa)
        src = self.left if side < 0 else self.right
        out = np.where(hit, src[idx], out)
        return float(out) if np.ndim(s) == 0 else out

    @property
    def slopes(self) -> np.ndarray:
        return (self.left[1:] - self.right[:-1]) / np.diff(self.t)

    @property
    def vanishes_near_zero(self) -> bool:
        return self.right[0] == 0.0 and self.slopes[0] == 0.0

    def to_dict(self) -> dict[str, Any]:
        return {"kind": "table", "rows": [list(r) for r in self.to_table()]}

    def __repr__(self) -> str:
        return f"DistortionFn({self.name})"


def _safe_sum(terms: list[float]) -> float:
    pos = any(t == math.inf for t in terms)
    neg = any(t == -math.inf for t in terms)
    if pos and neg:
        raise ValueError("distortion value is undefined (inf - inf)")
    if pos:
        return math.inf
    if neg:
        return -math.inf
    return float(math.fsum(terms))


def distortion(loss, h: DistortionFn) -> float:
    """``∫ VaR_{1-s}(X) dh(s)`` with exact handling of jumps of ``h``."""
    dist = as_distribution(loss)
    c = _point_mass(dist)
    if c is not None:
        return c
    terms: list[float] = []
    t = h.t
    for i, slope in enumerate(h.slopes):
        if slope != 0.0:
            a, b = 1.0 - t[i + 1], 1.0 - t[i]
            terms.append(slope * dist.quantile_integral(a, b))
    for i, ti in enumerate(t):
        j_lo = h.value[i] - h.left[i]
        j_hi = h.right[i] - h.value[i]
        u = 1.0 - ti
        if j_lo > 0.0:
            # applies on {S(x) >= t}: right quantile at 1-t; at t=1 the essinf
            q = dist.lower if u == 0.0 else float(dist.quantile_right(u))
            terms.append(j_lo * q)
        if j_hi > 0.0:
            # applies on {S(x) > t}: left quantile at 1-t; at t=0 the esssup
            q = dist.upper if u == 1.0 else float(dist.quantile(u))
            terms.append(j_hi * q)
    return _safe_sum(terms)


def distortion_survival(loss, h: DistortionFn) -> float:
    """Survival-integral form ``∫(h(S)-1) over x<0 plus ∫h(S) over x>=0``."""
    dist = as_distribution(loss)
    if not h.vanishes_near_zero and (dist.upper == math.inf and not dist.has_finite_mean):
        return math.inf
    if h.right[0] > 0.0 and dist.upper == math.inf:
        return math.inf
    if h.value[-1] - h.left[-1] > 0.0 and dist.lower == -math.inf:
        return -math.inf
    interior = h.t[1:-1]
    brk = sorted({0.0, *[float(dist.quantile(1.0 - s)) for s in interior]})
    lo, hi = dist.lower, dist.upper
    pts = [x for x in brk if lo < x < hi]
    opts = dict(epsabs=1e-13, epsrel=1e-12, limit=400)

    def integrand(x):
        s = float(dist.sf(x))
        hv = h(s)
        return hv - 1.0 if x < 0 else hv

    edges = [lo, *pts, hi]
    if 0.0 not in edges and lo < 0.0 < hi:
        edges = sorted([*edges, 0.0])
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        if a == b:
            continue
        total += integrate.quad(integrand, a, b, **opts)[0]
    # contribution of the region outside the support
    if lo > 0.0:
        total += lo  # h(1) = 1 on [0, lo)
    if hi < 0.0:
        total -= -hi  # h(0) - 1 = -1 on (hi, 0)
    return total


def is_degenerate_distortion(h: DistortionFn, extra_points: Sequence[float] = ()) -> bool:
    """True iff ``h`` is constant on the open interval (0, 1).

    Checks a 4096-point grid, every interior knot with both one-sided limits,
    and any ``extra_points`` the caller declares.
    """
    grid = (np.arange(1, DEGENERACY_GRID + 1) - 0.5) / DEGENERACY_GRID
    inner = h.t[1:-1]
    extra = np.asarray(list(extra_points), dtype=float)
    extra = extra[(extra > 0) & (extra < 1)]
    pts = np.concatenate([grid, inner, extra])
    vals = np.concatenate([h(pts), h.left[1:-1], h.right[1:-1]])
    # one-sided limits at the ends of (0, 1)
    vals = np.concatenate([vals, [h.right[0], h.left[-1]]])
    return bool(np.max(vals) - np.min(vals) <= 0.0)


# ---------------------------------------------------------------------------
# expected disutility


class MonotoneFn:
    """Nondecreasing function applied to losses."""

    kind = ""
    is_constant = False

    def __call__(self, x):
        raise NotImplementedError

    def to_dict(self) -> dict[str, Any]:
        raise NotImplementedError


@dataclass(frozen=True)
class Linear(MonotoneFn):
    slope: float = 1.0
    intercept: float = 0.0
    kind = "linear"

    def __post_init__(self):
        if self.slope < 0:
            raise ValueError("slope must be non-negative")

    @property
    def is_constant(self):
        return self.slope == 0.0

    def __call__(self, x):
        return self.intercept + self.slope * np.asarray(x, dtype=float)

    def to_dict(self):
        return {"kind": self.kind, "slope": self.slope, "intercept": self.intercept}


@dataclass(frozen=True)
class LimitedLiability(MonotoneFn):
    """Loss-side disutility of a limited-liability agent.

    ``v(x) = scale * (exp((min(x, cap) - cap)/scale) - 1)``: strictly
    increasing and convex below ``cap``, flat at ``v(cap) = 0`` above it.
    This is ``v(x) = -u(-x)`` for a utility ``u`` that is flat below
    ``-cap`` and concave above.
    """

    cap: float
    scale: float = 1.0
    kind = "limited_liability"

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError("scale must be positive")

    def __call__(self, x):
        z = np.minimum(np.asarray(x, dtype=float), self.cap) - self.cap
        return self.scale * np.expm1(z / self.scale)

    def to_dict(self):
        return {"kind": self.kind, "cap": self.cap, "scale": self.scale}


@dataclass(frozen=True)
class SShape(MonotoneFn):
    """``sign(x-ref) * |x-ref|**gamma`` with ``0 < gamma <= 1``.

    Convex below the reference point and concave above it on the loss side,
    the Markowitz and prospect-theory shape.  For ``gamma < 1`` it has a
    finite mean under Pareto(1).
    """

    ref: float = 0.0
    gamma: float = 0.5
    kind = "s_shape"

    def __post_init__(self):
        if not 0 < self.gamma <= 1:
            raise ValueError("gamma must lie in (0, 1]")

    def __call__(self, x):
        z = np.asarray(x, dtype=float) - self.ref
        return np.sign(z) * np.abs(z) ** self.gamma

    def to_dict(self):
        return {"kind": self.kind, "ref": self.ref, "gamma": self.gamma}


def monotone_fn_from_dict(d: dict[str, Any]) -> MonotoneFn:
    kind = d.get("kind")
    if kind == "linear":
        return Linear(d.get("slope", 1.0), d.get("intercept", 0.0))
    if kind == "limited_liability":
        return LimitedLiability(d["cap"], d.get("scale", 1.0))
    if kind == "s_shape":
        return SShape(d.get("ref", 0.0), d.get("gamma", 0.5))
    raise ValueError(f"unknown monotone function kind '{kind}'")


@dataclass(frozen=True)
class DisutilityEstimate:
    value: float
    se: float
    n: int
    divergent: bool
    running: tuple[float, ...]


def expected_disutility(
    loss,
    v: MonotoneFn,
    n_mc: int,
    stream: RngStream | int,
    threads: int | None = None,
    drift_tol: float = 0.05,
) -> DisutilityEstimate:
    """Monte Carlo ``E[v(X)]`` with a standard error and a divergence flag.

    Running means at n/4, n/2 and n are compared; a relative drift above
    ``drift_tol``, or a Hill tail index of the sampled values at or below
    the ES prescreen level, flags the estimate as divergent.
    """
    if n_mc < 4:
        raise ValueError("n_mc must be >= 4")
    if v.is_constant:
        c = float(np.asarray(v(0.0)))
        return DisutilityEstimate(c, 0.0, n_mc, False, (c, c, c))
    dist = as_distribution(loss)
    x = dist.sample(n_mc, as_stream(stream), threads)
    vals = np.asarray(v(x), dtype=float)
    if np.all(vals == vals[0]):
        c = float(vals[0])
        return DisutilityEstimate(c, 0.0, n_mc, False, (c, c, c))
    cuts = [n_mc // 4, n_mc // 2, n_mc]
    running = tuple(float(np.mean(vals[:k])) for k in cuts)
    final = running[-1]
    denom = max(abs(final), float(np.std(vals)) / math.sqrt(n_mc), 1e-300)
    drift = max(abs(r - final) for r in running[:-1]) / denom
    se = float(np.std(vals, ddof=1) / math.sqrt(n_mc))
    return DisutilityEstimate(final, se, n_mc, bool(drift > drift_tol or _heavy_upper_tail(vals)), running)


def _heavy_upper_tail(vals: np.ndarray) -> bool:
    """Hill index of the positive upper tail at or below the ES prescreen level."""
    if vals.size < 40:
        return False
    from .tail_estimation import default_threshold_k, hill_estimator

    k = default_threshold_k(vals)
    top = np.partition(vals, vals.size - k - 1)[vals.size - k - 1 :]
    if top.min() <= 0 or top.max() == top.min():
        return False
    return hill_estimator(top, k).alpha_hat <= ES_PRESCREEN_ALPHA


# ---------------------------------------------------------------------------
# risk measure descriptors


class RiskMeasure:
    kind = ""

    def __call__(self, loss) -> float:
        raise NotImplementedError

    @property
    def distortion_fn(self) -> DistortionFn | None:
        return None

    @property
    def mildly_monotone(self) -> bool:
        h = self.distortion_fn
        return True if h is None else not is_degenerate_distortion(h)

    def to_dict(self) -> dict[str, Any]:
        raise NotImplementedError


@dataclass(frozen=True)
class VaR(RiskMeasure):
    p: float
    kind = "var"

    def __post_init__(self):
        _check_level(self.p)

    def __call__(self, loss):
        return var(loss, self.p)

    @property
    def distortion_fn(self):
        return DistortionFn.var_step(self.p)

    def to_dict(self):
        return {"kind": self.kind, "p": self.p}


@dataclass(frozen=True)
class ES(RiskMeasure):
    p: float
    kind = "es"

    def __post_init__(self):
        _check_level(self.p)

    def __call__(self, loss):
        return es(loss, self.p)

    @property
    def distortion_fn(self):
        return DistortionFn.es_ramp(self.p)

    def to_dict(self):
        return {"kind": self.kind, "p": self.p}


@dataclass(frozen=True)
class RVaR(RiskMeasure):
    p: float
    q: float
    kind = "rvar"

    def __post_init__(self):
        if not (0.0 <= self.p < self.q < 1.0):
            raise ValueError("RVaR needs 0 <= p < q < 1")

    def __call__(self, loss):
        return rvar(loss, self.p, self.q)

    @property
    def distortion_fn(self):
        return DistortionFn.rvar_ramp(self.p, self.q)

    def to_dict(self):
        return {"kind": self.kind, "p": self.p, "q": self.q}


@dataclass(frozen=True)
class Distortion(RiskMeasure):
    h: DistortionFn
    kind = "distortion"

    def __call__(self, loss):
        return distortion(loss, self.h)

    @property
    def distortion_fn(self):
        return self.h

    def to_dict(self):
        return {"kind": self.kind, "h": self.h.to_dict()}


@dataclass(frozen=True)
class ExpectedDisutility(RiskMeasure):
    v: MonotoneFn
    n_mc: int = 1 << 18
    seed: int = 0
    kind = "expected_disutility"

    def __call__(self, loss):
        return expected_disutility(loss, self.v, self.n_mc, self.seed).value

    def to_dict(self):
        return {"kind": self.kind, "v": self.v.to_dict(), "n_mc": self.n_mc, "seed": self.seed}


def distortion_from_dict(d: dict[str, Any]) -> DistortionFn:
    kind = d.get("kind")
    if kind == "table":
        rows = np.asarray(d["rows"], dtype=float)
        if rows.ndim != 2 or rows.shape[1] != 2:
            raise ValueError("distortion table rows must be (t, h) pairs")
        return DistortionFn.from_table(rows[:, 0], rows[:, 1])
    if kind == "identity":
        return DistortionFn.identity()
    if kind == "var_step":
        return DistortionFn.var_step(d["p"])
    if kind == "es_ramp":
        return DistortionFn.es_ramp(d["p"])
    if kind == "esssup":
        return DistortionFn.esssup()
    if kind == "essinf":
        return DistortionFn.essinf()
    if kind == "mixture":
        return DistortionFn.mixture(d["weights"], [distortion_from_dict(x) for x in d["parts"]])
    raise ValueError(f"unknown distortion kind '{kind}'")


def risk_measure_from_dict(d: dict[str, Any]) -> RiskMeasure:
    kind = d.get("kind")
    if kind == "var":
        return VaR(d["p"])
    if kind == "es":
        return ES(d["p"])
    if kind == "rvar":
        return RVaR(d["p"], d["q"])
    if kind == "distortion":
        return Distortion(distortion_from_dict(d["h"]))
    if kind == "expected_disutility":
        return ExpectedDisutility(monotone_fn_from_dict(d["v"]), d.get("n_mc", 1 << 18), d.get("seed", 0))
    raise ValueError(f"unknown risk measure kind '{kind}'")


__all__ += ["distortion_from_dict", "monotone_fn_from_dict", "loss_from_dict"]
