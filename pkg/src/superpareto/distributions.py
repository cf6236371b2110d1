"""Loss distributions: Pareto, GPD, convex transforms of Pareto(1), truncation,
tail grafts, discrete/empirical laws, normal, and sampled convolutions.

Every family exposes a right-continuous ``cdf``, the left quantile
``inf{t : F(t) >= p}``, and inverse-transform sampling, so that sharing a
uniform between two draws gives an exact comonotone coupling.  An infinite
mean is reported as ``math.inf``; Python floats already follow the
extended-real rules the risk measures need.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from functools import cached_property
from typing import Any

import numpy as np
from scipy import integrate, special, stats

from .rng import RngStream, as_stream, concat_blocks, map_blocks, open_uniform

__all__ = [
    "LossDistribution",
    "PiecewiseConvexFn",
    "Pareto",
    "GPD",
    "ConvexTransform",
    "Truncated",
    "TailGraft",
    "Discrete",
    "Empirical",
    "Normal",
    "Affine",
    "SampledDistribution",
    "truncate",
    "convolve_iid",
    "pareto1_pair_sum_sf",
    "loss_from_dict",
]


def _scalar_or_array(x, out):
    if np.ndim(x) == 0:
        return float(out)
    return out


def _check_prob(p, closed: bool = False) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    bad = (p < 0) | (p > 1) if closed else (p <= 0) | (p >= 1)
    if np.any(bad) or np.any(np.isnan(p)):
        interval = "[0, 1]" if closed else "(0, 1)"
        raise ValueError(f"probability level must lie in {interval}")
    return p


class LossDistribution(ABC):
    """Base class for every loss model.

    Subclasses implement ``_cdf`` and ``_quantile`` on numpy arrays; the
    public methods take care of scalars and validation.
    """

    kind: str = ""

    # -- distribution function -------------------------------------------
    @abstractmethod
    def _cdf(self, x: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def _quantile(self, p: np.ndarray) -> np.ndarray: ...

    def cdf(self, x):
        xa = np.asarray(x, dtype=float)
        return _scalar_or_array(x, np.clip(self._cdf(xa), 0.0, 1.0))

    def sf(self, x):
        xa = np.asarray(x, dtype=float)
        return _scalar_or_array(x, 1.0 - np.clip(self._cdf(xa), 0.0, 1.0))

    def quantile(self, p):
        """Left quantile; rejects levels outside (0, 1)."""
        pa = _check_prob(p)
        return _scalar_or_array(p, self._quantile(pa))

    def quantile_right(self, p):
        """Right quantile ``sup{t : F(t) <= p}``."""
        pa = _check_prob(p)
        return _scalar_or_array(p, self._quantile_right(pa))

    def _quantile_right(self, p: np.ndarray) -> np.ndarray:
        return self._quantile(p)

    def isf(self, q):
        """Left quantile at level ``1 - q``, accurate for tiny ``q``."""
        qa = _check_prob(q)
        return _scalar_or_array(q, self._isf(qa))

    def _isf(self, q: np.ndarray) -> np.ndarray:
        p = np.minimum(1.0 - q, np.nextafter(1.0, 0.0))
        return self._quantile(p)

    # -- support and moments ---------------------------------------------
    @property
    @abstractmethod
    def lower(self) -> float:
        """Essential infimum."""

    @property
    def upper(self) -> float:
        """Essential supremum."""
        return math.inf

    @property
    def has_finite_mean(self) -> bool:
        return True

    def mean(self) -> float:
        if not self.has_finite_mean:
            return math.inf
        return self.quantile_integral(0.0, 1.0)

    def quantile_integral(self, a: float, b: float) -> float:
        """``∫_a^b VaR_u du`` for ``0 <= a <= b <= 1``."""
        if not 0.0 <= a <= b <= 1.0:
            raise ValueError("need 0 <= a <= b <= 1")
        if a == b:
            return 0.0
        if b == 1.0 and not self.has_finite_mean:
            return math.inf
        return _generic_quantile_integral(self, a, b)

    # -- sampling ----------------------------------------------------------
    @property
    def exact_inverse(self) -> bool:
        """True when ``quantile`` is exact, so uniforms can drive samples."""
        return True

    def from_uniform(self, u: np.ndarray) -> np.ndarray:
        return self._quantile(np.asarray(u, dtype=float))

    def draw(self, rng: np.random.Generator, m: int) -> np.ndarray:
        return self.from_uniform(open_uniform(rng, m))

    def sample(self, n: int, stream: RngStream | int, threads: int | None = None) -> np.ndarray:
        """Draw ``n`` values; identical for a fixed stream at any thread count."""
        if n < 1:
            raise ValueError("n must be >= 1")
        stream = as_stream(stream)
        return concat_blocks(map_blocks(self.draw, n, stream, threads))

    # -- serialization -----------------------------------------------------
    @abstractmethod
    def to_dict(self) -> dict[str, Any]: ...

    def __repr__(self) -> str:
        params = {k: v for k, v in self.to_dict().items() if k != "kind"}
        inner = ", ".join(f"{k}={v!r}" for k, v in params.items() if not isinstance(v, (list, dict)))
        return f"{type(self).__name__}({inner})"


def _generic_quantile_integral(dist: LossDistribution, a: float, b: float) -> float:
    """Adaptive quadrature of the quantile function with log substitutions at the ends."""
    opts = dict(epsabs=0.0, epsrel=1e-12, limit=400)
    total = 0.0
    mid_lo, mid_hi = max(a, 0.01), min(b, 0.99)
    if mid_lo < mid_hi:
        total += integrate.quad(lambda u: float(dist._quantile(np.array([u]))[0]), mid_lo, mid_hi, **opts)[0]
    if b > 0.99:
        # u = 1 - e^{-s}
        s_lo, s_hi = -math.log1p(-max(a, 0.99)), (-math.log1p(-b) if b < 1.0 else math.inf)

        def upper(s):
            q = math.exp(-s)
            if q <= 0.0:
                return 0.0
            return float(dist._isf(np.array([q]))[0]) * q

        total += integrate.quad(upper, s_lo, s_hi, **opts)[0]
    if a < 0.01:
        # u = e^{-s}
        s_lo, s_hi = -math.log(min(b, 0.01)), (-math.log(a) if a > 0.0 else math.inf)

        def lower(s):
            u = math.exp(-s)
            if u <= 0.0:
                return 0.0
            return float(dist._quantile(np.array([u]))[0]) * u

        total += integrate.quad(lower, s_lo, s_hi, **opts)[0]
    return total


# ---------------------------------------------------------------------------
# piecewise convex transform


class PiecewiseConvexFn:
    """Increasing convex function on ``[1, ∞)``.

    Linear pieces with nondecreasing slopes between ``knots`` (``knots[0]``
    must be 1), optionally followed by a power segment
    ``f(k_m) + tail_coef * (y**tail_exponent - k_m**tail_exponent)`` beyond
    the last knot.  ``slopes`` has one entry per linear piece: ``len(knots)``
    entries without a power tail (the last slope runs to infinity),
    ``len(knots) - 1`` entries with one.
    """

    def __init__(
        self,
        knots,
        slopes,
        value0: float = 0.0,
        tail_exponent: float | None = None,
        tail_coef: float | None = None,
    ):
        knots = np.asarray(knots, dtype=float).ravel()
        slopes = np.asarray(slopes, dtype=float).ravel()
        if knots.size == 0 or knots[0] != 1.0:
            raise ValueError("knots must start at 1 (the Pareto(1) support endpoint)")
        if np.any(np.diff(knots) <= 0):
            raise ValueError("knots must be strictly increasing")
        has_tail = tail_exponent is not None
        want = knots.size - 1 if has_tail else knots.size
        if slopes.size != want:
            raise ValueError(f"expected {want} slopes for {knots.size} knots")
        if np.any(slopes < 0) or np.any(~np.isfinite(slopes)):
            raise ValueError("slopes must be finite and non-negative (increasing)")
        if np.any(np.diff(slopes) < 0):
            raise ValueError("slopes must be nondecreasing (convexity)")
        if has_tail:
            if tail_coef is None or tail_coef <= 0:
                raise ValueError("power tail needs a positive coefficient")
            if tail_exponent < 1:
                raise ValueError("power tail exponent must be >= 1 (convexity)")
            d_tail = tail_coef * tail_exponent * knots[-1] ** (tail_exponent - 1.0)
            if slopes.size and d_tail < slopes[-1] * (1 - 1e-12):
                raise ValueError("power tail starts with a smaller slope than the last piece")
        elif slopes[-1] <= 0:
            raise ValueError("function must be non-constant")
        self.knots = knots
        self.slopes = slopes
        self.value0 = float(value0)
        self.tail_exponent = None if tail_exponent is None else float(tail_exponent)
        self.tail_coef = None if tail_coef is None else float(tail_coef)
        n_lin = knots.size - 1
        vals = [self.value0]
        for i in range(n_lin):
            vals.append(vals[-1] + slopes[i] * (knots[i + 1] - knots[i]))
        self._values = np.array(vals)

    # named forms
    @classmethod
    def identity(cls) -> "PiecewiseConvexFn":
        return cls([1.0], [1.0], value0=1.0)

    @classmethod
    def pareto(cls, alpha: float) -> "PiecewiseConvexFn":
        """``y ↦ y**(1/alpha)``; maps Pareto(1) to Pareto(alpha), alpha <= 1."""
        return cls([1.0], [], value0=1.0, tail_exponent=1.0 / alpha, tail_coef=1.0)

    @classmethod
    def gpd(cls, xi: float, beta: float) -> "PiecewiseConvexFn":
        """``y ↦ beta/xi * (y**xi - 1)``; maps Pareto(1) to GPD(xi, beta), xi >= 1."""
        return cls([1.0], [], value0=0.0, tail_exponent=xi, tail_coef=beta / xi)

    def __call__(self, y):
        ya = np.maximum(np.asarray(y, dtype=float), 1.0)
        i = np.clip(np.searchsorted(self.knots, ya, side="right") - 1, 0, self.knots.size - 1)
        out = np.empty_like(ya)
        last = self.knots.size - 1
        lin = (i < last) | (self.tail_exponent is None)
        il = i[lin]
        out[lin] = self._values[il] + self.slopes[il] * (ya[lin] - self.knots[il])
        if self.tail_exponent is not None:
            tail = ~lin
            k, e = self.knots[-1], self.tail_exponent
            out[tail] = self._values[-1] + self.tail_coef * (ya[tail] ** e - k**e)
        return _scalar_or_array(y, out)

    def inverse_upper(self, x):
        """``sup{y >= 1 : f(y) <= x}``; returns 1 where ``x < f(1)``."""
        xa = np.asarray(x, dtype=float)
        out = np.ones_like(xa)
        i = np.searchsorted(self._values, xa, side="right") - 1
        ok = i >= 0
        last = self.knots.size - 1
        lin = ok & ((i < last) | (self.tail_exponent is None))
        il = i[lin]
        out[lin] = self.knots[il] + (xa[lin] - self._values[il]) / self.slopes[il]
        if self.tail_exponent is not None:
            tail = ok & (i >= last)
            k, e = self.knots[-1], self.tail_exponent
            base = (xa[tail] - self._values[-1]) / self.tail_coef + k**e
            out[tail] = base ** (1.0 / e)
        return _scalar_or_array(x, out)

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {
            "knots": self.knots.tolist(),
            "slopes": self.slopes.tolist(),
            "value0": self.value0,
        }
        if self.tail_exponent is not None:
            d["tail_exponent"] = self.tail_exponent
            d["tail_coef"] = self.tail_coef
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "PiecewiseConvexFn":
        return cls(
            d["knots"],
            d.get("slopes", []),
            value0=d.get("value0", 0.0),
            tail_exponent=d.get("tail_exponent"),
            tail_coef=d.get("tail_coef"),
        )


# ---------------------------------------------------------------------------
# analytic families


class Pareto(LossDistribution):
    """Pareto(alpha) with scale 1: ``F(x) = 1 - x**(-alpha)`` on ``[1, ∞)``."""

    kind = "pareto"

    def __init__(self, alpha: float):
        if not alpha > 0:
            raise ValueError("alpha must be positive")
        self.alpha = float(alpha)

    def _cdf(self, x):
        return np.where(x >= 1.0, 1.0 - np.maximum(x, 1.0) ** (-self.alpha), 0.0)

    def _quantile(self, p):
        return (1.0 - p) ** (-1.0 / self.alpha)

    def _isf(self, q):
        return q ** (-1.0 / self.alpha)

    @property
    def lower(self):
        return 1.0

    @property
    def has_finite_mean(self):
        return self.alpha > 1.0

    def mean(self):
        return self.alpha / (self.alpha - 1.0) if self.alpha > 1.0 else math.inf

    def quantile_integral(self, a, b):
        if not 0.0 <= a <= b <= 1.0:
            raise ValueError("need 0 <= a <= b <= 1")
        if a == b:
            return 0.0
        if b == 1.0 and self.alpha <= 1.0:
            return math.inf
        if self.alpha == 1.0:
            return math.log1p(-a) - math.log1p(-b)
        r = 1.0 - 1.0 / self.alpha
        hi = 0.0 if b == 1.0 else (1.0 - b) ** r
        return ((1.0 - a) ** r - hi) / r

    def to_dict(self):
        return {"kind": self.kind, "alpha": self.alpha}


class GPD(LossDistribution):
    """Generalized Pareto ``G(x) = 1 - (1 + xi*x/beta)**(-1/xi)`` on ``[0, ∞)``."""

    kind = "gpd"

    def __init__(self, xi: float, beta: float):
        if not xi > 0 or not beta > 0:
            raise ValueError("xi and beta must be positive")
        self.xi = float(xi)
        self.beta = float(beta)

    def _cdf(self, x):
        z = np.maximum(x, 0.0)
        return np.where(x >= 0.0, -np.expm1(-np.log1p(self.xi * z / self.beta) / self.xi), 0.0)

    def _quantile(self, p):
        return self.beta / self.xi * np.expm1(-self.xi * np.log1p(-p))

    def _isf(self, q):
        return self.beta / self.xi * np.expm1(-self.xi * np.log(q))

    @property
    def lower(self):
        return 0.0

    @property
    def has_finite_mean(self):
        return self.xi < 1.0

    def mean(self):
        return self.beta / (1.0 - self.xi) if self.xi < 1.0 else math.inf

    def to_dict(self):
        return {"kind": self.kind, "xi": self.xi, "beta": self.beta}


class ConvexTransform(LossDistribution):
    """Law of ``f(Y)`` with ``Y ~ Pareto(1)`` and ``f`` increasing, convex, non-constant."""

    kind = "convex_transform"

    def __init__(self, f: PiecewiseConvexFn):
        if not isinstance(f, PiecewiseConvexFn):
            raise TypeError("f must be a PiecewiseConvexFn")
        self.f = f

    def _cdf(self, x):
        y = np.asarray(self.f.inverse_upper(x), dtype=float)
        below = x < self.f._values[0]
        return np.where(below, 0.0, 1.0 - 1.0 / y)

    def _quantile(self, p):
        return np.asarray(self.f(1.0 / (1.0 - p)), dtype=float)

    def _isf(self, q):
        return np.asarray(self.f(1.0 / q), dtype=float)

    @property
    def lower(self):
        return float(self.f._values[0])

    @property
    def has_finite_mean(self):
        return False

    def to_dict(self):
        return {"kind": self.kind, "f": self.f.to_dict()}


class Normal(LossDistribution):
    kind = "normal"

    def __init__(self, mu: float = 0.0, sigma: float = 1.0):
        if not sigma > 0:
            raise ValueError("sigma must be positive")
        self.mu = float(mu)
        self.sigma = float(sigma)

    def _cdf(self, x):
        return special.ndtr((x - self.mu) / self.sigma)

    def _quantile(self, p):
        return self.mu + self.sigma * special.ndtri(p)

    def _isf(self, q):
        return self.mu - self.sigma * special.ndtri(q)

    @property
    def lower(self):
        return -math.inf

    def mean(self):
        return self.mu

    def quantile_integral(self, a, b):
        if not 0.0 <= a <= b <= 1.0:
            raise ValueError("need 0 <= a <= b <= 1")
        phi = lambda u: 0.0 if u in (0.0, 1.0) else float(stats.norm.pdf(special.ndtri(u)))
        return self.mu * (b - a) + self.sigma * (phi(a) - phi(b))

    def to_dict(self):
        return {"kind": self.kind, "mu": self.mu, "sigma": self.sigma}


# ---------------------------------------------------------------------------
# derived laws


class Truncated(LossDistribution):
    """Law of ``min(X, c)``."""

    kind = "truncated"

    def __init__(self, base: LossDistribution, c: float):
        if c < base.lower:
            raise ValueError(f"truncation level {c} is below the support endpoint {base.lower}")
        self.base = base
        self.c = float(c)

    def _cdf(self, x):
        return np.where(x >= self.c, 1.0, self.base._cdf(x))

    def _quantile(self, p):
        return np.minimum(self.base._quantile(p), self.c)

    def _quantile_right(self, p):
        return np.minimum(self.base._quantile_right(p), self.c)

    def _isf(self, q):
        return np.minimum(self.base._isf(q), self.c)

    def from_uniform(self, u):
        return np.minimum(self.base.from_uniform(u), self.c)

    @property
    def exact_inverse(self):
        return self.base.exact_inverse

    @property
    def lower(self):
        return self.base.lower

    @property
    def upper(self):
        return min(self.c, self.base.upper)

    def quantile_integral(self, a, b):
        if not 0.0 <= a <= b <= 1.0:
            raise ValueError("need 0 <= a <= b <= 1")
        u_c = float(self.base.cdf(self.c))
        body = self.base.quantile_integral(a, max(a, min(b, u_c)))
        cap = self.c * max(0.0, b - max(a, u_c))
        return body + cap

    def to_dict(self):
        return {"kind": self.kind, "base": self.base.to_dict(), "c": self.c}


def truncate(dist: LossDistribution, c: float) -> Truncated:
    """Law of ``min(X, c)``; rejects ``c`` below the lower support endpoint."""
    return Truncated(dist, c)


class TailGraft(LossDistribution):
    """Law equal to ``base`` beyond ``x`` with a user body below ``x``.

    Below ``x`` the CDF is ``F_base(x) * F_body(t) / F_body(x)``; at and above
    ``x`` it is ``F_base``.  Construction checks ``P(Y > t) >= P(base > t)`` on
    ``grid_points`` points of ``[essinf base, x]``.
    """

    kind = "tail_graft"

    def __init__(self, base: LossDistribution, x: float, body: LossDistribution, grid_points: int = 1024):
        if x < base.lower:
            raise ValueError("graft point must be >= the base support endpoint")
        fb = float(body.cdf(x))
        if fb <= 0.0:
            raise ValueError("body must put positive mass at or below the graft point")
        self.base = base
        self.x = float(x)
        self.body = body
        self.grid_points = int(grid_points)
        self._q0 = float(base.cdf(x))
        self._fbx = fb
        grid = np.linspace(base.lower, x, self.grid_points)
        lhs = self._cdf(grid)
        rhs = base._cdf(grid)
        bad = lhs > rhs + 1e-12
        if np.any(bad):
            t = float(grid[np.argmax(bad)])
            raise ValueError(f"grafted law is not stochastically above the base (fails at t={t:g})")

    def _cdf(self, t):
        t = np.asarray(t, dtype=float)
        below = self._q0 * np.minimum(self.body._cdf(t) / self._fbx, 1.0)
        return np.where(t >= self.x, self.base._cdf(t), below)

    def _quantile(self, p):
        body_p = np.clip(p * self._fbx / max(self._q0, 1e-300), np.nextafter(0, 1), np.nextafter(1, 0))
        low = np.minimum(self.body._quantile(body_p), self.x)
        return np.where(p <= self._q0, low, self.base._quantile(p))

    def _quantile_right(self, p):
        body_p = np.clip(p * self._fbx / max(self._q0, 1e-300), np.nextafter(0, 1), np.nextafter(1, 0))
        low = np.minimum(self.body._quantile_right(body_p), self.x)
        return np.where(p < self._q0, low, np.maximum(self.base._quantile_right(p), self.x))

    def _isf(self, q):
        return np.where(q < 1.0 - self._q0, self.base._isf(q), self._quantile(1.0 - q))

    @property
    def lower(self):
        return min(self.body.lower, self.x)

    @property
    def has_finite_mean(self):
        return self.base.has_finite_mean

    def to_dict(self):
        return {
            "kind": self.kind,
            "base": self.base.to_dict(),
            "x": self.x,
            "body": self.body.to_dict(),
            "grid_points": self.grid_points,
        }


class Discrete(LossDistribution):
    """Finite discrete law on sorted ``values`` with weights ``probs``."""

    kind = "discrete"

    def __init__(self, values, probs):
        values = np.asarray(values, dtype=float).ravel()
        probs = np.asarray(probs, dtype=float).ravel()
        if values.size == 0:
            raise ValueError("need at least one support point")
        if values.shape != probs.shape:
            raise ValueError("values and probs differ in length")
        if not np.all(np.isfinite(values)):
            raise ValueError("support points must be finite")
        if np.any(np.diff(values) < 0):
            raise ValueError("values must be sorted ascending")
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-9:
            raise ValueError("probs must be non-negative and sum to 1")
        self.values = values
        self.probs = probs / probs.sum()
        self.cum = np.minimum(np.cumsum(self.probs), 1.0)
        self.cum[-1] = 1.0

    def _cdf(self, x):
        i = np.searchsorted(self.values, x, side="right")
        padded = np.concatenate(([0.0], self.cum))
        return padded[i]

    def _quantile(self, p):
        i = np.searchsorted(self.cum, p, side="left")
        return self.values[np.minimum(i, self.values.size - 1)]

    def _quantile_right(self, p):
        i = np.searchsorted(self.cum, p, side="right")
        return self.values[np.minimum(i, self.values.size - 1)]

    @property
    def lower(self):
        return float(self.values[0])

    @property
    def upper(self):
        return float(self.values[-1])

    def mean(self):
        return float(np.dot(self.values, self.probs))

    @cached_property
    def _area(self):
        return np.concatenate(([0.0], np.cumsum(self.values * self.probs)))

    def _primitive(self, u: float) -> float:
        if u <= 0.0:
            return 0.0
        i = min(int(np.searchsorted(self.cum, u, side="left")), self.values.size - 1)
        start = self.cum[i - 1] if i > 0 else 0.0
        return float(self._area[i] + self.values[i] * (u - start))

    def quantile_integral(self, a, b):
        if not 0.0 <= a <= b <= 1.0:
            raise ValueError("need 0 <= a <= b <= 1")
        return self._primitive(b) - self._primitive(a)

    def to_dict(self):
        return {"kind": self.kind, "values": self.values.tolist(), "probs": self.probs.tolist()}


class Empirical(Discrete):
    """Empirical law of a sample: jumps of ``1/n`` at the sorted points."""

    kind = "empirical"

    def __init__(self, sample):
        sample = np.sort(np.asarray(sample, dtype=float).ravel(), kind="stable")
        if sample.size == 0:
            raise ValueError("empirical sample must be nonempty")
        n = sample.size
        super().__init__(sample, np.full(n, 1.0 / n))
        self.cum = np.arange(1, n + 1) / n

    @property
    def sample_values(self) -> np.ndarray:
        return self.values

    @property
    def size(self) -> int:
        return int(self.values.size)

    def _cdf(self, x):
        return np.searchsorted(self.values, x, side="right") / self.values.size

    def to_dict(self):
        return {"kind": self.kind, "sample": self.values.tolist()}


class Affine(LossDistribution):
    """Law of ``shift + scale * X`` for ``scale > 0``."""

    kind = "affine"

    def __init__(self, base: LossDistribution, scale: float = 1.0, shift: float = 0.0):
        if not scale > 0:
            raise ValueError("scale must be positive")
        self.base = base
        self.scale = float(scale)
        self.shift = float(shift)

    def _cdf(self, x):
        return self.base._cdf((x - self.shift) / self.scale)

    def _quantile(self, p):
        return self.shift + self.scale * self.base._quantile(p)

    def _quantile_right(self, p):
        return self.shift + self.scale * self.base._quantile_right(p)

    def _isf(self, q):
        return self.shift + self.scale * self.base._isf(q)

    def from_uniform(self, u):
        return self.shift + self.scale * self.base.from_uniform(u)

    def draw(self, rng, m):
        return self.shift + self.scale * self.base.draw(rng, m)

    @property
    def exact_inverse(self):
        return self.base.exact_inverse

    @property
    def lower(self):
        return self.shift + self.scale * self.base.lower

    @property
    def upper(self):
        return self.shift + self.scale * self.base.upper

    @property
    def has_finite_mean(self):
        return self.base.has_finite_mean

    def mean(self):
        return self.shift + self.scale * self.base.mean()

    def quantile_integral(self, a, b):
        return self.shift * (b - a) + self.scale * self.base.quantile_integral(a, b)

    def to_dict(self):
        return {"kind": self.kind, "base": self.base.to_dict(), "scale": self.scale, "shift": self.shift}


class SampledDistribution(LossDistribution):
    """Sum of ``m`` independent copies of ``base``, backed by sampling.

    ``sample`` is exact.  ``cdf``/``quantile`` come from a reference sample
    of ``n_ref`` draws (or from ``base`` directly when ``m == 1``).
    """

    kind = "sampled_sum"

    def __init__(self, base: LossDistribution, m: int, n_ref: int = 1 << 20, ref_seed: int = 0):
        if m < 1:
            raise ValueError("m must be >= 1")
        self.base = base
        self.m = int(m)
        self.n_ref = int(n_ref)
        self.ref_seed = int(ref_seed)

    @cached_property
    def reference(self) -> Empirical:
        return Empirical(self.sample(self.n_ref, RngStream(self.ref_seed, (0xC0,))))

    def _law(self) -> LossDistribution:
        return self.base if self.m == 1 else self.reference

    def _cdf(self, x):
        return self._law()._cdf(x)

    def _quantile(self, p):
        return self._law()._quantile(p)

    @property
    def exact_inverse(self):
        return self.m == 1 and self.base.exact_inverse

    def draw(self, rng, m):
        total = self.base.draw(rng, m)
        for _ in range(self.m - 1):
            total = total + self.base.draw(rng, m)
        return total

    @property
    def lower(self):
        return self.m * self.base.lower

    @property
    def upper(self):
        return self.m * self.base.upper

    @property
    def has_finite_mean(self):
        return self.base.has_finite_mean

    def mean(self):
        return self.m * self.base.mean()

    def to_dict(self):
        return {"kind": self.kind, "base": self.base.to_dict(), "m": self.m,
                "n_ref": self.n_ref, "ref_seed": self.ref_seed}


def convolve_iid(dist: LossDistribution, m: int, **kwargs) -> SampledDistribution:
    """Distribution of the sum of ``m`` iid copies of ``dist``."""
    return SampledDistribution(dist, m, **kwargs)


def pareto1_pair_sum_sf(s):
    """Closed-form ``P(X1 + X2 > s)`` for iid Pareto(1): ``2/s + 2 ln(s-1)/s²`` on ``s >= 2``."""
    sa = np.asarray(s, dtype=float)
    safe = np.maximum(sa, 2.0)
    out = np.where(sa >= 2.0, 2.0 / safe + 2.0 * np.log(safe - 1.0) / safe**2, 1.0)
    return _scalar_or_array(s, out)


# ---------------------------------------------------------------------------
# JSON descriptors


def loss_from_dict(d: dict[str, Any]) -> LossDistribution:
    """Inverse of ``LossDistribution.to_dict``."""
    if not isinstance(d, dict) or "kind" not in d:
        raise ValueError("distribution descriptor needs a 'kind' field")
    kind = d["kind"]
    try:
        if kind == "pareto":
            return Pareto(d["alpha"])
        if kind == "gpd":
            return GPD(d["xi"], d["beta"])
        if kind == "convex_transform":
            return ConvexTransform(PiecewiseConvexFn.from_dict(d["f"]))
        if kind == "truncated":
            return Truncated(loss_from_dict(d["base"]), d["c"])
        if kind == "tail_graft":
            return TailGraft(loss_from_dict(d["base"]), d["x"], loss_from_dict(d["body"]),
                             d.get("grid_points", 1024))
        if kind == "empirical":
            return Empirical(d["sample"])
        if kind == "discrete":
            return Discrete(d["values"], d["probs"])
        if kind == "normal":
            return Normal(d.get("mu", 0.0), d.get("sigma", 1.0))
        if kind == "affine":
            return Affine(loss_from_dict(d["base"]), d.get("scale", 1.0), d.get("shift", 0.0))
        if kind == "sampled_sum":
            return SampledDistribution(loss_from_dict(d["base"]), d["m"],
                                       n_ref=d.get("n_ref", 1 << 20), ref_seed=d.get("ref_seed", 0))
    except KeyError as exc:
        raise ValueError(f"distribution '{kind}' is missing field {exc}") from None
    raise ValueError(f"unknown distribution kind '{kind}'")
