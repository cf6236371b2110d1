"""Copulas for identically distributed losses and the joint sampler.

The negatively associated instance is the Gaussian copula with nonpositive
off-diagonal correlations.  Its factor comes from a diagonally pivoted
Cholesky decomposition, so singular (semidefinite) matrices such as the
two-dimensional correlation -1 case are supported.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy import special

from .distributions import LossDistribution
from .rng import RngStream, as_stream, concat_blocks, map_blocks, open_uniform

__all__ = [
    "Copula",
    "Independence",
    "Comonotone",
    "Mixture",
    "GaussianNSD",
    "pivoted_cholesky",
    "sample_uniforms",
    "sample_joint",
    "copula_from_dict",
]

WEIGHT_TOL = 1e-12


class Copula:
    kind: str = ""

    def sample_uniforms(self, rng: np.random.Generator, m: int, d: int) -> np.ndarray:
        raise NotImplementedError

    def check_dim(self, d: int) -> None:
        if d < 1:
            raise ValueError("dimension d must be >= 1")

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind}


@dataclass(frozen=True)
class Independence(Copula):
    kind = "independence"

    def sample_uniforms(self, rng, m, d):
        return open_uniform(rng, (m, d))


@dataclass(frozen=True)
class Comonotone(Copula):
    kind = "comonotone"

    def sample_uniforms(self, rng, m, d):
        u = open_uniform(rng, (m, 1))
        return np.repeat(u, d, axis=1)


@dataclass(frozen=True)
class Mixture(Copula):
    """Each row picks one component copula with probability ``weights[k]``."""

    weights: tuple[float, ...]
    components: tuple[Copula, ...]
    kind = "mixture"

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "weights", tuple(float(x) for x in w))
        object.__setattr__(self, "components", tuple(self.components))
        if w.size == 0 or w.size != len(self.components):
            raise ValueError("mixture needs one weight per component")
        if np.any(w < 0) or abs(w.sum() - 1.0) > WEIGHT_TOL:
            raise ValueError(f"mixture weights must be non-negative and sum to 1 (got sum {w.sum():.15g})")

    def check_dim(self, d):
        super().check_dim(d)
        for c in self.components:
            c.check_dim(d)

    def sample_uniforms(self, rng, m, d):
        w = np.asarray(self.weights)
        # inverse-CDF pick keeps weight-0 components unreachable
        pick = np.searchsorted(np.cumsum(w), rng.random(m) * w.sum(), side="right")
        pick = np.minimum(pick, len(w) - 1)
        out = np.empty((m, d))
        for k, comp in enumerate(self.components):
            rows = pick == k
            cnt = int(rows.sum())
            if cnt:
                out[rows] = comp.sample_uniforms(rng, cnt, d)
        return out

    def to_dict(self):
        return {
            "kind": self.kind,
            "weights": list(self.weights),
            "components": [c.to_dict() for c in self.components],
        }


def pivoted_cholesky(a: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Factor a PSD matrix as ``L @ L.T`` with ``L`` of shape (d, rank).

    Pivoting rule: at each step take the largest remaining diagonal entry;
    stop once it falls below ``tol * max(diag)``.  A remaining diagonal below
    ``-1e-10`` or a reconstruction error above 1e-8 means the matrix is not
    positive semidefinite.
    """
    a = np.array(a, dtype=float)
    d = a.shape[0]
    scale = max(float(np.max(np.diag(a))), 1.0)
    perm = np.arange(d)
    work = a.copy()
    lower = np.zeros((d, d))
    rank = 0
    for j in range(d):
        diag = np.diag(work)[j:]
        piv = j + int(np.argmax(diag))
        if work[piv, piv] < -1e-10 * scale:
            raise ValueError("correlation matrix is not positive semidefinite")
        if work[piv, piv] <= tol * scale:
            break
        # swap rows/cols j and piv
        work[[j, piv]] = work[[piv, j]]
        work[:, [j, piv]] = work[:, [piv, j]]
        lower[[j, piv]] = lower[[piv, j]]
        perm[[j, piv]] = perm[[piv, j]]
        pivot = np.sqrt(work[j, j])
        lower[j, j] = pivot
        lower[j + 1 :, j] = work[j + 1 :, j] / pivot
        work[j + 1 :, j + 1 :] -= np.outer(lower[j + 1 :, j], lower[j + 1 :, j])
        rank += 1
    rest = np.diag(work)[rank:]
    if rest.size and np.min(rest) < -1e-10 * scale:
        raise ValueError("correlation matrix is not positive semidefinite")
    factor = np.zeros((d, rank))
    factor[perm] = lower[:, :rank]
    if np.max(np.abs(factor @ factor.T - a), initial=0.0) > 1e-8 * scale:
        raise ValueError("correlation matrix is not positive semidefinite")
    return factor


@dataclass(frozen=True)
class GaussianNSD(Copula):
    """Gaussian copula whose correlations are all nonpositive."""

    corr: tuple[tuple[float, ...], ...]
    kind = "gaussian_nsd"
    _factor: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        c = np.asarray(self.corr, dtype=float)
        if c.ndim != 2 or c.shape[0] != c.shape[1] or c.shape[0] < 1:
            raise ValueError("correlation matrix must be square")
        if not np.all(np.isfinite(c)):
            raise ValueError("correlation matrix has non-finite entries")
        if np.max(np.abs(c - c.T)) > 1e-12:
            raise ValueError("correlation matrix must be symmetric")
        if np.max(np.abs(np.diag(c) - 1.0)) > 1e-12:
            raise ValueError("correlation matrix must have a unit diagonal")
        off = c[~np.eye(c.shape[0], dtype=bool)]
        if off.size and np.max(off) > 0.0:
            raise ValueError("all off-diagonal correlations must be <= 0")
        object.__setattr__(self, "corr", tuple(tuple(float(x) for x in row) for row in c))
        object.__setattr__(self, "_factor", pivoted_cholesky(c))

    @property
    def dim(self) -> int:
        return len(self.corr)

    def check_dim(self, d):
        super().check_dim(d)
        if d != self.dim:
            raise ValueError(f"Gaussian copula has dimension {self.dim}, requested d={d}")

    def sample_uniforms(self, rng, m, d):
        self.check_dim(d)
        g = rng.standard_normal((m, self._factor.shape[1]))
        u = special.ndtr(g @ self._factor.T)
        tiny = np.nextafter(0.0, 1.0)
        return np.clip(u, tiny, np.nextafter(1.0, 0.0))

    def to_dict(self):
        return {"kind": self.kind, "corr": [list(r) for r in self.corr]}


def copula_from_dict(d: dict[str, Any]) -> Copula:
    if not isinstance(d, dict) or "kind" not in d:
        raise ValueError("copula descriptor needs a 'kind' field")
    kind = d["kind"]
    if kind == "independence":
        return Independence()
    if kind == "comonotone":
        return Comonotone()
    if kind == "mixture":
        return Mixture(tuple(d["weights"]), tuple(copula_from_dict(c) for c in d["components"]))
    if kind == "gaussian_nsd":
        return GaussianNSD(tuple(tuple(r) for r in d["corr"]))
    raise ValueError(f"unknown copula kind '{kind}'")


def sample_uniforms(copula: Copula, d: int, n: int, stream: RngStream | int, threads: int | None = None) -> np.ndarray:
    copula.check_dim(d)
    stream = as_stream(stream)
    return concat_blocks(map_blocks(lambda rng, m: copula.sample_uniforms(rng, m, d), n, stream, threads))


def _joint_block(marginal: LossDistribution, copula: Copula, d: int):
    def block(rng, m):
        if not marginal.exact_inverse and isinstance(copula, Independence):
            return np.column_stack([marginal.draw(rng, m) for _ in range(d)])
        u = copula.sample_uniforms(rng, m, d)
        return marginal.from_uniform(u.ravel()).reshape(m, d)

    return block


def sample_joint(
    marginal: LossDistribution,
    copula: Copula,
    d: int,
    n: int,
    stream: RngStream | int,
    threads: int | None = None,
) -> np.ndarray:
    """``n x d`` draws with every column distributed as ``marginal``.

    Uniforms from the copula go through the marginal's left quantile.  A
    sampling-backed marginal under independence is drawn column by column
    from its exact sampler instead.
    """
    copula.check_dim(d)
    if n < 1:
        raise ValueError("n must be >= 1")
    stream = as_stream(stream)
    return concat_blocks(map_blocks(_joint_block(marginal, copula, d), n, stream, threads))
