"""Loss-data loading and the comonotonic / independent sums of two empirical laws."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .distributions import Discrete, Empirical, LossDistribution
from .rng import RngStream, as_stream, concat_blocks, map_blocks

__all__ = [
    "LossDataError",
    "LossSample",
    "load_losses",
    "comonotonic_sum",
    "independent_sum",
    "independent_sum_sf",
]


class LossDataError(ValueError):
    """Malformed loss file; the message names the offending line."""


@dataclass(frozen=True)
class LossSample:
    values: np.ndarray
    dropped: int
    source: str

    @property
    def count(self) -> int:
        return int(self.values.size)

    def empirical(self) -> Empirical:
        return Empirical(self.values)


def load_losses(
    path: str | Path,
    column: str | int | None = None,
    *,
    delimiter: str = ",",
    header: bool = True,
    scale: float = 1.0,
    nonpositive: str = "reject",
) -> LossSample:
    """Read one numeric column of a CSV file.

    ``column`` is a header name or a zero-based index (default: first
    column).  Every value is multiplied by ``scale``.  Nonpositive values are
    an error under ``nonpositive="reject"`` and skipped under ``"drop"``.
    Blank lines are ignored; line numbers in errors count from 1.
    """
    if nonpositive not in ("reject", "drop"):
        raise ValueError("nonpositive must be 'reject' or 'drop'")
    scale = float(scale)
    if not (scale > 0 and math.isfinite(scale)):
        raise ValueError("scale must be positive and finite")
    path = Path(path)
    values: list[float] = []
    dropped = 0
    with path.open(newline="") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        idx: int | None = None
        for row in reader:
            line = reader.line_num
            if not row or all(not cell.strip() for cell in row):
                continue
            if idx is None:
                if header:
                    names = [c.strip() for c in row]
                    if column is None:
                        idx = 0
                    elif isinstance(column, str):
                        if column not in names:
                            raise LossDataError(f"{path}: line {line}: no column named '{column}' in header {names}")
                        idx = names.index(column)
                    else:
                        idx = int(column)
                    continue
                if isinstance(column, str):
                    raise LossDataError("a column name needs header=True")
                idx = 0 if column is None else int(column)
            if idx >= len(row) or idx < -len(row):
                raise LossDataError(f"{path}: line {line}: missing column {idx}")
            cell = row[idx].strip()
            try:
                v = float(cell)
            except ValueError:
                raise LossDataError(f"{path}: line {line}: not a number: '{cell}'") from None
            if not math.isfinite(v):
                raise LossDataError(f"{path}: line {line}: non-finite value '{cell}'")
            v *= scale
            if v <= 0:
                if nonpositive == "reject":
                    raise LossDataError(f"{path}: line {line}: nonpositive loss {v:g}")
                dropped += 1
                continue
            values.append(v)
    if not values:
        raise LossDataError(f"{path}: no loss values found")
    return LossSample(np.asarray(values), dropped, str(path))


def _as_discrete(f) -> Discrete:
    if isinstance(f, Discrete):
        return f
    if isinstance(f, LossSample):
        return f.empirical()
    if isinstance(f, LossDistribution):
        raise TypeError("comonotonic/independent sums need empirical or discrete laws")
    return Empirical(f)


def comonotonic_sum(f1, f2) -> Discrete:
    """Law whose left quantile is ``VaR_p(f1) + VaR_p(f2)``.

    Both quantile functions are step functions, so the sum is constant
    between consecutive knots of the merged probability grid.
    """
    d1, d2 = _as_discrete(f1), _as_discrete(f2)
    knots = np.union1d(d1.cum, d2.cum)
    knots = knots[knots > 0]
    knots[-1] = 1.0
    probs = np.diff(np.concatenate(([0.0], knots)))
    vals = d1._quantile(knots) + d2._quantile(knots)
    keep = probs > 0
    return Discrete(vals[keep], probs[keep])


def independent_sum(
    f1,
    f2,
    n_out: int = 10**4,
    stream: RngStream | int = 0,
    threads: int | None = None,
) -> np.ndarray:
    """``n_out`` draws of ``Y1 + Y2`` with ``Y1, Y2`` resampled independently (with replacement)."""
    d1, d2 = _as_discrete(f1), _as_discrete(f2)
    if n_out < 1:
        raise ValueError("n_out must be >= 1")

    def block(rng, m):
        return d1.draw(rng, m) + d2.draw(rng, m)

    return concat_blocks(map_blocks(block, n_out, as_stream(stream), threads))


def independent_sum_sf(f1, f2, t: float) -> float:
    """Exact ``P(Y1 + Y2 > t)`` by summing over the support of ``Y1``."""
    d1, d2 = _as_discrete(f1), _as_discrete(f2)
    tail = 1.0 - d2.cdf(t - d1.values)
    return float(np.dot(d1.probs, tail))
