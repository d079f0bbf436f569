"""Plan-commitment and difficulty analytics.

Convergence compares motion-energy maps by cosine similarity; diversity
is its complement. Undefined cases (zero energy, zero variance) raise
rather than returning sentinels, since silent zeros would corrupt the
aggregate curves built on top of these.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .maze import Cell
from .render import EnergyMap


class UndefinedMetricError(ValueError):
    """A metric was requested on inputs where it has no defined value."""


def _as_vector(energy) -> np.ndarray:
    values = energy.values if isinstance(energy, EnergyMap) else np.asarray(energy)
    return np.asarray(values, dtype=np.float64).ravel()


def convergence(e_t, e_final) -> float:
    """Cosine similarity between two flattened energy maps."""
    a, b = _as_vector(e_t), _as_vector(e_final)
    if a.shape != b.shape:
        raise ValueError("energy maps must share dimensions")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise UndefinedMetricError("convergence undefined for zero-energy map")
    return float(np.dot(a, b) / (na * nb))


def diversity(e_a, e_b) -> float:
    return 1.0 - convergence(e_a, e_b)


def trajectory_iou(a: Iterable[Cell], b: Iterable[Cell]) -> float:
    """Intersection-over-union of visited-cell sets."""
    sa, sb = set(a), set(b)
    if not sa and not sb:
        raise UndefinedMetricError("IoU undefined for two empty sets")
    return len(sa & sb) / len(sa | sb)


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    """Sample Pearson correlation coefficient."""
    xs = np.asarray(x, dtype=np.float64)
    ys = np.asarray(y, dtype=np.float64)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise ValueError("inputs must be equal-length 1-D sequences")
    if xs.size < 2:
        raise ValueError("need at least two observations")
    dx = xs - xs.mean()
    dy = ys - ys.mean()
    sx = float(np.sqrt(np.dot(dx, dx)))
    sy = float(np.sqrt(np.dot(dy, dy)))
    if sx == 0.0 or sy == 0.0:
        raise UndefinedMetricError("correlation undefined under zero variance")
    return float(np.dot(dx, dy) / (sx * sy))


@dataclass(frozen=True)
class ConvergenceSeries:
    values: tuple[float, ...]  # C(t) for t = 1..T
    maze_id: int
    seed: int


# Path-length bands used throughout the difficulty analysis: reliable,
# horizon-limited, and beyond-horizon.
DEFAULT_LENGTH_BINS = ((0, 9), (10, 13), (14, None))


@dataclass(frozen=True)
class LengthBinStat:
    label: str
    lo: int
    hi: int | None
    count: int
    successes: int

    @property
    def rate(self) -> float | None:
        return None if self.count == 0 else self.successes / self.count


def success_by_path_length(
    records: Sequence[tuple[int, bool]],
    bins: Sequence[tuple[int, int | None]] = DEFAULT_LENGTH_BINS,
) -> list[LengthBinStat]:
    """Per-bin success fraction over (path_length, success) records."""
    stats = []
    for lo, hi in bins:
        label = f"{lo}-{hi}" if hi is not None else f"{lo}+"
        hits = [ok for length, ok in records if lo <= length and (hi is None or length <= hi)]
        stats.append(LengthBinStat(label, lo, hi, len(hits), sum(hits)))
    return stats


def roc_auc(scores: Sequence[float], labels: Sequence[bool]) -> float:
    """Area under the ROC curve via the rank statistic (ties share credit)."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=bool)
    n_pos = int(y.sum())
    n_neg = int(y.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUC undefined without both classes")
    order = np.argsort(s, kind="stable")
    ranks = np.empty(y.size, dtype=np.float64)
    sorted_scores = s[order]
    i = 0
    while i < y.size:
        j = i
        while j + 1 < y.size and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    rank_sum = float(ranks[y].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)
