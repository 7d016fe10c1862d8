"""Multiple change-point detection via seeded binary segmentation.

Candidate intervals come from a deterministic multiscale collection with
geometrically decaying lengths.  The recursive procedure scans every
seeded interval of the current segment, and when the best interval's
statistic clears a global permutation threshold it records that
interval's change point and recurses left and right of it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .metrics import DistanceMatrix
from .permutation import PermutationPlan, null_quantile
from .scan import ProfileEngine, _ceil_index, _floor_index

__all__ = [
    "SeededIntervals",
    "ChangePointSet",
    "Provenance",
    "seeded_intervals",
    "mcpd_dp",
]


@dataclass(frozen=True)
class SeededIntervals:
    gamma: float
    n: int
    min_len: int
    intervals: tuple

    def __len__(self):
        return len(self.intervals)


@dataclass(frozen=True)
class Provenance:
    """Which interval produced a change point, and with what statistic."""

    point: int
    start: int
    end: int
    statistic: float


@dataclass(frozen=True)
class ChangePointSet:
    points: tuple
    provenance: tuple
    threshold: float
    n: int


def seeded_intervals(n: int, gamma: float, min_len: int) -> SeededIntervals:
    """Multiscale interval collection with decay parameter gamma.

    Layer k holds n_k = 2*ceil((1/gamma)^(k-1)) - 1 intervals of length
    l_k = n * gamma^(k-1), evenly shifted; layer 1 is the full interval.
    Intervals shorter than min_len are dropped and duplicates removed
    (first occurrence kept, layers emitted coarse to fine).
    """
    if not 0.5 <= gamma < 1.0:
        raise ConfigError(f"decay gamma={gamma} must lie in [0.5, 1)")
    if min_len < 2:
        raise ConfigError(f"min_len={min_len} must be >= 2")
    if n < min_len:
        raise ConfigError(f"sequence length n={n} is below min_len={min_len}")

    layers = _ceil_index(math.log(n) / math.log(1.0 / gamma))
    out = []
    seen = set()
    for k in range(1, layers + 1):
        lk = n * gamma ** (k - 1)
        nk = 2 * _ceil_index((1.0 / gamma) ** (k - 1)) - 1
        if nk == 1:
            candidates = [(0, n)]
        else:
            sk = (n - lk) / (nk - 1)
            candidates = []
            for i in range(1, nk + 1):
                start = _floor_index((i - 1) * sk)
                end = min(_floor_index((i - 1) * sk + lk), n)
                candidates.append((max(start, 0), end))
        for iv in candidates:
            if iv[1] - iv[0] >= min_len and iv not in seen:
                seen.add(iv)
                out.append(iv)
    return SeededIntervals(gamma=gamma, n=n, min_len=min_len, intervals=tuple(out))


def _best_interval(entries: np.ndarray, offset: int, intervals, c: float):
    """Strongest (statistic, change point, interval) among the candidates.

    Ties keep the earliest interval in collection order.  Intervals whose
    admissible split range under c is empty are skipped.
    """
    best = None
    for a, b in intervals:
        length = b - a
        lo = max(_ceil_index(length * c), 1)
        hi = min(length - _ceil_index(length * c), length - 1)
        if hi < lo:
            continue
        sub = entries[offset + a : offset + b, offset + a : offset + b]
        curve = ProfileEngine(sub).curve()[lo - 1 : hi]
        j = int(np.argmax(curve))
        stat = float(curve[j])
        if best is None or stat > best[0]:
            best = (stat, offset + a + lo + j, offset + a, offset + b)
    return best


def mcpd_dp(
    d: DistanceMatrix,
    plan: PermutationPlan,
    gamma: float = 2.0 ** -0.5,
    min_len: int = 10,
    c: float = 0.1,
    q: float = 0.9,
    workers: int = 1,
) -> ChangePointSet:
    """Recursive multiple change-point detection.

    The threshold is the q-quantile of the permutation null computed once
    on the full sequence.  Each recursive call regenerates the seeded
    collection on its own segment, takes the interval with the largest
    scan statistic, and if that statistic reaches the threshold records
    the interval's change point and recurses on both sides of it.
    An empty result is a valid outcome.
    """
    if not 0.0 < q < 1.0:
        raise ConfigError(f"threshold quantile q={q} must lie in (0, 1)")
    threshold = null_quantile(d, c, plan, q, workers=workers)
    entries = d.entries
    found = []

    def recurse(lo: int, hi: int):
        if hi - lo < min_len:
            return
        intervals = seeded_intervals(hi - lo, gamma, min_len).intervals
        best = _best_interval(entries, lo, intervals, c)
        if best is None or best[0] < threshold:
            return
        stat, point, start, end = best
        found.append(Provenance(point=point, start=start, end=end, statistic=stat))
        recurse(lo, point)
        recurse(point, hi)

    recurse(0, d.n)
    found.sort(key=lambda p: p.point)
    return ChangePointSet(
        points=tuple(p.point for p in found),
        provenance=tuple(found),
        threshold=threshold,
        n=d.n,
    )
