"""Distance-profile scan statistics and change-point estimation.

For a split index k the sequence is divided into a left segment (the
first k observations) and a right segment (the rest).  For each
observation i two empirical CDFs of the distances from i are formed, one
per segment, and the squared area between them is the profile integral
of observation i.  The scan value at k is the mean profile integral
weighted by k(n-k)/n; the change-point estimate is the argmax of the
scan curve over the admissible split range.

Two evaluation paths are provided:

* a direct path (``profile_integral`` / ``scan_statistic_at``) that walks
  each row's sorted distances once per split — simple, and the reference
  all optimized results are tested against;

* a fast path behind ``scan_curve`` that reduces the per-row integrals to
  prefix sums of a single pairwise matrix, giving the whole curve for an
  ordering in O(n^2) after O(n^3) setup shared by all orderings.  This is
  what makes permutation fan-out affordable.

The fast path uses two symmetry tricks so that reversing the sequence
produces exactly mirrored statistics (bitwise, not just approximately):
rows are accumulated in reversal-invariant pairs, and every curve is the
commutative average of a forward and a backward pass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .errors import ConfigError, DimensionError
from .metrics import DistanceMatrix

__all__ = [
    "SortedRow",
    "ScanProfile",
    "DetectionResult",
    "MaxScan",
    "sorted_rows",
    "profile_integral",
    "scan_statistic_at",
    "admissible_splits",
    "scan_curve",
    "max_scan",
    "delta_estimate",
    "ProfileEngine",
]

_EPS = 1e-9  # guard for float noise in index arithmetic like ceil(n*c)


def _ceil_index(x: float) -> int:
    return math.ceil(x - _EPS)


def _floor_index(x: float) -> int:
    return math.floor(x + _EPS)


# ---------------------------------------------------------------------------
# Direct path
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SortedRow:
    """Distances from one observation to all n, sorted ascending.

    ``cols[q]`` is the observation whose distance sits at sorted position
    q, so membership flags can be consulted in sorted order.  The row
    includes the zero self-distance.
    """

    owner: int
    distances: np.ndarray
    cols: np.ndarray


def sorted_rows(d: DistanceMatrix) -> list[SortedRow]:
    """Per-observation sorted rows, built once per matrix."""
    entries = d.entries
    order = np.argsort(entries, axis=1, kind="stable")
    dist = np.take_along_axis(entries, order, axis=1)
    return [SortedRow(i, dist[i], order[i]) for i in range(d.n)]


def profile_integral(row: SortedRow, in_first_segment, k: int) -> float:
    """Squared area between the two segment CDFs of one row's distances.

    The left CDF jumps by 1/k at distances to flagged observations, the
    right one by 1/(n-k) at the rest; both include the self-distance.
    The integrand is piecewise constant between consecutive sorted
    distances and vanishes beyond the largest one, so the integral is an
    exact finite sum of (difference)^2 times gap width.
    """
    n = row.distances.shape[0]
    flags = np.asarray(in_first_segment, dtype=bool)
    if flags.shape != (n,):
        raise DimensionError(f"membership flags have shape {flags.shape}, expected ({n},)")
    if not 1 <= k <= n - 1:
        raise ValueError(f"split index k={k} out of range [1, {n - 1}]")
    if int(flags.sum()) != k:
        raise ValueError(f"membership flags mark {int(flags.sum())} observations, expected k={k}")
    left = flags[row.cols].astype(np.float64)
    c1 = np.cumsum(left)
    c2 = np.arange(1.0, n + 1.0) - c1
    diff = c1 / k - c2 / (n - k)
    gaps = np.diff(row.distances)
    return float(np.dot(diff[:-1] * diff[:-1], gaps))


def scan_statistic_at(d: DistanceMatrix, k: int, rows: Optional[list] = None) -> float:
    """Scan value at one split: weighted mean of the profile integrals.

    This is the direct reference evaluation; ``scan_curve`` must agree
    with it.  The cross-row reduction uses exact summation so the value
    does not depend on row order.
    """
    n = d.n
    if not 1 <= k <= n - 1:
        raise ValueError(f"split index k={k} out of range [1, {n - 1}]")
    if rows is None:
        rows = sorted_rows(d)
    flags = np.zeros(n, dtype=bool)
    flags[:k] = True
    integrals = [profile_integral(row, flags, k) for row in rows]
    return (k * (n - k) / n) * (math.fsum(integrals) / n)


# ---------------------------------------------------------------------------
# Fast path
# ---------------------------------------------------------------------------


class ProfileEngine:
    """Pairwise reduction of a distance matrix for fast curve evaluation.

    For row i with maximum M_i, the identity
    ``integral 1{d_ij <= t} 1{d_il <= t} dt = M_i - max(d_ij, d_il)``
    turns every segment-CDF cross term into an entry of
    ``q[j, l] = sum_i (M_i - max(d_ij, d_il))``, and the scan value at
    split k into prefix sums of q over the current ordering:

        T(k) = S11(k)/(k(n-k)) - 2 R(k)/(n(n-k)) + total*k/(n^2 (n-k))

    with S11 the sum of q over the leading k x k block, R over the
    leading k rows, and ``total`` over everything.  A permutation only
    reindexes q, so each permuted curve costs O(n^2).

    Rows are accumulated in (i, n-1-i) pairs so the reduction commutes
    with index reversal of the input matrix bit-for-bit.
    """

    def __init__(self, entries: np.ndarray):
        d = np.asarray(entries, dtype=np.float64)
        n = d.shape[0]
        if n < 2:
            raise ConfigError("need at least 2 observations")
        self.n = n
        row_max = d.max(axis=1)
        q = np.zeros((n, n))
        half = n // 2
        # chunk so temporaries stay ~tens of MB regardless of n
        chunk = max(1, (1 << 21) // (n * n))
        for start in range(0, half, chunk):
            stop = min(start + chunk, half)
            lo = d[start:stop]
            hi = d[n - stop : n - start][::-1]
            pair = row_max[start:stop, None, None] - np.maximum(lo[:, :, None], lo[:, None, :])
            pair += (
                row_max[n - stop : n - start][::-1][:, None, None]
                - np.maximum(hi[:, :, None], hi[:, None, :])
            )
            q += pair.sum(axis=0)
        if n % 2:
            q += row_max[half] - np.maximum.outer(d[half], d[half])
        self.q = q

        col_pair = q[:, :half] + q[:, n - half :][:, ::-1]
        rs = col_pair.sum(axis=1)
        if n % 2:
            rs = rs + q[:, half]
        self.row_sums = rs

        row_pair = rs[:half] + rs[n - half :][::-1]
        total = row_pair.sum()
        if n % 2:
            total += rs[half]
        self.total = float(total)

    def _oriented(self, order: np.ndarray) -> np.ndarray:
        """T at splits k = 1..n-1 under `order`, forward pass only."""
        n = self.n
        q = self.q[np.ix_(order, order)]
        rs = self.row_sums[order]
        new_terms = 2.0 * np.tril(q, -1).sum(axis=1) + np.diagonal(q)
        s11 = np.cumsum(new_terms)[:-1]
        r = np.cumsum(rs)[:-1]
        k = np.arange(1.0, n)
        nk = n - k
        return s11 / (k * nk) - 2.0 * r / (n * nk) + self.total * k / (n * n * nk)

    def curve(self, order: Optional[np.ndarray] = None) -> np.ndarray:
        """Scan values at every split k = 1..n-1 for the given ordering.

        Averages the forward pass with the pass on the reversed ordering;
        floating-point addition is commutative, so running this on the
        index-reversed matrix yields exactly the mirrored curve.
        """
        if order is None:
            order = np.arange(self.n)
        fwd = self._oriented(order)
        bwd = self._oriented(order[::-1])
        return np.maximum(0.5 * (fwd + bwd[::-1]), 0.0)


# ---------------------------------------------------------------------------
# Scan operations
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ScanProfile:
    """The scan curve restricted to the admissible split range."""

    splits: np.ndarray
    values: np.ndarray
    c: float
    n: int

    def fractions(self) -> np.ndarray:
        return self.splits / self.n

    def argmax(self) -> int:
        """Position (into splits/values) of the maximum, smallest on ties."""
        return int(np.argmax(self.values))


class MaxScan(NamedTuple):
    statistic: float
    tau_index: int
    tau: float


@dataclass(frozen=True, eq=False)
class DetectionResult:
    """Outcome of one detection run."""

    statistic: float
    tau_index: int
    tau: float
    scan: ScanProfile
    p_value: Optional[float] = None
    K: Optional[int] = None
    seed: Optional[int] = None
    null: Optional[object] = None  # NullSample when a permutation test ran


def admissible_splits(n: int, c: float) -> np.ndarray:
    """Split indices k = ceil(n c) .. n - ceil(n c), never outside [1, n-1]."""
    if not 0.0 < c < 0.5:
        raise ConfigError(f"cutoff c={c} must lie in (0, 0.5)")
    lo = max(_ceil_index(n * c), 1)
    hi = min(n - _ceil_index(n * c), n - 1)
    if hi < lo:
        raise ConfigError(f"no admissible splits for n={n}, c={c}")
    return np.arange(lo, hi + 1)


def scan_curve(d: DistanceMatrix, c: float, engine: Optional[ProfileEngine] = None) -> ScanProfile:
    """Scan statistic at every admissible split."""
    splits = admissible_splits(d.n, c)
    if engine is None:
        engine = ProfileEngine(d.entries)
    values = engine.curve()[splits - 1]
    return ScanProfile(splits=splits, values=values, c=c, n=d.n)


def max_scan(d: DistanceMatrix, c: float, engine: Optional[ProfileEngine] = None) -> MaxScan:
    """Supremum of the scan curve and the smallest maximizing split."""
    profile = scan_curve(d, c, engine=engine)
    j = profile.argmax()
    k = int(profile.splits[j])
    return MaxScan(float(profile.values[j]), k, k / d.n)


def delta_estimate(d: DistanceMatrix, m: int) -> float:
    """Plug-in two-sample divergence between rows 0..m-1 and the rest.

    Mean profile integral over sample one plus the mean over sample two,
    both at split m.  Zero when the two samples have identical profiles.
    """
    n = d.n
    if not 2 <= m <= n - 2:
        raise ValueError(f"first-sample size m={m} out of range [2, {n - 2}]")
    rows = sorted_rows(d)
    flags = np.zeros(n, dtype=bool)
    flags[:m] = True
    integrals = [profile_integral(row, flags, m) for row in rows]
    return math.fsum(integrals[:m]) / m + math.fsum(integrals[m:]) / (n - m)
