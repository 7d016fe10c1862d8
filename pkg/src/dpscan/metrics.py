"""Object types, built-in metrics, and distance-matrix construction.

Four object kinds are supported: Euclidean vectors, compositions (points
on the probability simplex), gridded bivariate CDFs, and symmetric
matrices (e.g. graph Laplacians).  Each kind has exactly one built-in
metric; everything downstream of this module consumes only the resulting
pairwise distance matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DimensionError, GridError, InputError, ValidationError

__all__ = [
    "EuclideanVector",
    "Composition",
    "GridSpec",
    "GriddedCdf",
    "SymMatrix",
    "DistanceMatrix",
    "Violation",
    "ValidationReport",
    "euclidean_distance",
    "composition_distance",
    "frobenius_distance",
    "gridded_cdf_l1_distance",
    "build_distance_matrix",
    "validate_distance_matrix",
    "METRICS",
    "default_metric_for",
]

COMPOSITION_SUM_TOL = 1e-9
CDF_CORNER_TOL = 1e-6
SYM_TOL = 1e-12


def _as_float_array(values, ndim, name):
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != ndim:
        raise ValidationError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True, eq=False)
class EuclideanVector:
    """A point in R^p."""

    values: np.ndarray

    kind = "vector"

    def __post_init__(self):
        object.__setattr__(self, "values", _as_float_array(self.values, 1, "vector"))

    def __len__(self):
        return self.values.shape[0]


@dataclass(frozen=True, eq=False)
class Composition:
    """A point on the probability simplex: nonnegative entries summing to 1.

    Entries in [-1e-9, 0) are treated as floating-point noise and clamped
    to zero; anything more negative is rejected.
    """

    values: np.ndarray

    kind = "composition"

    def __post_init__(self):
        arr = _as_float_array(self.values, 1, "composition")
        if np.any(arr < -COMPOSITION_SUM_TOL):
            raise ValidationError(
                f"composition has negative entry {arr.min():.3g}"
            )
        arr = np.maximum(arr, 0.0)
        total = arr.sum()
        if abs(total - 1.0) > COMPOSITION_SUM_TOL:
            raise ValidationError(
                f"composition entries sum to {total!r}, expected 1 within {COMPOSITION_SUM_TOL}"
            )
        object.__setattr__(self, "values", arr)

    def __len__(self):
        return self.values.shape[0]


@dataclass(frozen=True)
class GridSpec:
    """Rectangular evaluation grid for bivariate CDFs.

    The box [x_min, x_max] x [y_min, y_max] is divided into nx * ny cells;
    CDF values are sampled at the cell midpoints, so the L1 metric below is
    a midpoint Riemann sum whose cells tile the box exactly.
    """

    x_min: float = -4.0
    x_max: float = 4.0
    y_min: float = -4.0
    y_max: float = 4.0
    nx: int = 50
    ny: int = 50

    def __post_init__(self):
        if self.x_max <= self.x_min or self.y_max <= self.y_min:
            raise ConfigError("grid ranges must have positive extent")
        if self.nx < 2 or self.ny < 2:
            raise ConfigError("grid resolution must be at least 2 per axis")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.nx

    @property
    def dy(self) -> float:
        return (self.y_max - self.y_min) / self.ny

    @property
    def cell_area(self) -> float:
        return self.dx * self.dy

    @property
    def x_nodes(self) -> np.ndarray:
        return self.x_min + (np.arange(self.nx) + 0.5) * self.dx

    @property
    def y_nodes(self) -> np.ndarray:
        return self.y_min + (np.arange(self.ny) + 0.5) * self.dy


@dataclass(frozen=True, eq=False)
class GriddedCdf:
    """A bivariate CDF sampled at the nodes of a rectangular grid.

    values[i, j] = F(x_i, y_j).  Values must lie in [0, 1], be monotone
    nondecreasing along each axis, and reach ~1 at the top-right corner
    (the grid has to capture essentially all of the distribution's mass).
    """

    values: np.ndarray
    grid: GridSpec = field(default_factory=GridSpec)

    kind = "cdf"

    def __post_init__(self):
        arr = _as_float_array(self.values, 2, "gridded CDF")
        if arr.shape != (self.grid.nx, self.grid.ny):
            raise ValidationError(
                f"CDF values have shape {arr.shape}, grid expects {(self.grid.nx, self.grid.ny)}"
            )
        if arr.min() < -1e-12 or arr.max() > 1.0 + 1e-12:
            raise ValidationError("CDF values must lie in [0, 1]")
        if np.any(np.diff(arr, axis=0) < -1e-12) or np.any(np.diff(arr, axis=1) < -1e-12):
            raise ValidationError("CDF values must be monotone nondecreasing along each axis")
        if arr[-1, -1] < 1.0 - CDF_CORNER_TOL:
            raise ValidationError(
                f"CDF corner value {arr[-1, -1]!r} < 1 - {CDF_CORNER_TOL}; "
                "grid does not capture the full distribution"
            )
        object.__setattr__(self, "values", arr)


@dataclass(frozen=True, eq=False)
class SymMatrix:
    """A square symmetric real matrix, e.g. a graph Laplacian."""

    values: np.ndarray

    kind = "symmatrix"

    def __post_init__(self):
        arr = _as_float_array(self.values, 2, "symmetric matrix")
        if arr.shape[0] != arr.shape[1]:
            raise ValidationError(f"matrix must be square, got shape {arr.shape}")
        tol = SYM_TOL * np.maximum(1.0, np.abs(arr))
        if np.any(np.abs(arr - arr.T) > tol):
            i, j = np.unravel_index(np.argmax(np.abs(arr - arr.T)), arr.shape)
            raise ValidationError(
                f"matrix is not symmetric: entry ({i},{j})={arr[i, j]!r} vs ({j},{i})={arr[j, i]!r}"
            )
        object.__setattr__(self, "values", arr)

    @property
    def n_nodes(self) -> int:
        return self.values.shape[0]


# ---------------------------------------------------------------------------
# Pairwise metrics
# ---------------------------------------------------------------------------


def euclidean_distance(x: EuclideanVector, y: EuclideanVector) -> float:
    """l2 distance between two vectors of equal length."""
    if len(x) != len(y):
        raise DimensionError(f"vector lengths differ: {len(x)} vs {len(y)}")
    diff = x.values - y.values
    return float(np.sqrt(np.sum(diff * diff)))


def composition_distance(x: Composition, y: Composition) -> float:
    """Geodesic-type distance arccos(sqrt(x)' sqrt(y)) between compositions.

    The inner product is clamped to [-1, 1] before arccos so that
    near-identical compositions cannot produce NaN from overshoot.
    """
    if len(x) != len(y):
        raise DimensionError(f"composition lengths differ: {len(x)} vs {len(y)}")
    inner = np.sum(np.sqrt(x.values) * np.sqrt(y.values))
    return float(np.arccos(np.clip(inner, -1.0, 1.0)))


def frobenius_distance(a: SymMatrix, b: SymMatrix) -> float:
    """Frobenius norm of A - B."""
    if a.values.shape != b.values.shape:
        raise DimensionError(
            f"matrix shapes differ: {a.values.shape} vs {b.values.shape}"
        )
    diff = (a.values - b.values).ravel()
    return float(np.sqrt(np.sum(diff * diff)))


def gridded_cdf_l1_distance(f: GriddedCdf, g: GriddedCdf) -> float:
    """Riemann-sum L1 distance between two CDFs on the same grid."""
    if f.grid != g.grid:
        raise GridError(f"CDF grids differ: {f.grid} vs {g.grid}")
    return float(np.sum(np.abs(f.values - g.values)) * f.grid.cell_area)


# metric label -> (compatible object kind, scalar function)
METRICS = {
    "euclidean": ("vector", euclidean_distance),
    "composition": ("composition", composition_distance),
    "frobenius": ("symmatrix", frobenius_distance),
    "cdf-l1": ("cdf", gridded_cdf_l1_distance),
}

_DEFAULT_METRIC = {kind: label for label, (kind, _) in METRICS.items()}


def default_metric_for(kind: str) -> str:
    try:
        return _DEFAULT_METRIC[kind]
    except KeyError:
        raise ConfigError(f"unknown object kind {kind!r}") from None


# ---------------------------------------------------------------------------
# Distance matrices
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DistanceMatrix:
    """Dense symmetric matrix of pairwise distances.

    Entries are validated on construction: exact symmetry, zero diagonal,
    nonnegative and finite throughout.
    """

    entries: np.ndarray
    source_metric: str = "user"

    def __post_init__(self):
        arr = np.asarray(self.entries, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValidationError(f"distance matrix must be square, got shape {arr.shape}")
        report = validate_distance_matrix(arr, triangle_samples=0)
        if report.violations:
            raise ValidationError(
                "invalid distance matrix: " + "; ".join(v.message for v in report.violations[:5])
            )
        object.__setattr__(self, "entries", arr)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def permuted(self, order) -> "DistanceMatrix":
        """Matrix reindexed by the given ordering of observations."""
        order = np.asarray(order)
        return DistanceMatrix(self.entries[np.ix_(order, order)], self.source_metric)


@dataclass(frozen=True)
class Violation:
    kind: str
    i: int
    j: int
    message: str


@dataclass
class ValidationReport:
    n: int
    violations: list
    warnings: list

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_distance_matrix(m, triangle_samples: int = 200, seed: int = 0) -> ValidationReport:
    """Check symmetry, zero diagonal, nonnegativity, and finiteness.

    Accepts a DistanceMatrix or a raw array.  Structural violations are
    reported with their indices.  Triangle-inequality checks on randomly
    sampled triples are reported as warnings only, since user-supplied
    dissimilarities may legitimately be semimetrics.
    """
    arr = m.entries if isinstance(m, DistanceMatrix) else np.asarray(m, dtype=np.float64)
    violations = []
    warnings = []
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        violations.append(Violation("shape", -1, -1, f"matrix is not square: shape {arr.shape}"))
        return ValidationReport(0, violations, warnings)
    n = arr.shape[0]

    bad = ~np.isfinite(arr)
    for i, j in zip(*np.nonzero(bad)):
        violations.append(Violation("finite", int(i), int(j), f"non-finite entry at ({i},{j})"))
    neg = arr < 0
    for i, j in zip(*np.nonzero(neg & ~bad)):
        violations.append(
            Violation("nonnegative", int(i), int(j), f"negative entry {arr[i, j]!r} at ({i},{j})")
        )
    asym = arr != arr.T
    for i, j in zip(*np.nonzero(np.triu(asym, 1))):
        violations.append(
            Violation(
                "symmetry",
                int(i),
                int(j),
                f"entries ({i},{j})={arr[i, j]!r} and ({j},{i})={arr[j, i]!r} differ",
            )
        )
    for i in np.nonzero(np.diagonal(arr) != 0)[0]:
        violations.append(
            Violation("diagonal", int(i), int(i), f"nonzero diagonal {arr[i, i]!r} at {i}")
        )

    if triangle_samples > 0 and n >= 3 and not violations:
        rng = np.random.default_rng(seed)
        triples = rng.integers(0, n, size=(triangle_samples, 3))
        for i, j, k in triples:
            if arr[i, k] > arr[i, j] + arr[j, k] + 1e-9:
                warnings.append(
                    f"triangle inequality fails on ({i},{j},{k}): "
                    f"d({i},{k})={arr[i, k]!r} > d({i},{j})+d({j},{k})={arr[i, j] + arr[j, k]!r}"
                )
    return ValidationReport(n, violations, warnings)


def _stack_features(objects):
    """Stack object features row-wise so metrics vectorize over pairs.

    Returns (features, scale) where d(i, j) for every built-in metric is
    either the l2 norm of the feature difference (vector/frobenius), the
    clamped-arccos inner product (composition), or the absolute-difference
    sum times `scale` (cdf-l1).
    """
    kind = objects[0].kind
    if kind in ("vector", "composition"):
        lengths = {len(o) for o in objects}
        if len(lengths) > 1:
            raise DimensionError(f"objects have mixed lengths {sorted(lengths)}")
        return np.stack([o.values for o in objects]), None
    if kind == "symmatrix":
        shapes = {o.values.shape for o in objects}
        if len(shapes) > 1:
            raise DimensionError(f"matrices have mixed shapes {sorted(shapes)}")
        return np.stack([o.values.ravel() for o in objects]), None
    if kind == "cdf":
        grids = {o.grid for o in objects}
        if len(grids) > 1:
            raise GridError("gridded CDFs live on different grids")
        return np.stack([o.values.ravel() for o in objects]), objects[0].grid.cell_area
    raise InputError(f"unsupported object kind {kind!r}")


def build_distance_matrix(objects, metric: str | None = None) -> DistanceMatrix:
    """Pairwise distance matrix for a homogeneous object sequence.

    Only the upper triangle is computed; the result is mirrored, so the
    output is exactly symmetric.  The metric defaults to the built-in one
    for the objects' kind and must be compatible with it.
    """
    objects = list(objects)
    if not objects:
        raise InputError("empty object sequence")
    kinds = {o.kind for o in objects}
    if len(kinds) > 1:
        raise InputError(f"heterogeneous object kinds {sorted(kinds)}")
    kind = objects[0].kind
    if metric is None:
        metric = default_metric_for(kind)
    if metric not in METRICS:
        raise ConfigError(f"unknown metric {metric!r}")
    if METRICS[metric][0] != kind:
        raise ConfigError(f"metric {metric!r} is incompatible with {kind!r} objects")

    feats, scale = _stack_features(objects)
    n = len(objects)
    entries = np.zeros((n, n))
    if metric == "composition":
        roots = np.sqrt(feats)
        for i in range(n - 1):
            inner = np.sum(roots[i] * roots[i + 1 :], axis=1)
            entries[i, i + 1 :] = np.arccos(np.clip(inner, -1.0, 1.0))
    elif metric == "cdf-l1":
        for i in range(n - 1):
            entries[i, i + 1 :] = np.sum(np.abs(feats[i] - feats[i + 1 :]), axis=1) * scale
    else:  # euclidean, frobenius: l2 norm of feature difference
        for i in range(n - 1):
            diff = feats[i] - feats[i + 1 :]
            entries[i, i + 1 :] = np.sqrt(np.sum(diff * diff, axis=1))
    entries = entries + entries.T
    return DistanceMatrix(entries, source_metric=metric)
