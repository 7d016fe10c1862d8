"""Scenario generators and the Monte Carlo power/MAE study driver.

Families cover multivariate Gaussian changes (mean, scale, mixture
split, tail weight), bivariate distributional objects represented as
gridded CDFs, and network objects represented as graph Laplacians from
preferential-attachment and stochastic-block-model generators.

Generation is deterministic given (spec, seed): every segment draws from
its own substream keyed by (seed, segment index), so a null scenario
(effect 0) runs the identical code path for both segments.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import ndtr

from .errors import ConfigError
from .metrics import (
    Composition,
    DistanceMatrix,
    EuclideanVector,
    GriddedCdf,
    GridSpec,
    SymMatrix,
    build_distance_matrix,
)
from .permutation import PermutationPlan, permutation_test
from .scan import _floor_index

__all__ = [
    "ScenarioSpec",
    "ObjectSequence",
    "SbmStage",
    "StudyRow",
    "StudyResult",
    "FAMILIES",
    "generate",
    "distance_matrix_for",
    "gen_gaussian_mean_shift",
    "gen_gaussian_scale",
    "gen_gaussian_mixture",
    "gen_tail_change",
    "gen_bivariate_dist_seq",
    "gen_pa_networks",
    "gen_sbm_sequence",
    "gaussian_mean_shift_covariance",
    "sbm_default_stages",
    "run_power_study",
]


@dataclass(frozen=True, eq=False)
class SbmStage:
    """One stochastic-block-model regime: connection matrix + community sizes."""

    b: np.ndarray
    sizes: tuple

    def __post_init__(self):
        b = np.asarray(self.b, dtype=np.float64)
        if b.ndim != 2 or b.shape[0] != b.shape[1]:
            raise ConfigError(f"connection matrix must be square, got {b.shape}")
        if not np.allclose(b, b.T, atol=1e-12):
            raise ConfigError("connection matrix must be symmetric")
        if b.min() < 0.0 or b.max() > 1.0:
            raise ConfigError("connection probabilities must lie in [0, 1]")
        sizes = tuple(int(s) for s in self.sizes)
        if len(sizes) != b.shape[0] or any(s < 1 for s in sizes):
            raise ConfigError(f"community sizes {sizes} do not match a {b.shape[0]}-community model")
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "sizes", sizes)

    @property
    def n_nodes(self) -> int:
        return sum(self.sizes)


def sbm_default_stages() -> tuple:
    """Four-regime SBM sequence: density jump, size rebalance, merge to 2 blocks."""
    b_base = [[0.2, 0.001, 0.001], [0.001, 0.2, 0.001], [0.001, 0.001, 0.2]]
    b_dense = [[0.8, 0.001, 0.001], [0.001, 0.2, 0.001], [0.001, 0.001, 0.8]]
    b_two = [[0.5, 0.01], [0.01, 0.5]]
    return (
        SbmStage(b_base, (100, 100, 100)),
        SbmStage(b_dense, (100, 100, 100)),
        SbmStage(b_dense, (200, 50, 50)),
        SbmStage(b_two, (200, 100)),
    )


@dataclass(frozen=True, eq=False)
class ScenarioSpec:
    """Parameters of one simulated sequence.

    `effect` is the family-specific magnitude: the mean shift, variance
    drop, mixture separation, t degrees of freedom, distributional shift,
    or attachment exponent.  `dims` is the vector dimension for the
    Gaussian families and the node count for pa_network; SBM node counts
    come from the stage community sizes.
    """

    family: str
    n: int = 150
    tau: object = 1.0 / 3.0
    effect: float = 0.0
    dims: int = 30
    seed: int = 0
    grid: GridSpec = field(default_factory=GridSpec)
    pa_edges: int = 2
    pa_eps: float = 1.0
    pa_seed_nodes: int = 3
    sbm_stages: tuple = None
    standardize_t: bool = False


@dataclass(frozen=True, eq=False)
class ObjectSequence:
    """A generated sequence plus its ground truth."""

    objects: tuple
    kind: str
    metric: str
    change_points: tuple
    family: str
    effect: float
    seed: int

    @property
    def n(self) -> int:
        return len(self.objects)


def _segment_rng(seed: int, segment: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(segment,)))


def _boundaries(n: int, tau) -> list:
    taus = tuple(tau) if isinstance(tau, (tuple, list)) else (float(tau),)
    cuts = []
    for t in taus:
        if not 0.0 < t < 1.0:
            raise ConfigError(f"change fraction tau={t} must lie in (0, 1)")
        cuts.append(_floor_index(n * t))
    bounds = [0] + cuts + [n]
    if any(b2 <= b1 for b1, b2 in zip(bounds, bounds[1:])):
        raise ConfigError(f"change fractions {taus} give degenerate segments for n={n}")
    return bounds


def _check_effect(spec: ScenarioSpec, low: float, high: float | None, what: str):
    e = spec.effect
    if not np.isfinite(e) or e < low or (high is not None and e >= high):
        bound = f"[{low}, {high})" if high is not None else f"[{low}, inf)"
        raise ConfigError(f"{what}={e} outside {bound}")


def _vector_sequence(spec: ScenarioSpec, draw_segment) -> ObjectSequence:
    bounds = _boundaries(spec.n, spec.tau)
    blocks = []
    for s, (a, b) in enumerate(zip(bounds, bounds[1:])):
        blocks.append(draw_segment(_segment_rng(spec.seed, s), s, b - a))
    data = np.vstack(blocks)
    return ObjectSequence(
        objects=tuple(EuclideanVector(row) for row in data),
        kind="vector",
        metric="euclidean",
        change_points=tuple(bounds[1:-1]),
        family=spec.family,
        effect=spec.effect,
        seed=spec.seed,
    )


# ---------------------------------------------------------------------------
# Gaussian vector families
# ---------------------------------------------------------------------------


def _householder_ones(p: int) -> np.ndarray:
    """Orthogonal matrix whose first column is the normalized 1-vector."""
    u = np.full(p, p ** -0.5)
    v = -u
    v = v.copy()
    v[0] += 1.0  # e1 - u
    nv = float(v @ v)
    if nv < 1e-300:
        return np.eye(p)
    return np.eye(p) - (2.0 / nv) * np.outer(v, v)


def _mean_shift_factor(p: int) -> np.ndarray:
    """A with A A' = Q diag(cos(k pi/p) + 1.5) Q', the mean change loading
    along the first eigenvector."""
    lam = np.cos(np.arange(1, p + 1) * np.pi / p) + 1.5
    return _householder_ones(p) * np.sqrt(lam)


def gaussian_mean_shift_covariance(p: int) -> np.ndarray:
    a = _mean_shift_factor(p)
    return a @ a.T


def gen_gaussian_mean_shift(spec: ScenarioSpec) -> ObjectSequence:
    """Mean jumps from 0 to effect * 1_p; structured covariance held fixed."""
    if spec.dims < 1:
        raise ConfigError(f"dimension p={spec.dims} must be >= 1")
    _check_effect(spec, 0.0, None, "mean shift")
    a = _mean_shift_factor(spec.dims)

    def draw(rng, segment, m):
        x = rng.standard_normal((m, spec.dims)) @ a.T
        if segment > 0:
            x += spec.effect
        return x

    return _vector_sequence(spec, draw)


def gen_gaussian_scale(spec: ScenarioSpec) -> ObjectSequence:
    """Isotropic variance drops from 0.8 to 0.8 - effect."""
    if spec.dims < 1:
        raise ConfigError(f"dimension p={spec.dims} must be >= 1")
    _check_effect(spec, 0.0, 0.4, "variance drop")

    def draw(rng, segment, m):
        var = 0.8 if segment == 0 else 0.8 - spec.effect
        return rng.standard_normal((m, spec.dims)) * np.sqrt(var)

    return _vector_sequence(spec, draw)


def gen_gaussian_mixture(spec: ScenarioSpec) -> ObjectSequence:
    """Standard normal splits into a symmetric two-component mixture.

    Post-change draws are N(+-mu, I) with a fair coin per observation and
    mu loading effect on the first floor(0.1 p) coordinates, so the
    overall post-change mean stays 0 while variance grows along mu.
    """
    if spec.dims < 1:
        raise ConfigError(f"dimension p={spec.dims} must be >= 1")
    e = spec.effect
    if not np.isfinite(e) or not 0.0 <= e <= 1.0:
        raise ConfigError(f"mixture separation={e} outside [0, 1]")
    mu = np.zeros(spec.dims)
    mu[: _floor_index(0.1 * spec.dims)] = e

    def draw(rng, segment, m):
        if segment == 0:
            return rng.standard_normal((m, spec.dims))
        signs = np.where(rng.integers(0, 2, size=m) == 1, -1.0, 1.0)
        return rng.standard_normal((m, spec.dims)) + signs[:, None] * mu

    return _vector_sequence(spec, draw)


def gen_tail_change(spec: ScenarioSpec) -> ObjectSequence:
    """Gaussian coordinates switch to Student-t with `effect` degrees of freedom.

    The t draws are unstandardized (variance v/(v-2) for v > 2); set
    standardize_t to rescale them to unit variance.
    """
    if spec.dims < 1:
        raise ConfigError(f"dimension p={spec.dims} must be >= 1")
    v = spec.effect
    if not np.isfinite(v) or v < 2.0:
        raise ConfigError(f"degrees of freedom v={v} must be >= 2")

    def draw(rng, segment, m):
        if segment == 0:
            return rng.standard_normal((m, spec.dims))
        x = rng.standard_t(v, size=(m, spec.dims))
        if spec.standardize_t and v > 2.0:
            x *= np.sqrt((v - 2.0) / v)
        return x

    return _vector_sequence(spec, draw)


# ---------------------------------------------------------------------------
# Bivariate distributional family
# ---------------------------------------------------------------------------

_OBJ_SD = 0.5  # each object is N(center, 0.25 I), i.e. sd 0.5 per axis


def _gaussian_cdf_object(center, grid: GridSpec) -> GriddedCdf:
    """Product-form bivariate normal CDF sampled on the grid.

    Each axis CDF is renormalized by its value at the last node so the
    corner is exactly 1; this conditions the distribution on the grid box
    and absorbs the (documented) truncation of the integration domain.
    """
    fx = ndtr((grid.x_nodes - center[0]) / _OBJ_SD)
    fy = ndtr((grid.y_nodes - center[1]) / _OBJ_SD)
    fx = np.clip(fx / max(fx[-1], 1e-300), 0.0, 1.0)
    fy = np.clip(fy / max(fy[-1], 1e-300), 0.0, 1.0)
    return GriddedCdf(np.outer(fx, fy), grid)


def gen_bivariate_dist_seq(spec: ScenarioSpec) -> ObjectSequence:
    """Random bivariate normal distributions as gridded CDFs.

    dist_mean: the center law shifts from N(0, 0.25 I) to
    N((effect, 0), 0.25 I).  dist_scale: the center law changes from
    N(0, 0.4^2 I) to sd (0.4 + effect) along the first axis.
    """
    if spec.family == "dist_mean":
        if not np.isfinite(spec.effect) or not 0.0 <= spec.effect <= 1.0:
            raise ConfigError(f"center shift={spec.effect} outside [0, 1]")
    elif spec.family == "dist_scale":
        if not np.isfinite(spec.effect) or not 0.0 <= spec.effect <= 0.4:
            raise ConfigError(f"center sd increase={spec.effect} outside [0, 0.4]")
    else:
        raise ConfigError(f"unknown bivariate mode {spec.family!r}")

    bounds = _boundaries(spec.n, spec.tau)
    objects = []
    for s, (a, b) in enumerate(zip(bounds, bounds[1:])):
        rng = _segment_rng(spec.seed, s)
        m = b - a
        if spec.family == "dist_mean":
            centers = rng.standard_normal((m, 2)) * 0.5
            if s > 0:
                centers[:, 0] += spec.effect
        else:
            sds = np.array([0.4 + spec.effect, 0.4]) if s > 0 else np.array([0.4, 0.4])
            centers = rng.standard_normal((m, 2)) * sds
        objects.extend(_gaussian_cdf_object(z, spec.grid) for z in centers)
    return ObjectSequence(
        objects=tuple(objects),
        kind="cdf",
        metric="cdf-l1",
        change_points=tuple(bounds[1:-1]),
        family=spec.family,
        effect=spec.effect,
        seed=spec.seed,
    )


# ---------------------------------------------------------------------------
# Network families
# ---------------------------------------------------------------------------


def _pa_laplacian(rng, n_nodes, gamma, m_edges, eps, seed_nodes) -> SymMatrix:
    """Laplacian of one preferential-attachment graph.

    Nodes arrive one at a time and attach to min(m_edges, existing)
    distinct nodes drawn with probability proportional to (degree+eps)^gamma;
    gamma = 0 is uniform attachment.  The seed graph is a path.
    """
    adj = np.zeros((n_nodes, n_nodes))
    deg = np.zeros(n_nodes)
    for v in range(1, min(seed_nodes, n_nodes)):
        adj[v - 1, v] = adj[v, v - 1] = 1.0
        deg[v - 1] += 1.0
        deg[v] += 1.0
    for v in range(seed_nodes, n_nodes):
        w = (deg[:v] + eps) ** gamma
        targets = rng.choice(v, size=min(m_edges, v), replace=False, p=w / w.sum())
        adj[v, targets] = 1.0
        adj[targets, v] = 1.0
        deg[v] += len(targets)
        deg[targets] += 1.0
    return SymMatrix(np.diag(deg) - adj)


def gen_pa_networks(spec: ScenarioSpec) -> ObjectSequence:
    """Independently grown attachment graphs; the exponent jumps from 0 to effect."""
    if spec.dims < 3:
        raise ConfigError(f"node count {spec.dims} must be >= 3")
    if not np.isfinite(spec.effect) or not 0.0 <= spec.effect <= 0.5:
        raise ConfigError(f"attachment exponent={spec.effect} outside [0, 0.5]")
    if spec.pa_edges < 1 or spec.pa_seed_nodes < 2:
        raise ConfigError("need pa_edges >= 1 and pa_seed_nodes >= 2")
    bounds = _boundaries(spec.n, spec.tau)
    objects = []
    for s, (a, b) in enumerate(zip(bounds, bounds[1:])):
        rng = _segment_rng(spec.seed, s)
        gamma = 0.0 if s == 0 else spec.effect
        objects.extend(
            _pa_laplacian(rng, spec.dims, gamma, spec.pa_edges, spec.pa_eps, spec.pa_seed_nodes)
            for _ in range(b - a)
        )
    return ObjectSequence(
        objects=tuple(objects),
        kind="symmatrix",
        metric="frobenius",
        change_points=tuple(bounds[1:-1]),
        family=spec.family,
        effect=spec.effect,
        seed=spec.seed,
    )


def gen_sbm_sequence(spec: ScenarioSpec) -> ObjectSequence:
    """Stochastic-block-model Laplacian sequence with one regime per segment.

    Adjacency upper triangles are Bernoulli(P) with
    P = community-expanded B, zero diagonal, mirrored.  All stages must
    agree on the total node count, otherwise the Laplacians are not
    comparable.
    """
    stages = spec.sbm_stages if spec.sbm_stages is not None else sbm_default_stages()
    tau = spec.tau if isinstance(spec.tau, (tuple, list)) else (0.25, 0.5, 0.75)
    bounds = _boundaries(spec.n, tau)
    if len(stages) != len(bounds) - 1:
        raise ConfigError(f"{len(stages)} stages for {len(bounds) - 1} segments")
    totals = {st.n_nodes for st in stages}
    if len(totals) != 1:
        raise ConfigError(f"stages disagree on node count: {sorted(totals)}")
    n_nodes = totals.pop()
    iu = np.triu_indices(n_nodes, 1)

    objects = []
    for s, (a, b) in enumerate(zip(bounds, bounds[1:])):
        rng = _segment_rng(spec.seed, s)
        st = stages[s]
        z = np.repeat(np.arange(len(st.sizes)), st.sizes)
        p_upper = st.b[np.ix_(z, z)][iu]
        for _ in range(b - a):
            adj = np.zeros((n_nodes, n_nodes))
            adj[iu] = rng.random(p_upper.shape) < p_upper
            adj = adj + adj.T
            objects.append(SymMatrix(np.diag(adj.sum(axis=1)) - adj))
    return ObjectSequence(
        objects=tuple(objects),
        kind="symmatrix",
        metric="frobenius",
        change_points=tuple(bounds[1:-1]),
        family=spec.family,
        effect=spec.effect,
        seed=spec.seed,
    )


FAMILIES = {
    "gauss_mean": gen_gaussian_mean_shift,
    "gauss_scale": gen_gaussian_scale,
    "gauss_mixture": gen_gaussian_mixture,
    "gauss_tail": gen_tail_change,
    "dist_mean": gen_bivariate_dist_seq,
    "dist_scale": gen_bivariate_dist_seq,
    "pa_network": gen_pa_networks,
    "sbm_multi": gen_sbm_sequence,
}


def generate(spec: ScenarioSpec) -> ObjectSequence:
    try:
        gen = FAMILIES[spec.family]
    except KeyError:
        raise ConfigError(
            f"unknown family {spec.family!r}; choose from {sorted(FAMILIES)}"
        ) from None
    return gen(spec)


def distance_matrix_for(seq: ObjectSequence) -> DistanceMatrix:
    return build_distance_matrix(seq.objects, seq.metric)


# ---------------------------------------------------------------------------
# Power / MAE study
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StudyRow:
    effect: float
    power: float
    mae: float
    replicates: int
    seconds: float


@dataclass(frozen=True)
class StudyResult:
    family: str
    rows: tuple


def _study_replicates(spec: ScenarioSpec, effect_idx: int, reps, K: int, c: float, alpha: float):
    out = []
    for r in reps:
        ss = np.random.SeedSequence(spec.seed, spawn_key=(effect_idx, int(r)))
        gen_seed, perm_seed = (int(x) for x in ss.generate_state(2, np.uint64))
        seq = generate(replace(spec, seed=gen_seed))
        dmat = distance_matrix_for(seq)
        res = permutation_test(dmat, c, PermutationPlan(K, perm_seed, spec.n))
        out.append((res.p_value <= alpha, abs(res.tau - float(spec.tau))))
    return out


def run_power_study(
    spec: ScenarioSpec,
    effects,
    replicates: int,
    c: float = 0.1,
    plan: PermutationPlan | None = None,
    alpha: float = 0.05,
    workers: int = 1,
) -> StudyResult:
    """Empirical power and MAE of the estimated change fraction per effect.

    The plan's seed is the master seed of the whole study; every
    (effect, replicate) pair derives its data and permutation seeds from
    the substream keyed by (effect index, replicate), so results do not
    depend on worker count or evaluation order.  When no plan is given, a
    desk-scale default of K=199 keyed by spec.seed is used.
    """
    if spec.family == "sbm_multi" or isinstance(spec.tau, (tuple, list)):
        raise ConfigError("power study needs a single-change family")
    if replicates < 1:
        raise ConfigError(f"replicates={replicates} must be >= 1")
    if plan is None:
        plan = PermutationPlan(199, spec.seed, spec.n)
    if plan.n != spec.n:
        raise ConfigError(f"plan is for n={plan.n}, scenario has n={spec.n}")
    rows = []
    for e_idx, effect in enumerate(effects):
        base = replace(spec, effect=float(effect), seed=plan.seed)
        t0 = time.perf_counter()
        reps = np.arange(replicates)
        if workers <= 1 or replicates < 2 * workers:
            outcomes = _study_replicates(base, e_idx, reps, plan.K, c, alpha)
        else:
            chunks = np.array_split(reps, workers)
            with ProcessPoolExecutor(max_workers=workers) as pool:
                futures = [
                    pool.submit(_study_replicates, base, e_idx, ch, plan.K, c, alpha)
                    for ch in chunks
                ]
                outcomes = [o for fut in futures for o in fut.result()]
        rejects = np.array([o[0] for o in outcomes], dtype=float)
        errors = np.array([o[1] for o in outcomes], dtype=float)
        rows.append(
            StudyRow(
                effect=float(effect),
                power=float(rejects.mean()),
                mae=float(errors.mean()),
                replicates=replicates,
                seconds=time.perf_counter() - t0,
            )
        )
    return StudyResult(family=spec.family, rows=tuple(rows))
