"""Matrix distributions of finite metric triples.

A metric triple is a finite (semi-)metric space with a probability vector on
its points. Drawing points i.i.d. from the weights and reading off their
mutual distances gives a random distance matrix. Its law determines the
triple up to measure-preserving isometry. This module samples those laws,
compares them with a permutation energy test and estimates the quantities
behind the tightness and compactness criteria.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .cone import DEFAULT_TOLERANCE, DistanceMatrix, pack, permute
from .errors import CapabilityError, ConstraintError, EntryValueError, StructuralError

WEIGHT_TOLERANCE = 1e-12


@dataclass(frozen=True)
class MetricTriple:
    space: DistanceMatrix
    weights: np.ndarray
    label: str = ""

    def __post_init__(self):
        w = np.array(self.weights, dtype=float).ravel()
        if w.size != self.space.order:
            raise StructuralError(f"{w.size} weights for {self.space.order} points")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise EntryValueError("weights must be finite and nonnegative")
        if w.sum() == 0:
            raise StructuralError("weights sum to zero")
        if abs(w.sum() - 1.0) > WEIGHT_TOLERANCE:
            raise EntryValueError(f"weights sum to {w.sum()!r}, not 1")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def order(self) -> int:
        return self.space.order

    @property
    def non_degenerate(self) -> bool:
        """Every point carries positive mass (no null open sets)."""
        return bool(np.all(self.weights > 0))

    def relabel(self, perm, label: str | None = None) -> MetricTriple:
        """The same triple with point ``perm[i]`` renamed to ``i``."""
        perm = np.asarray(perm)
        return MetricTriple(permute(self.space, perm), self.weights[perm],
                            self.label if label is None else label)

    def to_dict(self) -> dict:
        return {"label": self.label, "order": self.order,
                "upper": self.space.upper.tolist(), "weights": self.weights.tolist()}


def _normalised(weights) -> np.ndarray:
    w = np.asarray(weights, dtype=float)
    return w / w.sum()


def uniform_weights(p: int) -> np.ndarray:
    return np.full(p, 1.0 / p)


def two_point(distance: float = 1.0, weights=(0.5, 0.5), label: str = "two-point") -> MetricTriple:
    return MetricTriple(DistanceMatrix([distance]), _normalised(weights), label)


def equidistant(p: int, distance: float = 1.0, weights=None, label: str | None = None) -> MetricTriple:
    space = DistanceMatrix(np.full(p * (p - 1) // 2, float(distance)), order=p)
    w = uniform_weights(p) if weights is None else _normalised(weights)
    return MetricTriple(space, w, label or f"equidistant-{p}")


def path_graph(p: int, weights=None, label: str | None = None) -> MetricTriple:
    x = np.arange(p, dtype=float)
    space = DistanceMatrix(pack(np.abs(x[:, None] - x[None, :])), order=p)
    w = uniform_weights(p) if weights is None else _normalised(weights)
    return MetricTriple(space, w, label or f"path-{p}")


def circle(p: int, circumference: float = 1.0, weights=None, label: str | None = None) -> MetricTriple:
    """``p`` equally spaced points on a circle with the arc-length metric."""
    step = np.arange(p)
    gap = np.abs(step[:, None] - step[None, :])
    arc = np.minimum(gap, p - gap) * (circumference / p)
    w = uniform_weights(p) if weights is None else _normalised(weights)
    return MetricTriple(DistanceMatrix(pack(arc), order=p), w, label or f"circle-{p}")


@dataclass
class EmpiricalMatrixDistribution:
    """``count`` i.i.d. draws of the k x k distance matrix of a triple."""

    dimension: int
    matrices: np.ndarray
    source_label: str = ""
    seed: int | None = None
    indices: np.ndarray | None = None

    def __post_init__(self):
        self.matrices = np.asarray(self.matrices, dtype=float)
        if self.matrices.ndim != 3 or self.matrices.shape[1:] != (self.dimension, self.dimension):
            raise StructuralError(f"expected (count, {self.dimension}, {self.dimension}) matrices")

    @property
    def count(self) -> int:
        return self.matrices.shape[0]

    @property
    def samples(self) -> list[DistanceMatrix]:
        return [DistanceMatrix(pack(m), check=False) for m in self.matrices]

    def features(self, sort: bool = True) -> np.ndarray:
        """Upper triangles, one row per sample; sorted rows are permutation invariant."""
        iu, ju = np.triu_indices(self.dimension, 1)
        f = self.matrices[:, iu, ju]
        return np.sort(f, axis=1) if sort else f

    def subset(self, rows) -> EmpiricalMatrixDistribution:
        return EmpiricalMatrixDistribution(
            self.dimension, self.matrices[rows], self.source_label, self.seed,
            None if self.indices is None else self.indices[rows])


def _draw_indices(T: MetricTriple, shape, rng: np.random.Generator) -> np.ndarray:
    return rng.choice(T.order, size=shape, p=T.weights)


def sample_D(T: MetricTriple, k: int, count: int, seed: int | None = 0) -> EmpiricalMatrixDistribution:
    """I.i.d. k-point samples of ``T``; repeated points give zero off-diagonal entries."""
    if k < 2 or count < 1:
        raise StructuralError("need k >= 2 and count >= 1")
    rng = np.random.default_rng(seed)
    idx = _draw_indices(T, (count, k), rng)
    S = T.space.square()
    mats = S[idx[:, :, None], idx[:, None, :]]
    return EmpiricalMatrixDistribution(k, mats, T.label, seed, idx)


@dataclass
class LongSample:
    """Independent long samples x_1..x_n of a triple (one row of indices per replica).

    Distances are read from the triple on demand, so ``n`` can be large
    without storing n x n matrices.
    """

    triple: MetricTriple
    indices: np.ndarray
    seed: int | None = None

    @property
    def n(self) -> int:
        return self.indices.shape[1]

    @property
    def replicas(self) -> int:
        return self.indices.shape[0]

    def row(self, anchor: int, replica: int = 0) -> np.ndarray:
        """Distances from sample point ``anchor`` to every sample point."""
        idx = self.indices[replica]
        return self.triple.space.square()[idx[anchor], idx]

    def matrix(self, replica: int = 0, size: int | None = None) -> DistanceMatrix:
        idx = self.indices[replica, :size]
        return DistanceMatrix(pack(self.triple.space.square()[np.ix_(idx, idx)]), check=False)

    def prefix_distance(self, N: int) -> np.ndarray:
        """(replicas, n) array of min over anchors i < N of r[i, j]."""
        S = self.triple.space.square()
        out = np.empty(self.indices.shape)
        for rep, idx in enumerate(self.indices):
            nearest = S[idx[:N]].min(axis=0)
            out[rep] = nearest[idx]
        return out


def sample_long(T: MetricTriple, n: int, seed: int | None = 0, replicas: int = 1) -> LongSample:
    if n < 1 or replicas < 1:
        raise StructuralError("need n >= 1 and replicas >= 1")
    rng = np.random.default_rng(seed)
    return LongSample(T, _draw_indices(T, (replicas, n), rng), seed)


def ball_measure_estimate(sample: LongSample, anchor: int, radius: float, replica: int = 0) -> float:
    """Fraction of sample points strictly closer than ``radius`` to sample point ``anchor``."""
    if radius < 0:
        raise EntryValueError("radius must be nonnegative")
    if not 0 <= anchor < sample.n:
        raise StructuralError(f"anchor {anchor} outside 0..{sample.n - 1}")
    return float(np.count_nonzero(sample.row(anchor, replica) < radius) / sample.n)


# ---------------------------------------------------------------- energy test

def _pairwise(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    return np.sqrt(np.maximum(((X[:, None, :] - Y[None, :, :]) ** 2).sum(axis=2), 0.0))


@dataclass(frozen=True)
class EnergyResult:
    statistic: float
    threshold: float
    p_value: float
    permutations: int


def energy_test(X, Y, permutations: int, rng: np.random.Generator,
                alpha: float = 0.05) -> EnergyResult:
    """Two-sample energy test with a label-permutation p-value.

    Rows are first collapsed to distinct values with multiplicities, so the
    statistic and every permutation cost O(u^2) for u distinct rows. A
    permutation of the pooled sample only changes how many copies of each
    distinct row land in the first group, which is a multivariate
    hypergeometric draw.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    n, m = len(X), len(Y)
    if n < 1 or m < 1:
        raise StructuralError("both samples must be nonempty")
    pooled = np.vstack([X, Y])
    rows, inverse = np.unique(pooled, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    u = len(rows)
    a = np.bincount(inverse[:n], minlength=u).astype(float)
    total = np.bincount(inverse, minlength=u)
    D = _pairwise(rows, rows)
    scale = n * m / (n + m)

    def stat(A: np.ndarray) -> np.ndarray:
        B = total - A
        AD = A @ D
        BD = B @ D
        xy = np.einsum("ij,ij->i", AD, B) / (n * m)
        xx = np.einsum("ij,ij->i", AD, A) / (n * n)
        yy = np.einsum("ij,ij->i", BD, B) / (m * m)
        return scale * (2 * xy - xx - yy)

    observed = float(stat(a[None, :])[0])
    if u == 1:
        return EnergyResult(0.0, 0.0, 1.0, permutations)
    perms = rng.multivariate_hypergeometric(total, n, size=permutations).astype(float)
    null = stat(perms)
    # guard against round-off making exact ties look larger
    ties = 1e-12 * max(1.0, abs(observed))
    exceed = int(np.count_nonzero(null >= observed - ties))
    p = (1 + exceed) / (permutations + 1)
    return EnergyResult(observed, float(np.quantile(null, 1 - alpha)), p, permutations)


@dataclass(frozen=True)
class EquivalenceVerdict:
    statistic: float
    threshold: float
    p_value: float
    equivalent: bool
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def equivalence_test(T1: MetricTriple, T2: MetricTriple, k: int = 3, count: int = 2000,
                     permutations: int = 500, alpha: float = 0.05,
                     seed: int | None = 0) -> EquivalenceVerdict:
    """Are the k-point matrix distributions of two triples the same?"""
    for T in (T1, T2):
        if not T.non_degenerate:
            raise ConstraintError(f"triple {T.label!r} has points of zero mass")
    if not 0 < alpha < 1:
        raise StructuralError("alpha must lie in (0, 1)")
    seeds = np.random.SeedSequence(seed).spawn(3)
    E1 = sample_D(T1, k, count, seeds[0])
    E2 = sample_D(T2, k, count, seeds[1])
    res = energy_test(E1.features(), E2.features(), permutations,
                      np.random.default_rng(seeds[2]), alpha)
    config = {"k": k, "count": count, "permutations": permutations, "alpha": alpha,
              "seed": seed, "a": T1.label, "b": T2.label}
    return EquivalenceVerdict(res.statistic, res.threshold, res.p_value, res.p_value > alpha, config)


@dataclass(frozen=True)
class InvarianceReport:
    permutation_p: float
    shift_p: float
    alpha: float
    samples: int

    @property
    def passed(self) -> bool:
        return self.permutation_p > self.alpha and self.shift_p > self.alpha

    def to_dict(self) -> dict:
        return {**asdict(self), "passed": self.passed}


def invariance_diagnostics(E: EmpiricalMatrixDistribution, seed: int | None = 0,
                           permutations: int = 300, alpha: float = 0.01) -> InvarianceReport:
    """Test an empirical law for invariance under relabeling and under the shift.

    The samples are split into two halves. The first check compares the raw
    (unsorted) upper triangles of one half against the other half after a
    fresh simultaneous row/column permutation of each matrix. The second
    compares the leading (k-1) x (k-1) corners of one half against the other
    half with its first point deleted.
    """
    if E.count < 100:
        raise CapabilityError(f"invariance diagnostics need at least 100 samples, got {E.count}")
    k = E.dimension
    if k < 3:
        raise CapabilityError("invariance diagnostics need dimension at least 3")
    rng = np.random.default_rng(seed)
    order = rng.permutation(E.count)
    half = E.count // 2
    A = E.matrices[order[:half]]
    B = E.matrices[order[half:2 * half]]
    perms = np.argsort(rng.random((half, k)), axis=1)
    Bp = np.take_along_axis(np.take_along_axis(B, perms[:, :, None], axis=1), perms[:, None, :], axis=2)
    iu, ju = np.triu_indices(k, 1)
    perm_res = energy_test(A[:, iu, ju], Bp[:, iu, ju], permutations, rng, alpha)
    iu2, ju2 = np.triu_indices(k - 1, 1)
    corner = A[:, :k - 1, :k - 1][:, iu2, ju2]
    shifted = B[:, 1:, 1:][:, iu2, ju2]
    shift_res = energy_test(corner, shifted, permutations, rng, alpha)
    return InvarianceReport(perm_res.p_value, shift_res.p_value, alpha, E.count)


# ------------------------------------------------------ tightness/compactness

@dataclass(frozen=True)
class CriterionResult:
    passed: bool
    probability: float
    statistics: np.ndarray
    epsilon: float
    anchors: int
    n: int

    def to_dict(self) -> dict:
        return {"passed": self.passed, "probability": self.probability,
                "epsilon": self.epsilon, "anchors": self.anchors, "n": self.n,
                "replicas": int(len(self.statistics)),
                "mean_statistic": float(np.mean(self.statistics))}


def _check_anchors(sample: LongSample, epsilon: float, N: int) -> None:
    if not 1 <= N < sample.n:
        raise StructuralError(f"need 1 <= N < n = {sample.n}, got N={N}")
    if epsilon <= 0:
        raise EntryValueError("epsilon must be positive")


def tightness_check(sample: LongSample, epsilon: float, N: int) -> CriterionResult:
    """Per replica: the fraction of points within ``epsilon`` of one of the first N.

    Passes when that fraction exceeds 1 - epsilon in more than a 1 - epsilon
    share of the replicas.
    """
    _check_anchors(sample, epsilon, N)
    frac = (sample.prefix_distance(N) < epsilon).mean(axis=1)
    prob = float(np.mean(frac > 1 - epsilon))
    return CriterionResult(prob > 1 - epsilon, prob, frac, epsilon, N, sample.n)


def compactness_check(sample: LongSample, epsilon: float, N: int) -> CriterionResult:
    """Per replica: do the first N points form an ``epsilon``-net of the rest?

    Passes when that happens in more than a 1 - epsilon share of the replicas.
    """
    _check_anchors(sample, epsilon, N)
    covered = (sample.prefix_distance(N)[:, N:] < epsilon).all(axis=1).astype(float)
    prob = float(covered.mean())
    return CriterionResult(prob > 1 - epsilon, prob, covered, epsilon, N, sample.n)
