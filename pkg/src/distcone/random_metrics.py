"""Random metrics on the naturals by iterated conditional sampling.

The first entry is drawn from a diagonal law on the half-line. Each further
row is an admissible vector for the current matrix: a uniform point of the
compact base polytope plus
an independent diagonal offset from the same law. The laws of consecutive
prefixes are consistent by construction, so they define one measure on
infinite distance matrices.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np
from scipy import stats

from .cone import DEFAULT_TOLERANCE, DistanceMatrix, nw_corner, pack
from .errors import CapabilityError, StructuralError
from .laws import EXP1, DiagonalLaw
from .polytope import AUTO_EXACT_ORDER, MAX_EXACT_SAMPLING_ORDER, make_sampler
from .universal import universality_test


@dataclass(frozen=True)
class RandomMetricConfig:
    """``exact_order`` is the largest base order sampled exactly.

    Beyond it rows come from hit-and-run, but only with
    ``allow_approximate``; otherwise the request is refused.
    """

    order: int
    diagonal_law: DiagonalLaw = EXP1
    seed: int = 0
    allow_approximate: bool = False
    exact_order: int = AUTO_EXACT_ORDER
    tolerance: float = DEFAULT_TOLERANCE

    def __post_init__(self):
        if self.order < 1:
            raise StructuralError("order must be at least 1")
        if not self.diagonal_law.full_support:
            raise StructuralError(f"diagonal law {self.diagonal_law} lacks full support on (0, inf)")
        if not 1 <= self.exact_order <= MAX_EXACT_SAMPLING_ORDER:
            raise StructuralError(f"exact_order must lie in 1..{MAX_EXACT_SAMPLING_ORDER}")

    @property
    def approximate(self) -> bool:
        """True when some rows come from the approximate sampler."""
        return self.order - 1 > self.exact_order


def iter_prefixes(config: RandomMetricConfig) -> Iterator[DistanceMatrix]:
    """Orders 1, 2, ..., config.order of one sampled matrix, from a single stream."""
    if config.approximate and not config.allow_approximate:
        raise CapabilityError(
            f"exact sampling covers orders up to {config.exact_order + 1}; "
            f"order {config.order} needs allow_approximate")
    rng = np.random.default_rng(config.seed)
    N = config.order
    square = np.zeros((N, N))
    yield DistanceMatrix([], config.tolerance, order=1, check=False)
    for n in range(1, N):
        current = DistanceMatrix(pack(square[:n, :n]), config.tolerance, check=False)
        if n == 1:
            row = np.array([config.diagonal_law.sample(rng)])
        else:
            method = "exact" if n <= config.exact_order else "hit-and-run"
            row = make_sampler(current, config.diagonal_law, rng, method).draw(rng)
        square[n, :n] = row
        square[:n, n] = row
        yield DistanceMatrix(pack(square[:n + 1, :n + 1]), config.tolerance, check=False)


def sample_metric(config: RandomMetricConfig) -> DistanceMatrix:
    last = None
    for last in iter_prefixes(config):
        pass
    return last


def defect_profile(r: DistanceMatrix, orders: Sequence[int], n: int, epsilon: float,
                   targets: int, seed: int = 0) -> np.ndarray:
    """Worst universality defect of the leading corners of ``r`` at each order."""
    return np.array([universality_test(nw_corner(r, N), n, epsilon, targets, seed).worst_defect
                     for N in orders])


@dataclass(frozen=True)
class GenericityProbe:
    orders: tuple
    defects: np.ndarray
    medians: tuple
    improved: int
    ties: int
    sign_p: float

    def to_dict(self) -> dict:
        return {"orders": list(self.orders), "medians": list(self.medians),
                "improved": self.improved, "ties": self.ties, "sign_p": self.sign_p,
                "defects": self.defects.tolist()}


def urysohn_genericity_probe(config: RandomMetricConfig, n: int, epsilon: float, targets: int,
                             samples: int = 30, small_order: int | None = None) -> GenericityProbe:
    """Does the universality defect shrink as the sampled matrix grows?

    Each sample is one matrix of ``config.order`` (seed ``config.seed + s``).
    Its corner of ``small_order`` (default one eighth of the order, at least
    n + 1) is the paired smaller matrix. Both are scored against the same
    targets. The sign test counts the pairs whose defect strictly improved;
    pairs with equal defects are dropped.
    """
    large = config.order
    small = small_order if small_order is not None else max(n + 1, large // 8)
    if not n < small < large:
        raise StructuralError(f"need n < small order < order, got {n}, {small}, {large}")
    defects = np.empty((samples, 2))
    for s in range(samples):
        cfg = RandomMetricConfig(large, config.diagonal_law, config.seed + s,
                                 config.allow_approximate, config.exact_order, config.tolerance)
        r = sample_metric(cfg)
        defects[s] = defect_profile(r, (small, large), n, epsilon, targets, seed=config.seed + s)
    improved = int(np.count_nonzero(defects[:, 1] < defects[:, 0]))
    worse = int(np.count_nonzero(defects[:, 1] > defects[:, 0]))
    ties = samples - improved - worse
    trials = improved + worse
    p = float(stats.binomtest(improved, trials, 0.5, alternative="greater").pvalue) if trials else 1.0
    medians = (float(np.median(defects[:, 0])), float(np.median(defects[:, 1])))
    return GenericityProbe((small, large), defects, medians, improved, ties, p)
