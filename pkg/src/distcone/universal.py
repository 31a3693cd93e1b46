"""Constructive universal distance matrices and finite universality tests.

The builder grows a matrix one point at a time. At step ``n`` the schedule
names an order ``m <= n``. The next point of a seeded dense stream of
vectors admissible for the order-m corner of the current matrix becomes the first ``m`` coordinates of the new column, and
the rest of the column is filled in by amalgamation-interval midpoints.
Every order recurs without bound in the schedule, so every admissible set is
visited infinitely often by an ever finer dense sequence.
"""

from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import asdict, dataclass
from typing import Iterable, Iterator

import numpy as np

from .cone import (DEFAULT_TOLERANCE, DistanceMatrix, fill_by_amalgamation, nw_corner,
                   pack)
from .errors import CapabilityError, StructuralError
from .laws import EXP1, DiagonalLaw
from .polytope import AUTO_EXACT_ORDER, make_sampler

GAP_FLOOR = 1e-9
MAX_WEAK_ORDER = 6


def diagonal_schedule() -> Iterator[int]:
    """1; 1, 2; 1, 2, 3; ... The n-th entry never exceeds n."""
    for block in itertools.count(1):
        yield from range(1, block + 1)


def chi_projection(a, k: int) -> np.ndarray:
    """First ``k`` coordinates of ``a``."""
    a = np.asarray(a, dtype=float)
    if not 0 <= k <= a.shape[-1]:
        raise StructuralError(f"cannot project a vector of length {a.shape[-1]} to {k} coordinates")
    return a[..., :k].copy()


@dataclass(frozen=True)
class StepRecord:
    step: int
    target_order: int
    visit: int
    gap: float
    bound: float


class _DenseStream:
    """Seeded sequence of interior admissible points for ``base``, optionally capped at a diameter."""

    def __init__(self, base: DistanceMatrix, law: DiagonalLaw, seed: np.random.SeedSequence,
                 exact_order: int, cap: float | None):
        self.base = base
        self.cap = cap
        self.rng = np.random.default_rng(seed)
        method = "exact" if base.order <= exact_order else "hit-and-run"
        self.sampler = make_sampler(base, law, self.rng, method)
        if cap is not None:
            centre = (base.square()[0] + cap) / 2
            centre[0] = cap / 2
            self.centre = centre

    def next(self) -> np.ndarray:
        point = self.sampler.draw(self.rng)
        if self.cap is None:
            return point
        for _ in range(20):
            if point.max() <= self.cap:
                return point
            point = self.sampler.draw(self.rng)
        if point.max() <= self.cap:
            return point
        # pull toward a point well inside the capped admissible set
        over = point > self.cap
        theta = np.min((self.cap - self.centre[over]) / (point[over] - self.centre[over]))
        return self.centre + 0.999 * theta * (point - self.centre)


class UniversalBuilder:
    """Stateful builder for prefixes of a universal distance matrix.

    ``stream_law`` is the diagonal law of the dense streams and
    ``exact_order`` the largest order whose stream uses the exact sampler.
    With ``diameter`` set every entry stays at or below it.
    """

    def __init__(self, seed: int = 0, schedule: Iterable[int] | None = None,
                 diameter: float | None = None, stream_law: DiagonalLaw = EXP1,
                 exact_order: int = AUTO_EXACT_ORDER, tolerance: float = DEFAULT_TOLERANCE,
                 verify: bool = False):
        if diameter is not None and diameter <= 0:
            raise StructuralError("diameter must be positive")
        self.seed = int(seed)
        self.diameter = diameter
        self.stream_law = stream_law
        self.exact_order = exact_order
        self.tolerance = tolerance
        self.verify = verify
        self._schedule = iter(schedule) if schedule is not None else diagonal_schedule()
        self._buf = np.zeros((16, 16))
        self._order = 1
        self._streams: dict[int, _DenseStream] = {}
        self.visit_counts: Counter = Counter()
        self.log: list[StepRecord] = []

    @property
    def order(self) -> int:
        return self._order

    @property
    def current(self) -> DistanceMatrix:
        sq = self._buf[:self._order, :self._order]
        return DistanceMatrix(pack(sq), self.tolerance, check=False)

    def _stream(self, k: int) -> _DenseStream:
        if k not in self._streams:
            base = DistanceMatrix(pack(self._buf[:k, :k]), self.tolerance, check=False)
            seq = np.random.SeedSequence(self.seed, spawn_key=(k,))
            self._streams[k] = _DenseStream(base, self.stream_law, seq, self.exact_order,
                                            self.diameter)
        return self._streams[k]

    def _grow(self) -> None:
        size = 2 * self._buf.shape[0]
        buf = np.zeros((size, size))
        n = self._order
        buf[:n, :n] = self._buf[:n, :n]
        self._buf = buf

    def _admissible(self, row: np.ndarray) -> bool:
        n = self._order
        sq = self._buf[:n, :n]
        tol = self.tolerance * 10
        if np.any(row < -tol):
            return False
        diff = np.abs(row[:, None] - row[None, :])
        total = row[:, None] + row[None, :]
        return bool(np.all(diff <= sq + tol) and np.all(sq <= total + tol))

    def step(self) -> StepRecord:
        n = self._order
        m = int(next(self._schedule))
        if not 1 <= m <= n:
            raise StructuralError(f"schedule entry {m} at step {n} is outside 1..{n}")
        self.visit_counts[m] += 1
        target = self._stream(m).next()
        row = fill_by_amalgamation(self._buf[:n, :n], target, self.diameter,
                                   tolerance=self.tolerance)
        if self.verify and not self._admissible(row):
            raise AssertionError(f"row appended at step {n} is not admissible")
        if n + 1 > self._buf.shape[0]:
            self._grow()
        self._buf[n, :n] = row
        self._buf[:n, n] = row
        self._order = n + 1
        record = StepRecord(n, m, self.visit_counts[m],
                            float(np.max(np.abs(row[:m] - target))),
                            max(2.0 ** -n, GAP_FLOOR))
        self.log.append(record)
        return record

    def run(self, steps: int) -> DistanceMatrix:
        for _ in range(steps):
            self.step()
        return self.current


def build_universal(steps: int, seed: int = 0, schedule: Iterable[int] | None = None,
                    bounded: float | None = None, **options) -> DistanceMatrix:
    """Prefix of order ``steps + 1`` of a universal distance matrix."""
    if steps < 1:
        raise StructuralError("steps must be at least 1")
    return UniversalBuilder(seed, schedule, bounded, **options).run(steps)


@dataclass(frozen=True)
class UniversalityReport:
    order_tested: int
    epsilon: float
    targets_tested: int
    worst_defect: float
    passed: bool
    matrix_order: int = 0
    seed: int = 0
    method: str = "exact"

    def to_dict(self) -> dict:
        return asdict(self)


def column_defects(r: DistanceMatrix, n: int, targets: np.ndarray) -> np.ndarray:
    """For each target, the smallest sup-distance to a column prefix r[:n, m], m >= n."""
    cols = r.square()[:n, n:].T
    targets = np.atleast_2d(targets)
    out = np.empty(len(targets))
    for i, t in enumerate(targets):
        out[i] = np.abs(cols - t).max(axis=1).min()
    return out


def universality_test(r: DistanceMatrix, n: int, epsilon: float, targets: int, seed: int = 0,
                      law: DiagonalLaw = EXP1, method: str = "auto") -> UniversalityReport:
    """Do the column prefixes of ``r`` come within ``epsilon`` of random admissible points of the order-n corner?"""
    if not 1 <= n < r.order:
        raise StructuralError(f"need 1 <= n < {r.order}, got n={n}")
    if epsilon <= 0 or targets < 1:
        raise StructuralError("epsilon must be positive and targets at least 1")
    rng = np.random.default_rng(seed)
    sampler = make_sampler(nw_corner(r, n), law, rng, method)
    points = sampler.draw(rng, targets)
    worst = float(column_defects(r, n, points).max())
    return UniversalityReport(n, float(epsilon), int(targets), worst, worst < epsilon,
                              r.order, int(seed),
                              "hit-and-run" if sampler.approximate else "exact")


def weak_universality_test(r: DistanceMatrix, q: DistanceMatrix, epsilon: float,
                           max_nodes: int = 1_000_000) -> tuple[int, ...] | None:
    """Indices i_1 < ... < i_k whose submatrix of ``r`` is within ``epsilon`` of ``q``.

    Depth-first column matching with backtracking: each new index must match
    every already chosen one. Returns None when the search (bounded by
    ``max_nodes`` expanded nodes) finds nothing.
    """
    k, N = q.order, r.order
    if k > N:
        raise StructuralError(f"pattern of order {k} exceeds matrix order {N}")
    if k > MAX_WEAK_ORDER:
        raise CapabilityError(f"weak universality search is limited to order {MAX_WEAK_ORDER}")
    S = r.square()
    Q = q.square()
    if k == 1:
        return (0,)
    nodes = 0
    chosen: list[int] = []

    def candidates(depth: int, start: int) -> np.ndarray:
        ok = np.ones(N - start, dtype=bool)
        for d, i in enumerate(chosen):
            ok &= np.abs(S[i, start:] - Q[d, depth]) < epsilon
        return np.flatnonzero(ok) + start

    def search(depth: int, start: int) -> bool:
        nonlocal nodes
        for j in candidates(depth, start):
            if N - j < k - depth:
                break
            nodes += 1
            if nodes > max_nodes:
                return False
            chosen.append(int(j))
            if depth + 1 == k or search(depth + 1, j + 1):
                return True
            chosen.pop()
        return False

    return tuple(chosen) if search(0, 0) else None
