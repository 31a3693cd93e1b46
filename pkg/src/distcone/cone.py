"""Finite distance matrices: storage, validation, extension and projection.

Matrices are stored as the packed upper triangle in column order::

    r[0,1], r[0,2], r[1,2], r[0,3], r[1,3], r[2,3], ...

so the entries of column ``j`` above the diagonal form one contiguous block.
That block is exactly the admissible vector that was appended when point
``j`` was added, which makes :func:`extend` a concatenation and
:func:`nw_corner` a prefix slice. Indices are 0-based throughout.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import ConstraintError, EntryValueError, StructuralError

DEFAULT_TOLERANCE = 1e-9


def packed_length(order: int) -> int:
    return order * (order - 1) // 2


def order_from_length(length: int) -> int:
    order = (1 + math.isqrt(1 + 8 * length)) // 2
    if packed_length(order) != length:
        raise StructuralError(f"{length} entries is not a packed upper triangle")
    return order


def packed_index(i: int, j: int) -> int:
    """Position of entry (i, j), i != j, in the packed upper triangle."""
    if i == j:
        raise StructuralError("the diagonal is not stored")
    if i > j:
        i, j = j, i
    return j * (j - 1) // 2 + i


def pack(square: np.ndarray) -> np.ndarray:
    n = square.shape[0]
    cols = [square[:j, j] for j in range(1, n)]
    return np.concatenate(cols) if cols else np.zeros(0)


def unpack(upper: np.ndarray, order: int) -> np.ndarray:
    square = np.zeros((order, order))
    pos = 0
    for j in range(1, order):
        square[:j, j] = upper[pos:pos + j]
        pos += j
    return square + square.T


@dataclass(frozen=True)
class Violation:
    """One violated constraint.

    ``slack`` is the signed amount by which the inequality fails (negative),
    or the offending deviation for the diagonal and symmetry families.
    """

    kind: str
    indices: tuple
    slack: float

    def to_dict(self) -> dict:
        return {"kind": self.kind, "indices": list(self.indices), "slack": self.slack}


@lru_cache(maxsize=64)
def _pairs(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Upper-triangle index pairs (i < j) in row order, cached per order."""
    iu, ju = np.triu_indices(n, 1)
    iu.flags.writeable = False
    ju.flags.writeable = False
    return iu, ju


def _check_entries(values: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(values)):
        raise EntryValueError(f"{what} contains NaN or infinite entries")
    if np.any(values < 0):
        bad = int(np.flatnonzero(values < 0)[0])
        raise EntryValueError(f"{what} has a negative entry at position {bad}")


def triangle_violations(square: np.ndarray, tolerance: float = DEFAULT_TOLERANCE,
                        limit: int | None = None) -> list[Violation]:
    """Every triple (i, k, j), i < j, with r[i,k] + r[k,j] < r[i,j] - tolerance."""
    n = square.shape[0]
    found: list[Violation] = []
    bound = square - tolerance
    # sums[t, i, j] = r[i, k] + r[k, j] for k = k0 + t, in blocks to bound memory
    step = max(1, 4_000_000 // (n * n))
    for k0 in range(0, n, step):
        rows = square[k0:k0 + step]
        sums = rows[:, :, None] + rows[:, None, :]
        bad = sums < bound
        if not bad.any():
            continue
        for t, i, j in zip(*np.nonzero(bad)):
            k = k0 + int(t)
            if i >= j or k == i or k == j:
                continue
            found.append(Violation("triangle", (int(i), k, int(j)),
                                   float(sums[t, i, j] - square[i, j])))
            if limit is not None and len(found) >= limit:
                return found
    return found


def satisfies_triangle(square: np.ndarray, tolerance: float = DEFAULT_TOLERANCE) -> bool:
    n = square.shape[0]
    for k in range(n):
        if np.any(square[:, k, None] + square[None, k, :] < square - tolerance):
            return False
    return True


class DistanceMatrix:
    """Immutable finite (semi-)metric on the points ``0 .. order-1``.

    Construct from the packed upper triangle; use :meth:`from_square` for a
    full matrix. With ``check=True`` (the default) the triangle inequalities
    are verified and :class:`ConstraintError` lists every violation.
    """

    __slots__ = ("_upper", "_square", "_order", "tolerance")

    def __init__(self, upper: Iterable[float], tolerance: float = DEFAULT_TOLERANCE, *,
                 order: int | None = None, check: bool = True):
        values = np.array(upper, dtype=float).ravel()
        n = order_from_length(values.size) if order is None else int(order)
        if n < 1:
            raise StructuralError("order must be at least 1")
        if values.size != packed_length(n):
            raise StructuralError(f"order {n} needs {packed_length(n)} entries, got {values.size}")
        if tolerance < 0:
            raise EntryValueError("tolerance must be nonnegative")
        _check_entries(values, "distance matrix")
        values.setflags(write=False)
        self._upper = values
        self._order = n
        self._square = None
        self.tolerance = float(tolerance)
        if check:
            bad = triangle_violations(self.square(), self.tolerance)
            if bad:
                raise ConstraintError(f"{len(bad)} triangle inequalities violated", bad)

    @classmethod
    def from_square(cls, square, tolerance: float = DEFAULT_TOLERANCE, *,
                    check: bool = True) -> DistanceMatrix:
        return validate(square, tolerance) if check else cls(
            pack(np.asarray(square, dtype=float)), tolerance, check=False)

    @property
    def order(self) -> int:
        return self._order

    @property
    def upper(self) -> np.ndarray:
        return self._upper

    def square(self) -> np.ndarray:
        """Full symmetric matrix (read-only, cached)."""
        if self._square is None:
            sq = unpack(self._upper, self._order)
            sq.setflags(write=False)
            self._square = sq
        return self._square

    def column(self, j: int) -> np.ndarray:
        """Distances from point ``j`` to the points before it."""
        start = packed_length(j)
        return self._upper[start:start + j]

    def __getitem__(self, key) -> float:
        i, j = key
        if not (0 <= i < self._order and 0 <= j < self._order):
            raise StructuralError(f"index {key} outside order {self._order}")
        return 0.0 if i == j else float(self._upper[packed_index(i, j)])

    def __eq__(self, other) -> bool:
        if not isinstance(other, DistanceMatrix):
            return NotImplemented
        return self._order == other._order and np.array_equal(self._upper, other._upper)

    def __hash__(self) -> int:
        return hash((self._order, self._upper.tobytes()))

    def __repr__(self) -> str:
        if self._order <= 6:
            return f"DistanceMatrix(order={self._order}, upper={self._upper.tolist()})"
        return f"DistanceMatrix(order={self._order})"

    def to_dict(self) -> dict:
        return {"order": self._order, "upper": self._upper.tolist()}


def check_matrix(candidate, tolerance: float = DEFAULT_TOLERANCE) -> list[Violation]:
    """All diagonal, symmetry and triangle violations of a square matrix.

    Structural problems and NaN/negative entries raise instead of being
    reported, since the remaining constraints are meaningless for them.
    """
    square = np.asarray(candidate, dtype=float)
    if square.ndim != 2 or square.shape[0] != square.shape[1] or square.shape[0] == 0:
        raise StructuralError(f"expected a nonempty square matrix, got shape {square.shape}")
    _check_entries(square, "candidate")
    n = square.shape[0]
    found = [Violation("diagonal", (i, i), float(square[i, i]))
             for i in range(n) if square[i, i] > tolerance]
    asym = np.abs(square - square.T)
    for i, j in zip(*np.nonzero(np.triu(asym > tolerance, 1))):
        found.append(Violation("symmetry", (int(i), int(j)), float(asym[i, j])))
    # triangle check on the upper triangle as stored, diagonal forced to zero
    sym = np.triu(square, 1)
    sym = sym + sym.T
    found.extend(triangle_violations(sym, tolerance))
    return found


def validate(candidate, tolerance: float = DEFAULT_TOLERANCE) -> DistanceMatrix:
    """Return ``candidate`` as a :class:`DistanceMatrix` or raise.

    Raises
    ------
    StructuralError
        The input is not a nonempty square matrix.
    EntryValueError
        Some entry is NaN, infinite or negative.
    ConstraintError
        Diagonal, symmetry or triangle constraints fail; ``violations``
        lists each of them with indices and slack.
    """
    violations = check_matrix(candidate, tolerance)
    if violations:
        raise ConstraintError(f"{len(violations)} constraints violated", violations)
    square = np.asarray(candidate, dtype=float)
    return DistanceMatrix(pack(square), tolerance, check=False)


@dataclass(frozen=True)
class Admissibility:
    ok: bool
    violations: list

    def __bool__(self) -> bool:
        return self.ok


def admissibility_violations(r: DistanceMatrix, a, tolerance: float | None = None) -> list[Violation]:
    a = np.asarray(a, dtype=float).ravel()
    n = r.order
    if a.size != n:
        raise StructuralError(f"vector of length {a.size} for a matrix of order {n}")
    if not np.all(np.isfinite(a)):
        raise EntryValueError("admissible vector contains NaN or infinite entries")
    tol = r.tolerance if tolerance is None else tolerance
    found = [Violation("nonnegative", (i,), float(a[i])) for i in np.flatnonzero(a < -tol)]
    if n >= 2:
        iu, ju = _pairs(n)
        rij = r.square()[iu, ju]
        diff = rij - np.abs(a[iu] - a[ju])
        total = a[iu] + a[ju] - rij
        if diff.min() < -tol:
            found += [Violation("difference", (int(iu[b]), int(ju[b])), float(diff[b]))
                      for b in np.flatnonzero(diff < -tol)]
        if total.min() < -tol:
            found += [Violation("sum", (int(iu[b]), int(ju[b])), float(total[b]))
                      for b in np.flatnonzero(total < -tol)]
    return found


def is_admissible(r: DistanceMatrix, a, tolerance: float | None = None) -> Admissibility:
    """Check |a_i - a_j| <= r_ij <= a_i + a_j for all pairs (and a >= 0)."""
    bad = admissibility_violations(r, a, tolerance)
    return Admissibility(not bad, bad)


def extend(r: DistanceMatrix, a) -> DistanceMatrix:
    """Border ``r`` with ``a`` as its last row and column."""
    bad = admissibility_violations(r, a)
    if bad:
        raise ConstraintError("vector is not admissible", bad)
    a = np.asarray(a, dtype=float).ravel()
    return DistanceMatrix(np.concatenate([r.upper, a]), r.tolerance, order=r.order + 1, check=False)


def nw_corner(r: DistanceMatrix, k: int) -> DistanceMatrix:
    """Leading principal submatrix of order ``k``."""
    if not 1 <= k <= r.order:
        raise StructuralError(f"corner order {k} outside 1..{r.order}")
    return DistanceMatrix(r.upper[:packed_length(k)], r.tolerance, order=k, check=False)


def nw_shift(r: DistanceMatrix) -> DistanceMatrix:
    """Drop the first point (row and column 0)."""
    if r.order < 2:
        raise StructuralError("cannot shift a matrix of order 1")
    return submatrix(r, range(1, r.order))


def submatrix(r: DistanceMatrix, indices: Sequence[int]) -> DistanceMatrix:
    idx = np.asarray(list(indices), dtype=int)
    if idx.size == 0 or idx.min() < 0 or idx.max() >= r.order:
        raise StructuralError("submatrix indices out of range")
    sub = r.square()[np.ix_(idx, idx)]
    return DistanceMatrix(pack(sub), r.tolerance, order=idx.size, check=False)


def permute(r: DistanceMatrix, perm: Sequence[int]) -> DistanceMatrix:
    """Simultaneous row/column permutation: new point ``t`` is old ``perm[t]``."""
    perm = np.asarray(perm, dtype=int)
    if sorted(perm.tolist()) != list(range(r.order)):
        raise StructuralError("not a permutation of the point indices")
    return submatrix(r, perm)


def zero_classes(r: DistanceMatrix) -> np.ndarray:
    """Label of the zero-distance class of each point (distances <= tolerance)."""
    n = r.order
    if n == 1:
        return np.zeros(1, dtype=int)
    iu, ju = np.triu_indices(n, 1)
    close = r.square()[iu, ju] <= r.tolerance
    graph = csr_matrix((np.ones(close.sum()), (iu[close], ju[close])), shape=(n, n))
    _, labels = connected_components(graph, directed=False)
    return labels


def geometric_rank(r: DistanceMatrix) -> int:
    """Number of points in the metric quotient of ``r``."""
    return int(zero_classes(r).max()) + 1


@dataclass(frozen=True)
class ExtremalRay:
    """The ray through the cut semi-metric of the bipartition {S, complement}."""

    partition: frozenset
    generator: DistanceMatrix


def cut_metric(order: int, side: Iterable[int]) -> DistanceMatrix:
    inside = np.zeros(order, dtype=bool)
    inside[list(side)] = True
    square = (inside[:, None] != inside[None, :]).astype(float)
    return DistanceMatrix(pack(square), order=order, check=False)


def extremal_rays(n: int) -> list[ExtremalRay]:
    """Generators of the extremal rays of the cone of order-``n`` distance matrices.

    One ray per unordered bipartition; ``partition`` is the side containing
    point 0, so the list has ``2**(n-1) - 1`` entries.
    """
    if n < 2:
        raise StructuralError("the cone of order 1 is a single point and has no rays")
    rays = []
    rest = range(1, n)
    for size in range(0, n - 1):
        for extra in itertools.combinations(rest, size):
            side = frozenset((0,) + extra)
            rays.append(ExtremalRay(side, cut_metric(n, side)))
    return rays


class Interval(tuple):
    """Closed interval ``(lo, hi)``."""

    def __new__(cls, lo: float, hi: float):
        return super().__new__(cls, (float(lo), float(hi)))

    @property
    def lo(self) -> float:
        return self[0]

    @property
    def hi(self) -> float:
        return self[1]

    @property
    def midpoint(self) -> float:
        return 0.5 * (self[0] + self[1])

    def __contains__(self, x) -> bool:
        return self[0] <= x <= self[1]


def amalgamation_interval(rho1, rho2, shared: DistanceMatrix) -> Interval:
    """Feasible distances between two one-point extensions of ``shared``.

    ``rho1`` and ``rho2`` are the distances from each new point to the shared
    points. Every ``h`` in ``[max |rho1 - rho2|, min (rho1 + rho2)]`` glues the
    two extensions into one valid matrix of order ``shared.order + 2``.
    """
    for name, rho in (("rho1", rho1), ("rho2", rho2)):
        bad = admissibility_violations(shared, rho)
        if bad:
            raise ConstraintError(f"{name} is not admissible for the shared matrix", bad)
    rho1 = np.asarray(rho1, dtype=float).ravel()
    rho2 = np.asarray(rho2, dtype=float).ravel()
    return Interval(np.max(np.abs(rho1 - rho2)), np.min(rho1 + rho2))


def amalgamate(shared: DistanceMatrix, rho1, rho2, h: float) -> DistanceMatrix:
    """The order ``n + 2`` matrix joining both extensions at distance ``h``."""
    first = extend(shared, rho1)
    return extend(first, np.append(np.asarray(rho2, dtype=float), h))


def complete_admissible(r: DistanceMatrix, prefix, cap: float | None = None,
                        rng: np.random.Generator | None = None) -> np.ndarray:
    """Extend ``prefix``, admissible for the order-k corner, to a vector admissible for ``r``.

    Coordinate ``j`` is placed in the amalgamation interval of the partial
    vector against point ``j``: at its midpoint, or uniformly when ``rng`` is
    given. ``cap`` clips each interval from above (bounded-diameter variant).
    """
    k = len(prefix)
    if not 1 <= k <= r.order:
        raise StructuralError(f"prefix length {k} outside 1..{r.order}")
    return fill_by_amalgamation(r.square(), prefix, cap, rng, r.tolerance)


def fill_by_amalgamation(square: np.ndarray, prefix, cap: float | None = None,
                         rng: np.random.Generator | None = None,
                         tolerance: float = DEFAULT_TOLERANCE) -> np.ndarray:
    """Array-level core of :func:`complete_admissible` (``square`` may be a view)."""
    n = square.shape[0]
    k = len(prefix)
    b = np.empty(n)
    b[:k] = prefix
    if k == n:
        return b
    # running bounds for the coordinates still to be placed
    lo = np.max(np.abs(b[:k, None] - square[:k, k:]), axis=0)
    hi = np.min(b[:k, None] + square[:k, k:], axis=0)
    tmp = np.empty(n - k)
    for j in range(k, n):
        t = j - k
        lo_j, hi_j = lo[t], hi[t]
        if cap is not None and cap < hi_j:
            hi_j = cap
        if lo_j > hi_j:
            if lo_j - hi_j > 1e3 * tolerance + 1e-12 * max(1.0, hi_j):
                raise AssertionError(f"empty amalgamation interval [{lo_j}, {hi_j}] at coordinate {j}")
            hi_j = lo_j
        bj = 0.5 * (lo_j + hi_j) if rng is None else rng.uniform(lo_j, hi_j)
        b[j] = bj
        if j + 1 < n:
            col = square[j, j + 1:]
            w = tmp[t + 1:]
            np.subtract(col, bj, out=w)
            np.abs(w, out=w)
            np.maximum(lo[t + 1:], w, out=lo[t + 1:])
            np.add(col, bj, out=w)
            np.minimum(hi[t + 1:], w, out=hi[t + 1:])
    return b
