"""The admissible set of a distance matrix and its split into base polytope + diagonal.

The admissible set is cut out by ``|a_i - a_j| <= r_ij <= a_i + a_j``. Its only recession
direction is the all-ones diagonal, so it equals base + {t * 1 : t >= 0} with
base the convex hull of its vertices.

Vertices come from a halfspace intersection (qhull) on the zero-distance
quotient of ``r``, capped far above every vertex by ``sum(a) <= L``; each
candidate is then polished on its active constraint set and kept only if
those constraints have full rank.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import ConvexHull, HalfspaceIntersection, QhullError, cKDTree

from .cone import DistanceMatrix, complete_admissible, is_admissible, pack, zero_classes
from .errors import CapabilityError, StructuralError
from .laws import EXP1, DiagonalLaw

MAX_VERTEX_ORDER = 8
# exact Lebesgue sampling triangulates the base polytope; order 6 already takes seconds
MAX_EXACT_SAMPLING_ORDER = 6
AUTO_EXACT_ORDER = 5
DEDUP_DISTANCE = 1e-8
ACTIVE_SLACK = 1e-7


def admissibility_constraints(square: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``(G, h)`` with admissible set {a : G a <= h}. Rows: 3 per pair, then a_i >= 0."""
    n = square.shape[0]
    iu, ju = np.triu_indices(n, 1)
    p = iu.size
    G = np.zeros((3 * p + n, n))
    rows = np.arange(p)
    G[3 * rows, iu], G[3 * rows, ju] = 1.0, -1.0
    G[3 * rows + 1, iu], G[3 * rows + 1, ju] = -1.0, 1.0
    G[3 * rows + 2, iu], G[3 * rows + 2, ju] = -1.0, -1.0
    G[3 * p + np.arange(n), np.arange(n)] = -1.0
    rij = square[iu, ju]
    h = np.concatenate([np.repeat(rij, 3) * np.tile([1.0, 1.0, -1.0], p), np.zeros(n)])
    return G, h


def _quotient(r: DistanceMatrix) -> tuple[np.ndarray, np.ndarray]:
    """Class labels and the square matrix between class representatives."""
    labels = zero_classes(r)
    m = labels.max() + 1
    reps = np.array([np.flatnonzero(labels == c)[0] for c in range(m)])
    sq = r.square()
    return labels, sq[np.ix_(reps, reps)]


def _merge_close(points: np.ndarray, radius: float) -> np.ndarray:
    if len(points) < 2:
        return points
    pairs = cKDTree(points).query_pairs(radius, p=np.inf, output_type="ndarray")
    if len(pairs) == 0:
        return points
    graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])),
                       shape=(len(points), len(points)))
    _, labels = connected_components(graph, directed=False)
    _, first = np.unique(labels, return_index=True)
    return points[np.sort(first)]


def _true_vertices(q: np.ndarray) -> np.ndarray:
    """Vertices of the admissible set of a true distance matrix ``q`` of order >= 2."""
    m = q.shape[0]
    scale = q.max()
    qs = q / scale
    G, h = admissibility_constraints(qs)
    cap = 2.0 * m * np.triu(qs, 1).sum() + 1.0
    G2 = np.vstack([G, np.ones(m)])
    h2 = np.append(h, cap)
    norms = np.linalg.norm(G2, axis=1)
    lp = linprog(np.r_[np.zeros(m), -1.0], A_ub=np.c_[G2, norms], b_ub=h2,
                 bounds=[(None, None)] * m + [(0, 1)], method="highs")
    if lp.status != 0 or lp.x[-1] <= 0:
        raise AssertionError("admissible polytope of a true distance matrix has empty interior")
    interior = lp.x[:m]
    halfspaces = np.c_[G2, -h2]
    try:
        points = HalfspaceIntersection(halfspaces, interior).intersections
    except QhullError:
        points = HalfspaceIntersection(halfspaces, interior, qhull_options="QJ").intersections
    points = points[points.sum(axis=1) < cap - 1e-6 * cap]

    polished = []
    for x in points:
        active = (h - G @ x) < ACTIVE_SLACK
        A = G[active]
        if np.linalg.matrix_rank(A, tol=1e-9) < m:
            continue
        x = np.linalg.lstsq(A, h[active], rcond=None)[0]
        if np.all(G @ x <= h + 1e-9):
            polished.append(x)
    V = _merge_close(np.array(polished), DEDUP_DISTANCE / scale)
    return V * scale


def affine_dimension(points: np.ndarray, rel_tol: float = 1e-9) -> int:
    points = np.atleast_2d(points)
    if len(points) < 2:
        return 0
    X = points - points.mean(axis=0)
    s = np.linalg.svd(X, compute_uv=False)
    scale = max(1.0, np.abs(points).max())
    return int(np.sum(s > rel_tol * scale * math.sqrt(len(points))))


class BaseHull:
    """Convex hull of a finite point set: uniform sampling and membership.

    The hull is triangulated as cones from the centroid over its boundary
    simplices, in coordinates of its affine hull, so degenerate (lower
    dimensional) hulls are handled the same way as full ones.
    """

    def __init__(self, vertices: np.ndarray):
        V = np.atleast_2d(np.asarray(vertices, dtype=float))
        self.vertices = V
        self.origin = V.mean(axis=0)
        X = V - self.origin
        self.dim = affine_dimension(V)
        if self.dim:
            _, _, wt = np.linalg.svd(X, full_matrices=False)
            self.basis = wt[:self.dim].T
        else:
            self.basis = np.zeros((V.shape[1], 0))
        Z = X @ self.basis
        self._local = Z
        if self.dim == 1:
            self._lo, self._hi = Z.min(), Z.max()
        elif self.dim >= 2:
            try:
                hull = ConvexHull(Z, qhull_options="Qt")
            except QhullError:
                hull = ConvexHull(Z, qhull_options="QJ")
            self._facets = hull.simplices
            vols = np.abs(np.linalg.det(Z[hull.simplices])) / math.factorial(self.dim)
            self._probs = vols / vols.sum()
            self.volume = float(vols.sum())
            eq = np.unique(np.round(hull.equations, 12), axis=0)
            self._normals, self._offsets = eq[:, :-1], eq[:, -1]

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.dim == 0:
            return np.repeat(self.origin[None, :], size, axis=0)
        if self.dim == 1:
            z = rng.uniform(self._lo, self._hi, size)[:, None]
        else:
            which = rng.choice(len(self._facets), size=size, p=self._probs)
            w = rng.dirichlet(np.ones(self.dim + 1), size)
            corners = self._local[self._facets[which]]
            z = np.einsum("sk,skd->sd", w[:, :self.dim], corners)
        return self.origin + z @ self.basis.T

    def residual(self, points: np.ndarray, chunk: int = 2048) -> np.ndarray:
        """Distance-like violation of membership; 0 inside the hull."""
        P = np.atleast_2d(points) - self.origin
        z = P @ self.basis
        off = np.abs(P - z @ self.basis.T).max(axis=1)
        if self.dim == 0:
            return off
        if self.dim == 1:
            out = np.maximum(self._lo - z[:, 0], z[:, 0] - self._hi)
        else:
            out = np.empty(len(z))
            for s in range(0, len(z), chunk):
                zz = z[s:s + chunk]
                out[s:s + chunk] = (zz @ self._normals.T + self._offsets).max(axis=1)
        return np.maximum(np.maximum(out, 0.0), off)

    def contains(self, points: np.ndarray, tol: float = 1e-9) -> np.ndarray:
        scale = max(1.0, np.abs(self.vertices).max())
        return self.residual(points) <= tol * scale


@dataclass(frozen=True)
class AdmissiblePolytope:
    """Vertex description of the admissible set: conv(vertices) + diagonal ray."""

    base: DistanceMatrix
    vertices: np.ndarray
    recession_direction: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if self.recession_direction is None:
            object.__setattr__(self, "recession_direction", np.ones(self.base.order))

    @property
    def dimension(self) -> int:
        """Affine dimension of the base polytope."""
        return affine_dimension(self.vertices)

    @cached_property
    def hull(self) -> BaseHull:
        if self.base.order > MAX_EXACT_SAMPLING_ORDER:
            raise CapabilityError(
                f"triangulating the base polytope is limited to order {MAX_EXACT_SAMPLING_ORDER}")
        return BaseHull(self.vertices)

    def constraints(self) -> tuple[np.ndarray, np.ndarray]:
        return admissibility_constraints(self.base.square())

    def active_rank(self, vertex) -> int:
        G, h = self.constraints()
        scale = max(1.0, float(self.base.upper.max(initial=0.0)))
        active = (h - G @ np.asarray(vertex)) < ACTIVE_SLACK * scale
        return int(np.linalg.matrix_rank(G[active], tol=1e-9)) if active.any() else 0


def enumerate_vertices(r: DistanceMatrix) -> AdmissiblePolytope:
    """All extreme points of the admissible set, sorted lexicographically."""
    n = r.order
    if n > MAX_VERTEX_ORDER:
        raise CapabilityError(f"vertex enumeration is limited to order {MAX_VERTEX_ORDER}, got {n}")
    labels, q = _quotient(r)
    if q.shape[0] == 1:
        V = np.zeros((1, n))
    else:
        V = _true_vertices(q)[:, labels]
    V = V[np.lexsort(V.T[::-1])]
    V[np.abs(V) < 1e-12 * max(1.0, float(r.upper.max(initial=0.0)))] = 0.0
    V.setflags(write=False)
    return AdmissiblePolytope(r, V)


def contains(r: DistanceMatrix, a) -> bool:
    """Membership in the admissible set; the same test as :func:`cone.is_admissible`."""
    return bool(is_admissible(r, a))


def lower_shift(r: DistanceMatrix, points) -> np.ndarray:
    """Largest t >= 0 with p - t * 1 still admissible, for each admissible row p."""
    P = np.atleast_2d(np.asarray(points, dtype=float))
    t = P.min(axis=1)
    if r.order >= 2:
        iu, ju = np.triu_indices(r.order, 1)
        rij = r.square()[iu, ju]
        t = np.minimum(t, ((P[:, iu] + P[:, ju] - rij) / 2).min(axis=1))
    return t


class ExactSampler:
    """Uniform point of the base polytope plus an independent diagonal offset."""

    approximate = False

    def __init__(self, r: DistanceMatrix, law: DiagonalLaw = EXP1,
                 polytope: AdmissiblePolytope | None = None):
        if r.order > MAX_EXACT_SAMPLING_ORDER:
            raise CapabilityError(
                f"exact sampling is limited to order {MAX_EXACT_SAMPLING_ORDER}, got {r.order}")
        self.r = r
        self.law = law
        self.polytope = polytope if polytope is not None else enumerate_vertices(r)
        self.hull = self.polytope.hull

    def draw(self, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
        count = 1 if size is None else size
        base = self.hull.sample(rng, count)
        lam = np.asarray(self.law.sample(rng, count)).reshape(count, 1)
        out = base + lam
        return out[0] if size is None else out


class HitAndRunSampler:
    """Approximate sampler for orders where the base polytope cannot be triangulated.

    Runs hit-and-run, uniform target, on the projection of the admissible set along the
    diagonal (the polytope |y_i - y_j| <= r_ij inside the hyperplane
    sum(y) = 0), lifts each state to the lower boundary of the admissible set and adds a
    draw from the diagonal law. Moves run along directions e_i - e_j, which
    span the hyperplane and touch only the O(m) constraints involving i or j.
    The chain starts from a random sequential amalgamation point and persists
    across draws. ``burn_in`` and ``thin`` count moves and default to
    50 + 2m and max(10, m) for a quotient of m points.
    """

    approximate = True

    def __init__(self, r: DistanceMatrix, law: DiagonalLaw, rng: np.random.Generator,
                 burn_in: int | None = None, thin: int | None = None):
        self.r = r
        self.law = law
        self._labels, q = _quotient(r)
        m = q.shape[0]
        self._m = m
        self._Q = q
        self.burn_in = 50 + 2 * m if burn_in is None else burn_in
        self.thin = max(10, m) if thin is None else thin
        self._iu, self._ju = np.triu_indices(m, 1)
        self._q = q[self._iu, self._ju]
        if m == 1:
            self._y = np.zeros(1)
            return
        first = rng.uniform(0.0, q[0].max())
        start = complete_admissible(DistanceMatrix(pack(q), r.tolerance, check=False),
                                    [first], rng=rng)
        self._y = start - start.mean()
        self._moves(rng, self.burn_in)

    def _moves(self, rng: np.random.Generator, count: int) -> None:
        y, Q, m = self._y, self._Q, self._m
        pairs = rng.integers(0, m, size=(count, 2))
        shift = rng.integers(1, m, size=count)
        # second index uniform over the others
        pairs[:, 1] = (pairs[:, 0] + shift) % m
        u = rng.random(count)
        for (i, j), v in zip(pairs, u):
            di = y[i] - y
            dj = y[j] - y
            hi_arr = np.minimum(Q[i] - di, Q[j] + dj)
            lo_arr = np.maximum(-Q[i] - di, dj - Q[j])
            hi_arr[i] = hi_arr[j] = np.inf
            lo_arr[i] = lo_arr[j] = -np.inf
            gap = y[i] - y[j]
            hi = min(hi_arr.min(), (Q[i, j] - gap) / 2)
            lo = max(lo_arr.max(), (-Q[i, j] - gap) / 2)
            if hi > lo:
                t = lo + v * (hi - lo)
                y[i] += t
                y[j] -= t

    def _lift(self, y: np.ndarray) -> np.ndarray:
        shift = -y.min()
        if self._m >= 2:
            shift = max(shift, ((self._q - y[self._iu] - y[self._ju]) / 2).max())
        return y + shift

    def draw(self, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
        count = 1 if size is None else size
        out = np.empty((count, self.r.order))
        for s in range(count):
            if self._m > 1:
                self._moves(rng, self.thin)
            out[s] = (self._lift(self._y) + self.law.sample(rng))[self._labels]
        return out[0] if size is None else out


def make_sampler(r: DistanceMatrix, law: DiagonalLaw = EXP1, rng: np.random.Generator | None = None,
                 method: str = "auto", **hit_and_run):
    """Sampler for the admissible set: ``"exact"``, ``"hit-and-run"`` or ``"auto"``."""
    if method == "auto":
        method = "exact" if r.order <= AUTO_EXACT_ORDER else "hit-and-run"
    if method == "exact":
        return ExactSampler(r, law)
    if method == "hit-and-run":
        if rng is None:
            raise StructuralError("hit-and-run needs a random stream to initialise the chain")
        return HitAndRunSampler(r, law, rng, **hit_and_run)
    raise StructuralError(f"unknown sampling method {method!r}")


def sample_admissible(r: DistanceMatrix, diagonal_law: DiagonalLaw, rng: np.random.Generator,
                      size: int | None = None, method: str = "auto") -> np.ndarray:
    """Draw ``a + lambda * 1`` with ``a`` uniform on the base polytope and ``lambda`` from the law."""
    return make_sampler(r, diagonal_law, rng, method).draw(rng, size)


def decompose(polytope: AdmissiblePolytope, points, tol: float = 1e-7):
    """Split each admissible p as q + lambda * 1, q in the base, with lambda minimal.

    Bisection on lambda over [0, lower_shift(p)]: at the upper end q lies on
    the lower boundary of the admissible set, which is part of the base. Returns
    ``(q, lambda, residual)`` where ``residual`` measures q's distance
    outside the hull.
    """
    P = np.atleast_2d(np.asarray(points, dtype=float))
    hull = polytope.hull
    hi = np.maximum(lower_shift(polytope.base, P), 0.0)
    lo = np.zeros(len(P))
    inside0 = hull.contains(P)
    hi[inside0] = 0.0
    todo = ~inside0
    while np.any(todo & (hi - lo > tol)):
        active = np.flatnonzero(todo & (hi - lo > tol))
        mid = 0.5 * (lo[active] + hi[active])
        ok = hull.contains(P[active] - mid[:, None])
        hi[active[ok]] = mid[ok]
        lo[active[~ok]] = mid[~ok]
    q = P - hi[:, None]
    return q, hi, hull.residual(q)


@dataclass
class MinkowskiReport:
    passed: bool
    trials: int
    max_residual: float
    min_lambda: float
    counterexample: list | None = None
    message: str = ""

    def to_dict(self) -> dict:
        return {"passed": self.passed, "trials": self.trials, "max_residual": self.max_residual,
                "min_lambda": self.min_lambda, "counterexample": self.counterexample,
                "message": self.message}


def _random_admissible_points(r: DistanceMatrix, polytope: AdmissiblePolytope, count: int,
                              rng: np.random.Generator) -> np.ndarray:
    top = polytope.vertices.max() + 2.0 * max(1.0, float(r.upper.max(initial=0.0)))
    found = []
    total = 0
    while total < count:
        cand = rng.uniform(0.0, top, (max(4 * count, 1024), r.order))
        keep = cand[_admissible_rows(r, cand)]
        found.append(keep)
        total += len(keep)
    return np.concatenate(found)[:count]


def _admissible_rows(r: DistanceMatrix, P: np.ndarray) -> np.ndarray:
    iu, ju = np.triu_indices(r.order, 1)
    rij = r.square()[iu, ju]
    tol = r.tolerance
    ok = np.all(np.abs(P[:, iu] - P[:, ju]) <= rij + tol, axis=1)
    ok &= np.all(P[:, iu] + P[:, ju] >= rij - tol, axis=1)
    return ok & np.all(P >= -tol, axis=1)


def minkowski_check(r: DistanceMatrix, trials: int, rng: np.random.Generator,
                    law: DiagonalLaw = EXP1, residual_tol: float = 1e-6) -> MinkowskiReport:
    """Verify admissible set = base + diagonal on random points in both directions."""
    polytope = enumerate_vertices(r)
    sampler = ExactSampler(r, law, polytope)
    forward = sampler.draw(rng, trials)
    outside = np.flatnonzero(~_admissible_rows(r, forward))
    if outside.size:
        return MinkowskiReport(False, trials, math.inf, 0.0, forward[outside[0]].tolist(),
                               "a point of base + diagonal is not admissible")
    points = _random_admissible_points(r, polytope, trials, rng)
    _, lam, resid = decompose(polytope, points)
    worst = int(np.argmax(resid))
    report = MinkowskiReport(True, trials, float(resid.max()), float(lam.min()))
    if resid[worst] >= residual_tol or lam.min() < 0:
        report.passed = False
        report.counterexample = points[worst].tolist()
        report.message = "an admissible point has no decomposition q + lambda * 1"
    return report
