import itertools

import numpy as np
import pytest

from distcone import (CapabilityError, DistanceMatrix, StructuralError, UniversalBuilder,
                      build_universal, check_matrix, chi_projection, complete_admissible,
                      diagonal_schedule, is_admissible, make_sampler, nw_corner, permute,
                      universality_test, weak_universality_test)
from distcone.laws import EXP1
from distcone.universal import column_defects


@pytest.fixture(scope="module")
def built():
    return build_universal(1000, seed=0)


def test_schedule_prefix_and_bounds():
    first = list(itertools.islice(diagonal_schedule(), 10))
    assert first == [1, 1, 2, 1, 2, 3, 1, 2, 3, 4]
    sched = list(itertools.islice(diagonal_schedule(), 5000))
    assert sched[0] == 1
    assert all(1 <= m <= n for n, m in enumerate(sched, start=1))
    # each entry either restarts at 1 or increments the previous one
    assert all(b == 1 or b == a + 1 for a, b in zip(sched, sched[1:]))


def test_schedule_visit_law():
    """The floor(n / 2v) visit law cannot hold for any schedule; the diagonal one
    visits v at least J - v + 1 times, J the number of completed blocks."""
    n = 20
    demand = sum(n // (2 * v) for v in range(1, n + 1))
    assert demand > n
    for n in (10, 100, 1000):
        counts = np.bincount(list(itertools.islice(diagonal_schedule(), n)), minlength=n + 1)
        J = int((np.sqrt(8 * n + 1) - 1) // 2)
        for v in range(1, J + 1):
            assert counts[v] >= J - v + 1


def test_chi_projection():
    a = np.array([3.0, 1.0, 2.0])
    assert chi_projection(a, 2).tolist() == [3.0, 1.0]
    assert chi_projection(a, 0).tolist() == []
    with pytest.raises(StructuralError):
        chi_projection(a, 4)
    # projection of an admissible vector is admissible for the corner
    r = build_universal(6, seed=3)
    b = complete_admissible(r, [0.4])
    for k in range(1, r.order + 1):
        assert is_admissible(nw_corner(r, k), chi_projection(b, k))


def test_single_step_uses_first_stream_draw():
    r = build_universal(1, seed=0)
    assert r.order == 2
    rng = np.random.default_rng(np.random.SeedSequence(0, spawn_key=(1,)))
    base = DistanceMatrix([], order=1)
    expected = make_sampler(base, EXP1, rng, "exact").draw(rng)[0]
    assert r[0, 1] == expected


def test_builds_deterministic_and_valid():
    a = build_universal(150, seed=4)
    b = build_universal(150, seed=4)
    assert a == b and a.order == 151
    assert build_universal(150, seed=5) != a
    assert check_matrix(a.square()) == []


def test_verified_build_and_gap_log():
    builder = UniversalBuilder(seed=2, verify=True)
    r = builder.run(300)
    assert check_matrix(r.square()) == []
    assert len(builder.log) == 300
    for rec in builder.log:
        assert rec.gap <= rec.bound + 1e-9
        assert 1 <= rec.target_order <= rec.step
    assert sum(builder.visit_counts.values()) == 300


def test_bounded_build():
    r = build_universal(300, seed=1, bounded=2.0)
    assert r.upper.max() <= 2.0 + 1e-12
    assert check_matrix(r.square()) == []
    with pytest.raises(StructuralError):
        build_universal(10, bounded=0.0)


def test_bad_schedule_rejected():
    with pytest.raises(StructuralError):
        build_universal(3, schedule=[1, 3, 1])
    with pytest.raises(StructuralError):
        build_universal(0)


def test_universality_examples(built):
    report = universality_test(built, 2, 0.25, 50, seed=0)
    assert report.passed and report.worst_defect < 0.25
    assert report.matrix_order == 1001 and report.targets_tested == 50
    short = build_universal(200, seed=0)
    assert universality_test(short, 3, 0.2, 5, seed=0).passed
    flat = DistanceMatrix(np.ones(100 * 99 // 2), order=100)
    assert not universality_test(flat, 2, 0.1, 20, seed=0).passed


def test_universality_errors(built):
    small = nw_corner(built, 5)
    with pytest.raises(StructuralError):
        universality_test(small, 5, 0.1, 10)
    with pytest.raises(StructuralError):
        universality_test(small, 0, 0.1, 10)
    with pytest.raises(StructuralError):
        universality_test(small, 2, 0.0, 10)


def test_defect_monotone_in_prefix_order(built):
    rng = np.random.default_rng(0)
    targets = make_sampler(nw_corner(built, 2), EXP1, rng).draw(rng, 40)
    defects = [column_defects(nw_corner(built, N), 2, targets).max()
               for N in (20, 50, 100, 300, 1001)]
    assert all(b <= a for a, b in zip(defects, defects[1:]))


def test_weak_universality(built):
    unit = DistanceMatrix([1.0, 1.0, 1.0])
    idx = weak_universality_test(built, unit, 0.25)
    assert idx is not None and list(idx) == sorted(set(idx))
    sub = built.square()[np.ix_(idx, idx)]
    assert np.abs(sub - unit.square()).max() < 0.25
    corner = nw_corner(built, 4)
    assert weak_universality_test(built, corner, 1e-12) == (0, 1, 2, 3)
    fives = DistanceMatrix(np.full(50 * 49 // 2, 5.0), order=50)
    assert weak_universality_test(fives, DistanceMatrix([1.0]), 0.5) is None
    with pytest.raises(CapabilityError):
        weak_universality_test(built, nw_corner(built, 7), 0.1)
    with pytest.raises(StructuralError):
        weak_universality_test(corner, nw_corner(built, 5), 0.1)


def test_stability_under_finite_mutation(built):
    """Re-drawing entries among the first ten points, each inside its feasible
    interval, keeps the verdict; the defining corner is left untouched."""
    S = built.square().copy()
    rng = np.random.default_rng(9)
    for i, j in itertools.combinations(range(10), 2):
        if (i, j) == (0, 1):
            continue
        others = np.delete(np.arange(len(S)), [i, j])
        lo = np.max(np.abs(S[i, others] - S[j, others]))
        hi = np.min(S[i, others] + S[j, others])
        S[i, j] = S[j, i] = rng.uniform(lo, hi)
    mutated = DistanceMatrix.from_square(S)
    assert mutated != built
    before = universality_test(built, 2, 0.25, 50, seed=0)
    after = universality_test(mutated, 2, 0.25, 50, seed=0)
    assert before.passed and after.passed


def test_permutation_invariance(built):
    rng = np.random.default_rng(1)
    N = built.order
    # shuffling the points beyond the tested corner changes nothing
    tail = np.r_[0, 1, 2 + rng.permutation(N - 2)]
    assert universality_test(permute(built, tail), 2, 0.25, 50, 0) == \
        universality_test(built, 2, 0.25, 50, 0)
    # relabelling inside the corner changes the verdicts only in distribution
    swap = np.r_[1, 0, 2 + rng.permutation(N - 2)]
    swapped = permute(built, swap)
    a = [universality_test(built, 2, 0.25, 50, s).passed for s in range(20)]
    b = [universality_test(swapped, 2, 0.25, 50, s).passed for s in range(20)]
    assert abs(sum(a) - sum(b)) <= 4 and min(sum(a), sum(b)) >= 14
