"""The ten acceptance criteria at their stated tolerances and time budgets.

Each test records one PASS/FAIL line (shown in the terminal summary and,
with ``-s``, as it runs) before asserting.
"""

import time

import numpy as np
import pytest
from scipy import stats

from conftest import ACCEPTANCE, random_metric, random_semimetric
from distcone import (DistanceMatrix, RandomMetricConfig, amalgamate, amalgamation_interval,
                      ball_measure_estimate, build_universal, check_matrix, compactness_check,
                      complete_admissible, enumerate_vertices, equivalence_test, extremal_rays,
                      geometric_rank, minkowski_check, nw_corner, sample_D, sample_long,
                      sample_metric, universality_test, weak_universality_test)
from distcone.matdist import equidistant, path_graph, two_point
from distcone.random_metrics import iter_prefixes, urysohn_genericity_probe

pytestmark = pytest.mark.slow


def record(number: int, passed: bool, detail: str) -> None:
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE.append(line)
    print(line)


def coupon_pass_probability(p: int, n: int, N: int) -> float:
    """Uniform p-point law: P(draws N+1..n all repeat a value among the first N)."""
    dist = np.zeros(p + 1)
    dist[0] = 1.0
    u = np.arange(p + 1)
    for _ in range(N):
        new = dist * u / p
        new[1:] += dist[:-1] * (p - u[:-1]) / p
        dist = new
    return float(np.sum(dist * (u / p) ** (n - N)))


def test_criterion_1_extremal_rays():
    start = time.perf_counter()
    counts, ok = [], True
    for n in range(2, 9):
        rays = extremal_rays(n)
        counts.append(len(rays))
        ok &= len(rays) == 2 ** (n - 1) - 1
        ok &= all(check_matrix(ray.generator.square()) == [] and geometric_rank(ray.generator) == 2
                  for ray in rays)
    elapsed = time.perf_counter() - start
    passed = ok and counts == [1, 3, 7, 15, 31, 63, 127] and elapsed < 1.0
    record(1, passed, f"counts={counts} time={elapsed:.2f}s")
    assert passed


def test_criterion_2_order3_polytope():
    start = time.perf_counter()
    expected = np.array([[0.5, 0.5, 0.5], [1, 0, 1], [0, 1, 1], [1, 1, 0],
                         [1.5, 0.5, 0.5], [0.5, 1.5, 0.5], [0.5, 0.5, 1.5]])
    V = enumerate_vertices(DistanceMatrix([1.0, 1.0, 1.0])).vertices
    D = np.abs(V[:, None, :] - expected[None, :, :]).max(axis=2)
    unit_ok = V.shape == (7, 3) and D.min(axis=0).max() < 1e-9 and D.min(axis=1).max() < 1e-9
    rng = np.random.default_rng(2)
    worst, counts_ok = 0.0, True
    for _ in range(100):
        r = random_metric(rng, 3, dim=2)
        W = enumerate_vertices(r).vertices
        counts_ok &= len(W) == 7
        r12, r13, r23 = r[0, 1], r[0, 2], r[1, 2]
        closest = np.array([r12 + r13 - r23, r12 - r13 + r23, -r12 + r13 + r23]) / 2
        nearest = W[np.argmin(np.linalg.norm(W, axis=1))]
        worst = max(worst, float(np.abs(nearest - closest).max()))
    elapsed = time.perf_counter() - start
    passed = unit_ok and counts_ok and worst < 1e-9 and elapsed < 5.0
    record(2, passed, f"unit3 match={unit_ok} all seven={counts_ok} nearest err={worst:.1e} "
                      f"time={elapsed:.2f}s")
    assert passed


def test_criterion_3_minkowski():
    start = time.perf_counter()
    rng = np.random.default_rng(3)
    reports = [minkowski_check(random_metric(rng, int(rng.integers(3, 6))), 1000, rng,
                               residual_tol=1e-6) for _ in range(50)]
    elapsed = time.perf_counter() - start
    worst = max(rep.max_residual for rep in reports)
    passed = all(rep.passed for rep in reports) and worst < 1e-6 and elapsed < 60
    record(3, passed, f"50 matrices x 1000 trials, max residual={worst:.1e} time={elapsed:.1f}s")
    assert passed


def test_criterion_4_amalgamation():
    start = time.perf_counter()
    rng = np.random.default_rng(4)
    failures = checked = 0
    for _ in range(10_000):
        n = int(rng.integers(1, 7))
        if n >= 2 and rng.random() < 0.3:
            r = random_semimetric(rng, n, int(rng.integers(1, n + 1)))
        else:
            r = random_metric(rng, n, int(rng.integers(1, 4)))
        scale = 1.0 + (r.upper.max() if n > 1 else 0.0)
        a = complete_admissible(r, [rng.uniform(0, scale)], rng=rng)
        b = complete_admissible(r, [rng.uniform(0, scale)], rng=rng)
        iv = amalgamation_interval(a, b, r)
        for h in np.linspace(iv.lo, iv.hi, 20):
            checked += 1
            if check_matrix(amalgamate(r, a, b, h).square()) != []:
                failures += 1
    elapsed = time.perf_counter() - start
    passed = failures == 0 and elapsed < 60
    record(4, passed, f"{checked} bordered matrices, failures={failures} time={elapsed:.1f}s")
    assert passed


def test_criterion_5_universal_builder():
    start = time.perf_counter()
    unit = DistanceMatrix([1.0, 1.0, 1.0])
    n2 = n3 = weak = 0
    for seed in range(20):
        r = build_universal(1000, seed=seed)
        n2 += universality_test(r, 2, 0.25, 50, seed=seed).passed
        n3 += universality_test(r, 3, 0.35, 30, seed=seed).passed
        weak += weak_universality_test(r, unit, 0.25) is not None
    elapsed = time.perf_counter() - start
    passed = min(n2, n3, weak) >= 18 and elapsed < 300
    record(5, passed, f"n=2 {n2}/20, n=3 {n3}/20, weak {weak}/20 (need 18/20 each) "
                      f"time={elapsed:.0f}s")
    assert passed


def test_criterion_6_equivalence():
    start = time.perf_counter()
    # analytic oracles for the 3-point sorted feature of a two-point triple:
    # all three draws coincide with probability w^3 + (1 - w)^3, else the feature is (0, d, d)
    half, skew = two_point(1.0), two_point(1.0, (0.25, 0.75))
    p_half, p_skew = 2 * 0.5 ** 3, 0.25 ** 3 + 0.75 ** 3
    oracle_ok = p_half != p_skew
    for T, p in ((half, p_half), (skew, p_skew)):
        F = sample_D(T, 3, 20_000, seed=6).features()
        freq = np.mean(~F.any(axis=1))
        oracle_ok &= abs(freq - p) < 4 * np.sqrt(p * (1 - p) / 20_000)

    base = equidistant(3, weights=[0.2, 0.3, 0.5])
    relabelled = base.relabel([2, 0, 1])
    path = path_graph(5)
    mirror = path.relabel([4, 3, 2, 1, 0])
    rates = {}
    for name, (A, B) in {"relabelled": (base, relabelled), "isometric": (path, mirror)}.items():
        rates[name] = np.mean([equivalence_test(A, B, k=3, count=2000, alpha=0.05, seed=s).equivalent
                               for s in range(200)])
    rejections = {}
    for name, (A, B) in {"distance 1 vs 2": (half, two_point(2.0)),
                         "weights": (half, skew)}.items():
        rejections[name] = np.mean([not equivalence_test(A, B, k=3, count=2000, seed=s).equivalent
                                    for s in range(200)])
    elapsed = time.perf_counter() - start
    passed = (oracle_ok and min(rates.values()) >= 0.92 and min(rejections.values()) >= 0.95
              and elapsed < 600)
    detail = ", ".join(f"{k} pass {v:.3f}" for k, v in rates.items())
    detail += ", " + ", ".join(f"{k} reject {v:.3f}" for k, v in rejections.items())
    record(6, passed, f"{detail}, oracle={oracle_ok} time={elapsed:.0f}s")
    assert passed


def test_criterion_7_ball_measure():
    start = time.perf_counter()
    T = two_point(1.0)
    replicas = 200
    sizes = [10 ** 2, 10 ** 3, 10 ** 4, 10 ** 5]
    rmse = []
    for i, n in enumerate(sizes):
        S = sample_long(T, n, seed=700 + i, replicas=replicas)
        est = np.array([ball_measure_estimate(S, 0, 0.5, replica=k) for k in range(replicas)])
        rmse.append(float(np.sqrt(np.mean((est - 0.5) ** 2))))
    single = ball_measure_estimate(sample_long(T, 10 ** 4, seed=7), 0, 0.5)
    slope = float(np.polyfit(np.log10(sizes), np.log10(rmse), 1)[0])
    elapsed = time.perf_counter() - start
    passed = abs(single - 0.5) < 0.02 and abs(slope + 0.5) <= 0.15 and elapsed < 120
    record(7, passed, f"estimate at 1e4={single:.4f}, slope={slope:.3f} time={elapsed:.1f}s")
    assert passed


def test_criterion_8_compactness():
    start = time.perf_counter()
    T = equidistant(100)
    n, replicas = 10_000, 200
    S = sample_long(T, n, seed=8, replicas=replicas)
    low, high = compactness_check(S, 0.5, 5), compactness_check(S, 0.5, 2000)
    agree = True
    parts = []
    for N in (5, 500, 2000):
        expected = coupon_pass_probability(100, n, N)
        got = compactness_check(S, 0.5, N).probability
        se = np.sqrt(expected * (1 - expected) / replicas)
        agree &= abs(got - expected) <= 3.5 * se + 1.0 / replicas
        parts.append(f"N={N} {got:.3f} vs {expected:.3f}")
    elapsed = time.perf_counter() - start
    passed = (not low.passed and high.passed and high.probability > 0.5 and agree
              and elapsed < 120)
    record(8, passed, f"{'; '.join(parts)} time={elapsed:.1f}s")
    assert passed


def test_criterion_9_random_metric_sampler():
    start = time.perf_counter()
    config = RandomMetricConfig(2)
    draws = [sample_metric(RandomMetricConfig(2, config.diagonal_law, seed=s))[0, 1]
             for s in range(10_000)]
    ks_p = float(stats.kstest(draws, config.diagonal_law.cdf).pvalue)
    valid = all(check_matrix(sample_metric(RandomMetricConfig(k, seed=s, allow_approximate=k > 6))
                             .square()) == []
                for k in range(1, 9) for s in range(10))
    prefixes = list(iter_prefixes(RandomMetricConfig(6, seed=9)))
    consistent = all(nw_corner(prefixes[-1], p.order) == p for p in prefixes)
    consistent &= all(sample_metric(RandomMetricConfig(k, seed=9)) == prefixes[k - 1]
                      for k in range(1, 7))
    elapsed = time.perf_counter() - start
    passed = ks_p > 0.01 and valid and consistent and elapsed < 120
    record(9, passed, f"KS p={ks_p:.3f}, orders 1-8 valid={valid}, prefixes exact={consistent} "
                      f"time={elapsed:.1f}s")
    assert passed


def test_criterion_10_genericity_probe():
    start = time.perf_counter()
    config = RandomMetricConfig(400, seed=0, allow_approximate=True)
    probe = urysohn_genericity_probe(config, 2, 0.25, 50, samples=30, small_order=50)
    elapsed = time.perf_counter() - start
    small, large = probe.medians
    passed = large < small and probe.sign_p < 0.05 and elapsed < 600
    record(10, passed, f"median defect {small:.3f} -> {large:.3f}, improved {probe.improved}/30 "
                       f"ties {probe.ties}, sign p={probe.sign_p:.4f} time={elapsed:.0f}s")
    assert passed
