"""Acceptance criteria, one test per criterion (or per instance where they split).

Each test prints a single ``PASS``/``FAIL`` line with the measured numbers
before asserting, so ``pytest -v -s`` or the captured output shows the
summary even when an assertion fails.
"""

import math
import time

import numpy as np
import pytest

from causal_rdf.directed import (
    directed_information,
    mi_equals_di_check,
    optimal_r_kernel,
    variational_A,
    variational_B,
)
from causal_rdf.oracle import analytic_binary_rdf, classical_blahut, grid_lagrangian_min
from causal_rdf.prob import (
    KernelKind,
    causal_product,
    condition_joint,
    iid_source,
    kl_divergence,
    marginals,
    markov_source,
    random_family,
    random_pmf_rows,
)
from causal_rdf.rdf import BaaConfig, DistortionSpec, Init, baa_run, curve_shape_violations, na_rdf_value, rd_curve

from conftest import HAMMING, LN2, h2, random_instances

N_INSTANCES = 100
DRAWS = 100
SYM_MARKOV = ([0.5, 0.5], [[0.7, 0.3], [0.3, 0.7]])
ASYM_MARKOV = ([0.8, 0.2], [[0.9, 0.1], [0.4, 0.6]])


@pytest.fixture
def report(capsys):
    def emit(name, ok, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} {name}: {detail}")
        return ok

    return emit


@pytest.fixture(scope="module")
def instances():
    return random_instances(N_INSTANCES, seed=2024)


def test_criterion_1_variational_a(instances, report):
    rng = np.random.default_rng(11)
    t0 = time.perf_counter()
    min_gap, worst_kl, worst_achiever = math.inf, 0.0, 0.0
    for p, q in instances:
        di = directed_information(p, q).value_nats
        _, nu = marginals(causal_product(p, q))
        for _ in range(DRAWS):
            nb = random_pmf_rows((nu.mass.size,), rng)
            gap = variational_A(p, q, nb) - di
            min_gap = min(min_gap, gap)
            worst_kl = max(worst_kl, abs(gap - kl_divergence(nu, nb)))
        worst_achiever = max(worst_achiever, abs(variational_A(p, q, nu) - di))
    elapsed = time.perf_counter() - t0
    ok = min_gap >= -1e-12 and worst_kl <= 1e-10 and worst_achiever <= 1e-10 and elapsed < 30
    report("1 variational A", ok,
           f"min gap {min_gap:.2e}, |gap-KL| {worst_kl:.2e}, achiever {worst_achiever:.2e}, {elapsed:.1f}s")
    assert ok


def test_criterion_2_variational_b(instances, report):
    rng = np.random.default_rng(12)
    t0 = time.perf_counter()
    min_gap, worst_achiever, worst_r = math.inf, 0.0, 0.0
    for p, q in instances:
        di = directed_information(p, q).value_nats
        for _ in range(DRAWS):
            s = random_family(KernelKind.S_KIND, p.x_indexer, p.y_indexer, rng)
            r = random_family(KernelKind.R_KIND, p.x_indexer, p.y_indexer, rng)
            min_gap = min(min_gap, di - variational_B(p, q, s, r))
        j = causal_product(p, q)
        s_star = condition_joint(j, KernelKind.S_KIND)
        r_star = condition_joint(j, KernelKind.R_KIND)
        worst_achiever = max(worst_achiever, abs(di - variational_B(p, q, s_star, r_star)))
        for a, b, z in zip(optimal_r_kernel(p, q).stages, r_star.stages, r_star.zero_rows):
            if (~z).any():
                worst_r = max(worst_r, float(np.abs(a - b)[~z].max()))
    elapsed = time.perf_counter() - t0
    ok = min_gap >= -1e-12 and worst_achiever <= 1e-10 and worst_r <= 1e-12 and elapsed < 60
    report("2 variational B", ok,
           f"min gap {min_gap:.2e}, achiever {worst_achiever:.2e}, r-kernel {worst_r:.2e}, {elapsed:.1f}s")
    assert ok


def test_criterion_3_mi_equals_di_without_feedback(report):
    pairs = random_instances(N_INSTANCES, seed=2025, feedback=False)
    worst = max(mi_equals_di_check(p, q) for p, q in pairs)
    ok = worst <= 1e-10
    report("3 MI = DI without feedback", ok, f"max |I - DI| {worst:.2e} over {len(pairs)} instances")
    assert ok


def test_criterion_4_binary_analytic(report):
    t0 = time.perf_counter()
    n = 3
    src = iid_source([0.5, 0.5], n, 2)
    d = DistortionSpec(n, HAMMING)
    s0 = -math.log(9.0)
    pt = na_rdf_value(src, d, s0, baa_run(src, d, s0))
    target = LN2 - h2(0.1)
    sweep = rd_curve(src, d, np.linspace(-8.0, -0.05, 20))
    worst = max(abs(p.R_per_letter - (LN2 - h2(p.D_s))) for p in sweep)
    elapsed = time.perf_counter() - t0
    ok = (abs(pt.D_s - 0.1) <= 1e-6 and abs(pt.R_per_letter - target) <= 1e-5
          and worst <= 1e-5 and all(p.converged for p in sweep) and elapsed < 10)
    report("4 binary analytic", ok,
           f"D {pt.D_s:.9f}, R {pt.R_per_letter:.9f} (target {target:.9f}), sweep max err {worst:.2e}, "
           f"{elapsed:.1f}s")
    assert ok


ORACLE_CASES = {
    "bern0.5 n=0 step 0.005": (lambda: iid_source([0.5, 0.5], 0, 2), 0, 0.005),
    "bern0.7 n=0 step 0.01": (lambda: iid_source([0.3, 0.7], 0, 2), 0, 0.01),
    "bern0.7 n=1 step 0.01": (lambda: iid_source([0.3, 0.7], 1, 2), 1, 0.01),
    "symmetric markov n=1 step 0.01": (lambda: markov_source(*SYM_MARKOV, 1, 2), 1, 0.01),
    "asymmetric markov n=1 step 0.01": (lambda: markov_source(*ASYM_MARKOV, 1, 2), 1, 0.01),
}


@pytest.mark.parametrize("name", list(ORACLE_CASES))
def test_criterion_5_oracle(name, report):
    build, n, step = ORACLE_CASES[name]
    src, d = build(), DistortionSpec(n, HAMMING)
    t0 = time.perf_counter()
    gaps = []
    for s in (-4.0, -2.0, -1.0):
        tr = baa_run(src, d, s)
        assert tr.converged
        gaps.append(tr.objectives[-1] - grid_lagrangian_min(src, d, s, step).value_nats)
    elapsed = time.perf_counter() - t0
    worst = max(abs(g) for g in gaps)
    ok = worst <= 3 * step and elapsed < 60
    report(f"5 oracle [{name}]", ok,
           f"gaps {', '.join(f'{g:+.2e}' for g in gaps)}, bound {3 * step:.3f}, {elapsed:.1f}s")
    assert ok


BAA_CASES = {
    "iid bern0.7 n=1": (lambda: iid_source([0.3, 0.7], 1, 2), 1),
    "symmetric markov n=2": (lambda: markov_source(*SYM_MARKOV, 2, 2), 2),
    "asymmetric markov n=1": (lambda: markov_source(*ASYM_MARKOV, 1, 2), 1),
}


@pytest.mark.parametrize("name", list(BAA_CASES))
def test_criterion_6_baa_behavior(name, report):
    build, n = BAA_CASES[name]
    src, d, s = build(), DistortionSpec(n, HAMMING), -2.0
    worst_rise, worst_resid, results = -math.inf, 0.0, []
    for seed in range(10):
        cfg = BaaConfig(init=Init.SEEDED_RANDOM_POSITIVE, seed=seed)
        tr = baa_run(src, d, s, cfg)
        pt = na_rdf_value(src, d, s, tr)
        rise = float(np.max(np.diff(tr.objectives), initial=-math.inf))
        worst_rise = max(worst_rise, rise)
        worst_resid = max(worst_resid, tr.fixed_point_residual)
        results.append((pt.D_s, pt.R_per_letter, tr.converged))
    arr = np.array([(D, R) for D, R, _ in results])
    spread = float(np.max(arr.max(axis=0) - arr.min(axis=0)))
    all_conv = all(c for _, _, c in results)
    ok = worst_rise <= 1e-12 and worst_resid <= 1e-9 and spread <= 1e-7 and all_conv
    report(f"6 BAA behavior [{name}]", ok,
           f"max objective rise {worst_rise:.2e}, max residual {worst_resid:.2e}, (D,R) spread {spread:.2e}")
    assert ok


MEMORYLESS_CASES = {
    "bern0.7": ([0.3, 0.7], HAMMING, [-5.0, -4.0, -3.0, -2.0, -1.5, -1.0]),
    "ternary": ([0.5, 0.3, 0.2], [[0.0, 1.0, 2.0], [1.0, 0.0, 1.0], [2.0, 1.0, 0.0]], [-3.0, -1.5, -0.5]),
}


@pytest.mark.parametrize("name", list(MEMORYLESS_CASES))
def test_criterion_7_memoryless_reduction(name, report):
    pmf, rho, grid = MEMORYLESS_CASES[name]
    n = 5
    src, d = iid_source(pmf, n, len(pmf)), DistortionSpec(n, rho)
    pts = rd_curve(src, d, grid)
    worst = max(abs(p.R_per_letter - classical_blahut(pmf, rho, p.s).value_nats) for p in pts)
    ok = worst <= 1e-8 and all(p.converged for p in pts)
    report(f"7 memoryless reduction [{name} n=5]", ok, f"max |R - R_classical| {worst:.2e} over {len(pts)} slopes")
    assert ok


CURVE_CASES = {
    "bern0.5 n=3": (lambda: iid_source([0.5, 0.5], 3, 2), 3, HAMMING),
    "bern0.7 n=2": (lambda: iid_source([0.3, 0.7], 2, 2), 2, HAMMING),
    "symmetric markov n=4": (lambda: markov_source(*SYM_MARKOV, 4, 2), 4, HAMMING),
    "asymmetric markov n=3": (lambda: markov_source(*ASYM_MARKOV, 3, 2), 3, HAMMING),
    "ternary n=2": (lambda: iid_source([0.5, 0.3, 0.2], 2, 3), 2,
                    [[0.0, 1.0, 2.0], [1.0, 0.0, 1.0], [2.0, 1.0, 0.0]]),
}


@pytest.mark.parametrize("name", list(CURVE_CASES))
def test_criterion_8_curve_shape(name, report):
    build, n, rho = CURVE_CASES[name]
    pts = rd_curve(build(), DistortionSpec(n, rho), np.linspace(-6.0, 0.0, 16))
    viol = curve_shape_violations(pts)
    ok = all(v <= 1e-7 for v in viol.values())
    report(f"8 curve shape [{name}]", ok, ", ".join(f"{k} {v:.2e}" for k, v in viol.items()))
    assert ok
