"""Acceptance criteria, one test per criterion.

Each test prints a single ``[ACn] PASS|FAIL`` line with the measured
quantity, then asserts.  Run with ``pytest tests/test_acceptance.py -v``;
the lines are printed even when output capture is on.
"""

import time
from functools import lru_cache

import numpy as np
import pytest
from scipy.linalg import cho_factor, cho_solve

from corrdesign.blue import blue_cov, blue_estimate_path, info_matrix, loewner_gap
from corrdesign.design import CriterionConfig, DesignProblem, PsoConfig, optimize_design, uniform_design
from corrdesign.discrete import (
    estimate,
    estimator_cov,
    mse_vs_blue,
    optimal_weights,
    random_unbiased_weights,
    unbiasedness_residual,
)
from corrdesign.kernel import GroupCovariance, TriangularKernel, to_brownian
from corrdesign.model import F_A, F_B, F_C, CurveBasis, ModelError, Separate, build_separate, build_shared
from corrdesign.scenarios import PAIRS, REFERENCE, RHOS, all_scenarios, scenario
from corrdesign.simulate import average_bands, sample_paths, simultaneous_coverage

SEED = 20200101
THETA = np.ones(6)
TERMS = ["1", "t", "t^2", "sqrt(t)", "log(t)", "1/t", "sin(t)", "cos(t)", "sin(2t)", "cos(2t)", "exp(0.2t)"]


def report(capsys, number, ok, detail):
    with capsys.disabled():
        print(f"\n[AC{number}] {'PASS' if ok else 'FAIL'} {detail}")


def rel(a, b):
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


@lru_cache(maxsize=None)
def optimized(pair, rho):
    m, gc = scenario(pair, rho)
    return optimize_design(m, gc, 4, CriterionConfig(), PsoConfig())


def test_ac1_uniform_column(capsys):
    start = time.perf_counter()
    devs = {}
    for pair, rho in all_scenarios():
        m, gc = scenario(pair, rho)
        value = DesignProblem(m, gc).criterion(uniform_design(1, 10, 4))
        devs[(pair, rho)] = value / REFERENCE[(pair, rho)][2] - 1
    elapsed = time.perf_counter() - start
    worst = max(abs(d) for d in devs.values())
    ok = worst <= 0.01 and elapsed < 10
    report(capsys, 1, ok, f"uniform Phi_inf max rel dev {worst:.4%} (tol 1%), {elapsed:.1f}s (< 10s)")
    assert ok


def test_ac2_optimal_column(capsys):
    start = time.perf_counter()
    ratios, moved = {}, []
    for pair, rho in all_scenarios():
        res = optimized(pair, rho)
        ref_design, ref_phi, _ = REFERENCE[(pair, rho)]
        ratios[(pair, rho)] = res.value / ref_phi
        if np.max(np.abs(res.design.array - np.array(ref_design))) > 0.15:
            moved.append(f"{pair[0]}/{pair[1]} rho={rho}: {np.round(res.design.points, 3).tolist()}")
    elapsed = time.perf_counter() - start
    worst = max(ratios.values())
    ok = worst <= 1.05 and elapsed < 300
    info = f"; designs away from reference (informational): {moved}" if moved else ""
    report(capsys, 2, ok, f"optimal Phi_inf max ratio {worst:.4f} (<= 1.05), {elapsed:.1f}s (< 300s){info}")
    assert ok


def _random_basis(rng, name, exclude=()):
    k = int(rng.integers(1, 4))
    pool = [t for t in TERMS if t not in exclude]
    return CurveBasis.from_names(name, list(rng.choice(pool, size=k, replace=False)))


def test_ac3_loewner_property_suite(capsys):
    start = time.perf_counter()
    rng = np.random.default_rng(SEED)
    worst_min, worst_eq, done = np.inf, 0.0, 0
    while done < 100:
        shared = done % 3 == 2
        same = done % 7 == 3 and not shared
        # the common term stays out of the group bases so each group model is identifiable
        common = str(rng.choice(["1", "t"])) if shared else None
        f1 = _random_basis(rng, "g1", (common,))
        f2 = f1 if same else _random_basis(rng, "g2", (common,))
        rho = 0.0 if done % 10 == 5 else float(rng.uniform(-0.95, 0.95))
        gc = GroupCovariance(float(rng.uniform(0.5, 2)), float(rng.uniform(0.5, 2)), rho)
        try:
            if shared:
                m = build_shared(CurveBasis.from_names("g0", [common]), f1, f2, (1, 10))
            else:
                m = build_separate(f1, f2, (1, 10))
            cov = blue_cov(m, gc)
        except (ModelError, ArithmeticError):
            continue  # dependent draw; resample
        for g in (1, 2):
            gap = loewner_gap(m, gc, g, cov)
            scale = max(1.0, np.abs(gap).max())
            worst_min = min(worst_min, np.linalg.eigvalsh(gap).min() / scale)
            if isinstance(m.structure, Separate) and (rho == 0 or same):
                worst_eq = max(worst_eq, float(np.linalg.norm(gap)))
        done += 1
    elapsed = time.perf_counter() - start
    ok = worst_min >= -1e-8 and worst_eq < 1e-8 and elapsed < 60
    report(capsys, 3, ok, f"100 scenarios: min eig {worst_min:.2e} (>= -1e-8), "
                          f"equality-case gap {worst_eq:.2e} (< 1e-8), {elapsed:.1f}s")
    assert ok


def test_ac4_weight_optimality(capsys):
    start = time.perf_counter()
    rng = np.random.default_rng(SEED)
    worst = np.inf
    # eight points: with four, the unbiasedness constraint has a unique solution
    design = np.linspace(1, 10, 8)
    for pair in PAIRS:
        m, gc = scenario(pair, 0.5)
        info = info_matrix(m, gc)
        best = mse_vs_blue(m, gc, design, optimal_weights(m, gc, design, info), THETA, info)
        for _ in range(50):
            w = random_unbiased_weights(m, gc, design, rng, info=info)
            assert unbiasedness_residual(m, gc, design, w, info) < 1e-9
            diff = mse_vs_blue(m, gc, design, w, THETA, info) - best
            worst = min(worst, np.linalg.eigvalsh(diff).min())
    elapsed = time.perf_counter() - start
    ok = worst >= -1e-8 and elapsed < 60
    report(capsys, 4, ok, f"150 competitors: min eig of MSE difference {worst:.2e} (>= -1e-8), {elapsed:.1f}s")
    assert ok


def test_ac5_unbiasedness(capsys):
    worst = 0.0
    designs = {v[0] for v in REFERENCE.values()}
    for pair, rho in all_scenarios():
        m, gc = scenario(pair, rho)
        info = info_matrix(m, gc)
        for design in designs:
            w = optimal_weights(m, gc, design, info)
            worst = max(worst, unbiasedness_residual(m, gc, design, w, info))
    ok = worst < 1e-9
    report(capsys, 5, ok, f"max unbiasedness residual {worst:.2e} over 9 scenarios x {len(designs)} designs (< 1e-9)")
    assert ok


def test_ac6_monte_carlo_consistency(capsys):
    start = time.perf_counter()
    pair, rho = ("f_A", "f_C"), 0.5
    m, gc = scenario(pair, rho)
    design = REFERENCE[(pair, rho)][0]
    info = info_matrix(m, gc)
    y = sample_paths(m, gc, THETA, design, 10_000, SEED)
    est = estimate(m, gc, design, optimal_weights(m, gc, design, info), y, info)
    z = np.abs(est.mean(axis=0) - THETA) / (est.std(axis=0, ddof=1) / np.sqrt(len(est)))
    dev = rel(np.cov(est, rowvar=False), estimator_cov(m, gc, design, info))
    elapsed = time.perf_counter() - start
    ok = z.max() <= 3 and dev <= 0.05 and elapsed < 60
    report(capsys, 6, ok, f"max |mean - theta|/SE {z.max():.2f} (<= 3), cov rel Frobenius {dev:.2%} (<= 5%), "
                          f"{elapsed:.1f}s")
    assert ok


def test_ac7_continuous_limit(capsys):
    design = np.linspace(1, 10, 1000)
    devs = []
    for pair in PAIRS:
        m, gc = scenario(pair, 0.5)
        devs.append(rel(estimator_cov(m, gc, design), blue_cov(m, gc).cov))
    m, gc = scenario(("f_A", "f_C"), 0.5)
    info = info_matrix(m, gc)
    grid = np.linspace(1, 10, 10_000)
    chunk, reps = 500, 10_000
    est = np.concatenate([
        blue_estimate_path(m, gc, grid, sample_paths(m, gc, THETA, grid, chunk, SEED, block=chunk, start_block=k),
                           info)
        for k in range(reps // chunk)
    ])
    path_dev = rel(np.cov(est, rowvar=False), blue_cov(m, gc, info).cov)
    ok = max(devs) <= 0.005 and path_dev <= 0.02
    report(capsys, 7, ok, f"1000-point design vs BLUE max rel {max(devs):.2e} (<= 0.5%); "
                          f"path estimator MC cov rel {path_dev:.2%} (<= 2%)")
    assert ok


def test_ac8_kronecker_structure(capsys):
    worst = 0.0
    m = build_separate(F_A, F_A, (1, 10))
    M11 = info_matrix(m, GroupCovariance(1, 1, 0)).M[:3, :3]
    for rho in (0.2, 0.7):
        gc = GroupCovariance(1, 1, rho)
        worst = max(worst, rel(blue_cov(m, gc).cov, np.kron(gc.matrix, np.linalg.inv(M11))))
    ok = worst <= 1e-8
    report(capsys, 8, ok, f"f1 = f2 = f_A: max rel deviation from Sigma (x) M11^-1 {worst:.2e} (<= 1e-8)")
    assert ok


def test_ac9_bands(capsys):
    start = time.perf_counter()
    grid = np.linspace(1, 10, 500)
    pair, rho = ("f_A", "f_B"), 0.5
    m, gc = scenario(pair, rho)
    coverage, D = simultaneous_coverage(m, gc, THETA, REFERENCE[(pair, rho)][0], 0.05, grid, 2000, SEED)
    narrower = []
    for pair, rho in all_scenarios():
        m, gc = scenario(pair, rho)
        opt = average_bands(m, gc, THETA, optimized(pair, rho).design, 0.05, grid, 100, SEED)
        uni = average_bands(m, gc, THETA, uniform_design(1, 10, 4), 0.05, grid, 100, SEED)
        narrower.append(opt.width.max() < uni.width.max())
    elapsed = time.perf_counter() - start
    ok = 0.93 <= coverage <= 0.97 and all(narrower) and elapsed < 300
    report(capsys, 9, ok, f"coverage {coverage:.3f} in [0.93, 0.97] (D = {D:.3f}); optimal narrower than uniform "
                          f"in {sum(narrower)}/9 scenarios; {elapsed:.1f}s")
    assert ok


def test_ac10_ou_kernel(capsys):
    m, gc = scenario(("f_A", "f_B"), 0.5)
    kernel = TriangularKernel.ornstein_uhlenbeck()
    transformed, _ = to_brownian(m, kernel)
    cov = blue_cov(transformed, gc).cov
    # generalised least squares on 5000 points with covariance Sigma (x) K
    t = np.linspace(1, 10, 5000)
    fac = cho_factor(kernel.K(t[:, None], t[None, :]))
    X = [m.F(t)[:, :, j] for j in range(2)]
    KinvX = [cho_solve(fac, x) for x in X]
    Si = gc.inverse
    oracle = np.linalg.inv(sum(Si[j, k] * X[j].T @ KinvX[k] for j in range(2) for k in range(2)))
    dev = rel(cov, oracle)
    ok = dev <= 0.02
    report(capsys, 10, ok, f"OU kernel via Brownian transform vs 5000-point GLS: rel {dev:.2e} (<= 2%)")
    assert ok
