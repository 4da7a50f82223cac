"""Band-variance function, the Phi_p criterion and swarm optimisation."""

import itertools
import math

import numpy as np
import pytest

from corrdesign.blue import blue_cov, info_matrix
from corrdesign.design import (
    CriterionConfig,
    DesignProblem,
    PsoConfig,
    golden_section_max,
    h_function,
    optimize_design,
    phi_p,
    pso_minimize,
    uniform_design,
)
from corrdesign.discrete import estimator_cov
from corrdesign.kernel import GroupCovariance, TriangularKernel, to_brownian
from corrdesign.model import F_A, F_B, F_C, CurveBasis, ModelError, build_separate, difference_contrast
from corrdesign.scenarios import scenario

LIN = CurveBasis.from_names("lin", ["t"])
I2 = GroupCovariance(1, 1, 0)
QUICK = PsoConfig(swarm=20, iters=60, restarts=2, seed=7)


def test_uniform_design():
    np.testing.assert_allclose(uniform_design(1, 10, 4).points, [1, 4, 7, 10])
    np.testing.assert_allclose(uniform_design(1, 10, 2).points, [1, 10])
    np.testing.assert_allclose(uniform_design(0, 1, 5).points, [0, 0.25, 0.5, 0.75, 1])
    with pytest.raises(ModelError):
        uniform_design(0, 1, 1)


def test_config_validation():
    with pytest.raises(ModelError):
        CriterionConfig(p_norm=0.5)
    with pytest.raises(ModelError):
        CriterionConfig(grid_size=100)
    with pytest.raises(ModelError):
        PsoConfig(swarm=1)
    with pytest.raises(ModelError):
        PsoConfig(iters=0)


def test_h_linear_closed_form():
    m = build_separate(LIN, LIN, (1, 10))
    assert h_function(m, I2, (1, 10), 5.0) == pytest.approx(5.0, rel=1e-13)
    with pytest.raises(ModelError):
        h_function(m, I2, (1, 10), 0.5)


def test_h_dominates_continuous_variance():
    m = build_separate(F_A, F_C, (1, 10))
    gc = GroupCovariance(1, 1, 0.5)
    t = np.linspace(1, 10, 300)
    c = difference_contrast(m, t)
    floor = np.einsum("gp,pq,gq->g", c, blue_cov(m, gc).cov, c)
    assert np.all(h_function(m, gc, (1, 2.86, 8.83, 10), t) >= floor - 1e-10)


def test_h_matches_dense_oracle():
    m, gc = scenario(("f_A", "f_B"), 0.5)
    t = np.linspace(1, 10, 50)
    # oracle: weights applied by hand, covariance of the linear form
    design = np.array([1.0, 4.0, 7.0, 10.0])
    info = info_matrix(m, gc)
    Si = gc.inverse
    F = m.F(design)
    dF = np.diff(F, axis=0)
    dt = np.diff(design)
    B = sum(d @ Si @ d.T / s for d, s in zip(dF, dt))
    phis = [info.M0 @ np.linalg.solve(B, d) / s for d, s in zip(dF, dt)]
    inner = sum(ph @ Si @ ph.T * s for ph, s in zip(phis, dt)) + F[0] @ Si @ F[0].T / design[0]
    Minv = np.linalg.inv(info.M)
    cov = Minv @ inner @ Minv
    c = difference_contrast(m, t)
    oracle = np.einsum("gp,pq,gq->g", c, cov, c)
    np.testing.assert_allclose(h_function(m, gc, design, t), oracle, rtol=1e-10)
    problem = DesignProblem(m, gc)
    np.testing.assert_allclose(problem.h(design, t), oracle, rtol=1e-10)


def test_phi_one_linear():
    m = build_separate(LIN, LIN, (1, 10))
    val = phi_p(m, I2, (1, 10), CriterionConfig(p_norm=1))
    assert val == pytest.approx(0.2 * (1000 - 1) / 3, rel=1e-12)
    val2 = phi_p(m, I2, (1, 10), CriterionConfig(p_norm=2))
    assert val2 == pytest.approx(math.sqrt(0.04 * (10 ** 5 - 1) / 5), rel=1e-12)


@pytest.mark.parametrize("pair,rho,expected", [
    (("f_A", "f_B"), 0.2, 141.87),
    (("f_B", "f_C"), 0.7, 115.07),
])
def test_uniform_design_values(pair, rho, expected):
    m, gc = scenario(pair, rho)
    assert phi_p(m, gc, (1, 4, 7, 10)) == pytest.approx(expected, rel=0.01)


def test_sup_refinement_and_grid_stability():
    m, gc = scenario(("f_A", "f_C"), 0.5)
    design = (1, 2.5, 5.5, 10)
    coarse = phi_p(m, gc, design, CriterionConfig(refine=False))
    refined = phi_p(m, gc, design)
    fine = phi_p(m, gc, design, CriterionConfig(grid_size=4000))
    assert refined >= coarse
    assert abs(fine - refined) / refined < 1e-3
    dense = h_function(m, gc, design, np.linspace(1, 10, 200_001)).max()
    assert refined == pytest.approx(dense, rel=1e-8)


def test_golden_section():
    x, f = golden_section_max(lambda t: -(t - 0.3) ** 2, 0.0, 1.0)
    assert x == pytest.approx(0.3, abs=1e-7)
    assert f == pytest.approx(0.0, abs=1e-14)


def test_particle_order_and_coincidence():
    m, gc = scenario(("f_A", "f_B"), 0.5)
    problem = DesignProblem(m, gc)
    x = np.array([[6.0, 2.0], [2.0, 6.0], [3.0, 3.0 + 1e-9]])
    vals = problem.particle_criteria(x)
    assert vals[0] == vals[1]
    assert vals[2] == np.inf


def test_ou_kernel_criterion():
    m, gc = scenario(("f_A", "f_B"), 0.5)
    k = TriangularKernel.ornstein_uhlenbeck(0.2)
    design = np.array([1.0, 3.0, 6.0, 10.0])
    new, tmap = to_brownian(m, k)
    cov = estimator_cov(new, gc, tmap.forward(design))
    t = np.linspace(1, 10, 2000)
    c = difference_contrast(m, t)
    oracle = np.einsum("gp,pq,gq->g", c, cov, c).max()
    val = phi_p(m, gc, design, CriterionConfig(refine=False), kernel=k)
    assert val == pytest.approx(oracle, rel=1e-9)


def test_pso_on_quadratic():
    cfg = PsoConfig(swarm=20, iters=100, seed=1)
    x, val, hist = pso_minimize(lambda z: np.sum((z - 0.7) ** 2, axis=1), 0.0, 1.0, 3, cfg, np.random.default_rng(1))
    np.testing.assert_allclose(x, 0.7, atol=1e-4)
    assert np.all(np.diff(hist) <= 0)


def test_optimize_two_points_is_immediate():
    m, gc = scenario(("f_A", "f_B"), 0.5)
    res = optimize_design(m, gc, 2)
    np.testing.assert_array_equal(res.design.points, (1, 10))


def test_optimize_deterministic_and_monotone():
    m, gc = scenario(("f_A", "f_C"), 0.2)
    first = optimize_design(m, gc, 4, pso=QUICK)
    second = optimize_design(m, gc, 4, pso=QUICK)
    assert first.design.points == second.design.points
    assert first.value == second.value
    for hist in first.history:
        assert np.all(np.diff(hist) <= 0)
    design, value = first
    assert value <= phi_p(m, gc, (1, 4, 7, 10))


def test_optimize_reference_scenario():
    m, gc = scenario(("f_A", "f_B"), 0.2)
    res = optimize_design(m, gc, 4)
    assert res.value <= 14.79 * 1.05
    np.testing.assert_allclose(res.design.points, (1, 1.59, 3.93, 10), atol=0.15)


def test_optimize_reaches_table_value_fa_fc():
    m, gc = scenario(("f_A", "f_C"), 0.7)
    assert optimize_design(m, gc, 4).value <= 6.60 * 1.05


def test_optimize_beats_exhaustive_grid():
    m, gc = scenario(("f_B", "f_C"), 0.5)
    info = info_matrix(m, gc)
    t = np.linspace(1, 10, 2000)
    c = difference_contrast(m, t)
    inner = np.arange(1.25, 10.0, 0.25)
    best = np.inf
    for t2, t3 in itertools.combinations(inner, 2):
        cov = estimator_cov(m, gc, (1.0, t2, t3, 10.0), info)
        best = min(best, float(np.einsum("gp,pq,gq->g", c, cov, c).max()))
    res = optimize_design(m, gc, 4, CriterionConfig(refine=False))
    assert res.value <= best + 1e-6
