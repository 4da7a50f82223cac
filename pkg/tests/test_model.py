"""Bases, composite regression matrices and the difference contrast."""

import math

import numpy as np
import pytest

from corrdesign.model import (
    F_A,
    F_B,
    F_C,
    CurveBasis,
    ModelError,
    Separate,
    Shared,
    basis_from_spec,
    build_general,
    build_separate,
    build_shared,
    difference_contrast,
    parse_term,
)

LIN = CurveBasis.from_names("lin", ["t"])
ONE = CurveBasis.from_names("one", ["1"])
SQ = CurveBasis.from_names("sq", ["t^2"])
CATALOG = [
    "1", "2.5", "t", "3t", "2*t", "t^2", "t**3", "-0.5t^2", "1/t", "1/t^2", "sqrt(t)", "log(t)",
    "sin(t)", "cos(t)", "sin(2t)", "cos(0.5*t)", "exp(t)", "exp(-0.3t)",
]


@pytest.mark.parametrize("text", CATALOG)
def test_catalog_derivatives_match_central_differences(text):
    term = parse_term(text)
    t = np.random.default_rng(0).uniform(1, 10, 100)
    h = 1e-5 * t
    fd = (term(t + h) - term(t - h)) / (2 * h)
    np.testing.assert_allclose(term.deriv(t), fd, rtol=1e-6, atol=1e-8)


@pytest.mark.parametrize("basis", [F_A, F_B, F_C])
def test_builtin_derivatives(basis):
    t = np.random.default_rng(1).uniform(1, 10, 100)
    h = 1e-6
    fd = (basis.eval(t + h) - basis.eval(t - h)) / (2 * h)
    np.testing.assert_allclose(basis.deriv(t), fd, rtol=1e-6, atol=1e-7)


def test_builtin_values():
    np.testing.assert_allclose(F_A.eval(math.pi), [math.pi, 0, -1], atol=1e-15)
    np.testing.assert_allclose(F_B.eval(0.0), [0, 1, 1], atol=1e-15)
    np.testing.assert_allclose(F_C.eval(1.0), [1, 0, 1], atol=1e-15)


def test_unknown_term_rejected():
    with pytest.raises(ModelError):
        parse_term("tan(t)")
    with pytest.raises(ModelError):
        basis_from_spec("f_Z")


def test_separate_linear():
    m = build_separate(LIN, LIN, (1, 10))
    assert m.p == 2
    np.testing.assert_array_equal(m.F(3.0), [[3, 0], [0, 3]])
    np.testing.assert_array_equal(m.Fdot(3.0), np.eye(2))


def test_separate_fa_fb_entries():
    m = build_separate(F_A, F_B, (1, 10))
    assert m.p == 6
    F = m.F(2.0)
    assert F[1, 0] == pytest.approx(math.sin(2))
    assert m.F(4.0)[4, 1] == pytest.approx(math.cos(4))
    np.testing.assert_array_equal(F[3:, 0], 0)
    np.testing.assert_array_equal(F[:3, 1], 0)


def test_empty_basis_and_bad_interval():
    empty = CurveBasis("empty", ())
    with pytest.raises(ModelError):
        build_separate(empty, LIN, (1, 10))
    with pytest.raises(ModelError):
        build_separate(LIN, LIN, (10, 1))
    with pytest.raises(ModelError):
        build_separate(LIN, LIN, (2, 2))


def test_undefined_basis_rejected():
    with pytest.raises(ModelError):
        build_separate(CurveBasis.from_names("r", ["1/t"]), LIN, (0, 1))
    with pytest.raises(ModelError):
        build_shared(CurveBasis.from_names("l", ["log(t)"]), LIN, SQ, (0, 2))


def test_shared_layout():
    m = build_shared(ONE, LIN, SQ, (1, 10))
    assert m.p == 3
    np.testing.assert_array_equal(m.F(2.0)[:, 0], [1, 2, 0])
    np.testing.assert_array_equal(m.F(2.0)[:, 1], [1, 0, 4])
    assert isinstance(m.structure, Shared)


def test_shared_trig_layout():
    m = build_shared(LIN, CurveBasis.from_names("s", ["sin(t)"]), CurveBasis.from_names("c", ["cos(t)"]), (1, 10))
    t = 2.7
    np.testing.assert_allclose(m.F(t).T, [[t, math.sin(t), 0], [t, 0, math.cos(t)]])


def test_shared_without_common_part_is_separate():
    empty = CurveBasis("none", ())
    shared = build_shared(empty, F_A, F_B, (1, 10))
    sep = build_separate(F_A, F_B, (1, 10))
    assert isinstance(shared.structure, Separate)
    t = np.linspace(1, 10, 17)
    np.testing.assert_array_equal(shared.F(t), sep.F(t))


def test_dependent_rows_rejected():
    with pytest.raises(ModelError, match="condition"):
        build_separate(CurveBasis.from_names("d", ["t", "2t"]), LIN, (1, 10))


def test_block_round_trip():
    m = build_shared(ONE, F_A, F_C, (1, 10))
    t = np.random.default_rng(2).uniform(1, 10, 20)
    F = m.F(t)
    for g, col in ((1, 0), (2, 1)):
        idx = m.group_indices(g)
        np.testing.assert_array_equal(F[:, idx, col], m.group_basis(g).eval(t).T)
    sep = build_separate(F_B, F_C, (1, 10))
    np.testing.assert_array_equal(sep.F(t)[:, :3, 0], F_B.eval(t).T)
    np.testing.assert_array_equal(sep.F(t)[:, 3:, 1], F_C.eval(t).T)


def test_general_has_no_groups():
    m = build_general(F_A, F_B, (1, 10))
    with pytest.raises(ModelError):
        m.group_basis(1)


def test_contrast_examples():
    np.testing.assert_array_equal(difference_contrast(build_separate(LIN, LIN, (1, 10)), 3.0), [3, -3])
    np.testing.assert_array_equal(difference_contrast(build_shared(ONE, LIN, SQ, (1, 10)), 2.0), [0, 2, -4])
    c = difference_contrast(build_separate(F_A, F_C, (1, 10)), 1.0)
    np.testing.assert_allclose(c, [1, math.sin(1), math.cos(1), -1, 0, -1], atol=1e-15)


def test_contrast_matches_column_difference():
    m = build_separate(F_A, F_B, (1, 10))
    rng = np.random.default_rng(3)
    for _ in range(100):
        t, theta = rng.uniform(1, 10), rng.normal(size=6)
        F = m.F(t)
        assert difference_contrast(m, t) @ theta == pytest.approx(F[:, 0] @ theta - F[:, 1] @ theta)


def test_contrast_outside_interval():
    with pytest.raises(ModelError):
        difference_contrast(build_separate(LIN, LIN, (1, 10)), 11.0)
