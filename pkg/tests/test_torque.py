import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nhllg.torque import (
    SotParams,
    SttParams,
    TorqueModel,
    check_orthogonality,
    evaluate_F,
    growth_constant,
    make_sot,
    make_stt,
    make_zero,
    sot_parallel,
    sot_perpendicular,
)

STT = make_stt(SttParams(1.0, 1.0, (1.0, 0.0)))
SOT = make_sot(SotParams())


def test_zero_model():
    rng = np.random.default_rng(0)
    z = make_zero()
    assert z.is_zero
    np.testing.assert_array_equal(z.evaluate(rng.standard_normal(3), rng.standard_normal((3, 2))), 0.0)


def test_stt_example():
    B = np.array([[1.0, 0.3], [0.0, -2.0], [0.0, 5.0]])  # first column is B @ j
    np.testing.assert_allclose(STT.evaluate([0.0, 0.0, 1.0], B), [-1.0, 1.0, 0.0], atol=1e-15)


def test_sot_examples():
    B = np.zeros((3, 2))
    np.testing.assert_allclose(SOT.evaluate([0.0, 0.0, 1.0], B), [1.0, 1.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(SOT.evaluate([0.0, 1.0, 0.0], B), 0.0, atol=1e-15)


def test_sot_pieces_at_out_of_plane_state():
    c = (1.0,) * 8
    a = np.array([0.0, 0.0, 1.0])
    np.testing.assert_allclose(sot_parallel(a, c), [1.0, 0.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(sot_perpendicular(a, c), [0.0, 1.0, 0.0], atol=1e-15)


def test_sot_hand_value_generic_state():
    # a = (1, 0, 0): k x a = (0, 1, 0), s = 1, j x a = (0, 0, -1), a x (k x a) = (0, 0, 1), a.i = 1
    c = (1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0)
    a = np.array([1.0, 0.0, 0.0])
    par = (1 + 2 + 3) * np.array([0, 0, -1.0]) + (4 + 5) * np.array([0, 0, 1.0])
    perp = 6 * np.cross(a, [0, 0, -1.0]) + (7 + 8) * np.array([0, 1.0, 0])
    np.testing.assert_allclose(sot_parallel(a, c), par, atol=1e-14)
    np.testing.assert_allclose(sot_perpendicular(a, c), perp, atol=1e-14)


def test_evaluate_F_examples():
    a = np.array([0.0, 0.0, 1.0])
    B = np.array([[1.0, 0.0], [0.0, 0.0], [0.0, 0.0]])
    np.testing.assert_allclose(evaluate_F(STT, a, B, 1.0, 1.0), [0.0, 1.0, 0.0], atol=1e-15)
    np.testing.assert_array_equal(evaluate_F(make_zero(), a, B, 1.0, 1.0), 0.0)


@given(seed=st.integers(0, 2**32 - 1), beta=st.floats(0.01, 10))
def test_F_orthogonal_when_f_is(seed, beta):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((20, 3))
    a /= np.linalg.norm(a, axis=1, keepdims=True)
    B = rng.standard_normal((20, 3, 2))
    for model in (STT, SOT):
        F = evaluate_F(model, a, B, 1.0, beta)
        assert np.max(np.abs(np.einsum("ni,ni->n", F, a))) <= 1e-12 * (1 + np.abs(F).max())


@pytest.mark.parametrize("model", [make_zero(), STT, SOT, make_stt(SttParams(0.3, -2.0, (0.6, 0.8)))])
def test_orthogonality_many_samples(model):
    assert check_orthogonality(model, samples=10_000, seed=7) <= 1e-12


def test_orthogonality_detects_violation():
    bad = TorqueModel("adversarial", 2, f1=lambda a: a)
    assert check_orthogonality(bad, samples=1000) == pytest.approx(1.0, abs=1e-12)


def test_orthogonality_deterministic_and_validates():
    assert check_orthogonality(SOT, 100, seed=3) == check_orthogonality(SOT, 100, seed=3)
    with pytest.raises(ValueError):
        check_orthogonality(SOT, 0)


@given(seed=st.integers(0, 2**32 - 1))
def test_g_maps_linear(seed):
    rng = np.random.default_rng(seed)
    B1, B2 = rng.standard_normal((2, 3, 2))
    s, t = rng.standard_normal(2)
    for which in (1, 2):
        lhs = STT.apply_g(which, s * B1 + t * B2)
        rhs = s * STT.apply_g(which, B1) + t * STT.apply_g(which, B2)
        assert np.max(np.abs(lhs - rhs)) <= 1e-12 * (1 + np.abs(lhs).max())


def test_component_maps_fix_zero():
    z = np.zeros(3)
    for model in (STT, SOT):
        for f in (model.f1, model.f2, model.f3, model.f4):
            if f is not None:
                assert np.abs(f(z)).max() <= 1e-14


@given(seed=st.integers(0, 2**32 - 1), s=st.floats(-100, 100))
def test_stt_homogeneous_in_gradient(seed, s):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal(3)
    B = rng.standard_normal((3, 2))
    np.testing.assert_allclose(STT.evaluate(a, s * B), s * STT.evaluate(a, B), rtol=1e-12, atol=1e-12)


def test_stt_vectorised_matches_loop():
    rng = np.random.default_rng(5)
    a = rng.standard_normal((7, 3))
    B = rng.standard_normal((7, 3, 2))
    batch = STT.evaluate(a, B)
    for i in range(7):
        Bj = B[i] @ np.array([1.0, 0.0])
        expected = np.cross(a[i], Bj) + np.cross(a[i], np.cross(a[i], Bj))
        np.testing.assert_allclose(batch[i], expected, atol=1e-13)


@pytest.mark.parametrize("j", [(1.0, 1.0), (0.0, 0.0), (2.0,)])
def test_stt_rejects_non_unit_j(j):
    with pytest.raises(ValueError):
        SttParams(1.0, 1.0, j)


def test_sot_rejects_bad_coefficients():
    with pytest.raises(ValueError):
        SotParams((1.0,) * 7)
    with pytest.raises(ValueError):
        SotParams((1.0,) * 7 + (np.nan,))


def test_g_shape_checked():
    with pytest.raises(ValueError):
        TorqueModel("bad", 2, g1=np.zeros((3, 3)))
    with pytest.raises(ValueError):
        STT.apply_g(1, np.zeros((3, 3)))


def test_sot_growth_bounds():
    c = (1.0,) * 8
    fit = np.linspace(0.0, 10.0, 41)
    C_perp = growth_constant(lambda a: sot_perpendicular(a, c), 4, fit)
    C_par = growth_constant(lambda a: sot_parallel(a, c), 5, fit)
    assert np.isfinite(C_perp) and np.isfinite(C_par)
    # bounds fitted on [0, 10] keep holding further out and on fresh directions
    far = np.linspace(10.0, 1000.0, 50)
    assert growth_constant(lambda a: sot_perpendicular(a, c), 4, far, seed=1) <= C_perp * 1.01
    assert growth_constant(lambda a: sot_parallel(a, c), 5, far, seed=1) <= C_par * 1.01
