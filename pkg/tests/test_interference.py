import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from spatial_hom.errors import DomainError, ShapeError, SizeError, UnsupportedModelError
from spatial_hom.interference import (
    InterferenceModel,
    ModeUnitary,
    bs5050,
    build_lambda,
    g2_permanent,
    identity_unitary,
    p_joint_analytic,
    p_joint_delta,
    permanent,
    permanent_naive,
    rcc,
)
from spatial_hom.modes import PhotonPairConfig, eval_chi

W0 = 0.666


def model(Q=0.0, d=0.0, V=1.0, q_ref=0.0, unitary=None):
    return InterferenceModel(PhotonPairConfig(Q=Q, d=d, w0=W0, q_ref=q_ref),
                             unitary or bs5050(), V)


def test_bs5050_entries():
    u = bs5050().entries
    np.testing.assert_allclose(u.conj().T @ u, np.eye(2), atol=1e-15)
    np.testing.assert_allclose(np.abs(u) ** 2, 0.5, atol=1e-15)
    for e in np.eye(2):
        np.testing.assert_allclose(u @ (u @ e), e, atol=1e-15)


def test_non_unitary_rejected():
    with pytest.raises(DomainError):
        ModeUnitary(np.array([[1, 1], [0, 1]]))


def test_lambda_identity_routing():
    m = model(unitary=identity_unitary())
    lam = build_lambda(m, 0.0, 0.0)
    m1, m2 = m.pair.modes()
    assert lam[0, 0] == eval_chi(m1, 0.0)
    assert lam[1, 1] == eval_chi(m2, 0.0)
    assert lam[0, 1] == 0 and lam[1, 0] == 0


def test_lambda_symmetric_configuration():
    lam = build_lambda(model(), 0.3, 0.3)
    np.testing.assert_allclose(np.abs(lam), abs(lam[0, 0]), rtol=1e-15)


def test_lambda_displaced_modes():
    lam = build_lambda(model(d=0.3), 0.3, -0.3)
    # chi_1 is centered at +d, chi_2 at -d; at y3 = 0.3 the ratio is exp(4 d y3 / w0^2).
    ratio = abs(lam[0, 0]) / abs(lam[1, 0])
    assert ratio == pytest.approx(math.exp(4 * 0.3 * 0.3 / W0**2), rel=1e-13)
    assert ratio != pytest.approx(1.0)


def test_lambda_rejects_non_finite():
    with pytest.raises(DomainError):
        build_lambda(model(), math.inf, 0.0)


def test_permanent_small_cases():
    assert permanent([[1, 2], [3, 4]]) == 10
    assert permanent([[4.2]]) == pytest.approx(4.2)
    for n in range(1, 8):
        assert permanent(np.eye(n)) == pytest.approx(1.0)


@pytest.mark.parametrize("n", [3, 4, 5, 6])
def test_permanent_matches_naive_expansion(n):
    rng = np.random.default_rng(n)
    m = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    ref = permanent_naive(m)
    assert abs(permanent(m) - ref) <= 1e-12 * abs(ref)


def test_permanent_of_all_ones_is_factorial():
    assert permanent(np.ones((7, 7))) == pytest.approx(math.factorial(7), rel=1e-12)


def test_permanent_batched():
    rng = np.random.default_rng(0)
    stack = rng.normal(size=(5, 4, 4))
    out = permanent(stack)
    for k in range(5):
        assert out[k] == pytest.approx(permanent_naive(stack[k]), rel=1e-12)


def test_permanent_errors():
    with pytest.raises(ShapeError):
        permanent(np.ones((2, 3)))
    with pytest.raises(SizeError):
        permanent(np.ones((21, 21)))


def test_g2_vanishes_for_identical_photons():
    y = np.linspace(-1.25, 1.25, 51)
    y3, y4 = np.meshgrid(y, y, indexing="ij")
    assert np.max(g2_permanent(model(), y3, y4)) < 1e-30


def test_g2_identity_unitary_has_no_interference():
    m = model(Q=5.0, d=0.2, unitary=identity_unitary())
    m1, m2 = m.pair.modes()
    for y3, y4 in [(0.1, -0.3), (0.5, 0.5), (-1.0, 0.2)]:
        expected = abs(eval_chi(m1, y3)) ** 2 * abs(eval_chi(m2, y4)) ** 2
        assert g2_permanent(m, y3, y4) == pytest.approx(expected, rel=1e-13)


def test_g2_matches_closed_form_q15():
    y = np.linspace(-1.25, 1.25, 51)
    y3, y4 = np.meshgrid(y, y, indexing="ij")
    m = model(Q=15.0)
    assert np.max(np.abs(g2_permanent(m, y3, y4) - p_joint_analytic(m, y3, y4))) <= 1e-10


@pytest.mark.parametrize("Q", [0.0, 2.09, 5.0, 15.0, 17.28])
@pytest.mark.parametrize("d", [0.0, 0.2, 0.4])
def test_permanent_analytic_equivalence(Q, d):
    y = np.linspace(-1.25, 1.25, 51)
    y3, y4 = np.meshgrid(y, y, indexing="ij")
    m = model(Q=Q, d=d)
    assert np.max(np.abs(g2_permanent(m, y3, y4) - p_joint_analytic(m, y3, y4))) <= 1e-10


@settings(max_examples=40, deadline=None)
@given(Q=st.floats(-20, 20), d=st.floats(-0.5, 0.5), q1=st.floats(-10, 10),
       q2=st.floats(-10, 10), y3=st.floats(-1.5, 1.5), y4=st.floats(-1.5, 1.5))
def test_carrier_momentum_cancels(Q, d, q1, q2, y3, y4):
    a = g2_permanent(model(Q=Q, d=d, q_ref=q1), y3, y4)
    b = g2_permanent(model(Q=Q, d=d, q_ref=q2), y3, y4)
    assert a == pytest.approx(b, abs=1e-10)


def test_p_joint_on_diagonal_vanishes():
    for d in (0.0, 0.2, 0.4):
        y = np.linspace(-1, 1, 21)
        np.testing.assert_array_equal(p_joint_analytic(model(Q=7.0, d=d), y, y), 0.0)


def test_p_joint_known_value():
    # Frozen from an independent 30-digit mpmath evaluation of the closed form.
    assert p_joint_analytic(model(Q=15.0), -0.1, 0.1) == pytest.approx(
        1.30493330064342261114489214885, rel=1e-13)


def test_p_joint_requires_balanced_splitter():
    with pytest.raises(UnsupportedModelError):
        p_joint_analytic(model(unitary=identity_unitary()), 0.0, 0.1)
    with pytest.raises(UnsupportedModelError):
        p_joint_delta(model(unitary=identity_unitary()), 0.1)


def test_p_joint_delta_known_value():
    # Frozen from an independent 30-digit mpmath evaluation of the closed form.
    assert p_joint_delta(model(Q=15.0), 0.2) == pytest.approx(
        0.770207039948793207561981909172, rel=1e-13)


def test_p_joint_delta_trivial_zeros():
    assert p_joint_delta(model(Q=9.0, d=0.3), 0.0) == 0.0
    np.testing.assert_array_equal(p_joint_delta(model(), np.linspace(-2, 2, 41)), 0.0)


@settings(max_examples=50, deadline=None)
@given(Q=st.floats(-20, 20), d=st.floats(-0.5, 0.5), V=st.floats(0, 1),
       y3=st.floats(-2, 2), y4=st.floats(-2, 2))
def test_probabilities_non_negative(Q, d, V, y3, y4):
    m = model(Q=Q, d=d, V=V)
    assert p_joint_analytic(m, y3, y4) >= 0
    assert p_joint_delta(m, y4 - y3) >= 0
    assert 0 <= rcc(m.pair, V) <= 0.5 * (1 + V)


@settings(max_examples=50, deadline=None)
@given(Q=st.floats(-20, 20), V=st.floats(0, 1), y3=st.floats(-2, 2), y4=st.floats(-2, 2))
def test_symmetry_at_zero_displacement(Q, V, y3, y4):
    m = model(Q=Q, V=V)
    assert p_joint_analytic(m, y3, y4) == pytest.approx(p_joint_analytic(m, y4, y3), abs=1e-15)
    assert p_joint_delta(m, y3) == pytest.approx(p_joint_delta(m, -y3), abs=1e-15)


@pytest.mark.parametrize("Q,d", [(0.0, 0.2), (5.0, 0.0), (15.0, 0.4), (17.28, 0.2)])
def test_marginal_over_common_position(Q, d):
    m = model(Q=Q, d=d)
    for delta in np.linspace(-2.0, 2.0, 9):
        if delta == 0:
            continue
        val, _ = integrate.quad(lambda y0: p_joint_analytic(m, y0, y0 + delta), -8, 8,
                                epsabs=1e-14, epsrel=1e-12, limit=200)
        assert val == pytest.approx(p_joint_delta(m, delta), rel=1e-6, abs=1e-14)


@pytest.mark.parametrize("V", [0.5, 1.0])
@pytest.mark.parametrize("Q,d", [(2.09, 0.0), (5.0, 0.2), (17.28, 0.4)])
def test_delta_marginal_integrates_to_rate(Q, d, V):
    m = model(Q=Q, d=d, V=V)
    val, _ = integrate.quad(lambda x: p_joint_delta(m, x), -8 * W0 - 4 * d, 8 * W0 + 4 * d,
                            epsabs=1e-14, epsrel=1e-12, limit=400)
    assert val == pytest.approx(rcc(m.pair, V), rel=1e-6)


def test_rcc_values():
    assert rcc(PhotonPairConfig(w0=W0), 1.0) == 0.0
    assert rcc(PhotonPairConfig(Q=2 / W0, w0=W0), 1.0) == pytest.approx(
        0.316060279414278839202238114919, abs=1e-15)
    assert rcc(PhotonPairConfig(Q=1e3, w0=W0), 1.0) == pytest.approx(0.5)
    assert rcc(PhotonPairConfig(d=50.0, w0=W0), 1.0) == pytest.approx(0.5)


def test_rcc_rejects_bad_visibility():
    with pytest.raises(DomainError):
        rcc(PhotonPairConfig(), 1.5)


def test_fringe_zeros_spaced_by_period():
    Q = 15.0
    m = model(Q=Q)
    delta = np.linspace(1e-4, 2.0, 20001)
    p = p_joint_delta(m, delta)
    interior = np.flatnonzero((p[1:-1] < p[:-2]) & (p[1:-1] < p[2:])) + 1
    spacing = np.diff(delta[interior])
    np.testing.assert_allclose(spacing, 2 * math.pi / Q, atol=delta[1] - delta[0])
