import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from simcf.channel import (
    build_correlation,
    build_propagation,
    cascade_all,
    compute_cascade,
    correlation_factor,
    diffraction_coefficient,
    draw_correlated,
    effective_channel,
    sample_channels,
    sinc,
)
from simcf.scenario import ScenarioConfig, build_scenario, rng_stream

from conftest import Instance, small_config


def test_boresight_coefficient():
    cfg = ScenarioConfig(M=2)
    lam = cfg.wavelength
    gap = cfg.layer_gap  # 2.5 lambda
    w = diffraction_coefficient(gap, gap, (lam / 2) ** 2, lam)
    # (lambda/10) * (1/(5 pi lambda) - j/lambda) * exp(j 5 pi)
    assert w == pytest.approx(-1 / (50 * np.pi) + 0.1j, rel=1e-12)


def test_propagation_matches_formula_and_symmetry():
    cfg = ScenarioConfig(L=2, M=3, Nx=3, Ny=3)
    layout = build_scenario(cfg)
    prop = build_propagation(layout, cfg)
    assert prop.W_input.shape == (2, 9, 2)
    assert prop.W_layer.shape == (2, 2, 9, 9)
    # aligned atoms sit at the boresight distance
    centre = 4
    lam = cfg.wavelength
    expected = diffraction_coefficient(cfg.layer_gap, cfg.layer_gap, (lam / 2) ** 2, lam)
    assert prop.W_layer[0, 0, centre, centre] == pytest.approx(expected, rel=1e-12)
    # parallel identical planes: w(n, n') = w(n', n)
    np.testing.assert_allclose(prop.W_layer[0, 0], prop.W_layer[0, 0].T, rtol=1e-12)
    assert np.all(np.isfinite(prop.W_input)) and np.all(prop.W_input != 0)


def test_coefficient_linear_in_area():
    w1 = diffraction_coefficient(0.03, 0.02, 1e-5, 0.01)
    w2 = diffraction_coefficient(0.03, 0.02, 2e-5, 0.01)
    assert w2 == pytest.approx(2 * w1)


def test_correlation_values():
    R = build_correlation(ScenarioConfig(Nx=3, Ny=3))
    np.testing.assert_array_equal(np.diag(R), 1.0)
    np.testing.assert_array_equal(R, R.T)
    # index 0 = (0,0), 1 = (0,1) lambda/2 apart, 4 = (1,1) diagonal
    assert R[0, 1] == 0.0
    assert R[0, 2] == 0.0
    assert R[0, 4] == pytest.approx(-0.21695429437747635, rel=1e-12)


def test_sinc_integer_zeros():
    np.testing.assert_array_equal(sinc(np.array([1.0, 2.0, -3.0, 7.0])), 0.0)
    assert sinc(0.0) == 1.0
    assert sinc(0.5) == pytest.approx(2 / np.pi)


def test_factor_reproduces_correlation():
    R = build_correlation(ScenarioConfig(Nx=4, Ny=4))
    F = correlation_factor(R)
    np.testing.assert_allclose(F @ F.conj().T, R, atol=1e-10)


def test_factor_rejects_nonfinite():
    with pytest.raises(np.linalg.LinAlgError):
        correlation_factor(np.array([[1.0, np.nan], [np.nan, 1.0]]))


def test_identity_correlation_variance():
    F = np.eye(4)
    h = draw_correlated(F, 1.0, rng_stream(0, 0, "t"), size=10_000)
    var = np.mean(np.abs(h) ** 2, axis=0)
    np.testing.assert_allclose(var, 1.0, rtol=0.05)


def test_zero_gain_gives_zero_channel():
    h = draw_correlated(np.eye(3), 0.0, rng_stream(0, 0, "t"), size=5)
    assert np.all(h == 0)


def test_general_covariance():
    R = build_correlation(ScenarioConfig(Nx=2, Ny=3, element_spacing=0.25))
    beta = 3.0
    h = draw_correlated(correlation_factor(R), beta, rng_stream(5, 0, "cov"), size=10_000)
    cov = h.T @ h.conj() / len(h)
    assert np.max(np.abs(cov - beta * R)) < 0.05 * beta


def test_sample_channels_deterministic_and_scaled():
    cfg = ScenarioConfig(L=3, K=2, Nx=2, Ny=2)
    layout = build_scenario(cfg)
    a = sample_channels(layout, cfg, rng_stream(1, 0, "channel"))
    b = sample_channels(layout, cfg, rng_stream(1, 0, "channel"))
    np.testing.assert_array_equal(a.h_sim, b.h_sim)
    assert a.h_sim.shape == (3, 2, 4)
    assert a.beta.shape == (3, 2)


def test_cascade_single_layer():
    cfg = small_config(M=1)
    inst = Instance(cfg)
    G = compute_cascade(inst.phases[0], inst.prop, 0)
    np.testing.assert_allclose(G, np.diag(np.exp(1j * inst.phases[0, 0])))


def test_cascade_zero_phases():
    cfg = small_config(M=3)
    inst = Instance(cfg)
    G = compute_cascade(np.zeros((3, cfg.N)), inst.prop, 1)
    np.testing.assert_allclose(G, inst.prop.W_layer[1, 1] @ inst.prop.W_layer[1, 0], rtol=1e-12)


def test_cascade_two_layers_dense_product():
    inst = Instance(small_config(M=2))
    phi = inst.phases[0]
    W2 = inst.prop.W_layer[0, 0]
    dense = np.zeros((4, 4), dtype=complex)
    for i in range(4):
        for j in range(4):
            dense[i, j] = np.exp(1j * phi[1, i]) * W2[i, j] * np.exp(1j * phi[0, j])
    np.testing.assert_allclose(compute_cascade(phi, inst.prop, 0), dense, rtol=1e-12)
    np.testing.assert_allclose(cascade_all(inst.phases, inst.prop)[0], dense, rtol=1e-12)


def test_effective_channel():
    inst = Instance(small_config(M=2))
    l, k = 1, 0
    W1 = inst.prop.W_input[l]
    G = np.diag(np.exp(1j * inst.phases[l, 1])) @ inst.prop.W_layer[l, 0] @ np.diag(np.exp(1j * inst.phases[l, 0]))
    expected = W1.conj().T @ G.conj().T @ inst.channels.h_sim[l, k]
    np.testing.assert_allclose(effective_channel(inst.channels, inst.phases, inst.prop, l, k), expected, rtol=1e-12)


def test_effective_channel_scalar_chain():
    cfg = ScenarioConfig(L=1, U=1, K=1, M=1, Nx=1, Ny=1)
    inst = Instance(cfg)
    w = inst.prop.W_input[0, 0, 0]
    h = inst.channels.h_sim[0, 0, 0]
    phi = inst.phases[0, 0, 0]
    got = effective_channel(inst.channels, inst.phases, inst.prop, 0, 0)
    assert got[0] == pytest.approx(np.conj(w) * np.exp(-1j * phi) * h)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2), st.integers(0, 3), st.floats(0, 6.283), st.floats(0, 6.283), st.floats(0, 6.283))
def test_cascade_affine_in_one_phase(m, n, t1, t2, t3):
    inst = Instance(small_config(M=3, seed=4))
    phi = inst.phases[0].copy()
    Gs = []
    for t in (t1, t2, t3):
        phi[m, n] = t
        Gs.append(compute_cascade(phi, inst.prop, 0))
    e1, e2, e3 = np.exp(1j * np.array([t1, t2, t3]))
    if abs(e2 - e1) < 1e-3:
        return
    predicted = Gs[0] + (e3 - e1) / (e2 - e1) * (Gs[1] - Gs[0])
    np.testing.assert_allclose(Gs[2], predicted, atol=1e-12 * np.abs(Gs[0]).max() / abs(e2 - e1) + 1e-14)


def test_phase_factors_unit_modulus():
    inst = Instance(small_config())
    np.testing.assert_allclose(np.abs(np.exp(1j * inst.phases)), 1.0, atol=1e-15)
