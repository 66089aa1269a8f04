import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.linalg import expm
from scipy.optimize import curve_fit

from ionmetro import distributions as D
from ionmetro import gates
from ionmetro.errors import SeriesTruncationError, TruncationLeakError
from ionmetro.fock import (DOWN, REFERENCE_MODES, UP, Truncation, TwoModeQubitState, fidelity,
                           fock_state, ladder_matrix, make_vacuum, product_state)
from ionmetro.sideband import (OffResonantSideband, SidebandConfig, flip_probability,
                               offres_response, rabi_signal, readout_kernel, rsb_model_coherent,
                               rsb_model_squeezed, rsb_model_tms, sideband_evolve,
                               sideband_evolve_offres, sideband_pulse)

ETA, OMEGA = 0.1, 2 * math.pi * 100e3
CFG = SidebandConfig(ETA, ETA, OMEGA)
OMEGA_SB = ETA * OMEGA


def dense_sideband(state, t, kind, mode="a"):
    """exp(-iHt) built from ladder matrices with sigma+ = |down><up|."""
    tr = state.truncation
    a = np.kron(ladder_matrix(tr.n_max_a), np.eye(tr.n_max_b + 1))
    b = np.kron(np.eye(tr.n_max_a + 1), ladder_matrix(tr.n_max_b))
    m = a if mode == "a" else b
    op = m if kind == "red" else m.conj().T
    sp = np.zeros((2, 2))
    sp[DOWN, UP] = 1
    coupling = np.kron(sp, op)
    h = 0.5 * OMEGA_SB * (coupling + coupling.conj().T)
    out = expm(-1j * h * t) @ state.amplitudes.ravel()
    return out.reshape(tr.shape)


@pytest.mark.parametrize("kind", ["red", "blue"])
@pytest.mark.parametrize("mode", ["a", "b"])
def test_resonant_matches_dense_expm(kind, mode):
    rng = np.random.default_rng(1)
    tr = Truncation(6, 5)
    amps = np.zeros(tr.shape, complex)
    amps[:, :4, :4] = rng.normal(size=(2, 4, 4)) + 1j * rng.normal(size=(2, 4, 4))
    amps[DOWN] = 0  # blue drive from down at the top level would leave the space
    s = TwoModeQubitState(amps / np.linalg.norm(amps), tr)
    t = 37e-6
    out = sideband_evolve(s, CFG, t, kind, mode)
    np.testing.assert_allclose(out.amplitudes, dense_sideband(s, t, kind, mode), atol=1e-12)


def test_red_on_ground_is_dark():
    s = make_vacuum(Truncation(3, 3))
    for t in (0.0, 1e-5, 3.3e-4):
        assert sideband_evolve(s, CFG, t, "red").p_down == 0


def test_red_pi_pulse_on_one_phonon():
    tr = Truncation(3, 3)
    out = sideband_evolve(fock_state(tr, 1, 0), CFG, math.pi / OMEGA_SB, "red")
    assert fidelity(out, fock_state(tr, 0, 0, "down")) > 1 - 1e-9


def test_blue_on_vacuum_oscillates_at_sideband_rate():
    s = make_vacuum(Truncation(3, 3))
    for t in np.linspace(0, 200e-6, 9):
        p = sideband_evolve(s, CFG, t, "blue").p_down
        assert p == pytest.approx((1 - math.cos(OMEGA_SB * t)) / 2, abs=1e-12)


@pytest.mark.parametrize("n", [1, 2, 5, 9])
def test_red_rabi_frequency_scales_as_sqrt_n(n):
    tr = Truncation(12, 1)
    t = np.linspace(0, 400e-6, 400)
    p = np.array([sideband_evolve(fock_state(tr, n, 0), CFG, x, "red").p_down for x in t])
    (w,), _ = curve_fit(lambda x, w: (1 - np.cos(w * x)) / 2, t, p, p0=[OMEGA_SB * math.sqrt(n) * 1.01])
    assert w == pytest.approx(OMEGA_SB * math.sqrt(n), rel=1e-6)


def test_blue_leak_guard():
    with pytest.raises(TruncationLeakError):
        sideband_pulse(fock_state(Truncation(2, 2), 2, 0), math.pi / 3, "blue")


@given(st.floats(0, 5), st.sampled_from(["red", "blue"]))
def test_pulse_preserves_norm(beta, kind):
    tr = Truncation(40, 2)
    s = product_state(tr, gates.coherent_amplitudes(1.5, 40), [1.0])
    out = sideband_pulse(s, beta, kind)
    assert abs(out.norm_sq + out.norm_leak - 1) < 1e-9


# ---------------------------------------------------------------- analytic signals

def test_rabi_signal_single_fock():
    t = np.linspace(0, 1e-3, 50)
    np.testing.assert_allclose(rabi_signal([1.0], OMEGA_SB, t), (1 - np.cos(OMEGA_SB * t)) / 2)


def test_rabi_signal_starts_at_zero_and_literal_flip():
    p = D.thermal(1.0, 40)
    p /= p.sum()
    assert rabi_signal(p, OMEGA_SB, [0.0])[0] == pytest.approx(0, abs=1e-15)
    assert rabi_signal(p, OMEGA_SB, [0.0], paper_literal=True)[0] == 1


def test_rabi_signal_refuses_unnormalised():
    with pytest.raises(ValueError):
        rabi_signal([0.5, 0.4], OMEGA_SB, [0.0])


def test_rabi_signal_matches_blue_simulation_for_coherent_state():
    tr = Truncation(30, 1)
    s = product_state(tr, gates.coherent_amplitudes(2.0, 30), [1.0])
    p = D.poisson(4.0, 30)
    t = np.linspace(0, 500e-6, 41)
    sim = [sideband_evolve(s, CFG, x, "blue").p_down for x in t]
    np.testing.assert_allclose(rabi_signal(p / p.sum(), OMEGA_SB, t), sim, atol=1e-6)


def test_readout_kernel():
    k = readout_kernel(math.pi / 2, 4, "red")
    assert k[0] == 0 and k[1] == pytest.approx(1)
    assert readout_kernel(math.pi / 2, 4, "blue")[0] == pytest.approx(1)


@pytest.mark.parametrize("beta", [0.3, 1.0, 2.5])
def test_series_at_vacuum(beta):
    assert rsb_model_tms(0.0, beta)[0] == 1
    assert rsb_model_squeezed(0.0, beta)[0] == 1
    assert rsb_model_coherent(0.0, beta)[0] == 1


@pytest.mark.parametrize("lam", [0.2, 1.5, 3.04, 5.0])
@pytest.mark.parametrize("literal", [False, True])
def test_tms_series_vs_brute_force(lam, literal):
    beta = 0.9
    n = np.arange(10_000, dtype=float)
    mu = lam / (1 + lam)
    kern = np.cos(beta * np.sqrt(n))
    if not literal:
        kern = kern ** 2
    brute = float(np.sum(mu ** n * kern) / (1 + lam))
    assert rsb_model_tms(lam, beta, paper_literal=literal)[0] == pytest.approx(brute, abs=1e-10)


def test_series_truncation_error():
    with pytest.raises(SeriesTruncationError):
        rsb_model_tms(3.04, 1.0, n_terms=10)
    x, _ = rsb_model_tms(3.04, 1.0, n_terms=120)
    assert x == pytest.approx(rsb_model_tms(3.04, 1.0)[0], abs=1e-10)


@pytest.mark.parametrize("beta", [0.6, math.pi / 2])
def test_tms_series_matches_simulation(beta):
    lam = 3.04
    r = math.asinh(math.sqrt(lam))
    tr = Truncation(110, 110)
    s = gates.two_mode_squeeze(make_vacuum(tr), r)
    sim = sideband_pulse(s, beta, "red", "a")
    x, _ = rsb_model_tms(lam, beta)
    assert 1 - sim.p_down == pytest.approx(x, abs=1e-4)


@pytest.mark.parametrize("beta", [0.6, 1.9])
def test_coherent_series_matches_simulation(beta):
    tr = Truncation(40, 1)
    s = product_state(tr, gates.coherent_amplitudes(2.0, 40), [1.0])
    x, _ = rsb_model_coherent(2.0, beta)
    assert 1 - sideband_pulse(s, beta, "red").p_down == pytest.approx(x, abs=1e-4)


def test_literal_tms_series_disagrees_with_simulation():
    lam, beta = 3.04, 1.0
    tr = Truncation(110, 110)
    s = gates.two_mode_squeeze(make_vacuum(tr), math.asinh(math.sqrt(lam)))
    stay = 1 - sideband_pulse(s, beta, "red").p_down
    assert abs(rsb_model_tms(lam, beta, paper_literal=True)[0] - stay) > 1e-2


@pytest.mark.parametrize("family", D.FAMILIES)
@given(nbar=st.floats(0.01, 5.0), beta=st.floats(0.1, 3.0))
def test_flip_and_stay_are_complementary(family, nbar, beta):
    flip, dflip = flip_probability(family, nbar, beta)
    fn = {"thermal": rsb_model_tms, "squeezed": rsb_model_squeezed}.get(family)
    if fn is None:
        stay, dstay = rsb_model_coherent(math.sqrt(nbar), beta, dalpha_dphi=1 / (2 * math.sqrt(nbar)))
    else:
        stay, dstay = fn(nbar, beta)
    # the series is cut once its tail drops below SERIES_TAIL_TOL
    assert flip + stay == pytest.approx(1.0, abs=1e-9)
    assert dflip == pytest.approx(-dstay, abs=1e-8)


def test_series_derivative_uses_chain_rule():
    x, dx = rsb_model_tms(2.0, 1.1, dlambda_dphi=-0.5)
    h = 1e-6
    fd = (rsb_model_tms(2.0 + h, 1.1)[0] - rsb_model_tms(2.0 - h, 1.1)[0]) / (2 * h)
    assert dx == pytest.approx(-0.5 * fd, rel=1e-7)


# ---------------------------------------------------------------- off-resonant

def test_config_from_modes_splitting():
    cfg = SidebandConfig.from_modes(REFERENCE_MODES, 0.1, 0.1, OMEGA)
    assert abs(cfg.delta_1 - cfg.delta_2) == pytest.approx(abs(REFERENCE_MODES.splitting))


def test_offres_zero_time_is_identity():
    s = fock_state(Truncation(3, 3), 1, 1)
    cfg = SidebandConfig(ETA, ETA, OMEGA, 0.0, 2 * math.pi * 33e3)
    assert sideband_evolve_offres(s, cfg, 0.0) is s


def test_offres_large_splitting_limit():
    tr = Truncation(4, 4)
    s = fock_state(tr, 1, 0)
    cfg = SidebandConfig(ETA, ETA, OMEGA, 0.0, 2 * math.pi * 10e6)
    t = math.pi / (OMEGA_SB * math.sqrt(2))
    out = sideband_evolve_offres(s, cfg, t, "blue")
    ref = sideband_evolve(s, CFG, t, "blue", "a")
    assert fidelity(out, ref) > 1 - 1e-6


def test_offres_33khz_bounded_correction():
    tr = Truncation(4, 4)
    cfg = SidebandConfig(ETA, ETA, OMEGA, 0.0, 2 * math.pi * 33e3)
    t = np.linspace(0, 300e-6, 31)
    off = offres_response(tr, cfg, [make_vacuum(tr)], t, "blue", method="rk4")[:, 0]
    res = rabi_signal([1.0], OMEGA_SB, t)
    dev = np.max(np.abs(off - res))
    assert 1e-3 < dev < 0.6
    assert np.all((off >= -1e-12) & (off <= 1 + 1e-12))


@pytest.mark.parametrize("kind", ["red", "blue"])
def test_offres_exact_and_rk4_agree(kind):
    tr = Truncation(16, 12)
    s = product_state(tr, gates.coherent_amplitudes(0.6, 16), gates.coherent_amplitudes(0.3j, 12))
    cfg = SidebandConfig(ETA, 0.07, OMEGA, 2 * math.pi * 4e3, -2 * math.pi * 25e3)
    a = sideband_evolve_offres(s, cfg, 83e-6, kind, method="rk4")
    b = sideband_evolve_offres(s, cfg, 83e-6, kind, method="exact")
    assert a.p_down == pytest.approx(b.p_down, abs=1e-9)
    assert abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2 > (1 - 1e-8) * a.norm_sq * b.norm_sq


def test_step_halving_acceptance():
    tr = Truncation(3, 3)
    cfg = SidebandConfig(ETA, ETA, OMEGA, 0.0, 2 * math.pi * 33e3)
    prop = OffResonantSideband(tr, cfg, "blue", tol=1e-9)
    prop.propagate(prop.embed(fock_state(tr, 1, 1)), [50e-6])
    assert prop.last_halving_error < 1e-8
    assert prop.last_step <= prop.h_max


def test_offres_response_is_linear_in_initial_populations():
    tr = Truncation(5, 5)
    cfg = SidebandConfig(ETA, ETA, OMEGA, 0.0, 2 * math.pi * 33e3)
    t = np.linspace(0, 200e-6, 11)
    basis = [fock_state(tr, n, n) for n in range(3)]
    resp = offres_response(tr, cfg, basis, t)
    # coherent superposition of diagonal Fock states: the dynamics conserve
    # n_a + n_b - n_down, so no cross terms appear
    amps = sum(math.sqrt(w) * s.amplitudes for w, s in zip([0.5, 0.3, 0.2], basis))
    sup = TwoModeQubitState(amps, tr)
    direct = offres_response(tr, cfg, [sup], t)[:, 0]
    np.testing.assert_allclose(direct, resp @ [0.5, 0.3, 0.2], atol=1e-12)
