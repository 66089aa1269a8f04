"""Qubit-motion sideband couplings used for readout.

Qubit convention: ``sigma_plus = |down><up|``.  With that choice

* red sideband   ``H = (eta*Omega/2)(s+ a  + s- a+)`` couples |up, n> <-> |down, n-1>
* blue sideband  ``H = (eta*Omega/2)(s+ a+ + s- a )`` couples |up, n> <-> |down, n+1>

so a qubit prepared in up with the motion in vacuum is dark on the red
sideband.  The population of |up, n> oscillates at ``eta*Omega*sqrt(n)``
(red) or ``eta*Omega*sqrt(n+1)`` (blue).  The dimensionless pulse area
``beta = eta*Omega*t/2`` is the rotation angle on the |up, 1> doublet.
"""

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import distributions
from .errors import (IntegratorError, InvalidStateError, SeriesTruncationError,
                     TruncationLeakError)
from .fock import DOWN, UP, Truncation, TwoModeQubitState

SERIES_TAIL_TOL = 1e-10


@dataclass(frozen=True)
class SidebandConfig:
    """Sideband drive: Lamb-Dicke factors, carrier Rabi rate (rad/s) and the
    detunings (rad/s) of the drive from the sideband resonance of mode a
    (``delta_1``) and mode b (``delta_2``)."""

    eta_a: float
    eta_b: float
    omega_carrier: float
    delta_1: float = 0.0
    delta_2: float = 0.0

    def __post_init__(self):
        if self.eta_a <= 0 or self.eta_b <= 0:
            raise ValueError("Lamb-Dicke parameters must be positive")
        if self.omega_carrier <= 0:
            raise ValueError("carrier Rabi rate must be positive")

    @classmethod
    def from_modes(cls, modes, eta_a, eta_b, omega_carrier, resonant="a"):
        """Drive tuned to one mode's sideband; the other is off by the splitting."""
        split = modes.omega_a - modes.omega_b
        if resonant == "a":
            return cls(eta_a, eta_b, omega_carrier, 0.0, split)
        return cls(eta_a, eta_b, omega_carrier, -split, 0.0)

    def omega_sb(self, mode="a"):
        return (self.eta_a if mode == "a" else self.eta_b) * self.omega_carrier

    def beta(self, t, mode="a"):
        return 0.5 * self.omega_sb(mode) * t


def _check_kind(kind):
    if kind not in ("red", "blue"):
        raise ValueError(f"sideband kind must be 'red' or 'blue', got {kind!r}")


def _mode_axis(mode):
    if mode in ("a", "mode_a"):
        return 1
    if mode in ("b", "mode_b"):
        return 2
    raise ValueError(f"mode must be 'a' or 'b', got {mode!r}")


def _finish(state, amps, lost, label):
    new = state.evolved(amps, extra_leak=lost)
    if new.norm_leak > state.truncation.leak_tol:
        raise TruncationLeakError(
            f"{label}: {new.norm_leak:.3e} probability past cutoff", leak=new.norm_leak)
    return new


def sideband_pulse(state, beta, kind="red", mode="a"):
    """Resonant sideband pulse of area ``beta`` (exact two-level rotations)."""
    _check_kind(kind)
    ax = _mode_axis(mode)
    amps = np.moveaxis(np.array(state.amplitudes), ax, 1)  # (2, n_mode, n_other)
    up, dn = amps[UP].copy(), amps[DOWN].copy()
    n_top = up.shape[0] - 1
    new_up, new_dn = up.copy(), dn.copy()
    if kind == "red":
        ang = beta * np.sqrt(np.arange(1, n_top + 1, dtype=float))[:, None]
        c, s = np.cos(ang), np.sin(ang)
        new_up[1:] = c * up[1:] - 1j * s * dn[:-1]
        new_dn[:-1] = c * dn[:-1] - 1j * s * up[1:]
        # |down, n_top> couples to |up, n_top + 1>, which is not represented
        edge = beta * math.sqrt(n_top + 1)
        new_dn[-1] = math.cos(edge) * dn[-1]
        lost = math.sin(edge) ** 2 * float((np.abs(dn[-1]) ** 2).sum())
    else:
        ang = beta * np.sqrt(np.arange(1, n_top + 1, dtype=float))[:, None]
        c, s = np.cos(ang), np.sin(ang)
        new_up[:-1] = c * up[:-1] - 1j * s * dn[1:]
        new_dn[1:] = c * dn[1:] - 1j * s * up[:-1]
        edge = beta * math.sqrt(n_top + 1)
        new_up[-1] = math.cos(edge) * up[-1]
        lost = math.sin(edge) ** 2 * float((np.abs(up[-1]) ** 2).sum())
    out = np.moveaxis(np.stack([new_up, new_dn]), 1, ax)
    return _finish(state, out, lost, f"{kind} sideband")


def sideband_evolve(state, cfg, t, kind="red", mode="a"):
    """Resonant single-mode sideband evolution for duration ``t`` (s)."""
    if t < 0:
        raise ValueError("duration must be non-negative")
    return sideband_pulse(state, cfg.beta(t, mode), kind, mode)


# ------------------------------------------------------------------ off-resonant

class OffResonantSideband:
    """Two-mode sideband drive with per-mode detunings, integrated with RK4.

    In the frame rotating with ``delta_1`` on the qubit the Hamiltonian is
    ``H0 + e^{i D t} B + e^{-i D t} B+`` with ``D = delta_2 - delta_1`` and a
    time-independent ``H0`` (mode-a coupling plus ``delta_1 |down><down|``).
    The RK4 step is bounded by ``1/(50 * fastest rate)`` and every result is
    accepted only after a step-halving comparison.  When many drive periods
    elapse the one-period propagator is built once and reused.

    ``method='exact'`` instead moves to a frame co-rotating with mode b at
    ``D``, where the Hamiltonian is time independent
    (``H0 + B + B+ -/+ D N_b``), and propagates by diagonalisation.
    """

    def __init__(self, truncation, cfg, kind="blue", tol=1e-9, max_refinements=6,
                 method="rk4"):
        _check_kind(kind)
        if method not in ("rk4", "exact"):
            raise ValueError(f"method must be 'rk4' or 'exact', got {method!r}")
        self.method = method
        self.truncation = truncation
        self.cfg = cfg
        self.kind = kind
        self.tol = tol
        self.max_refinements = max_refinements
        # one spare Fock level per mode is exact: the sideband changes the
        # total phonon number by at most one
        self.na = truncation.n_max_a + 2
        self.nb = truncation.n_max_b + 2
        self.dim = 2 * self.na * self.nb
        self._build()

    def _build(self):
        cfg = self.cfg
        lower = sp.diags(np.sqrt(np.arange(1, self.na)), 1, format="csr")
        lower_b = sp.diags(np.sqrt(np.arange(1, self.nb)), 1, format="csr")
        op_a = lower.T if self.kind == "blue" else lower
        op_b = lower_b.T if self.kind == "blue" else lower_b
        s_plus = sp.csr_matrix(([1.0], ([DOWN], [UP])), shape=(2, 2))
        eye_a, eye_b = sp.identity(self.na), sp.identity(self.nb)
        ka = sp.kron(s_plus, sp.kron(op_a, eye_b)) * (0.5 * cfg.eta_a * cfg.omega_carrier)
        kb = sp.kron(s_plus, sp.kron(eye_a, op_b)) * (0.5 * cfg.eta_b * cfg.omega_carrier)
        n_down = sp.kron(sp.diags([0.0, 1.0]), sp.identity(self.na * self.nb))
        self.h0 = (ka + ka.getH() + cfg.delta_1 * n_down).tocsr().astype(complex)
        self.bp = kb.tocsr().astype(complex)
        self.bm = kb.getH().tocsr().astype(complex)
        self.detuning = cfg.delta_2 - cfg.delta_1
        rates = [abs(cfg.delta_1), abs(cfg.delta_2), abs(self.detuning),
                 cfg.eta_a * cfg.omega_carrier, cfg.eta_b * cfg.omega_carrier]
        self.h_max = 1.0 / (50.0 * max(rates))
        self._down_phase_index = np.arange(self.dim) >= self.dim // 2

    # -- basic propagation

    def _deriv(self, t, y):
        out = self.h0 @ y
        if self.detuning != 0:
            e = np.exp(1j * self.detuning * t)
            out += e * (self.bp @ y) + np.conj(e) * (self.bm @ y)
        else:
            out += self.bp @ y + self.bm @ y
        return -1j * out

    def _rk4(self, y, t0, t1, h_max):
        n = max(1, int(math.ceil((t1 - t0) / h_max - 1e-12)))
        h = (t1 - t0) / n
        t = t0
        for _ in range(n):
            k1 = self._deriv(t, y)
            k2 = self._deriv(t + h / 2, y + (h / 2) * k1)
            k3 = self._deriv(t + h / 2, y + (h / 2) * k2)
            k4 = self._deriv(t + h, y + h * k3)
            y = y + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
            t += h
        return y

    def _direct(self, y0, times, h_max):
        out, y, t = [], y0, 0.0
        for tj in times:
            if tj > t:
                y = self._rk4(y, t, tj, h_max)
                t = tj
            out.append(y)
        return out

    def _floquet(self, y0, times, h_max):
        period = 2 * math.pi / abs(self.detuning)
        n_p = int(math.ceil(period / h_max))
        u_period = self._rk4(np.identity(self.dim, dtype=complex), 0.0, period, period / n_p)
        out, k_done, y = [], 0, y0
        for tj in times:
            k = int(tj // period)
            while k_done < k:
                y = u_period @ y
                k_done += 1
            tau = tj - k * period
            out.append(self._rk4(y, k * period, k * period + tau, period / n_p) if tau > 0 else y)
        return out

    def _run(self, y0, times, h_max):
        if self.detuning == 0:
            return self._direct(y0, times, h_max)
        period = 2 * math.pi / abs(self.detuning)
        if times[-1] / period > 8 and self.dim <= 400:
            return self._floquet(y0, times, h_max)
        return self._direct(y0, times, h_max)

    def propagate(self, y0, times):
        """Evolve the columns of ``y0`` (padded-space vectors) to each time.

        Returns a list of arrays shaped like ``y0``, lab frame.
        """
        times = np.asarray(times, dtype=float)
        if np.any(times < 0) or np.any(np.diff(times) < 0):
            raise ValueError("times must be non-negative and sorted ascending")
        if len(times) == 0:
            return []
        if self.method == "exact":
            return self._exact(y0, times)
        h = self.h_max
        coarse = self._run(y0, times, h)
        for _ in range(self.max_refinements):
            fine = self._run(y0, times, h / 2)
            err = max(float(np.max(np.linalg.norm(np.atleast_2d((f - c).T), axis=-1)))
                      for f, c in zip(fine, coarse))
            if err <= self.tol:
                self.last_step = h / 2
                self.last_halving_error = err
                return [self._to_lab(y, t) for y, t in zip(fine, times)]
            coarse, h = fine, h / 2
        raise IntegratorError(
            f"RK4 step-halving disagreement {err:.2e} above tolerance {self.tol:.1e} "
            f"after {self.max_refinements} refinements")

    def _n_b(self):
        return np.tile(np.arange(self.nb, dtype=float), 2 * self.na)

    def _exact(self, y0, times):
        # blue raises n_b with e^{+iDt}: rotate by exp(+iDt N_b); red the opposite
        s = -1.0 if self.kind == "blue" else 1.0
        n_b = self._n_b()
        h = (self.h0 + self.bp + self.bm).toarray() - s * self.detuning * np.diag(n_b)
        w, v = np.linalg.eigh(h)
        c = v.conj().T @ y0
        out = []
        for t in times:
            phase = np.exp(-1j * w * t)
            y = v @ (phase[:, None] * c if c.ndim == 2 else phase * c)
            rot = np.exp(-1j * s * self.detuning * t * n_b)
            y = y * (rot[:, None] if y.ndim == 2 else rot)
            out.append(self._to_lab(y, t))
        self.last_step = 0.0
        self.last_halving_error = 0.0
        return out

    def _to_lab(self, y, t):
        phase = np.where(self._down_phase_index, np.exp(1j * self.cfg.delta_1 * t), 1.0)
        return y * (phase[:, None] if y.ndim == 2 else phase)

    # -- state helpers

    def embed(self, state):
        t = self.truncation
        big = np.zeros((2, self.na, self.nb), dtype=complex)
        big[:, : t.n_max_a + 1, : t.n_max_b + 1] = state.amplitudes
        return big.ravel()

    def p_down(self, y):
        y = y.reshape((2, self.na, self.nb, -1))
        return (np.abs(y[DOWN]) ** 2).sum(axis=(0, 1))


def sideband_evolve_offres(state, cfg, t, kind="blue", tol=1e-9, method="rk4"):
    """Evolve under the two-mode off-resonant sideband Hamiltonian for time ``t``."""
    if t < 0:
        raise ValueError("duration must be non-negative")
    if t == 0:
        return state
    prop = OffResonantSideband(state.truncation, cfg, kind, tol=tol, method=method)
    (y,) = prop.propagate(prop.embed(state), [t])
    big = y.reshape(2, prop.na, prop.nb)
    tr = state.truncation
    kept = big[:, : tr.n_max_a + 1, : tr.n_max_b + 1]
    lost = float((np.abs(big) ** 2).sum() - (np.abs(kept) ** 2).sum())
    return _finish(state, kept, lost, "off-resonant sideband")


def offres_response(truncation, cfg, initial_states, times, kind="blue", tol=1e-9,
                    method="exact"):
    """P_down(t) for a batch of initial states: array (n_times, n_states).

    Because P_down is linear in the initial density operator, these columns
    are the building blocks of the simulation-based population fits.
    """
    prop = OffResonantSideband(truncation, cfg, kind, tol=tol, method=method)
    y0 = np.stack([prop.embed(s) for s in initial_states], axis=1)
    ys = prop.propagate(y0, times)
    return np.array([prop.p_down(y) for y in ys])


# ------------------------------------------------------------------ analytic signals

def rabi_signal(populations, omega_sb, times, kind="blue", paper_literal=False):
    """Qubit P_down(t) for a qubit starting in up and motion with Fock
    populations ``populations``.

    Blue sideband: ``P_down = 1/2 [1 - sum_n P(n) cos(omega_sb sqrt(n+1) t)]``.
    With ``paper_literal=True`` the bracket uses ``+`` (equals 1 at t=0).
    """
    _check_kind(kind)
    p = np.asarray(populations, dtype=float)
    if np.any(p < -1e-12) or abs(p.sum() - 1.0) > 1e-6:
        raise ValueError(f"populations must form a probability vector (sum={p.sum():.8f})")
    n = np.arange(len(p), dtype=float)
    rate = omega_sb * np.sqrt(n + 1 if kind == "blue" else n)
    osc = np.cos(np.outer(np.asarray(times, dtype=float), rate)) @ p
    sign = 1.0 if paper_literal else -1.0
    return 0.5 * (1.0 + sign * osc)


def readout_kernel(beta, n_max, kind="red"):
    """Probability sin^2(beta sqrt(n)) (red) or sin^2(beta sqrt(n+1)) (blue)
    of flipping up -> down for Fock level n."""
    n = np.arange(n_max + 1, dtype=float)
    return np.sin(beta * np.sqrt(n if kind == "red" else n + 1)) ** 2


def _series_length(family, nbar, n_terms):
    if n_terms is None:
        return distributions.cutoff(family, nbar, SERIES_TAIL_TOL * 1e-5) + 1
    if distributions.tail(family, nbar, n_terms - 1) > SERIES_TAIL_TOL:
        raise SeriesTruncationError(
            f"{n_terms} terms leave a tail above {SERIES_TAIL_TOL:.0e} for nbar={nbar}")
    return n_terms


def _stay_series(family, nbar, beta, n_terms, literal_cos):
    n_terms = _series_length(family, nbar, n_terms)
    p = distributions.populations(family, nbar, n_terms - 1)
    dp = distributions.populations_dnbar(family, nbar, n_terms - 1)
    root = np.sqrt(np.arange(n_terms, dtype=float))
    kern = np.cos(beta * root) if literal_cos else np.cos(beta * root) ** 2
    return float(p @ kern), float(dp @ kern)


def flip_probability(family, nbar, beta, paper_literal=False, n_terms=None):
    """Red-sideband flip probability ``P_down`` and its derivative with respect
    to ``nbar`` for a probe of the given distribution family.

    Summed directly with the sin^2 kernel (``1 - cos`` when ``paper_literal``)
    so that small probabilities near the dark fringe keep full relative
    precision.
    """
    if nbar < 0:
        raise ValueError("mean occupation must be non-negative")
    n_terms = _series_length(family, nbar, n_terms)
    p = distributions.populations(family, nbar, n_terms - 1)
    dp = distributions.populations_dnbar(family, nbar, n_terms - 1)
    root = np.sqrt(np.arange(n_terms, dtype=float))
    if paper_literal and family != "poisson":
        kern = 2 * np.sin(beta * root / 2) ** 2
    else:
        kern = np.sin(beta * root) ** 2
    return float(p @ kern), float(dp @ kern)


def rsb_model_tms(lambda_, beta, n_terms=None, dlambda_dphi=1.0, paper_literal=False):
    """Spin projector expectation <X> (probability of staying in the initial
    qubit state) after a red-sideband pulse on a thermal marginal with mean
    ``lambda_``, and its derivative ``d<X>/dlambda * dlambda_dphi``.

    The default kernel is cos^2(beta sqrt(n)); ``paper_literal`` switches to
    the literal cos(beta sqrt(n)) series.
    """
    if lambda_ < 0:
        raise ValueError("lambda must be non-negative")
    x, dx = _stay_series("thermal", lambda_, beta, n_terms, paper_literal)
    return x, dx * dlambda_dphi


def rsb_model_squeezed(lambda_, beta, n_terms=None, dlambda_dphi=1.0, paper_literal=False):
    """Single-mode squeezed vacuum analog of :func:`rsb_model_tms`."""
    if lambda_ < 0:
        raise ValueError("lambda must be non-negative")
    x, dx = _stay_series("squeezed", lambda_, beta, n_terms, paper_literal)
    return x, dx * dlambda_dphi


def rsb_model_coherent(alpha, beta, n_terms=None, dalpha_dphi=1.0, paper_literal=False):
    """Coherent-state <X> = e^{-a^2} sum a^{2n}/n! cos^2(beta sqrt(n)) and
    ``d<X>/dalpha * dalpha_dphi``.  The literal coherent series already uses
    the cos^2 kernel, so ``paper_literal`` changes nothing here."""
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    x, dx_dm = _stay_series("poisson", alpha * alpha, beta, n_terms, False)
    return x, dx_dm * 2 * alpha * dalpha_dphi


__all__ = [
    "OffResonantSideband", "SidebandConfig", "offres_response", "rabi_signal",
    "readout_kernel", "rsb_model_coherent", "rsb_model_squeezed", "rsb_model_tms",
    "sideband_evolve", "sideband_evolve_offres", "sideband_pulse", "flip_probability",
]
