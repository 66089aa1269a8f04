"""SU(2) and SU(1,1) interferometer circuits and their fringe models.

Phase conventions shared by every circuit: ``phi = 0`` is the constructive
setting (largest state entering the readout) and ``phi = pi`` is time
reversal (motion returns to vacuum, the red sideband stays dark).

* ``su11_single``: S(r0/2, 0) then S(r0/2, phi) on mode a.
* ``su11_two``:    T(r0/2, 0) then T(r0/2, phi).
* ``su2``:         D(alpha0) on a, B(pi/4, 0), then B(pi/4, phi + pi).

``size`` is alpha0 for su2 and the squeeze r0 reached at phi = 0 for the
SU(1,1) circuits, so the state entering the readout has mean occupation
``size_nbar * cos^2(phi/2)`` with ``size_nbar = alpha0^2`` or ``sinh(r0)^2``.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import gates
from .errors import ConfigError, DegenerateModelError
from .fock import Truncation, make_vacuum, thermal_mixture
from .sideband import flip_probability, sideband_pulse

CIRCUIT_KINDS = ("su2", "su11_single", "su11_two")
FAMILY = {"su2": "poisson", "su11_single": "squeezed", "su11_two": "thermal"}
PHASE_SLOT = {
    "su2": "second beamsplitter phase (delay)",
    "su11_single": "second squeezer phase",
    "su11_two": "second two-mode squeezer phase",
}


def _check_kind(kind):
    if kind not in CIRCUIT_KINDS:
        raise ConfigError(f"unknown circuit kind {kind!r}; expected one of {CIRCUIT_KINDS}")


@dataclass(frozen=True)
class Readout:
    mode: str = "a"
    kind: str = "red"
    beta: float = math.pi / 2

    def __post_init__(self):
        if self.mode not in ("a", "b"):
            raise ConfigError(f"readout mode must be 'a' or 'b', got {self.mode!r}")
        if self.kind not in ("red", "blue"):
            raise ConfigError(f"readout kind must be 'red' or 'blue', got {self.kind!r}")


@dataclass(frozen=True)
class CircuitProgram:
    kind: str
    size: float
    readout: Readout = field(default_factory=Readout)
    phi_offset: float = 0.0
    v_offset: float = 0.0
    truncation: Truncation = None

    def __post_init__(self):
        _check_kind(self.kind)
        if self.size < 0:
            raise ConfigError("state size (alpha0 or r0) must be non-negative")
        if not 0 <= self.v_offset < 1:
            raise ConfigError("vertical offset must lie in [0, 1)")

    @property
    def phase_slot(self):
        return PHASE_SLOT[self.kind]

    @property
    def size_nbar(self):
        return size_to_nbar(self.kind, self.size)

    def with_truncation(self, initial_nbar=None):
        if self.truncation is not None:
            return self
        return replace(self, truncation=default_truncation(self.kind, self.size,
                                                           initial_nbar=initial_nbar))

    def to_dict(self):
        d = {"kind": self.kind, "size": self.size,
             "readout": {"mode": self.readout.mode, "kind": self.readout.kind,
                         "beta": self.readout.beta},
             "phi_offset": self.phi_offset, "v_offset": self.v_offset}
        if self.truncation is not None:
            d["truncation"] = {"n_max_a": self.truncation.n_max_a,
                               "n_max_b": self.truncation.n_max_b,
                               "leak_tol": self.truncation.leak_tol}
        return d


def size_to_nbar(kind, size):
    if kind == "su2":
        return size * size
    return math.sinh(size) ** 2


def nbar_to_size(kind, nbar):
    if kind == "su2":
        return math.sqrt(nbar)
    return math.asinh(math.sqrt(nbar))


def probe_mean_n(kind, size):
    """Mean phonon number of the probe (the state before the phase-sensitive
    element): alpha0^2 for su2, sinh^2(r0/2) per squeezed mode, and the total
    2 sinh^2(r0/2) over both modes for su11_two."""
    _check_kind(kind)
    if kind == "su2":
        return size * size
    n = math.sinh(size / 2) ** 2
    return 2 * n if kind == "su11_two" else n


def phase_scale(kind):
    """d(circuit phase)/d(physical phase) used to express sensitivities in the
    phase imprinted on the probe.  A single-mode phase phi_a rotates the
    squeezing axis, shifting the second squeezer phase by 2 phi_a."""
    return 2.0 if kind == "su11_single" else 1.0


def default_truncation(kind, size, leak_tol=1e-9, initial_nbar=None):
    """Cutoffs sized from the tail of the largest intermediate distribution.

    A thermal initial occupation ``(nbar_a, nbar_b)`` is amplified by the
    squeezers, so the cutoff is then taken from a thermal tail at the
    amplified occupation, which is heavier than any pure-state tail here.
    """
    nbar = size_to_nbar(kind, size)
    n_th = max(initial_nbar) if initial_nbar else 0.0
    if n_th > 0:
        gain = 1.0 if kind == "su2" else 1 + 2 * nbar
        eff = (nbar + n_th) * gain + n_th
        n_b = 0.0 if kind == "su11_single" else eff
        t = Truncation.for_nbar(eff, max(n_b, n_th), "thermal", leak_tol / 10)
        return Truncation(t.n_max_a, t.n_max_b, leak_tol)
    if kind == "su2":
        return Truncation.for_nbar(nbar, nbar, "poisson", leak_tol)
    if kind == "su11_single":
        t = Truncation.for_nbar(nbar, 0.0, "squeezed", leak_tol)
        return Truncation(t.n_max_a, 1, leak_tol)
    return Truncation.for_nbar(nbar, nbar, "thermal", leak_tol)


def tms_phase_param(r0, phi):
    """Squeeze parameter of T(r0/2, phi) T(r0/2, 0)|0,0>."""
    if r0 < 0:
        raise ValueError("r0 must be non-negative")
    return math.asinh(math.sinh(r0) * math.cos(phi / 2))


def delay_to_phase(t_delay, modes):
    """Relative phase accumulated between beamsplitter pulses separated by ``t_delay``."""
    if t_delay < 0:
        raise ValueError("delay must be non-negative")
    return float(np.mod((modes.omega_a - modes.omega_b) * t_delay, 2 * math.pi))


# ---------------------------------------------------------------- simulation

def circuit_state(program, phi, stage="readout", initial=None):
    """Simulated state after ``stage``: 'probe' (first element), 'interferometer'
    (before readout) or 'readout' (after the sideband pulse)."""
    program = program.with_truncation()
    state = initial if initial is not None else make_vacuum(program.truncation)
    half = program.size / 2
    if program.kind == "su11_single":
        state = gates.single_mode_squeeze(state, half, 0.0, "a")
        if stage == "probe":
            return state
        state = gates.single_mode_squeeze(state, half, phi, "a")
    elif program.kind == "su11_two":
        state = gates.two_mode_squeeze(state, half, 0.0)
        if stage == "probe":
            return state
        state = gates.two_mode_squeeze(state, half, phi)
    else:
        state = gates.displacement(state, program.size, "a")
        state = gates.beamsplitter(state, gates.FIFTY_FIFTY, 0.0)
        if stage == "probe":
            return state
        state = gates.beamsplitter(state, gates.FIFTY_FIFTY, phi + math.pi)
    if stage == "interferometer":
        return state
    ro = program.readout
    return sideband_pulse(state, ro.beta, ro.kind, ro.mode)


def run_circuit(program, phi, initial_nbar=None):
    """Exact P_down of the simulated circuit at phase ``phi``.

    ``initial_nbar=(nbar_a, nbar_b)`` averages over a thermal initial occupation.
    """
    program = program.with_truncation(initial_nbar)
    if not initial_nbar or max(initial_nbar) == 0:
        return circuit_state(program, phi).p_down
    total = 0.0
    weight = 0.0
    for w, s0 in thermal_mixture(program.truncation, *initial_nbar):
        total += w * circuit_state(program, phi, initial=s0).p_down
        weight += w
    return total / weight


@dataclass(frozen=True)
class FringeDataset:
    phi: np.ndarray
    p_down: np.ndarray
    shots: int = None
    program: CircuitProgram = None
    seed: int = None

    def __post_init__(self):
        phi = np.asarray(self.phi, dtype=float)
        p = np.asarray(self.p_down, dtype=float)
        if phi.ndim != 1 or phi.shape != p.shape:
            raise ConfigError("phi and p_down must be 1-D arrays of equal length")
        if len(phi) == 0:
            raise ConfigError("fringe dataset is empty")
        if np.any(np.diff(phi) <= 0):
            raise ConfigError("phi values must be strictly increasing")
        if np.any(p < 0) or np.any(p > 1):
            raise ConfigError("p_down values must lie in [0, 1]")
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "p_down", p)


def sweep_fringe(program, phi_grid, shots=None, seed=None, initial_nbar=None):
    phi_grid = np.asarray(phi_grid, dtype=float)
    if phi_grid.size == 0:
        raise ConfigError("phase grid is empty")
    program = program.with_truncation(initial_nbar)
    p = np.array([run_circuit(program, ph, initial_nbar) for ph in phi_grid])
    p = np.clip(p, 0.0, 1.0)
    if shots is not None:
        if shots < 1:
            raise ConfigError("shots must be a positive integer")
        rng = np.random.default_rng(seed)
        p = rng.binomial(int(shots), p) / int(shots)
    return FringeDataset(phi_grid, p, shots, program, seed)


# ---------------------------------------------------------------- analytic models

@dataclass(frozen=True)
class FringeModel:
    """Closed-form red-sideband fringe ``P_down(phi)`` with offsets.

    ``P_down = v_offset + 1 - <X>(nbar(phi - phi_offset))`` where ``<X>`` is the
    probability of the qubit staying in up after the readout pulse.  Offsets
    are fit parameters only; the simulator produces unshifted fringes.
    """

    kind: str
    size: float
    beta: float
    phi_offset: float = 0.0
    v_offset: float = 0.0
    paper_literal: bool = False

    def __post_init__(self):
        _check_kind(self.kind)

    @classmethod
    def from_program(cls, program, paper_literal=False):
        if program.readout.kind != "red":
            raise ConfigError("analytic fringe models describe red-sideband readout only")
        return cls(program.kind, program.size, program.readout.beta,
                   program.phi_offset, program.v_offset, paper_literal)

    @property
    def family(self):
        return FAMILY[self.kind]

    @property
    def size_nbar(self):
        return size_to_nbar(self.kind, abs(self.size))

    @property
    def mean_n(self):
        return probe_mean_n(self.kind, abs(self.size))

    @property
    def phase_scale(self):
        return phase_scale(self.kind)

    def _flip(self, nbar):
        return flip_probability(self.family, nbar, self.beta, self.paper_literal)

    def components(self, phi):
        """Arrays (P_down, dP/dphi, dP/dsize) over ``phi``."""
        phi = np.atleast_1d(np.asarray(phi, dtype=float))
        s_nbar = self.size_nbar
        x = phi - self.phi_offset
        cos2 = np.cos(x / 2) ** 2
        dn_dphi = -0.5 * s_nbar * np.sin(x)
        if self.kind == "su2":
            dsnbar_dsize = 2 * self.size
        else:
            dsnbar_dsize = math.sinh(2 * self.size)
        p = np.empty_like(phi)
        dp = np.empty_like(phi)
        ds = np.empty_like(phi)
        for i, (c2, dnd) in enumerate(zip(cos2, dn_dphi)):
            flip, dflip = self._flip(s_nbar * c2)
            p[i] = self.v_offset + flip
            dp[i] = dflip * dnd
            ds[i] = dflip * dsnbar_dsize * c2
        return p, dp, ds

    def p_down(self, phi):
        return self.components(phi)[0]

    def dp_dphi(self, phi):
        return self.components(phi)[1]

    def require_nondegenerate(self):
        if self.mean_n <= 0:
            raise DegenerateModelError("probe state has zero mean phonon number")
        return self

    def with_beta(self, beta):
        return replace(self, beta=float(beta))


@dataclass(frozen=True)
class SimulatedFringe:
    """Fringe evaluated by exact circuit simulation; the slope comes from
    central differences with step ``h``."""

    program: CircuitProgram
    h: float = 1e-5

    def __post_init__(self):
        object.__setattr__(self, "program", self.program.with_truncation())

    kind = property(lambda self: self.program.kind)
    beta = property(lambda self: self.program.readout.beta)
    mean_n = property(lambda self: probe_mean_n(self.program.kind, self.program.size))
    phase_scale = property(lambda self: phase_scale(self.program.kind))

    def _p(self, phi):
        return self.program.v_offset + run_circuit(self.program, phi - self.program.phi_offset)

    def components(self, phi):
        phi = np.atleast_1d(np.asarray(phi, dtype=float))
        p = np.array([self._p(x) for x in phi])
        dp = np.array([(self._p(x + self.h) - self._p(x - self.h)) / (2 * self.h) for x in phi])
        return p, dp, np.full_like(p, np.nan)

    def with_beta(self, beta):
        ro = replace(self.program.readout, beta=float(beta))
        return replace(self, program=replace(self.program, readout=ro))
