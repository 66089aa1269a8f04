"""Truncated Hilbert space of one qubit and two bosonic modes.

Amplitudes are stored qubit-major as a complex array of shape
``(2, n_max_a + 1, n_max_b + 1)``; index 0 of the first axis is the qubit
state up, index 1 is down.  Probability that a gate pushes past the Fock
cutoff is not renormalised away: it is accumulated in ``norm_leak`` so that
``norm**2 + norm_leak == 1`` holds throughout a simulation.
"""

import json
import math
from dataclasses import dataclass

import numpy as np

from . import distributions
from .errors import DimensionError, InvalidStateError

UP = 0
DOWN = 1

_QUBIT_INDEX = {"up": UP, "down": DOWN, UP: UP, DOWN: DOWN}


@dataclass(frozen=True)
class Truncation:
    n_max_a: int
    n_max_b: int
    leak_tol: float = 1e-9

    def __post_init__(self):
        if int(self.n_max_a) != self.n_max_a or int(self.n_max_b) != self.n_max_b:
            raise DimensionError("Fock cutoffs must be integers")
        if self.n_max_a < 1 or self.n_max_b < 1:
            raise DimensionError(
                f"Fock cutoffs must be >= 1, got ({self.n_max_a}, {self.n_max_b})")
        if not 0 < self.leak_tol < 1:
            raise DimensionError(f"leak_tol must lie in (0, 1), got {self.leak_tol}")

    @property
    def shape(self):
        return (2, self.n_max_a + 1, self.n_max_b + 1)

    @property
    def dim(self):
        return 2 * (self.n_max_a + 1) * (self.n_max_b + 1)

    @classmethod
    def for_nbar(cls, nbar_a, nbar_b=0.0, family="thermal", leak_tol=1e-9):
        """Cutoffs sized so the predicted per-mode tail stays far below ``leak_tol``.

        The historical rule ``ceil(nbar + 8*sqrt(nbar + 1))`` is used as a floor;
        heavy-tailed (geometric, squeezed) states usually need more.
        """
        def one(nbar):
            rule = math.ceil(nbar + 8 * math.sqrt(nbar + 1))
            # amplitude-level accuracy: tail probability ~ (leak_tol * 1e-3)**2 is
            # overkill; 1e-3 * leak_tol keeps gate errors well below the budget
            tail_n = distributions.cutoff(family, nbar, leak_tol * 1e-3)
            return max(1, rule if nbar > 0 else 1, tail_n)
        return cls(one(nbar_a), one(nbar_b), leak_tol)


@dataclass(frozen=True)
class ModeConfig:
    """Angular frequencies (rad/s) of the two motional modes and the qubit."""

    omega_a: float
    omega_b: float
    omega_0: float

    def __post_init__(self):
        if min(self.omega_a, self.omega_b, self.omega_0) <= 0:
            raise ValueError("all frequencies must be positive")
        if self.omega_a == self.omega_b:
            raise ValueError("mode frequencies must differ")

    @property
    def splitting(self):
        return self.omega_a - self.omega_b


#: Radial mode and qubit frequencies of the reference trap.
REFERENCE_MODES = ModeConfig(
    omega_a=2 * math.pi * 1.80e6,
    omega_b=2 * math.pi * 1.83e6,
    omega_0=2 * math.pi * 2.63e6,
)


@dataclass(frozen=True)
class NumberStats:
    mean: float
    variance: float


@dataclass(frozen=True, eq=False)
class TwoModeQubitState:
    amplitudes: np.ndarray
    truncation: Truncation
    norm_leak: float = 0.0

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex)
        if amps.shape != self.truncation.shape:
            raise DimensionError(
                f"amplitude shape {amps.shape} does not match truncation {self.truncation.shape}")
        if self.norm_leak < 0:
            raise ValueError("norm_leak must be non-negative")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def norm_sq(self):
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    @property
    def valid(self):
        return self.norm_leak <= self.truncation.leak_tol

    def require_valid(self):
        if not self.valid:
            raise InvalidStateError(
                f"state lost {self.norm_leak:.3e} probability past the cutoff "
                f"(tolerance {self.truncation.leak_tol:.1e})")
        return self

    def evolved(self, amplitudes, extra_leak=0.0):
        return TwoModeQubitState(amplitudes, self.truncation, self.norm_leak + max(extra_leak, 0.0))

    def joint_populations(self):
        """P(n_a, n_b) summed over the qubit."""
        return (np.abs(self.amplitudes) ** 2).sum(axis=0)

    def qubit_populations(self):
        p = (np.abs(self.amplitudes) ** 2).sum(axis=(1, 2))
        return {"up": float(p[UP]), "down": float(p[DOWN])}

    @property
    def p_down(self):
        return float((np.abs(self.amplitudes[DOWN]) ** 2).sum())

    def mode_vector(self):
        """Motional amplitudes for a state whose qubit is in a definite basis state."""
        p = (np.abs(self.amplitudes) ** 2).sum(axis=(1, 2))
        q = int(np.argmax(p))
        if p[1 - q] > 1e-12:
            raise InvalidStateError("qubit is entangled with / superposed over the motion")
        return self.amplitudes[q]

    def to_dict(self):
        return {
            "truncation": {
                "n_max_a": self.truncation.n_max_a,
                "n_max_b": self.truncation.n_max_b,
                "leak_tol": self.truncation.leak_tol,
            },
            "amplitudes": np.stack([self.amplitudes.real, self.amplitudes.imag], axis=-1).tolist(),
            "norm_leak": self.norm_leak,
        }

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data):
        trunc = Truncation(**data["truncation"])
        arr = np.asarray(data["amplitudes"], dtype=float)
        return cls(arr[..., 0] + 1j * arr[..., 1], trunc, float(data["norm_leak"]))

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def make_vacuum(truncation, qubit="up"):
    return fock_state(truncation, 0, 0, qubit)


def fock_state(truncation, n_a, n_b, qubit="up"):
    if not (0 <= n_a <= truncation.n_max_a and 0 <= n_b <= truncation.n_max_b):
        raise DimensionError(f"|{n_a}, {n_b}> lies outside the truncation")
    amps = np.zeros(truncation.shape, dtype=complex)
    amps[_QUBIT_INDEX[qubit], n_a, n_b] = 1.0
    return TwoModeQubitState(amps, truncation)


def product_state(truncation, psi_a, psi_b, qubit="up"):
    """|qubit> (x) |psi_a> (x) |psi_b> from single-mode amplitude vectors."""
    amps = np.zeros(truncation.shape, dtype=complex)
    a = np.zeros(truncation.n_max_a + 1, dtype=complex)
    b = np.zeros(truncation.n_max_b + 1, dtype=complex)
    a[: len(psi_a)] = psi_a[: len(a)]
    b[: len(psi_b)] = psi_b[: len(b)]
    amps[_QUBIT_INDEX[qubit]] = np.outer(a, b)
    return TwoModeQubitState(amps, truncation)


def ladder_matrix(n_max):
    """Annihilation operator on Fock levels 0..n_max."""
    if int(n_max) != n_max or n_max < 1:
        raise DimensionError(f"n_max must be an integer >= 1, got {n_max}")
    return np.diag(np.sqrt(np.arange(1, n_max + 1)), k=1).astype(complex)


def fock_marginal(state, which):
    joint = state.joint_populations()
    if which in ("a", "mode_a"):
        return joint.sum(axis=1)
    if which in ("b", "mode_b"):
        return joint.sum(axis=0)
    raise ValueError(f"which must be 'mode_a' or 'mode_b', got {which!r}")


def number_stats(state, which="mode_a"):
    state.require_valid()
    if which == "total":
        joint = state.joint_populations()
        na = np.arange(joint.shape[0])[:, None]
        nb = np.arange(joint.shape[1])[None, :]
        n = (na + nb).ravel()
        p = joint.ravel()
    else:
        p = fock_marginal(state, which)
        n = np.arange(len(p))
    mean = float((n * p).sum())
    var = float((n * n * p).sum()) - mean * mean
    return NumberStats(mean=mean, variance=max(var, 0.0))


def overlap(s1, s2):
    if s1.truncation.shape != s2.truncation.shape:
        raise DimensionError("states have different truncations")
    return complex(np.vdot(s1.amplitudes, s2.amplitudes))


def fidelity(s1, s2):
    return abs(overlap(s1, s2)) ** 2


def reduced_density_matrix(state, mode="a"):
    """Reduced density matrix of one mode (qubit and other mode traced out)."""
    amps = state.amplitudes
    if mode in ("a", "mode_a"):
        return np.einsum("qij,qkj->ik", amps, amps.conj())
    if mode in ("b", "mode_b"):
        return np.einsum("qji,qjk->ik", amps, amps.conj())
    raise ValueError(f"mode must be 'a' or 'b', got {mode!r}")


def reduced_purity(state, mode="a"):
    rho = reduced_density_matrix(state, mode)
    rho = rho / np.trace(rho).real
    return float(np.real(np.trace(rho @ rho)))


def thermal_mixture(truncation, nbar_a, nbar_b=0.0, weight_tol=1e-12, qubit="up"):
    """Fock-state ensemble reproducing a thermal initial occupation.

    Returns a list of ``(weight, state)``; expectation values averaged with these
    weights equal those of the thermal density operator up to the dropped
    weight (below ``weight_tol``).
    """
    def levels(nbar, n_max):
        if nbar == 0:
            return np.array([1.0])
        p = distributions.thermal(nbar, n_max)
        keep = np.nonzero(p >= weight_tol)[0]
        return p[: keep[-1] + 1]

    pa = levels(nbar_a, truncation.n_max_a)
    pb = levels(nbar_b, truncation.n_max_b)
    out = []
    for i, wa in enumerate(pa):
        for j, wb in enumerate(pb):
            w = wa * wb
            if w >= weight_tol:
                out.append((float(w), fock_state(truncation, i, j, qubit)))
    return out
