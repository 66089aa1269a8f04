"""Truncated-Fock simulation and phase-metrology toolkit for a qubit coupled
to two bosonic modes."""

__version__ = "0.1.0"

from .errors import IonMetroError  # noqa: E402
from .fock import (ModeConfig, REFERENCE_MODES, Truncation, TwoModeQubitState,  # noqa: E402
                   fock_state, make_vacuum, number_stats)
from .gates import (GateSpec, beamsplitter, displacement, gate_from_drive,  # noqa: E402
                    single_mode_squeeze, two_mode_squeeze)
from .interferometer import (CircuitProgram, FringeDataset, FringeModel, Readout,  # noqa: E402
                             run_circuit, sweep_fringe)
from .metrology import SensitivityReport, cr_bound, max_sensitivity  # noqa: E402
from .sideband import SidebandConfig, sideband_evolve, sideband_pulse  # noqa: E402

__all__ = [
    "CircuitProgram", "FringeDataset", "FringeModel", "GateSpec", "IonMetroError", "ModeConfig",
    "REFERENCE_MODES", "Readout", "SensitivityReport", "SidebandConfig", "Truncation",
    "TwoModeQubitState", "beamsplitter", "cr_bound", "displacement", "fock_state",
    "gate_from_drive", "make_vacuum", "max_sensitivity", "number_stats", "run_circuit",
    "sideband_evolve", "sideband_pulse", "single_mode_squeeze", "sweep_fringe",
    "two_mode_squeeze",
]
