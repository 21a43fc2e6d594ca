"""tripodsim: two-mode slow light and spinor-polariton storage in tripod EIT media.

A 1-D Maxwell-Bloch simulator for an ensemble of tripod-type atoms:
level schemes and rotating-frame Hamiltonians, Lindblad dynamics, field
propagation in the co-moving frame, the storage/retrieval protocol with
its Zeeman beat note, and the fitting tools that turn traces into
numbers.
"""

__version__ = "0.1.0"

from .analysis import BeatFitResult, LinFit, fit_beat, fit_linear
from .constants import C_LIGHT, MU_B_OVER_H_MHZ_PER_G, beat_frequency_mhz, zeeman_rate
from .dynamics import (
    NumericalError,
    exact_evolve,
    lindblad_rhs,
    liouvillian,
    polariton_vacuum,
    steady_state,
    step,
)
from .hamiltonian import (
    DriveConfig,
    build_hamiltonian,
    dark_states,
    driven_dark_dimension,
    lindblad_dissipators,
)
from .levels import LevelScheme, build_scheme, clebsch_gordan
from .polariton import (
    PolaritonFields,
    decompose,
    group_velocity,
    group_velocity_from_coupling,
    mixing_angle,
    recompose,
    spinor_amplitudes,
)
from .propagation import (
    FieldRecord,
    Grid,
    MediumParams,
    expected_delay,
    measure_delay,
    propagate,
    transmission,
)
from .protocol import (
    PulseSchedule,
    StorageResult,
    eit_halfwidth,
    run_storage,
    scan_transmission,
    slow_light_schedule,
    storage_grid,
    storage_schedule,
    sweep_field,
)

__all__ = [
    "BeatFitResult",
    "C_LIGHT",
    "DriveConfig",
    "FieldRecord",
    "Grid",
    "LevelScheme",
    "LinFit",
    "MediumParams",
    "MU_B_OVER_H_MHZ_PER_G",
    "NumericalError",
    "PolaritonFields",
    "PulseSchedule",
    "StorageResult",
    "beat_frequency_mhz",
    "build_hamiltonian",
    "build_scheme",
    "clebsch_gordan",
    "dark_states",
    "decompose",
    "driven_dark_dimension",
    "eit_halfwidth",
    "exact_evolve",
    "expected_delay",
    "fit_beat",
    "fit_linear",
    "group_velocity",
    "group_velocity_from_coupling",
    "lindblad_dissipators",
    "lindblad_rhs",
    "liouvillian",
    "measure_delay",
    "mixing_angle",
    "polariton_vacuum",
    "propagate",
    "recompose",
    "run_storage",
    "scan_transmission",
    "slow_light_schedule",
    "spinor_amplitudes",
    "steady_state",
    "step",
    "storage_grid",
    "storage_schedule",
    "sweep_field",
    "transmission",
    "zeeman_rate",
]
