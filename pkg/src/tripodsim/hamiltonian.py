"""Rotating-frame Hamiltonians, jump operators and dark subspaces.

The Hamiltonian is built in the frame where every resonantly driven
coupling is static (see :mod:`tripodsim.levels`): diagonal entries are
linear combinations of the two-photon detunings ``delta1``, ``delta2``,
the one-photon detuning ``Delta`` and the Zeeman rate ``zeta``; couplings
enter as -(weight * Omega / 2) with Omega the complex field envelope in
Rabi-frequency units.  Leakage couplings carry an explicit phase
exp(-i * s * omega_12 * t) with omega_12 the signal frequency difference.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constants import zeeman_rate
from .levels import LevelScheme


@dataclass(frozen=True)
class DriveConfig:
    """Field frequencies and strengths.

    Two-photon detunings follow the convention
        delta1 = omega_C - omega_S1 + zeta
        delta2 = omega_C - omega_S2 - zeta
    with zeta = g_F mu_B B / hbar, so delta1 = delta2 = 0 means both
    Raman resonances are met.  Optical carrier frequencies never appear;
    only detunings and the Zeeman rate do.
    """

    omega_c: float  # control Rabi frequency, rad/us
    delta: float = 0.0  # one-photon detuning Delta, rad/us
    delta1: float = 0.0  # rad/us
    delta2: float = 0.0  # rad/us
    b_field: float = 0.150  # Gauss
    g_factor: float = 0.5

    @property
    def zeta(self) -> float:
        """Adjacent-sublevel Zeeman splitting, rad/us."""
        return zeeman_rate(self.b_field, self.g_factor)

    @property
    def signal_freq_difference(self) -> float:
        """omega_S1 - omega_S2 in rad/us (the input beat carrier)."""
        return 2.0 * self.zeta + self.delta2 - self.delta1


def diagonal_energies(scheme: LevelScheme, drive: DriveConfig) -> np.ndarray:
    """Rotating-frame diagonal entries for every state, rad/us."""
    coeffs = np.array([s.diag_coeffs for s in scheme.states])
    params = np.array([drive.delta1, drive.delta2, drive.delta, drive.zeta])
    return coeffs @ params


def residual_rate(transition, drive: DriveConfig) -> float:
    """Rotation rate (rad/us) of one coupling term in the chosen frame."""
    c1, c2, cd, cz = transition.frame_coeffs
    return (c1 * drive.delta1 + c2 * drive.delta2
            + cd * drive.delta + cz * drive.zeta)


def coupling_matrix(
    scheme: LevelScheme,
    drive: DriveConfig,
    signal_rabi: tuple[complex, complex],
    omega_c_value: complex | None = None,
    t: float = 0.0,
) -> np.ndarray:
    """Interaction (off-diagonal) part of the Hamiltonian at time t."""
    amps = {
        "control": drive.omega_c if omega_c_value is None else omega_c_value,
        "s1": signal_rabi[0],
        "s2": signal_rabi[1],
    }
    n = scheme.dim
    h = np.zeros((n, n), dtype=complex)
    for tr in scheme.transitions:
        amp = amps[tr.field] * tr.weight
        rate = residual_rate(tr, drive)
        if rate:
            amp = amp * np.exp(-1j * rate * t)
        h[scheme.index(tr.upper), scheme.index(tr.lower)] += -0.5 * amp
    return h + h.conj().T


def build_hamiltonian(
    scheme: LevelScheme,
    drive: DriveConfig,
    signal_rabi: tuple[complex, complex] = (0.0, 0.0),
    omega_c_value: complex | None = None,
    t: float = 0.0,
) -> np.ndarray:
    """Dense rotating-frame Hamiltonian (rad/us), Hermitian by construction.

    With all drives zero this reduces to the diagonal matrix of detunings.
    ``omega_c_value`` overrides the control amplitude from ``drive`` (used
    for time-dependent control envelopes); ``t`` only matters for leakage
    couplings.
    """
    s1, s2 = signal_rabi
    if not (np.isfinite(s1) and np.isfinite(s2)):
        raise ValueError("signal envelopes must be finite")
    h = np.diag(diagonal_energies(scheme, drive)).astype(complex)
    h += coupling_matrix(scheme, drive, signal_rabi, omega_c_value, t)
    return h


def lindblad_dissipators(
    scheme: LevelScheme, gamma_ground: float = 0.0
) -> list[tuple[np.ndarray, float]]:
    """Jump operators with rates: spontaneous decay plus ground dephasing.

    One jump |lower><upper| at rate Gamma * branching fraction per decay
    channel; if ``gamma_ground`` > 0, one projector |g><g| per ground
    state at that rate, which makes every ground-ground coherence decay
    at ``gamma_ground``.
    """
    if gamma_ground < 0:
        raise ValueError("gamma_ground must be >= 0")
    n = scheme.dim
    ops: list[tuple[np.ndarray, float]] = []
    for upper, channels in scheme.branching:
        iu = scheme.index(upper)
        for lower, frac in channels:
            op = np.zeros((n, n), dtype=complex)
            op[scheme.index(lower), iu] = 1.0
            ops.append((op, scheme.decay_rate * frac))
    if gamma_ground > 0:
        for lbl in scheme.ground_labels:
            op = np.zeros((n, n), dtype=complex)
            i = scheme.index(lbl)
            op[i, i] = 1.0
            ops.append((op, gamma_ground))
    return ops


def dark_states(
    scheme: LevelScheme,
    drive: DriveConfig,
    signal_rabi: tuple[complex, complex],
    tol: float = 1e-10,
) -> np.ndarray:
    """Orthonormal basis of the null space of the interaction Hamiltonian.

    Returns an array of shape (dim, k) whose columns are the dark states
    at the instantaneous field amplitudes.  They have no excited-state
    amplitude and are annihilated by the coupling part of H.  Raises
    ValueError when every drive is zero (the null space is then the whole
    space and "dark" is meaningless).
    """
    amps = (drive.omega_c, *signal_rabi)
    if all(abs(a) == 0 for a in amps):
        raise ValueError("all drives are zero; dark subspace undefined")
    h_int = coupling_matrix(scheme, drive, signal_rabi)
    _, svals, vh = np.linalg.svd(h_int)
    smax = svals[0] if svals[0] > 0 else 1.0
    null_mask = svals <= tol * smax
    basis = vh[null_mask].conj().T
    return basis


def spectator_labels(
    scheme: LevelScheme,
    drive: DriveConfig,
    signal_rabi: tuple[complex, complex],
    tol: float = 1e-12,
) -> list[str]:
    """Ground states completely decoupled at these field amplitudes."""
    h_int = coupling_matrix(scheme, drive, signal_rabi)
    scale = np.abs(h_int).max() or 1.0
    out = []
    for lbl in scheme.ground_labels:
        i = scheme.index(lbl)
        if np.abs(h_int[i]).max() <= tol * scale:
            out.append(lbl)
    return out


def driven_dark_dimension(
    scheme: LevelScheme,
    drive: DriveConfig,
    signal_rabi: tuple[complex, complex],
) -> int:
    """Number of dark states within the driven subsystem.

    The null-space dimension counts decoupled spectator ground states as
    trivially dark; this subtracts them, so a tripod with one signal off
    reports the single dark state of the remaining Lambda system.
    """
    basis = dark_states(scheme, drive, signal_rabi)
    return basis.shape[1] - len(spectator_labels(scheme, drive, signal_rabi))
