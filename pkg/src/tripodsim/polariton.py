"""Dark-polariton analytics: mixing angle, group velocity, mode decomposition.

The classical mean-field polariton amplitudes are

    psi_pm(z) = cos(theta) * e_pm(z) - sin(theta) * sqrt(n/2) * sigma_pm(z)

with e_pm = Omega_pm / g the signal envelope in photon-amplitude units,
sigma_pm = 2 * rho[g_ctrl, g_pm] the collective spin-flip expectation per
atom, n the effective linear atom density, and tan(theta) =
sqrt(n/2) * g / Omega_C.  The orthogonal (bright) combination is

    phi_pm(z) = sin(theta) * e_pm(z) + cos(theta) * sqrt(n/2) * sigma_pm(z)

so (psi, phi) is an exact rotation of (e, sqrt(n/2) sigma); decompose and
recompose invert each other to round-off.

Sign convention: the +/- subscript pairs mode "+" with signal field 1 and
the coherence toward its ground state, mode "-" with signal field 2.
Only convention-independent quantities (norms, relative phases) are
compared against measurable numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constants import C_LIGHT


def mixing_angle(g: float, n_density: float, omega_c: float) -> float:
    """Polariton mixing angle theta = atan(sqrt(n/2) * g / Omega_C).

    ``omega_c`` = 0 returns the stopped-light limit pi/2 exactly.
    """
    if omega_c < 0 or g < 0 or n_density < 0:
        raise ValueError("g, n_density and omega_c must be nonnegative")
    if omega_c == 0.0:
        return 0.5 * math.pi
    return math.atan(math.sqrt(0.5 * n_density) * g / omega_c)


def group_velocity(theta: float) -> float:
    """v_g = c cos^2(theta) in mm/us, identical to c / (1 + tan^2 theta)."""
    if not 0.0 <= theta <= 0.5 * math.pi:
        raise ValueError(f"theta must lie in [0, pi/2], got {theta}")
    return C_LIGHT * math.cos(theta) ** 2


def group_velocity_from_coupling(coupling_density: float, omega_c: float) -> float:
    """v_g = c / (1 + G / (2 Omega_C^2)) with G = g^2 n."""
    if omega_c <= 0:
        raise ValueError("omega_c must be > 0")
    return C_LIGHT / (1.0 + coupling_density / (2.0 * omega_c**2))


@dataclass
class PolaritonFields:
    """Dark and bright mode amplitudes on the z grid."""

    psi_plus: np.ndarray
    psi_minus: np.ndarray
    bright_plus: np.ndarray
    bright_minus: np.ndarray

    def dark_norm(self, dz: float) -> float:
        return float(np.trapezoid(np.abs(self.psi_plus) ** 2
                                  + np.abs(self.psi_minus) ** 2, dx=dz))

    def bright_norm(self, dz: float) -> float:
        return float(np.trapezoid(np.abs(self.bright_plus) ** 2
                                  + np.abs(self.bright_minus) ** 2, dx=dz))


def decompose(
    e1: np.ndarray,
    e2: np.ndarray,
    sigma_plus: np.ndarray,
    sigma_minus: np.ndarray,
    theta: float,
    n_density: float,
) -> PolaritonFields:
    """Rotate field/spin amplitudes into dark and bright polariton modes.

    ``e1``, ``e2`` are the signal envelopes in photon units (Omega / g);
    ``sigma_pm`` the per-atom spin-flip expectations (2 rho entries).  All
    arrays share one z grid.
    """
    arrs = [np.asarray(a, dtype=complex) for a in (e1, e2, sigma_plus, sigma_minus)]
    if len({a.shape for a in arrs}) != 1:
        raise ValueError("field and coherence arrays must share one grid")
    e1, e2, sp, sm = arrs
    c, s = math.cos(theta), math.sin(theta)
    root = math.sqrt(0.5 * n_density)
    return PolaritonFields(
        psi_plus=c * e1 - s * root * sp,
        psi_minus=c * e2 - s * root * sm,
        bright_plus=s * e1 + c * root * sp,
        bright_minus=s * e2 + c * root * sm,
    )


def recompose(
    fields: PolaritonFields, theta: float, n_density: float
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Invert :func:`decompose`; returns (e1, e2, sigma_plus, sigma_minus)."""
    c, s = math.cos(theta), math.sin(theta)
    root = math.sqrt(0.5 * n_density)
    if root == 0.0:
        raise ValueError("n_density must be > 0 to recover spin amplitudes")
    e1 = c * fields.psi_plus + s * fields.bright_plus
    e2 = c * fields.psi_minus + s * fields.bright_minus
    sp = (-s * fields.psi_plus + c * fields.bright_plus) / root
    sm = (-s * fields.psi_minus + c * fields.bright_minus) / root
    return e1, e2, sp, sm


def spinor_amplitudes(
    psi_plus: np.ndarray, psi_minus: np.ndarray, dz: float = 1.0
) -> tuple[complex, complex]:
    """Normalized overall weights (alpha, beta) of the two polariton modes.

    alpha is taken real and nonnegative (global phase gauge); the phase of
    beta is the mode overlap phase, so arg(beta/alpha) reproduces the
    relative phase of two identically shaped modes.
    """
    p = np.asarray(psi_plus, dtype=complex)
    m = np.asarray(psi_minus, dtype=complex)
    na2 = float(np.trapezoid(np.abs(p) ** 2, dx=dz))
    nb2 = float(np.trapezoid(np.abs(m) ** 2, dx=dz))
    total = na2 + nb2
    if total <= 0.0:
        raise ValueError("zero-norm polariton state")
    alpha = math.sqrt(na2 / total)
    beta_mag = math.sqrt(nb2 / total)
    overlap = complex(np.trapezoid(np.conj(p) * m, dx=dz))
    phase = np.exp(1j * np.angle(overlap)) if abs(overlap) > 0 else 1.0
    return alpha, beta_mag * phase
