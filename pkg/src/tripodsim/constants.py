"""Unit system and physical constants.

All simulation quantities use a single unit system chosen to keep typical
vapor-cell numbers of order 1..100:

    time                microseconds (us)
    angular frequency   rad/us
    length              millimeters (mm)
    magnetic field      Gauss (G)

Ordinary frequencies (fit results, beat notes) are reported in MHz, with
1 MHz = 2*pi rad/us.
"""

import math

TWO_PI = 2.0 * math.pi

# Speed of light in mm/us.
C_LIGHT = 2.998e5

# Bohr magneton over Planck constant, MHz per Gauss.
MU_B_OVER_H_MHZ_PER_G = 1.399624

# Reference excited-state decay rate (Rb D1 line), rad/us.
GAMMA_RB_D1 = 36.1


def zeeman_rate(b_field: float, g_factor: float) -> float:
    """Angular precession rate g_F * mu_B * B / hbar in rad/us.

    This is the splitting between adjacent Zeeman sublevels for a level
    with hyperfine g-factor ``g_factor`` in a field of ``b_field`` Gauss.
    """
    return TWO_PI * g_factor * MU_B_OVER_H_MHZ_PER_G * b_field


def beat_frequency_mhz(b_field: float, g_factor: float = 0.5) -> float:
    """Beat frequency (MHz) of a Delta-m = 2 ground-state coherence."""
    return 2.0 * g_factor * MU_B_OVER_H_MHZ_PER_G * b_field
