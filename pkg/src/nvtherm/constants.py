"""Physical constants and unit conversions used across the package.

All internal computation is in SI (seconds, hertz, kelvin, tesla, m^-3).
The I/O boundary (CLI, curve files) works in microseconds and gauss.
"""

import scipy.constants as _sc

# CODATA values
MU_0 = _sc.mu_0                    # vacuum permeability, T^2 J^-1 m^3
BOHR_MAGNETON = _sc.physical_constants["Bohr magneton"][0]      # J/T
NUCLEAR_MAGNETON = _sc.physical_constants["nuclear magneton"][0]  # J/T
HBAR = _sc.hbar                    # J s
PLANCK = _sc.h                     # J s

# electron g-factor of the NV center ground state (taken as 2 to the
# precision relevant here)
G_ELECTRON = 2.0

# 13C nuclear g-factor; gives gamma/2pi = 1.0708 kHz/G
G_CARBON13 = 1.4048236

# 13C gyromagnetic ratio in kHz/G, as used in the echo revival-period rule
GAMMA_C13_KHZ_PER_G = 1.071

# electron Zeeman splitting per gauss for g = 2 (Hz/G)
ELECTRON_ZEEMAN_HZ_PER_G = G_ELECTRON * BOHR_MAGNETON / PLANCK * 1e-4

# Volumetric density of one ppb of impurity in diamond, per cubic
# centimetre.  Diamond has 1.76e23 atoms/cm^3, so 1 ppb = 1.76e14 cm^-3.
# (Configurable in SampleConfig; see the shipped default config file.)
PPB_TO_CM3 = 1.76e14

GAUSS_TO_TESLA = 1e-4
US_TO_S = 1e-6
S_TO_US = 1e6


def ppm_to_per_m3(concentration_ppm: float, ppb_to_cm3: float = PPB_TO_CM3) -> float:
    """Convert an impurity concentration in ppm to a number density in m^-3."""
    return concentration_ppm * 1e3 * ppb_to_cm3 * 1e6
