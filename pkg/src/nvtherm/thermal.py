"""Temperature-dependent relaxation-rate laws and the dephasing budget.

Longitudinal rates follow the two-phonon Raman form A*T^5 + B; the P1
bath additionally carries a linear term from phonon-induced tunneling.
The total SQ decoherence rate decomposes as

    1/T2 = lifetime_term + p1_sl + c13_ss + residual_others

where lifetime_term = (3*sq_rate + dq_rate)/2 comes from population
relaxation, p1_sl is the spin-lattice-driven dephasing from the P1
electron-spin bath, c13_ss the (temperature-independent) spin-spin
dephasing from the 13C nuclear bath, and residual_others absorbs
whatever a supplied measurement leaves unexplained.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .constants import (
    BOHR_MAGNETON,
    G_CARBON13,
    G_ELECTRON,
    HBAR,
    MU_0,
    NUCLEAR_MAGNETON,
    PLANCK,
    PPB_TO_CM3,
    ppm_to_per_m3,
)


@dataclass(frozen=True)
class ThermalRateLaw:
    """Rate law rate(T) = lin_coeff*T + t5_coeff*T^5 + const_coeff (s^-1)."""

    t5_coeff: float = 0.0     # K^-5 s^-1
    const_coeff: float = 0.0  # s^-1
    lin_coeff: float = 0.0    # K^-1 s^-1

    def __post_init__(self):
        for name in ("t5_coeff", "const_coeff", "lin_coeff"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be >= 0")

    def rate(self, temperature):
        """Evaluate the law; temperature may be a scalar or array (K > 0)."""
        t = np.asarray(temperature, dtype=float)
        if np.any(t <= 0.0):
            raise ValueError("temperature must be > 0 K")
        out = self.lin_coeff * t + self.t5_coeff * t**5 + self.const_coeff
        return out if out.ndim else float(out)


# Fitted laws for the studied sample: 1/T1 = 3*sq_rate and the DQ rate.
SQ_INV_T1_LAW = ThermalRateLaw(t5_coeff=4.4e-11, const_coeff=237.0)
SQ_INV_T1_UNCERTAINTY = ThermalRateLaw(t5_coeff=0.2e-11, const_coeff=20.0)
DQ_RATE_LAW = ThermalRateLaw(t5_coeff=0.85e-11, const_coeff=215.0)
DQ_RATE_UNCERTAINTY = ThermalRateLaw(t5_coeff=0.09e-11, const_coeff=20.0)

# P1 (substitutional nitrogen) longitudinal relaxation, spin-orbit
# phonon-induced tunneling plus Raman term.
P1_INV_T1_LAW = ThermalRateLaw(t5_coeff=1.1e-10, lin_coeff=5e-5)

CALIBRATED_RANGE_K = (300.0, 600.0)


@dataclass(frozen=True)
class SpinSpeciesConfig:
    """A paramagnetic bath species coupled to the sensor spin."""

    name: str
    concentration_ppm: float
    g_factor: float
    magneton: float                 # J/T (Bohr or nuclear)
    spin: float
    relaxation_law: ThermalRateLaw = field(default_factory=ThermalRateLaw)

    def __post_init__(self):
        if self.concentration_ppm < 0.0:
            raise ValueError("concentration_ppm must be >= 0")
        if self.spin <= 0.0 or round(2.0 * self.spin) != 2.0 * self.spin:
            raise ValueError(f"spin must be a positive half-integer, got {self.spin}")

    def number_density(self, ppb_to_cm3: float = PPB_TO_CM3) -> float:
        """Bath-spin number density in m^-3."""
        return ppm_to_per_m3(self.concentration_ppm, ppb_to_cm3)


def p1_species(concentration_ppm: float = 0.125) -> SpinSpeciesConfig:
    """Default P1 electron-spin bath for the studied sample."""
    return SpinSpeciesConfig(
        name="P1",
        concentration_ppm=concentration_ppm,
        g_factor=2.0,
        magneton=BOHR_MAGNETON,
        spin=0.5,
        relaxation_law=P1_INV_T1_LAW,
    )


def c13_species(abundance: float = 0.011) -> SpinSpeciesConfig:
    """Natural-abundance 13C nuclear-spin bath (abundance as a fraction)."""
    return SpinSpeciesConfig(
        name="13C",
        concentration_ppm=abundance * 1e6,
        g_factor=G_CARBON13,
        magneton=NUCLEAR_MAGNETON,
        spin=0.5,
    )


def inv_t1(temperature, law: ThermalRateLaw = SQ_INV_T1_LAW):
    """Longitudinal relaxation rate 1/T1 at the given temperature (s^-1)."""
    return law.rate(temperature)


def sq_rate_of_t(temperature, law: ThermalRateLaw = SQ_INV_T1_LAW):
    """SQ transition rate, one third of 1/T1."""
    return inv_t1(temperature, law) / 3.0


def dq_rate_of_t(temperature, law: ThermalRateLaw = DQ_RATE_LAW):
    """DQ transition rate at the given temperature (s^-1)."""
    return law.rate(temperature)


def lifetime_broadening(temperature) -> float:
    """Coherence decay rate (3*sq_rate + dq_rate)/2 from the default laws."""
    t = np.asarray(temperature, dtype=float)
    out = (inv_t1(t) + dq_rate_of_t(t)) / 2.0
    return out if out.ndim else float(out)


def spin_lattice_dephasing(
    species: SpinSpeciesConfig,
    temperature: float,
    ppb_to_cm3: float = PPB_TO_CM3,
) -> float:
    """Dephasing rate (s^-1) from bath-spin flips driven by the bath's own
    longitudinal relaxation.

    Scales as sqrt(c_A / T1_A): square-root in both the bath density and
    the bath flip rate.
    """
    if species.concentration_ppm == 0.0:
        return 0.0
    bath_rate = species.relaxation_law.rate(temperature)
    if bath_rate <= 0.0:
        raise ValueError(
            f"bath relaxation rate must be > 0 (got {bath_rate} for {species.name})"
        )
    density = species.number_density(ppb_to_cm3)
    inner = (
        2.53
        * MU_0
        * G_ELECTRON
        * species.g_factor
        * BOHR_MAGNETON
        * species.magneton
        / (4.0 * math.pi * HBAR)
        * density
        * bath_rate
    )
    return math.sqrt(inner) / 1.4


def spin_spin_dephasing(
    species: SpinSpeciesConfig, ppb_to_cm3: float = PPB_TO_CM3
) -> float:
    """Temperature-independent dephasing rate (s^-1) from bath-internal
    dipolar flip-flops.

    The dipolar expression yields an energy scale linear in the bath
    density; it is converted to a rate by dividing by the Planck
    constant.
    """
    if species.concentration_ppm == 0.0:
        return 0.0
    density = species.number_density(ppb_to_cm3)
    energy = (
        0.37
        * MU_0
        * math.sqrt(G_ELECTRON * BOHR_MAGNETON)
        * (species.g_factor * species.magneton) ** 1.5
        * (species.spin * (species.spin + 1.0)) ** 0.25
        / 2.0
        * density
    )
    return energy / PLANCK


@dataclass(frozen=True)
class DephasingBudget:
    """Decomposition of the SQ decoherence rate 1/T2 (all entries s^-1)."""

    lifetime_term: float
    p1_sl: float
    c13_ss: float
    residual_others: float
    total_inv_t2: float
    temperature: float
    extrapolated: bool = False

    def components(self) -> dict[str, float]:
        return {
            "lifetime_term": self.lifetime_term,
            "p1_sl": self.p1_sl,
            "c13_ss": self.c13_ss,
            "residual_others": self.residual_others,
        }


def dephasing_budget(
    temperature: float,
    p1: SpinSpeciesConfig | None = None,
    c13: SpinSpeciesConfig | None = None,
    measured_inv_t2: float | None = None,
    ppb_to_cm3: float = PPB_TO_CM3,
    sq_law: ThermalRateLaw = SQ_INV_T1_LAW,
    dq_law: ThermalRateLaw = DQ_RATE_LAW,
) -> DephasingBudget:
    """Assemble the dephasing budget at one temperature.

    With a measured 1/T2 the residual picks up the unexplained (signed)
    gap and the total equals the measurement exactly; without one the
    residual is zero and the total is the model prediction.
    """
    p1 = p1 if p1 is not None else p1_species()
    c13 = c13 if c13 is not None else c13_species()
    lo, hi = CALIBRATED_RANGE_K
    extrapolated = not (lo <= temperature <= hi)
    lifetime = (inv_t1(temperature, sq_law) + dq_rate_of_t(temperature, dq_law)) / 2.0
    sl = spin_lattice_dephasing(p1, temperature, ppb_to_cm3)
    ss = spin_spin_dephasing(c13, ppb_to_cm3)
    if measured_inv_t2 is None:
        residual = 0.0
        total = lifetime + sl + ss
    else:
        residual = measured_inv_t2 - (lifetime + sl + ss)
        total = measured_inv_t2
    return DephasingBudget(
        lifetime_term=lifetime,
        p1_sl=sl,
        c13_ss=ss,
        residual_others=residual,
        total_inv_t2=total,
        temperature=temperature,
        extrapolated=extrapolated,
    )
