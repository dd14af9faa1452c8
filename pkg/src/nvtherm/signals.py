"""Closed-form signal models for the pulse protocols and CW ODMR.

All time-domain models are normalized to 1 at zero delay.  The Hahn echo
carries the 13C revival comb; the Ramsey fringe carries the 14N triplet
beat; the thermal echo is a single decaying cosine whose frequency tracks
the zero-field splitting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .constants import ELECTRON_ZEEMAN_HZ_PER_G, GAMMA_C13_KHZ_PER_G


@dataclass(frozen=True)
class HahnEchoModel:
    """Stretched-exponential echo envelope with Gaussian revival comb."""

    t2: float                  # s
    stretch: float             # envelope exponent p
    revival_period: float      # s
    revival_width: float       # s
    revival_count: int = 8

    def __post_init__(self):
        if self.t2 <= 0.0:
            raise ValueError("t2 must be > 0")
        if not 0.5 < self.stretch <= 4.0:
            raise ValueError(f"stretch must lie in (0.5, 4], got {self.stretch}")
        if self.revival_period <= 0.0:
            raise ValueError("revival_period must be > 0")
        if not 0.0 < self.revival_width < self.revival_period:
            raise ValueError("revival_width must lie in (0, revival_period)")
        if self.revival_count < 0:
            raise ValueError("revival_count must be >= 0")


@dataclass(frozen=True)
class RamseyModel:
    """Free-induction decay with detuning and 14N hyperfine triplet."""

    t2_star: float             # s
    detuning: float = 0.0      # Hz
    hyperfine_splitting: float = 2.16e6  # Hz
    contrast: float = 1.0
    envelope_exponent: float = 2.0

    def __post_init__(self):
        if self.t2_star <= 0.0:
            raise ValueError("t2_star must be > 0")
        if not 0.0 <= self.contrast <= 1.0:
            raise ValueError("contrast must lie in [0, 1]")
        if self.envelope_exponent <= 0.0:
            raise ValueError("envelope_exponent must be > 0")


@dataclass(frozen=True)
class ThermalEchoModel:
    """Decaying cosine at the mean-microwave-frequency offset from the ZFS."""

    tte: float                 # s
    oscillation_freq: float = 0.0   # Hz
    envelope_exponent: float = 2.0
    contrast: float = 1.0

    def __post_init__(self):
        if self.tte <= 0.0:
            raise ValueError("tte must be > 0")
        if self.oscillation_freq < 0.0:
            raise ValueError("oscillation_freq must be >= 0")
        if self.envelope_exponent <= 0.0:
            raise ValueError("envelope_exponent must be > 0")
        if not 0.0 <= self.contrast <= 1.0:
            raise ValueError("contrast must lie in [0, 1]")


def revival_period(b_gauss: float) -> float:
    """Echo revival period in microseconds for a field in gauss.

    2000 / (gamma_13C * B) with gamma_13C = 1.071 kHz/G.
    """
    if b_gauss <= 0.0:
        raise ValueError("b_gauss must be > 0")
    return 2000.0 / (GAMMA_C13_KHZ_PER_G * b_gauss)


def log_revival_comb(tau, period: float, width: float, count: int):
    """log of the Gaussian revival sum, stable between revivals."""
    tau = np.asarray(tau, dtype=float)
    centers = np.arange(count + 1) * period
    z = -(((tau[..., None] - centers) / width) ** 2)
    return logsumexp(z, axis=-1)


def log_hahn_envelope(tau, model: HahnEchoModel):
    """log of the normalized echo signal; exp() of this is hahn_echo_signal."""
    tau = np.asarray(tau, dtype=float)
    env = -((tau / model.t2) ** model.stretch)
    comb = log_revival_comb(
        tau, model.revival_period, model.revival_width, model.revival_count
    )
    comb0 = log_revival_comb(
        np.asarray(0.0), model.revival_period, model.revival_width, model.revival_count
    )
    return env + comb - comb0


def hahn_echo_signal(tau, model: HahnEchoModel):
    """Normalized echo amplitude at total free-evolution time tau."""
    tau = np.asarray(tau, dtype=float)
    if np.any(tau < 0.0):
        raise ValueError("tau must be >= 0")
    out = np.exp(log_hahn_envelope(tau, model))
    return out if out.ndim else float(out)


def ramsey_signal(tau, model: RamseyModel):
    """Normalized Ramsey fringe: baseline plus decaying hyperfine-beat comb."""
    tau = np.asarray(tau, dtype=float)
    if np.any(tau < 0.0):
        raise ValueError("tau must be >= 0")
    env = np.exp(-((tau / model.t2_star) ** model.envelope_exponent))
    comb = (
        np.cos(2.0 * np.pi * (model.detuning - model.hyperfine_splitting) * tau)
        + np.cos(2.0 * np.pi * model.detuning * tau)
        + np.cos(2.0 * np.pi * (model.detuning + model.hyperfine_splitting) * tau)
    ) / 3.0
    out = (1.0 - model.contrast) + model.contrast * env * comb
    return out if out.ndim else float(out)


def thermal_echo_signal(t, model: ThermalEchoModel):
    """Normalized thermal-echo signal at total free-evolution time t."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0.0):
        raise ValueError("t must be >= 0")
    env = np.exp(-((t / model.tte) ** model.envelope_exponent))
    osc = np.cos(2.0 * np.pi * model.oscillation_freq * t)
    out = (1.0 - model.contrast) + model.contrast * env * osc
    return out if out.ndim else float(out)


# angle between <111> axes: the field projection on the three off-axis
# NV families is |cos(109.47 deg)| = 1/3 of the aligned one
_OFF_AXIS_PROJECTION = abs(math.cos(math.radians(109.4712206)))


def cw_odmr_spectrum(
    freq_grid,
    zfs: float,
    b_gauss: float,
    contrast: float,
    linewidth: float,
):
    """CW ODMR spectrum with the field along one <111> axis.

    Returns 1 minus Lorentzian dips at the eight spin transitions of the
    four orientation families.  The aligned family carries 1/4 of the NV
    population; the three off-axis families overlap pairwise and carry
    the remaining 3/4.  linewidth is the dip FWHM in Hz.
    """
    if linewidth <= 0.0:
        raise ValueError("linewidth must be > 0")
    if not 0.0 <= contrast <= 1.0:
        raise ValueError("contrast must lie in [0, 1]")
    if b_gauss < 0.0:
        raise ValueError("b_gauss must be >= 0")
    f = np.asarray(freq_grid, dtype=float)
    if f.ndim != 1 or np.any(np.diff(f) < 0.0):
        raise ValueError("freq_grid must be a sorted 1-D array")

    zeeman = ELECTRON_ZEEMAN_HZ_PER_G * b_gauss
    lines = [
        (zfs - zeeman, 0.25),
        (zfs + zeeman, 0.25),
        (zfs - _OFF_AXIS_PROJECTION * zeeman, 0.75),
        (zfs + _OFF_AXIS_PROJECTION * zeeman, 0.75),
    ]
    half_width_sq = (linewidth / 2.0) ** 2
    spectrum = np.ones_like(f)
    for center, weight in lines:
        spectrum -= contrast * weight * half_width_sq / ((f - center) ** 2 + half_width_sq)
    return spectrum


def contrast_fade(temperature, contrast_300k: float, fade_per_k: float):
    """Linear loss of readout contrast with temperature, floored at zero."""
    t = np.asarray(temperature, dtype=float)
    out = np.clip(contrast_300k * (1.0 - fade_per_k * (t - 300.0)), 0.0, 1.0)
    return out if out.ndim else float(out)
