"""Zero-field-splitting calibration, temperature extraction, and the
shot-noise-limited sensitivity of the thermal-echo thermometer.

The ZFS D decreases with temperature; a piecewise-linear anchor table
maps D <-> T both ways.  The thermal-echo oscillation frequency
f = (mw_minus + mw_plus)/2 - D turns a fitted frequency into a D value
and hence a temperature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fitting import FitResult, fit_decaying_cosine


class CalibrationRangeError(ValueError):
    """Input outside the calibrated anchor range without extrapolation."""


@dataclass(frozen=True)
class DCalibration:
    """Piecewise-linear D(T) anchor table; D strictly decreasing in T."""

    temperatures: tuple[float, ...]   # K, strictly increasing
    zfs_values: tuple[float, ...]     # Hz, strictly decreasing

    def __post_init__(self):
        t = np.asarray(self.temperatures)
        d = np.asarray(self.zfs_values)
        if t.size < 2 or t.size != d.size:
            raise ValueError("need at least two (T, D) anchors of equal length")
        if np.any(np.diff(t) <= 0):
            raise ValueError("anchor temperatures must be strictly increasing")
        if np.any(np.diff(d) >= 0):
            raise ValueError("anchor D values must be strictly decreasing")

    @classmethod
    def from_anchors(cls, anchors) -> "DCalibration":
        pairs = sorted((float(t), float(d)) for t, d in anchors)
        return cls(tuple(t for t, _ in pairs), tuple(d for _, d in pairs))

    @classmethod
    def linear(
        cls, slope_hz_per_k: float, t_ref: float, d_ref: float,
        t_min: float = 300.0, t_max: float = 600.0,
    ) -> "DCalibration":
        """Single-segment calibration with constant slope (slope < 0)."""
        if slope_hz_per_k >= 0:
            raise ValueError("slope must be negative (D decreases with T)")
        lo, hi = min(t_min, t_ref), max(t_max, t_ref)
        return cls(
            (lo, hi),
            (d_ref + slope_hz_per_k * (lo - t_ref), d_ref + slope_hz_per_k * (hi - t_ref)),
        )

    @property
    def t_range(self) -> tuple[float, float]:
        return self.temperatures[0], self.temperatures[-1]

    def _segment(self, t: float) -> int:
        i = int(np.searchsorted(self.temperatures, t, side="right")) - 1
        return min(max(i, 0), len(self.temperatures) - 2)

    def local_slope(self, t: float) -> float:
        """dD/dT (Hz/K, negative) on the segment containing t."""
        i = self._segment(t)
        return (self.zfs_values[i + 1] - self.zfs_values[i]) / (
            self.temperatures[i + 1] - self.temperatures[i]
        )

    def zfs_at(self, temperature: float, extrapolate: bool = False) -> float:
        """D at the given temperature (piecewise-linear)."""
        lo, hi = self.t_range
        if not extrapolate and not lo <= temperature <= hi:
            raise CalibrationRangeError(
                f"temperature {temperature} K outside calibrated range [{lo}, {hi}] K"
            )
        i = self._segment(temperature)
        return self.zfs_values[i] + self.local_slope(temperature) * (
            temperature - self.temperatures[i]
        )

    def temperature_at(self, zfs: float, extrapolate: bool = False) -> float:
        """Exact inverse of zfs_at on the calibrated range."""
        d = np.asarray(self.zfs_values)
        if not extrapolate and not d[-1] <= zfs <= d[0]:
            raise CalibrationRangeError(
                f"D = {zfs} Hz outside calibrated range [{d[-1]}, {d[0]}] Hz"
            )
        # D decreasing: find segment with D_i >= zfs >= D_{i+1}
        i = int(np.searchsorted(-d, -zfs, side="right")) - 1
        i = min(max(i, 0), len(d) - 2)
        slope = (d[i + 1] - d[i]) / (self.temperatures[i + 1] - self.temperatures[i])
        return self.temperatures[i] + (zfs - d[i]) / slope


def zfs_at_temperature(temperature: float, cal: DCalibration, extrapolate=False) -> float:
    return cal.zfs_at(temperature, extrapolate)


def temperature_at_zfs(zfs: float, cal: DCalibration, extrapolate=False) -> float:
    return cal.temperature_at(zfs, extrapolate)


@dataclass(frozen=True)
class ReadoutBudget:
    """Photon counts per shot in the bright and dark spin state."""

    p0: float   # photons/shot, bright
    p1: float   # photons/shot, dark

    def __post_init__(self):
        if not self.p0 > self.p1 >= 0.0:
            raise ValueError(f"need p0 > p1 >= 0, got p0={self.p0}, p1={self.p1}")


def temperature_from_frequency(
    freq: float,
    mw_minus: float,
    mw_plus: float,
    cal: DCalibration,
    freq_error: float = 0.0,
) -> tuple[float, float]:
    """(temperature, error) from a thermal-echo oscillation frequency.

    D = (mw_minus + mw_plus)/2 - freq; the frequency error propagates
    through the local calibration slope.
    """
    zfs = (mw_minus + mw_plus) / 2.0 - freq
    temperature = cal.temperature_at(zfs)
    t_err = abs(freq_error / cal.local_slope(temperature))
    return temperature, t_err


def extract_temperature(
    tau,
    signal,
    mw_minus: float,
    mw_plus: float,
    cal: DCalibration,
    sigma=None,
    envelope_exponent: float = 2.0,
) -> tuple[float, float, FitResult]:
    """Fit the thermal-echo oscillation and convert it to a temperature.

    Returns (temperature, error, fit_result).  Fit failures propagate as
    FitError; a D value outside the calibration raises
    CalibrationRangeError.
    """
    res = fit_decaying_cosine(tau, signal, sigma=sigma, envelope_exponent=envelope_exponent)
    t, t_err = temperature_from_frequency(
        res.params["freq"], mw_minus, mw_plus, cal, freq_error=res.errors["freq"]
    )
    return t, t_err, res


def optimal_interrogation_time(tte: float, envelope_exponent: float) -> float:
    """Stationary point of exp(-(t/tte)^m) * sqrt(t): tte * (1/(2m))^(1/m)."""
    if envelope_exponent <= 0.0:
        raise ValueError("envelope_exponent must be > 0")
    if tte <= 0.0:
        raise ValueError("tte must be > 0")
    m = envelope_exponent
    return tte * (1.0 / (2.0 * m)) ** (1.0 / m)


def sensitivity(
    budget: ReadoutBudget,
    abs_slope_hz_per_k: float,
    tte: float,
    envelope_exponent: float,
    t: float,
) -> float:
    """Shot-noise-limited temperature sensitivity in K/sqrt(Hz).

    sqrt(2*(p0+p1))/(p0-p1) / (2*pi*|dD/dT|*exp(-(t/tte)^m)*sqrt(t)).
    """
    if t <= 0.0:
        raise ValueError("interrogation time must be > 0")
    if abs_slope_hz_per_k <= 0.0:
        raise ValueError("|dD/dT| must be > 0")
    photon_term = math.sqrt(2.0 * (budget.p0 + budget.p1)) / (budget.p0 - budget.p1)
    decay = math.exp(-((t / tte) ** envelope_exponent))
    return photon_term / (2.0 * math.pi * abs_slope_hz_per_k * decay * math.sqrt(t))


def sensitivity_vs_temperature(
    t_grid,
    cal: DCalibration,
    photons_bright: float,
    contrast_300k: float,
    contrast_fade_per_k: float,
    tte: float,
    envelope_exponent: float,
) -> list[dict[str, float]]:
    """Sensitivity across a temperature grid at the optimal interrogation time.

    The readout contrast fades linearly with temperature while tte is
    held constant; the local calibration slope sets |dD/dT| per point.
    Returns one record per temperature with the working quantities.
    """
    t_opt = optimal_interrogation_time(tte, envelope_exponent)
    rows = []
    for temp in np.asarray(t_grid, dtype=float):
        contrast = contrast_300k * (1.0 - contrast_fade_per_k * (temp - 300.0))
        if contrast <= 0.0:
            raise ValueError(f"contrast fades to zero at {temp} K")
        p1 = photons_bright * (1.0 - contrast)
        budget = ReadoutBudget(photons_bright, p1)
        slope = abs(cal.local_slope(temp))
        # range check via zfs_at (raises outside calibration)
        cal.zfs_at(float(temp))
        eta = sensitivity(budget, slope, tte, envelope_exponent, t_opt)
        rows.append(
            {
                "temperature": float(temp),
                "contrast": contrast,
                "p0": photons_bright,
                "p1": p1,
                "abs_slope_hz_per_k": slope,
                "t_opt": t_opt,
                "eta_k_per_sqrt_hz": eta,
            }
        )
    return rows
