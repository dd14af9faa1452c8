"""Curve container and its delimited-text serialization.

Files are tab-separated with a header row naming the columns (tau_us,
signal, optional sigma) and "#"-prefixed metadata lines of the form
"# key = value".  Times are microseconds on disk and seconds in memory.
Floats are written with repr, which round-trips losslessly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .constants import S_TO_US, US_TO_S


class CurveFormatError(ValueError):
    """Malformed curve file; the message carries the offending line number."""


@dataclass
class CurveData:
    """Sampled (tau, signal, sigma) triples plus acquisition metadata."""

    tau: np.ndarray                  # seconds
    signal: np.ndarray
    sigma: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.tau = np.asarray(self.tau, dtype=float)
        self.signal = np.asarray(self.signal, dtype=float)
        if self.sigma is not None:
            self.sigma = np.asarray(self.sigma, dtype=float)
        if self.tau.ndim != 1 or self.tau.size == 0:
            raise ValueError("tau must be a non-empty 1-D array")
        if self.signal.shape != self.tau.shape:
            raise ValueError("signal and tau must have equal length")
        if self.sigma is not None and self.sigma.shape != self.tau.shape:
            raise ValueError("sigma and tau must have equal length")
        if self.tau.size > 1 and np.any(np.diff(self.tau) <= 0.0):
            raise ValueError("tau must be strictly increasing")

    def to_text(self, extra_header: list[str] | None = None) -> str:
        lines = ["# nvtherm-curve v1"]
        for line in extra_header or []:
            lines.append(line)
        for key, value in self.meta.items():
            lines.append(f"# {key} = {_format_value(value)}")
        cols = ["tau_us", "signal"] + (["sigma"] if self.sigma is not None else [])
        lines.append("\t".join(cols))
        for i in range(self.tau.size):
            row = [repr(float(self.tau[i] * S_TO_US)), repr(float(self.signal[i]))]
            if self.sigma is not None:
                row.append(repr(float(self.sigma[i])))
            lines.append("\t".join(row))
        return "\n".join(lines) + "\n"


def _format_value(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse_meta_value(text: str):
    for caster in (int, float):
        try:
            return caster(text)
        except ValueError:
            pass
    return text


def parse_curve_text(text: str) -> CurveData:
    """Parse curve-file text; raises CurveFormatError with line numbers."""
    meta: dict = {}
    header: list[str] | None = None
    tau, signal, sigma = [], [], []
    have_sigma = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line.lstrip("#").strip()
            if "=" in body:
                key, value = body.split("=", 1)
                meta[key.strip()] = _parse_meta_value(value.strip())
            continue
        if header is None:
            header = line.split("\t") if "\t" in line else line.split()
            if header[:2] != ["tau_us", "signal"] or header not in (
                ["tau_us", "signal"],
                ["tau_us", "signal", "sigma"],
            ):
                raise CurveFormatError(
                    f"line {lineno}: expected header 'tau_us signal [sigma]', got {line!r}"
                )
            have_sigma = len(header) == 3
            continue
        fields = line.split("\t") if "\t" in line else line.split()
        if len(fields) != len(header):
            raise CurveFormatError(
                f"line {lineno}: expected {len(header)} columns, got {len(fields)}"
            )
        try:
            values = [float(f) for f in fields]
        except ValueError as exc:
            raise CurveFormatError(f"line {lineno}: non-numeric value ({exc})") from None
        if tau and values[0] * US_TO_S <= tau[-1]:
            raise CurveFormatError(
                f"line {lineno}: tau_us = {values[0]} is not strictly increasing"
            )
        tau.append(values[0] * US_TO_S)
        signal.append(values[1])
        if have_sigma:
            sigma.append(values[2])
    if header is None or not tau:
        raise CurveFormatError("no data rows found")
    return CurveData(
        tau=np.asarray(tau),
        signal=np.asarray(signal),
        sigma=np.asarray(sigma) if have_sigma else None,
        meta=meta,
    )


def write_curve(path, curve: CurveData, extra_header: list[str] | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(curve.to_text(extra_header))


def ingest_curve(path) -> CurveData:
    """Read and validate a curve file from disk."""
    with open(path, "r", encoding="utf-8") as fh:
        return parse_curve_text(fh.read())
