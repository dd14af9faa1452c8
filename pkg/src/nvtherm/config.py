"""Run configuration: schema, defaults, strict parsing, model builders.

The configuration is a nested key-value document (YAML on disk).
Unknown keys are rejected and every field has a documented default, so
a resolved configuration can be embedded verbatim in output files and
re-running from that embedded copy reproduces the output byte for byte.
Defaults describe the studied CVD sample: 125 ppb nitrogen, 2 ppb NV,
natural 13C, 50 G field along <111>.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields as dc_fields

import numpy as np
import yaml

from .constants import ELECTRON_ZEEMAN_HZ_PER_G, PPB_TO_CM3, US_TO_S
from .relaxation import RateParams
from .signals import (
    HahnEchoModel,
    RamseyModel,
    ThermalEchoModel,
    contrast_fade,
    revival_period,
)
from .sequence import PROTOCOLS, ProtocolSpec, SequenceModels
from .thermal import SpinSpeciesConfig, ThermalRateLaw, c13_species, p1_species
from .thermometry import DCalibration


class ConfigError(ValueError):
    """Invalid or unknown configuration content."""


# Default delay-grid ceilings per protocol (microseconds); chosen to span
# a few decay constants of each default curve at 300 K.
_DEFAULT_TAU_MAX_US = {
    "sq_relax": 12000.0,
    "dq_relax": 6000.0,
    "ramsey": 4.0,
    "hahn_echo": 160.0,
    "thermal_echo": 100.0,
}


def default_calibration_anchors() -> tuple[tuple[float, float], ...]:
    """ZFS-vs-temperature anchor table for the shipped calibration.

    Quadratic trend with local slope -132 kHz/K at 450 K steepening by
    -0.32 kHz/K^2, anchored every 25 K so that 450 K falls mid-segment
    and the segment slope there is exactly -132 kHz/K.
    """
    d450 = 2.870e9 - 16.2e6
    temps = np.arange(287.5, 612.5 + 1e-9, 25.0)
    anchors = []
    for t in temps:
        dt = t - 450.0
        anchors.append((float(t), float(d450 - 1e3 * (132.0 * dt + 0.16 * dt * dt))))
    return tuple(anchors)


@dataclass(frozen=True)
class SampleConfig:
    """Sample and static-field description."""

    nitrogen_ppb: float = 125.0
    nv_ppb: float = 2.0
    c13_abundance: float = 0.011
    b_field_gauss: float = 50.0
    ppb_to_cm3: float = PPB_TO_CM3

    def __post_init__(self):
        for name in ("nitrogen_ppb", "nv_ppb", "c13_abundance", "ppb_to_cm3"):
            if getattr(self, name) < 0:
                raise ConfigError(f"sample.{name} must be >= 0")
        if self.b_field_gauss <= 0:
            raise ConfigError("sample.b_field_gauss must be > 0")


@dataclass(frozen=True)
class RatesConfig:
    """Coefficients of the temperature laws for the relaxation rates."""

    inv_t1_t5: float = 4.4e-11     # K^-5 s^-1
    inv_t1_const: float = 237.0    # s^-1
    dq_t5: float = 0.85e-11
    dq_const: float = 215.0
    p1_lin: float = 5e-5           # K^-1 s^-1
    p1_t5: float = 1.1e-10

    def __post_init__(self):
        for f in dc_fields(self):
            if getattr(self, f.name) < 0:
                raise ConfigError(f"rates.{f.name} must be >= 0")


@dataclass(frozen=True)
class CoherenceConfig:
    """Phenomenological dephasing-envelope parameters.

    t2_anchors_us interpolates the echo coherence time linearly in
    temperature; t2_star and tte are temperature-independent.
    """

    t2_star_us: float = 1.5
    ramsey_envelope_exponent: float = 2.0
    hyperfine_hz: float = 2.16e6
    t2_anchors_us: tuple[tuple[float, float], ...] = ((300.0, 184.0), (600.0, 30.0))
    hahn_stretch: float = 1.5
    revival_width_us: float = 4.0
    tte_us: float = 50.0
    te_envelope_exponent: float = 2.0

    def __post_init__(self):
        if self.t2_star_us <= 0 or self.tte_us <= 0:
            raise ConfigError("coherence times must be > 0")
        if len(self.t2_anchors_us) < 1:
            raise ConfigError("coherence.t2_anchors_us needs at least one anchor")
        temps = [t for t, _ in self.t2_anchors_us]
        if sorted(temps) != temps or len(set(temps)) != len(temps):
            raise ConfigError("t2 anchor temperatures must be strictly increasing")
        if any(v <= 0 for _, v in self.t2_anchors_us):
            raise ConfigError("t2 anchor values must be > 0")


@dataclass(frozen=True)
class ReadoutConfig:
    """Photon yields and the linear contrast fade with temperature."""

    photons_bright: float = 0.25       # photons/shot for |0>
    contrast_300k: float = 0.04
    contrast_fade_per_k: float = 1.0 / 600.0   # contrast halves by 600 K
    init_polarization: float = 1.0

    def __post_init__(self):
        if self.photons_bright <= 0:
            raise ConfigError("readout.photons_bright must be > 0")
        if not 0 < self.contrast_300k <= 1:
            raise ConfigError("readout.contrast_300k must lie in (0, 1]")
        if self.contrast_fade_per_k < 0:
            raise ConfigError("readout.contrast_fade_per_k must be >= 0")
        if not 0 <= self.init_polarization <= 1:
            raise ConfigError("readout.init_polarization must lie in [0, 1]")


@dataclass(frozen=True)
class ProtocolConfig:
    """Which protocol to simulate and on what grid."""

    name: str = "sq_relax"
    temperature_k: float = 300.0
    tau_min_us: float = 0.0
    tau_max_us: float | None = None    # None -> per-protocol default
    points: int = 100
    shots: int | None = None           # None -> noiseless
    ramsey_detuning_hz: float = 1.0e6
    te_mw_offset_hz: float = 5.0e5     # mean MW frequency minus the ZFS

    def __post_init__(self):
        if self.name not in PROTOCOLS:
            raise ConfigError(f"protocol.name must be one of {PROTOCOLS}")
        if self.temperature_k <= 0:
            raise ConfigError("protocol.temperature_k must be > 0")
        if self.tau_min_us < 0:
            raise ConfigError("protocol.tau_min_us must be >= 0")
        if self.tau_max_us is not None and self.tau_max_us <= self.tau_min_us:
            raise ConfigError("protocol.tau_max_us must exceed tau_min_us")
        if self.points < 1:
            raise ConfigError("protocol.points must be >= 1")
        if self.shots is not None and self.shots < 1:
            raise ConfigError("protocol.shots must be >= 1 or inf")


@dataclass(frozen=True)
class SweepConfig:
    """Temperature range for the sweep and sensitivity commands."""

    t_min_k: float = 300.0
    t_max_k: float = 600.0
    steps: int = 12
    measured_t2_us_anchors: tuple[tuple[float, float], ...] | None = (
        (300.0, 184.0),
        (600.0, 30.0),
    )

    def __post_init__(self):
        if self.t_min_k >= self.t_max_k:
            raise ConfigError("sweep.t_min_k must be below sweep.t_max_k")
        if self.steps < 1:
            raise ConfigError("sweep.steps must be >= 1")


@dataclass(frozen=True)
class RunConfig:
    seed: int = 12345
    sample: SampleConfig = field(default_factory=SampleConfig)
    rates: RatesConfig = field(default_factory=RatesConfig)
    coherence: CoherenceConfig = field(default_factory=CoherenceConfig)
    readout: ReadoutConfig = field(default_factory=ReadoutConfig)
    calibration_anchors: tuple[tuple[float, float], ...] = field(
        default_factory=default_calibration_anchors
    )
    protocol: ProtocolConfig = field(default_factory=ProtocolConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)

    # -- serialization ------------------------------------------------

    def to_obj(self) -> dict:
        def pairs(t):
            return [[a, b] for a, b in t] if t is not None else None

        return {
            "seed": self.seed,
            "sample": _asdict(self.sample),
            "rates": _asdict(self.rates),
            "coherence": {
                **_asdict(self.coherence),
                "t2_anchors_us": pairs(self.coherence.t2_anchors_us),
            },
            "readout": _asdict(self.readout),
            "calibration_anchors": pairs(self.calibration_anchors),
            "protocol": _asdict(self.protocol),
            "sweep": {
                **_asdict(self.sweep),
                "measured_t2_us_anchors": pairs(self.sweep.measured_t2_us_anchors),
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_obj(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_obj(cls, obj: dict) -> "RunConfig":
        return _parse_config(obj)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        return cls.from_obj(json.loads(text))

    # -- resolution ----------------------------------------------------

    def resolved(self, **overrides) -> "RunConfig":
        """Fill per-protocol defaults and apply CLI overrides.

        Supported overrides: seed, temperature_k, shots, protocol_name.
        The result has no unresolved (None) grid fields, so it embeds
        reproducibly in output headers.
        """
        proto = _asdict(self.protocol)
        if "protocol_name" in overrides and overrides["protocol_name"] is not None:
            proto["name"] = overrides["protocol_name"]
        if "temperature_k" in overrides and overrides["temperature_k"] is not None:
            proto["temperature_k"] = float(overrides["temperature_k"])
        if "shots" in overrides and overrides["shots"] is not None:
            shots = overrides["shots"]
            proto["shots"] = None if shots in ("inf", float("inf")) else int(shots)
        if proto["tau_max_us"] is None:
            proto["tau_max_us"] = _DEFAULT_TAU_MAX_US[proto["name"]]
        seed = self.seed
        if "seed" in overrides and overrides["seed"] is not None:
            seed = int(overrides["seed"])
        return RunConfig(
            seed=seed,
            sample=self.sample,
            rates=self.rates,
            coherence=self.coherence,
            readout=self.readout,
            calibration_anchors=self.calibration_anchors,
            protocol=ProtocolConfig(**proto),
            sweep=self.sweep,
        )


def _asdict(obj) -> dict:
    return {f.name: getattr(obj, f.name) for f in dc_fields(obj)}


# ---------------------------------------------------------------------------
# strict parsing

def _expect_mapping(obj, path: str) -> dict:
    if not isinstance(obj, dict):
        raise ConfigError(f"{path}: expected a mapping, got {type(obj).__name__}")
    return obj


def _parse_pairs(obj, path: str):
    """Accept {T: value} mappings or [[T, value], ...] lists."""
    if obj is None:
        return None
    if isinstance(obj, dict):
        items = [(float(k), float(v)) for k, v in obj.items()]
    elif isinstance(obj, (list, tuple)):
        try:
            items = [(float(a), float(b)) for a, b in obj]
        except (TypeError, ValueError):
            raise ConfigError(f"{path}: expected [temperature, value] pairs") from None
    else:
        raise ConfigError(f"{path}: expected a mapping or list of pairs")
    return tuple(sorted(items))


def _parse_section(obj, cls, path: str, special=()):
    obj = _expect_mapping(obj, path)
    allowed = {f.name for f in dc_fields(cls)}
    unknown = set(obj) - allowed
    if unknown:
        raise ConfigError(f"{path}: unknown key(s) {sorted(unknown)}")
    kwargs = {}
    for key, value in obj.items():
        if key in special:
            kwargs[key] = _parse_pairs(value, f"{path}.{key}")
        else:
            kwargs[key] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{path}: {exc}") from None


def _parse_config(obj: dict) -> RunConfig:
    obj = _expect_mapping(obj, "config")
    allowed = {f.name for f in dc_fields(RunConfig)}
    unknown = set(obj) - allowed
    if unknown:
        raise ConfigError(f"config: unknown key(s) {sorted(unknown)}")
    base = RunConfig()
    kwargs: dict = {}
    if "seed" in obj:
        if not isinstance(obj["seed"], int) or isinstance(obj["seed"], bool):
            raise ConfigError("config.seed must be an integer")
        kwargs["seed"] = obj["seed"]
    if "sample" in obj:
        kwargs["sample"] = _parse_section(obj["sample"], SampleConfig, "sample")
    if "rates" in obj:
        kwargs["rates"] = _parse_section(obj["rates"], RatesConfig, "rates")
    if "coherence" in obj:
        kwargs["coherence"] = _parse_section(
            obj["coherence"], CoherenceConfig, "coherence", special=("t2_anchors_us",)
        )
    if "readout" in obj:
        kwargs["readout"] = _parse_section(obj["readout"], ReadoutConfig, "readout")
    if "calibration_anchors" in obj:
        anchors = _parse_pairs(obj["calibration_anchors"], "calibration_anchors")
        if anchors is None or len(anchors) < 2:
            raise ConfigError("calibration_anchors needs at least two anchors")
        kwargs["calibration_anchors"] = anchors
    if "protocol" in obj:
        proto = dict(_expect_mapping(obj["protocol"], "protocol"))
        if proto.get("shots") == "inf":
            proto["shots"] = None
        kwargs["protocol"] = _parse_section(proto, ProtocolConfig, "protocol")
    if "sweep" in obj:
        kwargs["sweep"] = _parse_section(
            obj["sweep"], SweepConfig, "sweep", special=("measured_t2_us_anchors",)
        )
    merged = {f.name: getattr(base, f.name) for f in dc_fields(RunConfig)}
    merged.update(kwargs)
    return RunConfig(**merged)


def load_config(path) -> RunConfig:
    """Load a YAML config file, or recover the config embedded in an
    nvtherm output file."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    if text.startswith("# nvtherm"):
        for line in text.splitlines():
            if line.startswith("# config-json = "):
                return RunConfig.from_json(line[len("# config-json = "):])
        raise ConfigError(f"{path}: nvtherm output file lacks an embedded config")
    try:
        obj = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML ({exc})") from None
    if obj is None:
        obj = {}
    return _parse_config(obj)


# ---------------------------------------------------------------------------
# builders

def rate_laws(config: RunConfig) -> tuple[ThermalRateLaw, ThermalRateLaw]:
    """(1/T1 law, DQ-rate law) from the config coefficients."""
    return (
        ThermalRateLaw(t5_coeff=config.rates.inv_t1_t5, const_coeff=config.rates.inv_t1_const),
        ThermalRateLaw(t5_coeff=config.rates.dq_t5, const_coeff=config.rates.dq_const),
    )


def bath_species(config: RunConfig) -> tuple[SpinSpeciesConfig, SpinSpeciesConfig]:
    """(P1, 13C) bath descriptions from the sample block."""
    p1 = p1_species(config.sample.nitrogen_ppb / 1e3)
    p1 = SpinSpeciesConfig(
        name=p1.name,
        concentration_ppm=p1.concentration_ppm,
        g_factor=p1.g_factor,
        magneton=p1.magneton,
        spin=p1.spin,
        relaxation_law=ThermalRateLaw(
            t5_coeff=config.rates.p1_t5, lin_coeff=config.rates.p1_lin
        ),
    )
    return p1, c13_species(config.sample.c13_abundance)


def rate_params_at(config: RunConfig, temperature: float) -> RateParams:
    t1_law, dq_law = rate_laws(config)
    return RateParams(
        sq_rate=t1_law.rate(temperature) / 3.0,
        dq_rate=dq_law.rate(temperature),
    )


def t2_at(config: RunConfig, temperature: float) -> float:
    """Echo coherence time in seconds, interpolated linearly in T."""
    anchors = config.coherence.t2_anchors_us
    temps = np.array([t for t, _ in anchors])
    vals = np.array([v for _, v in anchors])
    return float(np.interp(temperature, temps, vals)) * US_TO_S


def contrast_at(config: RunConfig, temperature: float) -> float:
    return contrast_fade(
        temperature, config.readout.contrast_300k, config.readout.contrast_fade_per_k
    )


def calibration(config: RunConfig) -> DCalibration:
    return DCalibration.from_anchors(config.calibration_anchors)


def protocol_spec(config: RunConfig) -> ProtocolSpec:
    """Delay grid and run parameters from the resolved protocol block."""
    p = config.protocol
    if p.tau_max_us is None:
        raise ConfigError("protocol.tau_max_us unresolved; call RunConfig.resolved()")
    tau = np.linspace(p.tau_min_us, p.tau_max_us, p.points) * US_TO_S
    return ProtocolSpec(
        name=p.name,
        tau_grid=tuple(float(t) for t in tau),
        temperature=p.temperature_k,
        shots=p.shots,
        seed=config.seed,
    )


def sequence_models_at(
    config: RunConfig, temperature: float, tau_max: float | None = None
) -> SequenceModels:
    """All interpreter inputs at one temperature.

    Microwave frequencies follow the protocol: the Ramsey drive sits
    ramsey_detuning_hz above the |0>-|-1> resonance, the thermal echo
    drives both transitions with mean frequency zfs + te_mw_offset_hz,
    everything else is resonant.
    """
    p = config.protocol
    if tau_max is None:
        tau_max_us = p.tau_max_us or _DEFAULT_TAU_MAX_US[p.name]
        tau_max = tau_max_us * US_TO_S
    rates = rate_params_at(config, temperature)
    contrast = contrast_at(config, temperature)
    zfs = calibration(config).zfs_at(temperature)
    zeeman = ELECTRON_ZEEMAN_HZ_PER_G * config.sample.b_field_gauss
    t_r = revival_period(config.sample.b_field_gauss) * US_TO_S
    hahn = HahnEchoModel(
        t2=t2_at(config, temperature),
        stretch=config.coherence.hahn_stretch,
        revival_period=t_r,
        revival_width=config.coherence.revival_width_us * US_TO_S,
        revival_count=int(np.ceil(tau_max / t_r)) + 1,
    )
    ramsey = RamseyModel(
        t2_star=config.coherence.t2_star_us * US_TO_S,
        detuning=p.ramsey_detuning_hz,
        hyperfine_splitting=config.coherence.hyperfine_hz,
        contrast=contrast,
        envelope_exponent=config.coherence.ramsey_envelope_exponent,
    )
    thermal = ThermalEchoModel(
        tte=config.coherence.tte_us * US_TO_S,
        oscillation_freq=abs(p.te_mw_offset_hz),
        envelope_exponent=config.coherence.te_envelope_exponent,
        contrast=contrast,
    )
    if p.name == "ramsey":
        mw_minus = (zfs - zeeman) + p.ramsey_detuning_hz
        mw_plus = zfs + zeeman
    elif p.name == "thermal_echo":
        mw_minus = (zfs + p.te_mw_offset_hz) - zeeman
        mw_plus = (zfs + p.te_mw_offset_hz) + zeeman
    else:
        mw_minus = zfs - zeeman
        mw_plus = zfs + zeeman
    return SequenceModels(
        rates=rates,
        ramsey=ramsey,
        hahn=hahn,
        thermal=thermal,
        mw_minus=mw_minus,
        mw_plus=mw_plus,
        zfs=zfs,
        zeeman=zeeman,
        readout_bright=config.readout.photons_bright,
        readout_dark=config.readout.photons_bright * (1.0 - contrast),
        init_polarization=config.readout.init_polarization,
    )
