"""Declarative pulse sequences and the ensemble-state interpreter.

A protocol run is a pair of element timelines (signal and reference
branch) per delay value.  The state is a 3x3 density-matrix surrogate
over (|0>, |-1>, |+1>): microwave pulses act as ideal SU(2) rotations on
the addressed transition, waits evolve populations with the exact rate
model while coherences pick up deterministic detuning phases, the
lifetime-broadening decay, and a protocol-specific bath envelope.

Envelope bookkeeping: each wait carries the segment of total
free-evolution time it represents, and multiplies coherences by
envelope(to)/envelope(from).  Chained across an echo's two halves this
telescopes to the closed-form envelope of the full delay, so the
noiseless simulation reproduces the registered analytic models exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .curves import CurveData
from .relaxation import RateParams, _propagate
from .signals import HahnEchoModel, RamseyModel, ThermalEchoModel, log_hahn_envelope

PROTOCOLS = ("ramsey", "thermal_echo", "hahn_echo", "sq_relax", "dq_relax")
_PROTOCOL_SALT = {name: 0xA1 + i for i, name in enumerate(PROTOCOLS)}

_LEVEL = {"minus": 1, "plus": 2}  # index of the |-1> / |+1> level


@dataclass(frozen=True)
class PulseElement:
    kind: str                      # laser_init | mw_pulse | wait | readout
    transition: str = "minus"      # for mw_pulse
    angle: float = 0.0             # rotation angle, radians
    phase: float = 0.0             # rotation axis phase, radians
    duration: float = 0.0          # for wait, seconds
    envelope: str = "none"         # none | ramsey | hahn | thermal
    env_from: float = 0.0          # segment of total delay covered by this wait
    env_to: float = 0.0
    polarization: float = 1.0      # for laser_init

    def __post_init__(self):
        if self.kind not in ("laser_init", "mw_pulse", "wait", "readout"):
            raise ValueError(f"unknown element kind {self.kind!r}")
        if self.kind == "mw_pulse":
            if self.transition not in _LEVEL:
                raise ValueError(f"unknown transition {self.transition!r}")
            if not 0.0 < self.angle <= 2.0 * math.pi:
                raise ValueError("pulse angle must lie in (0, 2*pi]")
        if self.kind == "wait":
            if self.duration < 0.0:
                raise ValueError("wait duration must be >= 0")
            if self.envelope not in ("none", "ramsey", "hahn", "thermal"):
                raise ValueError(f"unknown envelope kind {self.envelope!r}")
        if self.kind == "laser_init" and not 0.0 <= self.polarization <= 1.0:
            raise ValueError("polarization must lie in [0, 1]")


@dataclass
class SpinEnsembleState:
    """Density-matrix surrogate: populations plus three coherences."""

    rho: np.ndarray = field(
        default_factory=lambda: np.diag([1.0, 0.0, 0.0]).astype(complex)
    )

    @property
    def populations(self) -> np.ndarray:
        return self.rho.diagonal().real.copy()

    @property
    def coherences(self) -> dict[str, complex]:
        return {
            "zero_minus": complex(self.rho[0, 1]),
            "zero_plus": complex(self.rho[0, 2]),
            "minus_plus": complex(self.rho[1, 2]),
        }

    def check(self, tol: float = 1e-9) -> None:
        """Invariant hook: trace one, populations in range, coherence bound."""
        p = self.populations
        if abs(p.sum() - 1.0) > 1e-9:
            raise RuntimeError(f"population sum drifted to {p.sum()!r}")
        if np.any(p < -1e-9):
            raise RuntimeError(f"negative population {p}")
        for (i, j) in ((0, 1), (0, 2), (1, 2)):
            if abs(self.rho[i, j]) ** 2 > p[i] * p[j] + tol:
                raise RuntimeError(
                    f"coherence bound violated on ({i},{j}): "
                    f"|c|^2={abs(self.rho[i, j])**2} > {p[i] * p[j]}"
                )


@dataclass(frozen=True)
class ProtocolSpec:
    """One protocol run: delay grid, temperature, shot count, seed."""

    name: str
    tau_grid: tuple[float, ...]
    temperature: float = 300.0
    shots: int | None = None       # None -> noiseless expectation values
    seed: int = 0

    def __post_init__(self):
        if self.name not in PROTOCOLS:
            raise ValueError(f"unknown protocol {self.name!r}; expected one of {PROTOCOLS}")
        tau = np.asarray(self.tau_grid, dtype=float)
        if tau.size == 0 or np.any(tau < 0.0) or np.any(np.diff(tau) <= 0.0):
            raise ValueError("tau_grid must be non-empty, >= 0, strictly increasing")
        if self.shots is not None and self.shots < 1:
            raise ValueError("shots must be >= 1 (or None for noiseless)")


@dataclass(frozen=True)
class SequenceModels:
    """Everything the interpreter needs at one temperature."""

    rates: RateParams
    ramsey: RamseyModel
    hahn: HahnEchoModel
    thermal: ThermalEchoModel
    mw_minus: float                # Hz, drive frequency of |0>-|-1>
    mw_plus: float                 # Hz, drive frequency of |0>-|+1>
    zfs: float                     # Hz, zero-field splitting at this temperature
    zeeman: float                  # Hz, Zeeman shift of the |+-1> levels
    readout_bright: float          # photons/shot for |0>
    readout_dark: float            # photons/shot for |+-1>
    init_polarization: float = 1.0

    @property
    def detuning_minus(self) -> float:
        return self.mw_minus - (self.zfs - self.zeeman)

    @property
    def detuning_plus(self) -> float:
        return self.mw_plus - (self.zfs + self.zeeman)


def _unitary(transition: str, angle: float, phase: float) -> np.ndarray:
    """SU(2) rotation embedded on the addressed transition."""
    j = _LEVEL[transition]
    u = np.eye(3, dtype=complex)
    half = angle / 2.0
    u[0, 0] = math.cos(half)
    u[j, j] = math.cos(half)
    u[0, j] = -1j * np.exp(-1j * phase) * math.sin(half)
    u[j, 0] = -1j * np.exp(1j * phase) * math.sin(half)
    return u


def _ramsey_envelope(t: float, model: RamseyModel) -> float:
    env = math.exp(-((t / model.t2_star) ** model.envelope_exponent))
    comb = (1.0 + 2.0 * math.cos(2.0 * math.pi * model.hyperfine_splitting * t)) / 3.0
    return env * comb


def _envelope_factor(element: PulseElement, models: SequenceModels) -> float:
    """envelope(to)/envelope(from) for the wait's protocol kind."""
    if element.envelope == "none":
        return 1.0
    if element.envelope == "ramsey":
        start = _ramsey_envelope(element.env_from, models.ramsey) if element.env_from else 1.0
        return _ramsey_envelope(element.env_to, models.ramsey) / start
    if element.envelope == "thermal":
        m = models.thermal
        return math.exp(
            -((element.env_to / m.tte) ** m.envelope_exponent)
            + ((element.env_from / m.tte) ** m.envelope_exponent)
        )
    # hahn: evaluate in log space so near-zero comb values between
    # revivals cannot underflow the ratio
    log_to = float(log_hahn_envelope(np.asarray(element.env_to), models.hahn))
    log_from = float(log_hahn_envelope(np.asarray(element.env_from), models.hahn))
    return math.exp(log_to - log_from)


def step(
    state: SpinEnsembleState,
    element: PulseElement,
    models: SequenceModels,
    validate: bool = False,
) -> SpinEnsembleState:
    """Apply one sequence element and return the new state."""
    rho = state.rho.copy()
    if element.kind == "laser_init":
        pol = element.polarization * models.init_polarization
        rho = pol * np.diag([1.0, 0.0, 0.0]).astype(complex) + (1.0 - pol) * np.eye(
            3, dtype=complex
        ) / 3.0
    elif element.kind == "mw_pulse":
        u = _unitary(element.transition, element.angle, element.phase)
        rho = u @ rho @ u.conj().T
    elif element.kind == "wait":
        dt = element.duration
        pops = _propagate(rho.diagonal().real, models.rates, dt)
        # rotating-frame level phases: coherence (a,b) advances at eps_a - eps_b
        eps = np.array([0.0, -models.detuning_minus, -models.detuning_plus])
        lifetime_sq = math.exp(-models.rates.lifetime_broadening * dt)
        lifetime_dq = math.exp(-(models.rates.sq_rate + models.rates.dq_rate) * dt)
        env = _envelope_factor(element, models)
        phase = lambda a, b: np.exp(-2j * math.pi * (eps[a] - eps[b]) * dt)
        new = np.zeros_like(rho)
        new[0, 0], new[1, 1], new[2, 2] = pops
        new[0, 1] = rho[0, 1] * phase(0, 1) * lifetime_sq * env
        new[0, 2] = rho[0, 2] * phase(0, 2) * lifetime_sq * env
        new[1, 2] = rho[1, 2] * phase(1, 2) * lifetime_dq * env
        new[1, 0] = new[0, 1].conjugate()
        new[2, 0] = new[0, 2].conjugate()
        new[2, 1] = new[1, 2].conjugate()
        rho = new
    elif element.kind == "readout":
        pass  # terminal; expected counts are computed by expected_photons
    out = SpinEnsembleState(rho)
    if validate:
        out.check()
    return out


def expected_photons(state: SpinEnsembleState, models: SequenceModels) -> float:
    p = state.populations
    return models.readout_bright * p[0] + models.readout_dark * (p[1] + p[2])


def run_timeline(
    timeline: list[PulseElement],
    models: SequenceModels,
    validate: bool = False,
) -> float:
    """Run one branch from scratch and return its expected photons/shot."""
    state = SpinEnsembleState()
    for element in timeline:
        state = step(state, element, models, validate=validate)
    return expected_photons(state, models)


def _coherence_branches(
    prefix: list[PulseElement],
    suffix_transition: str,
    sig_phase: float,
) -> tuple[list[PulseElement], list[PulseElement]]:
    half = math.pi / 2.0
    sig = prefix + [
        PulseElement("mw_pulse", transition=suffix_transition, angle=half, phase=sig_phase),
        PulseElement("readout"),
    ]
    ref = prefix + [
        PulseElement(
            "mw_pulse", transition=suffix_transition, angle=half, phase=sig_phase + math.pi
        ),
        PulseElement("readout"),
    ]
    return sig, ref


def build_protocol(
    spec: ProtocolSpec,
) -> list[tuple[list[PulseElement], list[PulseElement]]]:
    """Signal/reference element timelines for every delay in the grid.

    ramsey:       pi/2(-) . wait(tau) . pi/2(-)
    thermal_echo: pi/2(-) . wait(tau/2) . pi(-) pi(+) pi(-) . wait(tau/2) . pi/2(+)
                  (the swap block exchanges the |-1> and |+1> roles so
                  magnetic detuning cancels while ZFS shifts accumulate)
    hahn_echo:    pi/2(-) . wait(tau/2) . pi(-) . wait(tau/2) . pi/2(-)
    sq_relax:     init . wait(tau) . readout, against an unpolarized reference
    dq_relax:     init . pi(-) . wait(tau) . {pi(-) | pi(+)} . readout

    The reference branch of the coherence protocols phase-inverts the
    final pi/2 for common-mode rejection.
    """
    pi = math.pi
    half = pi / 2.0
    init = PulseElement("laser_init")
    pairs = []
    for tau in spec.tau_grid:
        if spec.name == "ramsey":
            prefix = [
                init,
                PulseElement("mw_pulse", transition="minus", angle=half),
                PulseElement(
                    "wait", duration=tau, envelope="ramsey", env_from=0.0, env_to=tau
                ),
            ]
            # signal branch keeps the first pulse's phase; reference inverts it
            sig, ref = _coherence_branches(prefix, "minus", 0.0)
        elif spec.name == "hahn_echo":
            prefix = [
                init,
                PulseElement("mw_pulse", transition="minus", angle=half),
                PulseElement(
                    "wait", duration=tau / 2.0, envelope="hahn", env_from=0.0, env_to=tau / 2.0
                ),
                PulseElement("mw_pulse", transition="minus", angle=pi),
                PulseElement(
                    "wait", duration=tau / 2.0, envelope="hahn", env_from=tau / 2.0, env_to=tau
                ),
            ]
            sig, ref = _coherence_branches(prefix, "minus", 0.0)
        elif spec.name == "thermal_echo":
            prefix = [
                init,
                PulseElement("mw_pulse", transition="minus", angle=half),
                PulseElement(
                    "wait", duration=tau / 2.0, envelope="thermal", env_from=0.0, env_to=tau / 2.0
                ),
                PulseElement("mw_pulse", transition="minus", angle=pi),
                PulseElement("mw_pulse", transition="plus", angle=pi),
                PulseElement("mw_pulse", transition="minus", angle=pi),
                PulseElement(
                    "wait", duration=tau / 2.0, envelope="thermal", env_from=tau / 2.0, env_to=tau
                ),
            ]
            sig, ref = _coherence_branches(prefix, "plus", -half)
        elif spec.name == "sq_relax":
            sig = [init, PulseElement("wait", duration=tau), PulseElement("readout")]
            ref = [PulseElement("laser_init", polarization=0.0), PulseElement("readout")]
        elif spec.name == "dq_relax":
            prefix = [
                init,
                PulseElement("mw_pulse", transition="minus", angle=pi),
                PulseElement("wait", duration=tau),
            ]
            sig = prefix + [
                PulseElement("mw_pulse", transition="minus", angle=pi),
                PulseElement("readout"),
            ]
            ref = prefix + [
                PulseElement("mw_pulse", transition="plus", angle=pi),
                PulseElement("readout"),
            ]
        else:  # unreachable behind ProtocolSpec validation
            raise ValueError(f"unknown protocol {spec.name!r}")
        pairs.append((sig, ref))
    return pairs


def _branch_rates_at(tau: float, spec: ProtocolSpec, models: SequenceModels):
    probe = ProtocolSpec(
        name=spec.name,
        tau_grid=(tau,),
        temperature=spec.temperature,
        shots=None,
        seed=spec.seed,
    )
    sig, ref = build_protocol(probe)[0]
    return run_timeline(sig, models), run_timeline(ref, models)


def simulate(spec: ProtocolSpec, models: SequenceModels) -> CurveData:
    """Simulate one protocol and return the normalized contrast curve.

    The curve is the branch difference (reference minus signal)
    normalized by its noiseless value at zero delay, so it equals the
    registered closed-form model of the protocol.  With finite shots,
    photon counts are Poisson-distributed with a counter-based generator
    keyed on (seed, protocol, delay index): results do not depend on
    evaluation order.
    """
    r_sig0, r_ref0 = _branch_rates_at(0.0, spec, models)
    d0 = r_ref0 - r_sig0
    if abs(d0) < 1e-15:
        raise ValueError("zero readout contrast between branches at tau = 0")

    pairs = build_protocol(spec)
    signal = np.empty(len(spec.tau_grid))
    sigma = np.empty(len(spec.tau_grid)) if spec.shots is not None else None
    salt = _PROTOCOL_SALT[spec.name]
    for i, (sig_tl, ref_tl) in enumerate(pairs):
        r_sig = run_timeline(sig_tl, models)
        r_ref = run_timeline(ref_tl, models)
        if spec.shots is None:
            signal[i] = (r_ref - r_sig) / d0
        else:
            rng = np.random.Generator(
                np.random.Philox(counter=[0, 0, 0, i], key=[spec.seed, salt])
            )
            k_sig = rng.poisson(spec.shots * r_sig)
            k_ref = rng.poisson(spec.shots * r_ref)
            signal[i] = (k_ref - k_sig) / (spec.shots * d0)
            sigma[i] = math.sqrt(max(k_ref + k_sig, 1.0)) / (spec.shots * abs(d0))

    meta = {
        "protocol": spec.name,
        "temperature_K": spec.temperature,
        "seed": spec.seed,
        "shots": spec.shots if spec.shots is not None else "inf",
        "sq_rate_per_s": models.rates.sq_rate,
        "dq_rate_per_s": models.rates.dq_rate,
        "mw_minus_hz": models.mw_minus,
        "mw_plus_hz": models.mw_plus,
        "zero_delay_rate_diff": d0,
    }
    return CurveData(
        tau=np.asarray(spec.tau_grid, dtype=float),
        signal=signal,
        sigma=sigma,
        meta=meta,
    )
