"""Population dynamics of the spin-1 ground state under single- and
double-quantum relaxation.

The three levels (|0>, |-1>, |+1>) exchange population with a symmetric
rate model: the SQ rate couples |0> to each of |+-1>, the DQ rate couples
|-1> to |+1>.  The generator is symmetric, so its eigendecomposition is
known analytically and the matrix exponential is evaluated exactly:

    eigenvalues   {0, -3*sq_rate, -(sq_rate + 2*dq_rate)}
    eigenvectors  (1,1,1)/sqrt3, (2,-1,-1)/sqrt6, (0,1,-1)/sqrt2

The closed-form decay signals used to fit relaxation curves follow from
the same eigenstructure and are cross-checked against the matrix
exponential in the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_POP_SUM_TOL = 1e-12
_POP_RANGE_TOL = 1e-9


@dataclass(frozen=True)
class RateParams:
    """Relaxation/dephasing rates at one temperature, all in s^-1.

    sq_rate: |0> <-> |+-1| transition rate (1/T1 = 3*sq_rate).
    dq_rate: |-1> <-> |+1> transition rate.
    dephasing_rate: pure dephasing rate of the SQ coherences.
    """

    sq_rate: float
    dq_rate: float
    dephasing_rate: float = 0.0

    def __post_init__(self):
        for name in ("sq_rate", "dq_rate", "dephasing_rate"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0.0:
                raise ValueError(f"{name} must be finite and >= 0, got {v}")

    @property
    def inv_t1(self) -> float:
        """Longitudinal relaxation rate 1/T1 = 3*sq_rate."""
        return 3.0 * self.sq_rate

    @property
    def lifetime_broadening(self) -> float:
        """Coherence decay rate (3*sq_rate + dq_rate)/2 caused by population
        relaxation alone."""
        return (3.0 * self.sq_rate + self.dq_rate) / 2.0


@dataclass(frozen=True)
class PopulationVector:
    """Populations of (|0>, |-1>, |+1>); must sum to one."""

    p0: float
    p_minus: float
    p_plus: float

    def __post_init__(self):
        vals = (self.p0, self.p_minus, self.p_plus)
        if abs(sum(vals) - 1.0) > _POP_SUM_TOL:
            raise ValueError(f"populations must sum to 1, got {sum(vals)!r}")
        for v in vals:
            if v < -_POP_RANGE_TOL or v > 1.0 + _POP_RANGE_TOL:
                raise ValueError(f"population {v!r} outside [0, 1]")

    def as_array(self) -> np.ndarray:
        return np.array([self.p0, self.p_minus, self.p_plus])

    @classmethod
    def from_array(cls, p: np.ndarray) -> "PopulationVector":
        return cls(float(p[0]), float(p[1]), float(p[2]))


GROUND = PopulationVector(1.0, 0.0, 0.0)
UNIFORM = PopulationVector(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0)

# orthonormal eigenbasis of the symmetric generator
_V0 = np.array([1.0, 1.0, 1.0]) / np.sqrt(3.0)
_V1 = np.array([2.0, -1.0, -1.0]) / np.sqrt(6.0)
_V2 = np.array([0.0, 1.0, -1.0]) / np.sqrt(2.0)


def rate_matrix(rates: RateParams) -> np.ndarray:
    """Population-transfer generator L (s^-1), columns summing to zero.

    dp/dt = L p with p = (p0, p-1, p+1).
    """
    w, g = rates.sq_rate, rates.dq_rate
    return np.array(
        [
            [-2.0 * w, w, w],
            [w, -w - g, g],
            [w, g, -w - g],
        ]
    )


def _propagate(p: np.ndarray, rates: RateParams, tau: float) -> np.ndarray:
    e1 = math.exp(-3.0 * rates.sq_rate * tau)
    e2 = math.exp(-(rates.sq_rate + 2.0 * rates.dq_rate) * tau)
    return (
        (_V0 @ p) * _V0
        + (_V1 @ p) * e1 * _V1
        + (_V2 @ p) * e2 * _V2
    )


def evolve_populations(
    initial: PopulationVector, rates: RateParams, tau: float
) -> PopulationVector:
    """Evolve populations for a time tau >= 0 (exact matrix exponential)."""
    if not math.isfinite(tau) or tau < 0.0:
        raise ValueError(f"tau must be finite and >= 0, got {tau}")
    return PopulationVector.from_array(_propagate(initial.as_array(), rates, tau))


def sq_relax_signal(sq_rate, tau):
    """Normalized SQ relaxation decay exp(-3*sq_rate*tau).

    Equals the population contrast (p0 - 1/3)/(2/3) after initializing
    in |0>.  Accepts scalars or arrays in tau.
    """
    if sq_rate < 0.0:
        raise ValueError(f"sq_rate must be >= 0, got {sq_rate}")
    tau = np.asarray(tau, dtype=float)
    if np.any(tau < 0.0):
        raise ValueError("tau must be >= 0")
    out = np.exp(-3.0 * sq_rate * tau)
    return out if out.ndim else float(out)


def dq_relax_signal(sq_rate, dq_rate, tau):
    """Normalized DQ relaxation decay exp(-(sq_rate + 2*dq_rate)*tau).

    Equals the population difference p-1 - p+1 after initializing in |-1>.
    """
    if sq_rate < 0.0 or dq_rate < 0.0:
        raise ValueError("rates must be >= 0")
    tau = np.asarray(tau, dtype=float)
    if np.any(tau < 0.0):
        raise ValueError("tau must be >= 0")
    out = np.exp(-(sq_rate + 2.0 * dq_rate) * tau)
    return out if out.ndim else float(out)
