"""Nonlinear least-squares engine and the curve-model registry.

The solver is a damped Gauss-Newton (Levenberg-Marquardt) iteration with
Marquardt diagonal scaling, central-difference Jacobians, and optional
parameter transforms that keep positive-only quantities positive.  Model
functions take a time array and a parameter dict and return the model
curve; the protocol-specific wrappers bundle each model with its
initialization recipe so curves can be fitted by name.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .signals import log_revival_comb


class FitError(RuntimeError):
    """Raised when a fit cannot be set up or initialized."""


@dataclass
class FitResult:
    params: dict[str, float]
    errors: dict[str, float]
    residual_norm: float
    converged: bool
    iterations: int
    covariance: np.ndarray
    param_names: list[str]
    message: str = ""
    cost_history: list[float] = field(default_factory=list)

    def summary(self) -> str:
        lines = [
            f"converged = {self.converged}",
            f"iterations = {self.iterations}",
            f"residual_norm = {self.residual_norm:.6e}",
        ]
        for name in self.param_names:
            lines.append(f"{name} = {self.params[name]:.10g} +- {self.errors[name]:.4g}")
        if self.message:
            lines.append(f"note = {self.message}")
        return "\n".join(lines)


# ---------------------------------------------------------------------------
# parameter transforms: LM runs unconstrained in internal x-space

def _to_internal(value: float, transform) -> float:
    if transform is None:
        return value
    if transform == "log":
        if value <= 0.0:
            raise FitError(f"log-transformed parameter must start > 0, got {value}")
        return math.log(value)
    lo, hi = transform
    if not lo < value < hi:
        raise FitError(f"initial value {value} outside bounds ({lo}, {hi})")
    return math.asin(2.0 * (value - lo) / (hi - lo) - 1.0)


def _to_external(x: float, transform) -> float:
    if transform is None:
        return x
    if transform == "log":
        return math.exp(x)
    lo, hi = transform
    return lo + (hi - lo) * (math.sin(x) + 1.0) / 2.0


def _jacobian_factor(x: float, transform) -> float:
    """d(external)/d(internal) at x."""
    if transform is None:
        return 1.0
    if transform == "log":
        return math.exp(x)
    lo, hi = transform
    return (hi - lo) * math.cos(x) / 2.0


def lm_fit(
    model,
    tau: np.ndarray,
    y: np.ndarray,
    init: dict[str, float],
    sigma: np.ndarray | None = None,
    transforms: dict[str, object] | None = None,
    max_iter: int = 500,
    step_tol: float = 1e-10,
    grad_tol: float = 1e-12,
) -> FitResult:
    """Minimize sum(((y - model(tau, params)) / sigma)^2) from init.

    transforms maps a parameter name to "log" (positive-only) or a
    (lo, hi) tuple (bounded); unlisted parameters are unconstrained.
    Non-convergence returns the best point with converged=False rather
    than raising.
    """
    tau = np.asarray(tau, dtype=float)
    y = np.asarray(y, dtype=float)
    names = list(init.keys())
    k = len(names)
    if tau.size < k + 1:
        raise FitError(f"need at least {k + 1} points to fit {k} parameters")
    if sigma is not None:
        sigma = np.asarray(sigma, dtype=float)
        if np.any(sigma <= 0.0):
            raise FitError("sigma values must be > 0")
        weights = 1.0 / sigma
    else:
        weights = np.ones_like(y)
    transforms = transforms or {}
    trans = [transforms.get(n) for n in names]
    x = np.array([_to_internal(init[n], t) for n, t in zip(names, trans)])
    if not np.all(np.isfinite(x)):
        raise FitError("initial guess is not finite")

    def external(xv: np.ndarray) -> dict[str, float]:
        return {n: _to_external(v, t) for n, v, t in zip(names, xv, trans)}

    def residual(xv: np.ndarray) -> np.ndarray:
        return (y - np.asarray(model(tau, external(xv)), dtype=float)) * weights

    def jacobian(xv: np.ndarray) -> np.ndarray:
        J = np.empty((tau.size, k))
        for j in range(k):
            h = 1e-6 * max(abs(xv[j]), 1e-2)
            xp, xm = xv.copy(), xv.copy()
            xp[j] += h
            xm[j] -= h
            J[:, j] = (residual(xp) - residual(xm)) / (2.0 * h)
        return J

    r = residual(x)
    cost = float(r @ r)
    history = [cost]
    lam = 1e-3
    converged = False
    message = ""
    iterations = 0
    J = jacobian(x)

    for iterations in range(1, max_iter + 1):
        g = J.T @ r
        if np.max(np.abs(g)) < grad_tol:
            converged = True
            iterations -= 1
            break
        A = J.T @ J
        diag = np.diag(A).copy()
        diag[diag <= 0.0] = max(float(diag.max()), 1.0) * 1e-14
        accepted = False
        for _ in range(60):
            try:
                step = np.linalg.solve(A + lam * np.diag(diag), g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            if not np.all(np.isfinite(step)):
                lam *= 10.0
                continue
            x_new = x - step
            r_new = residual(x_new)
            cost_new = float(r_new @ r_new)
            if math.isfinite(cost_new) and cost_new <= cost:
                accepted = True
                break
            lam *= 10.0
        if not accepted:
            message = "damping exhausted (singular or non-descending step)"
            break
        rel_step = np.linalg.norm(step) / max(np.linalg.norm(x), 1e-30)
        x, r, cost = x_new, r_new, cost_new
        history.append(cost)
        lam = max(lam / 3.0, 1e-14)
        J = jacobian(x)
        if rel_step < step_tol:
            converged = True
            break
    else:
        message = f"no convergence within {max_iter} iterations"

    # covariance in external parameter space, scaled by residual variance
    dof = max(tau.size - k, 1)
    s2 = cost / dof
    A = J.T @ J
    try:
        cov_x = np.linalg.inv(A) * s2
    except np.linalg.LinAlgError:
        cov_x = np.full((k, k), np.nan)
        if not message:
            message = "singular normal matrix at solution"
        converged = False
    T = np.diag([_jacobian_factor(v, t) for v, t in zip(x, trans)])
    cov = T @ cov_x @ T
    errors = {n: float(math.sqrt(max(cov[i, i], 0.0))) for i, n in enumerate(names)}

    return FitResult(
        params=external(x),
        errors=errors,
        residual_norm=math.sqrt(cost),
        converged=converged,
        iterations=iterations,
        covariance=cov,
        param_names=names,
        message=message,
        cost_history=history,
    )


# ---------------------------------------------------------------------------
# initialization helpers

def _tail_offset(y: np.ndarray) -> float:
    return float(np.median(y[-max(3, y.size // 10):]))


def _loglinear_rate(tau: np.ndarray, y: np.ndarray) -> float:
    """Decay-rate guess from a log-linear regression of the early decay."""
    offset = _tail_offset(y)
    amp = y[0] - offset
    if abs(amp) < 1e-30:
        return 0.0
    z = (y - offset) / amp
    idx = np.flatnonzero(z > 0.05)
    if idx.size < 2:
        return 0.0
    slope = np.polyfit(tau[idx], np.log(z[idx]), 1)[0]
    return max(-float(slope), 0.0)


def dominant_frequency(tau: np.ndarray, y: np.ndarray) -> tuple[float, float, bool]:
    """(frequency, peak-to-median ratio, at_edge) of the strongest non-DC line.

    Uses a zero-padded FFT of the mean-subtracted signal on a uniform
    grid, with parabolic refinement of the peak bin.  at_edge flags a
    peak sitting at the lowest admissible bin, the signature of an
    oscillation-free decaying record.
    """
    tau = np.asarray(tau, dtype=float)
    y = np.asarray(y, dtype=float)
    dt = np.diff(tau)
    if dt.size < 3 or np.any(dt <= 0):
        raise FitError("need a strictly increasing time grid")
    if not np.allclose(dt, dt[0], rtol=1e-6):
        raise FitError("spectral initialization needs a uniform time grid")
    z = y - y.mean()
    n = 8 * len(z)
    spec = np.abs(np.fft.rfft(z, n=n))
    freqs = np.fft.rfftfreq(n, d=float(dt[0]))
    # skip bins below one cycle per record (envelope-dominated)
    lo = max(int(round(n / len(z))), 1)
    if spec.size <= lo + 2:
        raise FitError("record too short for spectral initialization")
    body = spec[lo:]
    i = int(np.argmax(body)) + lo
    med = float(np.median(body))
    snr = float(spec[i] / med) if med > 0 else 0.0
    at_edge = i == lo
    if i + 1 >= spec.size:
        return float(freqs[i]), snr, at_edge
    a, b, c = spec[i - 1], spec[i], spec[i + 1]
    denom = a - 2 * b + c
    shift = 0.5 * (a - c) / denom if denom != 0 else 0.0
    return float(freqs[i] + shift * (freqs[1] - freqs[0])), snr, at_edge


# ---------------------------------------------------------------------------
# registered model functions (plain formulas, safe at any iterate)

def sq_relax_model(tau, p):
    return p["amplitude"] * np.exp(-3.0 * p["sq_rate"] * tau) + p["offset"]


def dq_relax_model(tau, p):
    return p["amplitude"] * np.exp(-p["rate"] * tau) + p["offset"]


def hahn_echo_model(tau, p, lifetime_rate: float = 0.0):
    tau = np.asarray(tau, dtype=float)
    count = int(np.ceil(np.max(tau) / p["revival_period"])) + 1
    log_env = -((tau / p["t2"]) ** p["stretch"]) - lifetime_rate * tau
    comb = log_revival_comb(tau, p["revival_period"], p["revival_width"], count)
    comb0 = log_revival_comb(np.asarray(0.0), p["revival_period"], p["revival_width"], count)
    return p["amplitude"] * np.exp(log_env + comb - comb0) + p["offset"]


def decaying_cosine_model(tau, p, envelope_exponent: float = 2.0):
    env = np.exp(-((tau / p["decay_time"]) ** envelope_exponent))
    return (
        p["amplitude"] * env * np.cos(2.0 * np.pi * p["freq"] * tau + p["phase"])
        + p["offset"]
    )


def ramsey_comb_model(tau, p, hyperfine: float = 2.16e6, envelope_exponent: float = 2.0):
    env = np.exp(-((tau / p["t2_star"]) ** envelope_exponent))
    comb = (
        np.cos(2.0 * np.pi * (p["detuning"] - hyperfine) * tau)
        + np.cos(2.0 * np.pi * p["detuning"] * tau)
        + np.cos(2.0 * np.pi * (p["detuning"] + hyperfine) * tau)
    ) / 3.0
    return p["amplitude"] * env * comb + p["offset"]


# ---------------------------------------------------------------------------
# protocol-specific fits

def fit_sq_relaxation(tau, y, sigma=None) -> FitResult:
    """Fit A*exp(-3*sq_rate*tau) + c and return sq_rate with its error."""
    tau = np.asarray(tau, dtype=float)
    y = np.asarray(y, dtype=float)
    rate = _loglinear_rate(tau, y)
    init = {
        "amplitude": float(y[0] - _tail_offset(y)),
        "sq_rate": rate / 3.0 if rate > 0 else 0.1 / max(tau[-1], 1e-12),
        "offset": _tail_offset(y),
    }
    return lm_fit(sq_relax_model, tau, y, init, sigma=sigma)


def fit_dq_relaxation(tau, y, sq_rate: float, sigma=None) -> FitResult:
    """Fit A*exp(-r*tau) + c; report dq_rate = (r - sq_rate)/2.

    If the fitted rate falls below sq_rate beyond its error bar, the DQ
    rate is clamped at zero and the result is annotated.
    """
    tau = np.asarray(tau, dtype=float)
    y = np.asarray(y, dtype=float)
    rate = _loglinear_rate(tau, y)
    init = {
        "amplitude": float(y[0] - _tail_offset(y)),
        "rate": rate if rate > 0 else 0.1 / max(tau[-1], 1e-12),
        "offset": _tail_offset(y),
    }
    res = lm_fit(dq_relax_model, tau, y, init, sigma=sigma)
    r_fit = res.params["rate"]
    r_err = res.errors["rate"]
    dq = (r_fit - sq_rate) / 2.0
    if r_fit < sq_rate - r_err:
        dq = 0.0
        res.message = (
            "dq_rate clamped at 0: fitted rate below the supplied sq_rate"
        )
    res.params["dq_rate"] = dq
    res.errors["dq_rate"] = r_err / 2.0
    res.param_names.append("dq_rate")
    return res


def fit_hahn_echo(
    tau,
    y,
    sigma=None,
    revival_period_init: float | None = None,
    fix_revival_period: bool = False,
    lifetime_rate: float = 0.0,
) -> FitResult:
    """Fit the revival-comb echo model: t2, stretch, revival period/width.

    The revival period is held fixed (not fitted) when the record spans
    fewer than two revivals.  lifetime_rate, when nonzero, multiplies
    the model by the known exp(-lifetime_rate*tau) population-relaxation
    factor so the fitted t2 isolates pure dephasing.
    """
    tau = np.asarray(tau, dtype=float)
    y = np.asarray(y, dtype=float)
    if revival_period_init is None or revival_period_init <= 0:
        raise FitError("revival_period_init is required (use revival_period(B))")
    tr = float(revival_period_init)
    if tau.max() / tr < 2.0:
        fix_revival_period = True

    amp = float(y[0])
    # envelope guess through the revival maxima
    centers = np.arange(0, int(np.floor(tau.max() / tr)) + 1) * tr
    peak_vals, peak_pos = [], []
    for c in centers:
        sel = np.abs(tau - c) < tr / 4.0
        if np.any(sel):
            j = int(np.argmax(y[sel]))
            peak_vals.append(float(y[sel][j]))
            peak_pos.append(float(tau[sel][j]))
    peak_vals = np.asarray(peak_vals)
    peak_pos = np.asarray(peak_pos)
    good = peak_vals > 0.05 * abs(amp) if amp != 0 else peak_vals > 0
    if good.sum() >= 2 and amp > 0:
        slope = np.polyfit(peak_pos[good], np.log(peak_vals[good] / amp), 1)[0]
        eff_rate = max(-float(slope) - lifetime_rate, 1e-3 / tau.max())
        t2_init = min(1.0 / eff_rate, 100.0 * tau.max())
    else:
        t2_init = tau.max() / 2.0

    init = {"amplitude": amp, "t2": t2_init, "stretch": 1.5}
    transforms: dict[str, object] = {"t2": "log", "stretch": (0.5, 4.0)}
    if fix_revival_period:
        def model(t, p, _tr=tr):
            q = dict(p)
            q["revival_period"] = _tr
            return hahn_echo_model(t, q, lifetime_rate=lifetime_rate)
    else:
        init["revival_period"] = tr
        transforms["revival_period"] = "log"
        def model(t, p):
            return hahn_echo_model(t, p, lifetime_rate=lifetime_rate)
    init["revival_width"] = tr / 8.0
    init["offset"] = 0.0
    transforms["revival_width"] = "log"
    res = lm_fit(model, tau, y, init, sigma=sigma, transforms=transforms)
    if fix_revival_period:
        res.params["revival_period"] = tr
        res.errors["revival_period"] = 0.0
        res.param_names.append("revival_period")
        res.message = (res.message + "; " if res.message else "") + "revival_period held fixed"
    return res


def fit_decaying_cosine(
    tau, y, sigma=None, envelope_exponent: float = 2.0, min_snr: float = 4.0
) -> FitResult:
    """Fit A*exp(-(t/T)^m)*cos(2*pi*f*t + phi) + c with spectral f init.

    Raises FitError when no spectral peak stands above the noise floor
    (for example on oscillation-free data).
    """
    tau = np.asarray(tau, dtype=float)
    y = np.asarray(y, dtype=float)
    f0, snr, at_edge = dominant_frequency(tau, y)
    if at_edge or snr < min_snr or f0 <= 0.0:
        raise FitError(
            f"no resolvable oscillation (peak ratio {snr:.2f}, at_edge={at_edge})"
        )
    dt = float(tau[1] - tau[0])
    if f0 * dt > 0.25:
        raise FitError(
            f"fewer than 4 samples per period at the initial frequency {f0:.3g} Hz"
        )
    init = {
        "amplitude": float((y.max() - y.min()) / 2.0),
        "freq": f0,
        "decay_time": float(tau.max() / 2.0),
        "phase": 0.0,
        "offset": float(y.mean()),
    }
    transforms = {"freq": "log", "decay_time": "log"}

    def model(t, p):
        return decaying_cosine_model(t, p, envelope_exponent=envelope_exponent)

    return lm_fit(model, tau, y, init, sigma=sigma, transforms=transforms)


def fit_ramsey_comb(
    tau,
    y,
    sigma=None,
    hyperfine: float = 2.16e6,
    envelope_exponent: float = 2.0,
    detuning_init: float | None = None,
) -> FitResult:
    """Fit the hyperfine-triplet Ramsey model; returns t2_star and detuning."""
    tau = np.asarray(tau, dtype=float)
    y = np.asarray(y, dtype=float)
    if detuning_init is None:
        detuning_init, _, _ = dominant_frequency(tau, y)
    init = {
        "amplitude": float(y.max() - y.mean()),
        "t2_star": float(tau.max() / 3.0),
        "detuning": float(detuning_init),
        "offset": float(y.mean()),
    }
    transforms = {"t2_star": "log"}

    def model(t, p):
        return ramsey_comb_model(
            t, p, hyperfine=hyperfine, envelope_exponent=envelope_exponent
        )

    return lm_fit(model, tau, y, init, sigma=sigma, transforms=transforms)
