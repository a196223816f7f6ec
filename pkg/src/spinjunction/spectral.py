"""Stationary two-particle kernel, its spectral function, rectification metrics.

For lead s the stationary kernel is

    Pi_s(tau) = -2i Re[ C_p(tau) g_p(tau) - C_h(tau) g_h(tau) ]

with g_h(tau) = tr(S~(tau) S^dag rho) and g_p(tau) = tr(S~^dag(tau) S rho), and
Pi = (Pi_L - Pi_R)/2.  The transform stored in a :class:`SpectralSeries` uses
the symmetric 1/sqrt(2 pi) convention,

    Pi(w) = (2 pi)^(-1/2) int_0^inf exp(i w tau - eta tau) Pi(tau) dtau,

and A(w) = sqrt(2 pi) Im Pi(w), which makes the long-time current
I = 8 gamma^2 A(0) with A(0) > 0 for transport from the up-polarized lead.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .bath import DEFAULT_DAMPING, CorrelationKernel, hp_transform, kernel_from_samples, lead_correlators
from .born import CurrentTrace, validate_density_matrix
from .errors import NumericalError, ValidationError
from .junction import SIDES, JunctionSpec, build_hs, lowering

SQRT_2PI = math.sqrt(2 * math.pi)
DENOMINATOR_TOL = 1e-14


@dataclass
class SpectralSeries:
    omega: np.ndarray
    A: np.ndarray
    method: str
    eta: float
    transform: Optional[np.ndarray] = field(default=None, repr=False)
    convention: str = "symmetric 1/sqrt(2 pi); A = sqrt(2 pi) Im Pi(w)"

    def at_zero(self) -> float:
        return float(np.interp(0.0, self.omega, self.A))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["omega", "A"])
            for om, a in zip(self.omega, self.A):
                w.writerow([repr(float(om)), repr(float(a))])


def _system_modes(rho: np.ndarray, junction: JunctionSpec, side: str):
    """g_h and g_p as sums of exponentials: lists of (coefficient, frequency)."""
    e, v = np.linalg.eigh(build_hs(junction).matrix)
    s = v.conj().T @ lowering(side).matrix @ v
    r = v.conj().T @ rho @ v
    nu = e[:, None] - e[None, :]
    # tr(S~(tau) X) = sum_ab exp(i(E_a - E_b) tau) S_ab X_ba
    ch = s * (s.conj().T @ r).T
    cp = s.conj().T * (s @ r).T
    return {"h": (ch.ravel(), nu.ravel()), "p": (cp.ravel(), nu.ravel())}


def system_correlators(rho, junction: JunctionSpec, side: str, tau) -> dict:
    tau = np.asarray(tau, dtype=float)
    out = {}
    for ch, (c, nu) in _system_modes(rho, junction, side).items():
        out[ch] = np.exp(1j * np.outer(tau, nu)) @ c
    return out


def _kernels(baths, kernels):
    if kernels is not None:
        return kernels
    return {side: lead_correlators(b) for side, b in zip(SIDES, baths)}


def stationary_pi_kernel(rho_ss, junction: JunctionSpec, baths, tau_grid,
                         kernels: Optional[dict] = None, side: Optional[str] = None) -> CorrelationKernel:
    """Pi(tau) on a uniform grid; ``side`` selects a single lead's Pi_s."""
    rho = validate_density_matrix(rho_ss, tol=1e-8)
    tau = np.asarray(tau_grid, dtype=float)
    steps = np.diff(tau)
    if len(tau) < 2 or tau[0] != 0 or np.ptp(steps) > 1e-9 * steps[0]:
        raise ValidationError("tau grid must be uniform and start at 0", ["tau_grid"])
    kernels = _kernels(baths, kernels)
    parts = {}
    for s in SIDES:
        g = system_correlators(rho, junction, s, tau)
        acc = np.zeros(len(tau))
        for ch, sign in (("p", 1.0), ("h", -1.0)):
            if kernels[s][ch].is_zero:
                continue
            acc += sign * (np.asarray(kernels[s][ch](tau)) * g[ch]).real
        parts[s] = -2j * acc
    vals = parts[side] if side else (parts["L"] - parts["R"]) / 2
    return kernel_from_samples(vals, float(steps[0]))


def spectral_function(kernel: CorrelationKernel, eta: float, omega_grid) -> SpectralSeries:
    """Damped one-sided transform of a tabulated kernel."""
    if kernel.values is None:
        raise ValidationError("spectral_function needs a tabulated kernel")
    omega = np.asarray(omega_grid, dtype=float)
    nyquist = math.pi / kernel.dt
    if np.max(np.abs(omega)) >= nyquist:
        raise ValidationError(f"frequency grid exceeds the Nyquist limit {nyquist:g} of the kernel grid",
                              ["omega_grid"])
    vals = kernel.values
    t = kernel.dt * np.arange(len(vals))
    w = np.full(len(t), kernel.dt)
    w[0] = w[-1] = kernel.dt / 2
    base = w * vals * np.exp(-eta * t)
    pi_w = np.exp(1j * np.outer(omega, t)) @ base / SQRT_2PI
    return SpectralSeries(omega, SQRT_2PI * pi_w.imag, "quadrature", eta, pi_w)


def _hp_side_transform(bath, channel):
    if bath.polarization == "up":
        return (lambda w, eta: hp_transform(w, bath, eta)) if channel == "h" else None
    return (lambda w, eta: hp_transform(w, bath, eta)) if channel == "p" else None


def spectral_function_closed(rho, junction: JunctionSpec, baths, omega_grid,
                             eta: float = DEFAULT_DAMPING, side: Optional[str] = None) -> SpectralSeries:
    """A(w) from the exponential decomposition of the system correlators.

    Each mode exp(i nu tau) shifts the closed-form bath transform to w + nu.
    """
    rho = validate_density_matrix(rho, tol=1e-8)
    omega = np.atleast_1d(np.asarray(omega_grid, dtype=float))
    per_side = {}
    for s, bath in zip(SIDES, baths):
        modes = _system_modes(rho, junction, s)
        a = np.zeros(len(omega))
        for ch, sign in (("h", 1.0), ("p", -1.0)):
            g = _hp_side_transform(bath, ch)
            if g is None:
                continue
            c, nu = modes[ch]
            keep = np.abs(c) > 0
            c, nu = c[keep], nu[keep]
            f_pos = g(omega[:, None] + nu[None], eta) @ c
            f_neg = g(-omega[:, None] + nu[None], eta) @ c
            a += sign * (f_pos + f_neg).real
        per_side[s] = a
    A = per_side[side] if side else (per_side["L"] - per_side["R"]) / 2
    return SpectralSeries(omega, A, "closed-form", eta)


def asymptotic_current(rho, junction: JunctionSpec, baths, eta: float = DEFAULT_DAMPING) -> float:
    """Long-time current 8 gamma^2 A(0)."""
    return 8 * junction.gamma**2 * float(spectral_function_closed(rho, junction, baths, [0.0], eta).A[0])


# ---------------------------------------------------------------------------
# rectification
# ---------------------------------------------------------------------------


@dataclass
class RectificationReport:
    delta: float
    I_plus: float
    I_minus: float
    R: float
    D: float
    T: Optional[float] = None
    method: str = ""

    def to_dict(self) -> dict:
        return {"delta": self.delta, "I_plus": self.I_plus, "I_minus": self.I_minus,
                "R": self.R, "D": self.D, "T": self.T, "method": self.method}

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def time_average(trace: CurrentTrace, T: float) -> float:
    if T <= 0 or T > trace.times[-1] + 1e-9:
        raise ValidationError(f"averaging window T={T} outside (0, {trace.times[-1]}]", ["T"])
    w = trace.window(T)
    return float(np.trapezoid(w.I, w.times) / T)


def rectification_from_values(I_plus: float, I_minus: float, delta: float = 0.0,
                              T: Optional[float] = None, method: str = "") -> RectificationReport:
    den = I_plus + I_minus
    if abs(den) < DENOMINATOR_TOL:
        raise NumericalError(f"rectification undefined: I(+Delta) + I(-Delta) = {den:.2e}")
    R = (I_plus - I_minus) / den
    # current in the favored direction times the magnitude of the asymmetry
    D = (I_plus if R >= 0 else I_minus) * abs(R)
    return RectificationReport(delta, float(I_plus), float(I_minus), float(R), float(D), T, method)


def rectification(trace_plus: CurrentTrace, trace_minus: CurrentTrace, T: float,
                  delta: float = 0.0) -> RectificationReport:
    """R and D from time-averaged currents of a (+Delta, -Delta) pair."""
    if len(trace_plus.times) != len(trace_minus.times) or not np.allclose(trace_plus.times, trace_minus.times):
        raise ValidationError("paired current traces must share a time grid")
    return rectification_from_values(time_average(trace_plus, T), time_average(trace_minus, T),
                                     delta, T, trace_plus.method)


def kubo_rectification_closed(J_S: float, Delta: float) -> float:
    """Delta / sqrt(J_S^2 + Delta^2); zero for a vanishing bias."""
    if Delta == 0:
        return 0.0
    return Delta / math.hypot(J_S, Delta)
