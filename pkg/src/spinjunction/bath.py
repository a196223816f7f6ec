"""Lead correlation functions, decay rates and half-line Fourier transforms.

A polarized lead has one non-vanishing edge correlator, the *majority*
channel: <B^dag(t) B(0)> for an up-polarized lead and <B(t) B^dag(0)> for a
down-polarized one.  Both equal exp(4i Jz t) J0(4 J t) in the
Holstein-Primakoff (large bias) limit.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from .errors import HorizonWarning, NearSingularWarning, NumericalError, ValidationError

DEFAULT_DAMPING = 1e-3
DEFAULT_DT = 0.01
DEFAULT_HORIZON = 500.0


@dataclass(frozen=True)
class BathSpec:
    J: float = 1.0
    Jz: float = 0.0
    mu: float = 100.0
    beta: float = math.inf
    polarization: str = "up"

    def __post_init__(self):
        bad = []
        if not self.J > 0:
            bad.append("J")
        if not (self.beta > 0):
            bad.append("beta")
        if self.polarization not in ("up", "down"):
            bad.append("polarization")
        if bad:
            raise ValidationError(f"invalid BathSpec fields: {', '.join(bad)}", bad)

    @property
    def is_polarized(self) -> bool:
        """True when the edge occupation is a full band (the HP limit)."""
        return math.isinf(self.beta) and self.mu >= 4 * self.J

    def flipped(self) -> "BathSpec":
        pol = "down" if self.polarization == "up" else "up"
        return BathSpec(self.J, self.Jz, self.mu, self.beta, pol)


# ---------------------------------------------------------------------------
# Bessel J0
# ---------------------------------------------------------------------------

_SERIES_MAX = 8.0
_ASYMPTOTIC_MIN = 25.0


def _j0_series(x):
    q = -(x * x) / 4.0
    term = np.ones_like(x)
    total = np.ones_like(x)
    for k in range(1, 60):
        term = term * q / (k * k)
        total = total + term
    return total


def _j0_miller(x):
    # backward recurrence normalized with J0 + 2 sum J_2k = 1
    m = int(np.max(x)) + 40
    m += m % 2
    jp1 = np.zeros_like(x)
    jk = np.full_like(x, 1e-30)
    norm = np.zeros_like(x)
    j0 = jk
    for k in range(m, 0, -1):
        jm1 = (2.0 * k / x) * jk - jp1
        jp1, jk = jk, jm1
        if (k - 1) % 2 == 0 and k - 1 > 0:
            norm = norm + 2.0 * jk
        big = np.abs(jk) > 1e200
        if np.any(big):
            scale = np.where(big, 1e-200, 1.0)
            jk, jp1, norm = jk * scale, jp1 * scale, norm * scale
    j0 = jk
    return j0 / (j0 + norm)


def _j0_hankel(x):
    p = np.ones_like(x)
    q = np.zeros_like(x)
    coef = 1.0
    for k in range(1, 30):
        coef *= -((2 * k - 1) ** 2) / (k * 8.0)
        term = coef / x**k
        if k % 2 == 0:
            p = p + (-1) ** (k // 2) * term
        else:
            q = q + (-1) ** ((k - 1) // 2) * term
    chi = x - math.pi / 4
    return np.sqrt(2.0 / (math.pi * x)) * (p * np.cos(chi) - q * np.sin(chi))


def bessel_j0(x):
    """Zeroth-order Bessel function of the first kind, absolute accuracy ~1e-12."""
    xa = np.abs(np.asarray(x, dtype=float))
    out = np.empty_like(xa)
    s = xa <= _SERIES_MAX
    a = xa >= _ASYMPTOTIC_MIN
    m = ~(s | a)
    if np.any(s):
        out[s] = _j0_series(xa[s])
    if np.any(m):
        out[m] = _j0_miller(xa[m])
    if np.any(a):
        out[a] = _j0_hankel(xa[a])
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# Kernels
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CorrelationKernel:
    """A two-time correlation as a function of the time separation.

    Analytic kernels carry ``func``; tabulated kernels carry samples on the
    uniform grid ``k * dt``.  Calling the kernel evaluates it at arbitrary
    times (linear interpolation for tabulated kernels).
    """

    kind: str
    func: Optional[Callable] = field(default=None, compare=False)
    dt: Optional[float] = None
    values: Optional[np.ndarray] = field(default=None, compare=False)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.func is not None:
            return self.func(t)
        grid = self.dt * np.arange(len(self.values))
        if np.any(t > grid[-1] + 1e-12 * self.dt):
            raise ValidationError(f"kernel tabulated only up to t = {grid[-1]}")
        re = np.interp(t, grid, self.values.real)
        im = np.interp(t, grid, self.values.imag)
        return re + 1j * im

    @property
    def horizon(self) -> float:
        return math.inf if self.values is None else self.dt * (len(self.values) - 1)

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero"

    def sample(self, dt: float = DEFAULT_DT, T: float = DEFAULT_HORIZON) -> "CorrelationKernel":
        n = int(round(T / dt))
        t = dt * np.arange(n + 1)
        return CorrelationKernel("tabulated", None, dt, np.asarray(self(t), dtype=complex))

    def to_csv(self, path, dt: float = DEFAULT_DT, T: float = DEFAULT_HORIZON):
        tab = self if self.values is not None else self.sample(dt, T)
        t = tab.dt * np.arange(len(tab.values))
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "re", "im"])
            for ti, v in zip(t, tab.values):
                w.writerow([repr(float(ti)), repr(float(v.real)), repr(float(v.imag))])


def zero_kernel() -> CorrelationKernel:
    return CorrelationKernel("zero", lambda t: np.zeros(np.shape(t), dtype=complex))


def kernel_from_samples(values, dt: float) -> CorrelationKernel:
    return CorrelationKernel("tabulated", None, float(dt), np.asarray(values, dtype=complex))


def read_kernel_csv(path) -> CorrelationKernel:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    dt = float(data[1, 0] - data[0, 0]) if len(data) > 1 else 1.0
    return kernel_from_samples(data[:, 1] + 1j * data[:, 2], dt)


def corr_xxz_hp(t, spec: BathSpec):
    """exp(4i Jz t) J0(4 J t): majority edge correlator in the HP limit."""
    t = np.asarray(t, dtype=float)
    return np.exp(4j * spec.Jz * t) * bessel_j0(4.0 * spec.J * t)


def hp_kernel(spec: BathSpec) -> CorrelationKernel:
    return CorrelationKernel("analytic-bessel", lambda t: corr_xxz_hp(t, spec))


def fermi(omega, mu: float, beta: float):
    omega = np.asarray(omega, dtype=float)
    if math.isinf(beta):
        return np.where(omega < mu, 1.0, np.where(omega == mu, 0.5, 0.0))
    x = np.clip(beta * (omega - mu), -700.0, 700.0)
    return 1.0 / (1.0 + np.exp(x))


def _scalar_fermi(mu: float, beta: float) -> Callable[[float], float]:
    if math.isinf(beta):
        return lambda w: 1.0 if w < mu else (0.5 if w == mu else 0.0)

    def occ(w):
        x = beta * (w - mu)
        if x > 700:
            return 0.0
        if x < -700:
            return 1.0
        return 1.0 / (1.0 + math.exp(x))

    return occ


def _band_integral(t, J, weight, sign, breakpoint=None, limit=400):
    """(1/pi) int_0^pi weight(4J cos th) exp(i sign 4J t cos th) dth.

    The substitution w = 4J cos th removes the inverse-square-root band edge
    singularity of the density of states.
    """
    a = 4.0 * J * t

    def re(th):
        return weight(4 * J * math.cos(th)) * math.cos(sign * a * math.cos(th))

    def im(th):
        return weight(4 * J * math.cos(th)) * math.sin(sign * a * math.cos(th))

    pts = [breakpoint] if breakpoint is not None else None
    r, er = integrate.quad(re, 0.0, math.pi, points=pts, limit=limit, epsabs=1e-13, epsrel=1e-12)
    i, ei = integrate.quad(im, 0.0, math.pi, points=pts, limit=limit, epsabs=1e-13, epsrel=1e-12)
    err = math.hypot(er, ei) / math.pi
    if err > 1e-8:
        raise NumericalError(f"band quadrature did not converge at t={t}: error estimate {err:.2e}")
    return complex(r, i) / math.pi


def corr_xx_numeric(t, spec: BathSpec, channel: str = "majority"):
    """Edge correlator from the free-fermion band integral with Fermi occupation.

    ``majority`` gives <B^dag(t)B(0)> for an up-polarized lead (<B(t)B^dag(0)>
    for a down-polarized one) including the HP phase exp(4i Jz t); ``minority``
    gives the complementary channel, which vanishes for a fully polarized lead.
    """
    if channel not in ("majority", "minority"):
        raise ValidationError(f"unknown channel {channel!r}")
    J, mu, beta = spec.J, spec.mu, spec.beta
    occ = _scalar_fermi(mu, beta)
    if channel == "majority":
        weight = occ
        sign, phase = 1.0, 4.0 * spec.Jz
    else:
        # HP expands around the majority state; no Jz phase is attached here
        weight = lambda w: 1.0 - occ(w)  # noqa: E731
        sign, phase = -1.0, 0.0
    brk = None
    if math.isinf(beta) and -4 * J < mu < 4 * J:
        brk = math.acos(mu / (4 * J))
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(ts < 0):
        raise ValidationError("correlations are evaluated for t >= 0")
    out = np.array([_band_integral(ti, J, weight, sign, brk) * np.exp(1j * phase * ti) for ti in ts])
    return out if np.ndim(t) else complex(out[0])


def lead_correlators(spec: BathSpec, kind: str = "hp") -> dict:
    """Return ``{"h": <B^dag(t)B>, "p": <B(t)B^dag>}`` kernels for one lead.

    ``kind="hp"`` uses the Bessel closed form (zero minority channel);
    ``kind="quadrature"`` tabulates the band integrals on the default grid.
    """
    if kind == "hp":
        major, minor = hp_kernel(spec), zero_kernel()
    elif kind == "quadrature":
        t = DEFAULT_DT * np.arange(int(DEFAULT_HORIZON / DEFAULT_DT) + 1)
        major = kernel_from_samples(corr_xx_numeric(t, spec), DEFAULT_DT)
        minor = zero_kernel() if spec.is_polarized else kernel_from_samples(
            corr_xx_numeric(t, spec, "minority"), DEFAULT_DT)
    else:
        raise ValidationError(f"unknown kernel kind {kind!r}")
    if spec.polarization == "up":
        return {"h": major, "p": minor}
    return {"h": minor, "p": major}


# ---------------------------------------------------------------------------
# Rates and transforms
# ---------------------------------------------------------------------------


def near_singular(omega, spec: BathSpec, epsilon: float) -> bool:
    return bool(np.any(np.abs(np.abs(4 * spec.Jz + np.asarray(omega)) - 4 * spec.J) <= epsilon))


def hp_transform(omega, spec: BathSpec, epsilon: float):
    """int_0^inf exp(i w t - eps t) exp(4i Jz t) J0(4Jt) dt in closed form.

    Equals i[(4Jz + w + i eps)^2 - (4J)^2]^(-1/2) on the branch with
    non-negative real part, written here as [(4J)^2 - (4Jz + w + i eps)^2]^(-1/2)
    with the principal root.
    """
    z = 4 * spec.Jz + np.asarray(omega, dtype=complex) + 1j * epsilon
    return 1.0 / np.sqrt((4 * spec.J) ** 2 - z * z)


def decay_rate(omega, spec: BathSpec, gamma: float, epsilon: float = DEFAULT_DAMPING):
    """gamma^2 times the half-line transform of the HP majority correlator."""
    if not epsilon > 0:
        raise ValidationError("the regulator epsilon must be positive")
    if near_singular(omega, spec, epsilon):
        warnings.warn(
            f"decay rate evaluated within {epsilon:g} of the band edge (Jz={spec.Jz}, omega={omega})",
            NearSingularWarning, stacklevel=2)
    out = gamma**2 * hp_transform(omega, spec, epsilon)
    if np.any(out.real < -1e-12 * np.abs(out)):
        raise NumericalError("decay rate acquired a negative real part")
    return out if np.ndim(out) else complex(out)


def half_fourier(kernel: CorrelationKernel, omega, damping: float = DEFAULT_DAMPING,
                 T: Optional[float] = None, dt: float = DEFAULT_DT, tail_tol: Optional[float] = None):
    """Trapezoidal int_0^T exp(i w t) exp(-damping t) kernel(t) dt.

    Tabulated kernels are integrated on their own grid up to their horizon;
    analytic kernels are sampled with step ``dt`` up to ``T``.
    """
    if kernel.is_zero:
        return np.zeros(np.shape(omega), dtype=complex) if np.ndim(omega) else 0j
    if kernel.values is not None:
        step = kernel.dt
        vals = kernel.values
        if T is not None:
            vals = vals[: int(round(T / step)) + 1]
    else:
        if T is None:
            T = 10.0 / damping if damping > 0 else DEFAULT_HORIZON
        step = dt
        vals = np.asarray(kernel(dt * np.arange(int(round(T / dt)) + 1)), dtype=complex)
    n = len(vals)
    horizon = step * (n - 1)
    t = step * np.arange(n)
    w = np.full(n, step)
    w[0] = w[-1] = step / 2
    base = w * vals * np.exp(-damping * t)
    if damping * horizon < 10:
        warnings.warn(f"half-line transform horizon T*damping = {damping * horizon:.3g} < 10",
                      HorizonWarning, stacklevel=2)
    om = np.atleast_1d(np.asarray(omega, dtype=float))
    out = np.empty(len(om), dtype=complex)
    for i, wv in enumerate(om):
        out[i] = np.dot(np.exp(1j * wv * t), base)
    if tail_tol is not None:
        tail_window = max(1, n // 10)
        env = np.max(np.abs(vals[-tail_window:])) * math.exp(-damping * horizon)
        bound = env / max(damping, 1e-300)
        if bound > tail_tol * max(np.max(np.abs(out)), 1e-300):
            raise NumericalError(
                f"horizon T={horizon:g} too short: tail bound {bound:.2e} exceeds tolerance")
    return out if np.ndim(omega) else complex(out[0])


def a_xxz_zero(spec: BathSpec) -> float:
    """Zero-frequency lead spectral function Re{[2 pi (J^2 - Jz^2)]^(-1/2)} / 2."""
    d = spec.J**2 - spec.Jz**2
    if d == 0:
        warnings.warn("lead spectral function diverges at the Heisenberg point", NearSingularWarning,
                      stacklevel=2)
        return math.inf
    return (1.0 / np.sqrt(complex(2 * math.pi * d))).real / 2
