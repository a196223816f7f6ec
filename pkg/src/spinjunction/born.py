"""Time-nonlocal Born master equation and the Born/Kubo current formulas.

All quantities are kept in the interaction picture with respect to H_S.  For
each lead i the dissipator is written through two memory integrals

    M_h(t) = int_0^t dt' <B^dag(t) B(t')> S~^dag(t') rho~(t')
    M_p(t) = int_0^t dt' <B(t) B^dag(t')> S~(t') rho~(t')

so that d rho~/dt = -4 gamma^2 sum_i (D_i + D_i^dag) with
D_i = [S~_i(t), M_h] + [S~_i^dag(t), M_p], and the current entering the
junction from lead i is I_i = 16 gamma^2 Re tr(S~_i(t) M_h - S~_i^dag(t) M_p).
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.signal import fftconvolve

from .bath import BathSpec, CorrelationKernel, lead_correlators
from .errors import NumericalError, PositivityWarning, ValidationError
from .junction import SIDES, JunctionSpec, build_hs, check_weak_coupling, lowering

TRACE_ABORT = 1e-6
NEGATIVITY_FLAG = -1e-6


@dataclass
class StateTrajectory:
    times: np.ndarray
    states: np.ndarray
    kind: str = "density"
    picture: str = "interaction"
    metadata: dict = field(default_factory=dict)


@dataclass
class MemoryHistory(StateTrajectory):
    """Born trajectory plus everything needed to evaluate currents afterwards."""

    s_tilde: dict = field(default_factory=dict, repr=False)
    kernels: dict = field(default_factory=dict, repr=False)
    memory: dict = field(default_factory=dict, repr=False)
    gamma: float = 0.0
    hs: Optional[np.ndarray] = field(default=None, repr=False)

    def schrodinger_states(self) -> np.ndarray:
        e, v = np.linalg.eigh(self.hs)
        out = np.empty_like(self.states)
        for n, t in enumerate(self.times):
            u = (v * np.exp(-1j * e * t)) @ v.conj().T
            out[n] = u @ self.states[n] @ u.conj().T
        return out


@dataclass
class CurrentTrace:
    times: np.ndarray
    I_L: np.ndarray
    I_R: np.ndarray
    method: str

    @property
    def I(self) -> np.ndarray:  # noqa: E743
        return (self.I_L - self.I_R) / 2

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "I_L", "I_R", "I"])
            for row in zip(self.times, self.I_L, self.I_R, self.I):
                w.writerow([repr(float(x)) for x in row])

    def window(self, T: float) -> "CurrentTrace":
        keep = self.times <= T + 1e-12
        return CurrentTrace(self.times[keep], self.I_L[keep], self.I_R[keep], self.method)


def validate_density_matrix(rho, tol: float = 1e-10) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (4, 4):
        raise ValidationError(f"junction density matrix must be 4x4, got {rho.shape}")
    if np.max(np.abs(rho - rho.conj().T)) > tol:
        raise ValidationError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1) > tol:
        raise ValidationError("density matrix trace differs from 1")
    if np.linalg.eigvalsh(rho).min() < -tol:
        raise ValidationError("density matrix has negative eigenvalues")
    return rho


def _kernels_for(baths, kernels):
    if kernels is not None:
        return kernels
    if len(baths) != 2:
        raise ValidationError("a (left, right) pair of BathSpec is required")
    return {side: lead_correlators(b) for side, b in zip(SIDES, baths)}


def _sample(kernel: CorrelationKernel, t: np.ndarray, damping: float):
    if kernel.is_zero:
        return None
    vals = np.asarray(kernel(t), dtype=complex)
    if damping:
        vals = vals * np.exp(-damping * t)
    return vals


def interaction_operators(hs: np.ndarray, times: np.ndarray) -> dict:
    """S~_i(t) = e^{iH_S t} S_i e^{-iH_S t} for both sides on the whole grid."""
    e, v = np.linalg.eigh(hs)
    out = {}
    for side in SIDES:
        s_eig = v.conj().T @ lowering(side).matrix @ v
        phase = np.exp(1j * (e[:, None] - e[None, :])[None] * times[:, None, None])
        out[side] = np.einsum("ab,nbc,cd->nad", v, phase * s_eig[None], v.conj().T)
    return out


def integrate_born(rho0, junction: JunctionSpec, baths, dt: float, T: float,
                   kernels: Optional[dict] = None, damping: float = 0.0,
                   memory_cutoff: Optional[float] = None) -> MemoryHistory:
    """Integrate the Born master equation on the grid t_n = n dt, 0 <= t_n <= T.

    The memory integrals use the trapezoid rule over the full stored history;
    time stepping is Heun's predictor-corrector.  ``kernels`` overrides the HP
    lead correlators with ``{"L": {"h": k, "p": k}, "R": {...}}``; ``damping``
    multiplies every kernel by exp(-damping t).  ``memory_cutoff`` drops history
    older than the given time, which is only sensible for damped kernels.
    """
    rho0 = validate_density_matrix(rho0)
    baths = tuple(baths)
    check_weak_coupling(junction, baths)
    scale = max([b.J for b in baths] + [abs(junction.J_S), abs(junction.Delta), abs(junction.Jz_sys)])
    if dt > 0.02 / scale * (1 + 1e-9):
        raise ValidationError(f"dt={dt} exceeds 0.02/max(J, J_S, Delta, Jz_sys) = {0.02 / scale:g}", ["dt"])
    kernels = _kernels_for(baths, kernels)
    n_steps = int(round(T / dt))
    times = dt * np.arange(n_steps + 1)
    window = n_steps + 1 if memory_cutoff is None else max(1, int(round(memory_cutoff / dt)))
    hs = build_hs(junction).matrix
    s_t = interaction_operators(hs, times)
    g2 = junction.gamma**2

    chans = []  # (side, channel, kernel samples, history operator array)
    for side in SIDES:
        for ch in ("h", "p"):
            c = _sample(kernels[side][ch], times, damping)
            if c is not None:
                chans.append((side, ch, c))

    rho = np.empty((n_steps + 1, 4, 4), dtype=complex)
    rho[0] = rho0
    # A_k = S~^dag(t_k) rho~(t_k) for h channels and S~(t_k) rho~(t_k) for p channels
    hist = {(side, ch): np.zeros((n_steps + 1, 16), dtype=complex) for side, ch, _ in chans}
    mem = {(side, ch): np.zeros((n_steps + 1, 4, 4), dtype=complex) for side, ch, _ in chans}

    def left_factor(side, ch, n):
        s = s_t[side][n]
        return s.conj().T if ch == "h" else s

    def record(n, r):
        for side, ch, _ in chans:
            hist[(side, ch)][n] = (left_factor(side, ch, n) @ r).ravel()

    def rhs(n, partial, r_end):
        """Right-hand side at step n given history sums over k < n and rho~_n."""
        d = np.zeros((4, 4), dtype=complex)
        ms = {}
        for side, ch, c in chans:
            m = partial[(side, ch)]
            if n:
                m = m + 0.5 * dt * c[0] * (left_factor(side, ch, n) @ r_end)
            ms[(side, ch)] = m
            s = s_t[side][n]
            op = s if ch == "h" else s.conj().T
            d += op @ m - m @ op
        return -4 * g2 * (d + d.conj().T), ms

    def history_sum(n):
        """Trapezoid weights for k = 0..n-1 of the integral ending at t_n."""
        out = {}
        for side, ch, c in chans:
            if n == 0:
                out[(side, ch)] = np.zeros((4, 4), dtype=complex)
                continue
            k0 = max(0, n - window)
            w = c[n - k0:0:-1].copy()  # c(t_n - t_k) for k = k0..n-1
            if k0 == 0:
                w[0] *= 0.5
            out[(side, ch)] = dt * (w @ hist[(side, ch)][k0:n]).reshape(4, 4)
        return out

    record(0, rho0)
    f_prev, m0 = rhs(0, history_sum(0), rho0)
    for key, m in m0.items():
        mem[key][0] = m
    for n in range(n_steps):
        partial = history_sum(n + 1)
        pred = rho[n] + dt * f_prev
        f_pred, _ = rhs(n + 1, partial, pred)
        new = rho[n] + 0.5 * dt * (f_prev + f_pred)
        new = 0.5 * (new + new.conj().T)
        drift = abs(np.trace(new) - 1)
        if drift > TRACE_ABORT:
            raise NumericalError(f"trace drift {drift:.2e} at t={times[n + 1]:g}")
        rho[n + 1] = new
        record(n + 1, new)
        f_prev, ms = rhs(n + 1, partial, new)
        for key, m in ms.items():
            mem[key][n + 1] = m

    min_eig = np.linalg.eigvalsh(rho).min()
    if min_eig < NEGATIVITY_FLAG:
        warnings.warn(f"Born state acquired eigenvalue {min_eig:.2e}", PositivityWarning, stacklevel=2)
    return MemoryHistory(
        times=times, states=rho, kind="density", picture="interaction",
        metadata={"method": "born", "dt": dt, "T": T, "damping": damping, "memory_cutoff": memory_cutoff,
                  "min_eigenvalue": float(min_eig)},
        s_tilde=s_t, kernels={(s, ch): c for s, ch, c in chans}, memory=mem,
        gamma=junction.gamma, hs=hs,
    )


def _current_from_memory(s_t, mem, gamma, n_points):
    out = {}
    for side in SIDES:
        acc = np.zeros(n_points)
        for (sd, ch), m in mem.items():
            if sd != side:
                continue
            s = s_t[side]
            if ch == "h":
                acc += np.einsum("nab,nba->n", s, m).real
            else:
                acc -= np.einsum("nba,nba->n", s.conj(), m).real
        out[side] = 16 * gamma**2 * acc
    return out


def born_current(history: MemoryHistory, baths=None, junction: Optional[JunctionSpec] = None) -> CurrentTrace:
    """Left/right junction currents from the Born memory integrals.

    The system factors are averaged with rho~(t') and the cross-lead terms of
    the two-particle Green function are omitted.
    """
    gamma = history.gamma if junction is None else junction.gamma
    cur = _current_from_memory(history.s_tilde, history.memory, gamma, len(history.times))
    return CurrentTrace(history.times, cur["L"], cur["R"], "born")


def kubo_current(junction: JunctionSpec, baths, rho0, T: float, dt: float = 0.01,
                 kernels: Optional[dict] = None, damping: float = 0.0) -> CurrentTrace:
    """Current with the system factors frozen at the initial state.

    The memory integrals become causal convolutions and are evaluated with FFTs.
    """
    rho0 = validate_density_matrix(rho0)
    kernels = _kernels_for(tuple(baths), kernels)
    n_steps = int(round(T / dt))
    times = dt * np.arange(n_steps + 1)
    s_t = interaction_operators(build_hs(junction).matrix, times)
    mem = {}
    for side in SIDES:
        for ch in ("h", "p"):
            c = _sample(kernels[side][ch], times, damping)
            if c is None:
                continue
            s = s_t[side]
            a = (np.swapaxes(s.conj(), 1, 2) if ch == "h" else s) @ rho0
            a = a.reshape(n_steps + 1, 16)
            conv = fftconvolve(c[:, None], a, axes=0)[: n_steps + 1]
            m = conv - 0.5 * c[:, None] * a[0][None] - 0.5 * c[0] * a
            m[0] = 0.0
            mem[(side, ch)] = (dt * m).reshape(n_steps + 1, 4, 4)
    cur = _current_from_memory(s_t, mem, junction.gamma, n_steps + 1)
    return CurrentTrace(times, cur["L"], cur["R"], "kubo")


def rho_down_down() -> np.ndarray:
    rho = np.zeros((4, 4), dtype=complex)
    rho[0, 0] = 1.0
    return rho


def default_baths(Jz_bath: float = 1.0, J: float = 1.0, mu: float = 100.0) -> tuple[BathSpec, BathSpec]:
    """Oppositely polarized leads: up on the left, down on the right."""
    return BathSpec(J, Jz_bath, mu, np.inf, "up"), BathSpec(J, Jz_bath, mu, np.inf, "down")
