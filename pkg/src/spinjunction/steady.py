"""Long-time generators for the junction and their stationary states.

Density matrices are vectorized column-wise, so vec(A rho B) = (B^T kron A) vec(rho).
Both generators write the lead coupling as V = gamma sum_alpha X_alpha K_alpha with

    X_0 = B + B^dag,   X_1 = -i (B - B^dag)
    K_0 = S + S^dag,   K_1 = i (S^dag - S)

and use the one-sided transforms G_h(w), G_p(w) of <B^dag(t) B> and <B(t) B^dag>.
"""

from __future__ import annotations

import json
import logging
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .bath import DEFAULT_DAMPING, half_fourier, hp_transform, near_singular
from .born import validate_density_matrix
from .errors import DegenerateSteadyStateError, NearSingularWarning, NumericalError
from .junction import SIDES, JunctionSpec, build_hs, build_jump_set, check_weak_coupling, lowering, z_op

log = logging.getLogger(__name__)

NULL_TOL = 1e-12
RESIDUAL_TOL = 1e-10
REDFIELD_NEGATIVITY = -1e-6

_I4 = np.eye(4, dtype=complex)


def vec(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho).reshape(-1, order="F")


def unvec(v: np.ndarray) -> np.ndarray:
    return np.asarray(v).reshape(4, 4, order="F")


def spre(a: np.ndarray) -> np.ndarray:
    return np.kron(_I4, a)


def spost(b: np.ndarray) -> np.ndarray:
    return np.kron(b.T, _I4)


@dataclass(frozen=True)
class Superoperator:
    matrix: np.ndarray = field(repr=False)
    tag: str
    parts: dict = field(default_factory=dict, repr=False, compare=False)
    warnings: tuple = ()

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        return unvec(self.matrix @ vec(rho))

    def dissipator(self, side: str) -> np.ndarray:
        return self.parts[side]


def commutator_super(h: np.ndarray) -> np.ndarray:
    return -1j * (spre(h) - spost(h))


def _transform_table(baths, damping, transforms):
    """Callables omega -> G_x(omega) for every (side, channel)."""
    if transforms is not None:
        return transforms
    table = {}
    for side, bath in zip(SIDES, baths):
        major = (lambda w, b=bath: complex(hp_transform(w, b, damping)))
        zero = (lambda w: 0j)
        table[side] = {"h": major, "p": zero} if bath.polarization == "up" else {"h": zero, "p": major}
    return table


def transforms_from_kernels(kernels: dict, damping: float = DEFAULT_DAMPING) -> dict:
    """Numerical one-sided transforms of tabulated or analytic kernels."""
    out = {}
    for side in SIDES:
        out[side] = {}
        for ch in ("h", "p"):
            k = kernels[side][ch]
            out[side][ch] = (lambda w, k=k: complex(half_fourier(k, w, damping)))
    return out


def _flag_near_singular(baths, omegas, damping, transforms):
    flags = []
    if transforms is not None:
        return flags
    for side, bath in zip(SIDES, baths):
        for w in omegas:
            if near_singular(w, bath, damping):
                msg = f"rate for lead {side} at omega={w:g} within {damping:g} of the band edge"
                warnings.warn(msg, NearSingularWarning, stacklevel=3)
                flags.append(msg)
    return flags


def rate_matrix(g_h: complex, g_p: complex, gamma: float) -> np.ndarray:
    """Gamma_{alpha alpha'} = gamma^2 int <X_alpha(t) X_alpha'> e^{i w t} dt."""
    s, d = g_p + g_h, g_p - g_h
    return gamma**2 * np.array([[s, 1j * d], [-1j * d, s]])


def _term(gam: complex, a_dag: np.ndarray, b: np.ndarray) -> np.ndarray:
    """-gam (a^dag b rho - b rho a^dag) plus its Hermitian conjugate."""
    out = -gam * (spre(a_dag @ b) - spre(b) @ spost(a_dag))
    bd, a = b.conj().T, a_dag.conj().T
    out += -np.conj(gam) * (spost(bd @ a) - spre(a) @ spost(bd))
    return out


def build_redfield_global(junction: JunctionSpec, baths, damping: float = DEFAULT_DAMPING,
                          transforms: Optional[dict] = None, degeneracy_tol: float = 1e-9) -> Superoperator:
    """Redfield generator keeping every pair of Bohr frequencies (no secular step)."""
    baths = tuple(baths)
    check_weak_coupling(junction, baths)
    jumps = build_jump_set(junction, degeneracy_tol)
    table = _transform_table(baths, damping, transforms)
    flags = _flag_near_singular(baths, jumps.frequencies(), damping, transforms)
    parts = {}
    for side in SIDES:
        g = {w: rate_matrix(table[side]["h"](w), table[side]["p"](w), junction.gamma)
             for w in jumps.frequencies(side)}
        d = np.zeros((16, 16), dtype=complex)
        for a in (0, 1):
            for w, ka in jumps.items(side, a):
                ka_dag = ka.matrix.conj().T
                for b in (0, 1):
                    for w2, kb in jumps.items(side, b):
                        d += _term(g[w2][a, b], ka_dag, kb.matrix)
        parts[side] = d
    hs = build_hs(junction).matrix
    total = commutator_super(hs) + parts["L"] + parts["R"]
    return Superoperator(total, "redfield-global", parts, tuple(flags))


def local_rates(bath_side_table: dict, gamma: float) -> tuple[complex, complex]:
    """(Gamma_h, Gamma_p) = 4 gamma^2 (G_h(0), G_p(0))."""
    return 4 * gamma**2 * bath_side_table["h"](0.0), 4 * gamma**2 * bath_side_table["p"](0.0)


def build_lindblad_local(junction: JunctionSpec, baths, damping: float = DEFAULT_DAMPING,
                         transforms: Optional[dict] = None) -> Superoperator:
    """Zero-frequency local generator.

    The p-channel term  -Gamma_p (S^dag S rho - S rho S^dag) + h.c.  removes
    spin from the junction site and the h-channel term with S and S^dag
    exchanged adds it.
    """
    baths = tuple(baths)
    table = _transform_table(baths, damping, transforms)
    flags = _flag_near_singular(baths, [0.0], damping, transforms)
    parts = {}
    for side in SIDES:
        s = lowering(side).matrix
        sd = s.conj().T
        g_h, g_p = local_rates(table[side], junction.gamma)
        parts[side] = _term(g_p, sd, s) + _term(g_h, s, sd)
    total = commutator_super(build_hs(junction).matrix) + parts["L"] + parts["R"]
    return Superoperator(total, "lindblad-local", parts, tuple(flags))


@dataclass
class SteadyReport:
    rho: np.ndarray
    residual: float
    min_eigenvalue: float
    gap: float
    tag: str
    singular_values: np.ndarray = field(repr=False, default=None)
    I_L: Optional[float] = None
    I_R: Optional[float] = None
    warnings: list = field(default_factory=list)

    @property
    def I(self) -> Optional[float]:  # noqa: E743
        if self.I_L is None:
            return None
        return (self.I_L - self.I_R) / 2

    @property
    def trace_error(self) -> float:
        return float(abs(np.trace(self.rho) - 1))

    def to_dict(self) -> dict:
        return {
            "generator": self.tag,
            "rho_real": self.rho.real.tolist(),
            "rho_imag": self.rho.imag.tolist(),
            "residual": self.residual,
            "trace_error": self.trace_error,
            "min_eigenvalue": self.min_eigenvalue,
            "gap": self.gap,
            "singular_values": [float(x) for x in self.singular_values],
            "I_L": self.I_L,
            "I_R": self.I_R,
            "I": self.I,
            "warnings": list(self.warnings),
        }

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def solve_steady(L: Superoperator) -> SteadyReport:
    """Null vector of the generator from its SVD."""
    u, sv, vh = np.linalg.svd(L.matrix)
    small = np.sum(sv < NULL_TOL)
    if small >= 2:
        basis = [unvec(vh[-k - 1].conj()) for k in range(small)]
        raise DegenerateSteadyStateError(f"{small}-dimensional steady space", basis)
    rho = unvec(vh[-1].conj())
    rho = 0.5 * (rho + rho.conj().T)
    tr = np.trace(rho)
    if abs(tr) < 1e-14:
        raise NumericalError("null vector of the generator is traceless")
    rho = rho / tr
    rho = 0.5 * (rho + rho.conj().T)
    residual = float(np.linalg.norm(L.matrix @ vec(rho)))
    min_eig = float(np.linalg.eigvalsh(rho).min())
    notes = list(L.warnings)
    if L.tag == "redfield-global" and min_eig < 0:
        log.info("Redfield steady state has eigenvalue %.3e", min_eig)
        if min_eig < REDFIELD_NEGATIVITY:
            msg = f"Redfield steady state negativity {min_eig:.2e} below {REDFIELD_NEGATIVITY:g}"
            warnings.warn(msg, RuntimeWarning, stacklevel=2)
            notes.append(msg)
    if residual > RESIDUAL_TOL:
        notes.append(f"steady residual {residual:.2e}")
    return SteadyReport(rho, residual, min_eig, float(sv[-2]), L.tag, sv, warnings=notes)


def steady_current(report: SteadyReport, L: Superoperator) -> tuple[float, float, float]:
    """I_s = tr(Z_s D_s[rho_ss]): the change of Z_s due to lead s alone."""
    rho = validate_density_matrix(report.rho, tol=1e-8)
    out = {}
    for side in SIDES:
        d = unvec(L.dissipator(side) @ vec(rho))
        out[side] = float(np.trace(z_op(side).matrix @ d).real)
    report.I_L, report.I_R = out["L"], out["R"]
    return out["L"], out["R"], (out["L"] - out["R"]) / 2


def steady_pipeline(junction: JunctionSpec, baths, generator: str = "redfield-global",
                    damping: float = DEFAULT_DAMPING, transforms: Optional[dict] = None) -> SteadyReport:
    """Build the requested generator, solve it and attach the currents."""
    builders: dict[str, Callable] = {
        "redfield-global": build_redfield_global,
        "lindblad-local": build_lindblad_local,
    }
    L = builders[generator](junction, baths, damping, transforms)
    report = solve_steady(L)
    steady_current(report, L)
    return report
