"""Two-spin interface: Hamiltonian, frequency-resolved jump operators, currents."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .lattice import (
    DEFAULT_DEGENERACY_TOL,
    DOWN,
    SIGMA,
    Z,
    EigenSystem,
    HilbertSpace,
    Operator,
    eigensystem,
    embed,
    product_state,
)

JUNCTION_SPACE = HilbertSpace(("L", "R"))
CONTACT_SPACE = HilbertSpace(("B", "S"))
SIDES = ("L", "R")


@dataclass(frozen=True)
class JunctionSpec:
    J_S: float = 0.01
    Delta: float = 0.01
    Jz_sys: float = 0.0
    gamma: float = 0.01

    def __post_init__(self):
        if not self.gamma >= 0:
            raise ValidationError("gamma must be non-negative", ["gamma"])

    def mirrored(self) -> "JunctionSpec":
        return JunctionSpec(self.J_S, -self.Delta, self.Jz_sys, self.gamma)

    def with_delta(self, delta: float) -> "JunctionSpec":
        return JunctionSpec(self.J_S, delta, self.Jz_sys, self.gamma)


class WeakCouplingWarning(UserWarning):
    pass


def check_weak_coupling(junction: JunctionSpec, baths) -> bool:
    ok = all(junction.gamma <= 0.1 * b.J for b in baths)
    if not ok:
        warnings.warn(f"gamma={junction.gamma} exceeds 0.1 J of an attached lead; "
                      "second-order perturbation theory may be unreliable", WeakCouplingWarning,
                      stacklevel=2)
    return ok


def lowering(side: str) -> Operator:
    if side not in SIDES:
        raise ValidationError(f"side must be 'L' or 'R', got {side!r}")
    return embed(SIGMA, side, JUNCTION_SPACE)


def z_op(side: str) -> Operator:
    return embed(Z, side, JUNCTION_SPACE)


def build_hs(spec: JunctionSpec) -> Operator:
    sl, sr = lowering("L"), lowering("R")
    zl, zr = z_op("L"), z_op("R")
    h = (2 * spec.J_S) * (sl @ sr.dag + sl.dag @ sr) + spec.Delta * (zl - zr) + spec.Jz_sys * (zl @ zr)
    return Operator(JUNCTION_SPACE, h.matrix, hermitian=True)


def coupling_operator(side: str, alpha: int) -> Operator:
    """K_alpha = i^alpha [S^dag + (-1)^alpha S] for the given side."""
    s = lowering(side)
    return (1j**alpha) * (s.dag + ((-1) ** alpha) * s)


@dataclass(frozen=True)
class JumpOperatorSet:
    eig: EigenSystem
    ops: dict = field(repr=False)
    zero_frequency_norm: float = 0.0

    def items(self, side: str, alpha: int):
        """List of ``(omega, K_alpha^(side)(omega))`` pairs."""
        return self.ops[(side, alpha)]

    def frequencies(self, side: str | None = None):
        keys = [k for k in self.ops if side is None or k[0] == side]
        return sorted({w for k in keys for w, _ in self.ops[k]})


def build_jump_set(spec: JunctionSpec, degeneracy_tol: float = DEFAULT_DEGENERACY_TOL,
                   prune_tol: float = 1e-13) -> JumpOperatorSet:
    eig = eigensystem(build_hs(spec), degeneracy_tol)
    energies = eig.energies
    projectors = [p.matrix for p in eig.projectors]
    ops = {}
    zero_norm = 0.0
    for side in SIDES:
        for alpha in (0, 1):
            k_full = coupling_operator(side, alpha).matrix
            by_freq = {}
            for a, ea in enumerate(energies):
                for b, eb in enumerate(energies):
                    omega = eb - ea
                    key = int(np.argmin(np.abs(eig.frequencies - omega)))
                    piece = projectors[a] @ k_full @ projectors[b]
                    by_freq[key] = by_freq.get(key, 0) + piece
            kept = []
            for key, mat in sorted(by_freq.items()):
                omega = float(eig.frequencies[key])
                norm = float(np.linalg.norm(mat))
                if abs(omega) < degeneracy_tol:
                    zero_norm = max(zero_norm, norm)
                if norm > prune_tol:
                    kept.append((omega, Operator(JUNCTION_SPACE, mat)))
            ops[(side, alpha)] = kept
    return JumpOperatorSet(eig, ops, zero_norm)


def current_operator(side: str = "L", gamma: float = 1.0) -> Operator:
    """-4i gamma (B S^dag - S B^dag) on the (lead contact site, junction site) pair."""
    if side not in SIDES:
        raise ValidationError(f"side must be 'L' or 'R', got {side!r}")
    b = embed(SIGMA, "B", CONTACT_SPACE)
    s = embed(SIGMA, "S", CONTACT_SPACE)
    j = (-4j * gamma) * (b @ s.dag - s @ b.dag)
    return Operator(CONTACT_SPACE, j.matrix, hermitian=True)


def down_down_state() -> np.ndarray:
    psi = product_state(JUNCTION_SPACE, [DOWN, DOWN])
    return np.outer(psi, psi.conj())


def system_corr_down(t, spec: JunctionSpec):
    """<down,down| S_L(t) S_L^dag(0) |down,down> in closed form.

    The factor exp(2i Jz_sys t) accounts for the interaction energy shift and
    is 1 for a non-interacting junction.
    """
    t = np.asarray(t, dtype=float)
    w = math.hypot(spec.Delta, spec.J_S)
    if w == 0:
        core = np.ones_like(t, dtype=complex)
    else:
        core = np.cos(2 * w * t) - 1j * spec.Delta * np.sin(2 * w * t) / w
    return np.exp(2j * spec.Jz_sys * t) * core


def swap_operator() -> np.ndarray:
    p = np.zeros((4, 4))
    for a in range(2):
        for b in range(2):
            p[2 * b + a, 2 * a + b] = 1.0
    return p
