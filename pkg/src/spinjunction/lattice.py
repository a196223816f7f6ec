"""Dense operator algebra on few-qubit Hilbert spaces.

Single-site convention used throughout the package: Z|1> = +|1>, Z|0> = -|0>
and the lowering operator is sigma = |0><1|, so that Z = sigma^dag sigma - sigma sigma^dag.
Multi-site matrices use kron ordering with the first listed site as the most
significant tensor factor.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ValidationError, NumericalError

HERMITIAN_TOL = 1e-12
DEFAULT_DEGENERACY_TOL = 1e-9

# local 2x2 matrices in the (|0>, |1>) basis
SIGMA = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
SIGMA_DAG = SIGMA.conj().T
Z = np.diag([-1.0, 1.0]).astype(complex)
IDENTITY2 = np.eye(2, dtype=complex)
UP = np.array([0.0, 1.0], dtype=complex)
DOWN = np.array([1.0, 0.0], dtype=complex)


@dataclass(frozen=True)
class HilbertSpace:
    sites: tuple

    def __post_init__(self):
        sites = tuple(self.sites)
        if len(set(sites)) != len(sites):
            raise ValidationError(f"site labels must be unique, got {sites!r}")
        object.__setattr__(self, "sites", sites)

    @property
    def dim(self) -> int:
        return 2 ** len(self.sites)

    def index(self, site) -> int:
        try:
            return self.sites.index(site)
        except ValueError:
            raise ValidationError(f"unknown site label {site!r}; space has {self.sites!r}") from None


@dataclass(frozen=True)
class Operator:
    """A dense matrix tied to a :class:`HilbertSpace`.

    When ``hermitian`` is set the matrix is checked against its adjoint.
    """

    space: HilbertSpace
    matrix: np.ndarray
    hermitian: bool = False

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (self.space.dim, self.space.dim):
            raise ValidationError(
                f"matrix shape {m.shape} does not match space dimension {self.space.dim}"
            )
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        if self.hermitian and not is_hermitian(m):
            raise ValidationError("operator flagged Hermitian but max|M - M^dag| exceeds 1e-12")

    @property
    def dag(self) -> "Operator":
        return Operator(self.space, self.matrix.conj().T, self.hermitian)

    def _check(self, other: "Operator"):
        if other.space != self.space:
            raise ValidationError("operators live on different spaces")

    def __matmul__(self, other: "Operator") -> "Operator":
        self._check(other)
        return Operator(self.space, self.matrix @ other.matrix)

    def __add__(self, other: "Operator") -> "Operator":
        self._check(other)
        return Operator(self.space, self.matrix + other.matrix, self.hermitian and other.hermitian)

    def __sub__(self, other: "Operator") -> "Operator":
        self._check(other)
        return Operator(self.space, self.matrix - other.matrix, self.hermitian and other.hermitian)

    def __mul__(self, scalar) -> "Operator":
        herm = self.hermitian and np.isreal(scalar)
        return Operator(self.space, scalar * self.matrix, bool(herm))

    __rmul__ = __mul__

    def __neg__(self) -> "Operator":
        return Operator(self.space, -self.matrix, self.hermitian)

    def expect(self, rho: np.ndarray) -> complex:
        return complex(np.trace(self.matrix @ rho))

    def allclose(self, other: "Operator", atol: float = 1e-12) -> bool:
        self._check(other)
        return bool(np.allclose(self.matrix, other.matrix, atol=atol, rtol=0.0))


@dataclass(frozen=True)
class EigenSystem:
    energies: np.ndarray
    projectors: tuple
    frequencies: np.ndarray
    levels: np.ndarray = field(repr=False)
    vectors: np.ndarray = field(repr=False)


def is_hermitian(m: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    m = np.asarray(m)
    return bool(np.max(np.abs(m - m.conj().T), initial=0.0) < tol)


def identity(space: HilbertSpace) -> Operator:
    return Operator(space, np.eye(space.dim), hermitian=True)


def embed(local, site, space: HilbertSpace) -> Operator:
    """Place a 2x2 operator at ``site`` with identities elsewhere."""
    m = local.matrix if isinstance(local, Operator) else np.asarray(local, dtype=complex)
    if m.shape != (2, 2):
        raise ValidationError(f"local operator must be 2x2, got {m.shape}")
    pos = space.index(site)
    out = np.ones((1, 1), dtype=complex)
    for k in range(len(space.sites)):
        out = np.kron(out, m if k == pos else IDENTITY2)
    return Operator(space, out, hermitian=is_hermitian(m))


def product_state(space: HilbertSpace, local_states: Sequence[np.ndarray]) -> np.ndarray:
    if len(local_states) != len(space.sites):
        raise ValidationError("one local state per site is required")
    psi = np.ones(1, dtype=complex)
    for v in local_states:
        psi = np.kron(psi, np.asarray(v, dtype=complex))
    return psi


def _hermitian_matrix(H) -> np.ndarray:
    m = H.matrix if isinstance(H, Operator) else np.asarray(H, dtype=complex)
    if not is_hermitian(m):
        raise ValidationError("Hamiltonian must be Hermitian (max|H - H^dag| < 1e-12)")
    return m


def propagator(H, t: float) -> np.ndarray:
    """exp(-i H t) from the eigendecomposition of a Hermitian matrix."""
    m = _hermitian_matrix(H)
    e, v = np.linalg.eigh(m)
    return (v * np.exp(-1j * e * t)) @ v.conj().T


def heisenberg(op, H, t: float):
    """Return e^{iHt} op e^{-iHt}.

    Accepts :class:`Operator` instances or raw arrays and returns the same kind.
    """
    U = propagator(H, t)
    m = op.matrix if isinstance(op, Operator) else np.asarray(op, dtype=complex)
    out = U.conj().T @ m @ U
    if isinstance(op, Operator):
        return Operator(op.space, out)
    return out


def group_levels(values: np.ndarray, tol: float) -> np.ndarray:
    """Label sorted values so that neighbours closer than ``tol`` share a label."""
    values = np.asarray(values, dtype=float)
    labels = np.zeros(len(values), dtype=int)
    for k in range(1, len(values)):
        labels[k] = labels[k - 1] + (0 if values[k] - values[k - 1] < tol else 1)
    return labels


def eigensystem(H, degeneracy_tol: float = DEFAULT_DEGENERACY_TOL) -> EigenSystem:
    m = _hermitian_matrix(H)
    space = H.space if isinstance(H, Operator) else HilbertSpace(tuple(range(int(np.log2(len(m))))))
    try:
        e, v = np.linalg.eigh(m)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise NumericalError(f"eigensolver failed: {exc}") from exc
    labels = group_levels(e, degeneracy_tol)
    energies = []
    projectors = []
    for lab in range(labels.max() + 1):
        cols = v[:, labels == lab]
        energies.append(e[labels == lab].mean())
        projectors.append(Operator(space, cols @ cols.conj().T, hermitian=True))
    energies = np.array(energies)
    bohr = np.sort((energies[None, :] - energies[:, None]).ravel())
    flab = group_levels(bohr, degeneracy_tol)
    freqs = np.array([bohr[flab == k].mean() for k in range(flab.max() + 1)])
    return EigenSystem(energies, tuple(projectors), freqs, e, v)
