"""Exact statevector dynamics of the junction between finite XXZ leads.

Sites are laid out as a chain

    L_{N_L-1} ... L_1 L_0 | jL jR | R_0 R_1 ... R_{N_R-1}

with lead site 0 touching the junction.  Basis states are integers whose bit
``n_sites - 1 - pos`` holds the occupation (1 = up) of chain position ``pos``,
which matches kron ordering with the leftmost site most significant.

The basis can be restricted to a magnetization sector (exact for unitary
dynamics) and/or to states with at most ``max_excitations`` spins flipped
relative to the reference state (polarized leads, junction down).
"""

from __future__ import annotations

import csv
import itertools
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .bath import BathSpec, kernel_from_samples
from .born import CurrentTrace, StateTrajectory
from .errors import NumericalError, ValidationError
from .junction import JunctionSpec

MAX_SITES = 24


@dataclass(frozen=True)
class ChainSpec:
    N_L: int
    N_R: int
    baths: tuple
    junction: JunctionSpec
    initial_junction: tuple = ("down", "down")
    contact: int = 0
    max_excitations: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "baths", tuple(self.baths))
        bad = []
        if self.N_L < 0 or self.N_R < 0:
            bad.append("N_L/N_R")
        if self.n_sites > MAX_SITES:
            bad.append("N_L/N_R")
        if len(self.baths) != 2:
            bad.append("baths")
        for n in (self.N_L, self.N_R):
            if n and not 0 <= self.contact < n:
                bad.append("contact")
        if any(s not in ("up", "down") for s in self.initial_junction):
            bad.append("initial_junction")
        if bad:
            raise ValidationError(f"invalid ChainSpec ({', '.join(sorted(set(bad)))}); "
                                  f"at most {MAX_SITES} sites are supported", sorted(set(bad)))

    @property
    def n_sites(self) -> int:
        return self.N_L + 2 + self.N_R

    def position(self, lead: str, index: int) -> int:
        if lead == "L":
            return self.N_L - 1 - index
        if lead == "R":
            return self.N_L + 2 + index
        if lead == "S":
            return self.N_L + (0 if index == 0 else 1)
        raise ValidationError(f"unknown lead {lead!r}")

    @property
    def junction_positions(self) -> tuple:
        return self.N_L, self.N_L + 1

    def mirrored(self) -> "ChainSpec":
        """Image under a global spin flip: polarizations, junction state and Delta reversed."""
        flip = {"up": "down", "down": "up"}
        return ChainSpec(self.N_L, self.N_R, (self.baths[0].flipped(), self.baths[1].flipped()),
                         self.junction.mirrored(), tuple(flip[s] for s in self.initial_junction),
                         self.contact, self.max_excitations)


@dataclass(frozen=True)
class AbsorberSpec:
    gamma_B: float = 0.5
    amplitude: float = 4.0
    width: Optional[int] = None

    def __post_init__(self):
        if self.gamma_B <= 0 or self.amplitude < 0:
            raise ValidationError("absorber needs gamma_B > 0 and amplitude >= 0")

    @property
    def n_sites(self) -> int:
        return self.width if self.width is not None else math.ceil(3.0 / self.gamma_B)

    def zeta(self, r):
        r = np.asarray(r, dtype=float)
        return np.where(r < self.n_sites, self.amplitude * np.exp(-self.gamma_B * r), 0.0)


@dataclass(frozen=True)
class Bond:
    a: int
    b: int
    hopping: float
    label: str


class ChainModel:
    """Basis, sparse Hamiltonian and observables for a :class:`ChainSpec`."""

    def __init__(self, spec: ChainSpec, sector: bool = True):
        self.spec = spec
        self.n = spec.n_sites
        self.reference = self._reference_state()
        self.initial = self._initial_state()
        self.states = self._enumerate(sector)
        self.dim = len(self.states)
        self.bonds = self._bonds()
        self.H = self._hamiltonian()
        self.e_ref = float(self.H.diagonal()[self.index(self.initial)].real)
        self._pairs = [self._bond_pairs(b) for b in self.bonds]

    # -- layout ---------------------------------------------------------
    def mask(self, pos: int) -> int:
        return 1 << (self.n - 1 - pos)

    def _lead_bits(self, lead: str, n: int, pol: str) -> int:
        bits = 0
        if pol == "up":
            for i in range(n):
                bits |= self.mask(self.spec.position(lead, i))
        return bits

    def _reference_state(self) -> int:
        s = self.spec
        return self._lead_bits("L", s.N_L, s.baths[0].polarization) | self._lead_bits(
            "R", s.N_R, s.baths[1].polarization)

    def _initial_state(self) -> int:
        state = self.reference
        for k, v in enumerate(self.spec.initial_junction):
            if v == "up":
                state |= self.mask(self.spec.junction_positions[k])
        return state

    def _enumerate(self, sector: bool) -> np.ndarray:
        n, ref = self.n, self.reference
        n_up = bin(self.initial).count("1")
        kmax = self.spec.max_excitations
        if kmax is None:
            if sector:
                combos = itertools.combinations(range(n), n_up)
                states = [sum(1 << p for p in c) for c in combos]
            else:
                states = list(range(2**n))
        else:
            states = []
            for k in range(min(kmax, n) + 1):
                for c in itertools.combinations(range(n), k):
                    s = ref ^ sum(1 << p for p in c)
                    if not sector or bin(s).count("1") == n_up:
                        states.append(s)
        return np.array(sorted(states), dtype=np.int64)

    def index(self, state: int) -> int:
        i = int(np.searchsorted(self.states, state))
        if i >= self.dim or self.states[i] != state:
            raise ValidationError("state outside the truncated basis")
        return i

    def _bonds(self) -> list:
        s = self.spec
        out = []
        for lead, n, bath in (("L", s.N_L, s.baths[0]), ("R", s.N_R, s.baths[1])):
            for i in range(n - 1):
                out.append((lead, i, i + 1, bath))
        bonds = []
        # chain-ordered, positive current flows left -> right
        for i in range(s.N_L - 1, 0, -1):
            bonds.append(Bond(s.position("L", i), s.position("L", i - 1), 2 * s.baths[0].J, f"L{i}-L{i - 1}"))
        jl, jr = s.junction_positions
        if s.N_L:
            bonds.append(Bond(s.position("L", s.contact), jl, 2 * s.junction.gamma, f"L{s.contact}-jL"))
        bonds.append(Bond(jl, jr, 2 * s.junction.J_S, "jL-jR"))
        if s.N_R:
            bonds.append(Bond(jr, s.position("R", s.contact), 2 * s.junction.gamma, f"jR-R{s.contact}"))
        for i in range(s.N_R - 1):
            bonds.append(Bond(s.position("R", i), s.position("R", i + 1), 2 * s.baths[1].J, f"R{i}-R{i + 1}"))
        return bonds

    # -- operators ------------------------------------------------------
    def bit(self, pos: int) -> np.ndarray:
        return (self.states >> (self.n - 1 - pos)) & 1

    def z(self, pos: int) -> np.ndarray:
        return 2.0 * self.bit(pos) - 1.0

    def _hamiltonian(self):
        s = self.spec
        diag = np.zeros(self.dim)
        for lead, n, bath in (("L", s.N_L, s.baths[0]), ("R", s.N_R, s.baths[1])):
            for i in range(n - 1):
                diag += bath.Jz * self.z(s.position(lead, i)) * self.z(s.position(lead, i + 1))
        jl, jr = s.junction_positions
        zl, zr = self.z(jl), self.z(jr)
        diag += s.junction.Delta * (zl - zr) + s.junction.Jz_sys * zl * zr
        rows, cols, vals = [np.arange(self.dim)], [np.arange(self.dim)], [diag.astype(complex)]
        for bond in self.bonds:
            if bond.hopping == 0:
                continue
            differ = self.bit(bond.a) != self.bit(bond.b)
            src = np.nonzero(differ)[0]
            tgt_states = self.states[src] ^ (self.mask(bond.a) | self.mask(bond.b))
            tgt = np.searchsorted(self.states, tgt_states)
            tgt = np.minimum(tgt, self.dim - 1)
            ok = self.states[tgt] == tgt_states
            rows.append(tgt[ok])
            cols.append(src[ok])
            vals.append(np.full(ok.sum(), bond.hopping, dtype=complex))
        return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                             shape=(self.dim, self.dim))

    def _bond_pairs(self, bond: Bond):
        # sigma_a^dag sigma_b maps (a down, b up) -> (a up, b down)
        src = np.nonzero((self.bit(bond.a) == 0) & (self.bit(bond.b) == 1))[0]
        tgt_states = self.states[src] ^ (self.mask(bond.a) | self.mask(bond.b))
        tgt = np.minimum(np.searchsorted(self.states, tgt_states), self.dim - 1)
        ok = self.states[tgt] == tgt_states
        return src[ok], tgt[ok]

    def initial_vector(self) -> np.ndarray:
        psi = np.zeros(self.dim, dtype=complex)
        psi[self.index(self.initial)] = 1.0
        return psi

    def bond_currents(self, psi: np.ndarray) -> np.ndarray:
        """<j_{a->b}> = -4 t Im<sigma_a^dag sigma_b> for every bond (rows = bonds)."""
        psi = np.asarray(psi)
        out = np.empty((len(self.bonds),) + psi.shape[1:])
        for k, (bond, (src, tgt)) in enumerate(zip(self.bonds, self._pairs)):
            amp = np.sum(psi[tgt].conj() * psi[src], axis=0)
            out[k] = -4.0 * bond.hopping * amp.imag
        return out

    def magnetization(self, psi: np.ndarray) -> np.ndarray:
        prob = np.abs(np.asarray(psi)) ** 2
        return np.array([np.tensordot(self.z(p), prob, axes=(0, 0)) for p in range(self.n)])

    def junction_currents(self, bond_values: np.ndarray):
        """(I_L, I_R): spin entering the junction from each lead."""
        names = [b.label for b in self.bonds]
        s = self.spec
        il = bond_values[names.index(f"L{s.contact}-jL")] if s.N_L else np.zeros(bond_values.shape[1:])
        ir = -bond_values[names.index(f"jR-R{s.contact}")] if s.N_R else np.zeros(bond_values.shape[1:])
        return il, ir


def build_chain_hamiltonian(spec: ChainSpec, sector: bool = False) -> sp.csr_matrix:
    """Sparse H_L + H_R + H_S + V.  ``sector=False`` keeps every basis state."""
    return ChainModel(spec, sector=sector).H


def bond_currents(state, spec_or_model) -> np.ndarray:
    model = spec_or_model if isinstance(spec_or_model, ChainModel) else ChainModel(spec_or_model)
    return model.bond_currents(state)


# ---------------------------------------------------------------------------
# unitary propagation
# ---------------------------------------------------------------------------


def lanczos_step(H, psi: np.ndarray, dt: float, tol: float = 1e-9, m_max: int = 40):
    """Short-iterative Lanczos propagation exp(-i H dt) psi.

    Returns the propagated vector and the a posteriori error estimate.  The
    step is subdivided when the Krylov space of dimension ``m_max`` does not
    reach ``tol``.
    """
    beta0 = np.linalg.norm(psi)
    if beta0 == 0:
        return psi.copy(), 0.0
    V = np.empty((m_max + 1, len(psi)), dtype=complex)
    V[0] = psi / beta0
    alpha, beta = [], []
    err = math.inf
    for j in range(m_max):
        w = H @ V[j]
        a = np.vdot(V[j], w).real
        w = w - a * V[j] - (beta[-1] * V[j - 1] if j else 0)
        w -= V[: j + 1].T @ (V[: j + 1].conj() @ w)
        b = np.linalg.norm(w)
        alpha.append(a)
        T = np.diag(alpha) + np.diag(beta, 1) + np.diag(beta, -1)
        c = scipy.linalg.expm(-1j * dt * T)[:, 0]
        err = b * abs(c[-1]) * beta0
        if err < tol or b < 1e-14:
            return beta0 * (V[: j + 1].T @ c), err
        beta.append(b)
        V[j + 1] = w / b
    half, e1 = lanczos_step(H, psi, dt / 2, tol / 2, m_max)
    out, e2 = lanczos_step(H, half, dt / 2, tol / 2, m_max)
    return out, e1 + e2


@dataclass
class ChainEvolution(StateTrajectory):
    bond_currents: np.ndarray = field(default=None, repr=False)
    magnetization: np.ndarray = field(default=None, repr=False)
    bond_labels: list = field(default_factory=list)
    errors: Optional[np.ndarray] = field(default=None, repr=False)

    def current_trace(self, model: ChainModel, method: str = "oracle") -> CurrentTrace:
        il, ir = model.junction_currents(self.bond_currents.T)
        return CurrentTrace(self.times, np.asarray(il), np.asarray(ir), method)

    def to_csv(self, path):
        """Bond-current heat map: one row per time, one column per bond."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t"] + self.bond_labels)
            for t, row in zip(self.times, self.bond_currents):
                w.writerow([repr(float(t))] + [repr(float(x)) for x in row])


def evolve_unitary(spec: ChainSpec, dt: float, T: float, tol: float = 1e-9,
                   store_states: bool = False, model: Optional[ChainModel] = None,
                   psi0: Optional[np.ndarray] = None) -> ChainEvolution:
    model = model or ChainModel(spec, sector=True)
    H = model.H - model.e_ref * sp.identity(model.dim, format="csr")
    n_steps = int(round(T / dt))
    times = dt * np.arange(n_steps + 1)
    psi = model.initial_vector() if psi0 is None else np.asarray(psi0, dtype=complex)
    bonds = np.empty((n_steps + 1, len(model.bonds)))
    mags = np.empty((n_steps + 1, model.n))
    errs = np.zeros(n_steps + 1)
    states = [] if store_states else None
    for n in range(n_steps + 1):
        if n:
            psi, errs[n] = lanczos_step(H, psi, dt, tol)
            if errs[n] > tol:
                raise NumericalError(f"propagation error {errs[n]:.2e} exceeds tol at t={times[n]:g}")
        bonds[n] = model.bond_currents(psi)
        mags[n] = model.magnetization(psi)
        if store_states:
            states.append(psi.copy())
    return ChainEvolution(times, np.array(states) if store_states else None, "statevector",
                          "schrodinger", {"method": "oracle", "dim": model.dim, "dt": dt},
                          bonds, mags, [b.label for b in model.bonds], errs)


def lead_kernel(spec: ChainSpec, side: str, dt: float, T: float, length: Optional[int] = None):
    """Exact majority correlator at the contact site of one isolated lead.

    In a fully polarized lead only the one-flip sector contributes, so the
    correlator is a single-particle return amplitude.  ``length`` overrides
    the lead size; the one-magnon problem is not bound by the statevector
    guard, so a long lead serves as a semi-infinite reference.
    """
    n = length if length is not None else (spec.N_L if side == "L" else spec.N_R)
    bath = spec.baths[0] if side == "L" else spec.baths[1]
    if n == 0:
        raise ValidationError(f"lead {side} has no sites")
    h = np.zeros((n, n))
    for i in range(n - 1):
        h[i, i + 1] = h[i + 1, i] = 2 * bath.J
        h[i, i] -= 2 * bath.Jz
        h[i + 1, i + 1] -= 2 * bath.Jz
    e, v = np.linalg.eigh(h)
    t = dt * np.arange(int(round(T / dt)) + 1)
    w = np.abs(v[spec.contact]) ** 2
    vals = np.exp(-1j * np.outer(t, e)) @ w
    return kernel_from_samples(vals, dt)


def lead_kernels(spec: ChainSpec, dt: float, T: float, length: Optional[int] = None) -> dict:
    from .bath import zero_kernel

    out = {}
    for side, bath in zip(("L", "R"), spec.baths):
        k = lead_kernel(spec, side, dt, T, length)
        out[side] = {"h": k, "p": zero_kernel()} if bath.polarization == "up" else {"h": zero_kernel(), "p": k}
    return out


# ---------------------------------------------------------------------------
# stochastic absorbing boundaries
# ---------------------------------------------------------------------------


@dataclass
class TrajectoryEnsemble:
    seed: int
    M: int
    times: np.ndarray
    bond_labels: list
    traces: np.ndarray = field(repr=False)  # (M, n_times, n_bonds)
    keys: tuple = ()
    magnetization: Optional[np.ndarray] = field(default=None, repr=False)  # (M, n_times, n_sites)

    @property
    def magnetization_mean(self) -> np.ndarray:
        return self.magnetization.mean(axis=0)

    @property
    def magnetization_stderr(self) -> np.ndarray:
        return self.magnetization.std(axis=0, ddof=1) / math.sqrt(self.M)

    @property
    def mean(self) -> np.ndarray:
        return self.traces.mean(axis=0)

    @property
    def stderr(self) -> np.ndarray:
        if self.M < 2:
            return np.full(self.traces.shape[1:], np.nan)
        return self.traces.std(axis=0, ddof=1) / math.sqrt(self.M)

    def current_trace(self, model: ChainModel) -> CurrentTrace:
        il, ir = model.junction_currents(self.mean.T)
        return CurrentTrace(self.times, np.asarray(il), np.asarray(ir), "oracle")

    def to_csv(self, path):
        mean, err = self.mean, self.stderr
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t"] + self.bond_labels + [f"{b}_stderr" for b in self.bond_labels])
            for k, t in enumerate(self.times):
                w.writerow([repr(float(t))] + [repr(float(x)) for x in mean[k]] +
                           [repr(float(x)) for x in err[k]])


def _jump_maps(model: ChainModel, absorbers: Sequence[Optional[AbsorberSpec]]):
    """(source index, target index, sqrt(zeta)) per absorbing site."""
    spec = model.spec
    jumps = []
    for lead, n, bath, ab in (("L", spec.N_L, spec.baths[0], absorbers[0]),
                              ("R", spec.N_R, spec.baths[1], absorbers[1])):
        if ab is None or ab.amplitude == 0:
            continue
        if ab.n_sites >= n - spec.contact:
            warnings.warn(f"absorber on lead {lead} reaches the contact site", RuntimeWarning, stacklevel=3)
        for i in range(n):
            r = n - 1 - i
            zeta = float(ab.zeta(r))
            if zeta <= 0:
                continue
            pos = spec.position(lead, i)
            raise_ = bath.polarization == "up"
            bits = model.bit(pos)
            src = np.nonzero(bits == (0 if raise_ else 1))[0]
            tgt_states = model.states[src] ^ model.mask(pos)
            tgt = np.minimum(np.searchsorted(model.states, tgt_states), model.dim - 1)
            ok = model.states[tgt] == tgt_states
            jumps.append((src[ok], tgt[ok], math.sqrt(zeta), pos))
    return jumps


def _taylor_propagate(H, psi, dt, order=4):
    out = psi.copy()
    term = psi
    for k in range(1, order + 1):
        term = (-1j * dt / k) * (H @ term)
        out = out + term
    return out


def run_trajectories(spec: ChainSpec, absorbers, dt: float, T: float, keys: Sequence,
                     record_dt: Optional[float] = None, model: Optional[ChainModel] = None,
                     chunk: int = 256, psi0: Optional[np.ndarray] = None):
    """Vectorized quantum-state-diffusion over one trajectory per key.

    Each step applies exp(-i H dt) by a Taylor series and then the Euler-Maruyama
    update  psi += sum_r (-1/2 J_r^dag J_r dt + J_r dQ_r) psi  with
    dQ_r = <J_r + J_r^dag> dt + dW_r, followed by renormalization.
    Wiener increments come from a Philox stream keyed by (seed, trajectory).
    Returns (times, bond currents, site magnetizations, model); the arrays are
    indexed (trajectory, record, bond or site).
    """
    model = model or ChainModel(spec, sector=False)
    jumps = _jump_maps(model, absorbers)
    H = (model.H - model.e_ref * sp.identity(model.dim, format="csr")).tocsr()
    norm1 = abs(H).sum(axis=0).max()
    sub = max(1, int(math.ceil(norm1 * dt / 0.1)))
    n_steps = int(round(T / dt))
    rec = max(1, int(round((record_dt or dt) / dt)))
    rec_idx = np.arange(0, n_steps + 1, rec)
    M = len(keys)
    start = model.initial_vector() if psi0 is None else np.asarray(psi0, dtype=complex)
    psi = np.repeat(start[:, None], M, axis=1)
    out = np.empty((M, len(rec_idx), len(model.bonds)))
    mags = np.empty((M, len(rec_idx), model.n))
    gens = [np.random.Generator(np.random.Philox(key=np.array(k, dtype=np.uint64))) for k in keys]
    n_j = len(jumps)
    if n_j:
        src_all = np.concatenate([j[0] for j in jumps])
        tgt_all = np.concatenate([j[1] for j in jumps])
        amp_all = np.concatenate([np.full(len(j[0]), j[2]) for j in jumps])
        kidx = np.concatenate([np.full(len(j[0]), k) for k, j in enumerate(jumps)])
        nnz = len(src_all)
        group = sp.csr_matrix((np.ones(nnz), (kidx, np.arange(nnz))), shape=(n_j, nnz))
        scatter = sp.csr_matrix((np.ones(nnz), (tgt_all, np.arange(nnz))), shape=(model.dim, nnz))
        half_occ = 0.5 * dt * np.bincount(src_all, weights=amp_all**2, minlength=model.dim)
    sqdt = math.sqrt(dt)
    noise = None
    slot = 0
    for n in range(n_steps + 1):
        if n % rec == 0:
            out[:, slot, :] = model.bond_currents(psi).T
            mags[:, slot, :] = model.magnetization(psi).T
            slot += 1
        if n == n_steps:
            break
        for _ in range(sub):
            psi = _taylor_propagate(H, psi, dt / sub)
        if n_j:
            c = n % chunk
            if c == 0:
                noise = np.stack([g.standard_normal((chunk, n_j)) for g in gens], axis=-1)
            dW = sqdt * noise[c]  # (n_j, M)
            jpsi = amp_all[:, None] * psi[src_all]
            expval = 2.0 * (group @ (psi[tgt_all].conj() * jpsi)).real
            coef = expval * dt + dW
            psi = psi - half_occ[:, None] * psi + scatter @ (jpsi * coef[kidx])
        nrm = np.linalg.norm(psi, axis=0)
        if np.any(nrm < 1e-6):
            raise NumericalError(f"trajectory norm collapsed at t={(n + 1) * dt:g}")
        psi = psi / nrm
    return dt * rec_idx, out, mags, model


def evolve_trajectory(spec: ChainSpec, absorbers, dt: float, T: float, seed: int,
                      index: int = 0, record_dt: Optional[float] = None) -> ChainEvolution:
    times, out, mags, model = run_trajectories(spec, absorbers, dt, T, [(seed, index)], record_dt)
    return ChainEvolution(times, None, "statevector", "schrodinger",
                          {"method": "trajectory", "seed": seed, "index": index, "dt": dt},
                          out[0], mags[0], [b.label for b in model.bonds])


def ensemble_average(spec: ChainSpec, absorbers, M: int, seed: int, dt: float = 1e-3,
                     T: float = 5.0, record_dt: Optional[float] = 0.01, indices=None,
                     model: Optional[ChainModel] = None, psi0: Optional[np.ndarray] = None):
    if M < 2:
        raise ValidationError("an ensemble needs M >= 2 trajectories", ["M"])
    indices = list(range(M)) if indices is None else list(indices)
    keys = [(seed, i) for i in indices]
    times, out, mags, model = run_trajectories(spec, absorbers, dt, T, keys, record_dt, model=model, psi0=psi0)
    return TrajectoryEnsemble(seed, M, times, [b.label for b in model.bonds], out, tuple(keys), mags), model
