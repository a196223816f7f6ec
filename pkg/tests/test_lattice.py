import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from spinjunction.errors import ValidationError
from spinjunction.lattice import (
    DOWN,
    SIGMA,
    UP,
    Z,
    HilbertSpace,
    Operator,
    eigensystem,
    embed,
    heisenberg,
    identity,
    product_state,
    propagator,
)

SPACE = HilbertSpace(("L", "R"))


def random_hermitian(rng, n=4):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return (a + a.conj().T) / 2


def test_single_site_conventions():
    assert np.allclose(Z @ UP, UP)
    assert np.allclose(Z @ DOWN, -DOWN)
    assert np.allclose(SIGMA @ UP, DOWN)
    assert np.allclose(SIGMA @ DOWN, 0)


def test_embed_matches_explicit_kron():
    assert np.allclose(embed(SIGMA, "L", SPACE).matrix, np.kron(SIGMA, np.eye(2)))
    assert np.allclose(embed(Z, "R", SPACE).matrix, np.kron(np.eye(2), Z))


def test_operators_on_different_sites_commute():
    a, b = embed(SIGMA, "L", SPACE), embed(SIGMA.conj().T, "R", SPACE)
    assert (a @ b).allclose(b @ a)


def test_hilbert_space_rejects_duplicates():
    with pytest.raises(ValidationError):
        HilbertSpace(("a", "a"))


def test_operator_rejects_bad_shape_and_non_hermitian_flag():
    with pytest.raises(ValidationError):
        Operator(SPACE, np.eye(3))
    with pytest.raises(ValidationError):
        Operator(SPACE, np.kron(SIGMA, np.eye(2)), hermitian=True)


def test_operator_matrix_is_read_only():
    op = identity(SPACE)
    with pytest.raises(ValueError):
        op.matrix[0, 0] = 2


def test_product_state_orders_left_site_first():
    psi = product_state(SPACE, [UP, DOWN])
    assert np.allclose(psi, [0, 0, 1, 0])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-5, 5))
def test_propagator_is_unitary_and_matches_expm(seed, t):
    h = random_hermitian(np.random.default_rng(seed))
    u = propagator(h, t)
    assert np.allclose(u @ u.conj().T, np.eye(4), atol=1e-12)
    assert np.allclose(u, scipy.linalg.expm(-1j * h * t), atol=1e-10)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_heisenberg_preserves_hermiticity_and_type(seed):
    rng = np.random.default_rng(seed)
    h, a = random_hermitian(rng), random_hermitian(rng)
    out = heisenberg(a, h, 0.7)
    assert isinstance(out, np.ndarray)
    assert np.allclose(out, out.conj().T, atol=1e-12)
    wrapped = heisenberg(Operator(SPACE, a), h, 0.7)
    assert isinstance(wrapped, Operator)
    assert np.allclose(wrapped.matrix, out)


def test_non_hermitian_hamiltonian_is_rejected():
    with pytest.raises(ValidationError):
        propagator(np.kron(SIGMA, np.eye(2)), 1.0)


def test_eigensystem_groups_degenerate_levels():
    h = Operator(SPACE, np.diag([1.0, 1.0 + 1e-12, 2.0, 3.0]), hermitian=True)
    eig = eigensystem(h)
    assert len(eig.energies) == 3
    assert np.allclose(sum(p.matrix for p in eig.projectors), np.eye(4))
    assert np.isclose(eig.projectors[0].matrix.trace().real, 2)
    assert np.any(np.isclose(eig.frequencies, 0.0))
    assert np.allclose(eig.frequencies, -eig.frequencies[::-1])
