import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from drivenchain.algebra import (
    MAX_SITES,
    basis_index,
    commutator,
    density_matrix_violations,
    excitation_table,
    is_hermitian,
    is_unitary,
    matrix_exponential,
    pauli_at,
    validate_density_matrix,
)
from drivenchain.hamiltonian import ChainConfig, hopping_terms, number_operator

from conftest import random_density, random_hermitian

X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]])
Z = np.diag([1.0, -1.0]).astype(complex)


def test_single_site_z():
    assert np.array_equal(pauli_at(1, 1, "Z"), np.diag([1, -1]))


def test_embedding_second_site_x():
    expected = np.kron(np.eye(2), X)
    assert np.array_equal(pauli_at(2, 2, "X"), expected)


def test_occupation_projector_on_site_one():
    p = pauli_at(2, 1, "Plus") @ pauli_at(2, 1, "Minus")
    assert np.array_equal(p, np.diag([1, 1, 0, 0]))


@pytest.mark.parametrize("args", [(2, 0, "X"), (2, 3, "Z"), (MAX_SITES + 1, 1, "X"), (2, 1, "W")])
def test_pauli_at_rejects_bad_input(args):
    with pytest.raises(ValueError):
        pauli_at(*args)


def test_basis_ordering_two_sites():
    table = excitation_table(2)
    assert table.tolist() == [[True, True], [True, False], [False, True], [False, False]]
    assert basis_index(2, {1}) == 1
    assert basis_index(2, {2}) == 2
    assert basis_index(2, set()) == 3


@given(st.integers(1, 4), st.data())
def test_paulis_square_to_identity(n, data):
    site = data.draw(st.integers(1, n))
    for which in "XYZ":
        op = pauli_at(n, site, which)
        assert np.allclose(op @ op, np.eye(2**n), atol=0)


@given(st.integers(2, 4), st.data())
def test_distinct_sites_commute(n, data):
    a, b = data.draw(st.lists(st.integers(1, n), min_size=2, max_size=2, unique=True))
    wa, wb = data.draw(st.sampled_from("XYZ")), data.draw(st.sampled_from(["X", "Y", "Z", "Plus", "Minus"]))
    assert not np.any(commutator(pauli_at(n, a, wa), pauli_at(n, b, wb)))


@given(st.integers(1, 4), st.data())
def test_ladder_algebra(n, data):
    site = data.draw(st.integers(1, n))
    up, down = pauli_at(n, site, "Plus"), pauli_at(n, site, "Minus")
    assert not np.any(up @ up)
    assert np.array_equal(up @ down + down @ up, np.eye(2**n))


def test_commutator_examples():
    assert not np.any(commutator(Z, Z))
    assert np.allclose(commutator(X, Y), 2j * Z)
    with pytest.raises(ValueError):
        commutator(np.eye(2), np.eye(4))


def test_hopping_commutes_with_number_operator():
    h1, _ = hopping_terms(ChainConfig.homogeneous(2, 10, 0.37))
    assert np.max(np.abs(commutator(h1, number_operator(2)))) == 0


def test_exponential_examples():
    assert np.allclose(matrix_exponential(np.zeros((4, 4))), np.eye(4), atol=0)
    assert np.allclose(matrix_exponential(1j * np.pi * X / 2), 1j * X, atol=1e-15)
    with pytest.raises(ValueError):
        matrix_exponential(np.array([[np.nan]]))


def taylor(a, terms=30):
    out = np.eye(a.shape[0], dtype=complex)
    term = np.eye(a.shape[0], dtype=complex)
    for k in range(1, terms):
        term = term @ a / k
        out = out + term
    return out


def test_exponential_matches_series(rng):
    a = random_hermitian(rng, 4)
    a = a / np.linalg.norm(a, 2)
    assert np.max(np.abs(matrix_exponential(a) - taylor(a))) <= 1e-10


def test_exponential_relative_accuracy_at_norm_ten(rng):
    a = 1j * random_hermitian(rng, 8)
    a *= 10 / np.linalg.norm(a, 2)
    w, v = np.linalg.eigh(a / 1j)
    exact = v @ np.diag(np.exp(1j * w)) @ v.conj().T
    assert np.max(np.abs(matrix_exponential(a) - exact)) <= 1e-12 * 10


@given(st.integers(0, 2**32 - 1), st.sampled_from([2, 4, 8, 16]))
def test_exponential_inverse(seed, dim):
    a = random_hermitian(np.random.default_rng(seed), dim)
    prod = matrix_exponential(a) @ matrix_exponential(-a)
    assert np.max(np.abs(prod - np.eye(dim))) <= 1e-10


def test_predicates():
    assert is_hermitian(X) and not is_hermitian(1j * X)
    assert is_unitary(Y) and not is_unitary(2 * Y)


def test_density_matrix_checks(rng):
    rho = random_density(rng, 4)
    assert density_matrix_violations(rho) == []
    validate_density_matrix(rho)
    bad = np.diag([1.5, -0.5, 0, 0]).astype(complex)
    problems = density_matrix_violations(bad)
    assert any("negative eigenvalue" in p for p in problems)
    with pytest.raises(ValueError):
        validate_density_matrix(2 * rho)
    with pytest.raises(ValueError):
        validate_density_matrix(np.eye(3) / 3)
