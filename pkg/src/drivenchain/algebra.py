"""Dense operator algebra on the 2**N dimensional chain Hilbert space.

Basis convention (used by every module in the package): computational basis,
site 1 is the most significant qubit, and on each site the excited state
comes first.  A basis index ``i`` therefore has site ``k`` excited iff bit
``N - k`` of ``i`` is 0.  For two sites the ordering is
``|11>, |10>, |01>, |00>`` with ``1`` = excited.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
import scipy.linalg

MAX_SITES = 10

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
    # sigma^+ raises ground (index 1) to excited (index 0)
    "Plus": np.array([[0, 1], [0, 0]], dtype=complex),
    "Minus": np.array([[0, 0], [1, 0]], dtype=complex),
}


def check_sites(n_sites: int) -> None:
    if not 1 <= n_sites <= MAX_SITES:
        raise ValueError(f"n_sites must be in [1, {MAX_SITES}], got {n_sites}")


def pauli_at(n_sites: int, site: int, which: str) -> np.ndarray:
    """Embed a single-site operator at ``site`` (1-based) of an ``n_sites`` chain.

    ``which`` is one of ``X, Y, Z, Plus, Minus`` (``I`` is accepted too).
    """
    check_sites(n_sites)
    if not 1 <= site <= n_sites:
        raise ValueError(f"site {site} out of range [1, {n_sites}]")
    try:
        op = PAULI[which]
    except KeyError:
        raise ValueError(f"unknown single-site operator {which!r}") from None
    left = np.eye(2 ** (site - 1), dtype=complex)
    right = np.eye(2 ** (n_sites - site), dtype=complex)
    return np.kron(np.kron(left, op), right)


@lru_cache(maxsize=None)
def excitation_table(n_sites: int) -> np.ndarray:
    """Boolean array ``(2**N, N)``: entry ``[i, k-1]`` is True iff site k is excited in basis state i."""
    check_sites(n_sites)
    idx = np.arange(2**n_sites)[:, None]
    shifts = n_sites - 1 - np.arange(n_sites)[None, :]
    table = ((idx >> shifts) & 1) == 0
    table.setflags(write=False)
    return table


def basis_index(n_sites: int, excited: set[int] | frozenset[int]) -> int:
    """Index of the product state with exactly the sites in ``excited`` excited."""
    check_sites(n_sites)
    index = 0
    for k in range(1, n_sites + 1):
        if k not in excited:
            index |= 1 << (n_sites - k)
    return index


def parity(n_sites: int) -> np.ndarray:
    """Excitation-number parity (0 even, 1 odd) of every basis state."""
    return excitation_table(n_sites).sum(axis=1) % 2


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.shape != b.shape or a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"commutator needs equal square shapes, got {a.shape} and {b.shape}")
    return a @ b - b @ a


def matrix_exponential(a: np.ndarray) -> np.ndarray:
    """exp(a) by scaling and squaring with a Pade approximant."""
    a = np.asarray(a)
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix_exponential: non-finite entries")
    return scipy.linalg.expm(a)


def is_hermitian(a: np.ndarray, tol: float = 1e-12) -> bool:
    return bool(np.max(np.abs(a - a.conj().T), initial=0.0) <= tol)


def is_unitary(a: np.ndarray, tol: float = 1e-12) -> bool:
    eye = np.eye(a.shape[0])
    return bool(np.max(np.abs(a @ a.conj().T - eye), initial=0.0) <= tol)


def density_matrix_violations(
    rho: np.ndarray,
    trace_tol: float = 1e-9,
    herm_tol: float = 1e-9,
    eig_tol: float = 1e-8,
) -> list[str]:
    """Return a list of human-readable invariant violations (empty when valid)."""
    problems = []
    tr = np.trace(rho)
    if abs(tr - 1.0) > trace_tol:
        problems.append(f"trace {tr.real:.3e}{tr.imag:+.3e}j deviates from 1")
    herm = np.max(np.abs(rho - rho.conj().T), initial=0.0)
    if herm > herm_tol:
        problems.append(f"hermiticity deviation {herm:.3e}")
    lo = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min()
    if lo < -eig_tol:
        problems.append(f"negative eigenvalue {lo:.3e}")
    return problems


def validate_density_matrix(rho: np.ndarray) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"density matrix must be square, got shape {rho.shape}")
    dim = rho.shape[0]
    if dim < 2 or dim & (dim - 1):
        raise ValueError(f"density matrix dimension {dim} is not a power of two")
    problems = density_matrix_violations(rho)
    if problems:
        raise ValueError("invalid density matrix: " + "; ".join(problems))
    return rho


def n_sites_of(dim: int) -> int:
    n = dim.bit_length() - 1
    if 2**n != dim:
        raise ValueError(f"dimension {dim} is not a power of two")
    return n
