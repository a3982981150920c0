"""Local Markovian noise and the master-equation generator.

Dissipation:  gamma_diss sum_k (2 s-_k rho s+_k - {s+_k s-_k, rho}).
Dephasing, projector form:  gamma_deph sum_k (2 P_k rho P_k - {P_k, rho}), P_k = s+_k s-_k.
Dephasing, sigma-z form:  gamma_deph sum_k (Z_k rho Z_k - rho).

Since P = (1 + Z)/2 the projector form is exactly half the sigma-z form at the
same rate.  Both dephasing forms are diagonal in the product basis: the
coherence rho_ab decays at gamma (projector) or 2 gamma (sigma-z) per site on
which a and b differ.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .algebra import excitation_table, n_sites_of, pauli_at
from .hamiltonian import (
    ChainConfig,
    drive_profile_diagonal,
    h_total,
    h_z,
    hopping_terms,
    static_z_diagonal,
)


class DephasingForm(enum.Enum):
    PROJECTOR = "projector"
    SIGMA_Z = "sigma_z"


@dataclass(frozen=True)
class NoiseConfig:
    gamma_deph: float = 0.0
    gamma_diss: float = 0.0
    deph_form: DephasingForm = DephasingForm.SIGMA_Z

    def __post_init__(self) -> None:
        object.__setattr__(self, "gamma_deph", float(self.gamma_deph))
        object.__setattr__(self, "gamma_diss", float(self.gamma_diss))
        object.__setattr__(self, "deph_form", DephasingForm(self.deph_form))
        for name in ("gamma_deph", "gamma_diss"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and non-negative, got {v}")

    @property
    def silent(self) -> bool:
        return self.gamma_deph == 0.0 and self.gamma_diss == 0.0


def _differing_sites(n_sites: int) -> np.ndarray:
    """(d, d) integer array: number of sites on which basis states a and b differ."""
    table = excitation_table(n_sites)
    return (table[:, None, :] != table[None, :, :]).sum(axis=2)


def dephasing_rates(n_sites: int, noise: NoiseConfig) -> np.ndarray:
    """(d, d) real array r with dephasing_term(rho) == -r * rho elementwise."""
    per_site = noise.gamma_deph if noise.deph_form is DephasingForm.PROJECTOR else 2 * noise.gamma_deph
    return per_site * _differing_sites(n_sites)


def dephasing_term(rho: np.ndarray, noise: NoiseConfig) -> np.ndarray:
    n = n_sites_of(rho.shape[0])
    out = np.zeros_like(rho, dtype=complex)
    if noise.gamma_deph == 0.0:
        return out
    for k in range(1, n + 1):
        if noise.deph_form is DephasingForm.PROJECTOR:
            p = pauli_at(n, k, "Plus") @ pauli_at(n, k, "Minus")
            out += 2 * p @ rho @ p - p @ rho - rho @ p
        else:
            z = pauli_at(n, k, "Z")
            out += z @ rho @ z - rho
    return noise.gamma_deph * out


def dissipation_term(rho: np.ndarray, noise: NoiseConfig) -> np.ndarray:
    n = n_sites_of(rho.shape[0])
    out = np.zeros_like(rho, dtype=complex)
    if noise.gamma_diss == 0.0:
        return out
    for k in range(1, n + 1):
        up, down = pauli_at(n, k, "Plus"), pauli_at(n, k, "Minus")
        occ = up @ down
        out += 2 * down @ rho @ up - occ @ rho - rho @ occ
    return noise.gamma_diss * out


def master_rhs(
    rho: np.ndarray, t: float, chain: ChainConfig, noise: NoiseConfig, include_h2: bool = True
) -> np.ndarray:
    """-i[H(t), rho] + dephasing + dissipation."""
    if include_h2:
        h = h_total(chain, t)
    else:
        h = h_z(chain, t) + hopping_terms(chain)[0]
    return -1j * (h @ rho - rho @ h) + dephasing_term(rho, noise) + dissipation_term(rho, noise)


def collapse_operators(n_sites: int, noise: NoiseConfig) -> list[np.ndarray]:
    """Operators c with the generator written as sum_c (c rho c+ - {c+c, rho}/2)."""
    ops = []
    if noise.gamma_diss > 0:
        ops += [math.sqrt(2 * noise.gamma_diss) * pauli_at(n_sites, k, "Minus") for k in range(1, n_sites + 1)]
    if noise.gamma_deph > 0:
        for k in range(1, n_sites + 1):
            if noise.deph_form is DephasingForm.PROJECTOR:
                p = pauli_at(n_sites, k, "Plus") @ pauli_at(n_sites, k, "Minus")
                ops.append(math.sqrt(2 * noise.gamma_deph) * p)
            else:
                ops.append(math.sqrt(noise.gamma_deph) * pauli_at(n_sites, k, "Z"))
    return ops


def liouvillian(h: np.ndarray, ops: list[np.ndarray]) -> np.ndarray:
    """Superoperator acting on row-major vec(rho) (``rho.reshape(-1)``)."""
    d = h.shape[0]
    eye = np.eye(d)
    sup = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
    for c in ops:
        cc = c.conj().T @ c
        sup += np.kron(c, c.conj()) - 0.5 * np.kron(cc, eye) - 0.5 * np.kron(eye, cc.T)
    return sup


def parity_diagonal_indices(n_sites: int) -> np.ndarray:
    """Row-major vec indices (a, b) with equal excitation parity.

    The generator never mixes these with the parity-off-diagonal entries, so a
    state that starts parity-diagonal stays inside this half of the space.
    """
    par = excitation_table(n_sites).sum(axis=1) % 2
    d = par.size
    a, b = np.nonzero(par[:, None] == par[None, :])
    return a * d + b


def _commutator_diagonal(diag: np.ndarray) -> np.ndarray:
    return (-1j * (diag[:, None] - diag[None, :])).reshape(-1)


def generator_diagonals(
    chain: ChainConfig, noise: NoiseConfig, keep: np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """(static, drive) diagonals on ``keep``; ``drive`` is for unit E_ac cos(w t)."""
    d = chain.dim
    if keep is None:
        keep = np.arange(d * d)
    static = _commutator_diagonal(static_z_diagonal(chain)) - dephasing_rates(chain.n_sites, noise).reshape(-1)
    drive = _commutator_diagonal(drive_profile_diagonal(chain.n_sites))
    return static[keep], drive[keep]


def coupling_generator(
    chain: ChainConfig, gamma_diss: float, include_h2: bool = True, keep: np.ndarray | None = None
) -> np.ndarray:
    """Hopping commutator plus dissipator on ``keep`` (dephasing lives in the diagonal)."""
    d = chain.dim
    if keep is None:
        keep = np.arange(d * d)
    h1, h2 = hopping_terms(chain)
    ops = collapse_operators(chain.n_sites, NoiseConfig(gamma_diss=gamma_diss))
    full = liouvillian(h1 + h2 if include_h2 else h1, ops)
    return np.ascontiguousarray(full[np.ix_(keep, keep)])
