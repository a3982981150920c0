"""Chain Hamiltonians for a driven, nearest-neighbour sigma^x sigma^x coupled qubit array.

Units: every frequency-like quantity is an angular frequency in rad/ns, times
are in ns and hbar = 1.  A nominal "10 GHz" site splitting is entered as
``omega = 10``.  The localisation physics depends only on ``e_ac / omega_drive``
and ``2 omega0 / omega_drive``, which do not care about that choice.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from .algebra import MAX_SITES, excitation_table, pauli_at


@dataclass(frozen=True)
class ChainConfig:
    """Static chain parameters plus the gradient drive ``(e_ac, omega_drive)``.

    ``omega`` holds the N site splittings, ``j`` the N-1 bond couplings.
    """

    n_sites: int
    omega: tuple[float, ...]
    j: tuple[float, ...]
    e_ac: float = 0.0
    omega_drive: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "omega", tuple(float(w) for w in self.omega))
        object.__setattr__(self, "j", tuple(float(c) for c in self.j))
        object.__setattr__(self, "e_ac", float(self.e_ac))
        object.__setattr__(self, "omega_drive", float(self.omega_drive))
        if not isinstance(self.n_sites, int) or not 1 <= self.n_sites <= MAX_SITES:
            raise ValueError(f"n_sites must be an integer in [1, {MAX_SITES}], got {self.n_sites!r}")
        if len(self.omega) != self.n_sites:
            raise ValueError(f"omega needs {self.n_sites} entries, got {len(self.omega)}")
        if len(self.j) != self.n_sites - 1:
            raise ValueError(f"j needs {self.n_sites - 1} entries, got {len(self.j)}")
        values = self.omega + self.j + (self.e_ac, self.omega_drive)
        if not all(math.isfinite(v) for v in values):
            raise ValueError("chain parameters must be finite")
        if self.omega_drive < 0:
            raise ValueError("omega_drive must be non-negative")
        if self.e_ac != 0 and self.omega_drive == 0:
            raise ValueError("a nonzero drive amplitude needs omega_drive > 0")

    @classmethod
    def homogeneous(
        cls, n_sites: int, omega0: float, j: float, e_ac: float = 0.0, omega_drive: float = 0.0
    ) -> ChainConfig:
        return cls(n_sites, (omega0,) * n_sites, (j,) * (n_sites - 1), e_ac, omega_drive)

    @property
    def dim(self) -> int:
        return 2**self.n_sites

    @property
    def driven(self) -> bool:
        return self.e_ac != 0.0

    @property
    def period(self) -> float:
        """Drive period 2 pi / omega_drive (inf when undriven)."""
        return 2 * math.pi / self.omega_drive if self.omega_drive > 0 else math.inf

    def is_homogeneous(self) -> bool:
        return len(set(self.omega)) == 1 and len(set(self.j)) <= 1

    def with_drive(self, e_ac: float, omega_drive: float | None = None) -> ChainConfig:
        if omega_drive is None:
            omega_drive = self.omega_drive
        return replace(self, e_ac=e_ac, omega_drive=omega_drive)


def omega_fastest(cfg: ChainConfig) -> float:
    """Upper bound on the Bohr-frequency spread of H(t) over a drive cycle (rad/ns)."""
    k = np.arange(1, cfg.n_sites + 1)
    spread = float(np.sum(np.abs(cfg.omega) + k * abs(cfg.e_ac)) + 2 * np.sum(np.abs(cfg.j)))
    return max(spread, cfg.omega_drive)


# Matrix building blocks.  Diagonal parts are returned as real vectors because
# the fast propagators only ever need them elementwise.


@lru_cache(maxsize=None)
def _sigma_z_diagonals(n_sites: int) -> np.ndarray:
    """(N, 2**N) array; row k-1 holds the diagonal of sigma_k^z."""
    table = excitation_table(n_sites)
    z = np.where(table.T, 1.0, -1.0)
    z.setflags(write=False)
    return z


def static_z_diagonal(cfg: ChainConfig) -> np.ndarray:
    """Diagonal of sum_k (omega_k / 2) sigma_k^z."""
    return 0.5 * np.asarray(cfg.omega) @ _sigma_z_diagonals(cfg.n_sites)


def drive_profile_diagonal(n_sites: int) -> np.ndarray:
    """Diagonal of (1/2) sum_k k sigma_k^z, the unit-amplitude gradient drive."""
    k = np.arange(1, n_sites + 1, dtype=float)
    return 0.5 * k @ _sigma_z_diagonals(n_sites)


@lru_cache(maxsize=None)
def _bond_operators(n_sites: int) -> tuple[tuple[np.ndarray, np.ndarray], ...]:
    """Per bond k: (sigma_k^+ sigma_{k+1}^- + h.c., sigma_k^+ sigma_{k+1}^+ + h.c.)."""
    ops = []
    for k in range(1, n_sites):
        hop = pauli_at(n_sites, k, "Plus") @ pauli_at(n_sites, k + 1, "Minus")
        pair = pauli_at(n_sites, k, "Plus") @ pauli_at(n_sites, k + 1, "Plus")
        hop = hop + hop.conj().T
        pair = pair + pair.conj().T
        hop.setflags(write=False)
        pair.setflags(write=False)
        ops.append((hop, pair))
    return tuple(ops)


def hopping_terms(cfg: ChainConfig) -> tuple[np.ndarray, np.ndarray]:
    """(h1, h2): the excitation-conserving and the pair-creating coupling parts."""
    h1 = np.zeros((cfg.dim, cfg.dim), dtype=complex)
    h2 = np.zeros((cfg.dim, cfg.dim), dtype=complex)
    for coupling, (hop, pair) in zip(cfg.j, _bond_operators(cfg.n_sites)):
        h1 += coupling * hop
        h2 += coupling * pair
    return h1, h2


def h_static(cfg: ChainConfig) -> np.ndarray:
    """sum_k (omega_k/2) sigma_k^z + sum_k J_k sigma_k^x sigma_{k+1}^x."""
    xx = np.zeros((cfg.dim, cfg.dim), dtype=complex)
    for k, coupling in enumerate(cfg.j, start=1):
        xx += coupling * (pauli_at(cfg.n_sites, k, "X") @ pauli_at(cfg.n_sites, k + 1, "X"))
    return np.diag(static_z_diagonal(cfg)).astype(complex) + xx


def drive_amplitude(cfg: ChainConfig, t: float) -> float:
    """E_ac cos(omega t), the scalar multiplying the gradient profile."""
    return cfg.e_ac * math.cos(cfg.omega_drive * t) if cfg.e_ac else 0.0


def h_drive(cfg: ChainConfig, t: float) -> np.ndarray:
    """(1/2) sum_k k E_ac cos(omega t) sigma_k^z."""
    return np.diag(drive_amplitude(cfg, t) * drive_profile_diagonal(cfg.n_sites)).astype(complex)


def h_total(cfg: ChainConfig, t: float) -> np.ndarray:
    return h_static(cfg) + h_drive(cfg, t)


def h_z(cfg: ChainConfig, t: float) -> np.ndarray:
    diag = static_z_diagonal(cfg) + drive_amplitude(cfg, t) * drive_profile_diagonal(cfg.n_sites)
    return np.diag(diag).astype(complex)


def decompose(cfg: ChainConfig, t: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Split H(t) into (h_z(t), h1, h2) with h_z + h1 + h2 == h_total(t)."""
    h1, h2 = hopping_terms(cfg)
    return h_z(cfg, t), h1, h2


def number_operator(n_sites: int) -> np.ndarray:
    """Total excitation number sum_k sigma_k^+ sigma_k^-; diagonal, integer entries."""
    return np.diag(excitation_table(n_sites).sum(axis=1)).astype(complex)


def u0_phases(cfg: ChainConfig, t: float) -> np.ndarray:
    """Diagonal of -i log u0(t): sum_k (omega_k t/2 + k E_ac sin(omega t)/(2 omega)) sigma_k^z."""
    z = _sigma_z_diagonals(cfg.n_sites)
    k = np.arange(1, cfg.n_sites + 1)
    swing = cfg.e_ac * math.sin(cfg.omega_drive * t) / cfg.omega_drive if cfg.e_ac else 0.0
    angles = 0.5 * (np.asarray(cfg.omega) * t + k * swing)
    return angles @ z


def u0(cfg: ChainConfig, t: float) -> np.ndarray:
    """Interaction-picture propagator exp(-i int_0^t h_z); diagonal and unitary."""
    return np.diag(np.exp(-1j * u0_phases(cfg, t)))
