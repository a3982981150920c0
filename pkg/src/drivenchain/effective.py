"""Rotating-wave predictions for the driven chain.

In the interaction picture the hopping term of bond k picks up the phase
exp(-i z sin wt) and the pair term exp(+i (2k+1) z sin wt), with z = E_ac/w.
Expanding both with Jacobi-Anger and keeping only non-rotating harmonics gives
the time-independent couplings ``g`` (hopping) and ``g'_k`` (pair creation).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .algebra import pauli_at
from .bessel import bessel_j
from .hamiltonian import ChainConfig

RESONANCE_TOL = 1e-9


@dataclass(frozen=True)
class EffectiveCouplings:
    g: float
    gprime: tuple[float, ...]
    resonance_index: int | None


def _require_homogeneous(cfg: ChainConfig) -> None:
    if cfg.n_sites < 2:
        raise ValueError("effective couplings need at least one bond (n_sites >= 2)")
    if not cfg.is_homogeneous():
        raise ValueError("closed-form couplings assume a homogeneous chain (equal omega_k and J)")


def coupling_g(cfg: ChainConfig) -> float:
    """g = J * J_0(E_ac / w)."""
    _require_homogeneous(cfg)
    j = cfg.j[0]
    if cfg.e_ac == 0.0:
        return j
    return j * bessel_j(0, cfg.e_ac / cfg.omega_drive)


def resonance_index(omega0: float, omega_drive: float, tol: float = RESONANCE_TOL) -> int | None:
    """Negative integer n' with |2 w0 + n' w| <= tol * w, or None."""
    if not omega_drive > 0 or not omega0 > 0:
        raise ValueError("resonance_index needs positive omega0 and omega_drive")
    n = -round(2.0 * omega0 / omega_drive)
    if n <= -1 and abs(2.0 * omega0 + n * omega_drive) <= tol * omega_drive:
        return int(n)
    return None


def _resonance_of(cfg: ChainConfig, tol: float) -> int | None:
    if cfg.omega_drive == 0.0 or cfg.omega[0] <= 0.0:
        return None
    return resonance_index(cfg.omega[0], cfg.omega_drive, tol)


def coupling_gprime(cfg: ChainConfig, bond_k: int, tol: float = RESONANCE_TOL) -> float:
    """g'_k = J * J_|n'|(|n'| E_ac (2k+1) / (2 w0)), zero off resonance.

    The (-1)^n' factor from J_{n'} with negative n' is not included.
    """
    _require_homogeneous(cfg)
    if not 1 <= bond_k <= cfg.n_sites - 1:
        raise ValueError(f"bond index {bond_k} out of range [1, {cfg.n_sites - 1}]")
    n = _resonance_of(cfg, tol)
    if n is None:
        return 0.0
    order = abs(n)
    arg = order * cfg.e_ac * (2 * bond_k + 1) / (2.0 * cfg.omega[0])
    return cfg.j[0] * bessel_j(order, arg)


def effective_couplings(cfg: ChainConfig, tol: float = RESONANCE_TOL) -> EffectiveCouplings:
    _require_homogeneous(cfg)
    n = _resonance_of(cfg, tol)
    gp = tuple(coupling_gprime(cfg, k, tol) for k in range(1, cfg.n_sites))
    return EffectiveCouplings(coupling_g(cfg), gp, n)


def effective_hamiltonian(cfg: ChainConfig, tol: float = RESONANCE_TOL) -> np.ndarray:
    """sum_k g (s+_k s-_{k+1} + h.c.) + g'_k (s+_k s+_{k+1} + h.c.)."""
    eff = effective_couplings(cfg, tol)
    n = cfg.n_sites
    h = np.zeros((cfg.dim, cfg.dim), dtype=complex)
    for k, gp in enumerate(eff.gprime, start=1):
        up = pauli_at(n, k, "Plus")
        hop = up @ pauli_at(n, k + 1, "Minus")
        pair = up @ pauli_at(n, k + 1, "Plus")
        h += eff.g * (hop + hop.conj().T)
        if gp:
            h += gp * (pair + pair.conj().T)
    return h


def jacobi_anger_check(z: float, phi: float, truncation_m: int) -> float:
    """|exp(i z sin phi) - sum_{|n|<=M} J_n(z) exp(i n phi)|.

    Meaningful when truncation_m >= |z| + 20.
    """
    exact = cmath.exp(1j * z * math.sin(phi))
    series = sum(bessel_j(n, z) * cmath.exp(1j * n * phi) for n in range(-truncation_m, truncation_m + 1))
    return abs(exact - series)


def _harmonic_sum(z: float, t: float, omega: float, sign: int, n_max: int) -> complex:
    # exp(i sign z sin(wt)) truncated to |n| <= n_max
    return sum(
        bessel_j(n, z) * cmath.exp(1j * sign * n * omega * t) for n in range(-n_max, n_max + 1)
    )


def interaction_picture_coupling(cfg: ChainConfig, t: float, n_max: int = 60) -> np.ndarray:
    """Harmonic-series form of u0(t)^dagger (h1 + h2) u0(t).

    Bond k contributes J_k [f_k(t) s+_k s-_{k+1} + p_k(t) s+_k s+_{k+1} + h.c.] with
    f_k = e^{i(w_k - w_{k+1})t} sum_n J_n(z) e^{-inwt} and
    p_k = e^{i(w_k + w_{k+1})t} sum_n J_n((2k+1)z) e^{inwt}.  Works for any chain.
    """
    n = cfg.n_sites
    z = cfg.e_ac / cfg.omega_drive if cfg.e_ac else 0.0
    h = np.zeros((cfg.dim, cfg.dim), dtype=complex)
    for k in range(1, n):
        wk, wn = cfg.omega[k - 1], cfg.omega[k]
        f = cmath.exp(1j * (wk - wn) * t) * _harmonic_sum(z, t, cfg.omega_drive, -1, n_max)
        p = cmath.exp(1j * (wk + wn) * t) * _harmonic_sum((2 * k + 1) * z, t, cfg.omega_drive, 1, n_max)
        up = pauli_at(n, k, "Plus")
        hop = f * (up @ pauli_at(n, k + 1, "Minus"))
        pair = p * (up @ pauli_at(n, k + 1, "Plus"))
        h += cfg.j[k - 1] * (hop + hop.conj().T + pair + pair.conj().T)
    return h
