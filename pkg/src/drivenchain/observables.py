"""Initial states, population and coherence observables, and curve analysis."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from .algebra import basis_index, check_sites, excitation_table, n_sites_of
from .bessel import z01

if TYPE_CHECKING:
    from .dynamics import Trajectory


def init_single_excitation(n_sites: int, site: int) -> np.ndarray:
    """|site excited, all others ground><...|."""
    check_sites(n_sites)
    if not 1 <= site <= n_sites:
        raise ValueError(f"site {site} out of range [1, {n_sites}]")
    rho = np.zeros((2**n_sites, 2**n_sites), dtype=complex)
    i = basis_index(n_sites, {site})
    rho[i, i] = 1.0
    return rho


def population(rho: np.ndarray, site: int) -> float:
    """<s+_site s-_site>, clamped into [0, 1] for reporting (rho is not touched)."""
    n = n_sites_of(rho.shape[0])
    if not 1 <= site <= n:
        raise ValueError(f"site {site} out of range [1, {n}]")
    occupied = excitation_table(n)[:, site - 1]
    value = float(np.real(np.diagonal(rho)[occupied].sum()))
    return min(1.0, max(0.0, value))


def coherence_sum(rho: np.ndarray) -> float:
    """Sum of |rho_ab| over unordered pairs a < b."""
    return float(np.abs(rho[np.triu_indices(rho.shape[0], 1)]).sum())


def coherence_C(trajectory: Trajectory) -> float:
    """Time maximum of the off-diagonal pair sum stored in the trajectory."""
    coh = getattr(trajectory, "coherence", None)
    if coh is None or len(coh) == 0:
        raise ValueError("trajectory carries no coherence samples")
    return float(np.max(coh))


@dataclass
class SweepCurve:
    """An observable sampled on a strictly increasing parameter grid.

    ``columns`` holds extra per-point series (same length as ``grid``) that are
    written next to ``values`` in the CSV output.
    """

    parameter: str
    grid: np.ndarray
    value_name: str
    values: np.ndarray
    columns: dict[str, np.ndarray] = field(default_factory=dict)
    point_metadata: list[dict] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.grid = np.asarray(self.grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.grid.ndim != 1 or self.grid.shape != self.values.shape:
            raise ValueError("grid and values must be 1-D arrays of equal length")
        if np.any(np.diff(self.grid) <= 0):
            raise ValueError("sweep grid must be strictly increasing")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("sweep values must be finite")
        for name, col in self.columns.items():
            if len(col) != len(self.grid):
                raise ValueError(f"column {name!r} has the wrong length")

    def nearest_index(self, x: float) -> int:
        return int(np.argmin(np.abs(self.grid - x)))

    def at(self, x: float) -> float:
        return float(self.values[self.nearest_index(x)])


def _peak_and_dip(curve: SweepCurve, dip_at: float | None) -> tuple[float, float]:
    dip_at = z01() if dip_at is None else dip_at
    if curve.grid[0] > dip_at or curve.grid[-1] < dip_at:
        raise ValueError(f"curve must cover the dip position {dip_at:.6g}")
    return float(curve.values.max()), curve.at(dip_at)


def visibility(curve: SweepCurve, dip_at: float | None = None) -> float:
    """(P_peak - P_dip) / (P_peak + P_dip), dip taken at the grid point nearest z01."""
    peak, dip = _peak_and_dip(curve, dip_at)
    if peak + dip == 0.0:
        raise ValueError("visibility undefined for a curve that is zero at peak and dip")
    return (peak - dip) / (peak + dip)


def contrast(curve: SweepCurve, dip_at: float | None = None) -> float:
    """Unnormalised fringe depth P_peak - P_dip."""
    peak, dip = _peak_and_dip(curve, dip_at)
    return peak - dip


def local_minima(values: np.ndarray) -> np.ndarray:
    """Indices of interior strict local minima."""
    v = np.asarray(values)
    return np.nonzero((v[1:-1] < v[:-2]) & (v[1:-1] < v[2:]))[0] + 1
