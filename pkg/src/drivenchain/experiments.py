"""Transfer protocols and parameter sweeps.

Every sweep is split into fixed-size chunks of grid points.  A chunk is one
batched call into the dynamics engines, so results depend on the chunk
composition only; the worker pool merely decides where chunks run.  That
makes output identical for any worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import partial
from typing import Callable, Sequence

import numpy as np

from .bessel import bessel_j, z01
from .dynamics import (
    ORACLE_DT_FACTOR,
    ORACLE_MAX_SITES,
    IntegratorConfig,
    Method,
    Trajectory,
    evolve,
    evolve_many,
)
from .effective import coupling_g, resonance_index
from .errors import ConfigError, InvariantViolation
from .hamiltonian import ChainConfig, omega_fastest
from .lindblad import NoiseConfig
from .observables import SweepCurve, contrast, init_single_excitation, visibility

AMPLITUDE_GRID_MAX = 8.0
POPULATION_TOL = 1e-8
LOCK_TOL = 1e-4
CHUNK_SIZE = 32

FIG5_RATES = (0.0, 0.001, 0.005, 0.01, 0.05, 0.1)
FIG5_TRACE_RATES = (0.0, 0.001, 0.01, 0.1)
FIG7_RATES = (0.0001, 0.0005, 0.001, 0.005)


def amplitude_grid(stop: float = 6.0, points: int = 121) -> np.ndarray:
    return np.linspace(0.0, stop, points)


def comb_frequencies(omega0: float, lo: float, hi: float) -> np.ndarray:
    """Drive frequencies 2 omega0 / n inside [lo, hi], ascending."""
    n_lo = max(1, math.ceil(2 * omega0 / hi - 1e-12))
    n_hi = math.floor(2 * omega0 / lo + 1e-12)
    return np.sort(2 * omega0 / np.arange(n_lo, n_hi + 1))


def merge_comb(grid: np.ndarray, omega0: float) -> np.ndarray:
    """Add the resonance comb inside the span of ``grid``, dropping near-duplicates."""
    grid = np.asarray(grid, dtype=float)
    merged = np.sort(np.concatenate([grid, comb_frequencies(omega0, grid[0], grid[-1])]))
    keep = np.concatenate([[True], np.diff(merged) > 1e-9 * merged[-1]])
    return merged[keep]


def frequency_grid(omega0: float = 10.0, lo: float = 0.25, hi: float = 2.5, points: int = 200, comb: bool = True) -> np.ndarray:
    """Uniform grid, optionally merged with the resonance comb so narrow peaks are hit."""
    grid = np.linspace(lo, hi, points)
    return merge_comb(grid, omega0) if comb else grid


def rate_ladder(lowest: float = 1e-5, highest: float = 0.1, points: int = 26) -> np.ndarray:
    """Zero followed by a logarithmic ladder of rates."""
    return np.concatenate([[0.0], np.logspace(math.log10(lowest), math.log10(highest), points)])


# -- point evaluation ---------------------------------------------------------------


@dataclass(frozen=True)
class PointResult:
    max_transfer: float
    time_of_max: float
    coherence_C: float
    checks: dict


def _summarise(tr: Trajectory, target: int) -> PointResult:
    pops = tr.population(target)
    i = int(np.argmax(pops))
    value = float(pops[i])
    if value < -POPULATION_TOL or value > 1 + POPULATION_TOL:
        raise InvariantViolation(f"population {value!r} outside [0, 1]")
    return PointResult(min(1.0, max(0.0, value)), float(tr.times[i]), float(tr.coherence.max()), tr.metadata["checks"])


def _run_chunk(
    items: Sequence[tuple[ChainConfig, NoiseConfig]],
    icfg: IntegratorConfig,
    source: int,
    target: int,
    include_h2: bool,
) -> list[PointResult]:
    n = items[0][0].n_sites
    rho0 = init_single_excitation(n, source)
    trajs = evolve_many(rho0, [c for c, _ in items], [nz for _, nz in items], icfg, include_h2)
    return [_summarise(tr, target) for tr in trajs]


def run_points(
    items: Sequence[tuple[ChainConfig, NoiseConfig]],
    icfg: IntegratorConfig,
    source: int = 1,
    target: int | None = None,
    include_h2: bool = True,
    workers: int = 1,
    chunk_size: int = CHUNK_SIZE,
) -> list[PointResult]:
    """Max transfer for every (chain, noise) item, in input order."""
    if not items:
        return []
    n = items[0][0].n_sites
    target = n if target is None else target
    if source == target:
        raise ValueError("source and target sites must differ")
    for site in (source, target):
        if not 1 <= site <= n:
            raise ValueError(f"site {site} out of range [1, {n}]")
    chunks = [list(items[i : i + chunk_size]) for i in range(0, len(items), chunk_size)]
    task = partial(_run_chunk, icfg=icfg, source=source, target=target, include_h2=include_h2)
    return [r for chunk in _map(task, chunks, workers) for r in chunk]


def _map(task: Callable, chunks: list, workers: int) -> list:
    if workers < 1:
        raise ConfigError(f"workers must be at least 1, got {workers}")
    if workers == 1 or len(chunks) == 1:
        return [task(c) for c in chunks]
    with ProcessPoolExecutor(max_workers=min(workers, len(chunks))) as pool:
        return list(pool.map(task, chunks))


def max_transfer(
    chain: ChainConfig,
    noise: NoiseConfig,
    icfg: IntegratorConfig,
    source: int = 1,
    target: int = 2,
    t_max: float | None = None,
    include_h2: bool = True,
) -> float:
    """Largest sampled population on ``target`` within [0, t_max] after exciting ``source``."""
    if t_max is not None:
        icfg = replace(icfg, t_end=t_max)
    return run_points([(chain, noise)], icfg, source, target, include_h2)[0].max_transfer


def _curve(
    parameter: str,
    grid: np.ndarray,
    results: list[PointResult],
    columns: dict | None = None,
    metadata: dict | None = None,
) -> SweepCurve:
    return SweepCurve(
        parameter,
        grid,
        "max_transfer",
        np.array([r.max_transfer for r in results]),
        columns or {},
        [{"time_of_max": r.time_of_max, "coherence_C": r.coherence_C, **r.checks} for r in results],
        metadata or {},
    )


def oracle_differences(
    items: Sequence[tuple[ChainConfig, NoiseConfig]],
    icfg: IntegratorConfig,
    values: np.ndarray,
    source: int = 1,
    target: int | None = None,
    include_h2: bool = True,
    workers: int = 1,
) -> np.ndarray:
    """|value - oracle value| per point, the oracle freezing the generator at step midpoints."""
    n = items[0][0].n_sites
    if n > ORACLE_MAX_SITES:
        raise ConfigError(f"oracle cross-check is limited to {ORACLE_MAX_SITES} sites")
    jobs = []
    for c, nz in items:
        step = ORACLE_DT_FACTOR / omega_fastest(c)
        jobs.append([(c, nz, replace(icfg, method=Method.ORACLE, dt_max=step, sample_stride=None))])
    task = partial(_oracle_chunk, source=source, target=n if target is None else target, include_h2=include_h2)
    oracle = [r for chunk in _map(task, jobs, workers) for r in chunk]
    return np.abs(np.asarray(values) - np.array(oracle))


def _oracle_chunk(items: list, source: int, target: int, include_h2: bool) -> list[float]:
    out = []
    for chain, noise, icfg in items:
        tr = evolve(init_single_excitation(chain.n_sites, source), chain, noise, icfg, include_h2)
        out.append(_summarise(tr, target).max_transfer)
    return out


# -- sweeps ------------------------------------------------------------------------------


def _check_amplitude_grid(grid: np.ndarray) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0 or grid.min() < 0 or grid.max() > AMPLITUDE_GRID_MAX:
        raise ConfigError(f"E_ac/omega grid must lie within [0, {AMPLITUDE_GRID_MAX:g}]")
    return grid


def sweep_amplitude(
    chain_base: ChainConfig,
    noise: NoiseConfig,
    icfg: IntegratorConfig,
    grid: np.ndarray | None = None,
    resonant: bool | None = None,
    include_h2: bool = True,
    workers: int = 1,
    source: int = 1,
    target: int | None = None,
    oracle_check: bool = False,
) -> SweepCurve:
    """Max transfer versus z = E_ac / omega at the drive frequency of ``chain_base``.

    ``resonant`` (when given) asserts whether 2 omega0 + n' omega = 0 has an
    integer solution for the base chain; include_h2=False drops the pair terms.
    """
    grid = _check_amplitude_grid(amplitude_grid() if grid is None else grid)
    w = chain_base.omega_drive
    if w <= 0:
        raise ConfigError("amplitude sweep needs omega_drive > 0")
    n_res = resonance_index(chain_base.omega[0], w) if chain_base.is_homogeneous() else None
    if resonant is not None and resonant != (n_res is not None):
        state = "resonant" if n_res is not None else "off-resonant"
        raise ConfigError(f"drive frequency {w:g} rad/ns is {state}, contrary to the requested flag")
    chains = [chain_base.with_drive(z * w) for z in grid]
    items = [(c, noise) for c in chains]
    results = run_points(items, icfg, source, target, include_h2, workers)
    cols = {}
    if oracle_check:
        values = [r.max_transfer for r in results]
        cols["oracle_abs_diff"] = oracle_differences(items, icfg, values, source, target, include_h2, workers)
    meta = {"include_h2": include_h2, "resonance_index": n_res, "omega_drive": w}
    return _curve("eac_over_omega", grid, results, cols, meta)


def sweep_frequency(
    chain_base: ChainConfig,
    noise: NoiseConfig,
    icfg: IntegratorConfig,
    grid: np.ndarray | None = None,
    workers: int = 1,
    lock: float | None = None,
    oracle_check: bool = False,
) -> SweepCurve:
    """Max transfer versus omega with E_ac / omega locked to the first J0 zero.

    At the lock the first-order hopping g vanishes, so any transfer comes from
    the pair-creation terms; |g| < 1e-4 J is asserted at every grid point.
    """
    grid = np.asarray(frequency_grid(chain_base.omega[0]) if grid is None else grid, dtype=float)
    if grid.size == 0 or np.any(grid <= 0):
        raise ConfigError("frequency grid must be positive")
    lock = z01() if lock is None else lock
    chains = [chain_base.with_drive(lock * w, w) for w in grid]
    j = max(abs(c) for c in chain_base.j)
    g_ratio = np.array([abs(coupling_g(c)) / j for c in chains])
    if np.any(g_ratio >= LOCK_TOL):
        bad = float(grid[np.argmax(g_ratio)])
        raise InvariantViolation(f"amplitude lock leaves |g| >= {LOCK_TOL:g} J at omega={bad:g}")
    items = [(c, noise) for c in chains]
    results = run_points(items, icfg, workers=workers)
    cols = {"two_omega0_over_omega": 2 * chain_base.omega[0] / grid}
    if oracle_check:
        values = [r.max_transfer for r in results]
        cols["oracle_abs_diff"] = oracle_differences(items, icfg, values, workers=workers)
    meta = {"lock_eac_over_omega": lock, "max_g_over_j": float(g_ratio.max())}
    return _curve("omega_drive", grid, results, cols, meta)


def rabi_envelope(g: float, detuning: float) -> float:
    """Two-level resonance envelope g^2 / (g^2 + detuning^2 / 4)."""
    return g * g / (g * g + 0.25 * detuning * detuning) if g or detuning else 1.0


def disorder_scan(
    chain_base: ChainConfig,
    icfg: IntegratorConfig,
    grid: np.ndarray | None = None,
    t_max: float = 500.0,
    z: float = 1.2,
    workers: int = 1,
    oracle_check: bool = False,
) -> SweepCurve:
    """Max transfer 1 -> 2 versus omega_2 - omega_1, noiseless, split symmetrically about omega0."""
    if chain_base.n_sites != 2:
        raise ConfigError("disorder scan is defined for two sites")
    grid = np.asarray(np.linspace(-0.1, 0.1, 81) if grid is None else grid, dtype=float)
    w = chain_base.omega_drive
    if w <= 0:
        raise ConfigError("disorder scan needs omega_drive > 0")
    omega0 = 0.5 * (chain_base.omega[0] + chain_base.omega[1])
    chains = [replace(chain_base, omega=(omega0 - d / 2, omega0 + d / 2), e_ac=z * w) for d in grid]
    g = chain_base.j[0] * bessel_j(0, z)
    items = [(c, NoiseConfig()) for c in chains]
    icfg = replace(icfg, t_end=t_max)
    results = run_points(items, icfg, workers=workers)
    cols = {"rabi_envelope": np.array([rabi_envelope(g, d) for d in grid])}
    if oracle_check:
        values = [r.max_transfer for r in results]
        cols["oracle_abs_diff"] = oracle_differences(items, icfg, values, workers=workers)
    return _curve("detuning", grid, results, cols, {"g": g, "eac_over_omega": z, "t_max": t_max})


@dataclass
class DephasingScan:
    """Transfer curves per dephasing rate plus population traces per (z, rate)."""

    curves: dict[float, SweepCurve]
    traces: dict[tuple[float, float], Trajectory] = field(default_factory=dict)


def dephasing_scan(
    chain_base: ChainConfig,
    icfg: IntegratorConfig,
    z_values: Sequence[float] = (0.0, 1.2),
    gamma_deph: Sequence[float] = FIG5_RATES,
    grid: np.ndarray | None = None,
    trace_rates: Sequence[float] | None = FIG5_TRACE_RATES,
    workers: int = 1,
    deph_form: str = "sigma_z",
) -> DephasingScan:
    """Pure dephasing (gamma_diss = 0): traces at fixed z and max-transfer curves per rate.

    The first J0 zero is always added to ``z_values``.
    """
    grid = _check_amplitude_grid(amplitude_grid() if grid is None else grid)
    w = chain_base.omega_drive
    if w <= 0:
        raise ConfigError("dephasing scan needs omega_drive > 0")
    rates = [float(r) for r in gamma_deph]
    noises = {r: NoiseConfig(gamma_deph=r, deph_form=deph_form) for r in rates}
    items = [(chain_base.with_drive(z * w), noises[r]) for r in rates for z in grid]
    results = run_points(items, icfg, workers=workers)
    curves = {}
    for i, r in enumerate(rates):
        part = results[i * grid.size : (i + 1) * grid.size]
        curves[r] = _curve("eac_over_omega", grid, part, metadata={"gamma_deph": r, "gamma_diss": 0.0})
    traces: dict[tuple[float, float], Trajectory] = {}
    if trace_rates is not None and len(trace_rates) > 0:
        zs = sorted(set(float(z) for z in z_values) | {z01()})
        pairs = [(z, float(r)) for z in zs for r in trace_rates]
        trajs = evolve_many(
            init_single_excitation(chain_base.n_sites, 1),
            [chain_base.with_drive(z * w) for z, _ in pairs],
            [NoiseConfig(gamma_deph=r, deph_form=deph_form) for _, r in pairs],
            icfg,
        )
        traces = dict(zip(pairs, trajs))
    return DephasingScan(curves, traces)


def coherence_vs_visibility(
    chain_base: ChainConfig,
    icfg: IntegratorConfig,
    rates: Sequence[float] | None = None,
    grid: np.ndarray | None = None,
    workers: int = 1,
    deph_form: str = "sigma_z",
) -> SweepCurve:
    """Coherence C and fringe visibility per dephasing rate (N = 2, gamma_diss = 0).

    C is taken from the run at the peak of each rate's transfer curve, where the
    excitation is most delocalised.  Columns carry visibility and the
    unnormalised contrast.
    """
    if chain_base.n_sites != 2:
        raise ConfigError("coherence-visibility protocol is defined for two sites")
    rates = rate_ladder() if rates is None else np.asarray(rates, dtype=float)
    grid = np.linspace(0.0, 3.0, 31) if grid is None else grid
    scan = dephasing_scan(chain_base, icfg, gamma_deph=rates, grid=grid, trace_rates=None, workers=workers, deph_form=deph_form)
    vis, con, coh, peak_z = [], [], [], []
    for r in rates:
        curve = scan.curves[float(r)]
        k = int(np.argmax(curve.values))
        vis.append(visibility(curve))
        con.append(contrast(curve))
        coh.append(curve.point_metadata[k]["coherence_C"])
        peak_z.append(float(curve.grid[k]))
    return SweepCurve(
        "gamma_deph",
        np.asarray(rates),
        "coherence_C",
        np.array(coh),
        {"visibility": np.array(vis), "contrast": np.array(con), "peak_eac_over_omega": np.array(peak_z)},
        [],
        {"deph_form": deph_form, "dip_eac_over_omega": float(grid[np.argmin(np.abs(np.asarray(grid) - z01()))])},
    )


def long_chain_run(
    chain_base: ChainConfig,
    icfg: IntegratorConfig,
    grid: np.ndarray | None = None,
    gamma_diss: Sequence[float] = FIG7_RATES,
    t_max: float = 2800.0,
    workers: int = 1,
    z_per_chunk: int = 4,
) -> dict[float, SweepCurve]:
    """Max transfer from the first to the last site versus z, one curve per dissipation rate.

    Runs with the split engine; every chunk carries all rates for a few z values
    so the Hamiltonian propagators are shared between rates.
    """
    grid = _check_amplitude_grid(amplitude_grid() if grid is None else grid)
    w = chain_base.omega_drive
    if w <= 0:
        raise ConfigError("long-chain run needs omega_drive > 0")
    rates = [float(r) for r in gamma_diss]
    icfg = replace(icfg, t_end=t_max)
    items = [(chain_base.with_drive(z * w), NoiseConfig(gamma_diss=r)) for z in grid for r in rates]
    results = run_points(items, icfg, 1, chain_base.n_sites, workers=workers, chunk_size=z_per_chunk * len(rates))
    curves = {}
    for i, r in enumerate(rates):
        part = results[i :: len(rates)]
        curves[r] = _curve("eac_over_omega", grid, part, metadata={"gamma_diss": r, "t_max": t_max})
    return curves
