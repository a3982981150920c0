"""Time evolution of the driven, noisy chain.

All engines exploit the periodicity of H(t): the propagator over one drive
period is built once (with stroboscopic checkpoints inside the period) and then
applied repeatedly.  This is exactly equivalent to stepping the integrator
through the whole time window with the same step size, because the generator
at time t + nT equals the generator at t.

Methods
-------
RK4       classical RK4 on the superoperator propagator (fixed step).
ADAPTIVE  DOP853 with embedded error control on the superoperator propagator.
ORACLE    generator frozen at step midpoints, matrix exponential per step.
SPLIT     Strang splitting between the Hamiltonian flow (DOP853 unitaries per
          parity block) and the exact local noise channels.  Works on density
          matrices rather than superoperator propagators, so it is the method
          that scales to six sites.

Without a drive (omega_drive == 0) a pseudo-period is used instead.
"""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, field
from itertools import combinations
from typing import Sequence

import numpy as np
import scipy.linalg
import scipy.sparse

from .algebra import excitation_table, parity, validate_density_matrix
from .effective import effective_hamiltonian
from .errors import ConfigError, InvariantViolation
from .hamiltonian import (
    ChainConfig,
    drive_profile_diagonal,
    h_static,
    hopping_terms,
    omega_fastest,
    static_z_diagonal,
)
from .lindblad import (
    NoiseConfig,
    collapse_operators,
    coupling_generator,
    dephasing_rates,
    generator_diagonals,
    liouvillian,
    parity_diagonal_indices,
)
from .propagators import adaptive_checkpoints, midpoint_expm_checkpoints, rk4_checkpoints

DEFAULT_DT_FACTOR = 0.01
MAX_DT_FACTOR = 0.1
ORACLE_DT_FACTOR = 0.05
ORACLE_MAX_SITES = 3
# superoperator propagators beyond this many complex entries per batch need SPLIT
SUPEROP_BUDGET = 2**26

TRACE_TOL = 1e-9
HERMITIAN_TOL = 1e-9
EIGEN_TOL = 1e-8
MAX_EIGEN_CHECKS = 256
SPLIT_PHASE = 1.0  # max omega_fastest * substep when the noise does not commute with H


class Method(enum.Enum):
    RK4 = "rk4"
    ADAPTIVE = "adaptive"
    ORACLE = "oracle"
    SPLIT = "split"


@dataclass(frozen=True)
class IntegratorConfig:
    """Integration controls.

    ``dt_max`` of None means 0.01 / omega_fastest of the chain being evolved
    (fixed-step methods) or no step cap (DOP853-based methods).
    ``sample_stride`` counts integrator steps between stored samples; None picks
    the coarsest stride giving ``min_samples_per_period`` samples per period and
    a sampling interval no longer than (pi/10) / max|J|.
    """

    method: Method = Method.RK4
    t_end: float = 1000.0
    dt_max: float | None = None
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    sample_stride: int | None = None
    min_samples_per_period: int = 16
    store_states: bool = False

    def __post_init__(self) -> None:
        try:
            object.__setattr__(self, "method", Method(self.method))
        except ValueError:
            raise ConfigError(f"unknown integration method {self.method!r}") from None
        if not (math.isfinite(self.t_end) and self.t_end > 0):
            raise ConfigError(f"t_end must be positive and finite, got {self.t_end}")
        if self.dt_max is not None and not (math.isfinite(self.dt_max) and self.dt_max > 0):
            raise ConfigError(f"dt_max must be positive, got {self.dt_max}")
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ConfigError("rel_tol and abs_tol must be positive")
        for name in ("sample_stride", "min_samples_per_period"):
            v = getattr(self, name)
            if v is not None and (int(v) != v or v < 1):
                raise ConfigError(f"{name} must be a positive integer, got {v}")

    def step_for(self, chain: ChainConfig) -> float:
        """Fixed step bound for ``chain``; rejects dt_max above 0.1 / omega_fastest."""
        wf = omega_fastest(chain)
        if wf == 0.0:
            return self.dt_max if self.dt_max is not None else self.t_end / self.min_samples_per_period
        limit = MAX_DT_FACTOR / wf
        if self.dt_max is None:
            return DEFAULT_DT_FACTOR / wf
        if self.dt_max > limit * (1 + 1e-12):
            raise ConfigError(f"dt_max={self.dt_max:g} ns exceeds 0.1/omega_fastest={limit:g} ns for this chain")
        return self.dt_max

    @property
    def max_step(self) -> float:
        return self.dt_max if self.dt_max is not None else np.inf


@dataclass
class Trajectory:
    """Sampled evolution.  ``populations[s, k-1]`` is <s+_k s-_k> at ``times[s]``;
    ``coherence[s]`` is the sum of |rho_ab| over a < b."""

    times: np.ndarray
    populations: np.ndarray
    coherence: np.ndarray
    states: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)

    def population(self, site: int) -> np.ndarray:
        return self.populations[:, site - 1]

    def max_population(self, site: int) -> float:
        return float(self.population(site).max())


# -- scheduling ---------------------------------------------------------------


@dataclass(frozen=True)
class _Schedule:
    periods: np.ndarray  # per item, ns
    n_steps: int  # integrator steps per period (common)
    n_samples: int  # checkpoints per period (common)

    @property
    def dts(self) -> np.ndarray:
        return self.periods / self.n_steps

    @property
    def intervals(self) -> np.ndarray:
        return self.periods / self.n_samples


def _sampling_bound(chain: ChainConfig) -> float:
    jmax = max((abs(c) for c in chain.j), default=0.0)
    return (math.pi / 10) / jmax if jmax > 0 else math.inf


def _schedule(chains: Sequence[ChainConfig], icfg: IntegratorConfig) -> _Schedule:
    periods, steps, samples = [], [], []
    floor = icfg.min_samples_per_period
    for c in chains:
        dt = icfg.step_for(c)
        bound = _sampling_bound(c)
        period = c.period if c.omega_drive > 0 else min(icfg.t_end, floor * bound)
        periods.append(period)
        steps.append(math.ceil(period / dt - 1e-9))
        samples.append(max(floor, math.ceil(period / bound - 1e-9)))
    raw_steps = max(steps)
    if icfg.sample_stride is not None:
        stride = int(icfg.sample_stride)
        n_steps = -(-raw_steps // stride) * stride
        n_samples = n_steps // stride
    else:
        n_samples = max(samples)
        n_steps = -(-raw_steps // n_samples) * n_samples
    return _Schedule(np.array(periods), n_steps, n_samples)


@dataclass(frozen=True)
class _Grid:
    """Sample bookkeeping: counts[b] stroboscopic samples, then an optional tail to t_end."""

    counts: np.ndarray
    intervals: np.ndarray
    tail: np.ndarray  # length of the final partial interval (0 when t_end is on the grid)
    tail_phase: np.ndarray  # start of the tail, reduced modulo the period

    @classmethod
    def build(cls, sched: _Schedule, t_end: float) -> _Grid:
        iv = sched.intervals
        counts = np.floor(t_end / iv * (1 + 1e-12) + 1e-9).astype(int)
        tail = t_end - counts * iv
        tail = np.where(tail > 1e-9 * sched.periods, tail, 0.0)
        phase = (counts % sched.n_samples) * iv
        return cls(counts, iv, tail, phase)


# -- observables and checks -----------------------------------------------------


class _Recorder:
    """Collects observables for a batch of items and checks state invariants."""

    def __init__(self, n_items: int, n_sites: int, capacity: int, store_states: bool, eig_every: int):
        self.table = excitation_table(n_sites).astype(float)
        d = 2**n_sites
        self.upper = np.triu(np.ones((d, d), dtype=bool), 1)
        self.times = np.zeros((n_items, capacity))
        self.pops = np.zeros((n_items, capacity, n_sites))
        self.coh = np.zeros((n_items, capacity))
        self.count = np.zeros(n_items, dtype=int)
        self.states = np.zeros((n_items, capacity, d, d), dtype=complex) if store_states else None
        self.trace_err = np.zeros(n_items)
        self.herm_err = np.zeros(n_items)
        self.min_eig = np.full(n_items, np.inf)
        self.eig_checks = np.zeros(n_items, dtype=int)
        self.eig_every = max(1, eig_every)
        self.calls = 0

    def wants_state(self, force: bool) -> bool:
        return force or self.states is not None or self.calls % self.eig_every == 0

    def record_parts(
        self,
        items: np.ndarray,
        times: np.ndarray,
        diag: np.ndarray,
        trace_imag: np.ndarray,
        coh: np.ndarray,
        herm_err: np.ndarray,
        rho: np.ndarray | None,
    ) -> None:
        """Store one sample per item; ``rho`` (full matrices) is optional."""
        if items.size == 0:
            return
        slot = self.count[items]
        self.times[items, slot] = times
        self.pops[items, slot] = diag @ self.table
        self.coh[items, slot] = coh
        trace_err = np.abs(diag.sum(axis=1) - 1.0 + 1j * trace_imag)
        np.maximum.at(self.trace_err, items, trace_err)
        np.maximum.at(self.herm_err, items, herm_err)
        if rho is not None:
            if self.states is not None:
                self.states[items, slot] = rho
            lo = np.linalg.eigvalsh(0.5 * (rho + np.conj(np.swapaxes(rho, 1, 2))))[:, 0]
            np.minimum.at(self.min_eig, items, lo)
            self.eig_checks[items] += 1
        self.calls += 1
        self.count[items] += 1
        bad = (trace_err > TRACE_TOL) | (herm_err > HERMITIAN_TOL) | (self.min_eig[items] < -EIGEN_TOL)
        if np.any(bad):
            b = int(items[np.argmax(bad)])
            raise InvariantViolation(
                f"density matrix invariants violated at t={times[np.argmax(bad)]:.6g} ns: "
                f"trace error {self.trace_err[b]:.3e}, hermiticity {self.herm_err[b]:.3e}, "
                f"min eigenvalue {self.min_eig[b]:.3e}"
            )

    def record(self, items: np.ndarray, times: np.ndarray, rho: np.ndarray, force: bool = False) -> None:
        """Store samples from full matrices of shape (len(items), d, d)."""
        diag = np.real(np.einsum("bii->bi", rho))
        imag = np.imag(np.einsum("bii->b", rho))
        coh = np.abs(rho[:, self.upper]).sum(axis=1)
        herm = np.abs(rho - np.conj(np.swapaxes(rho, 1, 2))).max(axis=(1, 2))
        self.record_parts(items, times, diag, imag, coh, herm, rho if self.wants_state(force) else None)

    def trajectory(self, b: int, metadata: dict) -> Trajectory:
        n = self.count[b]
        meta = dict(metadata)
        meta["checks"] = {
            "max_trace_error": float(self.trace_err[b]),
            "max_hermiticity_error": float(self.herm_err[b]),
            "min_eigenvalue": float(self.min_eig[b]),
            "eigenvalue_checks": int(self.eig_checks[b]),
            "samples": int(n),
        }
        states = self.states[b, :n].copy() if self.states is not None else None
        return Trajectory(self.times[b, :n].copy(), self.pops[b, :n].copy(), self.coh[b, :n].copy(), states, meta)


def _eig_stride(n_sites: int, n_samples_total: int) -> int:
    if n_sites <= 2:
        return 1
    return max(1, n_samples_total // MAX_EIGEN_CHECKS)


def _metadata(chain: ChainConfig, noise: NoiseConfig, icfg: IntegratorConfig, sched: _Schedule, b: int, **extra) -> dict:
    meta = {
        "method": icfg.method.value,
        "chain": asdict(chain),
        "noise": {**asdict(noise), "deph_form": noise.deph_form.value},
        "t_end": icfg.t_end,
        "period": float(sched.periods[b]),
        "dt": float(sched.dts[b]),
        "steps_per_period": sched.n_steps,
        "samples_per_period": sched.n_samples,
        "sample_stride": sched.n_steps // sched.n_samples,
    }
    meta.update(extra)
    return meta


def _is_parity_diagonal(rho: np.ndarray, n_sites: int) -> bool:
    par = parity(n_sites)
    return not np.any(rho[par[:, None] != par[None, :]])


# -- superoperator engines --------------------------------------------------------


def _oracle_generators(
    chains: Sequence[ChainConfig], noises: Sequence[NoiseConfig], include_h2: bool, keep: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Full dense Liouvillians L(t) = L_static + E_ac cos(w t) L_drive built from H directly."""
    n = chains[0].n_sites
    eye = np.eye(chains[0].dim)
    statics = []
    for c, nz in zip(chains, noises):
        h = h_static(c)
        if not include_h2:
            h = h - hopping_terms(c)[1]
        statics.append(liouvillian(h, collapse_operators(n, nz))[np.ix_(keep, keep)])
    hd = np.diag(drive_profile_diagonal(n)).astype(complex)
    drive = (-1j * (np.kron(hd, eye) - np.kron(eye, hd.T)))[np.ix_(keep, keep)]
    return np.array(statics), drive


def _checkpoints(
    chains: Sequence[ChainConfig],
    noises: Sequence[NoiseConfig],
    icfg: IntegratorConfig,
    include_h2: bool,
    keep: np.ndarray,
    t_start: np.ndarray,
    duration: np.ndarray,
    n_steps: int,
    n_checkpoints: int,
) -> np.ndarray:
    omegas = np.array([c.omega_drive for c in chains], dtype=float)
    amps = np.array([c.e_ac for c in chains], dtype=float)
    if icfg.method is Method.ORACLE:
        statics, drive = _oracle_generators(chains, noises, include_h2, keep)
        return midpoint_expm_checkpoints(statics, drive, amps, omegas, t_start, duration, n_steps, n_checkpoints)
    coupling = coupling_generator(chains[0], noises[0].gamma_diss, include_h2, keep)
    diags = [generator_diagonals(c, nz, keep) for c, nz in zip(chains, noises)]
    static = np.array([s for s, _ in diags])
    drive = np.array([a * e for a, (_, e) in zip(amps, diags)])
    if icfg.method is Method.RK4:
        return rk4_checkpoints(coupling, static, drive, omegas, t_start, duration, n_steps, n_checkpoints)
    return adaptive_checkpoints(
        coupling, static, drive, omegas, t_start, duration, n_checkpoints, icfg.rel_tol, icfg.abs_tol, icfg.max_step
    )


def _evolve_superop(
    rho0: np.ndarray,
    chains: Sequence[ChainConfig],
    noises: Sequence[NoiseConfig],
    icfg: IntegratorConfig,
    include_h2: bool,
) -> list[Trajectory]:
    n = chains[0].n_sites
    d = chains[0].dim
    if icfg.method is not Method.ORACLE and _is_parity_diagonal(rho0, n):
        keep = parity_diagonal_indices(n)
    else:
        keep = np.arange(d * d)
    k = keep.size
    n_items = len(chains)
    if k * k * n_items > SUPEROP_BUDGET:
        raise ConfigError(
            f"superoperator propagators for {n} sites are too large for method {icfg.method.value}; use method = split"
        )
    sched = _schedule(chains, icfg)
    m = sched.n_samples
    grid = _Grid.build(sched, icfg.t_end)
    chk = _checkpoints(chains, noises, icfg, include_h2, keep, np.zeros(n_items), sched.periods, sched.n_steps, m)
    tail_chk = _checkpoints(
        chains, noises, icfg, include_h2, keep, grid.tail_phase, grid.tail, max(1, sched.n_steps // m), 1
    )[0]

    capacity = int(grid.counts.max()) + 2
    rec = _Recorder(n_items, n, capacity, icfg.store_states, _eig_stride(n, capacity))
    full = np.zeros((n_items, d * d), dtype=complex)

    def record(items: np.ndarray, times: np.ndarray, vecs: np.ndarray, force: bool = False) -> None:
        full[:] = 0.0
        full[np.ix_(items, keep)] = vecs
        rec.record(items, times, full[items].reshape(-1, d, d), force)

    r = np.broadcast_to(rho0.reshape(-1)[keep], (n_items, k)).astype(complex)
    record(np.arange(n_items), np.zeros(n_items), r, force=True)
    current = r.copy()
    for s in range(1, int(grid.counts.max()) + 1):
        j = (s - 1) % m
        v = np.einsum("bij,bj->bi", chk[j], r)
        active = np.nonzero(grid.counts >= s)[0]
        record(active, s * grid.intervals[active], v[active], force=bool(np.any(grid.counts[active] == s)))
        current[active] = v[active]
        if j == m - 1:
            r = v
    tails = np.nonzero(grid.tail)[0]
    if tails.size:
        v_end = np.einsum("bij,bj->bi", tail_chk[tails], current[tails])
        record(tails, np.full(tails.size, icfg.t_end), v_end, force=True)
    return [
        rec.trajectory(b, _metadata(chains[b], noises[b], icfg, sched, b, representation=f"superoperator[{k}]"))
        for b in range(n_items)
    ]


# -- split engine -------------------------------------------------------------------


class _BlockLayout:
    """vec(rho) restricted to parity blocks (p, q), each block stored row-major."""

    def __init__(self, n_sites: int, pairs: list[tuple[int, int]]):
        par = parity(n_sites)
        self.n_sites = n_sites
        self.d = par.size
        self.blocks = [np.nonzero(par == p)[0] for p in (0, 1)]
        self.pairs = pairs
        rows, cols, self.offsets = [], [], []
        off = 0
        for p, q in pairs:
            bp, bq = self.blocks[p], self.blocks[q]
            rows.append(np.repeat(bp, bq.size))
            cols.append(np.tile(bq, bp.size))
            self.offsets.append(off)
            off += bp.size * bq.size
        self.rows = np.concatenate(rows)
        self.cols = np.concatenate(cols)
        self.size = off
        pos = np.full((self.d, self.d), -1)
        pos[self.rows, self.cols] = np.arange(self.size)
        self.position = pos
        self.diag = pos[np.arange(self.d), np.arange(self.d)]
        self.transpose = pos[self.cols, self.rows]
        self.upper = np.nonzero(self.rows < self.cols)[0]

    def block(self, x: np.ndarray, i: int) -> np.ndarray:
        p, q = self.pairs[i]
        sp, sq = self.blocks[p].size, self.blocks[q].size
        return x[:, self.offsets[i] : self.offsets[i] + sp * sq].reshape(-1, sp, sq)

    def to_full(self, x: np.ndarray) -> np.ndarray:
        out = np.zeros((x.shape[0], self.d, self.d), dtype=complex)
        out[:, self.rows, self.cols] = x
        return out

    def from_full(self, rho: np.ndarray) -> np.ndarray:
        return rho[..., self.rows, self.cols]


def noise_channel_matrix(layout: _BlockLayout, gamma_diss: float, rates: np.ndarray, tau: float) -> scipy.sparse.csr_matrix:
    """Exact action of the local noise over a time ``tau`` on the layout vector.

    Every site decays with probability p = 1 - exp(-2 gamma_diss tau):
    rho'_ab = (1-p)^((|E(a)| + |E(b)|)/2) sum_S p^|S| rho_{a+S, b+S}, S running over
    sets of sites that are ground in both a and b.  The dephasing factor
    exp(-r_ab tau) multiplies the result (the two channels commute).
    """
    n = layout.n_sites
    p = -math.expm1(-2.0 * gamma_diss * tau)
    excited = excitation_table(n).sum(axis=1)
    damp = np.exp(-rates * tau)
    data, rr, cc = [], [], []
    site_bits = [1 << (n - k) for k in range(1, n + 1)]
    for i, (a, b) in enumerate(zip(layout.rows.tolist(), layout.cols.tolist())):
        base = (1.0 - p) ** (0.5 * (excited[a] + excited[b])) * damp[a, b]
        both_ground = [bit for bit in site_bits if a & bit and b & bit] if p > 0 else []
        for size in range(len(both_ground) + 1):
            weight = base * p**size
            for subset in combinations(both_ground, size):
                mask = sum(subset)
                data.append(weight)
                rr.append(i)
                cc.append(layout.position[a & ~mask, b & ~mask])
    return scipy.sparse.csr_matrix((data, (rr, cc)), shape=(layout.size, layout.size))


def _split_substeps(
    rho0: np.ndarray, chains: Sequence[ChainConfig], noises: Sequence[NoiseConfig], intervals: np.ndarray
) -> int:
    """Strang substeps per sample interval.

    Uniform dissipation commutes with the hopping inside the one-excitation
    sector, which the pair terms only leave at second order in J / omega0, so
    such runs need no refinement.  Otherwise the splitting error is governed by
    the fastest Bohr frequency and the substep must resolve it.
    """
    n = chains[0].n_sites
    one = excitation_table(n).sum(axis=1) == 1
    if all(nz.gamma_deph == 0.0 for nz in noises) and not np.any(rho0[~one]) and not np.any(rho0[:, ~one]):
        return 1
    fastest = max(omega_fastest(c) for c in chains)
    return max(1, math.ceil(float(np.max(intervals)) * fastest / SPLIT_PHASE - 1e-9))


def _step_unitaries(u: np.ndarray, owner: np.ndarray) -> list[np.ndarray]:
    """Cumulative checkpoint propagators to per-step increments."""
    out = []
    for j in range(u.shape[0]):
        w = u[j] if j == 0 else u[j] @ np.conj(np.swapaxes(u[j - 1], 1, 2))
        out.append(_polar_unitary(w)[owner])
    return out


def _unitary_checkpoints(
    chains: Sequence[ChainConfig],
    include_h2: bool,
    block: np.ndarray,
    icfg: IntegratorConfig,
    t_start: np.ndarray,
    duration: np.ndarray,
    n_checkpoints: int,
) -> np.ndarray:
    """Propagators of -iH(t) restricted to one parity block (H preserves parity)."""
    n = chains[0].n_sites
    h1, h2 = hopping_terms(chains[0])
    coupling = -1j * (h1 + h2 if include_h2 else h1)[np.ix_(block, block)]
    profile = drive_profile_diagonal(n)[block]
    static = np.array([-1j * static_z_diagonal(c)[block] for c in chains])
    drive = np.array([-1j * c.e_ac * profile for c in chains])
    omegas = np.array([c.omega_drive for c in chains], dtype=float)
    return adaptive_checkpoints(
        coupling, static, drive, omegas, t_start, duration, n_checkpoints, icfg.rel_tol, icfg.abs_tol, icfg.max_step
    )


def _polar_unitary(u: np.ndarray) -> np.ndarray:
    """Unitary polar factor; strips the tiny norm defect left by the integrator."""
    left, _, right = np.linalg.svd(u)
    return left @ right


def _evolve_split(
    rho0: np.ndarray,
    chains: Sequence[ChainConfig],
    noises: Sequence[NoiseConfig],
    icfg: IntegratorConfig,
    include_h2: bool,
) -> list[Trajectory]:
    n = chains[0].n_sites
    n_items = len(chains)
    unique: dict[ChainConfig, int] = {}
    for c in chains:
        unique.setdefault(c, len(unique))
    uchains = list(unique)
    owner = np.array([unique[c] for c in chains])

    sched_u = _schedule(uchains, icfg)
    m = sched_u.n_samples
    grid_u = _Grid.build(sched_u, icfg.t_end)
    pairs = [(0, 0), (1, 1)] if _is_parity_diagonal(rho0, n) else [(0, 0), (0, 1), (1, 0), (1, 1)]
    lay = _BlockLayout(n, pairs)

    periods = sched_u.periods[owner]
    sched = _Schedule(periods, sched_u.n_steps, m)
    grid = _Grid.build(sched, icfg.t_end)
    k = _split_substeps(rho0, chains, noises, grid.intervals)

    zeros = np.zeros(len(uchains))
    steps: list[list[np.ndarray]] = [[] for _ in range(m * k)]  # steps[j][p]: substep j-1 -> j
    tails: list[list[np.ndarray]] = [[] for _ in range(k)]
    for blk in lay.blocks:
        u = _unitary_checkpoints(uchains, include_h2, blk, icfg, zeros, sched_u.periods, m * k)
        for j, w in enumerate(_step_unitaries(u, owner)):
            steps[j].append(w)
        tu = _unitary_checkpoints(uchains, include_h2, blk, icfg, grid_u.tail_phase, grid_u.tail, k)
        for j, w in enumerate(_step_unitaries(tu, owner)):
            tails[j].append(w)

    # one sparse channel per distinct (noise, half-substep) combination
    channel_keys = [(nz, float(h)) for nz, h in zip(noises, 0.5 * grid.intervals / k)]
    tail_keys = [(nz, float(h)) for nz, h in zip(noises, 0.5 * grid.tail / k)]
    channels = {
        key: noise_channel_matrix(lay, key[0].gamma_diss, dephasing_rates(n, key[0]), key[1])
        for key in dict.fromkeys(channel_keys + tail_keys)
    }

    def apply_noise(x: np.ndarray, items: np.ndarray, keys: list[tuple]) -> np.ndarray:
        out = np.empty_like(x)
        groups: dict[tuple, list[int]] = {}
        for row, b in enumerate(items.tolist()):
            groups.setdefault(keys[b], []).append(row)
        for key, rows in groups.items():
            out[rows] = (channels[key] @ x[rows].T).T
        return out

    def apply_unitary(x: np.ndarray, us: list[np.ndarray]) -> np.ndarray:
        out = np.empty_like(x)
        for i, (p, q) in enumerate(lay.pairs):
            blk = lay.block(x, i)
            res = us[p] @ blk @ np.conj(np.swapaxes(us[q], 1, 2))
            out[:, lay.offsets[i] : lay.offsets[i] + blk.shape[1] * blk.shape[2]] = res.reshape(x.shape[0], -1)
        return out

    def strang(x: np.ndarray, items: np.ndarray, keys: list[tuple], us: list[list[np.ndarray]]) -> np.ndarray:
        for step in us:
            x = apply_noise(x, items, keys)
            x = apply_unitary(x, [w[items] for w in step])
            x = apply_noise(x, items, keys)
        return x

    capacity = int(grid.counts.max()) + 2
    rec = _Recorder(n_items, n, capacity, icfg.store_states, _eig_stride(n, capacity))

    def record(items: np.ndarray, times: np.ndarray, x: np.ndarray, force: bool = False) -> None:
        diag = x[:, lay.diag]
        coh = np.abs(x[:, lay.upper]).sum(axis=1)
        herm = np.abs(x - np.conj(x[:, lay.transpose])).max(axis=1)
        full = lay.to_full(x) if rec.wants_state(force) else None
        rec.record_parts(items, times, np.real(diag), np.imag(diag).sum(axis=1), coh, herm, full)

    everyone = np.arange(n_items)
    x = np.broadcast_to(lay.from_full(rho0), (n_items, lay.size)).astype(complex)
    record(everyone, np.zeros(n_items), x, force=True)
    for s in range(1, int(grid.counts.max()) + 1):
        j = (s - 1) % m
        active = np.nonzero(grid.counts >= s)[0]
        sub = strang(x[active], active, channel_keys, steps[j * k : (j + 1) * k])
        record(active, s * grid.intervals[active], sub, force=bool(np.any(grid.counts[active] == s)))
        x[active] = sub
    ends = np.nonzero(grid.tail)[0]
    if ends.size:
        sub = strang(x[ends], ends, tail_keys, tails)
        record(ends, np.full(ends.size, icfg.t_end), sub, force=True)
    return [
        rec.trajectory(b, _metadata(chains[b], noises[b], icfg, sched, b, representation="density-matrix split", split_substeps=k))
        for b in range(n_items)
    ]


# -- public entry points --------------------------------------------------------------


def _prepare_rho(rho0: np.ndarray, n_sites: int) -> np.ndarray:
    rho0 = validate_density_matrix(rho0)
    if rho0.shape[0] != 2**n_sites:
        raise ValueError(f"initial state has dimension {rho0.shape[0]}, chain needs {2**n_sites}")
    return rho0


def evolve_many(
    rho0: np.ndarray,
    chains: Sequence[ChainConfig],
    noises: Sequence[NoiseConfig] | NoiseConfig,
    icfg: IntegratorConfig,
    include_h2: bool = True,
) -> list[Trajectory]:
    """Evolve one initial state under several (chain, noise) settings in a single batch.

    Items sharing the coupling block (same n_sites and J, plus the same gamma_diss
    for superoperator methods) are propagated together.  Results depend only on
    the batch composition, never on how batches are scheduled.
    """
    chains = list(chains)
    if isinstance(noises, NoiseConfig):
        noises = [noises] * len(chains)
    noises = list(noises)
    if len(noises) != len(chains) or not chains:
        raise ValueError("need one noise config per chain and at least one chain")
    n = chains[0].n_sites
    if any(c.n_sites != n for c in chains):
        raise ValueError("all chains in a batch must have the same number of sites")
    rho0 = _prepare_rho(rho0, n)
    if icfg.method is Method.ORACLE and n > ORACLE_MAX_SITES:
        raise ConfigError(f"the oracle integrator is limited to {ORACLE_MAX_SITES} sites")

    groups: dict[tuple, list[int]] = {}
    for i, (c, nz) in enumerate(zip(chains, noises)):
        key = (c.j,) if icfg.method is Method.SPLIT else (c.j, nz.gamma_diss)
        groups.setdefault(key, []).append(i)
    results: list[Trajectory | None] = [None] * len(chains)
    engine = _evolve_split if icfg.method is Method.SPLIT else _evolve_superop
    for idx in groups.values():
        trajs = engine(rho0, [chains[i] for i in idx], [noises[i] for i in idx], icfg, include_h2)
        for i, tr in zip(idx, trajs):
            results[i] = tr
    return results  # type: ignore[return-value]


def evolve(
    rho0: np.ndarray,
    chain: ChainConfig,
    noise: NoiseConfig,
    icfg: IntegratorConfig,
    include_h2: bool = True,
) -> Trajectory:
    return evolve_many(rho0, [chain], [noise], icfg, include_h2)[0]


def evolve_oracle(
    rho0: np.ndarray, chain: ChainConfig, noise: NoiseConfig, dt: float, t_end: float, include_h2: bool = True
) -> Trajectory:
    """Brute-force reference: midpoint-frozen generator, one matrix exponential per step."""
    wf = omega_fastest(chain)
    if wf > 0 and dt > ORACLE_DT_FACTOR / wf * (1 + 1e-12):
        raise ConfigError(f"oracle step {dt:g} ns exceeds 0.05/omega_fastest={ORACLE_DT_FACTOR / wf:g} ns")
    icfg = IntegratorConfig(method=Method.ORACLE, t_end=t_end, dt_max=dt)
    return evolve(rho0, chain, noise, icfg, include_h2)


def evolve_rwa(
    rho0: np.ndarray, chain: ChainConfig, noise: NoiseConfig, t_end: float, n_samples: int | None = None
) -> Trajectory:
    """Evolve under the time-independent rotating-wave Hamiltonian.

    The result lives in the interaction picture; populations and |rho_ab| agree
    with the lab frame because u0 is diagonal and the local noise channels are
    phase covariant.  For cross-validation only.
    """
    n = chain.n_sites
    rho0 = _prepare_rho(rho0, n)
    if n_samples is None:
        n_samples = max(16, math.ceil(t_end / _sampling_bound(chain)))
    gen = liouvillian(effective_hamiltonian(chain), collapse_operators(n, noise))
    step = scipy.linalg.expm(gen * (t_end / n_samples))
    rec = _Recorder(1, n, n_samples + 1, False, 1)
    d = chain.dim
    v = rho0.reshape(-1).astype(complex)
    one = np.array([0])
    rec.record(one, np.array([0.0]), v.reshape(1, d, d))
    for s in range(1, n_samples + 1):
        v = step @ v
        rec.record(one, np.array([s * t_end / n_samples]), v.reshape(1, d, d))
    return rec.trajectory(0, {"method": "rwa", "chain": asdict(chain), "t_end": t_end})
