"""Batched propagator engines for generators of the form

    L_b(t) = A + diag(s_b + cos(w_b t) e_b)

with one shared dense coupling block A and per-item diagonals.  Every engine
returns propagators from ``t_start`` to the checkpoints
``t_start + (j + 1) * duration / n_checkpoints``.  For a periodic generator and
``duration`` equal to one period, the last checkpoint is the one-period map and
the others give stroboscopic samples inside the period.

Propagators are stored with axes (checkpoint, item, K, K).
"""

from __future__ import annotations

import numpy as np
import scipy.linalg
from scipy.integrate import solve_ivp

from .errors import StepSizeUnderflow


def _as_items(x: np.ndarray | float, n_items: int) -> np.ndarray:
    return np.broadcast_to(np.asarray(x, dtype=float), (n_items,)).copy()


def rk4_checkpoints(
    coupling: np.ndarray,
    static: np.ndarray,
    drive: np.ndarray,
    omega: np.ndarray | float,
    t_start: np.ndarray | float,
    duration: np.ndarray | float,
    n_steps: int,
    n_checkpoints: int,
) -> np.ndarray:
    """Classical RK4 on the propagator, ``n_steps`` equal steps per item.

    ``static`` and ``drive`` have shape (B, K); ``drive`` already includes the
    amplitude.  Step size per item is duration / n_steps.
    """
    if n_steps % n_checkpoints:
        raise ValueError("n_steps must be a multiple of n_checkpoints")
    static = np.atleast_2d(static)
    drive = np.atleast_2d(drive)
    n_items, k = static.shape
    omega = _as_items(omega, n_items).reshape(1, n_items, 1)
    t0 = _as_items(t_start, n_items).reshape(1, n_items, 1)
    dt = (_as_items(duration, n_items) / n_steps).reshape(1, n_items, 1)
    s = static.T[:, :, None].astype(complex)
    e = drive.T[:, :, None].astype(complex)
    a = np.ascontiguousarray(coupling, dtype=complex)
    y = np.zeros((k, n_items, k), dtype=complex)
    y[np.arange(k), :, np.arange(k)] = 1.0
    flat = (k, n_items * k)

    def rhs(diag: np.ndarray, state: np.ndarray) -> np.ndarray:
        out = (a @ state.reshape(flat)).reshape(state.shape)
        out += diag * state
        return out

    every = n_steps // n_checkpoints
    out = np.empty((n_checkpoints, n_items, k, k), dtype=complex)
    half = 0.5 * dt
    sixth = dt / 6.0
    third = dt / 3.0
    for step in range(n_steps):
        t = t0 + step * dt
        d0 = s + np.cos(omega * t) * e
        dm = s + np.cos(omega * (t + half)) * e
        d1 = s + np.cos(omega * (t + dt)) * e
        k1 = rhs(d0, y)
        acc = y + sixth * k1
        k2 = rhs(dm, y + half * k1)
        acc += third * k2
        k3 = rhs(dm, y + half * k2)
        acc += third * k3
        k4 = rhs(d1, y + dt * k3)
        acc += sixth * k4
        y = acc
        if (step + 1) % every == 0:
            out[(step + 1) // every - 1] = y.transpose(1, 0, 2)
    return out


def midpoint_expm_checkpoints(
    static_generator: np.ndarray,
    drive_generator: np.ndarray,
    amplitude: np.ndarray | float,
    omega: np.ndarray | float,
    t_start: np.ndarray | float,
    duration: np.ndarray | float,
    n_steps: int,
    n_checkpoints: int,
    chunk: int = 512,
) -> np.ndarray:
    """Piecewise-constant propagation with the generator frozen at step midpoints.

    Here the generators are full dense matrices: L(t) = static + amp cos(w t) drive,
    with ``static_generator`` of shape (B, K, K) or (K, K) and ``drive_generator``
    of shape (K, K).
    """
    if n_steps % n_checkpoints:
        raise ValueError("n_steps must be a multiple of n_checkpoints")
    static_generator = np.asarray(static_generator, dtype=complex)
    if static_generator.ndim == 2:
        static_generator = static_generator[None]
    n_items, k, _ = static_generator.shape
    amp = _as_items(amplitude, n_items)
    omega = _as_items(omega, n_items)
    t0 = _as_items(t_start, n_items)
    dt = _as_items(duration, n_items) / n_steps
    every = n_steps // n_checkpoints
    out = np.empty((n_checkpoints, n_items, k, k), dtype=complex)
    for b in range(n_items):
        y = np.eye(k, dtype=complex)
        for first in range(0, n_steps, chunk):
            steps = np.arange(first, min(first + chunk, n_steps))
            mids = t0[b] + (steps + 0.5) * dt[b]
            coeff = amp[b] * np.cos(omega[b] * mids)
            gens = static_generator[b][None] + coeff[:, None, None] * drive_generator[None]
            props = scipy.linalg.expm(gens * dt[b])
            for step, p in zip(steps, props):
                y = p @ y
                if (step + 1) % every == 0:
                    out[(step + 1) // every - 1, b] = y
    return out


def adaptive_checkpoints(
    coupling: np.ndarray,
    static: np.ndarray,
    drive: np.ndarray,
    omega: np.ndarray | float,
    t_start: np.ndarray | float,
    duration: np.ndarray | float,
    n_checkpoints: int,
    rel_tol: float,
    abs_tol: float,
    max_step: float = np.inf,
) -> np.ndarray:
    """Embedded 8(5,3) Runge-Kutta (DOP853) on the flattened propagator, item by item."""
    static = np.atleast_2d(static)
    drive = np.atleast_2d(drive)
    n_items, k = static.shape
    omega = _as_items(omega, n_items)
    t0 = _as_items(t_start, n_items)
    span = _as_items(duration, n_items)
    a = np.asarray(coupling, dtype=complex)
    out = np.empty((n_checkpoints, n_items, k, k), dtype=complex)
    for b in range(n_items):
        s_b, e_b, w_b = static[b].astype(complex), drive[b].astype(complex), omega[b]

        def rhs(t: float, y: np.ndarray) -> np.ndarray:
            m = y.reshape(k, k)
            return (a @ m + (s_b + np.cos(w_b * t) * e_b)[:, None] * m).reshape(-1)

        if span[b] == 0.0:
            out[:, b] = np.eye(k)
            continue
        times = t0[b] + span[b] * np.arange(1, n_checkpoints + 1) / n_checkpoints
        sol = solve_ivp(
            rhs,
            (t0[b], times[-1]),
            np.eye(k, dtype=complex).reshape(-1),
            method="DOP853",
            t_eval=times,
            rtol=rel_tol,
            atol=abs_tol,
            max_step=max_step,
        )
        if sol.status != 0 or sol.y.shape[1] != n_checkpoints:
            raise StepSizeUnderflow(f"adaptive integrator failed: {sol.message}")
        out[:, b] = sol.y.T.reshape(n_checkpoints, k, k)
    return out
