"""Brute-force ground truth for minimum-time problems.

The search runs directly on the group with exact constant-control flows and
deduplicates states by rounding their chart coordinates to a grid of
spacing ``q``.  It shares no code path with the mesh or the Bellman solver.
States are stored as unit quaternions ``(w, v)`` with ``U = w Id - j v.sigma``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .lie import GroupElement, SystemSpec, dynamics_direction, exp_map, log_map, speed_bound

AXIS_RADII = (0.4, 0.8, 1.2)
_ANTIPODE_GAP = 1e-9


def axis_probes(radii=AXIS_RADII) -> np.ndarray:
    """Chart points ``theta * e_k`` for each axis and radius, axis-major."""
    return np.array([r * np.eye(3)[k] for k in range(3) for r in radii])


@dataclass(frozen=True)
class OracleConfig:
    """Search resolution: time step, hash spacing (default ``dt * B``), control count, horizon.

    States that cannot reach the target before ``t_max`` even at full speed
    are dropped, so a tighter horizon makes the search cheaper.
    """

    dt: float = 0.01
    q: float | None = None
    n_controls: int = 16
    t_max: float = 5.0

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.q is not None and not self.q > 0:
            raise ValueError("q must be positive")
        if self.n_controls < 2:
            raise ValueError("need at least 2 controls")
        if not self.t_max > 0:
            raise ValueError("t_max must be positive")


def to_quaternion(u: GroupElement) -> np.ndarray:
    u = np.asarray(u, dtype=complex)
    return np.array(
        [
            0.5 * (u[0, 0].real + u[1, 1].real),
            -0.5 * (u[0, 1].imag + u[1, 0].imag),
            0.5 * (u[1, 0].real - u[0, 1].real),
            0.5 * (u[1, 1].imag - u[0, 0].imag),
        ]
    )


def _oracle_controls(spec: SystemSpec, n: int) -> np.ndarray:
    cs = spec.control_set
    if cs.kind == "sphere" and spec.m == 2:
        th = 2.0 * np.pi * np.arange(n) / n
        return cs.size * np.stack([np.cos(th), np.sin(th)], axis=1)
    if cs.kind == "sphere" and spec.m == 1:
        return np.array([[-cs.size], [cs.size]])
    axis = np.linspace(-cs.size, cs.size, n)
    return np.stack(np.meshgrid(*([axis] * spec.m), indexing="ij"), axis=-1).reshape(-1, spec.m)


@njit(cache=True)
def _search(q0, steps, dt, q, r_T, speed, t_max, n_levels, half_width):
    dims = 2 * half_width + 1
    bitmap = np.zeros((dims * dims * dims + 7) // 8, dtype=np.uint8)
    n_steps = steps.shape[0]

    cur = np.empty((1, 4))
    cur[0] = q0
    n_cur = 1
    s0 = math.sqrt(q0[1] ** 2 + q0[2] ** 2 + q0[3] ** 2)
    half0 = math.atan2(s0, q0[0])
    scale0 = 2.0 * half0 / s0 if s0 > 0 else 2.0
    idx0 = 0
    for c in range(3):
        idx0 = idx0 * dims + int(math.floor(q0[c + 1] * scale0 / q + 0.5)) + half_width
    bitmap[idx0 >> 3] |= np.uint8(1 << (idx0 & 7))

    nxt = np.empty((max(1024, 4 * n_steps), 4))
    for level in range(1, n_levels + 1):
        elapsed = level * dt
        n_nxt = 0
        for i in range(n_cur):
            w1, x1, y1, z1 = cur[i, 0], cur[i, 1], cur[i, 2], cur[i, 3]
            for k in range(n_steps):
                w2, x2, y2, z2 = steps[k, 0], steps[k, 1], steps[k, 2], steps[k, 3]
                # Hamilton product step * state
                w = w2 * w1 - x2 * x1 - y2 * y1 - z2 * z1
                x = w2 * x1 + w1 * x2 + y2 * z1 - z2 * y1
                y = w2 * y1 + w1 * y2 + z2 * x1 - x2 * z1
                z = w2 * z1 + w1 * z2 + x2 * y1 - y2 * x1
                s = math.sqrt(x * x + y * y + z * z)
                theta = 2.0 * math.atan2(s, w)
                if theta <= r_T:
                    return elapsed
                if 2.0 * math.pi - theta < _ANTIPODE_GAP:
                    continue
                if elapsed + (theta - r_T) / speed > t_max:
                    continue
                scale = theta / s
                ix = int(math.floor(x * scale / q + 0.5)) + half_width
                iy = int(math.floor(y * scale / q + 0.5)) + half_width
                iz = int(math.floor(z * scale / q + 0.5)) + half_width
                if ix < 0 or iy < 0 or iz < 0 or ix >= dims or iy >= dims or iz >= dims:
                    continue
                idx = (ix * dims + iy) * dims + iz
                bit = np.uint8(1 << (idx & 7))
                if bitmap[idx >> 3] & bit:
                    continue
                bitmap[idx >> 3] |= bit
                if n_nxt == nxt.shape[0]:
                    grown = np.empty((2 * nxt.shape[0], 4))
                    grown[:n_nxt] = nxt[:n_nxt]
                    nxt = grown
                norm = math.sqrt(w * w + s * s)
                nxt[n_nxt, 0] = w / norm
                nxt[n_nxt, 1] = x / norm
                nxt[n_nxt, 2] = y / norm
                nxt[n_nxt, 3] = z / norm
                n_nxt += 1
        if n_nxt == 0:
            return math.inf
        cur = nxt[:n_nxt].copy()
        n_cur = n_nxt
    return math.inf


def brute_force_min_time(spec: SystemSpec, u0: GroupElement, r_T: float, cfg: OracleConfig) -> float:
    """First arrival time at the chart ball ``|log U| <= r_T`` by breadth-first search.

    Every edge costs ``cfg.dt``, so uniform-cost search reduces to BFS by
    levels.  Each hash cell keeps the first state that reached it, in
    frontier-then-control order.  Returns ``inf`` when the horizon passes.
    """
    speed = speed_bound(spec)
    q = cfg.q if cfg.q is not None else cfg.dt * speed
    if q > cfg.dt * speed * (1 + 1e-12):
        raise ValueError("hash spacing q must not exceed one step length dt * B")
    if cfg.dt * speed > r_T:
        raise ValueError("dt * B must not exceed the target radius")
    if np.linalg.norm(log_map(u0)) <= r_T:
        return 0.0
    dirs = dynamics_direction(_oracle_controls(spec, cfg.n_controls), spec)
    steps = np.array([to_quaternion(e) for e in exp_map(cfg.dt * dirs)])
    reach = min(2.0 * math.pi, r_T + speed * cfg.t_max)
    half_width = int(math.ceil(reach / q)) + 1
    n_levels = int(math.floor(cfg.t_max / cfg.dt + 1e-9))
    t = _search(to_quaternion(u0), steps, cfg.dt, q, r_T, speed, cfg.t_max, n_levels, half_width)
    return float(t)


def oracle_discounted_value(t: float, lam: float) -> float:
    """Discounted unit cost ``(1 - exp(-lam T)) / lam`` of arriving at time ``T``."""
    if not lam > 0:
        raise ValueError("lam must be positive")
    if math.isinf(t):
        return 1.0 / lam
    return float(-math.expm1(-lam * t) / lam)
