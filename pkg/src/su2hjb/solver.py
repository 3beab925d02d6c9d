"""Discrete HJB fixed point on a simplicial mesh of su(2).

For each non-target vertex ``x`` and sampled control ``v`` the foot point is
the chart image of ``exp(dt X_v) exp(x)`` with ``dt = h / B``.  Its
barycentric weights act as transition probabilities, and the Bellman
operator is

    F(V)(x) = min_v (sum_i w_i V(y_i) + l(x, v) dt) / (1 + lam dt).

Foot points outside the mesh absorb into a ghost state holding ``v_cap``.
Optionally, steps whose exact flow enters the target ball before ``dt`` end
there and pay only for the time actually spent.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from itertools import product

import numpy as np
import scipy.sparse as sp

from .lie import SystemSpec, dynamics_direction, exp_map, log_map_masked, speed_bound
from .mesh import OUTER, TARGET, SimplicialMesh

logger = logging.getLogger(__name__)

_FOOT_CHUNK = 16384


@dataclass(frozen=True)
class SolverConfig:
    """Solver knobs.  ``v_cap`` and ``init_value`` default per route (see solvers).

    ``exact_exit`` stops a step at the target boundary when the flow enters the
    target within ``dt`` and charges only the elapsed discounted cost; with it
    off every step costs a full ``dt``.
    """

    lam: float = 0.5
    control_samples: int = 16
    eps_stop: float = 1e-6
    max_iters: int = 2000
    v_cap: float | None = None
    init_value: float | None = None
    clamp_outer: bool = False
    exact_exit: bool = True

    def __post_init__(self):
        if not self.lam >= 0:
            raise ValueError("lam must be nonnegative")
        if self.control_samples < 2:
            raise ValueError("control_samples must be at least 2")
        if not self.eps_stop > 0:
            raise ValueError("eps_stop must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")
        if self.v_cap is not None and not self.v_cap >= 0:
            raise ValueError("v_cap must be nonnegative")
        if self.init_value is not None:
            if not self.init_value >= 0:
                raise ValueError("init_value must be nonnegative")
            if self.v_cap is not None and self.init_value > self.v_cap:
                raise ValueError("init_value must not exceed v_cap")


@dataclass
class ValueField:
    """Per-vertex values plus solve metadata.

    ``values`` are in user units (discounted cost, or minimum time for the
    ``min_time`` route); ``raw`` is the discounted field actually iterated.
    """

    values: np.ndarray
    raw: np.ndarray
    metric_history: list[float]
    iterations: int
    converged: bool
    kind: str
    h: float
    lam: float
    lam_eff: float
    dt: float
    v_cap_raw: float
    controls: np.ndarray
    exact_exit: bool = True
    residual: float = math.nan
    policy: np.ndarray = field(default=None, repr=False)


def discretize_controls(spec: SystemSpec, n: int) -> np.ndarray:
    """Finite sample of the control set, shape ``(K, m)``.

    Sphere (m = 2): ``n`` equally spaced angles.  Sphere (m = 1): ``{-r, r}``.
    Box: per-axis grid of ``n`` points from ``-b`` to ``b`` plus the centre.
    """
    if n < 2:
        raise ValueError("need at least 2 control samples")
    cs, m = spec.control_set, spec.m
    if cs.kind == "sphere":
        if m == 1:
            return np.array([[-cs.size], [cs.size]])
        if m != 2:
            raise NotImplementedError("sphere control sets are sampled for m <= 2 only")
        theta = 2.0 * np.pi * np.arange(n) / n
        v = cs.size * np.stack([np.cos(theta), np.sin(theta)], axis=1)
        # exact zeros and negation symmetry at quarter points
        v[np.abs(v) < 1e-12 * cs.size] = 0.0
        if n % 2 == 0:
            v[n // 2 :] = -v[: n // 2]
        return v + 0.0  # no negative zeros
    axis = np.linspace(-cs.size, cs.size, n)
    if n % 2 == 0:
        axis = np.sort(np.append(axis, 0.0))
    else:
        axis[n // 2] = 0.0
    return np.array(list(product(axis, repeat=m)), dtype=float)


def local_timestep(spec: SystemSpec, h: float) -> float:
    """``h / B``; constant over the mesh because the dynamics are right-invariant."""
    if not h > 0:
        raise ValueError("h must be positive")
    return h / speed_bound(spec)


def kruskov(s):
    """``1 - exp(-s)``; maps ``[0, inf)`` onto ``[0, 1)``."""
    s = np.asarray(s, dtype=float)
    if np.any(s < 0) or np.any(np.isnan(s)):
        raise ValueError("kruskov transform needs s >= 0")
    out = -np.expm1(-s)
    return float(out) if out.ndim == 0 else out


def kruskov_inverse(r):
    """``-log(1 - r)`` for ``r`` in ``[0, 1)``."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0) or np.any(r >= 1) or np.any(np.isnan(r)):
        raise ValueError("kruskov inverse needs 0 <= r < 1")
    out = -np.log1p(-r)
    return float(out) if out.ndim == 0 else out


def foot_points(spec: SystemSpec, points: np.ndarray, controls: np.ndarray, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Chart coordinates of one exact flow step from each point under each control.

    Returns ``(feet, ok)`` of shapes ``(n, K, 3)`` and ``(n, K)``; ``ok`` is
    False where the endpoint is too close to -Id for the principal log.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    steps = exp_map(dt * dynamics_direction(controls, spec))
    feet = np.empty((len(points), len(controls), 3))
    ok = np.empty((len(points), len(controls)), dtype=bool)
    for a in range(0, len(points), _FOOT_CHUNK):
        g = exp_map(points[a : a + _FOOT_CHUNK])
        feet[a : a + _FOOT_CHUNK], ok[a : a + _FOOT_CHUNK] = log_map_masked(steps[None] @ g[:, None])
    return feet, ok


def exit_times(spec: SystemSpec, points: np.ndarray, controls: np.ndarray, r_T: float) -> np.ndarray:
    """First time the flow from each point under each control enters the target ball.

    In quaternion form the scalar part along the flow is ``R cos(phi + delta)``
    with ``phi = t |X| / 2``; the ball is ``w >= cos(r_T / 2)``.  Returns
    ``inf`` where the flow never enters; shape ``(n, K)``.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    dirs = np.atleast_2d(dynamics_direction(controls, spec))
    omega = np.linalg.norm(dirs, axis=1)
    theta = np.linalg.norm(points, axis=1)
    w0 = np.cos(0.5 * theta)
    # quaternion vector part sin(theta/2) * a/|a|
    v0 = points * (0.5 * np.sinc(0.5 * theta / np.pi))[:, None]
    unit = dirs / np.where(omega > 0, omega, 1.0)[:, None]
    b = v0 @ unit.T
    amp = np.hypot(w0[:, None], b)
    delta = np.arctan2(b, w0[:, None])
    c = np.cos(0.5 * r_T)
    with np.errstate(invalid="ignore", divide="ignore"):
        beta = np.arccos(np.clip(c / amp, -1.0, 1.0))
        phi = np.mod(-beta - delta, 2.0 * np.pi)
        tau = np.where((amp >= c) & (omega > 0)[None, :], 2.0 * phi / omega[None, :], np.inf)
    tau[w0 >= c] = 0.0
    return tau


def transition_table(mesh: SimplicialMesh, spec: SystemSpec, points: np.ndarray, controls: np.ndarray, dt: float, lam: float, exact_exit: bool):
    """Field-independent stencil of every (point, control) pair.

    Returns ``(columns, weights, cost_dt, out_of_domain)`` with shapes
    ``(n, K, 4)``, ``(n, K, 4)``, ``(n, K)``, ``(n, K)``.  Column
    ``mesh.n_vertices`` is the out-of-domain ghost state.  Exit rows put unit
    weight on the target vertex nearest the entry point and carry the cost
    ``(1 + lam dt) l (1 - exp(-lam tau)) / lam``, so that every candidate keeps
    the form ``(sum w V + cost_dt) / (1 + lam dt)``.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    n, k = len(pts), len(controls)
    feet, ok = foot_points(spec, pts, controls, dt)
    sid, w = mesh.locate_many(feet.reshape(-1, 3))
    inside = ok.ravel() & (sid >= 0)

    w = np.clip(np.where(inside[:, None], w, 0.0), 0.0, None)
    w[inside] /= w[inside].sum(axis=1, keepdims=True)
    cols = np.where(inside[:, None], mesh.simplices[np.where(inside, sid, 0)], mesh.n_vertices)
    w[~inside, 0] = 1.0
    cols, w = cols.reshape(n, k, 4), w.reshape(n, k, 4)
    ood = ~inside.reshape(n, k)
    costs = np.stack([spec.cost(pts, v) for v in controls], axis=1) if n else np.zeros((0, k))
    cost_dt = costs * dt

    targets = np.flatnonzero(mesh.flags == TARGET)
    if exact_exit and len(targets) and n:
        tau = exit_times(spec, pts, controls, mesh.r_T)
        hit = tau <= dt
        if np.any(hit):
            vi, ki = np.nonzero(hit)
            dirs = dynamics_direction(controls[ki], spec)
            entry = log_map_masked(exp_map(tau[vi, ki, None] * dirs) @ exp_map(pts[vi]))[0]
            d2 = ((entry[:, None, :] - mesh.vertices[targets][None]) ** 2).sum(axis=2)
            cols[vi, ki] = targets[np.argmin(d2, axis=1)][:, None]
            w[vi, ki] = (1.0, 0.0, 0.0, 0.0)
            ood[vi, ki] = False
            if lam > 0:
                factor = -np.expm1(-lam * tau[vi, ki]) / lam
            else:
                factor = tau[vi, ki]
            cost_dt[vi, ki] = (1.0 + lam * dt) * costs[vi, ki] * factor
    return cols, w, cost_dt, ood


class BellmanOperator:
    """Precomputed transition table and the vectorized Jacobi sweep ``F``.

    The table is field-independent: row ``(i, k)`` of ``P`` holds the
    transition weights of active vertex ``i`` under control ``k``; the last
    column is the out-of-domain ghost state.
    """

    def __init__(self, mesh: SimplicialMesh, spec: SystemSpec, lam: float, controls: np.ndarray, dt: float, clamp_outer: bool = False, exact_exit: bool = True):
        self.mesh, self.spec = mesh, spec
        self.lam, self.dt = float(lam), float(dt)
        self.controls = np.asarray(controls, dtype=float)
        self.exact_exit = exact_exit
        self.kappa = 1.0 / (1.0 + self.lam * self.dt)
        n, k = mesh.n_vertices, len(self.controls)
        pinned = mesh.flags == TARGET
        self.clamped = (mesh.flags == OUTER) & clamp_outer & ~pinned
        self.active = np.flatnonzero(~pinned & ~self.clamped)
        self.target = np.flatnonzero(pinned)

        self.columns, self.weights, self.cost_dt, self.out_of_domain = transition_table(
            mesh, spec, mesh.vertices[self.active], self.controls, self.dt, self.lam, exact_exit
        )
        na = len(self.active)
        rows = np.repeat(np.arange(na * k), 4)
        self.P = sp.csr_matrix((self.weights.ravel(), (rows, self.columns.ravel())), shape=(na * k, n + 1))

    @property
    def cost_max(self) -> float:
        """Largest running cost over the table (exit rows excluded)."""
        if not self.cost_dt.size:
            return 1.0
        costs = np.stack([self.spec.cost(self.mesh.vertices[self.active], v) for v in self.controls], axis=1)
        return float(costs.max())

    def candidates(self, values: np.ndarray, ghost: float) -> np.ndarray:
        ext = np.append(np.asarray(values, dtype=float), ghost)
        q = (self.P @ ext).reshape(len(self.active), len(self.controls))
        return (q + self.cost_dt) * self.kappa

    def apply(self, values: np.ndarray, ghost: float) -> tuple[np.ndarray, np.ndarray]:
        """One sweep: returns ``(F(values), argmin control index per active vertex)``."""
        cand = self.candidates(values, ghost)
        arg = np.argmin(cand, axis=1)
        out = np.zeros(self.mesh.n_vertices)
        out[self.active] = cand[np.arange(len(arg)), arg]
        out[self.clamped] = ghost
        return out, arg


def _route_caps(config: SolverConfig, cap_default: float) -> tuple[float, float]:
    v_cap = cap_default if config.v_cap is None else float(config.v_cap)
    init = v_cap if config.init_value is None else float(config.init_value)
    return v_cap, init


def _iterate(op: BellmanOperator, v_cap: float, init: float, config: SolverConfig) -> tuple[np.ndarray, list[float], bool, float, np.ndarray]:
    values = np.zeros(op.mesh.n_vertices)
    values[op.active] = init
    values[op.clamped] = v_cap
    history: list[float] = []
    converged = len(op.active) == 0
    arg = np.zeros(len(op.active), dtype=np.int64)
    while not converged and len(history) < config.max_iters:
        new, arg = op.apply(values, v_cap)
        metric = float(np.max(np.abs(new - values)))
        history.append(metric)
        values = new
        converged = metric < config.eps_stop
    residual = float(np.max(np.abs(op.apply(values, v_cap)[0] - values))) if len(op.active) else 0.0
    if converged and residual > config.eps_stop / (1.0 - op.kappa):
        logger.warning("fixed-point residual %.3g exceeds the contraction bound", residual)
    return values, history, converged, residual, arg


def value_iteration(mesh: SimplicialMesh, spec: SystemSpec, config: SolverConfig, operator: BellmanOperator | None = None) -> ValueField:
    """Jacobi value iteration for the discounted problem (``lam > 0``)."""
    if not config.lam > 0:
        raise ValueError("value_iteration needs lam > 0; use solve_min_time for lam = 0")
    if not spec.spans_su2:
        logger.warning("system %s does not satisfy the bracket-generating condition", spec.name)
    op = operator or build_operator(mesh, spec, config.lam, config)
    v_cap, init = _route_caps(config, op.cost_max / config.lam)
    values, history, converged, residual, arg = _iterate(op, v_cap, init, config)
    return ValueField(
        values=values,
        raw=values,
        metric_history=history,
        iterations=len(history),
        converged=converged,
        kind="discounted",
        h=mesh.h,
        lam=config.lam,
        lam_eff=config.lam,
        dt=op.dt,
        v_cap_raw=v_cap,
        controls=op.controls,
        exact_exit=op.exact_exit,
        residual=residual,
        policy=arg,
    )


def solve_min_time(mesh: SimplicialMesh, spec: SystemSpec, config: SolverConfig, operator: BellmanOperator | None = None) -> ValueField:
    """Minimum-time values through the Kruskov transform ``R = 1 - exp(-T)``.

    ``R`` solves the unit-discounted problem with unit running cost; times are
    recovered as ``-log(1 - R)``, with ``R = 1`` (absorbed at the cap) mapping to inf.
    """
    if callable(spec.running_cost) or float(spec.running_cost) != 1.0:
        raise ValueError("the minimum-time route needs a unit running cost")
    op = operator or build_operator(mesh, spec, 1.0, config)
    t_cap = math.inf if config.v_cap is None else float(config.v_cap)
    r_cap = 1.0 if math.isinf(t_cap) else kruskov(t_cap)
    r_init = r_cap if config.init_value is None else kruskov(config.init_value)
    raw, history, converged, residual, arg = _iterate(op, r_cap, r_init, config)
    times = np.full_like(raw, np.inf)
    finite = raw < 1.0
    times[finite] = kruskov_inverse(raw[finite])
    times[mesh.flags == TARGET] = 0.0
    return ValueField(
        values=times,
        raw=raw,
        metric_history=history,
        iterations=len(history),
        converged=converged,
        kind="min_time",
        h=mesh.h,
        lam=0.0,
        lam_eff=1.0,
        dt=op.dt,
        v_cap_raw=r_cap,
        controls=op.controls,
        exact_exit=op.exact_exit,
        residual=residual,
        policy=arg,
    )


def build_operator(mesh: SimplicialMesh, spec: SystemSpec, lam_eff: float, config: SolverConfig) -> BellmanOperator:
    controls = discretize_controls(spec, config.control_samples)
    return BellmanOperator(mesh, spec, lam_eff, controls, local_timestep(spec, mesh.h), config.clamp_outer, config.exact_exit)


def solve(mesh: SimplicialMesh, spec: SystemSpec, config: SolverConfig) -> ValueField:
    """Dispatch on ``config.lam``: discounted for ``lam > 0``, minimum time for ``lam = 0``."""
    if config.lam > 0:
        return value_iteration(mesh, spec, config)
    return solve_min_time(mesh, spec, config)


def bellman_update(mesh: SimplicialMesh, spec: SystemSpec, config: SolverConfig, values: np.ndarray, x_id: int, ghost: float | None = None) -> tuple[float, np.ndarray]:
    """Single-vertex Bellman update, computed from scratch (no cached operator).

    Returns ``(value, minimizing control)``; ties go to the lowest sample index.
    ``ghost`` is the value used for out-of-domain foot points (default ``v_cap``).
    """
    if mesh.flags[x_id] == TARGET:
        raise ValueError("target vertices are pinned at zero")
    if not config.lam > 0:
        raise ValueError("bellman_update needs lam > 0")
    controls = discretize_controls(spec, config.control_samples)
    dt = local_timestep(spec, mesh.h)
    if ghost is None:
        costs = np.array([spec.cost(mesh.vertices[x_id], v)[0] for v in controls])
        ghost = config.v_cap if config.v_cap is not None else costs.max() / config.lam
    cols, w, cost_dt, _ = transition_table(mesh, spec, mesh.vertices[[x_id]], controls, dt, config.lam, config.exact_exit)
    ext = np.append(np.asarray(values, dtype=float), ghost)
    cand = (np.einsum("kj,kj->k", w[0], ext[cols[0]]) + cost_dt[0]) / (1.0 + config.lam * dt)
    k = int(np.argmin(cand))
    return float(cand[k]), controls[k]
