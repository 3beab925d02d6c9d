"""Policy extraction from a converged field and open-loop trajectory integration."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .lie import GroupElement, SystemSpec, flow, log_map
from .mesh import OutOfDomain, SimplicialMesh
from .solver import ValueField, transition_table


@dataclass(frozen=True)
class TrajectorySample:
    t: float
    state: GroupElement
    chart: np.ndarray
    control: np.ndarray


@dataclass
class TrajectoryRecord:
    """Samples at uniform spacing ``dt``; the last control is never applied.

    ``out_of_domain`` marks a run cut short because the next step left the mesh.
    """

    samples: list[TrajectorySample] = field(default_factory=list)
    total_time: float = 0.0
    reached_target: bool = False
    out_of_domain: bool = False
    dt: float = 0.0

    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.samples])

    def charts(self) -> np.ndarray:
        return np.array([s.chart for s in self.samples]).reshape(-1, 3)

    def controls(self) -> np.ndarray:
        return np.array([s.control for s in self.samples])


def _inside(mesh: SimplicialMesh, p: np.ndarray) -> bool:
    return bool(mesh.locate_many(p[None])[0][0] >= 0)


def policy_candidates(mesh: SimplicialMesh, spec: SystemSpec, vf: ValueField, p) -> np.ndarray:
    """Candidate values of every sampled control at the continuous chart point ``p``.

    Foot points are flowed from ``p`` itself and the field is interpolated,
    in the same units as the field that was iterated (``vf.raw``).
    """
    p = np.asarray(p, dtype=float)
    if not _inside(mesh, p):
        raise OutOfDomain(f"point {p} is outside the mesh")
    cols, w, cost_dt, _ = transition_table(mesh, spec, p[None], vf.controls, vf.dt, vf.lam_eff, vf.exact_exit)
    ext = np.append(vf.raw, vf.v_cap_raw)
    return (np.einsum("kj,kj->k", w[0], ext[cols[0]]) + cost_dt[0]) / (1.0 + vf.lam_eff * vf.dt)


def policy_at(mesh: SimplicialMesh, spec: SystemSpec, vf: ValueField, p) -> np.ndarray:
    """Minimizing sampled control at ``p``; lowest index wins ties.

    Inside the target ball the first sample is returned by convention.
    """
    p = np.asarray(p, dtype=float)
    if not _inside(mesh, p):
        raise OutOfDomain(f"point {p} is outside the mesh")
    if np.linalg.norm(p) <= mesh.r_T:
        return vf.controls[0].copy()
    return vf.controls[int(np.argmin(policy_candidates(mesh, spec, vf, p)))].copy()


def simulate(mesh: SimplicialMesh, spec: SystemSpec, vf: ValueField, u0: GroupElement, max_steps: int) -> TrajectoryRecord:
    """Follow the recomputed policy with step ``vf.dt`` until the chart point is within ``r_T + h``."""
    if max_steps < 1:
        raise ValueError("max_steps must be positive")
    u = np.asarray(u0, dtype=complex)
    a = log_map(u)
    if not _inside(mesh, a):
        raise OutOfDomain(f"start {a} is outside the mesh")
    stop = mesh.r_T + mesh.h
    rec = TrajectoryRecord(dt=vf.dt)
    t = 0.0
    for step in range(max_steps + 1):
        v = policy_at(mesh, spec, vf, a)
        rec.samples.append(TrajectorySample(t, u, a, v))
        if np.linalg.norm(a) <= stop:
            rec.reached_target = True
            break
        if step == max_steps:
            break
        u_next = flow(u, v, vf.dt, spec)
        a_next = log_map(u_next)
        if not _inside(mesh, a_next):
            rec.out_of_domain = True
            break
        u, a = u_next, a_next
        t = (step + 1) * vf.dt
    rec.total_time = rec.samples[-1].t
    return rec


def value_descent_gaps(mesh: SimplicialMesh, spec: SystemSpec, vf: ValueField, rec: TrajectoryRecord) -> np.ndarray:
    """``V_{k+1} - ((1 + lam dt) V_k - l dt)`` along the path, on the iterated field.

    A converged field keeps these at most ``C h`` for a modest constant ``C``.
    """
    charts = rec.charts()
    if len(charts) < 2:
        return np.zeros(0)
    vals = mesh.interpolate(vf.raw, charts)
    costs = np.array([spec.cost(s.chart, s.control)[0] for s in rec.samples[:-1]])
    lam, dt = vf.lam_eff, vf.dt
    return vals[1:] - ((1.0 + lam * dt) * vals[:-1] - costs * dt)
