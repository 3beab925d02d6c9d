"""Plain-text exports.  Data files carry no timestamps so reruns are byte-identical."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .mesh import FLAG_NAMES, SimplicialMesh
from .solver import ValueField
from .trajectory import TrajectoryRecord


def fmt(x: float) -> str:
    """Shortest round-tripping text for a float; ``inf`` spelled out."""
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x + 0.0)


def _write_rows(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def write_values(path: Path, mesh: SimplicialMesh, vf: ValueField) -> None:
    rows = (
        [fmt(x), fmt(y), fmt(z), fmt(v), FLAG_NAMES[int(f)]]
        for (x, y, z), v, f in zip(mesh.vertices, vf.values, mesh.flags)
    )
    _write_rows(path, ["x", "y", "z", "value", "flag"], rows)


def write_metric(path: Path, history: list[float]) -> None:
    _write_rows(path, ["iter", "metric"], ([i + 1, fmt(m)] for i, m in enumerate(history)))


def write_trajectory(path: Path, rec: TrajectoryRecord) -> None:
    m = len(rec.samples[0].control) if rec.samples else 0
    header = ["t", "x", "y", "z"] + [f"v{k + 1}" for k in range(m)]
    rows = ([fmt(s.t)] + [fmt(c) for c in s.chart] + [fmt(c) for c in s.control] for s in rec.samples)
    _write_rows(path, header, rows)


def write_oracle(path: Path, probes: np.ndarray, times: list[float]) -> None:
    rows = ([fmt(p[0]), fmt(p[1]), fmt(p[2]), fmt(t)] for p, t in zip(probes, times))
    _write_rows(path, ["probe_x", "probe_y", "probe_z", "time"], rows)


def read_csv(path: Path) -> tuple[list[str], np.ndarray]:
    """Header and numeric body (non-numeric columns dropped) of a CSV written above."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    keep = [i for i, name in enumerate(header) if name != "flag"]
    data = np.array([[float(r[i]) for i in keep] for r in body]).reshape(len(body), len(keep))
    return [header[i] for i in keep], data


def save_raw(path: Path, vf: ValueField) -> None:
    """Iterated field as ``.npy`` (deterministic bytes, unlike zipped archives)."""
    np.save(path, vf.raw)


def load_field(raw_path: Path, values_path: Path, metric_path: Path, meta: dict, controls: np.ndarray) -> ValueField:
    """Rebuild a ValueField from a solve directory."""
    raw = np.load(raw_path)
    _, vals = read_csv(values_path)
    _, metric = read_csv(metric_path)
    return ValueField(
        values=vals[:, 3],
        raw=raw,
        metric_history=metric[:, 1].tolist() if len(metric) else [],
        iterations=int(meta["iterations"]),
        converged=bool(meta["converged"]),
        kind=meta["kind"],
        h=float(meta["h"]),
        lam=float(meta["lam"]),
        lam_eff=float(meta["lam_eff"]),
        dt=float(meta["dt"]),
        v_cap_raw=float(meta["v_cap_raw"]),
        controls=controls,
        exact_exit=bool(meta["exact_exit"]),
        residual=float(meta["residual"]),
    )


def field_meta(vf: ValueField) -> dict:
    return {
        "kind": vf.kind,
        "h": vf.h,
        "lam": vf.lam,
        "lam_eff": vf.lam_eff,
        "dt": vf.dt,
        "v_cap_raw": vf.v_cap_raw,
        "exact_exit": vf.exact_exit,
        "iterations": vf.iterations,
        "converged": vf.converged,
        "residual": vf.residual,
    }


def write_json(path: Path, obj: dict) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")
