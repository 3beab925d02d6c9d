"""Tetrahedral simplicial complexes over a ball in su(2).

The chart coordinates of the algebra are treated as plain R^3.  Point
location uses a uniform background grid whose cells bucket simplices by
bounding box, followed by exact barycentric inside tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import permutations

import numpy as np

TARGET, INTERIOR, OUTER = 0, 1, 2
FLAG_NAMES = {TARGET: "target", INTERIOR: "interior", OUTER: "outer"}

WEIGHT_TOL = 1e-10
MAX_RHO = 1.75 * math.pi

_CELL_TOL = 1e-9
_CHUNK = 65536
# Kuhn splitting of the unit cube: one tetrahedron per axis ordering
_KUHN = np.array(
    [
        [[0, 0, 0], np.eye(3, dtype=int)[p[0]], np.eye(3, dtype=int)[p[0]] + np.eye(3, dtype=int)[p[1]], [1, 1, 1]]
        for p in permutations(range(3))
    ],
    dtype=np.int64,
)


class InvalidGeometry(ValueError):
    pass


class OutOfDomain(ValueError):
    pass


class DegenerateSimplex(ValueError):
    pass


@dataclass(frozen=True)
class BarycentricLocation:
    simplex_id: int
    weights: np.ndarray


class SimplicialMesh:
    """Vertices, tetrahedra, per-vertex flags and a point locator.

    ``flags`` default to TARGET for vertices with norm at most ``r_T``,
    OUTER for vertices on a boundary face, INTERIOR otherwise.
    """

    def __init__(
        self,
        vertices: np.ndarray,
        simplices: np.ndarray,
        h: float,
        rho: float,
        r_T: float,
        flags: np.ndarray | None = None,
        cell_size: float | None = None,
        grid_origin: np.ndarray | None = None,
    ):
        self.vertices = np.ascontiguousarray(vertices, dtype=float)
        self.simplices = np.ascontiguousarray(simplices, dtype=np.int64)
        if self.simplices.ndim != 2 or self.simplices.shape[1] != 4:
            raise InvalidGeometry("simplices must be an (n, 4) index array")
        self.h = float(h)
        self.rho = float(rho)
        self.r_T = float(r_T)

        corners = self.vertices[self.simplices]
        self._origin = corners[:, 0, :]
        edges = np.transpose(corners[:, 1:, :] - corners[:, :1, :], (0, 2, 1))
        det = np.linalg.det(edges)
        self.volumes = np.abs(det) / 6.0
        scale = np.max(np.linalg.norm(corners[:, 1:, :] - corners[:, :1, :], axis=2), axis=1)
        self.degenerate = np.abs(det) <= 1e-12 * scale**3
        safe = np.where(self.degenerate[:, None, None], np.eye(3), edges)
        self._inv = np.linalg.inv(safe)

        self.flags = self._default_flags() if flags is None else np.asarray(flags, dtype=np.int8)
        self._star_ptr = None
        self._build_grid(cell_size, grid_origin)

    # -- construction helpers -------------------------------------------------

    def _default_flags(self) -> np.ndarray:
        flags = np.full(len(self.vertices), INTERIOR, dtype=np.int8)
        flags[self.boundary_vertices()] = OUTER
        flags[np.linalg.norm(self.vertices, axis=1) <= self.r_T + 1e-12] = TARGET
        return flags

    def boundary_vertices(self) -> np.ndarray:
        """Vertices lying on a face that belongs to exactly one tetrahedron."""
        faces = np.concatenate([np.delete(self.simplices, k, axis=1) for k in range(4)])
        faces.sort(axis=1)
        key = (faces[:, 0] << 42) | (faces[:, 1] << 21) | faces[:, 2]
        uniq, counts = np.unique(key, return_counts=True)
        once = uniq[counts == 1]
        return np.unique(np.concatenate([once >> 42, (once >> 21) & 0x1FFFFF, once & 0x1FFFFF]))

    def _build_grid(self, cell_size, origin):
        corners = self.vertices[self.simplices]
        lo, hi = corners.min(axis=1), corners.max(axis=1)
        if cell_size is None:
            cell_size = float(np.median(np.max(hi - lo, axis=1))) if len(lo) else 1.0
        if origin is None:
            origin = self.vertices.min(axis=0) if len(self.vertices) else np.zeros(3)
        self._cs = float(cell_size)
        self._go = np.asarray(origin, dtype=float)
        span = (self.vertices.max(axis=0) - self._go) / self._cs if len(self.vertices) else np.zeros(3)
        self._dims = np.maximum(np.ceil(span - _CELL_TOL).astype(np.int64), 1)

        clo = np.clip(np.floor((lo - self._go) / self._cs + _CELL_TOL).astype(np.int64), 0, self._dims - 1)
        chi = np.clip(np.floor((hi - self._go) / self._cs - _CELL_TOL).astype(np.int64), 0, self._dims - 1)
        chi = np.maximum(chi, clo)
        ext = chi - clo + 1
        sids, cells = [], []
        live = np.flatnonzero(~self.degenerate)
        for dx in range(int(ext[:, 0].max(initial=1))):
            for dy in range(int(ext[:, 1].max(initial=1))):
                for dz in range(int(ext[:, 2].max(initial=1))):
                    off = np.array([dx, dy, dz])
                    ok = live[np.all(off < ext[live], axis=1)]
                    sids.append(ok)
                    cells.append(self._cell_id(clo[ok] + off))
        sids = np.concatenate(sids) if sids else np.zeros(0, np.int64)
        cells = np.concatenate(cells) if cells else np.zeros(0, np.int64)
        order = np.lexsort((sids, cells))
        self._cell_items = sids[order]
        ncell = int(np.prod(self._dims))
        self._cell_ptr = np.zeros(ncell + 1, dtype=np.int64)
        np.add.at(self._cell_ptr, cells + 1, 1)
        np.cumsum(self._cell_ptr, out=self._cell_ptr)

    def _cell_id(self, c: np.ndarray) -> np.ndarray:
        d = self._dims
        return (c[..., 0] * d[1] + c[..., 1]) * d[2] + c[..., 2]

    # -- queries ----------------------------------------------------------------

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_simplices(self) -> int:
        return len(self.simplices)

    def max_edge_length(self) -> float:
        c = self.vertices[self.simplices]
        pairs = [(i, j) for i in range(4) for j in range(i + 1, 4)]
        return float(max(np.linalg.norm(c[:, i] - c[:, j], axis=1).max() for i, j in pairs))

    def star(self, vertex_id: int) -> set[int]:
        """Ids of all simplices having ``vertex_id`` as a vertex."""
        if not 0 <= vertex_id < self.n_vertices:
            raise IndexError(f"vertex id {vertex_id} out of range")
        if self._star_ptr is None:
            flat = self.simplices.ravel()
            order = np.argsort(flat, kind="stable")
            self._star_items = order // 4
            self._star_ptr = np.searchsorted(flat[order], np.arange(self.n_vertices + 1))
        a, b = self._star_ptr[vertex_id], self._star_ptr[vertex_id + 1]
        return set(self._star_items[a:b].tolist())

    def barycentric_weights(self, simplex_id: int, p) -> np.ndarray:
        """Affine weights of ``p`` w.r.t. the simplex; negative outside it."""
        if self.degenerate[simplex_id]:
            raise DegenerateSimplex(f"simplex {simplex_id} is degenerate")
        return self._weights(np.array([simplex_id]), np.asarray(p, dtype=float)[None])[0]

    def _weights(self, sids: np.ndarray, p: np.ndarray) -> np.ndarray:
        lam = np.einsum("...ij,...j->...i", self._inv[sids], p - self._origin[sids])
        return np.concatenate([1.0 - lam.sum(axis=-1, keepdims=True), lam], axis=-1)

    def locate(self, p) -> BarycentricLocation:
        sid, w = self.locate_many(np.asarray(p, dtype=float)[None])
        if sid[0] < 0:
            raise OutOfDomain(f"point {np.asarray(p).tolist()} lies outside the mesh")
        return BarycentricLocation(int(sid[0]), w[0])

    def locate_many(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Batched location: ``(simplex_ids, weights)``, id -1 for points outside.

        Ties on shared faces go to the lowest simplex id.  NaN points are outside.
        """
        pts = np.asarray(points, dtype=float).reshape(-1, 3)
        n = len(pts)
        best = np.full(n, np.iinfo(np.int64).max, dtype=np.int64)
        best_w = np.zeros((n, 4))
        finite = np.all(np.isfinite(pts), axis=1)
        g = np.where(finite[:, None], (pts - self._go) / self._cs, -10.0)
        cell = np.floor(g).astype(np.int64)
        frac = g - cell
        self._scan(np.flatnonzero(finite), cell, pts, best, best_w)

        near_lo = frac < _CELL_TOL
        near_hi = frac > 1.0 - _CELL_TOL
        edge = np.flatnonzero(finite & np.any(near_lo | near_hi, axis=1))
        for off in np.array([o for o in np.ndindex(3, 3, 3) if o != (1, 1, 1)]) - 1:
            need = np.ones(len(edge), dtype=bool)
            for ax in range(3):
                if off[ax] < 0:
                    need &= near_lo[edge, ax]
                elif off[ax] > 0:
                    need &= near_hi[edge, ax]
            sel = edge[need]
            if len(sel):
                shifted = cell.copy()
                shifted[sel] += off
                self._scan(sel, shifted, pts, best, best_w)

        missing = best == np.iinfo(np.int64).max
        best[missing] = -1
        best_w[missing] = np.nan
        return best, best_w

    def _scan(self, idx, cell, pts, best, best_w):
        c = cell[idx]
        inside = np.all((c >= 0) & (c < self._dims), axis=1)
        idx, c = idx[inside], c[inside]
        for start in range(0, len(idx), _CHUNK):
            pi = idx[start : start + _CHUNK]
            cid = self._cell_id(c[start : start + _CHUNK])
            a = self._cell_ptr[cid]
            cnt = self._cell_ptr[cid + 1] - a
            width = int(cnt.max(initial=0))
            if width == 0:
                continue
            col = np.arange(width)
            valid = col[None, :] < cnt[:, None]
            cand = self._cell_items[np.where(valid, a[:, None] + col[None, :], 0)]
            w = self._weights(cand, pts[pi][:, None, :])
            hit = valid & (w.min(axis=2) >= -WEIGHT_TOL)
            sid = np.where(hit, cand, np.iinfo(np.int64).max)
            k = np.argmin(sid, axis=1)
            rows = np.arange(len(pi))
            chosen = sid[rows, k]
            better = chosen < best[pi]
            best[pi[better]] = chosen[better]
            best_w[pi[better]] = w[rows, k][better]

    def interpolate(self, values: np.ndarray, points: np.ndarray) -> np.ndarray:
        """Piecewise-linear interpolation of vertex values; NaN outside the mesh."""
        sid, w = self.locate_many(points)
        out = np.full(len(sid), np.nan)
        ok = sid >= 0
        out[ok] = np.einsum("ij,ij->i", w[ok], np.asarray(values)[self.simplices[sid[ok]]])
        return out

    # -- export -----------------------------------------------------------------

    def to_json(self) -> dict:
        return {
            "h": self.h,
            "rho": self.rho,
            "r_T": self.r_T,
            "vertices": self.vertices.tolist(),
            "simplices": self.simplices.tolist(),
            "flags": self.flags.astype(int).tolist(),
        }

    @classmethod
    def from_json(cls, d: dict) -> "SimplicialMesh":
        return cls(
            np.asarray(d["vertices"], dtype=float),
            np.asarray(d["simplices"], dtype=np.int64),
            d["h"],
            d["rho"],
            d["r_T"],
            flags=np.asarray(d["flags"], dtype=np.int8),
        )


def triangulate_ball(rho: float, r_T: float, h: float) -> SimplicialMesh:
    """Kuhn-split cubic lattice covering the ball of radius ``rho``.

    Lattice spacing is ``h / sqrt(3)`` so the cube diagonal, the longest edge,
    equals ``h``.  A tetrahedron is kept when its centroid lies within ``rho``.
    """
    if not (0 < r_T < rho <= MAX_RHO):
        raise InvalidGeometry(f"need 0 < r_T < rho <= 1.75 pi, got r_T={r_T}, rho={rho}")
    if not (0 < h < rho):
        raise InvalidGeometry(f"need 0 < h < rho, got h={h}")
    s = h / math.sqrt(3.0)
    n = int(math.ceil(rho / s)) + 1
    ax = np.arange(-n, n, dtype=np.int64)
    cubes = np.stack(np.meshgrid(ax, ax, ax, indexing="ij"), axis=-1).reshape(-1, 3)
    lattice = cubes[:, None, None, :] + _KUHN[None]  # (cubes, 6, 4, 3)
    lattice = lattice.reshape(-1, 4, 3)
    centroid = lattice.sum(axis=1) * (s / 4.0)
    lattice = lattice[np.einsum("ij,ij->i", centroid, centroid) <= rho * rho]

    side = 2 * n + 1
    key = ((lattice[..., 0] + n) * side + (lattice[..., 1] + n)) * side + (lattice[..., 2] + n)
    uniq, simplices = np.unique(key, return_inverse=True)
    simplices = simplices.reshape(-1, 4)
    ijk = np.stack([uniq // (side * side), (uniq // side) % side, uniq % side], axis=1) - n
    vertices = ijk * s
    return SimplicialMesh(vertices, simplices, h, rho, r_T, cell_size=s, grid_origin=np.full(3, -n * s))
