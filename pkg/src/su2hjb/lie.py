"""Linear-algebra layer for su(2) and SU(2).

Algebra elements are stored as real coefficient triples over the basis
``(I_x, I_y, I_z)`` and group elements as 2x2 complex arrays.  Every
function accepts a single element or a stack with leading batch axes.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Callable, Sequence, Union

import numpy as np

AlgebraVector = np.ndarray  # shape (..., 3), real
GroupElement = np.ndarray  # shape (..., 2, 2), complex
RunningCost = Union[float, Callable[[np.ndarray, np.ndarray], np.ndarray]]

LOG_ANTIPODE_TOL = 1e-9

_PAULI = np.array(
    [
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)
_BASIS = -0.5j * _PAULI


class NearAntipode(ValueError):
    """Raised when the principal logarithm is requested too close to -Id."""


class DegenerateSystem(ValueError):
    """Raised when no control produces any motion."""


def generators_su2() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return the basis ``(I_x, I_y, I_z)`` with ``I_k = (-j/2) sigma_k``."""
    return _BASIS[0].copy(), _BASIS[1].copy(), _BASIS[2].copy()


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def to_matrix(a: AlgebraVector) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    return np.einsum("...k,kij->...ij", a.astype(complex), _BASIS)


def from_matrix(m: np.ndarray, atol: float = 1e-12) -> AlgebraVector:
    """Coefficients of a traceless skew-Hermitian matrix over the I-basis.

    Raises ``ValueError`` if ``m`` does not reconstruct from its coefficients.
    """
    m = np.asarray(m, dtype=complex)
    # <I_j, I_k> = -2 tr(I_j I_k) = delta_jk
    a = -2.0 * np.einsum("...ij,kji->...k", m, _BASIS).real
    if not np.allclose(to_matrix(a), m, atol=atol, rtol=0.0):
        raise ValueError("matrix is not a traceless skew-Hermitian element of su(2)")
    return a


def bracket(a: AlgebraVector, b: AlgebraVector) -> AlgebraVector:
    """Lie bracket in coefficient form; ``[I_x, I_y] = I_z`` makes this a cross product."""
    return np.cross(a, b)


def exp_map(a: AlgebraVector) -> GroupElement:
    """Exponential of ``a_x I_x + a_y I_y + a_z I_z``.

    Uses ``exp(theta n.I) = cos(theta/2) Id - j sin(theta/2) n.sigma``.
    """
    a = np.asarray(a, dtype=float)
    theta = np.linalg.norm(a, axis=-1)
    half = 0.5 * theta
    # sin(theta/2)/theta, finite at theta = 0
    s = 0.5 * np.sinc(half / np.pi)
    c = np.cos(half)
    ax, ay, az = a[..., 0] * s, a[..., 1] * s, a[..., 2] * s
    out = np.empty(a.shape[:-1] + (2, 2), dtype=complex)
    out[..., 0, 0] = c - 1j * az
    out[..., 0, 1] = -ay - 1j * ax
    out[..., 1, 0] = ay - 1j * ax
    out[..., 1, 1] = c + 1j * az
    return out


def _log_parts(u: GroupElement) -> tuple[np.ndarray, np.ndarray]:
    u = np.asarray(u, dtype=complex)
    cos_half = 0.5 * (u[..., 0, 0].real + u[..., 1, 1].real)
    s = np.empty(u.shape[:-2] + (3,))
    s[..., 0] = -0.5 * (u[..., 0, 1].imag + u[..., 1, 0].imag)
    s[..., 1] = 0.5 * (u[..., 1, 0].real - u[..., 0, 1].real)
    s[..., 2] = 0.5 * (u[..., 1, 1].imag - u[..., 0, 0].imag)
    sin_half = np.linalg.norm(s, axis=-1)
    half = np.arctan2(sin_half, cos_half)
    # theta / sin(theta/2) = 2 (theta/2) / sin(theta/2)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(sin_half > 0, 2.0 * half / np.where(sin_half > 0, sin_half, 1.0), 2.0)
    a = s * scale[..., None]
    dist = np.linalg.norm(u + np.eye(2), axis=(-2, -1))
    return a, dist


def log_map(u: GroupElement, tol: float = LOG_ANTIPODE_TOL) -> AlgebraVector:
    """Principal logarithm with ``norm(a)`` in ``[0, 2 pi)``.

    Raises ``NearAntipode`` if any input lies within ``tol`` (Frobenius) of -Id.
    """
    a, dist = _log_parts(u)
    if np.any(dist < tol):
        raise NearAntipode("group element too close to -Id for the principal log")
    return a


def log_map_masked(u: GroupElement, tol: float = LOG_ANTIPODE_TOL) -> tuple[AlgebraVector, np.ndarray]:
    """Batched log; returns ``(a, ok)`` where ``ok`` is False near -Id."""
    a, dist = _log_parts(u)
    ok = dist >= tol
    return np.where(ok[..., None], a, np.nan), ok


def reproject(u: GroupElement) -> GroupElement:
    """Closest special unitary matrix in Frobenius norm (polar factor, unit det)."""
    x, _, yh = np.linalg.svd(u)
    w = x @ yh
    root = np.sqrt(np.linalg.det(w))
    return w / root[..., None, None]


def is_su2(u: GroupElement, tol: float = 1e-12) -> bool:
    u = np.asarray(u, dtype=complex)
    unit = np.linalg.norm(np.conj(np.swapaxes(u, -1, -2)) @ u - np.eye(2), axis=(-2, -1))
    det = np.abs(np.linalg.det(u) - 1.0)
    return bool(np.all(unit < tol) and np.all(det < tol))


@dataclass(frozen=True)
class ControlSet:
    """Compact control set: ``sphere`` (norm equal to ``size``) or ``box`` (sup-norm at most ``size``)."""

    kind: str
    size: float

    def __post_init__(self):
        if self.kind not in ("sphere", "box"):
            raise ValueError(f"unknown control set kind {self.kind!r}")
        if not self.size > 0:
            raise ValueError("control set size must be positive")

    def contains(self, v: np.ndarray, atol: float = 1e-9) -> bool:
        v = np.asarray(v, dtype=float)
        if self.kind == "sphere":
            return abs(np.linalg.norm(v) - self.size) <= atol
        return bool(np.all(np.abs(v) <= self.size + atol))


@dataclass(frozen=True)
class SystemSpec:
    """Right-invariant control system ``dU/dt = (X_0 + sum_k v_k X_k) U``.

    ``running_cost`` is a constant or a vectorized callable
    ``cost(chart_points (n, 3), control (m,)) -> (n,)``.
    """

    generators: np.ndarray
    control_set: ControlSet
    drift: np.ndarray | None = None
    running_cost: RunningCost = 1.0
    name: str = "custom"

    def __post_init__(self):
        gens = np.atleast_2d(np.asarray(self.generators, dtype=float))
        if gens.size == 0 or gens.shape[1] != 3:
            raise ValueError("generators must be a nonempty list of coefficient triples")
        object.__setattr__(self, "generators", gens)
        if self.drift is not None:
            d = np.asarray(self.drift, dtype=float).reshape(3)
            object.__setattr__(self, "drift", None if not np.any(d) else d)

    @property
    def m(self) -> int:
        return self.generators.shape[0]

    @property
    def spans_su2(self) -> bool:
        """Fields plus their pairwise brackets span a 3-dimensional space."""
        fields = list(self.generators)
        if self.drift is not None:
            fields.append(self.drift)
        vecs = fields + [bracket(a, b) for a, b in product(fields, repeat=2)]
        return np.linalg.matrix_rank(np.array(vecs), tol=1e-10) == 3

    def cost(self, points: np.ndarray, v: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(points)
        if callable(self.running_cost):
            return np.asarray(self.running_cost(points, np.asarray(v, dtype=float)), dtype=float)
        return np.full(points.shape[0], float(self.running_cost))

    def to_dict(self) -> dict:
        if callable(self.running_cost):
            raise ValueError("systems with a callable running cost are not serializable")
        return {
            "name": self.name,
            "generators": self.generators.tolist(),
            "drift": None if self.drift is None else self.drift.tolist(),
            "control_set": {"kind": self.control_set.kind, "size": self.control_set.size},
            "running_cost": float(self.running_cost),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SystemSpec":
        cs = d["control_set"]
        return cls(
            generators=np.asarray(d["generators"], dtype=float),
            control_set=ControlSet(cs["kind"], float(cs["size"])),
            drift=None if d.get("drift") is None else np.asarray(d["drift"], dtype=float),
            running_cost=float(d.get("running_cost", 1.0)),
            name=d.get("name", "custom"),
        )


def eq27_system() -> SystemSpec:
    """``dU/dt = (v_1 I_x + v_2 I_z) U`` with ``|v| = 2``."""
    return SystemSpec(
        generators=np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]),
        control_set=ControlSet("sphere", 2.0),
        name="eq27",
    )


def example31_system(vbound: float = 10.0) -> SystemSpec:
    """``dU/dt = (I_z + v I_x) U`` with the control clamped to ``|v| <= vbound``."""
    return SystemSpec(
        generators=np.array([[1.0, 0.0, 0.0]]),
        control_set=ControlSet("box", vbound),
        drift=np.array([0.0, 0.0, 1.0]),
        name="example31",
    )


def dynamics_direction(v: Sequence[float] | np.ndarray, spec: SystemSpec) -> AlgebraVector:
    """Algebra element ``X_0 + sum_k v_k X_k`` driving the right-invariant flow."""
    v = np.asarray(v, dtype=float)
    x = v @ spec.generators
    if spec.drift is not None:
        x = x + spec.drift
    return x


def flow(u: GroupElement, v, dt: float, spec: SystemSpec) -> GroupElement:
    """Exact solution after time ``dt`` under the constant control ``v``."""
    if dt < 0:
        raise ValueError("dt must be nonnegative")
    step = exp_map(dt * dynamics_direction(v, spec))
    return reproject(step @ np.asarray(u, dtype=complex))


def speed_bound(spec: SystemSpec) -> float:
    """``sup_v |X_0 + sum_k v_k X_k|`` over the control set (coefficient norm)."""
    g = spec.generators
    x0 = np.zeros(3) if spec.drift is None else spec.drift
    r = spec.control_set.size
    if spec.control_set.kind == "box":
        # convex in v, so the sup sits at a vertex of the box
        corners = np.array(list(product((-r, r), repeat=spec.m)))
        best = float(np.max(np.linalg.norm(x0 + corners @ g, axis=1)))
    else:
        best = _sphere_max(g @ g.T, g @ x0, float(x0 @ x0), r)
    if not best > 0:
        raise DegenerateSystem("speed bound is zero: no control moves the system")
    return best


def _sphere_max(a: np.ndarray, b: np.ndarray, c: float, r: float) -> float:
    """sqrt of max over |v| = r of ``v'Av + 2 b'v + c`` (A symmetric PSD)."""
    evals, evecs = np.linalg.eigh(a)
    bt = evecs.T @ b
    lmax = evals[-1]
    top = evals >= lmax - 1e-12 * max(1.0, abs(lmax))
    # Stationary points satisfy (mu - lambda_i) w_i = bt_i with mu >= lambda_max.
    rest = np.where(top, 0.0, bt / np.where(top, 1.0, lmax - evals))
    if np.linalg.norm(bt[top]) < 1e-14 and np.linalg.norm(rest) <= r:
        # hard case: mu = lambda_max, pad along the top eigenspace
        w = rest.copy()
        w[np.argmax(top)] = np.sqrt(r * r - rest @ rest)
    else:
        def wnorm(mu):
            return np.linalg.norm(bt / (mu - evals))

        lo, hi = lmax, lmax + np.linalg.norm(b) / r + 1.0
        while wnorm(hi) > r:
            hi = lmax + 2.0 * (hi - lmax)
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if mid in (lo, hi):
                break
            if wnorm(mid) > r:
                lo = mid
            else:
                hi = mid
        w = bt / (hi - evals)
        w *= r / np.linalg.norm(w)
    v = evecs @ w
    val = v @ a @ v + 2.0 * b @ v + c
    return float(np.sqrt(max(val, 0.0)))


_HADAMARD = np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2.0)


def kak_decompose(u: GroupElement) -> tuple[float, float, float]:
    """Angles ``(beta, alpha, gamma)`` with ``u = exp(beta I_x) exp(alpha I_z) exp(gamma I_x)``.

    ``alpha`` lies in ``[0, pi]``.  In the Hadamard basis the I_x subgroup is
    diagonal, and the entry magnitudes are ``cos(alpha/2)`` and ``sin(alpha/2)``.
    """
    w = _HADAMARD @ np.asarray(u, dtype=complex) @ _HADAMARD
    c, s = abs(w[0, 0]), abs(w[0, 1])
    alpha = 2.0 * np.arctan2(s, c)
    # w = exp(beta I_z) exp(alpha I_x) exp(gamma I_z):
    # arg w00 = -(beta + gamma)/2,  arg w01 = -pi/2 - (beta - gamma)/2
    plus = -2.0 * np.angle(w[0, 0]) if c > 1e-12 else 0.0
    minus = -2.0 * (np.angle(w[0, 1]) + 0.5 * np.pi) if s > 1e-12 else 0.0
    if c <= 1e-12:
        plus = minus
    beta, gamma = 0.5 * (plus + minus), 0.5 * (plus - minus)
    if np.linalg.norm(_kak_product(beta, alpha, gamma) - u) > np.linalg.norm(_kak_product(beta + 2 * np.pi, alpha, gamma) - u):
        beta += 2 * np.pi
    return float(beta), float(alpha), float(gamma)


def _kak_product(beta: float, alpha: float, gamma: float) -> np.ndarray:
    return exp_map([beta, 0.0, 0.0]) @ exp_map([0.0, 0.0, alpha]) @ exp_map([gamma, 0.0, 0.0])


def kak_residual(u: GroupElement) -> float:
    beta, alpha, gamma = kak_decompose(u)
    return float(np.linalg.norm(_kak_product(beta, alpha, gamma) - u))


def kak_alpha(u: GroupElement) -> float:
    """The I_z angle ``alpha`` in ``[0, pi]`` of the KAK form of ``u``."""
    return kak_decompose(u)[1]


def analytic_value_example31(u: GroupElement, lam: float) -> float:
    """Closed-form discounted cost ``(1 - exp(-lam alpha)) / lam`` for the I_z-drift system."""
    if not lam > 0:
        raise ValueError("lam must be positive")
    return float(-np.expm1(-lam * kak_alpha(u)) / lam)
