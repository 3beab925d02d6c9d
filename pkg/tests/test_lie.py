import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from su2hjb.lie import (
    ControlSet,
    DegenerateSystem,
    NearAntipode,
    SystemSpec,
    analytic_value_example31,
    bracket,
    commutator,
    dynamics_direction,
    eq27_system,
    example31_system,
    exp_map,
    flow,
    from_matrix,
    generators_su2,
    is_su2,
    kak_alpha,
    kak_decompose,
    kak_residual,
    log_map,
    log_map_masked,
    reproject,
    speed_bound,
    to_matrix,
)

vectors = st.tuples(*[st.floats(-4.0, 4.0, allow_nan=False)] * 3).map(np.array)


def random_su2(rng, n):
    q = rng.normal(size=(n, 4))
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    w, v = q[:, 0], q[:, 1:]
    ix, iy, iz = generators_su2()
    # U = w Id - j v.sigma = w Id + 2 v.I
    return w[:, None, None] * np.eye(2) + 2 * (v[:, 0, None, None] * ix + v[:, 1, None, None] * iy + v[:, 2, None, None] * iz)


def test_generators_match_convention():
    ix, iy, iz = generators_su2()
    assert np.array_equal(iz, np.diag([-0.5j, 0.5j]))
    assert np.array_equal(ix, -0.5j * np.array([[0, 1], [1, 0]]))
    for g in (ix, iy, iz):
        assert np.trace(g) == 0
        assert np.allclose(g.conj().T, -g)


def test_bracket_relations_are_cyclic():
    ix, iy, iz = generators_su2()
    assert np.allclose(commutator(ix, iy), iz)
    assert np.allclose(commutator(iy, iz), ix)
    assert np.allclose(commutator(iz, ix), iy)


@given(vectors, vectors)
def test_coefficient_bracket_is_cross_product(a, b):
    assert np.allclose(bracket(a, b), np.cross(a, b), atol=1e-12)
    assert np.allclose(from_matrix(commutator(to_matrix(a), to_matrix(b))), np.cross(a, b), atol=1e-10)


def test_exp_examples():
    assert np.array_equal(exp_map(np.zeros(3)), np.eye(2))
    assert np.allclose(exp_map([0, 0, math.pi]), np.diag([-1j, 1j]), atol=1e-15)
    assert np.allclose(exp_map([0, 0, 2 * math.pi]), -np.eye(2), atol=1e-15)


@given(vectors)
def test_exp_matches_matrix_exponential(a):
    assert np.allclose(exp_map(a), expm(to_matrix(a)), atol=1e-13)


def test_log_examples():
    assert np.array_equal(log_map(np.eye(2)), np.zeros(3))
    a = np.array([0.3, -0.7, 1.1])
    assert np.linalg.norm(log_map(exp_map(a)) - a) < 1e-10
    with pytest.raises(NearAntipode):
        log_map(-np.eye(2))
    _, ok = log_map_masked(np.stack([np.eye(2), -np.eye(2)]))
    assert ok.tolist() == [True, False]


def test_log_round_trip_inside_injectivity_ball():
    rng = np.random.default_rng(0)
    d = rng.normal(size=(1000, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    a = d * (rng.uniform(size=(1000, 1)) ** (1 / 3)) * (2 * math.pi - 0.1)
    err = np.linalg.norm(log_map_masked(exp_map(a))[0] - a, axis=1)
    assert err.max() < 1e-9


def test_log_recovers_angle_from_trace():
    rng = np.random.default_rng(1)
    u = random_su2(rng, 200)
    a = log_map_masked(u)[0]
    theta = np.linalg.norm(a, axis=1)
    assert np.allclose(2 * np.cos(theta / 2), np.trace(u, axis1=1, axis2=2).real, atol=1e-12)
    assert np.allclose(exp_map(a), u, atol=1e-10)


def test_reproject_restores_unitarity():
    u = exp_map([0.2, 0.5, -1.0]) * 1.001 + 1e-4
    p = reproject(u)
    assert is_su2(p)
    assert np.linalg.norm(p - exp_map([0.2, 0.5, -1.0])) < 1e-2


def test_dynamics_direction_examples(eq27):
    assert np.array_equal(dynamics_direction([2, 0], eq27), [2, 0, 0])
    assert np.array_equal(dynamics_direction([0], example31_system()), [0, 0, 1])
    assert np.array_equal(dynamics_direction([0, 0], eq27), np.zeros(3))


def test_flow_examples(eq27):
    assert np.allclose(flow(np.eye(2), [2, 0], math.pi / 2, eq27), exp_map([math.pi, 0, 0]), atol=1e-14)
    u = exp_map([0.1, 0.2, 0.3])
    assert np.allclose(flow(u, [1.2, -1.6], 0.0, eq27), u, atol=1e-15)
    v = [2 ** 0.5, 2 ** 0.5]
    assert np.linalg.norm(flow(flow(np.eye(2), v, 0.3, eq27), v, 0.45, eq27) - flow(np.eye(2), v, 0.75, eq27)) < 1e-10
    with pytest.raises(ValueError):
        flow(u, v, -0.1, eq27)


def test_flow_is_right_invariant(eq27):
    rng = np.random.default_rng(2)
    for u in random_su2(rng, 20):
        v = rng.normal(size=2)
        lhs = flow(u, v, 0.37, eq27) @ u.conj().T
        assert np.linalg.norm(lhs - flow(np.eye(2), v, 0.37, eq27)) < 1e-10


def test_long_flow_stays_unitary(eq27):
    rng = np.random.default_rng(3)
    angles = rng.uniform(0, 2 * math.pi, 10_000)
    u = np.eye(2, dtype=complex)
    for th in angles:
        u = flow(u, [2 * math.cos(th), 2 * math.sin(th)], 0.01, eq27)
    assert np.linalg.norm(u.conj().T @ u - np.eye(2)) < 1e-8


def test_speed_bound_eq27_against_sphere_scan(eq27):
    th = np.linspace(0, 2 * math.pi, 10_000, endpoint=False)
    v = 2 * np.stack([np.cos(th), np.sin(th)], axis=1)
    scan = np.linalg.norm(dynamics_direction(v, eq27), axis=1).max()
    assert abs(speed_bound(eq27) - scan) < 1e-6
    assert speed_bound(eq27) == pytest.approx(2.0, abs=1e-12)


def test_speed_bound_example31_against_box_scan():
    spec = example31_system(10.0)
    v = np.linspace(-10, 10, 20_001)[:, None]
    scan = np.linalg.norm(dynamics_direction(v, spec), axis=1).max()
    assert speed_bound(spec) == pytest.approx(math.sqrt(101), abs=1e-12)
    assert abs(speed_bound(spec) - scan) < 1e-9


def test_speed_bound_single_generator_unit_box():
    spec = SystemSpec(np.array([[1.0, 0, 0]]), ControlSet("box", 1.0))
    assert speed_bound(spec) == 1.0


@settings(max_examples=50, deadline=None)
@given(
    st.lists(st.floats(-2, 2), min_size=6, max_size=6),
    st.lists(st.floats(-2, 2), min_size=3, max_size=3),
    st.floats(0.1, 3),
)
def test_sphere_speed_bound_with_drift_matches_scan(g, d, r):
    gens = np.array(g).reshape(2, 3)
    if np.linalg.norm(gens) < 1e-3 and np.linalg.norm(d) < 1e-3:
        return
    spec = SystemSpec(gens, ControlSet("sphere", r), drift=np.array(d))
    th = np.linspace(0, 2 * math.pi, 20_000, endpoint=False)
    v = r * np.stack([np.cos(th), np.sin(th)], axis=1)
    scan = np.linalg.norm(dynamics_direction(v, spec), axis=1).max()
    # scan is a lower bound within O(step^2) of the true supremum
    b = speed_bound(spec)
    assert scan <= b + 1e-9
    assert b - scan <= 1e-6 * max(1.0, b)


def test_degenerate_system_raises():
    spec = SystemSpec(np.zeros((1, 3)), ControlSet("box", 1.0))
    with pytest.raises(DegenerateSystem):
        speed_bound(spec)


def test_spans_su2():
    assert eq27_system().spans_su2
    assert example31_system().spans_su2
    assert not SystemSpec(np.array([[1.0, 0, 0]]), ControlSet("box", 1.0)).spans_su2


def test_spec_dict_round_trip():
    spec = example31_system(3.0)
    back = SystemSpec.from_dict(spec.to_dict())
    assert back.to_dict() == spec.to_dict()


def test_kak_examples():
    assert kak_alpha(np.eye(2)) == pytest.approx(0.0, abs=1e-12)
    assert kak_alpha(exp_map([0, 0, 0.8])) == pytest.approx(0.8, abs=1e-12)
    assert kak_alpha(exp_map([1.3, 0, 0])) == pytest.approx(0.0, abs=1e-12)


def test_kak_reconstruction_on_random_elements():
    rng = np.random.default_rng(4)
    for u in random_su2(rng, 1000):
        beta, alpha, gamma = kak_decompose(u)
        assert 0.0 <= alpha <= math.pi
        assert kak_residual(u) < 1e-8
        rebuilt = exp_map([beta, 0, 0]) @ exp_map([0, 0, alpha]) @ exp_map([gamma, 0, 0])
        assert np.linalg.norm(rebuilt - u) < 1e-8


def test_analytic_value_examples():
    assert analytic_value_example31(np.eye(2), 0.5) == pytest.approx(0.0, abs=1e-15)
    assert analytic_value_example31(exp_map([0, 0, 1.0]), 1.0) == pytest.approx(1 - math.exp(-1), abs=1e-12)
    assert analytic_value_example31(exp_map([0, 0, 0.3]), 0.5) == analytic_value_example31(exp_map([0, 0, -0.3]), 0.5)


@pytest.mark.parametrize("delta", [0.1, 0.01, 0.001])
def test_one_sided_quotients_both_positive(delta):
    s0 = analytic_value_example31(np.eye(2), 1.0)
    plus = (analytic_value_example31(exp_map([0, 0, delta]), 1.0) - s0) / delta
    minus = (analytic_value_example31(exp_map([0, 0, -delta]), 1.0) - s0) / delta
    assert plus == pytest.approx(1.0, abs=2 * delta)
    assert minus == pytest.approx(1.0, abs=2 * delta)
