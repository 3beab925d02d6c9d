import pytest

from su2hjb.lie import eq27_system
from su2hjb.mesh import triangulate_ball
from su2hjb.solver import SolverConfig, build_operator, solve


@pytest.fixture(scope="session")
def eq27():
    return eq27_system()


@pytest.fixture(scope="session")
def coarse_mesh():
    return triangulate_ball(2.5, 0.2, 0.2)


@pytest.fixture(scope="session")
def small_mesh():
    return triangulate_ball(1.2, 0.2, 0.2)


@pytest.fixture(scope="session")
def small_operator(small_mesh, eq27):
    return build_operator(small_mesh, eq27, 0.5, SolverConfig())


@pytest.fixture(scope="session")
def discounted_field(coarse_mesh, eq27):
    return solve(coarse_mesh, eq27, SolverConfig(lam=0.5))


@pytest.fixture(scope="session")
def min_time_field(coarse_mesh, eq27):
    return solve(coarse_mesh, eq27, SolverConfig(lam=0.0))
