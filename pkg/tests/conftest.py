from types import SimpleNamespace

import pytest

import config
from assembly import AssemblyConfig
from background_mesh import BoundingBox, build_structured_mesh
from cut_topology import build_cut_topology
from fe_space import build_dof_map
from level_set_geometry import RayRootConfig
from manufactured import make_manufactured


def pytest_addoption(parser):
    parser.addoption('--runslow', action='store_true', default=False, help='run convergence studies')


def pytest_collection_modifyitems(config, items):
    if config.getoption('--runslow'):
        return
    skip_slow = pytest.mark.skip(reason='needs --runslow')
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip_slow)


def build_problem(case_id, n, p, k=1, gamma_g=config.GHOST_PENALTY):
    problem = make_manufactured(case_id, p)
    mesh = build_structured_mesh(BoundingBox(*config.BOUNDING_BOXES[case_id]), n)
    topology = build_cut_topology(mesh, problem.level_set)
    space = build_dof_map(mesh, topology.active_elements, p)
    root = RayRootConfig(initial_step=mesh.h ** 2)
    cfg = AssemblyConfig(degree=p, taylor_order=k, gamma_g=gamma_g, root=root)
    return SimpleNamespace(problem=problem, mesh=mesh, topology=topology, space=space, cfg=cfg)


@pytest.fixture
def problem_factory():
    return build_problem


@pytest.fixture(scope='module')
def circle16():
    return build_problem('circle', 16, 2)


@pytest.fixture
def unit_mesh():
    return build_structured_mesh(BoundingBox(0.0, 0.0, 1.0, 1.0), 4)
