import functools

import numpy as np
import pytest

from blprecond.discretize import assemble_upwind_1d, assemble_upwind_2d
from blprecond.mesh import LayerCase, build_shishkin_1d, build_shishkin_2d, partition_regions
from blprecond.problem import example_1d, manufactured_case


@functools.lru_cache(maxsize=None)
def system_1d(eps: float, N: int):
    problem = example_1d(eps)
    mesh = build_shishkin_1d(eps, N, problem.c_lower)
    A, f = assemble_upwind_1d(mesh, problem, eps)
    return problem, mesh, A, f


@functools.lru_cache(maxsize=None)
def system_2d(layer_case: LayerCase, eps: float, N: int):
    mc = manufactured_case(layer_case, eps)
    pr = mc.problem
    mesh = build_shishkin_2d(eps, N, layer_case, pr.c1_lower, pr.c2_lower)
    part = partition_regions(mesh)
    A, b = assemble_upwind_2d(mesh, pr, eps, part)
    return mc, mesh, part, A, b


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(params=list(LayerCase), ids=lambda c: c.value)
def layer_case(request):
    return request.param
