import numpy as np
import pytest

from pgdflow.fv import Field
from pgdflow.mesh import build_cartesian
from pgdflow.separated import (
    ParametricFunction, ParametricGrid, SeparableScalar, evaluate_separable,
    parametric_integral,
)


def test_weights_sum_to_interval_length():
    grid = ParametricGrid(5e-3, 1e-2, 17)
    assert grid.weights.sum() == pytest.approx(5e-3)
    assert np.all(np.diff(grid.nodes) > 0)
    assert np.all(grid.weights > 0)


def test_trapezoid_exact_for_linear():
    for n in (1, 4, 40):
        grid = ParametricGrid(0.0, 1.0, n)
        assert parametric_integral(grid, grid.nodes) == pytest.approx(0.5)


def test_trapezoid_constant_gives_length():
    grid = ParametricGrid(5e-3, 1e-2, 10)
    assert parametric_integral(grid, np.ones(grid.n_nodes)) == pytest.approx(5e-3)


def test_trapezoid_quadratic_oracle():
    grid = ParametricGrid(0.0, 1.0, 40)
    val = parametric_integral(grid, grid.nodes ** 2)
    assert abs(val - 1.0 / 3.0) < 1e-3


def test_integral_linearity():
    grid = ParametricGrid(0.0, 2.0, 13)
    rng = np.random.default_rng(0)
    f, g = rng.normal(size=grid.n_nodes), rng.normal(size=grid.n_nodes)
    lhs = parametric_integral(grid, 3.0 * f + g)
    rhs = 3.0 * parametric_integral(grid, f) + parametric_integral(grid, g)
    assert lhs == pytest.approx(rhs)


def test_parametric_function_norm_and_interp():
    grid = ParametricGrid(0.0, 1.0, 10)
    phi = ParametricFunction.constant(grid, 2.0)
    assert phi.norm() == pytest.approx(2.0)
    assert phi.interpolate(0.55) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        phi.interpolate(1.5)


def test_evaluate_separable_single_constant_term():
    mesh = build_cartesian(4, 4, (0.0, 0.0), (1.0, 1.0))
    grid = ParametricGrid(0.0, 1.0, 4)
    nu = SeparableScalar([(ParametricFunction.constant(grid),
                           Field.constant(mesh, 0.01))])
    f = evaluate_separable(nu, 2)
    assert np.allclose(f.data, 0.01)


def test_evaluate_separable_identity_parametrisation():
    mesh = build_cartesian(3, 3, (0.0, 0.0), (1.0, 1.0))
    grid = ParametricGrid(5e-3, 1e-2, 2)  # nodes 5e-3, 7.5e-3, 1e-2
    nu = SeparableScalar([(ParametricFunction(grid, grid.nodes),
                           Field.constant(mesh, 1.0))])
    assert np.allclose(evaluate_separable(nu, 1).data, 7.5e-3)


def test_evaluate_separable_additivity():
    mesh = build_cartesian(3, 3, (0.0, 0.0), (1.0, 1.0))
    grid = ParametricGrid(0.0, 1.0, 3)
    rng = np.random.default_rng(1)
    terms = [(ParametricFunction(grid, rng.normal(size=grid.n_nodes)),
              Field(mesh, rng.normal(size=mesh.n_cells),
                    rng.normal(size=mesh.n_boundary)))
             for _ in range(3)]
    combined = SeparableScalar(terms)
    parts = [SeparableScalar([t]) for t in terms]
    total = sum(p.at_node(2).data for p in parts)
    assert np.allclose(combined.at_node(2).data, total)


def test_mismatched_grid_rejected():
    mesh = build_cartesian(3, 3, (0.0, 0.0), (1.0, 1.0))
    g1, g2 = ParametricGrid(0.0, 1.0, 3), ParametricGrid(0.0, 1.0, 4)
    with pytest.raises(ValueError):
        SeparableScalar([
            (ParametricFunction.constant(g1), Field.constant(mesh, 1.0)),
            (ParametricFunction.constant(g2), Field.constant(mesh, 1.0)),
        ])


def test_out_of_range_node_rejected():
    mesh = build_cartesian(3, 3, (0.0, 0.0), (1.0, 1.0))
    grid = ParametricGrid(0.0, 1.0, 3)
    nu = SeparableScalar([(ParametricFunction.constant(grid),
                           Field.constant(mesh, 1.0))])
    with pytest.raises(IndexError):
        nu.at_node(99)
