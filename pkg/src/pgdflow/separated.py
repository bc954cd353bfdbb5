"""Affine (separable) representation of parametric data and trapezoidal
quadrature over the one-dimensional parametric interval."""

import numpy as np

from .fv import Field


class ParametricGrid:
    """Uniform collocation nodes over [mu_min, mu_max] with trapezoid weights."""

    def __init__(self, mu_min, mu_max, n_intervals=40):
        if not mu_max > mu_min:
            raise ValueError(f"empty parametric interval [{mu_min}, {mu_max}]")
        if n_intervals < 1:
            raise ValueError("need at least one subinterval")
        self.mu_min = float(mu_min)
        self.mu_max = float(mu_max)
        self.n_nodes = int(n_intervals) + 1
        self.nodes = np.linspace(mu_min, mu_max, self.n_nodes)
        h = (mu_max - mu_min) / n_intervals
        self.weights = np.full(self.n_nodes, h)
        self.weights[[0, -1]] = 0.5 * h

    @property
    def length(self):
        return self.mu_max - self.mu_min

    def contains(self, mu):
        return self.mu_min <= mu <= self.mu_max

    def __eq__(self, other):
        return (isinstance(other, ParametricGrid)
                and self.n_nodes == other.n_nodes
                and self.mu_min == other.mu_min
                and self.mu_max == other.mu_max)


def parametric_integral(grid, values):
    """Trapezoidal integral of nodal values over the parametric interval."""
    values = np.asarray(values)
    if values.shape[-1] != grid.n_nodes:
        raise ValueError(f"expected {grid.n_nodes} nodal values, got {values.shape}")
    return values @ grid.weights


class ParametricFunction:
    """Nodal values of a scalar function over the parametric grid."""

    __slots__ = ("grid", "values")

    def __init__(self, grid, values):
        values = np.asarray(values, dtype=float)
        if values.shape != (grid.n_nodes,):
            raise ValueError(f"expected {grid.n_nodes} nodal values, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("non-finite nodal values")
        self.grid = grid
        self.values = values

    @classmethod
    def constant(cls, grid, value=1.0):
        return cls(grid, np.full(grid.n_nodes, float(value)))

    @classmethod
    def from_callable(cls, grid, fn):
        return cls(grid, np.array([fn(mu) for mu in grid.nodes]))

    def norm(self):
        """L2 norm over the parametric interval (trapezoid)."""
        return float(np.sqrt(parametric_integral(self.grid, self.values ** 2)))

    def interpolate(self, mu):
        """Piecewise-linear value at mu; no extrapolation outside the grid."""
        if not self.grid.contains(mu):
            raise ValueError(f"mu={mu} outside [{self.grid.mu_min}, {self.grid.mu_max}]")
        return float(np.interp(mu, self.grid.nodes, self.values))

    def copy(self):
        return ParametricFunction(self.grid, self.values.copy())


class SeparableData:
    """Sum of (parametric function, spatial field) products sharing one grid
    and one mesh: data(x, mu) = sum_i psi_i(mu) D_i(x)."""

    def __init__(self, terms):
        if not terms:
            raise ValueError("separable data needs at least one term")
        self.terms = list(terms)
        grid = self.terms[0][0].grid
        mesh = self.terms[0][1].mesh
        for psi, d in self.terms:
            if psi.grid != grid or d.mesh is not mesh:
                raise ValueError("separable terms must share grid and mesh")
        self.grid = grid
        self.mesh = mesh

    def __len__(self):
        return len(self.terms)

    def _combine(self, coefficients):
        cells = sum(c * d.data for c, (_, d) in zip(coefficients, self.terms))
        if all(d.boundary is not None for _, d in self.terms):
            bnd = sum(c * d.boundary for c, (_, d) in zip(coefficients, self.terms))
        else:
            bnd = None
        return Field(self.mesh, cells, bnd)

    def at_node(self, node):
        if not 0 <= node < self.grid.n_nodes:
            raise IndexError(f"node {node} outside grid of {self.grid.n_nodes} nodes")
        return self._combine([psi.values[node] for psi, _ in self.terms])

    def at_mu(self, mu):
        return self._combine([psi.interpolate(mu) for psi, _ in self.terms])


class SeparableScalar(SeparableData):
    """Separable scalar coefficient, e.g. viscosity nu(x, mu)."""


class SeparableVector(SeparableData):
    """Separable 2-vector data: sources and frozen convective fields."""


def evaluate_separable(data, node):
    """Field value of separable data at a parametric grid node."""
    return data.at_node(node)
