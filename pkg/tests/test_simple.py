import numpy as np
import pytest

from pgdflow.fv import Field, face_flux, l2_norm
from pgdflow.mesh import BoundarySpec, build_cartesian
from pgdflow.simple import (
    FlowState, SimpleSettings, SpatialProblem, cell_divergence_imbalance,
    initial_state, momentum_predictor, pressure_poisson, simple_solve,
    velocity_correction,
)

WALLS = {"left": "wall", "right": "wall", "bottom": "wall", "top": "wall"}


def cavity(n=16, lid_speed=None):
    layout = dict(WALLS)
    layout["top"] = "lid"
    mesh = build_cartesian(n, n, (0.0, 0.0), (1.0, 1.0), layout)
    values = {}
    if lid_speed is not None:
        values["lid"] = (lid_speed, 0.0)
    bc = BoundarySpec(mesh, {"wall": "dirichlet", "lid": "dirichlet"}, values)
    return mesh, bc


def test_zero_problem_converges_immediately():
    mesh, bc = cavity(8)
    problem = SpatialProblem(mesh, bc, Field.constant(mesh, 1.0))
    state = simple_solve(problem, SimpleSettings(max_outer=5))
    assert state.converged
    assert state.iterations == 1
    assert np.abs(state.u.data).max() == 0.0
    assert np.abs(state.p.data).max() == 0.0


def test_uniform_channel_linear_pressure():
    # driven u=(1,0) with outlet on the right and body force (1,0): the balance
    # is u=(1,0), p = x - 1, up to the first-order zero-gradient pressure
    # closure at the inlet cells
    layout = {"left": "inlet", "right": "outlet", "bottom": "wall", "top": "wall"}
    mesh = build_cartesian(20, 6, (0.0, 0.0), (1.0, 0.3), layout)
    bc = BoundarySpec(mesh, {"inlet": "dirichlet", "wall": "dirichlet",
                             "outlet": "outlet"},
                      {"inlet": (1.0, 0.0), "wall": (1.0, 0.0)})
    src = Field(mesh, np.tile([1.0, 0.0], (mesh.n_cells, 1)))
    problem = SpatialProblem(mesh, bc, Field.constant(mesh, 0.05), source=src)
    state = simple_solve(problem, SimpleSettings(tol_momentum=1e-10,
                                                 tol_continuity=1e-10,
                                                 max_outer=400))
    assert state.converged
    assert np.allclose(state.u.data[:, 0], 1.0, atol=1e-2)
    assert np.allclose(state.u.data[:, 1], 0.0, atol=1e-2)
    x = mesh.cell_centroids[:, 0]
    assert np.allclose(state.p.data, x - 1.0, atol=3.0 * mesh.dx)
    # away from the inlet closure the profile is linear almost exactly
    away = x > 0.3
    assert np.allclose(state.p.data[away], x[away] - 1.0, atol=1e-4)


def test_velocity_correction_constant_pressure_noop():
    mesh, bc = cavity(8)
    rng = np.random.default_rng(0)
    u_star = Field(mesh, rng.normal(size=(mesh.n_cells, 2)),
                   np.zeros((mesh.n_boundary, 2)))
    p_prime = Field.constant(mesh, 4.0)
    u = velocity_correction(u_star, p_prime, np.ones(mesh.n_cells), bc)
    assert np.allclose(u.data, u_star.data, atol=1e-13)


def test_correction_reduces_divergence():
    mesh, bc = cavity(12, lid_speed=1.0)
    problem = SpatialProblem(mesh, bc, Field.constant(mesh, 0.1))
    settings = SimpleSettings(max_outer=1)
    state = initial_state(problem)
    u_star, a_diag = momentum_predictor(state, problem, settings)
    from pgdflow.fv import face_flux
    from pgdflow.simple import _scatter_oriented
    div_before = np.abs(_scatter_oriented(mesh, face_flux(u_star))).max()
    out = simple_solve(problem, SimpleSettings(max_outer=1))
    div_after = np.abs(cell_divergence_imbalance(out, mesh)).max()
    assert div_after < div_before


def test_divergence_free_u_star_gives_constant_pressure():
    mesh, bc = cavity(10)
    problem = SpatialProblem(mesh, bc, Field.constant(mesh, 1.0))
    u_star = Field.zeros(mesh, vector=True)
    p = pressure_poisson(u_star, np.ones(mesh.n_cells), problem,
                         SimpleSettings())
    assert np.abs(p.data).max() < 1e-12


def test_enclosed_pressure_pinned_at_reference_cell():
    mesh, bc = cavity(16, lid_speed=1.0)
    problem = SpatialProblem(mesh, bc, Field.constant(mesh, 0.05))
    state = simple_solve(problem, SimpleSettings(max_outer=600))
    assert state.converged
    assert abs(state.p.data[0]) < 1e-10


def test_lid_cavity_vortex_and_mass_balance():
    # Re = 1000 on a modest mesh: primary vortex and tight continuity; the
    # central target scheme needs the deferred (upwind-implicit) treatment at
    # this cell Peclet number
    mesh, bc = cavity(32, lid_speed=1.0)
    problem = SpatialProblem(mesh, bc, Field.constant(mesh, 1e-3))
    state = simple_solve(problem, SimpleSettings(max_outer=3000,
                                                 deferred_central=True))
    assert state.converged
    cx = np.isclose(mesh.cell_centroids[:, 0], 0.5 + mesh.dx / 2, atol=mesh.dx)
    y = mesh.cell_centroids[:, 1]
    near_top = cx & (y > 0.85) & (y < 0.97)
    near_bottom = cx & (y < 0.2)
    assert state.u.data[near_top, 0].mean() > 0.05
    assert state.u.data[near_bottom, 0].mean() < 0.0
    imbalance = np.abs(cell_divergence_imbalance(state, mesh)).max()
    ref_flux = np.abs(state.fluxes).sum() / mesh.n_cells
    assert imbalance <= 1e-8 * max(ref_flux, 1.0)
    # closed domain: net flow through every patch sums to zero
    assert abs(state.fluxes[mesh.n_interior:].sum()) < 1e-12


def test_converged_state_is_fixed_point():
    mesh, bc = cavity(16, lid_speed=1.0)
    problem = SpatialProblem(mesh, bc, Field.constant(mesh, 0.05))
    settings = SimpleSettings(tol_momentum=1e-8, tol_continuity=1e-8,
                              max_outer=2000)
    state = simple_solve(problem, settings)
    assert state.converged
    u_before = state.u.data.copy()
    p_before = state.p.data.copy()
    again = simple_solve(problem, SimpleSettings(max_outer=1), init=state)
    rel_u = (np.abs(again.u.data - u_before).max()
             / max(np.abs(u_before).max(), 1e-300))
    assert rel_u < 1e-6
    assert np.abs(again.p.data - p_before).max() < 1e-6 * np.abs(p_before).max()


def test_frozen_convection_linearity():
    # frozen conveying field: doubling diffusivity and Dirichlet data doubles u
    mesh, bc1 = cavity(12, lid_speed=1.0)
    conv = Field.zeros(mesh, vector=True)
    settings = SimpleSettings(tol_momentum=1e-10, tol_continuity=1e-10,
                              max_outer=800)
    p1 = SpatialProblem(mesh, bc1, Field.constant(mesh, 0.1),
                        frozen_convection=conv)
    s1 = simple_solve(p1, settings)
    _, bc2 = cavity(12, lid_speed=2.0)
    p2 = SpatialProblem(mesh, bc2, Field.constant(mesh, 0.2),
                        frozen_convection=conv)
    s2 = simple_solve(p2, settings)
    assert s1.converged and s2.converged
    scale = np.abs(s1.u.data).max()
    assert np.allclose(s2.u.data, 2.0 * s1.u.data, atol=1e-5 * scale)


def test_continuity_rhs_acts_as_divergence_target():
    # prescribe a nonzero mass source on an outlet-equipped domain and check
    # the converged per-cell divergence hits it
    layout = {"left": "inlet", "right": "outlet", "bottom": "wall", "top": "wall"}
    mesh = build_cartesian(12, 6, (0.0, 0.0), (1.0, 0.5), layout)
    bc = BoundarySpec(mesh, {"inlet": "dirichlet", "wall": "dirichlet",
                             "outlet": "outlet"}, {})
    g = Field(mesh, np.full(mesh.n_cells, 0.4))
    problem = SpatialProblem(mesh, bc, Field.constant(mesh, 0.1),
                             continuity_rhs=g)
    state = simple_solve(problem, SimpleSettings(tol_momentum=1e-9,
                                                 tol_continuity=1e-9,
                                                 max_outer=500))
    assert state.converged
    imbalance = cell_divergence_imbalance(state, mesh, problem)
    assert np.abs(imbalance).max() < 1e-8
    # all injected volume leaves through the outlet
    outflow = state.fluxes[mesh.n_interior:].sum()
    assert outflow == pytest.approx(0.4 * mesh.cell_volume * mesh.n_cells,
                                    rel=1e-6)


def test_pressure_scale_recovers_unscaled_pressure():
    mesh, bc = cavity(10, lid_speed=1.0)
    settings = SimpleSettings(tol_momentum=1e-9, tol_continuity=1e-9,
                              max_outer=800)
    base = SpatialProblem(mesh, bc, Field.constant(mesh, 0.1))
    scaled = SpatialProblem(mesh, bc, Field.constant(mesh, 0.1),
                            pressure_scale=2.5)
    s0 = simple_solve(base, settings)
    s1 = simple_solve(scaled, settings)
    # same momentum balance: grad(2.5 dp) = grad(p)  =>  dp = p / 2.5
    assert np.allclose(s1.p.data, s0.p.data / 2.5, atol=1e-6)
    assert np.allclose(s1.u.data, s0.u.data, atol=1e-7)


def test_nonconvergence_reported_not_raised():
    mesh, bc = cavity(16, lid_speed=1.0)
    problem = SpatialProblem(mesh, bc, Field.constant(mesh, 1e-3))
    state = simple_solve(problem, SimpleSettings(max_outer=3))
    assert not state.converged
    assert len(state.residuals) == 3
