import numpy as np
import pytest
import scipy.sparse as sp

from pgdflow.fv import (
    Field, MomentumAssembly, SolverBreakdownError, SparseSystem,
    assemble_convection_diffusion, convect, divergence, face_flux,
    gauss_gradient, l2_norm, laplacian, rhie_chow_flux, solve_sparse,
)
from pgdflow.mesh import BoundarySpec, build_cartesian

CAVITY = {"left": "wall", "right": "wall", "bottom": "wall", "top": "wall"}


def cavity_mesh(n=8, origin=(0.0, 0.0), extent=(1.0, 1.0)):
    return build_cartesian(n, n, origin, extent, CAVITY)


def sample_field(mesh, fn):
    cells = np.array([fn(x, y) for x, y in mesh.cell_centroids])
    bnd = np.array([fn(x, y) for x, y in mesh.f_centroid[mesh.n_interior:]])
    return Field(mesh, cells, bnd)


def stream_function_flux(mesh, psi):
    """Exactly divergence-free face fluxes from a node-based stream function."""
    flux = np.empty(mesh.n_faces)
    for f in range(mesh.n_faces):
        cx, cy = mesh.f_centroid[f]
        nx_, ny_ = mesh.f_normal[f]
        a = mesh.f_area[f]
        # face endpoints, ordered so that (end - start) is the +90 deg rotation
        # of the normal: flux = psi(end) - psi(start)
        tx, ty = -ny_, nx_
        start = (cx - 0.5 * a * tx, cy - 0.5 * a * ty)
        end = (cx + 0.5 * a * tx, cy + 0.5 * a * ty)
        flux[f] = psi(*end) - psi(*start)
    return flux


# -- norms and gradients -------------------------------------------------------


def test_l2_norm_constant():
    mesh = cavity_mesh(5)
    assert l2_norm(Field.constant(mesh, 1.0)) == pytest.approx(1.0)


def test_l2_norm_on_2x2_domain():
    mesh = build_cartesian(10, 10, (-1.0, -1.0), (2.0, 2.0), CAVITY)
    assert l2_norm(Field.constant(mesh, 2.0)) == pytest.approx(4.0)


def test_l2_norm_linear_field_converges():
    exact = 1.0 / np.sqrt(3.0)
    errs = []
    for n in (8, 16, 32):
        mesh = cavity_mesh(n)
        f = sample_field(mesh, lambda x, y: x)
        errs.append(abs(l2_norm(f) - exact))
    assert errs[0] < 1e-2
    assert errs[2] < errs[1] < errs[0]


def test_gradient_of_constant_is_zero():
    mesh = cavity_mesh(6)
    g = gauss_gradient(Field.constant(mesh, 3.7))
    assert np.abs(g.data).max() < 1e-13


def test_gradient_exact_for_linear_field():
    mesh = build_cartesian(7, 9, (-0.3, 0.2), (1.1, 2.0), CAVITY)
    f = sample_field(mesh, lambda x, y: 2.0 * x - 0.5 * y + 1.0)
    g = gauss_gradient(f)
    assert np.allclose(g.data[:, 0], 2.0, atol=1e-12)
    assert np.allclose(g.data[:, 1], -0.5, atol=1e-12)


def test_gradient_requires_boundary_values():
    mesh = cavity_mesh(4)
    f = Field(mesh, np.zeros(mesh.n_cells))
    with pytest.raises(ValueError):
        gauss_gradient(f)


def test_gradient_second_order_on_smooth_field():
    # analytic oracle: grad p for p = 0.5 (1 - exp(2 l x)), l = -0.39324; the
    # central interior stencil is second order (boundary strip is one-sided)
    lam = -0.39324
    errs = []
    for n in (25, 50, 100):
        mesh = build_cartesian(n, n, (-1.0, -1.0), (2.0, 2.0), CAVITY)
        p = sample_field(mesh, lambda x, y: 0.5 * (1.0 - np.exp(2 * lam * x)))
        g = gauss_gradient(p)
        gx_exact = -lam * np.exp(2 * lam * mesh.cell_centroids[:, 0])
        interior = np.ones(mesh.n_cells, dtype=bool)
        interior[mesh.b_owner] = False
        err = np.sqrt(np.sum((g.data[interior, 0] - gx_exact[interior]) ** 2)
                      * mesh.cell_volume)
        errs.append(err)
    order = np.log2(errs[1] / errs[2])
    assert 1.7 < order < 2.3


def test_operators_are_linear():
    rng = np.random.default_rng(7)
    mesh = cavity_mesh(6)
    D = Field.constant(mesh, 0.8)
    flux = rng.normal(size=mesh.n_faces)

    def rand_field():
        return Field(mesh, rng.normal(size=mesh.n_cells),
                     rng.normal(size=mesh.n_boundary))

    f, g = rand_field(), rand_field()
    a = 2.3
    comb = Field(mesh, a * f.data + g.data, a * f.boundary + g.boundary)
    for op in (lambda z: convect(flux, z), lambda z: laplacian(D, z),
               lambda z: gauss_gradient(z).data):
        assert np.allclose(op(comb), a * np.asarray(op(f)) + np.asarray(op(g)),
                           atol=1e-12)


# -- convection / diffusion assembly --------------------------------------------


def test_pure_diffusion_is_five_point_laplacian():
    mesh = cavity_mesh(4)
    bc = BoundarySpec(mesh, {"wall": "dirichlet"})
    asm = assemble_convection_diffusion(np.zeros(mesh.n_faces),
                                        Field.constant(mesh, 1.0), bc)
    A = asm.matrix.toarray()
    # interior cell: diag 4*(area/delta), offdiag -1 each; h = 0.25 so A/d = 1
    i = 1 + 4 * 1  # cell (1,1)
    assert A[i, i] == pytest.approx(4.0)
    row = np.delete(A[i], i)
    assert sorted(row[np.nonzero(row)]) == pytest.approx([-1.0] * 4)
    assert np.allclose(A, A.T)


def test_convection_row_sums_vanish_for_solenoidal_flux():
    mesh = cavity_mesh(6)
    bc = BoundarySpec(mesh, {"wall": "dirichlet"})
    flux = stream_function_flux(mesh, lambda x, y: np.sin(2 * x) * np.cos(3 * y))
    asm = assemble_convection_diffusion(flux, Field.constant(mesh, 0.0), bc)
    # rows of interior cells (no boundary faces) must sum to zero
    sums = np.asarray(asm.matrix.sum(axis=1)).ravel()
    interior_cells = np.ones(mesh.n_cells, dtype=bool)
    interior_cells[mesh.b_owner] = False
    assert np.abs(sums[interior_cells]).max() < 1e-13


def test_upwind_assembly_diagonally_dominant():
    # full upwinding with a conservative (divergence-free) conveying flux gives
    # nonpositive off-diagonals and a weakly dominant diagonal
    mesh = cavity_mesh(5)
    bc = BoundarySpec(mesh, {"wall": "dirichlet"})
    flux = stream_function_flux(
        mesh, lambda x, y: np.sin(np.pi * x) ** 2 * np.sin(np.pi * y) ** 2)
    asm = assemble_convection_diffusion(flux, Field.constant(mesh, 0.1), bc,
                                        blend=1.0)
    A = asm.matrix.tocsr()
    diag = A.diagonal()
    off = A - sp.diags(diag)
    assert off.toarray().max() <= 1e-14
    offsum = np.abs(A).sum(axis=1).A1 - np.abs(diag)
    assert np.all(diag >= offsum - 1e-12)


def test_assembly_matches_explicit_operators():
    # implicit matrix applied to a homogeneous-boundary field equals the
    # explicit convect - laplacian evaluation (discretisation consistency)
    rng = np.random.default_rng(11)
    mesh = cavity_mesh(6)
    bc = BoundarySpec(mesh, {"wall": "dirichlet"})
    flux = rng.normal(size=mesh.n_faces)
    D = Field(mesh, 0.5 + rng.random(mesh.n_cells),
              np.zeros(mesh.n_boundary))
    D.boundary = D.data[mesh.b_owner]
    asm = assemble_convection_diffusion(flux, D, bc)
    u = Field(mesh, rng.normal(size=(mesh.n_cells, 2)),
              np.zeros((mesh.n_boundary, 2)))
    # outlet-free: boundary values zero = Dirichlet homogeneous
    lhs = np.column_stack([asm.matrix @ u.data[:, 0], asm.matrix @ u.data[:, 1]])
    explicit = mesh.cell_volume * (convect(flux, u) - laplacian(D, u))
    assert np.allclose(lhs, explicit, atol=1e-11)


def test_dirichlet_data_enters_rhs():
    mesh = cavity_mesh(4)
    bc = BoundarySpec(mesh, {"wall": "dirichlet"}, {"wall": (1.0, 0.0)})
    asm = assemble_convection_diffusion(np.zeros(mesh.n_faces),
                                        Field.constant(mesh, 1.0), bc)
    assert asm.rhs_const[:, 0].sum() > 0.0
    assert np.allclose(asm.rhs_const[:, 1], 0.0)


def test_nonpositive_dt_rejected():
    mesh = cavity_mesh(4)
    bc = BoundarySpec(mesh, {"wall": "dirichlet"})
    with pytest.raises(ValueError):
        assemble_convection_diffusion(np.zeros(mesh.n_faces),
                                      Field.constant(mesh, 1.0), bc, dt=0.0)


def test_diagonal_grows_as_dt_shrinks():
    mesh = cavity_mesh(4)
    bc = BoundarySpec(mesh, {"wall": "dirichlet"})
    old = Field.zeros(mesh, vector=True)
    a1 = assemble_convection_diffusion(np.zeros(mesh.n_faces),
                                       Field.constant(mesh, 1.0), bc,
                                       old=old, dt=1.0).a_diag
    a2 = assemble_convection_diffusion(np.zeros(mesh.n_faces),
                                       Field.constant(mesh, 1.0), bc,
                                       old=old, dt=0.1).a_diag
    assert np.all(a2 > a1)


# -- Rhie-Chow -------------------------------------------------------------------


def test_rhie_chow_uniform_flow():
    mesh = cavity_mesh(5)
    bc = BoundarySpec(mesh, {"wall": "dirichlet"}, {"wall": (1.0, 0.0)})
    u = Field(mesh, np.tile([1.0, 0.0], (mesh.n_cells, 1)), bc.u_values.copy())
    p = Field.constant(mesh, 2.0)
    flux = rhie_chow_flux(u, p, np.ones(mesh.n_cells), bc)
    expected = mesh.f_area * mesh.f_normal[:, 0]
    assert np.allclose(flux, expected, atol=1e-13)


def test_rhie_chow_damps_checkerboard():
    mesh = cavity_mesh(4)
    bc = BoundarySpec(mesh, {"wall": "dirichlet"}, {"wall": (1.0, 0.0)})
    u = Field(mesh, np.tile([1.0, 0.0], (mesh.n_cells, 1)), bc.u_values.copy())
    i = np.arange(mesh.n_cells) % 4
    j = np.arange(mesh.n_cells) // 4
    checker = ((i + j) % 2).astype(float)
    p = Field(mesh, checker, checker[mesh.b_owner])
    flux = rhie_chow_flux(u, p, np.ones(mesh.n_cells), bc)
    plain = face_flux(u)
    assert np.abs(flux - plain).max() > 1e-3


def test_rhie_chow_rejects_zero_diagonal():
    mesh = cavity_mesh(4)
    bc = BoundarySpec(mesh, {"wall": "dirichlet"})
    u = Field.zeros(mesh, vector=True)
    p = Field.constant(mesh, 0.0)
    with pytest.raises(ValueError):
        rhie_chow_flux(u, p, np.zeros(mesh.n_cells), bc)


# -- sparse solvers ----------------------------------------------------------------


def test_identity_solved_immediately():
    n = 20
    b = np.arange(n, dtype=float)
    sys_ = SparseSystem(sp.identity(n, format="csr"), b)
    x = solve_sparse(sys_, rel_tol=1e-12, method="cg")
    assert np.allclose(x, b)


def test_manufactured_laplacian_solution():
    mesh = cavity_mesh(10)
    bc = BoundarySpec(mesh, {"wall": "dirichlet"})
    asm = assemble_convection_diffusion(np.zeros(mesh.n_faces),
                                        Field.constant(mesh, 1.0), bc)
    rng = np.random.default_rng(5)
    x_star = rng.normal(size=mesh.n_cells)
    sys_ = SparseSystem(asm.matrix, asm.matrix @ x_star)
    x = solve_sparse(sys_, rel_tol=1e-10, max_iter=2000, method="cg")
    assert np.linalg.norm(x - x_star) / np.linalg.norm(x_star) < 1e-8


def test_minres_monotone_residual_on_spd_system():
    mesh = cavity_mesh(8)
    bc = BoundarySpec(mesh, {"wall": "dirichlet"})
    asm = assemble_convection_diffusion(np.zeros(mesh.n_faces),
                                        Field.constant(mesh, 1.0), bc)
    b = np.sin(np.arange(mesh.n_cells, dtype=float))
    hist = []
    solve_sparse(SparseSystem(asm.matrix, b), rel_tol=1e-10, max_iter=500,
                 method="minres", history=hist)
    diffs = np.diff(hist)
    assert np.all(diffs <= 1e-12 * hist[0])


def test_breakdown_raises_with_history():
    n = 4
    A = sp.csr_matrix(np.diag([1.0, 1.0, 1.0, np.nan]))
    with pytest.raises(SolverBreakdownError):
        solve_sparse(SparseSystem(A, np.ones(n)), rel_tol=1e-8, method="cg")


def test_bad_rel_tol_rejected():
    sys_ = SparseSystem(sp.identity(3, format="csr"), np.ones(3))
    with pytest.raises(ValueError):
        solve_sparse(sys_, rel_tol=0.0)


# -- divergence helper ----------------------------------------------------------


def test_divergence_of_stream_function_flux_is_zero():
    mesh = cavity_mesh(7)
    flux = stream_function_flux(mesh, lambda x, y: x * x * y + np.cos(x + 2 * y))
    assert np.abs(divergence(flux, mesh)).max() < 1e-12
