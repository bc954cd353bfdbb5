"""Cell-centred finite-volume primitives: fields, Gauss-theorem operators,
central/blended convection, two-point diffusion, Rhie-Chow face fluxes and
sparse iterative solvers."""

import logging

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

log = logging.getLogger(__name__)


class Field:
    """Per-cell scalar or 2-vector values with optional per-boundary-face values.

    Boundary values encode the boundary treatment algebraically: Dirichlet
    faces store the imposed datum, zero-gradient faces store a copy of the
    owner-cell value, fixed-pressure outlets store the fixed value.  The
    discrete operators below read only (cells, boundary), which keeps every
    operator linear in the field.
    """

    __slots__ = ("mesh", "data", "boundary")

    def __init__(self, mesh, data, boundary=None):
        self.mesh = mesh
        self.data = np.asarray(data, dtype=float)
        self.boundary = None if boundary is None else np.asarray(boundary, dtype=float)

    @classmethod
    def zeros(cls, mesh, vector=False, with_boundary=True):
        shape = (mesh.n_cells, 2) if vector else (mesh.n_cells,)
        bshape = (mesh.n_boundary, 2) if vector else (mesh.n_boundary,)
        return cls(mesh, np.zeros(shape), np.zeros(bshape) if with_boundary else None)

    @classmethod
    def constant(cls, mesh, value):
        return cls(mesh, np.full(mesh.n_cells, float(value)),
                   np.full(mesh.n_boundary, float(value)))

    @property
    def is_vector(self):
        return self.data.ndim == 2

    def copy(self):
        return Field(self.mesh, self.data.copy(),
                     None if self.boundary is None else self.boundary.copy())

    def require_boundary(self):
        if self.boundary is None:
            raise ValueError("field has no boundary values")
        return self.boundary


def l2_norm(f, mesh=None):
    """sqrt(sum |f|^2 V) over cells; vector fields sum over components."""
    mesh = mesh or f.mesh
    return float(np.sqrt(np.sum(np.asarray(f.data) ** 2) * mesh.cell_volume))


def extrapolate_boundary(field):
    """Owner-cell copy on every boundary face (zero-gradient closure)."""
    return field.data[field.mesh.b_owner].copy()


# -- face interpolation and Gauss-theorem operators ---------------------------

def face_values(f):
    """Linear face interpolation: midpoint average inside, stored values on
    the boundary."""
    mesh = f.mesh
    shape = (mesh.n_faces, 2) if f.is_vector else (mesh.n_faces,)
    vals = np.empty(shape)
    vals[:mesh.n_interior] = 0.5 * (f.data[mesh.i_owner] + f.data[mesh.i_nbr])
    vals[mesh.n_interior:] = f.require_boundary()
    return vals


def face_flux(u):
    """Volumetric flux area*(n . u_face) per face, oriented owner->neighbour
    (outward on the boundary)."""
    mesh = u.mesh
    uf = face_values(u)
    return mesh.f_area * np.einsum("fk,fk->f", uf, mesh.f_normal)


def _scatter_oriented(mesh, contrib):
    """Sum oriented per-face contributions into cells (owner +, neighbour -)."""
    shape = (mesh.n_cells,) + contrib.shape[1:]
    out = np.zeros(shape)
    np.add.at(out, mesh.i_owner, contrib[:mesh.n_interior])
    np.add.at(out, mesh.i_nbr, -contrib[:mesh.n_interior])
    np.add.at(out, mesh.b_owner, contrib[mesh.n_interior:])
    return out


def divergence(flux, mesh):
    """Per-cell (1/V) sum of oriented face fluxes."""
    return _scatter_oriented(mesh, flux) / mesh.cell_volume


def convect(flux, b, blend=0.0):
    """Discrete div(b (x) conveying field) given the conveying field's oriented
    face fluxes: (1/V) sum_f s * flux_f * b_face.  Central face values, blended
    towards upwind for blend > 0 (blend=1 is full upwind).  Boundary faces
    carry the stored boundary value, except faces marked outflow on the mesh,
    which carry the owner-cell value."""
    mesh = b.mesh
    bf = face_values(b)
    if blend > 0.0:
        take_owner = flux[:mesh.n_interior] >= 0.0
        if b.is_vector:
            take_owner = take_owner[:, None]
        up = np.where(take_owner, b.data[mesh.i_owner], b.data[mesh.i_nbr])
        bf[:mesh.n_interior] = ((1.0 - blend) * bf[:mesh.n_interior]
                                + blend * up)
    out = mesh.outflow_faces
    if out.any():
        bf[mesh.n_interior:][out] = b.data[mesh.b_owner[out]]
    contrib = flux[:, None] * bf if b.is_vector else flux * bf
    return _scatter_oriented(mesh, contrib) / mesh.cell_volume


def face_conductance(diff, mesh):
    """D_f * area / delta per face: arithmetic-mean face diffusivity inside,
    owner value on the boundary."""
    ni = mesh.n_interior
    d_face = np.empty(mesh.n_faces)
    d_face[:ni] = 0.5 * (diff.data[mesh.i_owner] + diff.data[mesh.i_nbr])
    d_face[ni:] = diff.data[mesh.b_owner]
    return d_face * mesh.f_area / mesh.f_delta


def laplacian(diff, b):
    """Discrete div(D grad b): (1/V) sum_f D_f area (db/dn), two-point face
    gradients, one-sided against the stored boundary values."""
    mesh = b.mesh
    ni = mesh.n_interior
    g = face_conductance(diff, mesh)
    jump = np.empty((mesh.n_faces, 2) if b.is_vector else (mesh.n_faces,))
    jump[:ni] = b.data[mesh.i_nbr] - b.data[mesh.i_owner]
    jump[ni:] = b.require_boundary() - b.data[mesh.b_owner]
    contrib = g[:, None] * jump if b.is_vector else g * jump
    # owner receives g*(b_N - b_P); the neighbour sees the reversed jump, i.e.
    # -contrib, which is exactly the oriented owner-plus/neighbour-minus scatter
    return _scatter_oriented(mesh, contrib) / mesh.cell_volume


def gradient(p):
    """Gauss cell gradient of a scalar field using stored boundary values."""
    mesh = p.mesh
    pf = face_values(p)
    contrib = (pf * mesh.f_area)[:, None] * mesh.f_normal
    return _scatter_oriented(mesh, contrib) / mesh.cell_volume


def gauss_gradient(f, boundary_values=None):
    """Per cell (1/V) sum(face value * area * normal); boundary_values override
    the field's stored boundary values."""
    if boundary_values is not None:
        f = Field(f.mesh, f.data, boundary_values)
    f.require_boundary()
    return Field(f.mesh, gradient(f))


# -- implicit momentum assembly ------------------------------------------------

class SparseSystem:
    """Square sparse system over cell unknowns with a per-row diagonal view."""

    def __init__(self, matrix, rhs):
        self.matrix = matrix
        self.rhs = rhs

    @property
    def diagonal(self):
        return self.matrix.diagonal()


class MomentumAssembly:
    """Convection-diffusion matrix shared by both velocity components plus the
    right-hand-side pieces (boundary data, relaxation, pseudo-time, deferred
    correction).  The matrix is state-independent for a frozen conveying field,
    so rhs_for(old) lets callers reuse it across outer iterations."""

    def __init__(self, matrix, rhs_const, a_diag, old_coeff, deferred):
        self.matrix = matrix
        self.rhs_const = rhs_const  # (n_cells, 2): Dirichlet data terms
        self.a_diag = a_diag        # relaxed diagonal; feeds Rhie-Chow and the PPE
        self._old_coeff = old_coeff
        self._deferred = deferred   # (conv, blend, volume) or None

    def rhs_for(self, old):
        rhs = self.rhs_const + self._old_coeff[:, None] * old.data
        if self._deferred is not None:
            conv, blend, volume = self._deferred
            rhs -= volume * (convect(conv, old, blend=blend)
                             - convect(conv, old, blend=1.0))
        return rhs

    @property
    def rhs(self):
        raise AttributeError("use rhs_for(old); the rhs depends on the lagged state")

    def system(self, component, old):
        return SparseSystem(self.matrix, self.rhs_for(old)[:, component])


def assemble_convection_diffusion(conv, diffusivity, bc, relax=None, old=None,
                                  dt=None, blend=0.0, deferred_central=False):
    """Implicit momentum operator V*[convect(conv, u) - laplacian(D, u)] with
    Dirichlet data lumped into the rhs, zero-gradient outlets, and diagonal
    augmentation from under-relaxation and/or a pseudo-time step.

    conv: oriented face fluxes of the lagged or frozen conveying field.
    With deferred_central=True the implicit convection is full upwind and the
    (target - upwind) difference evaluated at `old` moves to the rhs, so the
    converged outer iteration still satisfies the blended target scheme.
    """
    mesh = bc.mesh
    if dt is not None and dt <= 0.0:
        raise ValueError(f"pseudo-time step must be positive, got {dt}")
    ni = mesh.n_interior
    io, inb = mesh.i_owner, mesh.i_nbr
    F = conv[:ni]
    g_imp = 1.0 if deferred_central else blend

    w_owner = (1.0 - g_imp) * 0.5 + g_imp * (F >= 0.0)
    w_nbr = 1.0 - w_owner
    cond = face_conductance(diffusivity, mesh)

    a_pp = F * w_owner + cond[:ni]
    a_pn = F * w_nbr - cond[:ni]
    a_nn = -(F * w_nbr) + cond[:ni]
    a_np = -(F * w_owner) - cond[:ni]

    rhs_const = np.zeros((mesh.n_cells, 2))
    Fb = conv[ni:]
    bo = mesh.b_owner
    bdiag = np.zeros(mesh.n_cells)
    dm, om = bc.dirichlet_mask, bc.outlet_mask
    gb = cond[ni:]
    # Dirichlet faces carry the datum convectively, except the mesh's marked
    # outflow faces which carry the owner value (implicit); diffusion is
    # one-sided against the datum either way
    carry_owner = mesh.outflow_faces & dm
    carry_datum = ~mesh.outflow_faces & dm
    np.add.at(bdiag, bo[carry_owner], Fb[carry_owner] + gb[carry_owner])
    np.add.at(rhs_const, bo[carry_owner],
              gb[carry_owner, None] * bc.u_values[carry_owner])
    np.add.at(bdiag, bo[carry_datum], gb[carry_datum])
    np.add.at(rhs_const, bo[carry_datum],
              (gb[carry_datum] - Fb[carry_datum])[:, None] * bc.u_values[carry_datum])
    # outlet: zero-gradient, convective face value = owner value
    np.add.at(bdiag, bo[om], Fb[om])

    diag = bdiag.copy()
    np.add.at(diag, io, a_pp)
    np.add.at(diag, inb, a_nn)

    old_coeff = np.zeros(mesh.n_cells)
    if dt is not None:
        diag = diag + mesh.cell_volume / dt
        old_coeff += mesh.cell_volume / dt

    a_diag = diag
    if relax is not None:
        if not 0.0 < relax <= 1.0:
            raise ValueError(f"relaxation factor must be in (0, 1], got {relax}")
        a_diag = diag / relax
        old_coeff += a_diag - diag

    deferred = None
    if deferred_central and blend < 1.0:
        deferred = (conv, blend, mesh.cell_volume)

    rows = np.concatenate([np.arange(mesh.n_cells), io, inb])
    cols = np.concatenate([np.arange(mesh.n_cells), inb, io])
    vals = np.concatenate([a_diag, a_pn, a_np])
    A = sp.csr_matrix(sp.coo_matrix((vals, (rows, cols)),
                                    shape=(mesh.n_cells, mesh.n_cells)))
    asm = MomentumAssembly(A, rhs_const, a_diag, old_coeff, deferred)
    if old is not None:
        asm.initial_rhs = asm.rhs_for(old)
    return asm


# -- Rhie-Chow momentum interpolation -------------------------------------------

def rhie_chow_flux(u, p, momentum_diag, bc):
    """Face fluxes from linear velocity interpolation plus the pressure-gradient
    correction that suppresses odd-even decoupling on the collocated grid.

    Dirichlet faces keep the imposed flux, outlets the extrapolated one."""
    mesh = u.mesh
    momentum_diag = np.asarray(momentum_diag, dtype=float)
    if np.any(momentum_diag == 0.0):
        raise ValueError("zero momentum diagonal in Rhie-Chow interpolation")
    flux = face_flux(u)
    ni = mesh.n_interior
    io, inb = mesh.i_owner, mesh.i_nbr
    d_cell = mesh.cell_volume / momentum_diag
    d_face = 0.5 * (d_cell[io] + d_cell[inb])
    c_f = d_face * mesh.f_area[:ni] / mesh.f_delta[:ni]
    gp = gradient(p)
    gp_face_n = 0.5 * np.einsum("fk,fk->f", gp[io] + gp[inb], mesh.f_normal[:ni])
    flux[:ni] -= c_f * (p.data[inb] - p.data[io] - mesh.f_delta[:ni] * gp_face_n)
    return flux


# -- sparse iterative solvers ----------------------------------------------------

class SolverBreakdownError(RuntimeError):
    def __init__(self, message, history):
        super().__init__(message)
        self.history = history


def make_jacobi(diagonal):
    """Diagonal preconditioner; adequate for the relaxation-dominated momentum
    systems."""
    inv = 1.0 / np.asarray(diagonal, dtype=float)
    n = len(inv)
    return spla.LinearOperator((n, n), lambda v: inv * v)


_METHODS = {"cg": spla.cg, "bicgstab": spla.bicgstab, "minres": spla.minres,
            "gmres": spla.gmres}


def _run_krylov(method, A, r0, rel_tol, max_iter, M, callback):
    solver = _METHODS[method]
    kwargs = {"M": M, "callback": callback}
    if method != "minres":
        kwargs["atol"] = 0.0
    if method == "gmres":
        restart = min(50, A.shape[0])
        kwargs.update(restart=restart, callback_type="x",
                      maxiter=max(1, max_iter // restart))
        if callback is None:
            kwargs.pop("callback_type")
    else:
        kwargs["maxiter"] = max_iter
    return solver(A, r0, rtol=rel_tol, **kwargs)


def solve_sparse(system, x0=None, rel_tol=1e-8, max_iter=1000, method="bicgstab",
                 preconditioner=None, history=None):
    """Solve to ||r|| <= rel_tol * ||b - A x0||; returns the solution vector.

    A breakdown or stall of the primary Krylov method falls back to restarted
    GMRES once; a second failure raises SolverBreakdownError carrying the
    residual history.  Reaching max_iter with a merely loose residual is
    reported via logging (callers inspect the residual).  Pass a list as
    `history` to record per-iteration residual norms.
    """
    if not 0.0 < rel_tol < 1.0:
        raise ValueError(f"rel_tol must be in (0, 1), got {rel_tol}")
    A, b = system.matrix, system.rhs
    x0 = np.zeros_like(b, dtype=float) if x0 is None else np.asarray(x0, dtype=float)
    r0 = b - A @ x0
    r0_norm = float(np.linalg.norm(r0))
    if r0_norm == 0.0 or not np.isfinite(r0_norm):
        if not np.isfinite(r0_norm):
            raise SolverBreakdownError("non-finite initial residual", [r0_norm])
        return x0.copy()

    callback = None
    if history is not None:
        history.append(r0_norm)

        def callback(xk):
            history.append(float(np.linalg.norm(r0 - A @ xk)))

    d, info = _run_krylov(method, A, r0, rel_tol, max_iter,
                          preconditioner, callback)
    broke = info < 0 or not np.all(np.isfinite(d))
    if not broke and info > 0:
        broke = float(np.linalg.norm(r0 - A @ d)) > 1e3 * rel_tol * r0_norm
    if broke and method != "gmres":
        log.debug("%s failed (info=%d), retrying with gmres", method, info)
        d, info = _run_krylov("gmres", A, r0, rel_tol, max_iter,
                              preconditioner, callback)
        broke = info < 0 or not np.all(np.isfinite(d))
    if broke:
        raise SolverBreakdownError(
            f"{method} breakdown (info={info})", list(history or [r0_norm]))
    if info > 0:
        res = float(np.linalg.norm(r0 - A @ d)) / r0_norm
        log.warning("solver reached max_iter=%d, relative residual %.3e",
                    max_iter, res)
    return x0 + d
