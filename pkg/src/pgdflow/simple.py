"""Steady SIMPLE pressure-velocity coupling on the collocated mesh.

The solver is the black-box full-order engine: it only sees a SpatialProblem
(conveying field, diffusivity, pressure scale, explicit right-hand sides,
boundary spec), so the reduced-order layer can drive it without touching any
internals.  One outer iteration is momentum predictor -> pressure correction
-> velocity/flux correction, with implicit under-relaxation.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.fft import dctn, idctn

from .fv import (
    Field, SparseSystem, _scatter_oriented, assemble_convection_diffusion,
    face_flux, gradient, make_jacobi, solve_sparse,
)

log = logging.getLogger(__name__)


@dataclass
class SpatialProblem:
    """Problem data handed to the SIMPLE engine.

    frozen_convection=None means self-convecting (the conveying field lags one
    outer iteration); otherwise the given field conveys the unknown throughout.
    frozen_convection_flux optionally supplies the conveying face fluxes
    directly (reduced-order callers pass combinations of stored conservative
    fluxes there).  diffusivity arrives pre-scaled.  The momentum equation is
    conv(u) - div(D grad u) + pressure_scale * grad(dp) = source + momentum_rhs
    and continuity  pressure_scale * div(u) = continuity_rhs.
    """
    mesh: object
    bc: object
    diffusivity: Field
    frozen_convection: Field | None = None
    frozen_convection_flux: np.ndarray | None = None
    pressure_scale: float = 1.0
    momentum_rhs: Field | None = None
    continuity_rhs: Field | None = None
    source: Field | None = None
    # explicit transposed-convection coupling: each outer iteration adds
    # -div(cross_convected (x) u) evaluated with the lagged solution fluxes
    cross_convected: Field | None = None

    def __post_init__(self):
        if self.pressure_scale <= 0.0:
            raise ValueError(f"pressure scale must be positive, got {self.pressure_scale}")
        if np.any(self.diffusivity.data < 0.0):
            raise ValueError("negative diffusivity")
        if self.frozen_convection is not None and self.frozen_convection.mesh is not self.mesh:
            raise ValueError("frozen convecting field lives on a different mesh")
        if self.frozen_convection_flux is not None and self.frozen_convection is None:
            raise ValueError("a frozen conveying flux needs its field for deferred "
                             "corrections")


@dataclass
class SimpleSettings:
    alpha_u: float = 0.7
    alpha_p: float = 0.3
    dt: float | None = None
    tol_momentum: float = 1e-6
    tol_continuity: float = 1e-6
    max_outer: int = 2000
    lin_rtol_momentum: float = 1e-8
    lin_rtol_pressure: float = 1e-9
    lin_maxiter: int = 2000
    blend: float = 0.0
    deferred_central: bool = False
    variant: str = "simple"  # or "simplec" (consistent velocity correction)

    def __post_init__(self):
        for name in ("alpha_u", "alpha_p"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise ValueError(f"{name} must be in (0, 1], got {v}")
        for name in ("tol_momentum", "tol_continuity"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        if self.variant not in ("simple", "simplec"):
            raise ValueError(f"unknown variant '{self.variant}'")
        if self.variant == "simplec" and self.alpha_u >= 1.0:
            raise ValueError("simplec needs velocity under-relaxation below 1")


@dataclass
class FlowState:
    u: Field
    p: Field
    fluxes: np.ndarray
    residuals: list = field(default_factory=list)
    converged: bool = False
    iterations: int = 0


def initial_state(problem):
    mesh, bc = problem.mesh, problem.bc
    u = Field.zeros(mesh, vector=True)
    apply_velocity_boundary(u, bc)
    p = Field.zeros(mesh)
    return FlowState(u=u, p=p, fluxes=face_flux(u))


def apply_velocity_boundary(u, bc):
    dm, om = bc.dirichlet_mask, bc.outlet_mask
    u.boundary[dm] = bc.u_values[dm]
    u.boundary[om] = u.data[u.mesh.b_owner[om]]


def apply_pressure_boundary(p, bc):
    dm, om = bc.dirichlet_mask, bc.outlet_mask
    p.boundary[dm] = p.data[p.mesh.b_owner[dm]]
    p.boundary[om] = 0.0


def _momentum_rhs(asm, state, problem):
    """Assembly rhs plus explicit sources and the lagged pressure gradient."""
    mesh = problem.mesh
    rhs = asm.rhs_for(state.u)
    if problem.source is not None:
        rhs += mesh.cell_volume * problem.source.data
    if problem.momentum_rhs is not None:
        rhs += mesh.cell_volume * problem.momentum_rhs.data
    if problem.cross_convected is not None:
        from .fv import convect
        rhs -= mesh.cell_volume * convect(state.fluxes, problem.cross_convected)
    rhs -= mesh.cell_volume * gradient(state.p)
    return rhs


def _norm(v):
    return float(np.linalg.norm(v))


def make_poisson_preconditioner(mesh, d_mean):
    """Exact inverse of the constant-coefficient pure-Neumann pressure operator
    via cosine transforms; spectrally close to the variable-coefficient pinned
    or outlet-closed systems it preconditions.  The zero mode is regularised to
    keep the operator positive definite."""
    nx, ny = mesh.nx, mesh.ny
    cx = d_mean * mesh.dy / mesh.dx
    cy = d_mean * mesh.dx / mesh.dy
    lx = 4.0 * cx * np.sin(np.pi * np.arange(nx) / (2 * nx)) ** 2
    ly = 4.0 * cy * np.sin(np.pi * np.arange(ny) / (2 * ny)) ** 2
    lam = lx[None, :] + ly[:, None]
    lam[0, 0] = cx + cy

    def apply(v):
        coeff = dctn(v.reshape(ny, nx), type=2, norm="ortho")
        coeff /= lam
        return idctn(coeff, type=2, norm="ortho").ravel()

    return spla.LinearOperator((mesh.n_cells, mesh.n_cells), apply)


class _Engine:
    """One solve's worth of cached assemblies and preconditioners."""

    def __init__(self, problem, settings):
        self.problem = problem
        self.settings = settings
        self.mesh = problem.mesh
        self.bc = problem.bc
        if problem.frozen_convection is None:
            self.frozen_flux = None
        elif problem.frozen_convection_flux is not None:
            self.frozen_flux = problem.frozen_convection_flux
        else:
            self.frozen_flux = face_flux(problem.frozen_convection)
        self.mom_asm = None
        self.mom_precond = None
        self.ppe = None
        self.ppe_precond = None
        # continuity target, cell-integrated
        g = (np.zeros(self.mesh.n_cells) if problem.continuity_rhs is None
             else problem.continuity_rhs.data / problem.pressure_scale)
        self.vg = self.mesh.cell_volume * g
        if not self.bc.has_outlet:
            # enclosed domain: remove the incompatible mean so the pinned
            # Neumann pressure problem stays solvable
            self.vg -= self.vg.mean()

    def conv_flux(self, state):
        return self.frozen_flux if self.frozen_flux is not None else state.fluxes

    def momentum(self, state):
        st = self.settings
        if self.mom_asm is None or self.frozen_flux is None:
            self.mom_asm = assemble_convection_diffusion(
                self.conv_flux(state), self.problem.diffusivity, self.bc,
                relax=st.alpha_u, old=state.u, dt=st.dt, blend=st.blend,
                deferred_central=st.deferred_central)
            self.mom_precond = make_jacobi(self.mom_asm.a_diag)
        return self.mom_asm

    def coupling_diag(self, asm):
        """Diagonal defining the pressure-velocity coupling scale V/d: the
        momentum diagonal for SIMPLE, the consistent row sum for SIMPLEC."""
        if self.settings.variant == "simplec":
            rowsum = np.asarray(asm.matrix.sum(axis=1)).ravel()
            return np.maximum(rowsum, 1e-12 * asm.a_diag)
        return asm.a_diag

    def ppe_system(self, d_diag):
        if self.ppe is None or self.frozen_flux is None:
            self.ppe = assemble_pressure_correction(d_diag, self.bc)
            d_mean = self.mesh.cell_volume / float(np.mean(d_diag))
            self.ppe_precond = make_poisson_preconditioner(self.mesh, d_mean)
        return self.ppe


class _PressureCorrection:
    """Pressure-correction matrix plus the face conductances that define the
    exactly matching flux correction."""

    def __init__(self, matrix, c_interior, c_outlet_faces, pinned):
        self.matrix = matrix
        self.c_interior = c_interior
        self.c_outlet_faces = c_outlet_faces  # (boundary offsets, conductances)
        self.pinned = pinned


def assemble_pressure_correction(momentum_diag, bc):
    mesh = bc.mesh
    ni = mesh.n_interior
    d_cell = mesh.cell_volume / np.asarray(momentum_diag, dtype=float)
    io, inb = mesh.i_owner, mesh.i_nbr
    c_f = 0.5 * (d_cell[io] + d_cell[inb]) * mesh.f_area[:ni] / mesh.f_delta[:ni]

    diag = np.zeros(mesh.n_cells)
    np.add.at(diag, io, c_f)
    np.add.at(diag, inb, c_f)
    om = bc.outlet_mask
    out_off = np.flatnonzero(om)
    c_b = (d_cell[mesh.b_owner[out_off]]
           * mesh.f_area[ni + out_off] / mesh.f_delta[ni + out_off])
    np.add.at(diag, mesh.b_owner[out_off], c_b)

    pinned = not bc.has_outlet
    rows = np.concatenate([np.arange(mesh.n_cells), io, inb])
    cols = np.concatenate([np.arange(mesh.n_cells), inb, io])
    vals = np.concatenate([diag, -c_f, -c_f])
    if pinned:
        keep = (rows != 0) & (cols != 0)
        rows, cols, vals = rows[keep], cols[keep], vals[keep]
        rows = np.append(rows, 0)
        cols = np.append(cols, 0)
        vals = np.append(vals, diag[1:].mean() if mesh.n_cells > 1 else 1.0)
    A = sp.csr_matrix(sp.coo_matrix((vals, (rows, cols)),
                                    shape=(mesh.n_cells, mesh.n_cells)))
    return _PressureCorrection(A, c_f, (out_off, c_b), pinned)


def _correct_fluxes(flux_star, p_prime, ppe, mesh):
    flux = flux_star.copy()
    ni = mesh.n_interior
    flux[:ni] -= ppe.c_interior * (p_prime[mesh.i_nbr] - p_prime[mesh.i_owner])
    off, c_b = ppe.c_outlet_faces
    flux[ni + off] -= c_b * (0.0 - p_prime[mesh.b_owner[off]])
    return flux


def _pressure_field(values, bc):
    p = Field(bc.mesh, values, np.empty(bc.mesh.n_boundary))
    apply_pressure_boundary(p, bc)
    return p


# -- spec-facing single steps ---------------------------------------------------

def momentum_predictor(state, problem, settings):
    """Implicit momentum solve; returns the pressure-free intermediate velocity
    (the lagged pressure force is solved with, then stripped again, which keeps
    the solve stable while the returned field carries no pressure contribution)
    and the relaxed momentum diagonal."""
    engine = _Engine(problem, settings)
    hbya, asm, _ = _momentum_step(engine, state)
    return hbya, asm.a_diag


def _momentum_step(engine, state):
    st, problem = engine.settings, engine.problem
    asm = engine.momentum(state)
    rhs = _momentum_rhs(asm, state, problem)
    ax = np.column_stack([asm.matrix @ state.u.data[:, 0],
                          asm.matrix @ state.u.data[:, 1]])
    # one vector equation: normalise both components by the dominant scale so
    # a quiescent component does not stall the convergence check
    scale = max(_norm(rhs[:, 0]), _norm(rhs[:, 1]),
                _norm(ax[:, 0]), _norm(ax[:, 1]), 1e-300)
    res = [_norm(rhs[:, c] - ax[:, c]) / scale for c in (0, 1)]
    u_new = np.empty_like(state.u.data)
    for c in (0, 1):
        u_new[:, c] = solve_sparse(
            SparseSystem(asm.matrix, rhs[:, c]), x0=state.u.data[:, c],
            rel_tol=st.lin_rtol_momentum, max_iter=st.lin_maxiter,
            method="bicgstab", preconditioner=engine.mom_precond)
    # strip the lagged pressure force: hbya = u* + (V/d) grad(p_old), with the
    # same coupling diagonal d that the correction step uses
    d_cell = (engine.mesh.cell_volume / engine.coupling_diag(asm))[:, None]
    hbya = Field(engine.mesh, u_new + d_cell * gradient(state.p),
                 state.u.boundary.copy())
    apply_velocity_boundary(hbya, engine.bc)
    return hbya, asm, res


def pressure_poisson(u_star, momentum_diag, problem, settings, p_old=None):
    """Poisson solve for the full pressure from the intermediate velocity's
    fluxes: homogeneous Neumann on Dirichlet patches, fixed value on outlets,
    reference cell pinned when enclosed."""
    engine = _Engine(problem, settings)
    flux_star = face_flux(u_star)
    p_vals, _, _ = _pressure_step(engine, momentum_diag, flux_star,
                                  p_old.data if p_old is not None else None)
    return _pressure_field(p_vals, problem.bc)


def _pressure_step(engine, a_diag, flux_star, p_warm=None):
    st, mesh = engine.settings, engine.mesh
    ppe = engine.ppe_system(a_diag)
    net = _scatter_oriented(mesh, flux_star)
    rhs = engine.vg - net
    flux_scale = float(np.abs(flux_star).sum()) + 1e-300
    if ppe.pinned:
        rhs = rhs - rhs.mean()
        rhs[0] = 0.0
    # continuity residual: pressure-equation residual at the current pressure
    if p_warm is None:
        cont_res = float(np.abs(rhs).sum()) / flux_scale
    else:
        cont_res = float(np.abs(rhs - ppe.matrix @ p_warm).sum()) / flux_scale
    p_vals = solve_sparse(
        SparseSystem(ppe.matrix, rhs), x0=p_warm,
        rel_tol=st.lin_rtol_pressure, max_iter=st.lin_maxiter, method="cg",
        preconditioner=engine.ppe_precond)
    return p_vals, ppe, cont_res


def velocity_correction(u_star, p, momentum_diag, bc):
    """Project the intermediate velocity: u = u* - (V/aP) grad p."""
    mesh = u_star.mesh
    if p.boundary is None:
        p = _pressure_field(p.data, bc)
    d_cell = mesh.cell_volume / np.asarray(momentum_diag, dtype=float)
    u = Field(mesh, u_star.data - d_cell[:, None] * gradient(p),
              u_star.boundary.copy())
    apply_velocity_boundary(u, bc)
    return u


# -- outer loop -------------------------------------------------------------------

def simple_solve(problem, settings=None, init=None):
    """Iterate momentum predictor -> pressure Poisson -> velocity correction
    until the normalised momentum and continuity residuals drop below
    tolerance.  The corrected face fluxes satisfy continuity exactly each
    iteration; the cell pressure is under-relaxed between iterations.

    Non-convergence within max_outer is reported on the returned state, not
    raised; callers inspect state.converged and the residual history.
    """
    settings = settings or SimpleSettings()
    engine = _Engine(problem, settings)
    state = init if init is not None else initial_state(problem)
    state.converged = False
    state.residuals = []
    state.iterations = 0
    bc, mesh = problem.bc, problem.mesh

    for it in range(1, settings.max_outer + 1):
        hbya, asm, mom_res = _momentum_step(engine, state)
        d_diag = engine.coupling_diag(asm)
        flux_hbya = face_flux(hbya)
        p_vals, ppe, cont_res = _pressure_step(engine, d_diag, flux_hbya,
                                               p_warm=state.p.data)
        p_new = _pressure_field(p_vals, bc)
        state.fluxes = _correct_fluxes(flux_hbya, p_vals, ppe, mesh)
        state.u = velocity_correction(hbya, p_new, d_diag, bc)
        relaxed = state.p.data + settings.alpha_p * (p_vals - state.p.data)
        state.p = _pressure_field(relaxed, bc)
        state.residuals.append(
            {"iteration": it, "momentum_x": mom_res[0], "momentum_y": mom_res[1],
             "continuity": cont_res})
        state.iterations = it
        if (max(mom_res) <= settings.tol_momentum
                and cont_res <= settings.tol_continuity):
            state.converged = True
            break
    else:
        log.warning("SIMPLE not converged after %d outer iterations "
                    "(momentum %.2e/%.2e, continuity %.2e)",
                    settings.max_outer, *mom_res, cont_res)

    if problem.pressure_scale != 1.0:
        state.p = _pressure_field(state.p.data / problem.pressure_scale, bc)
    return state


def cell_divergence_imbalance(state, mesh, problem=None):
    """Per-cell net volumetric flux minus the continuity target (cell-integrated)."""
    net = _scatter_oriented(mesh, state.fluxes)
    if problem is not None and problem.continuity_rhs is not None:
        net = net - mesh.cell_volume * (problem.continuity_rhs.data
                                        / problem.pressure_scale)
    return net
