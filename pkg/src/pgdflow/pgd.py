"""Greedy separated-representation engine.

Each mode is sigma_u * f_u(x) * phi(mu) for velocity and sigma_p * f_p(x) *
phi(mu) for pressure, with one shared parametric function per mode.  Modes are
computed one at a time by an alternating scheme: freeze phi and solve a spatial
flow problem for the increment of (f_u, f_p) with the black-box SIMPLE engine,
then freeze the spatial functions and update phi by pointwise collocation.
All right-hand sides are evaluated in separated form, so the cost per
iteration is a fixed number of discrete-operator sweeps per mode pair.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from .fv import (
    Field, convect, divergence, face_flux, gradient, l2_norm, laplacian,
)
from .separated import ParametricFunction, parametric_integral
from .simple import SpatialProblem, apply_pressure_boundary, simple_solve

log = logging.getLogger(__name__)


class EnrichmentError(RuntimeError):
    pass


class CollocationError(RuntimeError):
    def __init__(self, message, node):
        super().__init__(message)
        self.node = node


@dataclass
class Mode:
    """One separable term.  flux stores the conservative face fluxes of f_u as
    solved by the flow engine; keeping them (rather than re-interpolating)
    makes the separated residuals see exactly the discretisation the solver
    converged, Rhie-Chow correction included."""
    f_u: Field
    f_p: Field
    phi: ParametricFunction
    sigma_u: float = 1.0
    sigma_p: float = 1.0
    flux: np.ndarray | None = None
    origin: str = "computed"
    label: str = ""

    def phi_at(self, mu):
        return self.phi.interpolate(mu)


@dataclass
class PgdExpansion:
    mesh: object
    grid: object
    modes: list = field(default_factory=list)
    case: dict = field(default_factory=dict)
    status: str = "empty"
    history: list = field(default_factory=list)

    @property
    def computed_modes(self):
        return [m for m in self.modes if m.origin == "computed"]

    @property
    def bc_modes(self):
        return [m for m in self.modes if m.origin == "boundary-condition"]


@dataclass
class AdsSettings:
    """Greedy and alternating-direction tolerances.

    tolerance applies to the selected outer stopping criterion; the
    alternating loop stops when the increment monitors fall below
    eta_amplitude and the residual monitors below eta_residual_factor times
    their first-iteration values, or after max_alternating iterations.
    """
    tolerance: float = 1e-3
    stopping: str = "combined"  # or "first-amplitude", "amplitude-sum"
    max_modes: int = 20
    max_alternating: int = 20
    eta_amplitude: float = 1e-3
    eta_residual_factor: float = 1e-3
    denominator_guard: float = 1e-12
    collocation_damping: float = 0.05

    def __post_init__(self):
        if self.stopping not in ("combined", "first-amplitude", "amplitude-sum"):
            raise ValueError(f"unknown stopping criterion '{self.stopping}'")
        for name in ("tolerance", "eta_amplitude", "eta_residual_factor"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        if self.max_modes < 1 or self.max_alternating < 1:
            raise ValueError("iteration limits must be at least 1")


@dataclass
class AdsState:
    f_u: Field
    f_p: Field
    phi: ParametricFunction
    flux: np.ndarray | None = None
    sigma_u: float = 1.0
    sigma_p: float = 1.0
    sigma_phi: float = 1.0
    prev_solve: object = None  # warm start for the next increment solve
    eps: dict = field(default_factory=dict)
    typ: dict = field(default_factory=dict)
    k: int = 0

    def as_mode(self):
        return Mode(self.f_u, self.f_p, self.phi, self.sigma_u, self.sigma_p,
                    flux=self.flux)


# -- boundary-value conventions ----------------------------------------------------

def apply_mode_boundary(f_u, f_p, bc):
    """Computed-mode closures: homogeneous velocity on Dirichlet patches,
    extrapolated at outlets; wall-extrapolated pressure, zero at outlets."""
    dm, om = bc.dirichlet_mask, bc.outlet_mask
    f_u.boundary[dm] = 0.0
    f_u.boundary[om] = f_u.data[bc.mesh.b_owner[om]]
    apply_pressure_boundary(f_p, bc)


# -- parametric-side coefficients ---------------------------------------------------

def spatial_coefficients(phi_n, phi_modes, psi, grid):
    """Integrals over the parametric interval feeding the spatial problem:
    alpha1 per mode (convection weights), alpha2 (viscosity weight) and
    alpha3 (pressure weight, equal to 1 for a normalised phi_n)."""
    w2 = phi_n.values ** 2
    alpha1 = np.array([parametric_integral(grid, w2 * pm.values)
                       for pm in phi_modes])
    alpha2 = parametric_integral(grid, w2 * np.asarray(psi))
    alpha3 = parametric_integral(grid, w2)
    return alpha1, float(alpha2), float(alpha3)


def _residual_weights(phi_n, phis, grid, viscosity, source, convection):
    """All parametric integrals of the separated residual: alpha4 per source
    term, alpha5 per mode pair (or per mode and frozen-convection term),
    alpha6 per mode and viscosity term, alpha7 per mode."""
    n = len(phis)
    pn = phi_n.values
    phi_vals = np.array([p.values for p in phis])  # (n, nodes)
    w = {}
    w["alpha7"] = np.array([parametric_integral(grid, pn * pv)
                            for pv in phi_vals]) if n else np.zeros(0)
    w["alpha6"] = np.array(
        [[parametric_integral(grid, pn * pv * psi.values)
          for psi, _ in viscosity.terms] for pv in phi_vals]).reshape(n, -1)
    if source is not None:
        w["alpha4"] = np.array([parametric_integral(grid, pn * eta.values)
                                for eta, _ in source.terms])
    if convection == "self":
        w["alpha5"] = np.array(
            [[parametric_integral(grid, pn * pm * pq) for pq in phi_vals]
             for pm in phi_vals]).reshape(n, n)
    else:
        w["alpha5"] = np.array(
            [[parametric_integral(grid, pn * pm * theta.values)
              for theta, _ in convection.terms] for pm in phi_vals]
        ).reshape(n, -1)
    return w


# -- separated spatial residual ------------------------------------------------------

def _mode_flux(mode):
    """Conservative stored fluxes when available, interpolated otherwise."""
    return mode.flux if mode.flux is not None else face_flux(mode.f_u)


def spatial_residual(modes, phi_n, case, grid=None):
    """Separated evaluation of the momentum and continuity residuals projected
    on phi_n, as per-cell densities.  `modes` must already include the current
    predictor as its last entry."""
    mesh = case.mesh
    grid = grid or case.grid
    phis = [m.phi for m in modes]
    w = _residual_weights(phi_n, phis, grid, case.viscosity, case.source,
                          case.convection)
    r_u = np.zeros((mesh.n_cells, 2))
    r_p = np.zeros(mesh.n_cells)
    fluxes = [_mode_flux(m) for m in modes]
    if case.convection != "self":
        conv_fluxes = [face_flux(g) for _, g in case.convection.terms]

    for i, m in enumerate(modes):
        su = m.sigma_u
        # convection: sum_q alpha5[m,q] div(sigma_m f_m x sigma_q f_q)
        if case.convection == "self":
            combo = sum(w["alpha5"][i, q] * modes[q].sigma_u * fluxes[q]
                        for q in range(len(modes)))
        else:
            combo = sum(w["alpha5"][i, c] * conv_fluxes[c]
                        for c in range(len(case.convection.terms)))
        r_u -= convect(combo, m.f_u) * su
        # diffusion: + sum_i div(D_i grad(alpha6 sigma_m f_m))
        for ci, (_, d_i) in enumerate(case.viscosity.terms):
            r_u += w["alpha6"][i, ci] * su * laplacian(d_i, m.f_u)
        # pressure: - grad(alpha7 sigma_m f_pm)
        r_u -= w["alpha7"][i] * m.sigma_p * gradient(m.f_p)
        # continuity: - div(alpha7 sigma_m f_m)
        r_p -= w["alpha7"][i] * su * divergence(fluxes[i], mesh)

    if case.source is not None:
        for j, (_, s_j) in enumerate(case.source.terms):
            r_u += w["alpha4"][j] * s_j.data
    return Field(mesh, r_u), Field(mesh, r_p)


def direct_residual_at_node(modes, case, node, grid=None):
    """Brute-force residual densities at one parametric node, assembling the
    fully summed fields and fluxes first; the oracle for the separated path."""
    mesh = case.mesh
    grid = grid or case.grid
    u = Field.zeros(mesh, vector=True)
    p = Field.zeros(mesh)
    flux = np.zeros(mesh.n_faces)
    for m in modes:
        c = m.phi.values[node]
        u.data += m.sigma_u * c * m.f_u.data
        u.boundary += m.sigma_u * c * m.f_u.boundary
        flux += m.sigma_u * c * _mode_flux(m)
        p.data += m.sigma_p * c * m.f_p.data
        p.boundary += m.sigma_p * c * m.f_p.boundary
    if case.convection == "self":
        conv_flux = flux
    else:
        conv_flux = face_flux(case.convection.at_node(node))
    res_u = -convect(conv_flux, u)
    for psi, d_i in case.viscosity.terms:
        res_u += psi.values[node] * laplacian(d_i, u)
    res_u -= gradient(p)
    if case.source is not None:
        for eta, s_j in case.source.terms:
            res_u += eta.values[node] * s_j.data
    res_p = -divergence(flux, mesh)
    return res_u, res_p


def direct_spatial_residual(modes, phi_n, case, grid=None):
    """Trapezoid-weighted projection of the per-node direct residuals on
    phi_n; equals spatial_residual up to round-off."""
    mesh = case.mesh
    grid = grid or case.grid
    r_u = np.zeros((mesh.n_cells, 2))
    r_p = np.zeros(mesh.n_cells)
    for j in range(grid.n_nodes):
        wj = grid.weights[j] * phi_n.values[j]
        res_u, res_p = direct_residual_at_node(modes, case, j, grid)
        r_u += wj * res_u
        r_p += wj * res_p
    return Field(mesh, r_u), Field(mesh, r_p)


# -- parametric iteration -----------------------------------------------------------

def parametric_coefficients(mode_n, modes, case):
    """Spatial integrals feeding the parametric collocation equation.  The
    test pair is the current predictor's (sigma_u f_u, sigma_p f_p); sums over
    `modes` must already include that predictor."""
    mesh = case.mesh
    V = mesh.cell_volume

    def vdot(a, b):
        return float(np.sum(a * b) * V)

    f_u_n, f_p_n = mode_n.f_u, mode_n.f_p
    sigma_u, sigma_p = mode_n.sigma_u, mode_n.sigma_p
    un = sigma_u * f_u_n.data
    pn = sigma_p * f_p_n.data
    flux_n = _mode_flux(mode_n) * sigma_u
    mode_fluxes = [_mode_flux(m) * m.sigma_u for m in modes]
    if case.convection != "self":
        conv_fluxes = [face_flux(g) for _, g in case.convection.terms]
    out = {}
    # left-hand side weights
    if case.convection == "self":
        out["a1"] = np.array(
            [vdot(un, convect(mode_fluxes[i], f_u_n) * sigma_u)
             + vdot(un, convect(flux_n, m.f_u) * m.sigma_u)
             for i, m in enumerate(modes)])
    else:
        out["b_den"] = np.array(
            [vdot(un, convect(cf, f_u_n) * sigma_u) for cf in conv_fluxes])
    out["a2"] = np.array([vdot(un, laplacian(d_i, f_u_n) * sigma_u)
                          for _, d_i in case.viscosity.terms])
    out["a3"] = (vdot(un, gradient(
        Field(mesh, sigma_p * f_p_n.data, sigma_p * f_p_n.boundary)))
        + vdot(pn, divergence(flux_n, mesh)))
    # residual weights
    if case.source is not None:
        out["a4"] = np.array([vdot(un, s_j.data) for _, s_j in case.source.terms])
    if case.convection == "self":
        out["a5"] = np.array(
            [[vdot(un, convect(mode_fluxes[q], m.f_u) * m.sigma_u)
              for q in range(len(modes))] for m in modes])
    else:
        out["a5"] = np.array(
            [[vdot(un, convect(cf, m.f_u) * m.sigma_u)
              for cf in conv_fluxes] for m in modes])
    out["a6"] = np.array([[vdot(un, laplacian(d_i, m.f_u) * m.sigma_u)
                           for _, d_i in case.viscosity.terms] for m in modes])
    out["a7"] = np.array(
        [vdot(un, gradient(Field(mesh, m.sigma_p * m.f_p.data,
                                 m.sigma_p * m.f_p.boundary)))
         for m in modes])
    out["a8"] = np.array(
        [vdot(pn, divergence(mode_fluxes[i], mesh))
         for i in range(len(modes))])
    return out


def parametric_rhs(coeffs, modes, case):
    """Nodal values of the parametric residual r_u + r_p."""
    grid = case.grid
    r = np.zeros(grid.n_nodes)
    if case.source is not None and "a4" in coeffs:
        for j, (eta, _) in enumerate(case.source.terms):
            r += coeffs["a4"][j] * eta.values
    for i, m in enumerate(modes):
        term = np.zeros(grid.n_nodes)
        if case.convection == "self":
            for q, mq in enumerate(modes):
                term -= coeffs["a5"][i, q] * mq.phi.values
        else:
            for c, (theta, _) in enumerate(case.convection.terms):
                term -= coeffs["a5"][i, c] * theta.values
        for ci, (psi, _) in enumerate(case.viscosity.terms):
            term += coeffs["a6"][i, ci] * psi.values
        term -= coeffs["a7"][i]
        r += term * m.phi.values
        r -= coeffs["a8"][i] * m.phi.values
    return r


def parametric_denominator(coeffs, modes, case):
    grid = case.grid
    den = np.full(grid.n_nodes, coeffs["a3"])
    if case.convection == "self":
        for i, m in enumerate(modes):
            den += coeffs["a1"][i] * m.phi.values
    else:
        for c, (theta, _) in enumerate(case.convection.terms):
            den += coeffs["b_den"][c] * theta.values
    for ci, (psi, _) in enumerate(case.viscosity.terms):
        den -= coeffs["a2"][ci] * psi.values
    return den


def parametric_iteration(coeffs, modes, case, guard=1e-12, damping=0.0):
    """Pointwise collocation solve for the parametric increment.

    The nodewise denominator can pass through zero when the discrete
    convection projection fights the viscous one (coarse meshes, strong
    through-flow); damping > 0 switches to the Tikhonov-regularised division
    den*r/(den^2 + (damping*max|den|)^2), which matches the plain division
    away from those nodes and stays bounded at them."""
    den = parametric_denominator(coeffs, modes, case)
    rhs = parametric_rhs(coeffs, modes, case)
    scale = np.abs(den).max()
    if scale == 0.0 or np.any(np.abs(den) < guard * scale) and damping == 0.0:
        node = int(np.argmin(np.abs(den)))
        raise CollocationError(
            f"collocation denominator below guard at node {node}", node)
    if damping > 0.0:
        eps = damping * scale
        return ParametricFunction(case.grid, den * rhs / (den * den + eps * eps))
    return ParametricFunction(case.grid, rhs / den)


# -- normalisation ---------------------------------------------------------------

def normalize_and_update(ads, delta_u, delta_p, delta_phi, bc,
                         delta_flux=None):
    """Absorb the increments: amplitudes pick up the norms, stored functions
    return to unit L2 norm, monitors are refreshed.  Returns False when an
    update degenerates to zero."""
    if delta_u is not None:
        new_u = Field(ads.f_u.mesh, ads.sigma_u * ads.f_u.data + delta_u.data,
                      ads.sigma_u * ads.f_u.boundary + delta_u.boundary)
        new_p = Field(ads.f_p.mesh, ads.sigma_p * ads.f_p.data + delta_p.data,
                      ads.sigma_p * ads.f_p.boundary + delta_p.boundary)
        su, sp = l2_norm(new_u), l2_norm(new_p)
        if su == 0.0 or sp == 0.0:
            return False
        ads.eps["u"] = l2_norm(delta_u) / su
        ads.eps["p"] = l2_norm(delta_p) / sp
        ads.f_u = Field(new_u.mesh, new_u.data / su, new_u.boundary / su)
        ads.f_p = Field(new_p.mesh, new_p.data / sp, new_p.boundary / sp)
        if delta_flux is not None:
            base = ads.flux if ads.flux is not None else 0.0
            ads.flux = (ads.sigma_u * base + delta_flux) / su
        apply_mode_boundary(ads.f_u, ads.f_p, bc)
        ads.sigma_u, ads.sigma_p = su, sp
    if delta_phi is not None:
        new_phi = ads.phi.values + delta_phi.values
        s_phi = ParametricFunction(ads.phi.grid, new_phi).norm()
        if s_phi == 0.0:
            return False
        ads.eps["phi"] = delta_phi.norm() / s_phi
        ads.phi = ParametricFunction(ads.phi.grid, new_phi / s_phi)
        ads.sigma_phi = s_phi
        # keep the represented mode sigma*f*phi invariant under rescaling
        ads.sigma_u *= s_phi
        ads.sigma_p *= s_phi
    return True


def relative_amplitude(expansion):
    """Combined velocity-pressure relative amplitude of the newest computed
    mode: sqrt((su_n/sum su)^2 + (sp_n/sum sp)^2)."""
    computed = expansion.computed_modes
    if not computed:
        raise ValueError("no computed modes")
    su = np.array([m.sigma_u for m in computed])
    sp = np.array([m.sigma_p for m in computed])
    return float(np.hypot(su[-1] / su.sum(), sp[-1] / sp.sum()))


# -- boundary-condition modes --------------------------------------------------------

def compute_bc_modes(case, progress=None):
    """Full-order solves carrying the inhomogeneous Dirichlet data, one per
    recipe, so every later increment solves with homogeneous conditions."""
    modes = []
    for recipe in case.bc_modes:
        mu = getattr(recipe, "mu", None)
        nu_field = case.viscosity.at_mu(mu) if mu is not None else \
            case.viscosity.at_node(case.grid.n_nodes - 1)
        problem = SpatialProblem(case.mesh, recipe.bc, nu_field,
                                 frozen_convection=recipe.frozen_convection)
        state = simple_solve(problem, case.settings)
        if not state.converged:
            raise EnrichmentError(
                f"full-order solve for boundary mode '{recipe.label}' did not "
                f"converge ({state.iterations} iterations)")
        modes.append(Mode(f_u=state.u, f_p=state.p, phi=recipe.phi.copy(),
                          flux=state.fluxes, origin="boundary-condition",
                          label=recipe.label))
        if progress:
            progress({"event": "bc-mode", "label": recipe.label,
                      "iterations": state.iterations})
    return modes


# -- alternating-direction mode computation -------------------------------------------

def _init_ads(case, expansion):
    # spatial predictor: direction of the last mode, homogenised boundary, but
    # with negligible amplitude so the first residual is that of the expansion
    # alone (a full-amplitude clone would dominate the first deflation solve)
    last = expansion.modes[-1]
    f_u = last.f_u.copy()
    f_p = last.f_p.copy()
    flux = None if last.flux is None else last.flux.copy()
    nu, np_ = l2_norm(f_u), l2_norm(f_p)
    f_u.data /= nu or 1.0
    f_u.boundary /= nu or 1.0
    if flux is not None:
        flux /= nu or 1.0
    f_p.data /= np_ or 1.0
    f_p.boundary /= np_ or 1.0
    apply_mode_boundary(f_u, f_p, case.bc_homogeneous)
    phi = ParametricFunction.constant(case.grid, 1.0)
    phi = ParametricFunction(case.grid, phi.values / phi.norm())
    return AdsState(f_u=f_u, f_p=f_p, phi=phi, flux=flux,
                    sigma_u=1e-8, sigma_p=1e-8)


def spatial_iteration(ads, expansion, case, settings):
    """One spatial half-iteration: build the frozen-convection problem with the
    separated residual right-hand side and solve it with homogeneous Dirichlet
    data; returns the velocity, pressure and flux increments."""
    mesh = case.mesh
    modes = expansion.modes + [ads.as_mode()]
    phis = [m.phi for m in modes]
    psi = (case.viscosity.terms[0][0].values if len(case.viscosity) == 1
           else np.zeros(case.grid.n_nodes))
    alpha1, _, alpha3 = spatial_coefficients(ads.phi, phis, psi, case.grid)
    w2 = ads.phi.values ** 2
    d_eff = None
    for psi_i, d_i in case.viscosity.terms:
        a2_i = parametric_integral(case.grid, w2 * psi_i.values)
        d_eff = (a2_i * d_i.data if d_eff is None
                 else d_eff + a2_i * d_i.data)
    diffusivity = Field(mesh, d_eff, d_eff[mesh.b_owner])

    conv = Field.zeros(mesh, vector=True)
    conv_flux = np.zeros(mesh.n_faces)
    if case.convection == "self":
        for a1_m, m in zip(alpha1, modes):
            conv.data += a1_m * m.sigma_u * m.f_u.data
            conv.boundary += a1_m * m.sigma_u * m.f_u.boundary
            conv_flux += a1_m * m.sigma_u * _mode_flux(m)
    else:
        for theta, g in case.convection.terms:
            beta = parametric_integral(case.grid, w2 * theta.values)
            conv.data += beta * g.data
            conv.boundary += beta * g.boundary
        conv_flux = face_flux(conv)

    r_u, r_p = spatial_residual(modes, ads.phi, case)
    # the transposed convection of the increment is handled explicitly inside
    # the flow solver, lagged by one of its outer iterations
    cross = conv if case.convection == "self" else None
    problem = SpatialProblem(mesh, case.bc_homogeneous, diffusivity,
                             frozen_convection=conv,
                             frozen_convection_flux=conv_flux,
                             pressure_scale=alpha3, momentum_rhs=r_u,
                             continuity_rhs=Field(mesh, r_p.data),
                             cross_convected=cross)
    # warm start from the previous increment: the alternating iterations
    # converge to similar spatial corrections
    state = simple_solve(problem, settings, init=ads.prev_solve)
    if not state.converged:
        log.warning("spatial increment solve stopped at %d iterations "
                    "(momentum %.2e, continuity %.2e)", state.iterations,
                    max(state.residuals[-1]["momentum_x"],
                        state.residuals[-1]["momentum_y"]),
                    state.residuals[-1]["continuity"])
    return state, (l2_norm(r_u), l2_norm(r_p))


def compute_mode(case, expansion, ads_settings, solver_settings, progress=None):
    """Alternating spatial/parametric iterations for one new mode."""
    ads = _init_ads(case, expansion)
    st = ads_settings
    for k in range(st.max_alternating):
        ads.k = k
        state, (res_u, res_p) = spatial_iteration(ads, expansion, case,
                                                  solver_settings)
        ads.prev_solve = state
        if not normalize_and_update(ads, state.u, state.p, None,
                                    case.bc_homogeneous,
                                    delta_flux=state.fluxes):
            return None, "degenerate"
        modes = expansion.modes + [ads.as_mode()]
        coeffs = parametric_coefficients(ads.as_mode(), modes, case)
        delta_phi = parametric_iteration(coeffs, modes, case,
                                         guard=st.denominator_guard,
                                         damping=st.collocation_damping)
        res_phi = float(np.sqrt(parametric_integral(
            case.grid, parametric_rhs(coeffs, modes, case) ** 2)))
        if not normalize_and_update(ads, None, None, delta_phi,
                                    case.bc_homogeneous):
            return None, "degenerate"
        ads.eps.update({"r_u": res_u, "r_p": res_p, "r_phi": res_phi})
        if k == 0:
            ads.typ = {"r_u": res_u, "r_p": res_p, "r_phi": res_phi}
        amp_ok = all(ads.eps.get(key, 1.0) <= st.eta_amplitude
                     for key in ("u", "p", "phi"))
        res_ok = all(ads.eps[key] <= st.eta_residual_factor
                     * max(ads.typ[key], 1e-300)
                     for key in ("r_u", "r_p", "r_phi"))
        if progress:
            progress({"event": "ads-iteration", "k": k, **ads.eps})
        if amp_ok and res_ok:
            break
    mode = Mode(f_u=ads.f_u, f_p=ads.f_p, phi=ads.phi, sigma_u=ads.sigma_u,
                sigma_p=ads.sigma_p, flux=ads.flux, origin="computed",
                label=f"mode_{len(expansion.computed_modes) + 1}")
    return mode, ads.k + 1


def _stop_metric(expansion, settings):
    computed = expansion.computed_modes
    if settings.stopping == "combined":
        return relative_amplitude(expansion)
    su = np.array([m.sigma_u for m in computed])
    sp = np.array([m.sigma_p for m in computed])
    if settings.stopping == "first-amplitude":
        return max(su[-1] / su[0], sp[-1] / sp[0])
    return max(su[-1] / su.sum(), sp[-1] / sp.sum())


def enrich(case, settings=None, solver_settings=None, progress=None):
    """Greedy enrichment: boundary-condition modes first, then computed modes
    until the selected amplitude criterion meets the tolerance."""
    settings = settings or AdsSettings()
    solver_settings = solver_settings or case.settings
    expansion = PgdExpansion(mesh=case.mesh, grid=case.grid,
                             case=dict(case.metadata, name=case.name))
    expansion.modes.extend(compute_bc_modes(case, progress))
    expansion.status = "bc-only"

    for n in range(1, settings.max_modes + 1):
        mode, iterations = compute_mode(case, expansion, settings,
                                        solver_settings, progress)
        if mode is None:
            expansion.status = "degenerate"
            log.warning("mode %d degenerated to zero amplitude; stopping", n)
            break
        expansion.modes.append(mode)
        metric = _stop_metric(expansion, settings)
        expansion.history.append(
            {"mode": n, "sigma_u": mode.sigma_u, "sigma_p": mode.sigma_p,
             "criterion": metric, "iterations": iterations})
        if progress:
            progress({"event": "mode", "index": n, "sigma_u": mode.sigma_u,
                      "sigma_p": mode.sigma_p, "criterion": metric,
                      "iterations": iterations})
        if metric <= settings.tolerance:
            expansion.status = "converged"
            break
    else:
        expansion.status = "max_modes"
    return expansion


# -- online phase -------------------------------------------------------------------

def evaluate_online(expansion, mu):
    """Particularise the generalised solution at one parameter value by pure
    interpolation of the parametric functions; no solves involved."""
    grid = expansion.grid
    if not grid.contains(mu):
        raise ValueError(f"mu={mu} outside [{grid.mu_min}, {grid.mu_max}]")
    mesh = expansion.mesh
    u = Field.zeros(mesh, vector=True)
    p = Field.zeros(mesh)
    for m in expansion.modes:
        c_u = m.sigma_u * m.phi_at(mu)
        c_p = m.sigma_p * m.phi_at(mu)
        u.data += c_u * m.f_u.data
        u.boundary += c_u * m.f_u.boundary
        p.data += c_p * m.f_p.data
        p.boundary += c_p * m.f_p.boundary
    return u, p


def global_residual_norm(expansion, case):
    """L2(space x parameter) norm of the full equations' residual of the
    current expansion, assembled directly node by node."""
    total_u = 0.0
    total_p = 0.0
    mesh = case.mesh
    for j in range(case.grid.n_nodes):
        res_u, res_p = direct_residual_at_node(expansion.modes, case, j)
        wj = case.grid.weights[j]
        total_u += wj * float(np.sum(res_u ** 2)) * mesh.cell_volume
        total_p += wj * float(np.sum(res_p ** 2)) * mesh.cell_volume
    return np.sqrt(total_u), np.sqrt(total_p)
