"""Benchmark case definitions: Kovasznay flow with parametrised viscosity,
lid-driven cavity with parametrised lid velocity, and the flow-control cavity
with parametrised blowing jets."""

import math
from dataclasses import dataclass, field

import numpy as np

from .fv import Field
from .mesh import BoundarySpec, build_cartesian, patch_faces
from .separated import ParametricFunction, ParametricGrid, SeparableScalar, SeparableVector
from .simple import SimpleSettings, SpatialProblem


# -- Kovasznay flow ---------------------------------------------------------------

def kovasznay_lambda(mu):
    """Decay-rate constant of the Kovasznay solution for viscosity nu = mu."""
    if mu <= 0.0:
        raise ValueError(f"viscosity must be positive, got {mu}")
    half = 1.0 / (2.0 * mu)
    return half - math.sqrt(half * half + 4.0 * math.pi ** 2)


def kovasznay_exact(x, y, mu):
    """Exact velocity and kinematic pressure; the pressure constant is left at
    zero here and fixed against the solver's reference cell by callers."""
    lam = kovasznay_lambda(mu)
    ex = np.exp(lam * np.asarray(x))
    u = np.stack([1.0 - ex * np.cos(2.0 * np.pi * np.asarray(y)),
                  lam / (2.0 * np.pi) * ex * np.sin(2.0 * np.pi * np.asarray(y))],
                 axis=-1)
    p = 0.5 * (1.0 - np.exp(2.0 * lam * np.asarray(x)))
    return u, p


def kovasznay_velocity_field(mesh, mu):
    """Exact velocity sampled at cell centroids and boundary face centroids."""
    cx, cy = mesh.cell_centroids[:, 0], mesh.cell_centroids[:, 1]
    bx, by = (mesh.f_centroid[mesh.n_interior:, 0],
              mesh.f_centroid[mesh.n_interior:, 1])
    u_c, _ = kovasznay_exact(cx, cy, mu)
    u_b, _ = kovasznay_exact(bx, by, mu)
    return Field(mesh, u_c, u_b)


def _taylor_term_spatial(mesh, j, order):
    """Spatial factor multiplying lambda^j in the truncated expansion of the
    Kovasznay velocity: powers k = 0..order-1 of (lambda x) in exp(lambda x)."""

    def fn(x, y):
        ux = -x ** j * np.cos(2.0 * np.pi * y) / math.factorial(j)
        if j == 0:
            ux = 1.0 + ux
        if 1 <= j <= order:
            uy = (x ** (j - 1) * np.sin(2.0 * np.pi * y)
                  / (2.0 * np.pi * math.factorial(j - 1)))
        else:
            uy = np.zeros_like(np.asarray(x, dtype=float))
        return np.stack([ux, uy], axis=-1)

    cx, cy = mesh.cell_centroids[:, 0], mesh.cell_centroids[:, 1]
    bx, by = (mesh.f_centroid[mesh.n_interior:, 0],
              mesh.f_centroid[mesh.n_interior:, 1])
    # component x only exists for j <= order-1 (expansion truncates exp there)
    vals = fn(cx, cy)
    bvals = fn(bx, by)
    if j > order - 1:
        vals[:, 0] = 0.0
        bvals[:, 0] = 0.0
    return Field(mesh, vals, bvals)


def taylor_separated_convection(order, grid, mesh):
    """Frozen convective field as a separated sum: spatial monomial-cosine
    factors times nodal powers of lambda(mu), truncating exp(lambda x) after
    `order` terms.  Powers 0..order appear because the transverse component
    carries one extra lambda."""
    if order < 1:
        raise ValueError("need at least one expansion term")
    lam = np.array([kovasznay_lambda(mu) for mu in grid.nodes])
    terms = []
    for j in range(order + 1):
        phi = ParametricFunction(grid, lam ** j)
        terms.append((phi, _taylor_term_spatial(mesh, j, order)))
    return SeparableVector(terms)


# -- boundary profiles ----------------------------------------------------------

def _ramp(x, ramp=0.06):
    """Nonleaky lid profile: 0 -> 1 over [0, ramp], 1, then 1 -> 0 at the end."""
    x = np.asarray(x, dtype=float)
    return np.clip(np.minimum(x / ramp, (1.0 - x) / ramp), 0.0, 1.0)


def lid_profile(x, mu, u_max=400.0):
    """Horizontal lid velocity 0 -> u_max*mu over the corner ramps."""
    return u_max * mu * _ramp(x)


JET_SIZE = 0.12


def jet_profile(wall, y, mu, smooth=False):
    """Jet velocity at height y on the named wall segment, scaled by mu.

    The lower-right jet formula gives -2 at the segment ends and 0 at the
    middle as printed in the reference data; smooth=True selects the
    bump-shaped (1 - cos) variant instead.
    """
    y = np.asarray(y, dtype=float)
    if wall == "jet_right_low":
        inside = (y >= 0.0) & (y <= JET_SIZE)
        c = np.cos(2.0 * np.pi * y / JET_SIZE)
        ux = (-1.0 + c) if smooth else (-1.0 - c)
    elif wall in ("jet_right_high", "jet_left"):
        inside = (y >= 1.0 - JET_SIZE) & (y <= 1.0)
        ux = -1.0 + np.cos(-2.0 * np.pi * (y - (1.0 - JET_SIZE)) / JET_SIZE)
    else:
        raise ValueError(f"unknown jet wall '{wall}'")
    ux = np.where(inside, ux, 0.0)
    return mu * np.stack([ux, np.zeros_like(y)], axis=-1)


def pressure_drop(p, mesh, patch):
    """Area-weighted average of the face pressures on a patch; with the outlet
    pressure pinned at zero this is the pressure drop to the outlet.  Face
    values are taken from the adjacent cells (piecewise-constant fields)."""
    faces = patch_faces(mesh, patch)
    if len(faces) == 0:
        raise ValueError(f"patch '{patch}' has no faces")
    areas = mesh.f_area[faces]
    values = p.data[mesh.f_owner[faces]]
    return float(np.sum(areas * values) / np.sum(areas))


# -- case definitions --------------------------------------------------------------

@dataclass
class BcModeRecipe:
    """One boundary-condition mode: a full-order solve with the given boundary
    data and a prescribed (unnormalised) parametric function.  mu selects the
    parameter value at which viscosity and source data are evaluated."""
    label: str
    bc: BoundarySpec
    phi: ParametricFunction
    frozen_convection: Field | None = None
    mu: float | None = None


@dataclass
class CaseDefinition:
    name: str
    mesh: object
    grid: ParametricGrid
    viscosity: SeparableScalar
    bc_homogeneous: BoundarySpec
    bc_modes: list
    convection: object = "self"          # "self" or a SeparableVector
    source: SeparableVector | None = None
    qoi_patch: str | None = None
    exact: object = None                 # callable (x, y, mu) -> (u, p)
    settings: SimpleSettings = field(default_factory=SimpleSettings)
    metadata: dict = field(default_factory=dict)

    def viscosity_at(self, mu):
        return self.viscosity.at_mu(mu)

    def full_order_problem(self, mu, bc=None):
        """Fresh full-order SpatialProblem at one parameter value."""
        conv = None
        if self.convection != "self":
            conv = self.convection.at_mu(mu)
        return SpatialProblem(self.mesh, bc if bc is not None else self.bc_at(mu),
                              self.viscosity_at(mu), frozen_convection=conv,
                              source=None if self.source is None
                              else self.source.at_mu(mu))

    def bc_at(self, mu):
        """Dirichlet data at one parameter value, superposing the per-mode data
        weighted by the prescribed parametric functions."""
        mesh = self.mesh
        combo = BoundarySpec(mesh, self.bc_homogeneous.kinds)
        for recipe in self.bc_modes:
            combo.u_values = combo.u_values + recipe.phi.interpolate(mu) * recipe.bc.u_values
        return combo


def _walls_layout():
    return {e: "wall" for e in ("left", "right", "bottom", "top")}


def mark_kovasznay_outflow(mesh, mu_ref=1e-2):
    """Flag boundary faces where the Kovasznay conveying field leaves the
    domain; convected values are carried by the owner cell there.  The sign
    pattern is viscosity-independent over the parametric interval."""
    bx, by = (mesh.f_centroid[mesh.n_interior:, 0],
              mesh.f_centroid[mesh.n_interior:, 1])
    a_b, _ = kovasznay_exact(bx, by, mu_ref)
    normal = mesh.f_normal[mesh.n_interior:]
    mesh.outflow_faces = np.einsum("fk,fk->f", a_b, normal) > 0.0
    return mesh


def kovasznay_linearised_problem(mesh, mu, convection=None):
    """Linearised Kovasznay problem at one viscosity: exact Dirichlet datum and
    a frozen conveying field (the exact velocity unless one is supplied)."""
    mark_kovasznay_outflow(mesh)
    bc = BoundarySpec(mesh, {"wall": "dirichlet"})
    bx, by = (mesh.f_centroid[mesh.n_interior:, 0],
              mesh.f_centroid[mesh.n_interior:, 1])
    bc.u_values, _ = kovasznay_exact(bx, by, mu)
    conv = kovasznay_velocity_field(mesh, mu) if convection is None else convection
    return SpatialProblem(mesh, bc, Field.constant(mesh, mu),
                          frozen_convection=conv)


def kovasznay_errors(state, mesh, mu):
    """Relative L2 errors of a solved state against the exact solution, both
    pressures anchored at the solver's reference cell."""
    cx, cy = mesh.cell_centroids[:, 0], mesh.cell_centroids[:, 1]
    u_ex, p_ex = kovasznay_exact(cx, cy, mu)
    p_ex = p_ex - p_ex[0]
    p_num = state.p.data - state.p.data[0]
    err_u = (np.sqrt(np.sum((state.u.data - u_ex) ** 2))
             / np.sqrt(np.sum(u_ex ** 2)))
    err_p = np.sqrt(np.sum((p_num - p_ex) ** 2)) / np.sqrt(np.sum(p_ex ** 2))
    return float(err_u), float(err_p)


def kovasznay_case(nx=100, n_mu=10, taylor_order=4, mu_ref=None):
    """Kovasznay flow with viscosity as the parameter, linearised around the
    separated convective field; boundary data enters through one mode per
    separated term."""
    mesh = build_cartesian(nx, nx, (-1.0, -1.0), (2.0, 2.0), _walls_layout())
    mark_kovasznay_outflow(mesh)
    grid = ParametricGrid(5e-3, 1e-2, n_mu)
    nu = SeparableScalar([(ParametricFunction(grid, grid.nodes),
                           Field.constant(mesh, 1.0))])
    convection = taylor_separated_convection(taylor_order, grid, mesh)
    bc_hom = BoundarySpec(mesh, {"wall": "dirichlet"})
    ref = grid.mu_max if mu_ref is None else mu_ref
    conv_ref = convection.at_mu(ref)
    recipes = []
    for j, (phi, spatial) in enumerate(convection.terms):
        bc = BoundarySpec(mesh, {"wall": "dirichlet"})
        bc.u_values = spatial.boundary.copy()
        recipes.append(BcModeRecipe(f"datum_{j}", bc, phi.copy(),
                                    frozen_convection=conv_ref))
    settings = SimpleSettings(alpha_u=0.9, alpha_p=1.0, variant="simplec",
                              tol_momentum=1e-7, tol_continuity=1e-7,
                              lin_rtol_momentum=5e-2, lin_rtol_pressure=2e-2,
                              max_outer=2500, deferred_central=True)
    return CaseDefinition(
        name="kovasznay", mesh=mesh, grid=grid, viscosity=nu,
        bc_homogeneous=bc_hom, bc_modes=recipes, convection=convection,
        exact=kovasznay_exact, settings=settings,
        metadata={"nx": nx, "n_mu": n_mu, "taylor_order": taylor_order})


def lid_cavity_case(nx=96, n_mu=40, u_max=400.0, nu=0.1):
    """Nonleaky cavity whose lid speed scales linearly with the parameter; the
    boundary mode is the full-order solution at the fastest lid."""
    layout = _walls_layout()
    layout["top"] = "lid"
    mesh = build_cartesian(nx, nx, (0.0, 0.0), (1.0, 1.0), layout)
    grid = ParametricGrid(0.25, 1.0, n_mu)
    nu_sep = SeparableScalar([(ParametricFunction.constant(grid),
                               Field.constant(mesh, nu))])
    kinds = {"wall": "dirichlet", "lid": "dirichlet"}
    bc_hom = BoundarySpec(mesh, kinds)
    bc_lid = BoundarySpec(mesh, kinds,
                          {"lid": lambda x, y: (lid_profile(x, 1.0, u_max), 0.0)})
    recipes = [BcModeRecipe("lid_full", bc_lid,
                            ParametricFunction(grid, grid.nodes))]
    settings = SimpleSettings(alpha_u=0.8, alpha_p=1.0, variant="simplec",
                              lin_rtol_momentum=5e-2, lin_rtol_pressure=2e-2,
                              max_outer=6000, deferred_central=True)
    return CaseDefinition(
        name="lid", mesh=mesh, grid=grid, viscosity=nu_sep,
        bc_homogeneous=bc_hom, bc_modes=recipes, convection="self",
        settings=settings,
        metadata={"nx": nx, "n_mu": n_mu, "u_max": u_max, "nu": nu})


def jets_layout():
    return {
        "left": [("outlet", 0.0, JET_SIZE), ("wall", JET_SIZE, 1.0 - JET_SIZE),
                 ("jet_left", 1.0 - JET_SIZE, 1.0)],
        "right": [("jet_right_low", 0.0, JET_SIZE),
                  ("wall", JET_SIZE, 1.0 - JET_SIZE),
                  ("jet_right_high", 1.0 - JET_SIZE, 1.0)],
        "bottom": "wall",
        "top": "lid",
    }


def jets_case(nx=96, n_mu=40, nu=0.01, lid_max=10.0, smooth_jets=False):
    """Cavity with three wall jets whose peak velocity scales with the
    parameter and a free-traction outlet; two boundary modes (lid alone, jets
    alone) carry the inhomogeneous data."""
    mesh = build_cartesian(nx, nx, (0.0, 0.0), (1.0, 1.0), jets_layout())
    grid = ParametricGrid(0.0, 1.0, n_mu)
    nu_sep = SeparableScalar([(ParametricFunction.constant(grid),
                               Field.constant(mesh, nu))])
    kinds = {"wall": "dirichlet", "lid": "dirichlet", "outlet": "outlet",
             "jet_left": "dirichlet", "jet_right_low": "dirichlet",
             "jet_right_high": "dirichlet"}
    bc_hom = BoundarySpec(mesh, kinds)
    bc_lid = BoundarySpec(mesh, kinds,
                          {"lid": lambda x, y: (lid_profile(x, 1.0, lid_max), 0.0)})
    jets = {w: (lambda wall: (lambda x, y: tuple(jet_profile(wall, y, 1.0,
                                                             smooth_jets))))(w)
            for w in ("jet_left", "jet_right_low", "jet_right_high")}
    bc_jets = BoundarySpec(mesh, kinds, jets)
    recipes = [
        BcModeRecipe("lid_only", bc_lid, ParametricFunction.constant(grid)),
        BcModeRecipe("jets_full", bc_jets, ParametricFunction(grid, grid.nodes)),
    ]
    settings = SimpleSettings(alpha_u=0.8, alpha_p=1.0, variant="simplec",
                              lin_rtol_momentum=5e-2, lin_rtol_pressure=2e-2,
                              max_outer=6000, deferred_central=True)
    return CaseDefinition(
        name="jets", mesh=mesh, grid=grid, viscosity=nu_sep,
        bc_homogeneous=bc_hom, bc_modes=recipes, convection="self",
        qoi_patch="jet_right_low", settings=settings,
        metadata={"nx": nx, "n_mu": n_mu, "nu": nu, "lid_max": lid_max,
                  "smooth_jets": smooth_jets})


CASES = {"kovasznay": kovasznay_case, "lid": lid_cavity_case, "jets": jets_case}


def make_case(name, **kwargs):
    try:
        builder = CASES[name]
    except KeyError:
        raise KeyError(f"unknown case '{name}'; have {sorted(CASES)}") from None
    return builder(**kwargs)
