"""Structured 2D Cartesian cell-centred mesh with owner/neighbour faces and named patches."""

import numpy as np

# Edges of the rectangular domain, in the order boundary faces are numbered.
EDGES = ("left", "right", "bottom", "top")


class MeshError(ValueError):
    pass


class Mesh2D:
    """Uniform Cartesian mesh of nx*ny cells with unit depth.

    Cells are numbered x-fastest: cell(i, j) = i + nx*j.  Faces are stored
    interior-first (vertical sweeps then horizontal), boundary faces after,
    grouped by edge.  Interior normals point owner -> neighbour; boundary
    normals point outward.  "Volume" is the cell area and face "area" the
    edge length (unit depth convention).
    """

    def __init__(self, nx, ny, origin, extent, patch_layout=None):
        if nx < 2 or ny < 2:
            raise MeshError(f"need at least 2 cells per axis, got {nx}x{ny}")
        extent = np.asarray(extent, dtype=float)
        origin = np.asarray(origin, dtype=float)
        if np.any(extent <= 0.0):
            raise MeshError(f"extent must be positive, got {extent}")

        self.nx, self.ny = int(nx), int(ny)
        self.origin, self.extent = origin, extent
        self.dx = extent[0] / nx
        self.dy = extent[1] / ny
        self.n_cells = self.nx * self.ny
        self.cell_volume = self.dx * self.dy

        ix = np.arange(self.nx)
        iy = np.arange(self.ny)
        cx = origin[0] + (ix + 0.5) * self.dx
        cy = origin[1] + (iy + 0.5) * self.dy
        gx, gy = np.meshgrid(cx, cy)  # row-major: index [j, i]
        self.cell_centroids = np.column_stack([gx.ravel(), gy.ravel()])

        self._build_faces()
        self._assign_patches(patch_layout or {e: "wall" for e in EDGES})

    # -- construction helpers -------------------------------------------------

    def _build_faces(self):
        nx, ny, dx, dy = self.nx, self.ny, self.dx, self.dy
        owner, nbr, normal, area, centroid, delta = [], [], [], [], [], []

        def cell(i, j):
            return i + nx * j

        # interior vertical faces (normal +x), owner = left cell
        for j in range(ny):
            for i in range(nx - 1):
                owner.append(cell(i, j))
                nbr.append(cell(i + 1, j))
                normal.append((1.0, 0.0))
                area.append(dy)
                centroid.append((self.origin[0] + (i + 1) * dx,
                                 self.origin[1] + (j + 0.5) * dy))
                delta.append(dx)
        # interior horizontal faces (normal +y), owner = lower cell
        for j in range(ny - 1):
            for i in range(nx):
                owner.append(cell(i, j))
                nbr.append(cell(i, j + 1))
                normal.append((0.0, 1.0))
                area.append(dx)
                centroid.append((self.origin[0] + (i + 0.5) * dx,
                                 self.origin[1] + (j + 1) * dy))
                delta.append(dy)
        self.n_interior = len(owner)

        # boundary faces, edge by edge (left, right, bottom, top)
        xb0, yb0 = self.origin
        xb1, yb1 = self.origin + self.extent
        self._edge_slices = {}
        start = self.n_interior
        for j in range(ny):
            owner.append(cell(0, j))
            nbr.append(-1)
            normal.append((-1.0, 0.0))
            area.append(dy)
            centroid.append((xb0, yb0 + (j + 0.5) * dy))
            delta.append(0.5 * dx)
        self._edge_slices["left"] = np.arange(start, start + ny)
        start += ny
        for j in range(ny):
            owner.append(cell(nx - 1, j))
            nbr.append(-1)
            normal.append((1.0, 0.0))
            area.append(dy)
            centroid.append((xb1, yb0 + (j + 0.5) * dy))
            delta.append(0.5 * dx)
        self._edge_slices["right"] = np.arange(start, start + ny)
        start += ny
        for i in range(nx):
            owner.append(cell(i, 0))
            nbr.append(-1)
            normal.append((0.0, -1.0))
            area.append(dx)
            centroid.append((xb0 + (i + 0.5) * dx, yb0))
            delta.append(0.5 * dy)
        self._edge_slices["bottom"] = np.arange(start, start + nx)
        start += nx
        for i in range(nx):
            owner.append(cell(i, ny - 1))
            nbr.append(-1)
            normal.append((0.0, 1.0))
            area.append(dx)
            centroid.append((xb0 + (i + 0.5) * dx, yb1))
            delta.append(0.5 * dy)
        self._edge_slices["top"] = np.arange(start, start + nx)

        self.f_owner = np.asarray(owner, dtype=np.int64)
        self.f_nbr = np.asarray(nbr, dtype=np.int64)
        self.f_normal = np.asarray(normal, dtype=float)
        self.f_area = np.asarray(area, dtype=float)
        self.f_centroid = np.asarray(centroid, dtype=float)
        self.f_delta = np.asarray(delta, dtype=float)
        self.n_faces = len(owner)
        self.n_boundary = self.n_faces - self.n_interior
        # views commonly needed by operators
        self.i_owner = self.f_owner[:self.n_interior]
        self.i_nbr = self.f_nbr[:self.n_interior]
        self.b_owner = self.f_owner[self.n_interior:]
        # boundary faces where convected values are carried out of the domain
        # (owner-cell value instead of the boundary datum); cases with
        # through-flow across Dirichlet patches mark these once, from the sign
        # of the conveying data, so all operators stay linear in the fields
        self.outflow_faces = np.zeros(self.n_boundary, dtype=bool)

    def _assign_patches(self, layout):
        patches = {}
        for edge in EDGES:
            if edge not in layout:
                raise MeshError(f"patch layout missing edge '{edge}'")
            faces = self._edge_slices[edge]
            spec = layout[edge]
            if isinstance(spec, str):
                patches.setdefault(spec, []).append(faces)
                continue
            # list of (name, lo, hi) intervals along the edge coordinate
            coord = self.f_centroid[faces, 1 if edge in ("left", "right") else 0]
            taken = np.zeros(len(faces), dtype=bool)
            for name, lo, hi in spec:
                inside = (coord > lo) & (coord < hi)
                if np.any(inside & taken):
                    raise MeshError(f"overlapping patch intervals on edge '{edge}'")
                taken |= inside
                patches.setdefault(name, []).append(faces[inside])
            if not taken.all():
                raise MeshError(f"edge '{edge}' not fully covered by patch intervals")
        self.patches = {name: np.concatenate(parts) for name, parts in patches.items()}

    # -- queries ---------------------------------------------------------------

    @property
    def cell_volumes(self):
        return np.full(self.n_cells, self.cell_volume)

    def boundary_index(self, face_indices):
        """Map absolute boundary-face indices to 0-based boundary array offsets."""
        return np.asarray(face_indices) - self.n_interior


def build_cartesian(nx, ny, origin, extent, patch_layout=None):
    """Build a uniform Cartesian mesh; patch_layout maps each edge to a patch
    name or to a list of (name, lo, hi) coordinate intervals."""
    return Mesh2D(nx, ny, origin, extent, patch_layout)


def patch_faces(mesh, name):
    """Boundary-face indices of a named patch."""
    try:
        return mesh.patches[name]
    except KeyError:
        raise KeyError(f"unknown patch '{name}'; have {sorted(mesh.patches)}") from None


DIRICHLET = 0
OUTLET = 1

_KINDS = {"dirichlet": DIRICHLET, "outlet": OUTLET}


class BoundarySpec:
    """Per-patch boundary conditions: Dirichlet velocity or free-traction outlet.

    Dirichlet values are given per patch as a callable (x, y) -> (ux, uy) or a
    constant pair, and are materialised at face centroids on construction.
    Outlets carry zero traction; nonzero traction is not supported.
    """

    def __init__(self, mesh, kinds, values=None):
        values = values or {}
        missing = set(mesh.patches) - set(kinds)
        if missing:
            raise MeshError(f"patches without boundary kind: {sorted(missing)}")
        self.mesh = mesh
        self.kinds = dict(kinds)
        self.face_kind = np.empty(mesh.n_boundary, dtype=np.int8)
        self.u_values = np.zeros((mesh.n_boundary, 2))
        for name, kind in kinds.items():
            if kind not in _KINDS:
                raise MeshError(f"unknown boundary kind '{kind}'")
            idx = mesh.boundary_index(patch_faces(mesh, name))
            self.face_kind[idx] = _KINDS[kind]
            if kind == "dirichlet":
                val = values.get(name, (0.0, 0.0))
                if callable(val):
                    pts = mesh.f_centroid[patch_faces(mesh, name)]
                    self.u_values[idx] = np.array([val(x, y) for x, y in pts])
                else:
                    self.u_values[idx] = np.asarray(val, dtype=float)
        self.dirichlet_mask = self.face_kind == DIRICHLET
        self.outlet_mask = self.face_kind == OUTLET
        self.has_outlet = bool(self.outlet_mask.any())

    def homogeneous(self):
        """Same patch kinds with zero Dirichlet data (used by ROM increments)."""
        return BoundarySpec(self.mesh, self.kinds)
