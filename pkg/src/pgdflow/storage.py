"""Serialisation: VTK legacy writers, CSV tables and the expansion archive
(JSON manifest plus raw little-endian float64 arrays)."""

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from .fv import Field
from .pgd import Mode, PgdExpansion
from .separated import ParametricFunction

ARCHIVE_FORMAT = 1


# -- VTK legacy ---------------------------------------------------------------------

def _vtk_header(mesh, title):
    return "\n".join([
        "# vtk DataFile Version 2.0",
        title,
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        f"DIMENSIONS {mesh.nx} {mesh.ny} 1",
        f"ORIGIN {mesh.origin[0] + 0.5 * mesh.dx} {mesh.origin[1] + 0.5 * mesh.dy} 0.0",
        f"SPACING {mesh.dx} {mesh.dy} 1.0",
        f"POINT_DATA {mesh.n_cells}",
    ])


def write_vtk_scalar(path, mesh, values, name="p", title="pgdflow field"):
    """Cell-centred scalar as a structured-points dataset (one value per cell,
    located at the centroids)."""
    lines = [_vtk_header(mesh, title),
             f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
    lines.extend(f"{v:.17g}" for v in np.asarray(values).ravel())
    Path(path).write_text("\n".join(lines) + "\n")


def write_vtk_vector(path, mesh, values, name="U", title="pgdflow field"):
    values = np.asarray(values)
    lines = [_vtk_header(mesh, title), f"VECTORS {name} double"]
    lines.extend(f"{v[0]:.17g} {v[1]:.17g} 0.0" for v in values)
    Path(path).write_text("\n".join(lines) + "\n")


# -- CSV ----------------------------------------------------------------------------

def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def write_residuals(path, residuals):
    write_csv(path, ["iteration", "momentum_x", "momentum_y", "continuity"],
              [[r["iteration"], r["momentum_x"], r["momentum_y"], r["continuity"]]
               for r in residuals])


def write_field_csv(path, mesh, field):
    data = np.asarray(field.data if isinstance(field, Field) else field)
    if data.ndim == 1:
        header = ["x", "y", "value"]
        rows = np.column_stack([mesh.cell_centroids, data])
    else:
        header = ["x", "y", "ux", "uy"]
        rows = np.column_stack([mesh.cell_centroids, data])
    write_csv(path, header, rows.tolist())


# -- expansion archive -----------------------------------------------------------------

def _write_array(path, array):
    np.asarray(array, dtype="<f8").tofile(path)


def _read_array(path, shape):
    data = np.fromfile(path, dtype="<f8")
    return data.reshape(shape)


def case_hash(case_meta):
    blob = json.dumps(case_meta, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def save_expansion(expansion, directory, csv_mirror=True, incomplete=False):
    """Write the archive: manifest.json, per-mode raw float64 arrays (cells,
    boundary values, conservative fluxes, nodal parametric functions) and the
    amplitude log."""
    directory = Path(directory)
    (directory / "modes").mkdir(parents=True, exist_ok=True)
    mesh, grid = expansion.mesh, expansion.grid
    manifest = {
        "format": ARCHIVE_FORMAT,
        "incomplete": bool(incomplete),
        "status": expansion.status,
        "case": expansion.case,
        "case_hash": case_hash(expansion.case),
        "mesh": {"nx": mesh.nx, "ny": mesh.ny,
                 "origin": list(map(float, mesh.origin)),
                 "extent": list(map(float, mesh.extent))},
        "grid": {"mu_min": grid.mu_min, "mu_max": grid.mu_max,
                 "n_nodes": grid.n_nodes},
        "shapes": {"cells": [mesh.n_cells], "cells2": [mesh.n_cells, 2],
                   "boundary": [mesh.n_boundary], "boundary2": [mesh.n_boundary, 2],
                   "faces": [mesh.n_faces], "nodes": [grid.n_nodes]},
        "history": expansion.history,
        "modes": [],
    }
    for i, mode in enumerate(expansion.modes):
        tag = f"{i:04d}"
        files = {"fu": f"modes/fu_{tag}.bin", "fu_boundary": f"modes/fub_{tag}.bin",
                 "fp": f"modes/fp_{tag}.bin", "fp_boundary": f"modes/fpb_{tag}.bin",
                 "phi": f"modes/phi_{tag}.bin"}
        _write_array(directory / files["fu"], mode.f_u.data)
        _write_array(directory / files["fu_boundary"], mode.f_u.boundary)
        _write_array(directory / files["fp"], mode.f_p.data)
        _write_array(directory / files["fp_boundary"], mode.f_p.boundary)
        _write_array(directory / files["phi"], mode.phi.values)
        if mode.flux is not None:
            files["flux"] = f"modes/flux_{tag}.bin"
            _write_array(directory / files["flux"], mode.flux)
        if csv_mirror:
            files["phi_csv"] = f"modes/phi_{tag}.csv"
            write_csv(directory / files["phi_csv"], ["mu", "value"],
                      np.column_stack([grid.nodes, mode.phi.values]).tolist())
        manifest["modes"].append({
            "index": i, "origin": mode.origin, "label": mode.label,
            "sigma_u": mode.sigma_u, "sigma_p": mode.sigma_p,
            "phi_normalised": mode.origin == "computed",
            "files": files,
        })
    (directory / "manifest.json").write_text(json.dumps(manifest, indent=1))
    write_csv(directory / "amplitudes.csv",
              ["mode", "sigma_u", "sigma_p", "eta_up", "iterations"],
              [[h["mode"], h["sigma_u"], h["sigma_p"], h["criterion"],
                h["iterations"]] for h in expansion.history])
    return directory / "manifest.json"


def load_expansion(directory):
    """Rebuild an expansion (and its case) from an archive directory; array
    payloads round-trip bit-exactly."""
    from .cases import make_case
    from .separated import ParametricGrid

    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text())
    if manifest.get("format") != ARCHIVE_FORMAT:
        raise ValueError(f"unsupported archive format {manifest.get('format')}")
    meta = dict(manifest["case"])
    name = meta.pop("name")
    case = make_case(name, **meta)
    mesh, grid = case.mesh, case.grid
    stored = manifest["mesh"]
    if (mesh.nx, mesh.ny) != (stored["nx"], stored["ny"]):
        raise ValueError("archive mesh does not match the rebuilt case")
    if grid.n_nodes != manifest["grid"]["n_nodes"]:
        raise ValueError("archive grid does not match the rebuilt case")

    expansion = PgdExpansion(mesh=mesh, grid=grid, case=manifest["case"],
                             status=manifest["status"],
                             history=manifest["history"])
    for entry in manifest["modes"]:
        files = entry["files"]
        f_u = Field(mesh, _read_array(directory / files["fu"], (mesh.n_cells, 2)),
                    _read_array(directory / files["fu_boundary"], (mesh.n_boundary, 2)))
        f_p = Field(mesh, _read_array(directory / files["fp"], (mesh.n_cells,)),
                    _read_array(directory / files["fp_boundary"], (mesh.n_boundary,)))
        phi = ParametricFunction(grid, _read_array(directory / files["phi"],
                                                   (grid.n_nodes,)))
        flux = None
        if "flux" in files:
            flux = _read_array(directory / files["flux"], (mesh.n_faces,))
        expansion.modes.append(Mode(
            f_u=f_u, f_p=f_p, phi=phi, sigma_u=entry["sigma_u"],
            sigma_p=entry["sigma_p"], flux=flux, origin=entry["origin"],
            label=entry["label"]))
    return expansion, case
