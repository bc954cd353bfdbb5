"""Command-line entry points: full-order solves, offline enrichment, online
evaluation, convergence studies, QoI sweeps and the HTTP serving mode."""

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from .cases import kovasznay_errors, kovasznay_linearised_problem, pressure_drop
from .config import ConfigError, load_config
from .fv import l2_norm
from .mesh import build_cartesian
from .pgd import enrich, evaluate_online
from .simple import simple_solve
from .storage import (
    load_expansion, save_expansion, write_csv, write_field_csv,
    write_residuals, write_vtk_scalar, write_vtk_vector,
)

log = logging.getLogger("pgdflow")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

KOVASZNAY_LADDER = (8.3e-2, 4e-2, 2e-2, 1e-2)


def _fail(message, code=EXIT_USAGE):
    print(f"error: {message}", file=sys.stderr)
    return code


def _write_fields(out, mesh, u, p):
    out.mkdir(parents=True, exist_ok=True)
    write_vtk_vector(out / "u.vtk", mesh, u.data)
    write_vtk_scalar(out / "p.vtk", mesh, p.data)
    write_field_csv(out / "u.csv", mesh, u)
    write_field_csv(out / "p.csv", mesh, p)


def cmd_solve_full(config, mu, out_dir=None):
    """One full-order solve at a parameter value; writes VTK, CSV and the
    residual history."""
    case = config.build_case()
    if not case.grid.contains(mu):
        return _fail(f"mu={mu} outside [{case.grid.mu_min}, {case.grid.mu_max}]")
    out = Path(out_dir or config.output_dir)
    state = simple_solve(case.full_order_problem(mu), case.settings)
    if not state.converged:
        print(f"error: solver did not converge within "
              f"{case.settings.max_outer} iterations", file=sys.stderr)
        return EXIT_FAILURE
    _write_fields(out, case.mesh, state.u, state.p)
    write_residuals(out / "residuals.csv", state.residuals)
    if case.exact is not None:
        err_u, err_p = kovasznay_errors(state, case.mesh, mu)
        write_csv(out / "errors.csv", ["mu", "err_u", "err_p"],
                  [[mu, err_u, err_p]])
    print(f"solved {case.name} at mu={mu}: {state.iterations} iterations, "
          f"fields in {out}")
    return EXIT_OK


def cmd_pgd_offline(config, out_dir=None):
    """Offline enrichment; writes the expansion archive and amplitude log."""
    case = config.build_case()
    out = Path(out_dir or config.output_dir)

    def progress(event):
        if event["event"] == "mode":
            print(f"mode {event['index']}: sigma_u={event['sigma_u']:.4e} "
                  f"sigma_p={event['sigma_p']:.4e} "
                  f"criterion={event['criterion']:.4e} "
                  f"({event['iterations']} alternating iterations)")
        elif event["event"] == "bc-mode":
            print(f"boundary mode '{event['label']}' "
                  f"({event['iterations']} iterations)")

    try:
        expansion = enrich(case, config.ads_settings(), progress=progress)
    except Exception as exc:
        save_marker = Path(out) / "manifest.json"
        print(f"error: enrichment failed: {exc}", file=sys.stderr)
        if save_marker.exists():
            data = json.loads(save_marker.read_text())
            data["incomplete"] = True
            save_marker.write_text(json.dumps(data, indent=1))
        return EXIT_FAILURE
    save_expansion(expansion, out, csv_mirror=config.csv_mirror,
                   incomplete=expansion.status not in ("converged", "max_modes"))
    print(f"expansion: {len(expansion.bc_modes)} boundary + "
          f"{len(expansion.computed_modes)} computed modes "
          f"({expansion.status}); archive in {out}")
    return EXIT_OK


def cmd_evaluate(archive, mu, out_dir=None, qoi=None):
    """Online particularisation at one parameter value."""
    expansion, case = load_expansion(archive)
    if not case.grid.contains(mu):
        return _fail(f"mu={mu} outside [{case.grid.mu_min}, {case.grid.mu_max}]")
    t0 = time.perf_counter()
    u, p = evaluate_online(expansion, mu)
    elapsed = time.perf_counter() - t0
    if out_dir is not None:
        _write_fields(Path(out_dir), case.mesh, u, p)
    print(f"evaluated mu={mu} in {elapsed * 1e3:.3f} ms "
          f"({len(expansion.modes)} modes)")
    if qoi:
        if qoi != "pressure_drop":
            return _fail(f"unknown QoI '{qoi}'")
        if case.qoi_patch is None:
            return _fail(f"case '{case.name}' defines no pressure-drop patch")
        value = pressure_drop(p, case.mesh, case.qoi_patch)
        print(f"{value:.17g}")
    return EXIT_OK


def cmd_convergence(config, out_dir=None, levels=None, n_mu_samples=11):
    """Mesh-refinement study against the analytic reference; writes the error
    and observed-order table."""
    if config.case != "kovasznay":
        return _fail("convergence study requires a case with an analytic "
                     "reference (kovasznay)")
    out = Path(out_dir or config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    hs = levels or KOVASZNAY_LADDER
    mus = np.linspace(5e-3, 1e-2, n_mu_samples)
    rows = []
    failed = False
    for h in hs:
        n = round(2.0 / h)
        mesh = build_cartesian(n, n, (-1.0, -1.0), (2.0, 2.0),
                               {e: "wall" for e in ("left", "right", "bottom", "top")})
        case = config.build_case()
        sq_u = sq_p = 0.0
        state = None
        try:
            for mu in mus:
                problem = kovasznay_linearised_problem(mesh, mu)
                state = simple_solve(problem, case.settings, init=state)
                if not state.converged:
                    raise RuntimeError(f"not converged at h={h}, mu={mu}")
                eu, ep = kovasznay_errors(state, mesh, mu)
                sq_u += eu * eu
                sq_p += ep * ep
        except Exception as exc:
            log.warning("level h=%g failed: %s", h, exc)
            rows.append([h, "failed", "failed"])
            failed = True
            continue
        rows.append([h, np.sqrt(sq_u / len(mus)), np.sqrt(sq_p / len(mus))])
    table = []
    for i, row in enumerate(rows):
        entry = list(row)
        if (len(rows) > 1 and i > 0 and row[1] != "failed"
                and rows[i - 1][1] != "failed"):
            ratio = np.log(rows[i - 1][0] / row[0])
            entry += [np.log(rows[i - 1][1] / row[1]) / ratio,
                      np.log(rows[i - 1][2] / row[2]) / ratio]
        table.append(entry)
    header = ["h", "err_u", "err_p"]
    if len(rows) > 1:
        header += ["order_u", "order_p"]
    write_csv(out / "convergence.csv", header, table)
    for entry in table:
        print(" ".join(f"{v:.6g}" if isinstance(v, float) else str(v)
                       for v in entry))
    return EXIT_FAILURE if failed else EXIT_OK


def cmd_qoi_sweep(archive, samples, out_dir=None, full_order=False):
    """Pressure-drop sweep over the parametric interval from an archive,
    optionally with a fresh full-order solve per sample."""
    expansion, case = load_expansion(archive)
    if case.qoi_patch is None:
        return _fail(f"case '{case.name}' defines no pressure-drop patch")
    grid = case.grid
    mus = np.linspace(grid.mu_min, grid.mu_max, samples)
    header = ["mu", "p_drop"]
    if full_order:
        header.append("p_drop_full_order")
    rows = []
    for mu in mus:
        _, p = evaluate_online(expansion, mu)
        row = [mu, pressure_drop(p, case.mesh, case.qoi_patch)]
        if full_order:
            state = simple_solve(case.full_order_problem(mu), case.settings)
            if not state.converged:
                print(f"error: full-order solve at mu={mu} did not converge",
                      file=sys.stderr)
                return EXIT_FAILURE
            row.append(pressure_drop(state.p, case.mesh, case.qoi_patch))
        rows.append(row)
        print(" ".join(f"{v:.8g}" for v in row))
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_csv(out / "qoi.csv", header, rows)
    return EXIT_OK


def cmd_serve(archive, bind, ui_dir=None):
    """Long-running HTTP service over a loaded archive."""
    from .server import serve_forever
    expansion, case = load_expansion(archive)
    host, _, port = bind.rpartition(":")
    try:
        port = int(port)
    except ValueError:
        return _fail(f"bad bind address '{bind}' (want host:port)")
    serve_forever(expansion, case, host or "127.0.0.1", port, ui_dir=ui_dir)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="pgdflow",
        description="Parametrised incompressible flow: full-order SIMPLE "
                    "solves and a reduced-order offline/online layer")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config(p):
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--out", default=None, help="output directory")

    p = sub.add_parser("solve-full", help="one full-order solve")
    add_config(p)
    p.add_argument("--mu", type=float, required=True)

    p = sub.add_parser("pgd-offline", help="offline enrichment")
    add_config(p)

    p = sub.add_parser("evaluate", help="online evaluation from an archive")
    p.add_argument("--archive", required=True)
    p.add_argument("--mu", type=float, required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--qoi", default=None, help="e.g. pressure_drop")

    p = sub.add_parser("convergence", help="mesh-refinement study")
    add_config(p)
    p.add_argument("--levels", type=float, nargs="*", default=None,
                   help="characteristic mesh sizes (default ladder)")
    p.add_argument("--mu-samples", type=int, default=11)

    p = sub.add_parser("qoi-sweep", help="pressure-drop sweep from an archive")
    p.add_argument("--archive", required=True)
    p.add_argument("--samples", type=int, default=5)
    p.add_argument("--out", default=None)
    p.add_argument("--full-order", action="store_true")

    p = sub.add_parser("serve", help="HTTP service over an archive")
    p.add_argument("--archive", required=True)
    p.add_argument("--bind", default="127.0.0.1:8650")
    p.add_argument("--ui", default=None, help="static assets directory")
    return parser


def main(argv=None):
    logging.basicConfig(level=logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        if args.command == "solve-full":
            config = load_config(args.config)
            return cmd_solve_full(config, args.mu, args.out)
        if args.command == "pgd-offline":
            config = load_config(args.config)
            return cmd_pgd_offline(config, args.out)
        if args.command == "evaluate":
            return cmd_evaluate(args.archive, args.mu, args.out, args.qoi)
        if args.command == "convergence":
            config = load_config(args.config)
            return cmd_convergence(config, args.out, args.levels,
                                   args.mu_samples)
        if args.command == "qoi-sweep":
            return cmd_qoi_sweep(args.archive, args.samples, args.out,
                                 args.full_order)
        if args.command == "serve":
            return cmd_serve(args.archive, args.bind, args.ui)
    except ConfigError as exc:
        return _fail(str(exc))
    except FileNotFoundError as exc:
        return _fail(str(exc))
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
