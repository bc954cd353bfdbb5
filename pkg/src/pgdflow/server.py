"""HTTP serving mode: stateless JSON endpoints over an immutable loaded
expansion, plus static assets for the explorer UI."""

import json
import time
from functools import partial
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

import numpy as np

from .cases import pressure_drop
from .pgd import evaluate_online

MAX_QOI_SAMPLES = 1001


def meta_payload(expansion, case):
    mesh = expansion.mesh
    return {
        "case": case.name,
        "mu_min": expansion.grid.mu_min,
        "mu_max": expansion.grid.mu_max,
        "n_modes": len(expansion.modes),
        "mesh": {"nx": mesh.nx, "ny": mesh.ny,
                 "origin": list(map(float, mesh.origin)),
                 "extent": list(map(float, mesh.extent))},
        "amplitudes": [{"index": i, "origin": m.origin,
                        "sigma_u": m.sigma_u, "sigma_p": m.sigma_p}
                       for i, m in enumerate(expansion.modes)],
        "qoi_patch": case.qoi_patch,
    }


def evaluate_payload(expansion, case, mu, stride):
    mesh = expansion.mesh
    t0 = time.perf_counter()
    u, p = evaluate_online(expansion, mu)
    drop = (pressure_drop(p, mesh, case.qoi_patch)
            if case.qoi_patch is not None else None)
    elapsed_ms = (time.perf_counter() - t0) * 1e3
    speed = np.hypot(u.data[:, 0], u.data[:, 1]).reshape(mesh.ny, mesh.nx)
    pressure = p.data.reshape(mesh.ny, mesh.nx)
    sub_speed = speed[::stride, ::stride]
    sub_p = pressure[::stride, ::stride]
    return {
        "mu": mu,
        "stride": stride,
        "nx": sub_speed.shape[1],
        "ny": sub_speed.shape[0],
        "speed": [[float(v) for v in row] for row in sub_speed],
        "pressure": [[float(v) for v in row] for row in sub_p],
        "p_drop": drop,
        "eval_ms": elapsed_ms,
    }


def qoi_payload(expansion, case, samples):
    grid = expansion.grid
    points = []
    for mu in np.linspace(grid.mu_min, grid.mu_max, samples):
        _, p = evaluate_online(expansion, float(mu))
        drop = (pressure_drop(p, expansion.mesh, case.qoi_patch)
                if case.qoi_patch is not None else None)
        points.append({"mu": float(mu), "p_drop": drop})
    return points


class _Handler(BaseHTTPRequestHandler):
    # the expansion is read-only shared state; handlers never mutate it
    expansion = None
    case = None
    ui_dir = None

    def log_message(self, fmt, *args):
        pass

    def _send_json(self, payload, status=200):
        body = json.dumps(payload).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _bad_request(self, message):
        self._send_json({"error": message}, status=400)

    def do_GET(self):
        url = urlparse(self.path)
        query = parse_qs(url.query)
        if url.path == "/api/meta":
            return self._send_json(meta_payload(self.expansion, self.case))
        if url.path == "/api/evaluate":
            try:
                mu = float(query["mu"][0])
            except (KeyError, ValueError):
                return self._bad_request("mu must be a float")
            stride = 1
            if "stride" in query:
                try:
                    stride = max(1, int(query["stride"][0]))
                except ValueError:
                    return self._bad_request("stride must be an integer")
            if not self.expansion.grid.contains(mu):
                return self._bad_request(
                    f"mu outside [{self.expansion.grid.mu_min}, "
                    f"{self.expansion.grid.mu_max}]")
            return self._send_json(
                evaluate_payload(self.expansion, self.case, mu, stride))
        if url.path == "/api/qoi":
            try:
                samples = int(query.get("samples", ["11"])[0])
            except ValueError:
                return self._bad_request("samples must be an integer")
            if not 2 <= samples <= MAX_QOI_SAMPLES:
                return self._bad_request(
                    f"samples must be in [2, {MAX_QOI_SAMPLES}]")
            return self._send_json(qoi_payload(self.expansion, self.case, samples))
        if url.path.startswith("/api/"):
            return self._send_json({"error": "unknown endpoint"}, status=404)
        return self._serve_static(url.path)

    def _serve_static(self, path):
        if self.ui_dir is None:
            return self._send_json({"error": "no UI assets configured"},
                                   status=404)
        root = Path(self.ui_dir).resolve()
        target = (root / path.lstrip("/")).resolve()
        if target.is_dir():
            target = target / "index.html"
        if root not in target.parents and target != root:
            return self._send_json({"error": "forbidden"}, status=404)
        if not target.is_file():
            return self._send_json({"error": "not found"}, status=404)
        types = {".html": "text/html", ".js": "text/javascript",
                 ".css": "text/css", ".map": "application/json",
                 ".json": "application/json"}
        body = target.read_bytes()
        self.send_response(200)
        self.send_header("Content-Type",
                         types.get(target.suffix, "application/octet-stream"))
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)


def make_server(expansion, case, host, port, ui_dir=None):
    handler = partial(_Handler)
    handler = type("BoundHandler", (_Handler,),
                   {"expansion": expansion, "case": case, "ui_dir": ui_dir})
    server = ThreadingHTTPServer((host, port), handler)
    server.daemon_threads = True
    return server


def serve_forever(expansion, case, host, port, ui_dir=None):
    if ui_dir is None:
        default = Path(__file__).resolve().parents[2] / "frontend" / "dist"
        if default.is_dir():
            ui_dir = default
    server = make_server(expansion, case, host, port, ui_dir)
    print(f"serving archive of case '{case.name}' on http://{host}:{port} "
          f"(UI: {ui_dir or 'none'})")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()
