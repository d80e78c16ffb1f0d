"""
Command-line entry point.

Subcommands: ``gamma`` (corner-exponent tables), ``forward`` (solve and
export traces), ``shape-derivative`` (boundary-integral and material
routes), ``transmission`` (enriched solve and route comparison),
``taylor`` (remainder table), ``corner-fit`` (beta/gamma estimation),
``verify`` (full campaign), ``reconstruct`` (Gauss-Newton inversion on
synthetic data).  Configuration is a flat INI file; every run is
deterministic given the config and seed, and all CSV output uses a fixed
number format so repeated runs are byte-identical.

Exit codes: 0 success, 1 a verification check failed, 2 usage error.
"""

from __future__ import annotations

import argparse
import configparser
import os
import sys
from pathlib import Path

import numpy as np

from .corner_analysis import Contrast, build_spectrum, gamma_roots
from .fem_core import (
    BoundaryFunction,
    ForwardSolver,
    boundary_trace,
    distance_l2,
    fourier_current,
    solve_forward,
    solve_material,
)
from .geometry import (
    ExtensionGeometry,
    OuterDomain,
    build_polygon,
    coordinate_motion,
    dilation,
    edge_normal,
    extend_field,
    generate_mesh,
    vertex_motion,
    write_mesh,
)
from .shape_derivative import (
    boundary_gradients,
    default_test_currents,
    shape_derivative_boundary,
    shape_derivative_pairing,
    taylor_remainder,
)
from .transmission_singular import assemble_sources, solve_transmission, verify_trace_identity
from .verification_recon import corner_probe_fits, reconstruct, run_verification_campaign

__all__ = ["main", "RunConfig", "load_config"]


def _fmt(x):
    return format(float(x), ".12g")


def _write_csv(path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) if isinstance(v, (int, float, np.floating)) else str(v)
                              for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def _svg_plot(path, series, title="", logx=False, logy=False):
    """Minimal polyline SVG: list of (label, xs, ys) series."""
    W, H, pad = 640, 480, 60

    def tx(v):
        return np.log10(np.maximum(v, 1e-300)) if logx else np.asarray(v, dtype=float)

    def ty(v):
        return np.log10(np.maximum(v, 1e-300)) if logy else np.asarray(v, dtype=float)

    xs_all = np.concatenate([tx(s[1]) for s in series])
    ys_all = np.concatenate([ty(s[2]) for s in series])
    x0, x1 = float(xs_all.min()), float(xs_all.max())
    y0, y1 = float(ys_all.min()), float(ys_all.max())
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0

    def px(x):
        return pad + (W - 2 * pad) * (x - x0) / (x1 - x0)

    def py(y):
        return H - pad - (H - 2 * pad) * (y - y0) / (y1 - y0)

    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b"]
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}">',
        f'<rect width="{W}" height="{H}" fill="white"/>',
        f'<text x="{W//2}" y="24" text-anchor="middle" font-size="14">{title}</text>',
        f'<line x1="{pad}" y1="{H-pad}" x2="{W-pad}" y2="{H-pad}" stroke="black"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{H-pad}" stroke="black"/>',
    ]
    for si, (label, xs, ys) in enumerate(series):
        txs, tys = tx(xs), ty(ys)
        pts = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(txs, tys))
        col = colors[si % len(colors)]
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{col}" stroke-width="1.5"/>')
        parts.append(
            f'<text x="{W-pad}" y="{pad + 16*si}" text-anchor="end" font-size="12" '
            f'fill="{col}">{label}</text>'
        )
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


class RunConfig:
    """Parsed run configuration (domain, contrast, current, mesh, etc.)."""

    def __init__(self):
        self.outer = OuterDomain.disk(1.0)
        self.polygon_vertices = [(0.3, 0.3), (-0.3, 0.3), (-0.3, -0.3), (0.3, -0.3)]
        self.contrast = Contrast.finite(2.0)
        self.currents = [(1, "cos")]
        self.hmax = 0.02
        self.grading = 0.5
        self.levels = 7
        self.perturbation = ("vertex-motion", {"vertex": 0, "direction": (1.0, 1.0)})
        self.out_dir = "out"
        self.seed = 0
        self.threads = 1
        self.svg = False
        self.checks = None
        self.truth_vertices = None
        self.noise = 0.0
        self.taylor_t = [0.08, 0.04, 0.02, 0.01]
        self.route_hmax = None

    def polygon(self):
        return build_polygon(self.polygon_vertices, outer=self.outer)

    def truth_polygon(self):
        if self.truth_vertices is None:
            return None
        return build_polygon(self.truth_vertices, outer=self.outer)

    def perturbation_field(self, polygon):
        name, opts = self.perturbation
        if name == "vertex-motion":
            return vertex_motion(polygon, int(opts.get("vertex", 0)),
                                 opts.get("direction", (1.0, 1.0)))
        if name == "dilation":
            return dilation(polygon)
        if name == "edge-normal":
            return edge_normal(polygon, int(opts.get("edge", 0)))
        if name == "coordinate":
            return coordinate_motion(polygon, int(opts.get("vertex", 0)),
                                     int(opts.get("axis", 0)))
        raise ValueError(f"unknown perturbation preset {name!r}")


def _parse_points(text):
    pts = []
    for chunk in text.replace("\n", ";").split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        x, y = chunk.split()
        pts.append((float(x), float(y)))
    return pts


def load_config(path=None) -> RunConfig:
    cfg = RunConfig()
    if path is None:
        return cfg
    parser = configparser.ConfigParser()
    with open(path) as fh:
        parser.read_file(fh)
    if parser.has_section("domain"):
        d = parser["domain"]
        kind = d.get("outer", "disk")
        if kind == "disk":
            cfg.outer = OuterDomain.disk(d.getfloat("radius", 1.0))
        elif kind == "rectangle":
            x0, y0, x1, y1 = [float(v) for v in d.get("corners", "-1 -1 1 1").split()]
            cfg.outer = OuterDomain.rectangle(x0, y0, x1, y1)
        else:
            raise ValueError(f"unknown outer domain {kind!r}")
        if d.get("polygon_file", ""):
            cfg.polygon_vertices = _parse_points(Path(d["polygon_file"]).read_text())
        elif d.get("polygon", ""):
            cfg.polygon_vertices = _parse_points(d["polygon"])
    if parser.has_section("contrast"):
        c = parser["contrast"]
        kind = c.get("kind", "finite")
        if kind == "finite":
            cfg.contrast = Contrast.finite(c.getfloat("k", 2.0))
        elif kind == "insulating":
            cfg.contrast = Contrast.insulating()
        elif kind == "conducting":
            cfg.contrast = Contrast.conducting()
        elif kind == "k1-testing":
            cfg.contrast = Contrast.finite(1.0, k1_testing=True)
        else:
            raise ValueError(f"unknown contrast kind {kind!r}")
    if parser.has_section("current"):
        modes = parser["current"].get("modes", "1:cos")
        cfg.currents = []
        for item in modes.split(","):
            m, kind = item.strip().split(":")
            cfg.currents.append((int(m), kind))
    if parser.has_section("mesh"):
        m = parser["mesh"]
        cfg.hmax = m.getfloat("hmax", cfg.hmax)
        cfg.grading = m.getfloat("grading", cfg.grading)
        cfg.levels = m.getint("levels", cfg.levels)
    if parser.has_section("perturbation"):
        p = parser["perturbation"]
        preset = p.get("preset", "vertex-motion")
        opts = {}
        if p.get("vertex", ""):
            opts["vertex"] = p.getint("vertex")
        if p.get("edge", ""):
            opts["edge"] = p.getint("edge")
        if p.get("axis", ""):
            opts["axis"] = p.getint("axis")
        if p.get("direction", ""):
            opts["direction"] = tuple(float(v) for v in p["direction"].split())
        cfg.perturbation = (preset, opts)
    if parser.has_section("experiment"):
        e = parser["experiment"]
        if e.get("checks", ""):
            cfg.checks = [s.strip() for s in e["checks"].split(",") if s.strip()]
        if e.get("taylor_t", ""):
            cfg.taylor_t = [float(v) for v in e["taylor_t"].split()]
        if e.get("route_hmax", ""):
            cfg.route_hmax = e.getfloat("route_hmax")
    if parser.has_section("reconstruction"):
        r = parser["reconstruction"]
        if r.get("truth_polygon", ""):
            cfg.truth_vertices = _parse_points(r["truth_polygon"])
        cfg.noise = r.getfloat("noise", 0.0)
    if parser.has_section("output"):
        o = parser["output"]
        cfg.out_dir = o.get("dir", cfg.out_dir)
        cfg.seed = o.getint("seed", cfg.seed)
    return cfg


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _prepare(cfg, duplicate=False, constraints=False):
    poly = cfg.polygon()
    geo = ExtensionGeometry(poly) if constraints else None
    mesh = generate_mesh(
        poly, cfg.outer, cfg.hmax, grading=cfg.grading, levels=cfg.levels,
        duplicate_interface=duplicate, seed=cfg.seed,
        constraints=geo.constraint_polylines() if geo else (),
    )
    return poly, geo, mesh


def cmd_gamma(args, cfg):
    alphas = [float(a) for a in args.alpha] if args.alpha else [np.pi / 2]
    k = args.k if args.k is not None else (cfg.contrast.k if cfg.contrast.is_finite else 2.0)
    rows = []
    for a in alphas:
        contrast = Contrast.finite(k)
        g = gamma_roots(a, contrast)
        lam = contrast.lam
        r1 = abs(abs(np.sin(g[1] * (a - np.pi))) - lam * abs(np.sin(g[1] * np.pi)))
        r2 = abs(abs(np.sin(g[2] * (a - np.pi))) - lam * abs(np.sin(g[2] * np.pi)))
        rows.append((a, k, g[0], g[1], g[2], r1, r2))
    header = ["alpha", "k", "gamma0", "gamma1", "gamma2", "residual1", "residual2"]
    print(",".join(header))
    for row in rows:
        print(",".join(_fmt(v) for v in row))
    if args.out:
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        _write_csv(outdir / "gamma.csv", header, rows)
    return 0


def _export_field_csv(path, mesh, field):
    vals = field.values_plus
    rows = [
        (i, mesh.nodes[i, 0], mesh.nodes[i, 1],
         int(mesh.polygon.contains(mesh.nodes[i][None, :])[0]), vals[i])
        for i in range(len(mesh.nodes))
    ]
    _write_csv(path, ["node_index", "x", "y", "region", "value"], rows)


def _export_boundary_csv(path, bf):
    order = np.argsort(bf.arc)
    rows = [(bf.arc[i], bf.values[i]) for i in order]
    _write_csv(path, ["arc_length", "value"], rows)


def cmd_forward(args, cfg):
    outdir = Path(cfg.out_dir)
    poly, _, mesh = _prepare(cfg)
    solver = ForwardSolver(mesh, cfg.contrast)
    outdir.mkdir(parents=True, exist_ok=True)
    for mode, kind in cfg.currents:
        f = fourier_current(mesh, mode, kind)
        u = solver.solve_current(f)
        tag = f"{mode}{kind}"
        _export_field_csv(outdir / f"field_{tag}.csv", mesh, u)
        _export_boundary_csv(outdir / f"trace_{tag}.csv", boundary_trace(u))
        if cfg.svg:
            tr = boundary_trace(u)
            order = np.argsort(tr.arc)
            _svg_plot(outdir / f"trace_{tag}.svg",
                      [(f"trace {tag}", tr.arc[order], tr.values[order])],
                      title=f"boundary trace, current {tag}")
    write_mesh(mesh, outdir / "mesh.txt")
    print(f"forward solve done: {len(mesh.nodes)} nodes, outputs in {outdir}")
    return 0


def _derivative_routes(cfg, poly, geo, mesh):
    contrast = cfg.contrast
    solver = ForwardSolver(mesh, contrast)
    u = solver.solve_current(fourier_current(mesh, *cfg.currents[0]))
    spectrum = build_spectrum(poly.alphas, contrast)
    fits = corner_probe_fits(mesh, poly, spectrum, u)
    tr_u = boundary_gradients(u, mesh, spectrum, fits=fits)
    tests = []
    for g in default_test_currents(mesh, 8):
        vg = solver.solve_current(g)
        fv = corner_probe_fits(mesh, poly, spectrum, vg)
        tests.append((g, boundary_gradients(vg, mesh, spectrum, fits=fv)))
    h = cfg.perturbation_field(poly)
    dlam_bfv = shape_derivative_boundary(mesh, contrast, tr_u, h, tests)
    H = extend_field(h, geometry=geo)
    udot = solve_material(mesh, contrast, u, H, solver=solver)
    tr_mat = boundary_trace(udot)
    return solver, u, spectrum, fits, tr_u, tests, h, dlam_bfv, tr_mat


def cmd_shape_derivative(args, cfg):
    outdir = Path(cfg.out_dir)
    poly, geo, mesh = _prepare(cfg, constraints=True)
    solver, u, spectrum, fits, tr_u, tests, h, dlam_bfv, tr_mat = _derivative_routes(
        cfg, poly, geo, mesh
    )
    outdir.mkdir(parents=True, exist_ok=True)
    # pairing table: rows of (h_index, g_index, value) over the coordinate basis
    rows = []
    basis = [coordinate_motion(poly, v, ax) for v in range(poly.n) for ax in (0, 1)]
    for hi, hb in enumerate(basis):
        for gi, (g, tr_v) in enumerate(tests):
            rows.append((hi, gi, shape_derivative_pairing(cfg.contrast, hb, tr_u, tr_v)))
    _write_csv(outdir / "pairings.csv", ["h_index", "g_index", "value"], rows)
    _export_boundary_csv(outdir / "derivative_bfv.csv", dlam_bfv)
    _export_boundary_csv(outdir / "derivative_material.csv", tr_mat)
    rel = distance_l2(dlam_bfv, tr_mat) / max(tr_mat.norm(), 1e-300)
    if cfg.svg:
        o1 = np.argsort(dlam_bfv.arc)
        _svg_plot(outdir / "derivative_routes.svg",
                  [("boundary integral", dlam_bfv.arc[o1], dlam_bfv.values[o1]),
                   ("material derivative", tr_mat.arc[o1], tr_mat.values[o1])],
                  title="shape derivative of the measurements")
    print(f"route distance (boundary-integral vs material): {_fmt(rel)}")
    return 0


def cmd_transmission(args, cfg):
    if not cfg.contrast.is_finite:
        print("transmission enrichment requires finite contrast", file=sys.stderr)
        return 2
    outdir = Path(cfg.out_dir)
    poly, geo, mesh = _prepare(cfg, duplicate=True, constraints=True)
    solver, u, spectrum, fits, tr_u, tests, h, dlam_bfv, tr_mat = _derivative_routes(
        cfg, poly, geo, mesh
    )
    src = assemble_sources(poly, cfg.contrast, u, spectrum, h, fits, mesh)
    split = solve_transmission(mesh, cfg.contrast, src)
    tr_w = split.trace()
    g = fourier_current(mesh, *cfg.currents[0])
    lhs, rhs, rows = verify_trace_identity(split, u, g, tr_u, tr_u)
    outdir.mkdir(parents=True, exist_ok=True)
    order = np.argsort(tr_w.arc)
    _write_csv(
        outdir / "trace_comparison.csv",
        ["arc_length", "trace_transmission", "trace_material", "trace_bfv17"],
        [(tr_w.arc[i], tr_w.values[i], tr_mat.values[i], dlam_bfv.values[i]) for i in order],
    )
    _write_csv(outdir / "delta_diagnostic.csv",
               ["delta", "vertex_term", "singular_term", "sum"], rows)
    d1 = distance_l2(tr_w, tr_mat) / max(tr_mat.norm(), 1e-300)
    d2 = distance_l2(tr_w, dlam_bfv) / max(tr_mat.norm(), 1e-300)
    print(f"transmission vs material: {_fmt(d1)}; vs boundary-integral: {_fmt(d2)}")
    print(f"trace identity: lhs={_fmt(lhs)} rhs={_fmt(rhs)}")
    return 0


def cmd_taylor(args, cfg):
    outdir = Path(cfg.out_dir)
    poly = cfg.polygon()
    h = cfg.perturbation_field(poly)
    rows, slope = taylor_remainder(
        poly, cfg.outer, cfg.contrast, cfg.currents[0], h, cfg.taylor_t,
        hmax=cfg.hmax, mesh_kwargs={"grading": cfg.grading, "levels": cfg.levels},
        threads=cfg.threads,
    )
    table = []
    for j, (t, r) in enumerate(rows):
        sub = [(tt, rr) for tt, rr in rows[: j + 1] if tt > 0 and rr > 0]
        if len(sub) >= 2:
            ts, rs = zip(*sub)
            running = float(np.polyfit(np.log(ts), np.log(rs), 1)[0])
        else:
            running = float("nan")
        table.append((t, r, running))
    outdir.mkdir(parents=True, exist_ok=True)
    _write_csv(outdir / "taylor.csv", ["t", "remainder", "slope_running"], table)
    if cfg.svg:
        ts = [t for t, r, _ in table if t > 0]
        rs = [r for t, r, _ in table if t > 0]
        _svg_plot(outdir / "taylor.svg", [("remainder", ts, rs)],
                  title="Taylor remainder vs t", logx=True, logy=True)
    print(f"taylor slope: {_fmt(slope)}")
    return 0 if 1.8 <= slope <= 2.2 else 1


def cmd_corner_fit(args, cfg):
    outdir = Path(cfg.out_dir)
    poly, _, mesh = _prepare(cfg)
    solver = ForwardSolver(mesh, cfg.contrast)
    u = solver.solve_current(fourier_current(mesh, *cfg.currents[0]))
    spectrum = build_spectrum(poly.alphas, cfg.contrast)
    fits = corner_probe_fits(mesh, poly, spectrum, u)
    rows = [
        (f.vertex, f.beta1, f.gamma1_fit, spectrum.gamma1(f.vertex), f.spread)
        for f in fits
    ]
    header = ["vertex", "beta1", "gamma1_fit", "gamma1_exact", "spread"]
    print(",".join(header))
    for row in rows:
        print(",".join(_fmt(v) for v in row))
    outdir.mkdir(parents=True, exist_ok=True)
    _write_csv(outdir / "corner_fit.csv", header, rows)
    return 0


def cmd_verify(args, cfg):
    overrides = {
        "polygon": cfg.polygon_vertices,
        "k": cfg.contrast.k if cfg.contrast.is_finite else 2.0,
        "hmax": cfg.hmax,
        "grading": cfg.grading,
        "levels": cfg.levels,
        "seed": cfg.seed,
        "current": cfg.currents[0],
    }
    if cfg.checks:
        overrides["checks"] = cfg.checks
    if cfg.route_hmax:
        overrides["route_hmax"] = cfg.route_hmax
    report, results, timings = run_verification_campaign(overrides)
    outdir = Path(cfg.out_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "report.txt").write_text(report)
    print(report, end="")
    for name, dt in timings.items():
        print(f"# timing {name}: {dt:.1f}s", file=sys.stderr)
    return 0 if all(r.passed for r in results) else 1


def cmd_reconstruct(args, cfg):
    outdir = Path(cfg.out_dir)
    truth = cfg.truth_polygon()
    if truth is None:
        base = np.asarray(cfg.polygon_vertices, dtype=float)
        base[0] += np.array([0.03, 0.0])
        truth = build_polygon(base, outer=cfg.outer)
    initial = cfg.polygon()
    dmesh = generate_mesh(truth, cfg.outer, hmax=cfg.hmax / 2, grading=cfg.grading,
                          levels=cfg.levels + 1, seed=cfg.seed + 3)
    rng = np.random.default_rng(cfg.seed + 17)
    data = []
    specs = cfg.currents if len(cfg.currents) >= 2 else [(1, "cos"), (1, "sin")]
    for spec in specs:
        u = solve_forward(dmesh, cfg.contrast, fourier_current(dmesh, *spec))
        bf = boundary_trace(u)
        if cfg.noise > 0:
            scale = bf.norm() / np.sqrt(float(cfg.outer.perimeter))
            bf = BoundaryFunction(
                dmesh, bf.values + cfg.noise * scale * rng.standard_normal(len(bf.values)),
                normalize=True,
            )
        data.append((spec, bf))
    state = reconstruct(data, initial, cfg.outer, cfg.contrast, hmax=max(cfg.hmax, 0.025))
    outdir.mkdir(parents=True, exist_ok=True)
    _write_csv(outdir / "reconstruction_log.csv",
               ["iter", "residual", "damping", "max_vertex_update"], state.history)
    _write_csv(outdir / "reconstructed_vertices.csv", ["x", "y"],
               [tuple(v) for v in state.vertices])
    err = float(np.abs(state.vertices - truth.vertices).max())
    print(f"reconstruction finished: iterations={state.iterations} "
          f"residual={_fmt(state.residual)} max_vertex_error={_fmt(err)}")
    return 0


COMMANDS = {
    "gamma": cmd_gamma,
    "forward": cmd_forward,
    "shape-derivative": cmd_shape_derivative,
    "transmission": cmd_transmission,
    "taylor": cmd_taylor,
    "corner-fit": cmd_corner_fit,
    "verify": cmd_verify,
    "reconstruct": cmd_reconstruct,
}


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="polyshape",
        description="shape derivatives of conductivity measurements for polygonal inclusions",
    )
    sub = parser.add_subparsers(dest="command")
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=str, default=None)
        p.add_argument("--out", type=str, default=None)
        p.add_argument("--hmax", type=float, default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--threads", type=int, default=None)
        p.add_argument("--svg", action="store_true")
        if name == "gamma":
            p.add_argument("--alpha", nargs="*", default=None)
            p.add_argument("--k", type=float, default=None)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0,) else 0
    if args.command is None:
        parser.print_usage()
        return 2
    if args.config is not None and not os.path.exists(args.config):
        print(f"config file not found: {args.config}", file=sys.stderr)
        return 2
    try:
        cfg = load_config(args.config)
    except Exception as exc:
        print(f"bad config: {exc}", file=sys.stderr)
        return 2
    if args.out:
        cfg.out_dir = args.out
    if args.hmax:
        cfg.hmax = args.hmax
    if args.seed is not None:
        cfg.seed = args.seed
    if args.svg:
        cfg.svg = True
    threads = args.threads if args.threads else os.environ.get("POLYSHAPE_THREADS")
    cfg.threads = int(threads) if threads else 1
    try:
        return COMMANDS[args.command](args, cfg)
    except BrokenPipeError:
        return 1


if __name__ == "__main__":
    sys.exit(main())
