"""Command-line interface.

Every CSV the tool writes starts with comment lines recording the tool version,
a timestamp, the exact command, and the seed, so any output can be traced back
to its invocation. Re-running a command with the same flags and seed reproduces
the CSV body byte for byte (only the timestamp line differs). Exit codes:
0 success, 1 domain error (message on stderr), 2 usage error.
"""

from __future__ import annotations

import argparse
import datetime
import math
import os
import shlex
import sys
from dataclasses import dataclass

import numpy as np

from . import __version__
from .diagnostics import (
    InsufficientSamplesError,
    convergence_study,
    decay_study,
)
from .geom import (
    DuplicateNodesError,
    NodeFileError,
    gen_fibonacci,
    gen_icosahedral,
    gen_icosahedral_freq,
    load_nodes,
    mesh_stats,
    save_nodes,
    sphere_point,
)
from .gramstudy import CAP_GRAM_ORDER, cap_gram_analytic, cap_gram_compare, min_eig_ratio
from .kernel import KernelSpec, evaluate_expansion
from .lagrange import ConstraintViolationError
from .locallag import (
    FootprintRule,
    StencilFailureError,
    build_local_basis,
    default_footprint,
    interpolate_preconditioned,
    load_basis,
    save_basis,
)
from .neighbors import build_index
from .solver import (
    GmresNotConvergedError,
    NonUnisolventError,
    SingularSystemError,
    sym_eig_minmax,
)

DOMAIN_ERRORS = (
    NodeFileError,
    DuplicateNodesError,
    SingularSystemError,
    NonUnisolventError,
    StencilFailureError,
    GmresNotConvergedError,
    ConstraintViolationError,
    InsufficientSamplesError,
    ValueError,
    OSError,
)


@dataclass
class RunConfig:
    """Snapshot of one invocation, embedded in every output CSV."""

    argv: list
    seed: int
    threads: int
    version: str = __version__

    def comment_lines(self):
        cmd = " ".join(shlex.quote(str(a)) for a in self.argv)
        stamp = datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")
        return [
            f"# spherelag {self.version}",
            f"# timestamp: {stamp}",
            f"# command: spherelag {cmd}",
            f"# seed: {self.seed}",
        ]


def _fmt(value):
    if isinstance(value, float):
        return repr(float(value))  # plain float repr even for numpy scalars
    return str(value)


def write_csv(dest, header, rows, config, extra=()):
    lines = config.comment_lines()
    lines += [f"# {item}" for item in extra]
    lines.append(",".join(header))
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    text = "\n".join(lines) + "\n"
    if dest in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(dest, "w", encoding="utf-8") as fh:
            fh.write(text)


def _load_data(path, n, rng):
    if path is None:
        return rng.uniform(-1.0, 1.0, size=n)
    data = np.loadtxt(path, comments="#", ndmin=1, dtype=np.float64)
    if data.shape != (n,):
        raise ValueError(f"{path}: expected {n} values, found {data.shape[0]}")
    return data


def _save_coeffs(path, a, c, config, spec, n):
    rows = [("a", i, float(v)) for i, v in enumerate(a)]
    rows += [("c", j, float(v)) for j, v in enumerate(c)]
    write_csv(path, ["kind", "idx", "value"], rows, config, extra=[f"N={n} m={spec.m}"])


def _load_coeffs(path, n, spec):
    a = np.zeros(n)
    c = np.zeros(spec.poly_dim)
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#") or line.startswith("kind,"):
                continue
            kind, idx, value = line.split(",")
            if kind == "a":
                a[int(idx)] = float(value)
            elif kind == "c":
                c[int(idx)] = float(value)
            else:
                raise ValueError(f"{path}: unknown coefficient kind {kind!r}")
    return a, c


def _footprint_from_args(args, n_nodes, spec):
    chosen = [x for x in (args.n, args.M, args.radius_K) if x is not None]
    if len(chosen) > 1:
        raise ValueError("give at most one of --n, --M, --radius-K")
    if args.n is not None:
        return FootprintRule(fixed_n=int(args.n))
    if args.M is not None:
        return FootprintRule(mode="count", M=float(args.M))
    if args.radius_K is not None:
        return FootprintRule(mode="radius", M=float(args.radius_K))
    return FootprintRule(fixed_n=default_footprint(n_nodes, spec.m))


# ---- subcommands ---- #

def cmd_nodes_gen(args, config):
    if args.kind == "icosahedral":
        if (args.level is None) == (args.freq is None):
            raise ValueError("icosahedral generation needs exactly one of --level / --freq")
        nodes = gen_icosahedral(args.level) if args.level is not None else gen_icosahedral_freq(args.freq)
    else:
        if args.n is None:
            raise ValueError("fibonacci generation needs --n")
        nodes = gen_fibonacci(args.n)
    save_nodes(args.out, nodes)
    return 0


def cmd_nodes_stats(args, config):
    nodes = load_nodes(args.file)
    stats = mesh_stats(nodes, probe_n=args.probe)
    write_csv(
        args.out,
        ["n_nodes", "h", "q", "rho", "probe_n"],
        [(len(nodes), stats.h, stats.q, stats.rho, stats.n_probe)],
        config,
    )
    return 0


def cmd_lagrange(args, config):
    nodes = load_nodes(args.nodes)
    spec = KernelSpec(args.m)
    study = decay_study(nodes, spec, center_idx=args.center_idx)
    extra = [
        f"center_idx={study.center_idx} h={study.h!r} q={study.q!r}",
        f"fit_function: nu={study.fit_function.nu!r} C={study.fit_function.C!r} "
        f"window={study.fit_function.window} r2={study.fit_function.r2!r}",
        f"fit_coefficient: nu={study.fit_coefficient.nu!r} C={study.fit_coefficient.C!r} "
        f"window={study.fit_coefficient.window} r2={study.fit_coefficient.r2!r}",
    ]
    rows = [("function", float(t), float(v)) for t, v in study.function_samples]
    rows += [("coefficient", float(t), float(v)) for t, v in study.coefficient_samples]
    write_csv(args.out_csv, ["kind", "t", "value"], rows, config, extra=extra)
    return 0


def cmd_build(args, config):
    nodes = load_nodes(args.nodes)
    spec = KernelSpec(args.m)
    rule = _footprint_from_args(args, len(nodes), spec)
    basis = build_local_basis(
        nodes, spec, rule, grow_on_failure=args.grow_on_failure, threads=config.threads
    )
    save_basis(args.out, basis, fmt=args.format)
    return 0


def cmd_solve(args, config):
    nodes = load_nodes(args.nodes)
    spec = KernelSpec(args.m)
    basis = load_basis(args.basis, nodes, spec)
    rng = np.random.default_rng(config.seed)
    data = _load_data(args.data, len(nodes), rng)

    def report_rows(report):
        return [(i, float(r)) for i, r in enumerate(report.residual_history)]

    def report_extra(report):
        return [
            f"n_nodes={len(nodes)} m={spec.m} tol={args.tol!r} maxit={args.maxit}",
            f"iterations={report.iterations} converged={report.converged}",
            f"final_relres={report.final_relres!r}",
            f"final_check={report.final_check!r}",
        ]

    try:
        a, c, report = interpolate_preconditioned(
            nodes, spec, basis, data, tol=args.tol, maxit=args.maxit, x0=args.x0
        )
    except GmresNotConvergedError as exc:
        if args.report:
            write_csv(
                args.report,
                ["iteration", "relres"],
                report_rows(exc.report),
                config,
                extra=report_extra(exc.report),
            )
        raise
    if args.out:
        _save_coeffs(args.out, a, c, config, spec, len(nodes))
    if args.report:
        write_csv(
            args.report,
            ["iteration", "relres"],
            report_rows(report),
            config,
            extra=report_extra(report),
        )
    return 0


def _parse_grid(text):
    if not text.startswith("grid:"):
        return None
    try:
        n_lat, n_lon = text[5:].split("x")
        return int(n_lat), int(n_lon)
    except ValueError:
        raise ValueError(f"bad grid spec {text!r}, expected grid:NLATxNLON") from None


def cmd_eval(args, config):
    nodes = load_nodes(args.nodes)
    spec = KernelSpec(args.m)
    a, c = _load_coeffs(args.coeffs, len(nodes), spec)
    grid = _parse_grid(args.at)
    if grid is not None:
        n_lat, n_lon = grid
        lats = np.linspace(-90.0, 90.0, n_lat)
        lons = np.linspace(0.0, 360.0, n_lon, endpoint=False)
        lat_r, lon_r = np.radians(lats), np.radians(lons)
        cos_lat = np.cos(lat_r)
        pts = np.empty((n_lat * n_lon, 3))
        pts[:, 0] = np.outer(cos_lat, np.cos(lon_r)).ravel()
        pts[:, 1] = np.outer(cos_lat, np.sin(lon_r)).ravel()
        pts[:, 2] = np.repeat(np.sin(lat_r), n_lon)
        vals = evaluate_expansion(spec, nodes.points, a, c, pts)
        rows = [
            (float(lons[j]), float(lats[i]), float(vals[i * n_lon + j]))
            for i in range(n_lat)
            for j in range(n_lon)
        ]
        write_csv(args.out, ["lon_deg", "lat_deg", "value"], rows, config)
    else:
        where = load_nodes(args.at)
        vals = evaluate_expansion(spec, nodes.points, a, c, where.points)
        rows = [
            (float(x), float(y), float(z), float(v))
            for (x, y, z), v in zip(where.points, vals)
        ]
        write_csv(args.out, ["x", "y", "z", "value"], rows, config)
    return 0


def cmd_gram(args, config):
    G = cap_gram_analytic(args.r)
    mu_ratio = min_eig_ratio(args.r)
    lam_min, lam_max = sym_eig_minmax(G)
    extra = [
        f"r={args.r!r}",
        f"lambda_min={lam_min!r} lambda_max={lam_max!r}",
        f"min_eig_ratio_vs_r4_over_256pi={mu_ratio!r}",
        f"order={CAP_GRAM_ORDER}",
    ]
    rows = [
        (i, j, float(G[i, j])) for i in range(4) for j in range(4)
    ]
    if args.nodes:
        nodes = load_nodes(args.nodes)
        lon, lat = (float(x) for x in args.cap_center.split(","))
        center = sphere_point(
            math.cos(math.radians(lat)) * math.cos(math.radians(lon)),
            math.cos(math.radians(lat)) * math.sin(math.radians(lon)),
            math.sin(math.radians(lat)),
        )
        from .geom import geodesic_distance

        inside = geodesic_distance(center, nodes.points) <= args.r
        report = cap_gram_compare(nodes.points[inside], center, args.r)
        extra += [
            f"discrete: n_points={report.n_points} norm_inv={report.norm_inv_discrete!r}",
            f"discrete: bound={report.bound!r} satisfied={report.satisfied}",
            f"discrete: h_cap={report.h_cap!r} h_ratio={report.h_ratio!r} "
            f"within_hypothesis={report.within_hypothesis}",
        ]
    write_csv(args.out, ["i", "j", "G"], rows, config, extra=extra)
    return 0


def _study_decay(args, config):
    nodes = load_nodes(args.nodes)
    spec = KernelSpec(args.m)
    study = decay_study(nodes, spec, center_idx=args.center_idx)
    extra = [
        f"center_idx={study.center_idx} h={study.h!r} q={study.q!r}",
        f"nu_function={study.fit_function.nu!r} C_function={study.fit_function.C!r} "
        f"window={study.fit_function.window}",
        f"nu_coefficient={study.fit_coefficient.nu!r} C_coefficient={study.fit_coefficient.C!r} "
        f"window={study.fit_coefficient.window}",
        f"plateau_fraction_function={study.plateau_fraction_function!r}",
        f"plateau_fraction_coefficient={study.plateau_fraction_coefficient!r}",
    ]
    rows = [("function", float(t), float(v)) for t, v in study.function_samples]
    rows += [("coefficient", float(t), float(v)) for t, v in study.coefficient_samples]
    write_csv(args.out, ["kind", "t", "value"], rows, config, extra=extra)
    return 0


_FIELDS = {
    "one": lambda pts: np.ones(pts.shape[0]),
    "linear": lambda pts: 0.3 + pts[:, 0] - 2.0 * pts[:, 1] + 0.5 * pts[:, 2],
    "expz": lambda pts: np.exp(pts[:, 2]),
}


def _generator(kind):
    if kind == "fibonacci":
        return gen_fibonacci
    if kind == "icosahedral":
        # interpret the size as a node count of the 10*4^level + 2 family
        def gen(n):
            level = round(math.log((n - 2) / 10, 4))
            return gen_icosahedral(level)

        return gen
    raise ValueError(f"unknown node kind {kind!r}")


def _study_convergence(args, config):
    spec = KernelSpec(args.m)
    sizes = [int(s) for s in args.sizes.split(",")]
    rows = convergence_study(_generator(args.kind), sizes, spec, _FIELDS[args.f])
    write_csv(
        args.out,
        ["n_nodes", "h", "err_interp", "err_quasi", "order_interp", "order_quasi"],
        [
            (r.n_nodes, r.h, r.err_interp, r.err_quasi, r.order_interp, r.order_quasi)
            for r in rows
        ],
        config,
        extra=[f"kind={args.kind} f={args.f} m={spec.m}"],
    )
    return 0


def _study_table1(args, config):
    spec = KernelSpec(args.m)
    sizes = [int(s) for s in args.sizes.split(",")]
    gen = _generator(args.kind)
    rows = []
    for n in sizes:
        study = decay_study(gen(n), spec)
        rows.append(
            (
                n,
                study.h,
                study.h / study.q,
                study.fit_function.nu,
                study.fit_function.C,
                study.fit_coefficient.nu,
                study.fit_coefficient.C,
            )
        )
    write_csv(
        args.out,
        ["n_nodes", "h", "rho", "nu_L", "C_L", "nu_c", "C_c"],
        rows,
        config,
        extra=[f"kind={args.kind} m={spec.m}"],
    )
    return 0


def cmd_study(args, config):
    if args.what == "decay":
        return _study_decay(args, config)
    if args.what == "convergence":
        return _study_convergence(args, config)
    return _study_table1(args, config)


# ---- parser ---- #

def build_parser():
    parser = argparse.ArgumentParser(
        prog="spherelag",
        description="Sparse local Lagrange bases for surface-spline interpolation on the sphere.",
    )
    parser.add_argument("--seed", type=int, default=0, help="RNG seed (default 0)")
    parser.add_argument(
        "--threads",
        type=int,
        default=None,
        help="worker cap for parallel sections (default SPHERELAG_THREADS or all cores)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    nodes = sub.add_parser("nodes", help="generate node sets and report mesh statistics")
    nodes_sub = nodes.add_subparsers(dest="nodes_command", required=True)
    gen = nodes_sub.add_parser("gen", help="write a node file")
    gen.add_argument("--kind", choices=["icosahedral", "fibonacci"], required=True)
    gen.add_argument("--level", type=int, help="icosahedral bisection level (N = 10*4^level+2)")
    gen.add_argument("--freq", type=int, help="icosahedral subdivision frequency (N = 10*freq^2+2)")
    gen.add_argument("--n", type=int, help="fibonacci node count")
    gen.add_argument("--out", required=True)
    gen.set_defaults(func=cmd_nodes_gen)
    stats = nodes_sub.add_parser("stats", help="h, q, rho of a node file")
    stats.add_argument("file")
    stats.add_argument("--probe", type=int, default=None, help="probe count for h")
    stats.add_argument("--out", default=None, help="CSV path (default stdout)")
    stats.set_defaults(func=cmd_nodes_stats)

    lag = sub.add_parser("lagrange", help="decay samples of one full Lagrange function")
    lag.add_argument("--nodes", required=True)
    lag.add_argument("--m", type=int, default=2)
    lag.add_argument("--center-idx", type=int, default=None)
    lag.add_argument("--out-csv", required=True)
    lag.set_defaults(func=cmd_lagrange)

    build = sub.add_parser("build", help="build and save a local Lagrange basis")
    build.add_argument("--nodes", required=True)
    build.add_argument("--m", type=int, default=2)
    build.add_argument("--M", type=float, default=None, help="count rule multiplier (natural log)")
    build.add_argument("--n", type=int, default=None, help="fixed footprint size")
    build.add_argument("--radius-K", type=float, default=None, help="radius rule K*h*log(1/h)")
    build.add_argument("--grow-on-failure", action="store_true")
    build.add_argument("--format", choices=["npz", "csv"], default="npz")
    build.add_argument("--out", required=True)
    build.set_defaults(func=cmd_build)

    solve = sub.add_parser("solve", help="preconditioned GMRES interpolation solve")
    solve.add_argument("--nodes", required=True)
    solve.add_argument("--basis", required=True)
    solve.add_argument("--m", type=int, default=2)
    solve.add_argument("--data", default=None, help="value file; default seeded uniform [-1,1]")
    solve.add_argument("--tol", type=float, default=1e-6)
    solve.add_argument("--maxit", type=int, default=200)
    solve.add_argument("--x0", choices=["data", "zero"], default="data")
    solve.add_argument("--out", default=None, help="coefficient CSV")
    solve.add_argument("--report", default=None, help="iteration report CSV")
    solve.set_defaults(func=cmd_solve)

    ev = sub.add_parser("eval", help="evaluate saved coefficients on a grid or point file")
    ev.add_argument("--nodes", required=True)
    ev.add_argument("--coeffs", required=True)
    ev.add_argument("--m", type=int, default=2)
    ev.add_argument("--at", default="grid:300x600", help="grid:NLATxNLON or a point file")
    ev.add_argument("--out", default=None)
    ev.set_defaults(func=cmd_eval)

    gram = sub.add_parser("gram", help="analytic cap Gram matrix and discrete comparison")
    gram.add_argument("--r", type=float, required=True)
    gram.add_argument("--nodes", default=None)
    gram.add_argument("--cap-center", default="0,90", help="lon,lat degrees (default north pole)")
    gram.add_argument("--out", default=None)
    gram.set_defaults(func=cmd_gram)

    study = sub.add_parser("study", help="decay, convergence, and summary-table studies")
    study.add_argument("what", choices=["decay", "convergence", "table1"])
    study.add_argument("--nodes", default=None)
    study.add_argument("--m", type=int, default=2)
    study.add_argument("--center-idx", type=int, default=None)
    study.add_argument("--kind", choices=["fibonacci", "icosahedral"], default="fibonacci")
    study.add_argument("--sizes", default="400,900,1600")
    study.add_argument("--f", choices=sorted(_FIELDS), default="expz")
    study.add_argument("--out", default=None)
    study.set_defaults(func=cmd_study)
    return parser


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code
    threads = args.threads
    if threads is None:
        env = os.environ.get("SPHERELAG_THREADS")
        threads = int(env) if env else (os.cpu_count() or 1)
    config = RunConfig(argv=argv, seed=args.seed, threads=threads)
    try:
        return args.func(args, config)
    except DOMAIN_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
