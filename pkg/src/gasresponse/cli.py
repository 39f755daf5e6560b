"""Command-line entry point ``gasresponse``.

Every command writes its artifacts into ``--out`` together with
``manifest.json`` listing each file with its SHA-256, the SHA-256 of every
input file, the tool version and free-form notes.  Outputs depend only on
the inputs and ``--seed``.

Exit status: 0 success, 1 other library error, 2 configuration error,
3 numerical accuracy error, 4 resolution error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
from pathlib import Path
import sys

import numpy as np

from . import __version__
from .config import GridSpec, load_distribution, load_grid, load_perturbation, load_potential
from .distributions import Family, MomentumDistribution, gcheck_weighted_norm
from .errors import (
    AccuracyError,
    ConfigError,
    GasResponseError,
    IntegrationError,
    ParameterDomainError,
    ResolutionError,
)
from .heatmap import render_heatmap

__all__ = ["main", "build_parser", "COMMANDS", "EXIT_CODES"]

COMMANDS = ("lindhard-eval", "stability-check", "epsilon-g", "simulate-linear",
            "simulate-lattice", "second-order-check", "figure1")
EXIT_CODES = {"ok": 0, "error": 1, "config": 2, "accuracy": 3, "resolution": 4}
THREADS_ENV = "GASRESPONSE_THREADS"

FIG1_OMEGA = (-20.0, 20.0, 10)
FIG1_K = (0.6, 6.0, 10)


class _Run:
    """Collects artifacts, input hashes and notes for the manifest."""

    def __init__(self, command, out, seed):
        self.command = command
        self.out = Path(out)
        self.seed = seed
        self.inputs = {}
        self.artifacts = []
        self.notes = []

    def add_input(self, label, path):
        if path is not None and Path(path).is_file():
            self.inputs[label] = {"path": Path(path).name, "sha256": _sha256(Path(path))}

    def path(self, name):
        p = self.out / name
        self.artifacts.append(p)
        return p

    def write_text(self, name, text):
        self.path(name).write_text(text)

    def manifest(self):
        arts = []
        for p in self.artifacts:
            arts.append({"file": p.name, "sha256": _sha256(p), "bytes": p.stat().st_size})
        doc = {
            "command": self.command,
            "tool": "gasresponse",
            "version": __version__,
            "seed": self.seed,
            "inputs": self.inputs,
            "artifacts": arts,
            "notes": self.notes,
        }
        text = json.dumps(doc, sort_keys=True, indent=2) + "\n"
        (self.out / "manifest.json").write_text(text)
        return doc


def _sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _kv(items):
    return "".join(f"{k}={v}\n" for k, v in items)


def _r(x):
    return repr(float(x))


def _set_threads():
    raw = os.environ.get(THREADS_ENV)
    if raw is None:
        return None
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=n)


# --- shared loaders ---------------------------------------------------------------------------

def _dist(args, run, default=None):
    if args.dist is None:
        if default is None:
            raise ConfigError("--dist is required for this command")
        return default
    run.add_input("dist", args.dist)
    return load_distribution(args.dist)


def _pot(args, run, dimension):
    if args.pot is None:
        raise ConfigError("--pot is required for this command")
    run.add_input("pot", args.pot)
    return load_potential(args.pot, dimension)


def _grid(args, run) -> GridSpec:
    if args.grid is not None and Path(args.grid).is_file():
        run.add_input("grid", args.grid)
    spec = load_grid(args.grid)
    if args.grid is not None:
        run.notes.append(f"grid spec source: {spec.source}")
    return spec


def _require_grid(args):
    if args.grid is None:
        raise ConfigError("missing field 'grid': pass --grid (file or key=value list)")


def _linspace(spec, prefix, default=None):
    if default is not None and not any(k.startswith(prefix + "_") for k in spec.fields):
        lo, hi, n = default
    else:
        lo = spec.require(f"{prefix}_min")
        hi = spec.require(f"{prefix}_max")
        n = spec.require(f"n_{prefix}", int)
    if n < 1 or (n > 1 and not hi > lo):
        raise ConfigError(f"grid spec: need n_{prefix} >= 1 and {prefix}_max > {prefix}_min")
    return np.linspace(lo, hi, n)


def _lindhard_table(dist, omega, kmag, tol):
    """Values, route name and error estimates on the product grid (omega outer)."""
    from .lindhard import Route, m_fermi_1d, m_fermi_2d, m_fermi_d, m_general_grid

    W, K = np.meshgrid(omega, kmag, indexing="ij")
    w, k = W.ravel(), K.ravel()
    if np.any(k <= 0):
        raise ConfigError("grid spec: momenta must be > 0")
    if dist.family is Family.FERMI_ZERO_T:
        fn = {1: m_fermi_1d, 2: m_fermi_2d}.get(dist.dimension)
        vals = []
        for wi, ki in zip(w, k):
            v = fn(dist.mu, wi, ki) if fn else m_fermi_d(dist.dimension, dist.mu, wi, ki)
            vals.append(v.value if hasattr(v, "value") else complex(v))
        vals = np.array(vals, dtype=complex)
        errs = np.zeros(vals.shape)
        route = Route.CLOSED_FORM
    else:
        vals, errs = m_general_grid(dist, w, k)
        route = Route.FPRIME_INTEGRAL
    worst = float(np.max(errs)) if errs.size else 0.0
    if worst > tol:
        raise AccuracyError(f"Lindhard estimate error {worst:.3g} exceeds --tol {tol:g}", achieved=worst)
    return w, k, vals, route, errs


# --- commands ---------------------------------------------------------------------------------

def cmd_lindhard_eval(args, run):
    from .lindhard import write_grid_csv

    dist = _dist(args, run)
    _require_grid(args)
    spec = _grid(args, run)
    omega = _linspace(spec, "omega")
    kmag = _linspace(spec, "k")
    w, k, vals, route, errs = _lindhard_table(dist, omega, kmag, args.tol)
    write_grid_csv(run.path("lindhard_grid.csv"), w, k, vals, route, errs)
    run.write_text("lindhard_report.txt", _kv([
        ("distribution", repr(dist)),
        ("route", route.value),
        ("n_points", str(w.size)),
        ("max_est_error", _r(np.max(errs))),
    ]))


def cmd_stability_check(args, run):
    from .stability import ScanGrid, stability_margin, write_scan_csv

    dist = _dist(args, run)
    pot = _pot(args, run, dist.dimension)
    spec = _grid(args, run)
    kw = {}
    for name, field in ScanGrid.__dataclass_fields__.items():
        if name in spec:
            kw[name] = spec.require(name, int if field.type in ("int", int) else float)
    try:
        grid = ScanGrid(**kw)
    except ParameterDomainError as exc:
        raise ConfigError(f"grid spec: {exc}") from exc
    report = stability_margin(dist, pot, grid)
    run.write_text("stability_report.txt", report.to_text())
    write_scan_csv(report, run.path("stability_scan.csv"))


def cmd_epsilon_g(args, run):
    from .stability import epsilon_g_details

    dist = _dist(args, run)
    res = epsilon_g_details(dist)
    if res.est_error > args.tol:
        raise AccuracyError(f"epsilon_g error estimate {res.est_error:.3g} exceeds --tol", achieved=res.est_error)
    norm = gcheck_weighted_norm(dist)
    run.write_text("epsilon_g.txt", _kv([
        ("distribution", repr(dist)),
        ("epsilon_g", _r(res.value)),
        ("a_min", _r(res.a_min)),
        ("moment_min", _r(res.moment_min)),
        ("gcheck_l1_norm", _r(norm)),
        ("est_error", _r(res.est_error)),
    ]))


def _perturbation(args, run, rng):
    from .dynamics.perturbation import FinitePerturbation

    if args.perturbation is not None:
        run.add_input("perturbation", args.perturbation)
        return load_perturbation(args.perturbation)
    rank = int(rng.integers(1, 4))
    params = []
    for _ in range(rank):
        cx, cy = rng.uniform(-1.0, 1.0, 2)
        px, py = rng.uniform(-0.3, 0.3, 2)
        params.append((float(cx), float(cy), float(rng.uniform(0.8, 1.5)), float(px), float(py),
                       float(rng.uniform(-0.5, 0.5))))
    run.notes.append(f"perturbation drawn from seed {args.seed}: rank {rank}")
    return FinitePerturbation.gaussians(params)


def cmd_simulate_linear(args, run):
    from .dynamics import SpaceTimeGrid, free_density, lattice_symbol, linearized_response, strichartz_ratio

    dist = _dist(args, run)
    pot = _pot(args, run, dist.dimension)
    _require_grid(args)
    spec = _grid(args, run)
    try:
        grid = SpaceTimeGrid(spec.require("n_t", int), spec.require("n_x", int),
                             spec.require("T"), spec.require("L"), spec.get("t_start", float, 0.0))
    except ParameterDomainError as exc:
        raise ConfigError(f"grid spec: {exc}") from exc
    q0 = _perturbation(args, run, np.random.default_rng(args.seed))
    rho = linearized_response(q0, dist, pot, grid)
    free = free_density(q0, grid)
    sym = lattice_symbol(dist, pot, grid)
    margin, where = sym.margin()
    with open(run.path("linear_response.csv"), "w") as fh:
        fh.write("t,free_l2,linear_l2\n")
        area = grid.dx * grid.dx
        for i, t in enumerate(grid.t):
            fh.write(f"{t!r},{math.sqrt(float(np.sum(free.values[i] ** 2)) * area)!r},"
                     f"{math.sqrt(float(np.sum(rho.values[i] ** 2)) * area)!r}\n")
    run.write_text("linear_report.txt", _kv([
        ("lattice_margin", _r(margin)),
        ("lattice_margin_omega", _r(where.omega)),
        ("lattice_margin_kmag", _r(where.kmag)),
        ("max_abs_multiplier", _r(sym.sup())),
        ("free_l2", _r(free.l2_norm())),
        ("linear_l2", _r(rho.l2_norm())),
        ("strichartz_ratio", _r(strichartz_ratio(q0))),
        ("rank", str(q0.rank)),
    ]))
    run.notes.append("periodic space-time box stands in for R x R^2")


def cmd_simulate_lattice(args, run):
    from .dynamics import LatticeState, lattice_hartree_evolve, write_trajectory_csv
    from .dynamics.lattice import QUALITATIVE_NOTE

    dist = _dist(args, run)
    pot = _pot(args, run, dist.dimension)
    spec = _grid(args, run)
    M = spec.get("M", int, 16)
    L = spec.get("L", float, 16 * math.pi)
    horizon = spec.get("horizon", float, 10.0)
    dt = spec.get("dt", float, 0.25)
    q0 = _perturbation(args, run, np.random.default_rng(args.seed))
    try:
        state = LatticeState.build(dist, pot, M=M, L_len=L, q0=q0)
        traj = lattice_hartree_evolve(state, horizon, dt)
    except ParameterDomainError as exc:
        raise ConfigError(f"grid spec: {exc}") from exc
    write_trajectory_csv(traj, run.path("trajectory.csv"))
    run.write_text("lattice_report.txt", _kv([
        ("modes", str(state.lattice.size)),
        ("box_length", _r(L)),
        ("horizon", _r(horizon)),
        ("dt", _r(dt)),
        ("trace_drift", _r(traj.trace_drift)),
        ("spec_drift", _r(traj.max_spec_drift)),
        ("note", QUALITATIVE_NOTE),
    ]))
    run.notes.append(QUALITATIVE_NOTE)


def cmd_second_order_check(args, run):
    from .second_order import (
        SecondOrderKernel,
        det_hls_check,
        random_gaussian_triples,
        reduction_identity_sides,
        reduction_table,
        universal_integral,
        write_det_hls_csv,
        write_reduction_csv,
    )

    dist = _dist(args, run)
    pot = _pot(args, run, dist.dimension)
    spec = _grid(args, run)
    n_pairs = spec.get("n_pairs", int, 10)
    n_triples = spec.get("n_triples", int, 100)
    kern = SecondOrderKernel(dist, pot)
    rng = np.random.default_rng(args.seed)
    pairs = []
    while len(pairs) < n_pairs:
        k, l = rng.normal(size=2), rng.normal(size=2)
        if abs(k[0] * l[1] - k[1] * l[0]) > 0.1:
            pairs.append((k, l))
    rows = reduction_table(kern, pairs)
    write_reduction_csv(rows, run.path("second_order_reduction.csv"))
    worst_identity = 0.0
    for k, l in pairs:
        lhs, rhs = reduction_identity_sides(kern, k, l)
        worst_identity = max(worst_identity, abs(lhs - rhs) / rhs)
    hls = det_hls_check(random_gaussian_triples(n_triples, seed=args.seed))
    write_det_hls_csv(hls, run.path("det_hls.csv"))
    run.write_text("second_order_report.txt", _kv([
        ("universal_integral", _r(universal_integral(kern))),
        ("max_identity_rel_error", _r(worst_identity)),
        ("max_direct_over_bound", _r(max(r.ratio for r in rows))),
        ("det_hls_max_ratio", _r(hls.max_ratio)),
        ("det_hls_max_dilation_defect", _r(hls.max_dilation_defect)),
        ("det_hls_max_delta_seq", _r(hls.max_delta_seq)),
    ]))


def cmd_figure1(args, run):
    from .lindhard import write_grid_csv

    dist = _dist(args, run, default=MomentumDistribution.fermi_dirac(100.0, 1.0, 2))
    spec = _grid(args, run)
    omega = _linspace(spec, "omega", FIG1_OMEGA)
    kmag = _linspace(spec, "k", FIG1_K)
    w, k, vals, route, errs = _lindhard_table(dist, omega, kmag, args.tol)
    write_grid_csv(run.path("figure1_grid.csv"), w, k, vals, route, errs)
    # rows: k from largest (top) to smallest; columns: omega increasing
    table = vals.real.reshape(omega.size, kmag.size).T[::-1]
    pgm, csv_path, note = render_heatmap(table, run.out / "figure1.pgm")
    run.artifacts += [pgm, csv_path]
    run.notes.append(f"figure1: Re m_f for {dist!r}; rows k={kmag[-1]:g}..{kmag[0]:g} top to bottom, "
                     f"columns omega={omega[0]:g}..{omega[-1]:g}; linear gray scale "
                     f"[{float(table.min())!r}, {float(table.max())!r}]")
    run.notes.append("axis ranges and gray scale are fixed defaults of this tool")
    if note:
        run.notes.append(note)


HANDLERS = {
    "lindhard-eval": cmd_lindhard_eval,
    "stability-check": cmd_stability_check,
    "epsilon-g": cmd_epsilon_g,
    "simulate-linear": cmd_simulate_linear,
    "simulate-lattice": cmd_simulate_lattice,
    "second-order-check": cmd_second_order_check,
    "figure1": cmd_figure1,
}


def build_parser():
    p = argparse.ArgumentParser(prog="gasresponse",
                                description="Linear response of homogeneous quantum gases.")
    p.add_argument("--version", action="version", version=f"gasresponse {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--dist", help="distribution config file")
        s.add_argument("--pot", help="potential config file")
        s.add_argument("--grid", help="grid config file or inline key=value,... list")
        s.add_argument("--out", required=True, help="output directory")
        s.add_argument("--seed", type=int, default=0, help="seed for sampled checks")
        s.add_argument("--tol", type=float, default=1e-6, help="accepted numerical error")
        if name in ("simulate-linear", "simulate-lattice"):
            s.add_argument("--perturbation", help="perturbation config file ([orbital ...] sections)")
    return p


def _classify(exc):
    if isinstance(exc, (ConfigError, ParameterDomainError)):
        return EXIT_CODES["config"]
    if isinstance(exc, (AccuracyError, IntegrationError)):
        return EXIT_CODES["accuracy"]
    if isinstance(exc, ResolutionError):
        return EXIT_CODES["resolution"]
    return EXIT_CODES["error"]


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        limiter = _set_threads()
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        if not os.access(out, os.W_OK):
            raise ConfigError(f"output directory {out} is not writable")
        run = _Run(args.command, out, args.seed)
        try:
            HANDLERS[args.command](args, run)
        finally:
            if limiter is not None:
                limiter.unregister()
        run.manifest()
    except GasResponseError as exc:
        code = _classify(exc)
        print(f"gasresponse {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return code
    return EXIT_CODES["ok"]


if __name__ == "__main__":
    sys.exit(main())
