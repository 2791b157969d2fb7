"""``ballpack`` command line.

Exit codes: 0 success, 1 validation failed, 2 usage/parse/I-O error,
3 virtual packing without ``--extended``, 4 flow hit a boundary,
5 flow reached ``t_max``, 6 optimizer did not converge.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .curvature import VirtualPackingError, curvature, extended_curvature
from .flow import BoundaryHit, Converged, FlowConfig, FlowConfigError, FlowMode, run as run_flow
from .io import (
    RadiiParseError, digest, fmt, format_manifest, format_report, format_result, now,
    parse_vector, report_csv,
)
from .optimize import MinimizeConfig, chi_estimate, minimize_extended, multi_start, solve_prescribed
from .tet_geometry import GeometryError
from .triangulation import TriangulationError, load_triangulation, validate

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_USAGE = 2
EXIT_VIRTUAL = 3
EXIT_BOUNDARY = 4
EXIT_TIME_LIMIT = 5
EXIT_NOT_CONVERGED = 6


class UsageError(Exception):
    pass


def _positive_float(s: str) -> float:
    try:
        x = float(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {s!r}") from None
    if not (x > 0 and x < float("inf")):
        raise argparse.ArgumentTypeError(f"must be positive and finite: {s}")
    return x


def _positive_int(s: str) -> int:
    try:
        x = int(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {s!r}") from None
    if x < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer: {s}")
    return x


def _seed(s: str) -> int:
    try:
        x = int(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {s!r}") from None
    if not 0 <= x < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must lie in [0, 2^64)")
    return x


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ballpack", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, radii=True):
        sp.add_argument("triangulation", help="triangulation file")
        if radii:
            g = sp.add_mutually_exclusive_group()
            g.add_argument("--radii", help="radii file, one positive value per line")
            g.add_argument("--uniform", type=_positive_float, metavar="R", help="all radii equal R")
        sp.add_argument("--out", help="write output here instead of stdout")
        sp.add_argument("--manifest", help="manifest path (default: OUT.manifest, else stderr)")

    def optimizer(sp):
        sp.add_argument("--grad-tol", type=_positive_float, default=1e-10)
        sp.add_argument("--max-iters", type=_positive_int, default=500)
        sp.add_argument("--shrink", type=_positive_float, default=0.5)
        sp.add_argument("--no-newton", action="store_true")

    sp = sub.add_parser("validate", help="check pseudo-manifold conditions")
    common(sp, radii=False)

    sp = sub.add_parser("curvature", help="per-vertex curvature report")
    common(sp)
    sp.add_argument("--extended", action="store_true", help="use the extended curvature")
    sp.add_argument("--format", choices=("text", "csv"), default="text")

    sp = sub.add_parser("flow", help="run a Yamabe flow and write its trace")
    common(sp)
    mode = sp.add_mutually_exclusive_group()
    mode.add_argument("--mode", choices=[m.value for m in FlowMode], default=None)
    mode.add_argument("--extended", action="store_true", help="shorthand for --mode extended")
    sp.add_argument("--target-curvature", help="target curvature file (prescribed modes)")
    sp.add_argument("--dt-init", type=_positive_float, default=1e-2)
    sp.add_argument("--dt-min", type=_positive_float, default=1e-8)
    sp.add_argument("--dt-max", type=_positive_float, default=0.5)
    sp.add_argument("--t-max", type=_positive_float, default=100.0)
    sp.add_argument("--conv-tol", type=_positive_float, default=1e-8)
    sp.add_argument("--record-every", type=_positive_int, default=1)
    sp.add_argument("--renormalize", action="store_true")

    sp = sub.add_parser("minimize", help="minimize the extended Cooper-Rivin functional")
    common(sp)
    optimizer(sp)

    sp = sub.add_parser("prescribed", help="solve the prescribed curvature problem")
    common(sp)
    optimizer(sp)
    sp.add_argument("--target-curvature", required=True, help="target curvature file")

    sp = sub.add_parser("invariant", help="estimate the extended Yamabe invariant")
    common(sp, radii=False)
    optimizer(sp)
    sp.add_argument("--starts", type=_positive_int, default=8)
    sp.add_argument("--seed", type=_seed, default=0)

    sp = sub.add_parser("chi-estimate", help="ray-sampling estimate of the energy gap")
    common(sp)
    sp.add_argument("--rays", type=_positive_int, default=100)
    sp.add_argument("--samples", type=_positive_int, default=200)
    sp.add_argument("--seed", type=_seed, default=0)
    return p


# --- helpers -----------------------------------------------------------------------

def _read_text(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror or exc}") from None


def _load(args):
    return load_triangulation(_read_text(args.triangulation))


def _radii(args, n: int, required: bool) -> np.ndarray | None:
    if getattr(args, "uniform", None) is not None:
        return np.full(n, args.uniform)
    if getattr(args, "radii", None):
        r = parse_vector(_read_text(args.radii))
        if r.shape != (n,):
            raise UsageError(f"{args.radii}: {len(r)} radii for {n} vertices")
        return r
    if required:
        raise UsageError("give --radii FILE or --uniform R")
    return None


def _target(path: str, n: int) -> np.ndarray:
    k = parse_vector(_read_text(path), positive=False, what="curvature")
    if k.shape != (n,):
        raise UsageError(f"{path}: {len(k)} curvatures for {n} vertices")
    return k


def _config_entries(args) -> dict:
    skip = {"command", "triangulation", "out", "manifest", "func"}
    return {f"config.{k}": v for k, v in sorted(vars(args).items()) if k not in skip}


class _Run:
    """Collects output and writes it plus the manifest at the end."""

    def __init__(self, args, stdout, stderr):
        self.args, self.stdout, self.stderr = args, stdout, stderr
        self.started = now()
        self.extra: dict = {}

    def emit(self, text: str) -> None:
        if self.args.out:
            Path(self.args.out).write_text(text)
        else:
            self.stdout.write(text)

    def manifest(self, code: int) -> None:
        a = self.args
        entries = {"command": a.command, "version": __version__, "backend": kernels.backend_name,
                   "input": a.triangulation, "input_sha256": digest(a.triangulation)}
        for key in ("radii", "target_curvature"):
            path = getattr(a, key, None)
            if path:
                entries[f"{key}_sha256"] = digest(path)
        entries["seed"] = getattr(a, "seed", "none")
        entries.update(_config_entries(a))
        entries.update(self.extra)
        entries["exit_code"] = code
        entries["started"] = self.started
        entries["finished"] = now()
        text = format_manifest(entries)
        target = a.manifest or (a.out + ".manifest" if a.out else None)
        if target:
            Path(target).write_text(text)
        else:
            self.stderr.write(text)


# --- commands ------------------------------------------------------------------------

def cmd_validate(args, run: _Run) -> int:
    rep = validate(_load(args))
    run.emit(str(rep) + "\n")
    return EXIT_OK if rep.passed else EXIT_INVALID


def cmd_curvature(args, run: _Run) -> int:
    t = _load(args)
    r = _radii(args, t.num_vertices, required=True)
    try:
        rep = extended_curvature(t, r) if args.extended else curvature(t, r)
    except VirtualPackingError as exc:
        run.stderr.write(f"error: {exc}\n")
        return EXIT_VIRTUAL
    run.emit(report_csv(rep) if args.format == "csv" else format_report(rep))
    return EXIT_OK


def cmd_flow(args, run: _Run) -> int:
    t = _load(args)
    r0 = _radii(args, t.num_vertices, required=True)
    mode = FlowMode.EXTENDED if args.extended else FlowMode(args.mode or "normalized")
    target = None
    if args.target_curvature:
        target = _target(args.target_curvature, t.num_vertices)
    try:
        config = FlowConfig(mode=mode, target=target, dt_init=args.dt_init, dt_min=args.dt_min,
                            dt_max=args.dt_max, t_max=args.t_max, conv_tol=args.conv_tol,
                            renormalize=args.renormalize, record_every=args.record_every)
    except FlowConfigError as exc:
        raise UsageError(str(exc)) from None
    try:
        out = run_flow(t, r0, config)
    except VirtualPackingError as exc:
        run.stderr.write(f"error: start is not a real packing: {exc}\n")
        return EXIT_VIRTUAL
    run.emit(out.trace.to_csv())
    final = out.final
    residual = float(np.max(np.abs(final.k - (target if mode.prescribed else final.lam))))
    summary = [f"outcome {out.status}", f"t {fmt(final.t)}", f"lambda {fmt(final.lam)}",
               f"residual {fmt(residual)}", f"steps {out.steps}", f"rejected {out.rejected}",
               f"records {len(out.trace)}"]
    (run.stdout if args.out else run.stderr).write("\n".join(summary) + "\n")
    run.extra["outcome"] = str(out.status)
    if isinstance(out.status, Converged):
        return EXIT_OK
    if isinstance(out.status, BoundaryHit):
        return EXIT_BOUNDARY
    return EXIT_TIME_LIMIT


def _min_config(args, r0) -> MinimizeConfig:
    if not args.shrink < 1:
        raise UsageError("--shrink must lie in (0, 1)")
    return MinimizeConfig(r0=r0, grad_tol=args.grad_tol, max_iters=args.max_iters,
                          shrink=args.shrink, newton=not args.no_newton)


def cmd_minimize(args, run: _Run) -> int:
    t = _load(args)
    res = minimize_extended(t, _min_config(args, _radii(args, t.num_vertices, required=False)))
    run.emit(format_result(res))
    return EXIT_OK if res.converged else EXIT_NOT_CONVERGED


def cmd_prescribed(args, run: _Run) -> int:
    t = _load(args)
    target = _target(args.target_curvature, t.num_vertices)
    res = solve_prescribed(t, target, _min_config(args, _radii(args, t.num_vertices, required=False)))
    run.emit(format_result(res))
    return EXIT_OK if res.converged else EXIT_NOT_CONVERGED


def cmd_invariant(args, run: _Run) -> int:
    t = _load(args)
    results = multi_start(t, _min_config(args, None), n_starts=args.starts, seed=args.seed)
    done = [res for res in results if res.converged]
    pool = done or results
    best = min(pool, key=lambda res: res.value)
    values = np.array([res.value for res in pool])
    lines = [f"invariant {fmt(best.value)}", f"starts {len(results)}", f"converged {len(done)}",
             f"spread {fmt(values.max() - values.min())}", f"is_real {str(best.is_real).lower()}"]
    run.emit("\n".join(lines) + "\n")
    return EXIT_OK if done else EXIT_NOT_CONVERGED


def cmd_chi(args, run: _Run) -> int:
    t = _load(args)
    r_hat = _radii(args, t.num_vertices, required=False)
    if r_hat is None:
        res = minimize_extended(t)
        if not res.converged:
            run.stderr.write("error: could not find a constant-curvature packing\n")
            return EXIT_NOT_CONVERGED
        r_hat = res.r_star
    est = chi_estimate(t, r_hat, n_rays=args.rays, n_samples=args.samples, seed=args.seed)
    lines = [f"chi_estimate {fmt(est.value)}", f"lambda_hat {fmt(est.lambda_hat)}",
             f"rays {est.n_rays}", f"samples {est.n_samples}", f"seed {est.seed}",
             "note upper estimate from finite ray sampling"]
    run.emit("\n".join(lines) + "\n")
    return EXIT_OK


COMMANDS = {
    "validate": cmd_validate, "curvature": cmd_curvature, "flow": cmd_flow,
    "minimize": cmd_minimize, "prescribed": cmd_prescribed, "invariant": cmd_invariant,
    "chi-estimate": cmd_chi,
}


def main(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    run = _Run(args, stdout, stderr)
    try:
        code = COMMANDS[args.command](args, run)
    except (TriangulationError, RadiiParseError, UsageError, GeometryError, OSError) as exc:
        stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    run.manifest(code)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
