"""Command-line interface: ``yaglom <command> ...``.

Phases on the command line and in CSV output are 1-based original
(input-order) indices.  Exit codes: 0 success, 1 invalid input or model,
2 numerical failure, 3 I/O error.  Errors are reported on stderr as a
single line starting with ``error:``.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .critical import critical_point
from .density import DensityGrid, density_grid, kernels, psi_tail
from .model import ModelError, load_model, stability
from .numkit import NumericalError
from .riccati import phi, solve_psi
from .simulate import (
    EmpiricalDensity,
    SimConfig,
    SimulationError,
    bin_analytic,
    compare_densities,
    return_time_tail,
    simulate_conditional,
)

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3

DENSITY_HEADER = ["y", "from_phase", "to_phase", "density", "side"]
EMPIRICAL_HEADER = ["y_lo", "y_hi", "to_phase", "mass", "survivors"]


class CLIError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def fmt(v) -> str:
    return format(float(v), ".17g")


def _matrix(A) -> str:
    A = np.atleast_2d(A)
    return "[" + "; ".join(" ".join(f"{v:.10g}" for v in row) for row in A) + "]"


def _read_model(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise CLIError(f"cannot read model file {path}: {exc.strerror or exc}", EXIT_IO)
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CLIError(f"model file {path} is not valid JSON: {exc}", EXIT_INVALID)
    return load_model(doc)


def _sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_text(path, text):
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise CLIError(f"cannot write {path}: {exc}", EXIT_IO)


def _write_manifest(out, args, argv, started, extra=None):
    params = {
        k: v for k, v in vars(args).items() if k not in ("func", "command") and v is not None
    }
    manifest = {
        "command": args.command,
        "argv": list(argv),
        "model": getattr(args, "model", None),
        "model_sha256": _sha256(args.model) if getattr(args, "model", None) else None,
        "parameters": params,
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "seed": getattr(args, "seed", None),
        "wall_time_s": round(time.perf_counter() - started, 6),
        "outputs": [str(out)],
    }
    if extra:
        manifest.update(extra)
    _write_text(str(out) + ".manifest.json", json.dumps(manifest, indent=2) + "\n")


def _phase_arg(model, phase, x=None):
    """Convert a 1-based CLI phase to a 0-based index.

    With ``x`` given, also check the phase is a supported Yaglom start.
    """
    if phase is None:
        return None
    if not 1 <= phase <= model.n:
        raise CLIError(f"--phase {phase} out of range 1..{model.n}", EXIT_INVALID)
    i = phase - 1
    if x is not None and i in model.S0:
        raise CLIError(
            f"--phase {phase} has zero rate; no Yaglom formula for such starts", EXIT_INVALID
        )
    if x == 0 and i not in model.S1:
        raise CLIError(f"--phase {phase} must have a positive rate when --x is 0", EXIT_INVALID)
    return i


# --- commands -------------------------------------------------------------


def cmd_validate(args, argv, out):
    model = _read_model(args.model)
    rep = stability(model)
    one = lambda idx: [i + 1 for i in idx]  # noqa: E731
    print(f"phases: {model.n}", file=out)
    print(f"S1 (c>0): {one(model.S1)}", file=out)
    print(f"S2 (c<0): {one(model.S2)}", file=out)
    print(f"S0 (c=0): {one(model.S0)}", file=out)
    print("xi: " + " ".join(f"{v:.10g}" for v in rep.xi), file=out)
    print(f"drift: {rep.drift:.10g}", file=out)
    print(f"stable: {'yes' if rep.stable else 'no'}", file=out)
    if not rep.stable:
        raise CLIError(f"model is not stable: mean drift {rep.drift:.6g} >= 0", EXIT_INVALID)
    return EXIT_OK


def cmd_psi(args, argv, out):
    model = _read_model(args.model)
    sol = solve_psi(model, args.s, tol=args.tol, max_iter=args.max_iter)
    if not sol.converged:
        raise CLIError(
            f"Psi({args.s}) not found after {sol.iterations} iterations: {sol.reason} "
            f"(residual {sol.residual:.3e}); s may be below s*",
            EXIT_NUMERIC,
        )
    print(f"s: {sol.s:.17g}", file=out)
    print(f"iterations: {sol.iterations}", file=out)
    print(f"riccati_residual: {sol.residual:.3e}", file=out)
    print(f"Psi: {_matrix(sol.psi)}", file=out)
    print(f"K: {_matrix(sol.K)}", file=out)
    print(f"D: {_matrix(sol.D)}", file=out)
    try:
        ph = phi(model, sol)
        res = np.abs(sol.K @ ph.phi + ph.phi @ sol.D - ph.U).max()
        print(f"Phi: {_matrix(ph.phi)}", file=out)
        print(f"sylvester_residual: {res:.3e}", file=out)
    except NumericalError as exc:
        print(f"Phi: undefined ({exc})", file=out)
    return EXIT_OK


def cmd_critical(args, argv, out):
    model = _read_model(args.model)
    cp = critical_point(model, tol=args.tol, h=args.h)
    d = cp.diagnostics
    print(f"s* ≈ {cp.s_star:.4f} ({cp.s_star:.17g})", file=out)
    print(f"gamma: {cp.gamma:.10g}", file=out)
    print(f"u: {_matrix(cp.u)}", file=out)
    print(f"v: {_matrix(cp.v)}", file=out)
    print(f"Psi(s*): {_matrix(cp.psi_star)}", file=out)
    print(f"K(s*): {_matrix(cp.K)}", file=out)
    print(f"D(s*): {_matrix(cp.D)}", file=out)
    print(f"B: {_matrix(cp.B)}", file=out)
    print(f"U: {_matrix(cp.U)}", file=out)
    print(f"Y: {_matrix(cp.Y)}", file=out)
    print(f"eq1_residual: {d['eq1_residual']:.3e}", file=out)
    print(f"eq2_residual: {d['eq2_residual']:.3e}", file=out)
    print(f"richardson_B: {_matrix(d['richardson_B'])}", file=out)
    print(f"richardson_fit_error: {d['richardson_fit_error']:.3e}", file=out)
    print(f"Y_limit_error: {d['Y_limit_error']:.3e}", file=out)
    print(f"K_hurwitz: {'yes' if cp.hurwitz else 'no'}", file=out)
    if not cp.hurwitz:
        print("warning: K(s*) is not Hurwitz; densities are unavailable", file=sys.stderr)
    return EXIT_OK


def density_csv(grid: DensityGrid) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(DENSITY_HEADER)
    n = grid.values.shape[2]
    for i, fp in enumerate(grid.from_phases):
        for k, y in enumerate(grid.y):
            for j in range(n):
                w.writerow([fmt(y), fp + 1, j + 1, fmt(grid.values[k, i, j]), grid.side[k]])
    return buf.getvalue()


def _gnuplot(grid: DensityGrid, csv_path) -> str:
    lines = [
        "# density vs level for each (from, to) phase pair",
        "set datafile separator ','",
        "set key outside",
        "set xlabel 'level y'",
        "set ylabel 'mu(dy)/dy'",
        f"set title 'Yaglom density, x = {grid.x:g}'",
    ]
    plots = []
    for fp in grid.from_phases:
        for j in range(grid.values.shape[2]):
            sel = f"< awk -F, 'NR>1 && $2=={fp + 1} && $3=={j + 1}' {csv_path}"
            plots.append(f'"{sel}" using 1:4 with lines title "{fp + 1}->{j + 1}"')
    lines.append("plot " + ", \\\n     ".join(plots))
    return "\n".join(lines) + "\n"


def cmd_density(args, argv, out):
    started = time.perf_counter()
    model = _read_model(args.model)
    if args.x < 0:
        raise CLIError("--x must be >= 0", EXIT_INVALID)
    phase = _phase_arg(model, args.phase, args.x)
    cp = critical_point(model)
    grid = density_grid(model, cp, args.x, phase, args.ymax, args.steps)
    _write_text(args.out, density_csv(grid))
    if args.gnuplot:
        _write_text(args.gnuplot, _gnuplot(grid, args.out))
    kn = kernels(model, cp, args.x)
    norm = kn.H_tilde if args.x == 0 else np.concatenate([kn.ZZ_tilde, kn.Z_tilde])
    _write_manifest(
        args.out,
        args,
        argv,
        started,
        {
            "s_star": cp.s_star,
            "normalizers": norm.tolist(),
            "row_mass": dict(zip((p + 1 for p in grid.from_phases), grid.normalization.tolist())),
        },
    )
    for p, m in zip(grid.from_phases, grid.normalization):
        print(f"from_phase {p + 1}: mass {m:.12f}", file=out)
    print(f"wrote {args.out}", file=out)
    return EXIT_OK


def empirical_csv(emp: EmpiricalDensity) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(EMPIRICAL_HEADER)
    for k in range(len(emp.edges) - 1):
        for j in range(emp.masses.shape[1]):
            w.writerow(
                [fmt(emp.edges[k]), fmt(emp.edges[k + 1]), j + 1, fmt(emp.masses[k, j]), emp.survivors]
            )
    return buf.getvalue()


def cmd_simulate(args, argv, out):
    started = time.perf_counter()
    model = _read_model(args.model)
    phase = _phase_arg(model, args.phase)
    cfg = SimConfig(
        x0=args.x,
        phase0=phase,
        t=args.t,
        paths=args.paths,
        seed=args.seed,
        bins=args.bins,
        y_max=args.ymax,
    )
    emp = simulate_conditional(model, cfg)
    _write_text(args.out, empirical_csv(emp))
    _write_manifest(
        args.out,
        args,
        argv,
        started,
        {
            "survivors": emp.survivors,
            "survival_estimate": emp.survival_estimate,
            "ci_halfwidth": emp.ci_halfwidth,
            "overflow": emp.overflow,
        },
    )
    print(f"survivors: {emp.survivors} / {emp.paths}", file=out)
    print(f"survival: {emp.survival_estimate:.6g} ± {emp.ci_halfwidth:.2g}", file=out)
    if emp.survivors == 0:
        print("warning: no survivors; increase --paths or reduce --t", file=sys.stderr)
    elif emp.survivors < 500:
        print(f"warning: only {emp.survivors} survivors (< 500)", file=sys.stderr)
    print(f"wrote {args.out}", file=out)
    return EXIT_OK


def _read_csv(path):
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise CLIError(f"cannot read {path}: {exc}", EXIT_IO)
    if not rows:
        raise CLIError(f"{path} is empty", EXIT_INVALID)
    return rows[0], rows[1:]


def read_density_csv(header, rows, path="") -> DensityGrid:
    try:
        recs = [(float(r[0]), int(r[1]) - 1, int(r[2]) - 1, float(r[3]), r[4]) for r in rows]
    except (ValueError, IndexError) as exc:
        raise CLIError(f"malformed density CSV {path}: {exc}", EXIT_INVALID)
    if not recs:
        raise CLIError(f"density CSV {path} has no rows", EXIT_INVALID)
    from_phases = tuple(sorted({r[1] for r in recs}))
    n = max(r[2] for r in recs) + 1
    first = from_phases[0]
    ys, sides = [], []
    for y, fp, tp, _, side in recs:
        if fp == first and tp == 0:
            ys.append(y)
            sides.append(side)
    vals = np.zeros((len(ys), len(from_phases), n))
    counters = {}
    for y, fp, tp, d, _ in recs:
        i = from_phases.index(fp)
        k = counters.get((fp, tp), 0)
        counters[(fp, tp)] = k + 1
        if k >= len(ys):
            raise CLIError(f"density CSV {path} has ragged blocks", EXIT_INVALID)
        vals[k, i, tp] = d
    return DensityGrid(
        x=float("nan"),
        from_phases=from_phases,
        y=np.array(ys),
        side=tuple(sides),
        values=vals,
        normalization=np.full(len(from_phases), np.nan),
    )


def read_empirical_csv(header, rows, path="") -> EmpiricalDensity:
    try:
        recs = [(float(r[0]), float(r[1]), int(r[2]) - 1, float(r[3]), int(r[4])) for r in rows]
    except (ValueError, IndexError) as exc:
        raise CLIError(f"malformed empirical CSV {path}: {exc}", EXIT_INVALID)
    if not recs:
        raise CLIError(f"empirical CSV {path} has no rows", EXIT_INVALID)
    lows = sorted({r[0] for r in recs})
    highs = sorted({r[1] for r in recs})
    n = max(r[2] for r in recs) + 1
    masses = np.zeros((len(lows), n))
    index = {v: k for k, v in enumerate(lows)}
    for lo, _, tp, m, _ in recs:
        masses[index[lo], tp] = m
    survivors = recs[0][4]
    return EmpiricalDensity(
        edges=np.array(lows + [highs[-1]]),
        masses=masses,
        survivors=survivors,
        paths=max(survivors, 1),
    )


def _load_either(path):
    header, rows = _read_csv(path)
    if header == DENSITY_HEADER:
        return read_density_csv(header, rows, path)
    if header == EMPIRICAL_HEADER:
        return read_empirical_csv(header, rows, path)
    raise CLIError(f"{path}: unrecognised CSV header {header}", EXIT_INVALID)


def cmd_compare(args, argv, out):
    a = _load_either(args.analytic)
    b = _load_either(args.empirical)
    phase = None if args.phase is None else args.phase - 1

    def pick(g):
        if phase is not None:
            if phase not in g.from_phases:
                raise CLIError(f"--phase {args.phase} not present in analytic CSV", EXIT_INVALID)
            return phase
        if len(g.from_phases) > 1:
            raise CLIError("analytic CSV has several start phases; pass --phase", EXIT_INVALID)
        return g.from_phases[0]

    try:
        if isinstance(a, DensityGrid) and isinstance(b, DensityGrid):
            top = min(a.y[-1], b.y[-1])
            edges = np.linspace(0.0, top, 201)
            ma, mb = bin_analytic(a, edges, pick(a)), bin_analytic(b, edges, pick(b))
            ref = EmpiricalDensity(edges, mb, 1, 1)
            res = compare_densities(ma, ref)
        elif isinstance(a, DensityGrid):
            res = compare_densities(a, b, pick(a))
        elif isinstance(b, DensityGrid):
            res = compare_densities(b, a, pick(b))
        else:
            res = compare_densities(a.masses, b)
    except SimulationError as exc:
        raise CLIError(str(exc), EXIT_INVALID)
    print(f"l1={res['l1']:.6g} ks={res['ks']:.6g}", file=out)
    if not res["ks"] < args.ks_threshold:
        print(f"ks {res['ks']:.6g} >= threshold {args.ks_threshold}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


def _window(text):
    try:
        lo, hi = (float(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"window must look like tlo:thi, got {text!r}")
    if not 0 < lo < hi:
        raise argparse.ArgumentTypeError(f"window needs 0 < tlo < thi, got {text!r}")
    return lo, hi


def cmd_tail(args, argv, out):
    model = _read_model(args.model)
    phase = _phase_arg(model, args.phase)
    if phase is None:
        phase = model.S1[0]
    cp = critical_point(model)
    lo, hi = args.window
    cfg = SimConfig(x0=0.0, phase0=phase, t=hi, paths=args.paths, seed=args.seed)
    fit = return_time_tail(model, cfg, (lo, hi))
    rel = abs(fit.slope - cp.s_star) / abs(cp.s_star)
    tail = psi_tail(cp)
    print(f"slope: {fit.slope:.6g} ± {fit.slope_se:.2g}", file=out)
    print(f"s*: {cp.s_star:.6g}", file=out)
    print(f"relative_error: {rel:.4g}", file=out)
    print(f"exponent: {fit.exponent:.4g} ± {fit.exponent_se:.2g} (theory -1.5)", file=out)
    print(f"returns_in_window: {fit.samples_in_window}", file=out)
    print(f"tail_coefficient: {_matrix(tail.coefficient)}", file=out)
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CLIError(f"{self.prog}: {message}", EXIT_INVALID)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(
        prog="yaglom",
        description="Yaglom limits of Markovian stochastic fluid models.",
    )
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("validate", help="check a model and report partition, xi, drift")
    s.add_argument("model")
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("psi", help="solve for Psi(s), K(s), D(s), Phi(s)")
    s.add_argument("model")
    s.add_argument("--s", type=float, required=True)
    s.add_argument("--tol", type=float, default=1e-12)
    s.add_argument("--max-iter", type=int, default=20000)
    s.set_defaults(func=cmd_psi)

    s = sub.add_parser("critical", help="locate s* and the expansion data there")
    s.add_argument("model")
    s.add_argument("--h", type=float, default=None, help="Richardson step (default max(1e-6, 1e-6|s*|))")
    s.add_argument("--tol", type=float, default=1e-10)
    s.set_defaults(func=cmd_critical)

    s = sub.add_parser("density", help="tabulate the Yaglom density to CSV")
    s.add_argument("model")
    s.add_argument("--x", type=float, required=True, help="initial level")
    s.add_argument("--phase", type=int, default=None, help="initial phase (1-based); default all")
    s.add_argument("--ymax", type=float, default=None, help="grid end (default: where exp(K* y) < 1e-12)")
    s.add_argument("--steps", type=int, default=400)
    s.add_argument("--out", required=True)
    s.add_argument("--gnuplot", default=None, help="also write a gnuplot script")
    s.set_defaults(func=cmd_density)

    s = sub.add_parser("simulate", help="Monte Carlo conditional histogram to CSV")
    s.add_argument("model")
    s.add_argument("--x", type=float, required=True)
    s.add_argument("--phase", type=int, required=True)
    s.add_argument("--t", type=float, required=True)
    s.add_argument("--paths", type=int, required=True)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--bins", type=int, default=80)
    s.add_argument("--ymax", type=float, default=None)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("compare", help="L1 and KS distance between two CSV outputs")
    s.add_argument("analytic")
    s.add_argument("empirical")
    s.add_argument("--phase", type=int, default=None)
    s.add_argument("--ks-threshold", type=float, default=0.1)
    s.set_defaults(func=cmd_compare)

    s = sub.add_parser("tail", help="fit the busy-period tail against s*")
    s.add_argument("model")
    s.add_argument("--paths", type=int, required=True)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--window", type=_window, required=True, metavar="TLO:THI")
    s.add_argument("--phase", type=int, default=None)
    s.set_defaults(func=cmd_tail)
    return p


def run(argv=None, out=None) -> int:
    """Entry point; returns the process exit code."""
    argv = sys.argv[1:] if argv is None else list(argv)
    out = sys.stdout if out is None else out
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    except CLIError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    try:
        return args.func(args, argv, out)
    except CLIError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (ModelError, SimulationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NumericalError as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
