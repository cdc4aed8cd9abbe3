"""Command-line interface.

stdout carries a single summary line, ``OK`` or ``FAIL: <reason>``;
everything else goes to stderr or to files.  Type indices on the command
line are 1-based.

Exit codes: 0 success, 2 model or argument error, 3 degenerate spectrum,
4 solver non-convergence, 5 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import platform
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .analytics import (
    extinction_probabilities,
    minimal_fixed_point,
    mixed_shares_coeffs,
    shares_curve,
    vdcbp_extinction,
)
from .errors import (
    ArgumentError,
    ConvergenceError,
    DegenerateSpectrumError,
    ModelError,
    NotMMatrixError,
    NotPositiveRegularError,
    SingularityError,
)
from .io import load_model, sha256_file
from .linalg import matexp_reference, triangular_matexp_closed
from .model import SdcbpModel, TcvdbpModel, VdcbpModel, generator_matrix
from .simulator import SimConfig, ensemble, simulate
from .verify import (
    mc_expectation,
    mc_extinction,
    mc_martingale_drift,
    mc_shares,
    predicted_means,
    rerun_policy,
)

EXIT_OK = 0
EXIT_MODEL = 2
EXIT_SPECTRUM = 3
EXIT_CONVERGENCE = 4
EXIT_VERIFY = 5

log = logging.getLogger("dcbp")


class VerificationFailed(Exception):
    pass


# --------------------------------------------------------------------------
# helpers
# --------------------------------------------------------------------------


def _grid(t_max: float, dt: float) -> list[float]:
    if dt <= 0 or t_max < 0:
        raise ArgumentError("need dt > 0 and t-max >= 0")
    k = int(round(t_max / dt))
    if abs(k * dt - t_max) > 1e-9 * max(1.0, t_max):
        k = int(t_max // dt)
    return [round(i * dt, 12) for i in range(k + 1)]


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise ArgumentError(f"bad number list {text!r}") from exc


def _ints(text: str) -> list[int]:
    vals = _floats(text)
    if any(v != int(v) for v in vals):
        raise ArgumentError(f"expected integers in {text!r}")
    return [int(v) for v in vals]


def _type_index(k: int, n: int, what: str) -> int:
    if not 1 <= k <= n:
        raise ArgumentError(f"{what} {k} outside 1..{n}")
    return k - 1


def _write_csv(path: Path, header: Sequence[str], rows, comments: Sequence[str] = ()) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        for c in comments:
            fh.write(f"# {c}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _num(x) -> str:
    return repr(float(x))


def _manifest(args: argparse.Namespace, argv: Sequence[str], outputs: Sequence[Path], where: Path, **extra) -> Path:
    doc = {
        "tool": "dcbp",
        "version": __version__,
        "command": args.command,
        "argv": list(argv),
        "model": getattr(args, "model", None),
        "modelSha256": sha256_file(args.model) if getattr(args, "model", None) else None,
        "seed": getattr(args, "seed", None),
        "outputs": {str(p): sha256_file(p) for p in outputs},
        "python": platform.python_version(),
        "numpy": np.__version__,
    }
    doc.update(extra)
    where.parent.mkdir(parents=True, exist_ok=True)
    where.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return where


def _gnuplot(csv_path: Path, title: str, xcol: str, ycol: str, group: str | None = None) -> Path:
    gp = csv_path.with_suffix(".gp")
    lines = [
        "set datafile separator ','",
        f"set title '{title}'",
        f"set xlabel '{xcol}'",
        f"set ylabel '{ycol}'",
        "set key autotitle columnhead",
    ]
    if group:
        lines.append(
            f"plot for [k in system(\"tail -n +2 '{csv_path.name}' | grep -v '^#' | cut -d, -f2 | sort -un\")] "
            f"'{csv_path.name}' using (strcol(2) eq k ? column('{xcol}') : NaN):'{ycol}' with lines title 'type '.k"
        )
    else:
        lines.append(f"plot '{csv_path.name}' using '{xcol}':'{ycol}' with lines")
    gp.write_text("\n".join(lines) + "\n")
    return gp


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def cmd_expect(args, argv) -> str:
    model, _ = load_model(args.model)
    n = model.n_types
    start = _type_index(args.start, n, "start type")
    targets = [_type_index(args.target, n, "target type")] if args.target else list(range(n))
    grid = _grid(args.t_max, args.dt)
    init = [0] * n
    init[start] = 1
    means, route = predicted_means(model, init, grid)
    rows = [[_num(t), m + 1, _num(means[gi, m])] for m in targets for gi, t in enumerate(grid)]
    out = Path(args.out)
    _write_csv(out, ["t", "type", "mean"], rows)
    outputs = [out]
    if args.gnuplot:
        outputs.append(_gnuplot(out, f"expected population from type {args.start}", "t", "mean", group="type"))
    _manifest(args, argv, outputs, out.with_suffix(out.suffix + ".manifest.json"), grid=grid, route=route)
    return "OK"


def cmd_extinction(args, argv) -> str:
    model, _ = load_model(args.model)
    rows = []
    if isinstance(model, SdcbpModel):
        tab = extinction_probabilities(model, args.tol, args.max_iter)
        n = model.n_types
        for k in range(n):
            for i in range(n):
                it = int(tab.iterations[i]) if k <= i else 0
                res = tab.residual[i] if k <= i else 0.0
                rows.append([k + 1, i + 1, _num(tab.q[k, i]), _num(res), it])
    else:
        if isinstance(model, VdcbpModel):
            ext = vdcbp_extinction(model, args.tol, args.max_iter)
            c1, c2 = model.classes
            parts = [("1", c1, ext.q1), ("2", c2, ext.q2), ("12", c1, ext.q12)]
        else:
            c1, c2 = model.classes
            full = minimal_fixed_point(model, c1 + c2, args.tol, args.max_iter)
            q2 = minimal_fixed_point(model, c2, args.tol, args.max_iter)
            parts = [("2", c2, q2), ("12", c1 + c2, full)]
        for label, types, fp in parts:
            for j, k in enumerate(types):
                rows.append([k + 1, label, _num(fp.q[j]), _num(fp.residual), fp.iterations])
    out = Path(args.out)
    _write_csv(out, ["startType", "targetClass", "q", "residual", "iters"], rows)
    _manifest(args, argv, [out], out.with_suffix(out.suffix + ".manifest.json"), tol=args.tol, maxIter=args.max_iter)
    return "OK"


def cmd_simulate(args, argv) -> str:
    model, _ = load_model(args.model)
    n = model.n_types
    init = _ints(args.init) if args.init else [1] + [0] * (n - 1)
    grid = _floats(args.grid) if args.grid else _grid(args.horizon, args.horizon / 10)
    cfg = SimConfig(horizon=args.horizon, max_events=args.max_events, seed=args.seed, record_grid=tuple(grid))
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = []
    if args.aggregate:
        ens = ensemble(model, init, cfg, args.reps)
        keep = ~ens.capped
        rows = []
        for m in range(n):
            x = ens.snapshots[keep, :, m]
            mean = x.mean(axis=0)
            se = x.std(axis=0, ddof=1) / np.sqrt(len(x)) if len(x) > 1 else np.zeros_like(mean)
            rows += [[_num(t), m + 1, _num(mean[g]), _num(se[g])] for g, t in enumerate(grid)]
        p = out_dir / "means.csv"
        _write_csv(p, ["t", "type", "mean", "stderr"], rows, [f"reps={args.reps} excluded={int((~keep).sum())}"])
        outputs.append(p)
        if args.gnuplot:
            outputs.append(_gnuplot(p, "ensemble mean", "t", "mean", group="type"))
    else:
        width = len(str(max(args.reps - 1, 0)))
        for r in range(args.reps):
            run = simulate(model, init, SimConfig(**{**cfg.__dict__, "replication": r}), record_events=args.events)
            n_classes = run.shares.shape[1]
            header = ["t"] + [f"pop_{i + 1}" for i in range(n)] + [f"shares_{c + 1}" for c in range(n_classes)] + ["totalProgeny"]
            rows = []
            for g, t in enumerate(grid):
                rows.append([_num(t)] + [_num(v) for v in run.snapshots[g]] + [_num(v) for v in run.shares[g]] + [_num(run.progeny[g])])
            p = out_dir / f"rep_{r:0{width}d}.csv"
            _write_csv(p, header, rows, [f"terminated={run.terminated} events={run.n_events}"])
            outputs.append(p)
            if args.events:
                e = out_dir / f"events_{r:0{width}d}.csv"
                _write_csv(
                    e, ["time", "parentType", "kind"] + [f"off_{i + 1}" for i in range(n)],
                    ([_num(t), i + 1, kind] + list(off) for t, i, kind, off in run.events),
                )
                outputs.append(e)
    _manifest(args, argv, outputs, out_dir / "manifest.json", grid=grid, init=init)
    return "OK"


def cmd_shares(args, argv) -> str:
    model, _ = load_model(args.model)
    if not isinstance(model, TcvdbpModel):
        raise ArgumentError("share curves need a tcvdbp or social model")
    start = _type_index(args.start, model.n_types, "start type")
    grid = _grid(args.t_max, args.dt)
    curve = shares_curve(model, start)
    label = "total progeny" if model.theta == 0.0 else "shares"
    comments = [f"quantity: {label} (new offspring of either class) from type {args.start}"]
    if start < model.mixed:
        c = mixed_shares_coeffs(model)
        l = start
        comments.append(
            f"g={c.g[l]!r} h={c.h[l]!r} o={c.o[l]!r} g+h+o={c.g[l] + c.h[l] + c.o[l]!r} "
            f"alpha_e={c.alpha_e!r} alpha_bar={c.alpha_bar!r}"
        )
        comments += [f"warning: {w}" for w in c.warnings]
    comments.append("curve: " + " + ".join(f"{co!r}*exp({r!r}*t)" for r, co in curve.terms))
    out = Path(args.out)
    _write_csv(out, ["t", "shares"], ([_num(t), _num(curve(t))] for t in grid), comments)
    outputs = [out]
    if args.gnuplot:
        outputs.append(_gnuplot(out, label, "t", "shares"))
    _manifest(args, argv, outputs, out.with_suffix(out.suffix + ".manifest.json"), grid=grid)
    return "OK"


def _suites(model, name: str) -> list[str]:
    every = ["expect", "extinction", "martingale", "shares"]
    wanted = every if name == "all" else [name]
    ok = {
        SdcbpModel: {"expect", "extinction", "martingale"},
        VdcbpModel: {"expect", "extinction", "martingale"},
        TcvdbpModel: {"expect", "shares"},
    }[type(model)]
    skipped = [s for s in wanted if s not in ok]
    for s in skipped:
        log.warning("suite %s does not apply to a %s model; skipped", s, type(model).__name__)
    return [s for s in wanted if s in ok]


def cmd_verify(args, argv) -> str:
    model, _ = load_model(args.model)
    n = model.n_types
    start = _type_index(args.start, n, "start type")
    init = [0] * n
    init[start] = 1
    grid = _floats(args.grid)
    rate_scale = float(np.max(model.rates))
    horizon = args.horizon if args.horizon else 25.0 / rate_scale
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    reports = []
    for suite in _suites(model, args.suite):
        if suite == "expect":
            first = mc_expectation(model, init, grid, args.reps, args.seed)
            for m in range(n):
                again = lambda s, m=m: mc_expectation(model, init, grid, args.reps, s)[m]
                reports.append((f"expect_type{m + 1}", rerun_policy(again, args.seed, first[m])))
        elif suite == "extinction":
            if isinstance(model, SdcbpModel):
                masks = [list(range(i + 1)) for i in range(n)]
            else:
                masks = [model.classes[0], list(range(n))]
            for mask in masks:
                name = "extinction_types" + "-".join(str(i + 1) for i in mask)
                reports.append((name, rerun_policy(lambda s, mask=mask: mc_extinction(model, init, horizon, args.reps, s, mask), args.seed)))
        elif suite == "martingale":
            mg = [0.0] + [t for t in grid if t > 0]
            target = n - 1 if isinstance(model, SdcbpModel) else None
            reports.append(("martingale", rerun_policy(lambda s: mc_martingale_drift(model, target, mg, args.reps, s, init), args.seed)))
        elif suite == "shares":
            reports.append(("shares", rerun_policy(lambda s: mc_shares(model, start, grid, args.reps, s), args.seed)))
    outputs = []
    text = []
    for name, rep in reports:
        p = out_dir / f"{name}.csv"
        p.write_text(rep.to_csv())
        outputs.append(p)
        text.append(rep.summary())
    summary = out_dir / "summary.txt"
    summary.write_text("\n\n".join(text) + "\n")
    outputs.append(summary)
    _manifest(args, argv, outputs, out_dir / "manifest.json", grid=grid, horizon=horizon, reps=args.reps, suite=args.suite)
    print("\n\n".join(text), file=sys.stderr)
    failed = [name for name, rep in reports if not rep.passed]
    if failed:
        raise VerificationFailed("failing reports: " + ", ".join(failed))
    return "OK"


def cmd_matexp(args, argv) -> str:
    model, _ = load_model(args.model)
    g = generator_matrix(model)
    mats = {}
    if args.method in ("closed", "both"):
        if np.any(np.tril(g, -1) != 0):
            raise ArgumentError("the closed form needs an upper-triangular (sdcbp) generator")
        mats["closed"] = triangular_matexp_closed(g, args.t)
    if args.method in ("reference", "both"):
        mats["reference"] = matexp_reference(g, args.t)
    with np.printoptions(precision=12, suppress=False, linewidth=120):
        for name, m in mats.items():
            print(f"{name} exp(B*{args.t:g}):\n{m}", file=sys.stderr)
    if len(mats) == 2:
        print(f"max-abs difference: {np.abs(mats['closed'] - mats['reference']).max():.3e}", file=sys.stderr)
    if args.out:
        out = Path(args.out)
        m = mats.get("closed", mats.get("reference"))
        _write_csv(out, [f"col_{j + 1}" for j in range(m.shape[1])], ([_num(v) for v in row] for row in m))
        _manifest(args, argv, [out], out.with_suffix(out.suffix + ".manifest.json"))
    return "OK"


def cmd_replay(args, argv) -> str:
    doc = json.loads(Path(args.manifest).read_text())
    recorded = doc["outputs"]
    code = main(doc["argv"], _quiet=True)
    if code != EXIT_OK:
        raise VerificationFailed(f"replayed command exited with {code}")
    again = json.loads(Path(args.manifest).read_text())["outputs"]
    diff = [p for p, h in recorded.items() if again.get(p) != h]
    if diff:
        raise VerificationFailed("outputs differ: " + ", ".join(diff))
    return "OK"


# --------------------------------------------------------------------------
# parser and entry point
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dcbp", description="Decomposable branching processes: analytics, simulation, verification.")
    p.add_argument("--version", action="version", version=f"dcbp {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("expect", help="expected population curves")
    e.add_argument("--model", required=True)
    e.add_argument("--start", type=int, default=1)
    e.add_argument("--target", type=int, default=None, help="single target type (default: all)")
    e.add_argument("--t-max", type=float, required=True)
    e.add_argument("--dt", type=float, required=True)
    e.add_argument("--out", required=True)
    e.add_argument("--gnuplot", action="store_true")

    x = sub.add_parser("extinction", help="extinction probabilities")
    x.add_argument("--model", required=True)
    x.add_argument("--tol", type=float, default=1e-12)
    x.add_argument("--max-iter", type=int, default=1_000_000)
    x.add_argument("--out", required=True)

    s = sub.add_parser("simulate", help="run trajectories")
    s.add_argument("--model", required=True)
    s.add_argument("--init", default=None, help="comma-separated initial counts (default: one type-1 particle)")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--horizon", type=float, required=True)
    s.add_argument("--max-events", type=int, default=10_000_000)
    s.add_argument("--reps", type=int, default=1)
    s.add_argument("--grid", default=None, help="comma-separated snapshot times")
    s.add_argument("--out-dir", required=True)
    s.add_argument("--aggregate", action="store_true", help="write ensemble means instead of per-run files")
    s.add_argument("--events", action="store_true", help="also write each run's event list")
    s.add_argument("--gnuplot", action="store_true")

    h = sub.add_parser("shares", help="expected share curves of a type-changing model")
    h.add_argument("--model", required=True)
    h.add_argument("--start", type=int, default=1)
    h.add_argument("--t-max", type=float, required=True)
    h.add_argument("--dt", type=float, required=True)
    h.add_argument("--out", required=True)
    h.add_argument("--gnuplot", action="store_true")

    v = sub.add_parser("verify", help="Monte Carlo checks against the closed forms")
    v.add_argument("--model", required=True)
    v.add_argument("--suite", choices=["expect", "extinction", "martingale", "shares", "all"], default="all")
    v.add_argument("--reps", type=int, default=10_000)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--start", type=int, default=1)
    v.add_argument("--grid", default="0.5,1,2")
    v.add_argument("--horizon", type=float, default=None, help="extinction horizon (default 25 / max rate)")
    v.add_argument("--out", required=True)

    m = sub.add_parser("matexp", help="generator exponential (debug)")
    m.add_argument("--model", required=True)
    m.add_argument("--t", type=float, required=True)
    m.add_argument("--method", choices=["closed", "reference", "both"], default="both")
    m.add_argument("--out", default=None)

    r = sub.add_parser("replay", help="rerun a command from its manifest and compare outputs")
    r.add_argument("manifest")
    return p


COMMANDS = {
    "expect": cmd_expect,
    "extinction": cmd_extinction,
    "simulate": cmd_simulate,
    "shares": cmd_shares,
    "verify": cmd_verify,
    "matexp": cmd_matexp,
    "replay": cmd_replay,
}


def main(argv: Sequence[str] | None = None, _quiet: bool = False) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_MODEL
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    code, line = EXIT_OK, "OK"
    try:
        line = COMMANDS[args.command](args, argv)
    except ModelError as exc:
        for v in exc.violations:
            print(f"violation: {v}", file=sys.stderr)
        code, line = EXIT_MODEL, f"FAIL: model error: {exc}"
    except (ArgumentError, NotPositiveRegularError, NotMMatrixError) as exc:
        code, line = EXIT_MODEL, f"FAIL: {exc}"
    except (DegenerateSpectrumError, SingularityError) as exc:
        code, line = EXIT_SPECTRUM, f"FAIL: degenerate spectrum: {exc}"
    except ConvergenceError as exc:
        print(f"last iterate: {exc.last}\nresidual: {exc.residual!r}", file=sys.stderr)
        code, line = EXIT_CONVERGENCE, f"FAIL: no convergence: {exc} (residual {exc.residual:.3g})"
    except VerificationFailed as exc:
        code, line = EXIT_VERIFY, f"FAIL: {exc}"
    except OSError as exc:
        code, line = EXIT_MODEL, f"FAIL: {exc}"
    if not _quiet:
        print(line)
    return code


if __name__ == "__main__":
    sys.exit(main())
