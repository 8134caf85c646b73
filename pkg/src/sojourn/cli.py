"""Command-line interface.

Exit codes: 0 success, 1 numeric or assertion failure, 2 usage error,
3 preflight refusal.  Single estimates print JSON, series print CSV.  Every
command first writes an append-only run record (JSON) named by the SHA-256 of
its content.
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import hashlib
import io
import json
import math
import os
import shlex
import sys
from pathlib import Path

import numpy as np

from . import __version__, analytic, constants, kernels
from .experiments import (ConstantsSource, PreflightRefusal, SojournConfig, convergence_report,
                          run_sojourn)
from .paths import DomainError, Grid, ProcessModel, RateFunction, dump_paths_csv, sample_drifted_field
from .stats import SeedSpec, make_stream
from .validate import CRITERIA, Settings, canonical_payload, run_criterion

SCHEMA = "sojourn.result/1"
RECORD_SCHEMA = "sojourn.runrecord/1"
SEED_ENV = "SOJOURN_SEED"
DEFAULT_SEED = 0x5EED

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_REFUSED = 0, 1, 2, 3


class CheckFailure(RuntimeError):
    """A regression assertion inside a command failed."""


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    return int(raw, 0) if raw else DEFAULT_SEED


def _seed(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 1 << 64:
        raise argparse.ArgumentTypeError("seed must fit in 64 bits")
    return v


def _float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _range(text: str) -> np.ndarray:
    """``lo:hi:n`` inclusive linear range."""
    try:
        lo, hi, n = text.split(":")
        lo, hi, n = float(lo), float(hi), int(n)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected lo:hi:n, got {text!r}") from exc
    if n < 2 or not hi > lo:
        raise argparse.ArgumentTypeError("range needs hi > lo and n >= 2")
    return np.linspace(lo, hi, n)


def _count(text: str) -> int:
    v = int(float(text))
    if v < 1:
        raise argparse.ArgumentTypeError("count must be positive")
    return v


def _threads(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("threads must be positive")
    return v


def _h_function(text: str, alpha: float):
    """``const:<c>`` or a time change ``linear:<a>`` / ``quadratic:<q>`` (H = c'^alpha)."""
    name, _, arg = text.partition(":")
    if name == "const":
        return float(arg)
    rate = RateFunction.parse(text)
    return lambda t: np.asarray(rate.dc(t), dtype=float) ** alpha


# ---------------------------------------------------------------------------
# helpers


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return _jsonable(obj.item())
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if hasattr(obj, "to_dict"):
        return _jsonable(obj.to_dict())
    return obj


def _dumps(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2)


def _params(args) -> dict:
    skip = {"func", "record_dir", "no_record", "out", "threads", "dump_paths", "dump_n"}
    return {k: v for k, v in vars(args).items() if k not in skip}


class Run:
    """Collects outputs of one command and persists its run record."""

    def __init__(self, args, argv):
        self.args = args
        self.argv = list(argv)
        self.started = _dt.datetime.now(_dt.timezone.utc).isoformat()
        self.last_payload = None

    def payload(self, result) -> dict:
        return {"schema": SCHEMA, "command": self.args.command, "params": _params(self.args),
                "seed": {"master_seed": self.args.seed, "stream_base": 0},
                "result": result}

    def record(self, payload) -> Path | None:
        if self.args.no_record:
            return None
        rec = {
            "schema": RECORD_SCHEMA,
            "tool_version": __version__,
            "kernel_backend": kernels.BACKEND,
            "argv": self.argv,
            "command_line": "sojourn " + shlex.join(self.argv),
            "started": self.started,
            "finished": _dt.datetime.now(_dt.timezone.utc).isoformat(),
            "payload": payload,
        }
        text = _dumps(rec)
        digest = hashlib.sha256(text.encode()).hexdigest()[:16]
        d = Path(self.args.record_dir)
        d.mkdir(parents=True, exist_ok=True)
        path = d / f"runrecord-{self.args.command}-{digest}.json"
        with open(path, "x") as fh:  # append-only: never overwrite
            fh.write(text + "\n")
        return path

    def emit(self, result, text: str | None = None) -> None:
        payload = self.payload(result)
        self.last_payload = payload
        path = self.record(payload)
        out = text if text is not None else _dumps(payload) + "\n"
        if self.args.out:
            Path(self.args.out).write_text(out)
        else:
            sys.stdout.write(out)
        if path is not None:
            print(f"run record: {path}", file=sys.stderr)


def _maybe_dump(args, alpha, b_drift, span, step, sided):
    if not getattr(args, "dump_paths", None):
        return
    grid = Grid(step, span, sided)
    sample = sample_drifted_field(alpha, b_drift, grid, make_stream(SeedSpec(args.seed, 0)), args.dump_n)
    dump_paths_csv(sample, args.dump_paths)


# ---------------------------------------------------------------------------
# commands


def cmd_pickands(args, run: Run) -> int:
    a = args.alpha
    kw = dict(threads=args.threads)
    if args.method == "berman":
        est = constants.estimate_pickands_berman(a, args.span, args.step, args.n, args.seed,
                                                 richardson=args.richardson, **kw)
        sided = "symmetric"
    elif args.method == "btilde":
        est = constants.estimate_Btilde(a, args.x, args.span, args.step, args.n, args.seed,
                                        richardson=args.richardson, **kw)
        sided = "symmetric"
    else:
        est = constants.estimate_pickands_sup(a, args.span, args.step, args.n, args.seed,
                                              richardson=args.richardson, **kw)
        sided = "one_sided"
    _maybe_dump(args, a, 0.0, args.span, args.step, sided)
    result = {"estimate": est, "lower_bound_new": analytic.pickands_lower_bound_new(a),
              "lower_bound_old": analytic.pickands_lower_bound_old(a)}
    if args.method == "sup":
        result["normalized"] = est.diagnostics["normalized"]
    run.emit(result)
    return EXIT_OK


def cmd_berman(args, run: Run) -> int:
    a = args.alpha
    kw = dict(threads=args.threads)
    result = {}
    if args.T is not None:
        h = _h_function(args.H, a)
        est = constants.estimate_berman_locally_stationary(a, args.eta, args.x, h, args.T, args.span,
                                                           args.step, args.n, args.seed, **kw)
    elif args.S_list:
        est = constants.estimate_berman_rate(a, args.eta, args.x, args.S_list, args.step, args.n,
                                             args.seed, **kw)
    else:
        est = constants.estimate_berman_B(a, args.lam, args.eta, args.span, args.x, args.n, args.seed,
                                          args.sided, args.step, richardson=args.richardson, **kw)
    result["estimate"] = est
    if args.verify:
        comp = constants.estimate_pickands_berman(a, 10.0, args.step, args.n, args.seed + 1, **kw)
        result["verify"] = {"pickands_berman": comp}
        if args.S_list and args.x == 0:
            result["verify"]["agrees_3sigma"] = est.value.agrees_with(comp.value)
    _maybe_dump(args, a, 0.0, args.span, args.step, args.sided)
    run.emit(result)
    return EXIT_OK


def cmd_piterbarg(args, run: Run) -> int:
    kw = dict(threads=args.threads)
    est = constants.estimate_piterbarg(args.alpha, args.b, args.eta, args.span, args.x, args.n, args.seed,
                                       args.sided, args.step, richardson=args.richardson, **kw)
    result = {"estimate": est}
    if args.verify:
        sup = constants.estimate_piterbarg_sup(args.alpha, args.b, args.span, args.step, args.n,
                                               args.seed + 1, args.sided, **kw)
        result["verify"] = {"sup_form": sup}
        if args.x == 0 and args.eta == 0:
            result["verify"]["agrees_3sigma"] = est.value.agrees_with(sup.value)
    _maybe_dump(args, args.alpha, args.b, args.span, args.step, args.sided)
    run.emit(result)
    return EXIT_OK


def cmd_gcdf(args, run: Run) -> int:
    est = constants.estimate_G_cdf(args.alpha, args.span, args.step, args.n, args.seed, args.x,
                                   threads=args.threads)
    run.emit({"estimate": est})
    return EXIT_OK


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


def cmd_tfunc(args, run: Run) -> int:
    interior = not args.boundary
    if args.figure or args.x_range is not None:
        xs = args.x_range if args.x_range is not None else np.linspace(0.0, 3.0, 301)
        etas = [0.0, 0.2] if args.figure else [args.eta]
        rows = []
        for eta in etas:
            for x in xs:
                rows.append([eta, float(x), analytic.t_constant_closed(args.beta, args.b, eta, float(x), interior),
                             analytic.t_constant_finite(args.beta, args.b, eta, args.span, float(x), interior)])
        run.emit({"series": rows, "beta": args.beta, "b": args.b, "interior": interior},
                 _csv(["eta", "x", "closed", "finite"], rows))
        return EXIT_OK
    closed = analytic.t_constant_closed(args.beta, args.b, args.eta, args.x, interior)
    finite = analytic.t_constant_finite(args.beta, args.b, args.eta, args.span, args.x, interior)
    run.emit({"closed": closed, "finite": finite, "interior": interior})
    return EXIT_OK


def cmd_bounds_figure(args, run: Run) -> int:
    alphas = args.alpha_range
    if alphas.size < 10:
        raise DomainError("--alpha-range needs at least 10 nodes")
    rows = []
    bad = []
    for a in alphas:
        p = analytic.BoundPair.at(float(a))
        rows.append([p.alpha, p.new_bound, p.old_bound])
        if not p.dominates:
            bad.append(p.alpha)
    run.emit({"rows": rows, "dominance_violations": bad}, _csv(["alpha", "new_bound", "old_bound"], rows))
    if bad:
        raise CheckFailure(f"new bound below old bound at alpha = {bad}")
    return EXIT_OK


def _model(args) -> ProcessModel:
    if args.model == "stationary":
        return ProcessModel.stationary(args.alpha)
    if args.model == "time-changed":
        return ProcessModel.time_changed(args.alpha, RateFunction.parse(args.rate))
    if args.beta is None or args.b is None:
        raise DomainError("variance-modulated needs --beta and --b")
    return ProcessModel.variance_modulated(args.alpha, args.beta, args.b)


def cmd_sojourn(args, run: Run) -> int:
    model = _model(args)
    if args.interval is None:
        interval = (0.0, 1.0) if args.model != "variance-modulated" else (-1.0, 1.0)
    else:
        interval = tuple(args.interval)
        if len(interval) != 2:
            raise DomainError("--interval takes a,b")
    u_list = args.u_list or [args.u]
    cfg = SojournConfig(model, interval, args.eta, u_list[-1], args.x, args.n, args.seed,
                        step=args.step, window=args.window, threads=args.threads)
    source = ConstantsSource(n=args.constants_n, seed=args.seed + 1, threads=args.threads)
    if len(u_list) >= 2:
        rep = convergence_report(cfg, u_list, source)
        run.emit({"report": rep}, rep.to_csv())
        return EXIT_OK
    curve = run_sojourn(cfg, source)
    run.emit({"curve": curve}, curve.to_csv())
    return EXIT_OK


def cmd_validate(args, run: Run) -> int:
    settings = Settings(seed=args.seed, quick=args.quick, threads=args.threads)
    only = args.only or sorted(CRITERIA)
    results = []
    for k in only:
        if k not in CRITERIA:
            raise DomainError(f"unknown criterion {k}")
        r = run_criterion(k, settings)
        results.append(r)
        print(r.line(), file=sys.stderr, flush=True)
    failed = [r for r in results if not r.passed]
    table = "\n".join(r.line() for r in results)
    summary = {"passed": not failed, "failed": [r.number for r in failed],
               "payload_sha256": hashlib.sha256(canonical_payload(results)).hexdigest(),
               "criteria": json.loads(canonical_payload(results))}
    run.emit(summary, _dumps(run.payload(summary)) + "\n" if args.json else table + "\n")
    if failed:
        names = ", ".join(f"{r.number} ({r.title})" for r in failed)
        print(f"failing criteria: {names}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def cmd_replay(args, run: Run) -> int:
    """Re-run a recorded command and compare its payload with the record."""
    rec = json.loads(Path(args.record).read_text())
    argv = rec["argv"]
    inner = build_parser().parse_args(argv)
    inner.no_record = True
    inner.out = None
    inner_run = Run(inner, argv)
    saved = sys.stdout
    sys.stdout = io.StringIO()
    try:
        code = inner.func(inner, inner_run)
    finally:
        sys.stdout = saved
    same = _dumps(inner_run.last_payload) == _dumps(rec["payload"])
    print(json.dumps({"record": args.record, "identical": same, "exit_code": code}))
    return EXIT_OK if same else EXIT_FAIL


# ---------------------------------------------------------------------------


def _common(p, n_default=100_000):
    p.add_argument("--seed", type=_seed, default=_default_seed(),
                   help=f"master seed (default ${SEED_ENV} or 0x5EED)")
    p.add_argument("--n", type=_count, default=n_default, help="number of sample paths")
    p.add_argument("--threads", type=_threads, default=os.cpu_count() or 1,
                   help="worker threads (results do not depend on it)")
    p.add_argument("--out", help="write the JSON/CSV output to this file")
    p.add_argument("--record-dir", default="runs", help="directory for run records")
    p.add_argument("--no-record", action="store_true", help="do not write a run record")


def _dump_flags(p):
    p.add_argument("--dump-paths", metavar="CSV", help="debug: dump sample paths of the field")
    p.add_argument("--dump-n", type=_count, default=10, help="paths to dump")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sojourn", description=__doc__.split("\n")[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pickands", help="Pickands constant estimates")
    _common(p)
    _dump_flags(p)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--span", type=float, default=10.0)
    p.add_argument("--step", type=float, default=0.01)
    p.add_argument("--method", choices=("berman", "sup", "btilde"), default="berman")
    p.add_argument("--x", type=float, default=0.0, help="threshold for --method btilde")
    p.add_argument("--richardson", action="store_true", help="also report the step/2 Richardson pair")
    p.set_defaults(func=cmd_pickands)

    p = sub.add_parser("berman", help="Berman constants B(S, x), their rates and locally stationary integrals")
    _common(p)
    _dump_flags(p)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--eta", type=float, default=0.0)
    p.add_argument("--x", type=float, default=0.0)
    p.add_argument("--lam", type=float, default=1.0)
    p.add_argument("--span", "--S", dest="span", type=float, default=10.0)
    p.add_argument("--S-list", dest="S_list", type=_float_list, help="windows for the slope estimate")
    p.add_argument("--sided", choices=("one_sided", "symmetric"), default="one_sided")
    p.add_argument("--step", type=float, default=0.01)
    p.add_argument("--H", default="const:1",
                   help="const:<c>, linear:<a> or quadratic:<q> (with --T)")
    p.add_argument("--T", type=float, help="integrate over [0, T] (locally stationary constant)")
    p.add_argument("--richardson", action="store_true")
    p.add_argument("--verify", action="store_true", help="add x=0 consistency companions")
    p.set_defaults(func=cmd_berman)

    p = sub.add_parser("piterbarg", help="Piterbarg constants")
    _common(p)
    _dump_flags(p)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--b", type=float, required=True)
    p.add_argument("--eta", type=float, default=0.0)
    p.add_argument("--x", type=float, default=0.0)
    p.add_argument("--span", "--S", dest="span", type=float, default=8.0)
    p.add_argument("--sided", choices=("symmetric", "one_sided"), default="symmetric")
    p.add_argument("--step", type=float, default=0.01)
    p.add_argument("--richardson", action="store_true")
    p.add_argument("--verify", action="store_true", help="add the direct sup-form companion")
    p.set_defaults(func=cmd_piterbarg)

    p = sub.add_parser("gcdf", help="distribution function of the occupation time")
    _common(p)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--x", type=float, default=0.0)
    p.add_argument("--span", type=float, default=10.0)
    p.add_argument("--step", type=float, default=0.01)
    p.set_defaults(func=cmd_gcdf)

    p = sub.add_parser("tfunc", help="closed-form and finite-window T function")
    _common(p)
    p.add_argument("--beta", type=float, default=1.5)
    p.add_argument("--b", type=float, default=1.0)
    p.add_argument("--eta", type=float, default=0.0)
    p.add_argument("--x", type=float, default=0.0)
    p.add_argument("--x-range", type=_range, help="lo:hi:n series")
    p.add_argument("--span", type=float, default=10.0)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--interior", action="store_true", default=True)
    g.add_argument("--boundary", action="store_true")
    p.add_argument("--figure", action="store_true", help="series for eta in {0, 0.2}")
    p.set_defaults(func=cmd_tfunc)

    p = sub.add_parser("bounds-figure", help="new and old Pickands lower bounds")
    _common(p)
    p.add_argument("--alpha-range", type=_range, default=np.linspace(0.05, 2.0, 40))
    p.set_defaults(func=cmd_bounds_figure)

    p = sub.add_parser("sojourn", help="empirical sojourn tails against their asymptotics")
    _common(p, n_default=1_000_000)
    p.add_argument("--model", choices=("stationary", "time-changed", "variance-modulated"),
                   default="stationary")
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--beta", type=float)
    p.add_argument("--b", type=float)
    p.add_argument("--rate", default="identity", help="time change for --model time-changed")
    p.add_argument("--interval", type=_float_list)
    p.add_argument("--eta", type=float, default=0.0)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--u", type=float, default=3.0)
    g.add_argument("--u-list", type=_float_list)
    p.add_argument("--x", type=_float_list, default=[0.0])
    p.add_argument("--step", type=float, help="time step for eta=0 (default 0.05/v(u))")
    p.add_argument("--window", type=float, help="half-width around the variance maximum")
    p.add_argument("--constants-n", type=_count, default=20_000)
    p.set_defaults(func=cmd_sojourn)

    p = sub.add_parser("validate", help="run the acceptance suite")
    _common(p)
    p.add_argument("--quick", action="store_true", help="10x smaller n, tolerances doubled")
    p.add_argument("--only", type=lambda t: [int(v) for v in t.split(",")], help="criterion numbers")
    p.add_argument("--json", action="store_true", help="print the JSON payload instead of the table")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("replay", help="re-run a run record and compare numerics")
    p.add_argument("record")
    p.add_argument("--seed", type=_seed, default=_default_seed())
    p.add_argument("--threads", type=_threads, default=1)
    p.add_argument("--out")
    p.add_argument("--record-dir", default="runs")
    p.add_argument("--no-record", action="store_true", default=True)
    p.set_defaults(func=cmd_replay)
    return ap


def _dispatch(args, argv) -> int:
    run = Run(args, argv)
    try:
        return args.func(args, run)
    except PreflightRefusal as exc:
        print(f"preflight refused: {exc}", file=sys.stderr)
        print(json.dumps(_jsonable({"preflight": exc.report})), file=sys.stderr)
        return EXIT_REFUSED
    except (DomainError, ValueError, CheckFailure, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_USAGE
    return _dispatch(args, argv)


if __name__ == "__main__":
    sys.exit(main())
