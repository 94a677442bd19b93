"""Command-line front end: reproducible experiment runs with serialized reports.

Every output file carries a metadata block (tool version, hash of the
resolved configuration, seed); identical configuration and seed reproduce the
files byte for byte.  Exit codes: 0 success, 1 usage/configuration/I-O
errors, 2 when a verification run detects an inequality violation.
"""

from __future__ import annotations

import argparse
import hashlib
import io
import json
import math
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .bounds import BoundConstants, best_bound, make_constants
from .cantor import build_cantor, choose_mdp_blocking, default_delta
from .kde_app import (DiffusionSpec, bias_check, get_kernel, kde, simulate_ou,
                  stationary_density)
from .mdp import MdpExperiment, empirical_rate
from .mixing import SequenceSpec, geometric_profile
from .processes import (exact_tail_small, mc_tail, process_spec_from_json,
                        simulate)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VIOLATION = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _fmt(value) -> str:
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def _config_hash(config: dict) -> str:
    canon = json.dumps(config, sort_keys=True, default=str)
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def _metadata(config: dict, seed: int) -> dict:
    return {"tool": "mixbound", "version": __version__,
            "config_sha256": _config_hash(config), "seed": seed}


def _atomic_write(path: str | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".mixbound-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_json(path: str | None, payload: dict, config: dict, seed: int) -> None:
    doc = {"meta": _metadata(config, seed), "result": payload}
    _atomic_write(path, json.dumps(doc, indent=2, default=_fmt) + "\n")


def _write_csv(path: str | None, header: list[str], rows: list[dict],
               config: dict, seed: int) -> None:
    meta = _metadata(config, seed)
    buf = io.StringIO()
    for key, value in meta.items():
        buf.write(f"# {key}={value}\n")
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(_fmt(row[h]) for h in header) + "\n")
    _atomic_write(path, buf.getvalue())


def _load_config(path: str) -> dict:
    with open(path) as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise UsageError("config file must hold a JSON object")
    return doc


def _require(config: dict, keys: dict, where: str) -> None:
    for key, kind in keys.items():
        if key not in config:
            raise UsageError(f"{where}: missing required key {key!r}")
        if not isinstance(config[key], kind):
            raise UsageError(f"{where}: key {key!r} must be {kind}")


def _resolve_seed(args) -> int:
    if getattr(args, "seed", None) is not None:
        return args.seed
    env = os.environ.get("MIXBOUND_SEED")
    return int(env) if env else 0


def _constants_from_args(args) -> BoundConstants:
    if getattr(args, "constants_file", None):
        return BoundConstants.from_json(_load_config(args.constants_file))
    if args.c is None:
        raise UsageError("provide --c or --constants-file")
    return make_constants(args.c, geometric_profile(args.c))


def _a_rule(descriptor: dict):
    form = descriptor.get("form")
    if form == "power":
        exponent = float(descriptor["exponent"])
        return lambda n: float(n) ** exponent
    if form == "const":
        value = float(descriptor["value"])
        return lambda n: value
    raise UsageError(f"unknown a_n rule {form!r}")


def cmd_bound(args) -> int:
    seed = _resolve_seed(args)
    constants = _constants_from_args(args)
    profile = geometric_profile(constants.c)
    spec = SequenceSpec(M=args.M, profile=profile, v_squared=args.v2)
    config = {"command": "bound", "n": args.n, "x": args.x, "M": args.M,
              "v2": args.v2, "c": constants.c, "grid": args.grid}
    if args.grid:
        start, stop, num = args.grid
        rows = []
        for x in np.linspace(start, stop, int(num)):
            report = best_bound(args.n, float(x), spec, constants)
            rows.extend(report.csv_rows())
        _write_csv(args.out, ["n", "x", "bound", "value", "is_best"], rows,
                   config, seed)
        return EXIT_OK
    report = best_bound(args.n, args.x, spec, constants)
    _write_json(args.out, report.to_json(), config, seed)
    if args.csv:
        _write_csv(args.csv, ["n", "x", "bound", "value", "is_best"],
                   report.csv_rows(), config, seed)
    return EXIT_OK


def cmd_cantor(args) -> int:
    config = {"command": "cantor", "A": args.A, "delta": args.delta}
    delta = args.delta if args.delta is not None else default_delta(args.A)
    scheme = build_cantor(args.A, delta)
    rows = []
    for level in range(scheme.k + 1):
        rows.append({"level": level, "count": 2 ** level,
                     "leaf_length": scheme.A * ((1 - scheme.delta) / 2) ** level,
                     "measure": scheme.A * (1 - scheme.delta) ** level})
    _write_csv(args.out, ["level", "count", "leaf_length", "measure"], rows,
               config, _resolve_seed(args))
    return EXIT_OK


def cmd_simulate(args) -> int:
    seed = _resolve_seed(args)
    if args.config:
        doc = _load_config(args.config)
        _require(doc, {"spec": dict, "n": int}, "simulate config")
        spec_doc, n = doc["spec"], doc["n"]
        seed = doc.get("seed", seed)
    else:
        if not args.kind or not args.n:
            raise UsageError("provide --config or --kind and --n")
        spec_doc = {"kind": args.kind, "p": args.p, "q": args.q}
        n = args.n
    spec = process_spec_from_json(spec_doc)
    path = simulate(spec, n, seed)
    config = {"command": "simulate", "spec": spec_doc, "n": n}
    rows = [{"k": k + 1, "value": float(v)} for k, v in enumerate(path.values)]
    _write_csv(args.out, ["k", "value"], rows, config, seed)
    return EXIT_OK


def cmd_verify(args) -> int:
    doc = _load_config(args.config)
    _require(doc, {"spec": dict, "n_grid": list, "x_factors": list,
                   "reps": int}, "verify config")
    seed = doc.get("seed", _resolve_seed(args))
    confidence = doc.get("confidence", 0.99)
    which = doc.get("bounds", ["bern3"])
    spec = process_spec_from_json(doc["spec"])
    overrides = doc.get("constants_overrides")
    constants = make_constants(spec.profile.c_effective, spec.profile,
                               overrides=overrides)
    seq = SequenceSpec(M=spec.M, profile=spec.profile)
    rows = []
    violations = 0

    def run_cell(cell):
        n, factor = cell
        x = factor * math.sqrt(n)
        est = mc_tail(spec, n, x, doc["reps"], seed, confidence=confidence)
        return n, x, est

    cells = [(n, f) for n in doc["n_grid"] for f in doc["x_factors"]]
    jobs = max(1, args.jobs)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run_cell, cells))
    else:
        results = [run_cell(c) for c in cells]
    for n, x, est in results:
        report = best_bound(n, x, seq, constants)
        for name in which:
            if name not in report.bounds:
                continue
            bound = report.bounds[name]
            ok = est.ci_high <= bound
            violations += 0 if ok else 1
            rows.append({"n": n, "x": x, "p_hat": est.p_hat,
                         "wilson_high": est.ci_high, "bound": name,
                         "bound_value": bound, "ok": ok})
    config = {"command": "verify", **doc}
    _write_csv(args.out, ["n", "x", "p_hat", "wilson_high", "bound",
                          "bound_value", "ok"], rows, config, seed)
    return EXIT_VIOLATION if violations else EXIT_OK


def cmd_mdp(args) -> int:
    doc = _load_config(args.config)
    _require(doc, {"spec": dict, "n_grid": list, "a_rule": dict,
                   "t_grid": list}, "mdp config")
    seed = doc.get("seed", _resolve_seed(args))
    experiment = MdpExperiment(
        spec=process_spec_from_json(doc["spec"]),
        n_grid=doc["n_grid"],
        a_rule=_a_rule(doc["a_rule"]),
        t_grid=doc["t_grid"],
        method=doc.get("method", "exact"),
        reps=doc.get("reps", 100_000),
        seed=seed,
    )
    rows = [point.to_json() for point in empirical_rate(experiment)]
    config = {"command": "mdp", **doc}
    _write_csv(args.out, ["n", "t", "a_n", "p", "estimate", "target", "gap",
                          "method", "note"], rows, config, seed)
    return EXIT_OK


def cmd_kde(args) -> int:
    seed = _resolve_seed(args)
    spec = DiffusionSpec(theta=args.theta, sigma_d=args.sigma, dt=args.dt,
                         T=args.T)
    kernel = get_kernel(args.kernel)
    config = {"command": "kde", "theta": args.theta, "sigma": args.sigma,
              "T": args.T, "h": args.h, "x": args.x, "dt": args.dt,
              "kernel": args.kernel, "bias_h": args.bias_h, "reps": args.reps}
    path = simulate_ou(spec, seed)
    estimate = kde(path, args.x, args.h, kernel)
    payload = estimate.to_json()
    payload["stationary_density"] = stationary_density(spec, args.x)
    _write_json(args.out, payload, config, seed)
    if args.bias_h:
        report = bias_check(spec, args.x, args.bias_h, kernel, args.reps, seed)
        rows = [{"h": h, "bias": b} for h, b in zip(report.h_grid, report.biases)]
        rows.append({"h": "slope", "bias": report.slope})
        _write_csv(args.bias_out, ["h", "bias"], rows, config, seed)
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="mixbound",
                     description="Tail bounds and deviation diagnostics for "
                                 "bounded mixing sequences")
    parser.add_argument("--seed", type=int, default=None,
                        help="base seed (default: MIXBOUND_SEED env var or 0)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bound", help="evaluate tail bounds at (n, x)")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--x", type=float, default=0.0)
    p.add_argument("--M", type=float, default=1.0)
    p.add_argument("--v2", type=float, default=None)
    p.add_argument("--c", type=float, default=None)
    p.add_argument("--constants-file", default=None)
    p.add_argument("--grid", nargs=3, type=float, metavar=("START", "STOP", "NUM"),
                   default=None, help="sweep x and emit CSV")
    p.add_argument("--out", default=None)
    p.add_argument("--csv", default=None)
    p.set_defaults(fn=cmd_bound)

    p = sub.add_parser("cantor", help="print a construction summary as CSV")
    p.add_argument("--A", type=float, required=True)
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_cantor)

    p = sub.add_parser("simulate", help="simulate a bounded mixing sequence")
    p.add_argument("--config", default=None)
    p.add_argument("--kind", default=None)
    p.add_argument("--p", type=float, default=None)
    p.add_argument("--q", type=float, default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("verify", help="Monte Carlo tails against the bounds")
    p.add_argument("--config", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("mdp", help="moderate-deviation rate diagnostics")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_mdp)

    p = sub.add_parser("kde", help="kernel density study for the diffusion")
    p.add_argument("--theta", type=float, required=True)
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--T", type=float, default=2000.0)
    p.add_argument("--h", type=float, default=0.2)
    p.add_argument("--x", type=float, default=0.0)
    p.add_argument("--dt", type=float, default=0.01)
    p.add_argument("--kernel", default="gaussian")
    p.add_argument("--bias-h", nargs="+", type=float, default=None)
    p.add_argument("--reps", type=int, default=50)
    p.add_argument("--out", default=None)
    p.add_argument("--bias-out", default=None)
    p.set_defaults(fn=cmd_kde)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.fn(args)
    except UsageError as exc:
        print(f"mixbound: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"mixbound: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"mixbound: i/o error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
