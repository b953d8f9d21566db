"""Command line runner: ``randzeta <subcommand> [options]``.

Every run writes ``<name>.csv`` (the data table) and ``<name>.json`` (the
full config, version, wall time and per-check results) to the output
directory, which defaults to $RANDZETA_OUTPUT_DIR or the current directory.
Options may also come from a ``key = value`` file given with ``--config``;
flags on the command line win.

Exit codes: 0 all checks passed, 2 configuration error, 3 capacity error,
4 a check failed.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import subprocess
import sys
import time
from pathlib import Path

from . import __version__, experiments
from .analytic import SIGMA_SQ
from .primes import CapacityError

EXIT_OK, EXIT_CONFIG, EXIT_CAPACITY, EXIT_CHECK = 0, 2, 3, 4
OUTPUT_ENV = "RANDZETA_OUTPUT_DIR"


class ConfigError(ValueError):
    pass


def _list(kind):
    def parse(text):
        if isinstance(text, (list, tuple)):
            return [kind(x) for x in text]
        return [kind(x) for x in str(text).replace(" ", "").split(",") if x]

    parse.__name__ = f"{kind.__name__} list"
    return parse


def _int(text) -> int:
    # accept 1e6 style counts
    v = float(text)
    if v != int(v):
        raise ValueError(text)
    return int(v)


_int.__name__ = "int"


def _range(text):
    lo, hi = _list(float)(text)
    return (lo, hi)


_range.__name__ = "pair"


def _version() -> str:
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            cwd=Path(__file__).resolve().parent, capture_output=True, text=True, timeout=5,
        )
        if out.returncode == 0 and out.stdout.strip():
            return f"{__version__}+{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


# subcommand -> (experiment function, [(flag, type, default, help)], stochastic);
# "stochastic" may be a predicate on the parsed args
COMMANDS = {
    "sieve": (experiments.sieve, [
        ("log-limit", float, 4.0, "sieve primes up to exp(LOG_LIMIT)"),
        ("cache", str, None, "also save the table to this .npz file"),
    ], False),
    "verify-covariance": (experiments.verify_covariance, [
        ("k-max", int, 4, "largest scale"),
        ("dh", float, 0.25, "lag between the two points"),
        ("replicates", _int, 10**5, "Monte Carlo samples per scale (0 skips MC)"),
        ("replicates-top", _int, None, "samples at k = 4 (default: --replicates)"),
        ("tol-near", float, 0.05, "allowed |rho_k - sigma_k^2| up to the branching point"),
        ("c-max", float, 2.0, "allowed decay constant beyond the branching point"),
    ], True),
    "verify-cgf": (experiments.verify_cgf, [
        ("ks", _list(int), "1,2,3", "scales"),
        ("lams", _list(float), "0.5,1", "tilt parameters"),
        ("replicates", _int, 10**6, "base samples"),
        ("h", float, 0.0, "evaluation point"),
    ], True),
    "verify-tilt": (experiments.verify_tilt, [
        ("k", int, 3, "scale (tilt covers scales 1..k)"),
        ("lam", float, 1.0, "tilt parameter"),
        ("lam2", float, None, "second tilt parameter (two-point tilt)"),
        ("h", float, 0.0, "tilt point"),
        ("dh", float, 0.25, "lag of the second point"),
        ("replicates", _int, 20000, "tilted samples"),
        ("tol-linear", float, 0.01, "allowed |mean - lam sigma_k^2|"),
    ], True),
    "max": (experiments.field_max, [
        ("model", str, "prime", "prime or brw"),
        ("n", int, 3, "depth"),
        ("g", int, None, "grid exponent (prime model; default n)"),
        ("replicates", _int, 500, "replicates"),
    ], True),
    "brw-max": (experiments.brw_max, [
        ("depths", _list(int), "12,14,16,18,20", "tree depths"),
        ("replicates", _int, 10**5, "replicates per depth"),
        ("top-levels", int, 8, "simulated levels; deeper subtrees use the exact max law (-1: full trees)"),
        ("alpha-tol", float, 0.02, "allowed |alpha - log 2|"),
        ("beta-range", _range, "0.5,1.0", "allowed BRW beta as lo,hi (use --beta-range=lo,hi if lo < 0)"),
        ("iid-beta-range", _range, "0.1,0.45", "allowed i.i.d. beta"),
        ("bootstrap", int, 200, "bootstrap resamples for fit SEs"),
    ], True),
    "ballot": (experiments.ballot, [
        ("ns", _list(int), "64,128,256,512", "walk lengths (alias --n)"),
        ("a", float, 1.0, "ceiling"),
        ("b", float, 0.0, "window start"),
        ("delta", float, 1.0, "window width"),
        ("variance", float, SIGMA_SQ, "increment variance"),
        ("method", str, "dp", "dp, mc or both"),
        ("mesh", float, 0.02, "DP mesh"),
        ("paths", _int, 10**6, "MC paths"),
        ("scaling-tol", float, 0.15, "allowed successive variation of n^1.5 P"),
    ], lambda a: a.method != "dp"),
    "exceedances": (experiments.exceedances, [
        ("n", int, 3, "depth"),
        ("g", int, 9, "grid exponent"),
        ("replicates", _int, 2000, "replicates"),
        ("quantile", float, 0.8, "pilot quantile of the max used as level"),
        ("pilot-replicates", _int, 1000, "pilot replicates (seed + 1)"),
        ("m", float, None, "explicit level (skips the pilot)"),
        ("barrier-intercept", float, 1.0, "B in the Z~ barrier k log 2 + B"),
    ], True),
    "oscillation": (experiments.oscillation, [
        ("n", int, 3, "depth"),
        ("k", int, 3, "top scale of X_{r,k}"),
        ("r", int, 0, "bottom scale"),
        ("g", int, 12, "grid exponent of the fine grid"),
        ("a", float, 2.0, "oscillation threshold"),
        ("xs", _list(float), "0.5,1,1.5", "centre levels x"),
        ("replicates", _int, 10**4, "replicates"),
        ("center", float, 0.5, "window centre"),
        ("c-max", float, 10.0, "allowed calibrated constant"),
    ], True),
    "compare-gaussian": (experiments.compare_gaussian, [
        ("k", int, 3, "scale"),
        ("dh", float, 0.25, "lag"),
        ("replicates", _int, 10**5, "samples"),
        ("ks-max", float, 0.02, "allowed KS distance (k >= 3)"),
    ], True),
    "joint": (experiments.joint, [
        ("n", int, 3, "depth"),
        ("r", int, 0, "cutoff scale"),
        ("eps", float, 0.1, "level m_{n-r}(-eps)"),
        ("g", int, 6, "grid exponent"),
        ("delta", float, 1.0, "window width"),
        ("ls", _list(int), "0,1,2", "branching points"),
        ("replicates", _int, 40000, "replicates"),
        ("c", float, 1.0, "bound constant"),
    ], True),
}
WORKER_COMMANDS = {"verify-covariance", "verify-cgf", "verify-tilt", "oscillation", "compare-gaussian"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="randzeta", description="Randomized Euler product experiments.")
    p.add_argument("--version", action="version", version=_version())
    sub = p.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True
    for name, (fn, opts, stochastic) in COMMANDS.items():
        sp = sub.add_parser(name, help=(fn.__doc__ or "").strip().splitlines()[0] if fn.__doc__ else None)
        for flag, kind, default, help_ in opts:
            names = [f"--{flag}"]
            if flag == "ns":
                names.append("--n")
            sp.add_argument(*names, type=kind, default=default, help=help_)
        if stochastic:
            sp.add_argument("--seed", type=int, default=None, help="master seed (required for random runs)")
        if name in WORKER_COMMANDS:
            sp.add_argument("--workers", type=int, default=os.cpu_count() or 1, help="worker processes")
        sp.add_argument("--config", type=str, default=None, help="key = value file of option defaults")
        sp.add_argument("--output-dir", type=str, default=None, help=f"output directory (default ${OUTPUT_ENV} or .)")
        sp.add_argument("--name", type=str, default=name, help="output file stem")
        sp.set_defaults(_stochastic=stochastic)
    return p


def read_config(path: str) -> dict:
    """Parse ``key = value`` lines; '#' starts a comment."""
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}") from e
    for i, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{i}: expected 'key = value'")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k.replace("-", "_")] = v
    return out


def parse(argv) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        conf = read_config(args.config)
        sp = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sp._actions}
        for key in conf:
            if key not in known or key in ("config", "help"):
                raise ConfigError(f"unknown config key {key!r} for {args.command}")
        sp.set_defaults(**conf)
        args = parser.parse_args(argv)
    stochastic = args._stochastic(args) if callable(args._stochastic) else args._stochastic
    if stochastic and args.seed is None:
        raise ConfigError(f"{args.command}: --seed is required")
    if getattr(args, "seed", 0) is None:
        args.seed = 0
    return args


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if hasattr(x, "item") and not isinstance(x, (str, bytes)):
        x = x.item()
    if isinstance(x, float) and not math.isfinite(x):
        return repr(x)
    return x


def _cell(v):
    if isinstance(v, float):
        return repr(v)
    if hasattr(v, "item"):
        return _cell(v.item())
    return v


def write_outputs(outdir: Path, stem: str, res: experiments.Result, meta: dict) -> tuple[Path, Path]:
    outdir.mkdir(parents=True, exist_ok=True)
    csv_path, json_path = outdir / f"{stem}.csv", outdir / f"{stem}.json"
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(res.columns)
        for row in res.rows:
            w.writerow([_cell(v) for v in row])
    doc = {**meta, "summary": res.summary, "checks": res.checks, "passed": res.passed}
    json_path.write_text(json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n")
    return csv_path, json_path


def run(argv=None) -> int:
    try:
        args = parse(sys.argv[1:] if argv is None else argv)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    config = {k: v for k, v in vars(args).items() if not k.startswith("_")}
    fn = COMMANDS[args.command][0]
    skip = {"command", "config", "output_dir", "name"}
    kwargs = {k: v for k, v in config.items() if k not in skip}
    if args.command == "brw-max" and kwargs.get("top_levels") == -1:
        kwargs["top_levels"] = None
    t0 = time.perf_counter()
    try:
        res = fn(**kwargs)
    except CapacityError as e:
        print(f"capacity error: {e}", file=sys.stderr)
        return EXIT_CAPACITY
    except (ValueError, TypeError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    wall = time.perf_counter() - t0
    outdir = Path(args.output_dir or os.environ.get(OUTPUT_ENV) or ".")
    meta = {
        "command": args.command,
        "config": config,
        "version": _version(),
        "wall_time_s": wall,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    csv_path, _ = write_outputs(outdir, args.name, res, meta)
    for name, ok in res.checks.items():
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
    print(f"wrote {csv_path} ({len(res.rows)} rows) in {wall:.1f}s")
    return EXIT_OK if res.passed else EXIT_CHECK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
