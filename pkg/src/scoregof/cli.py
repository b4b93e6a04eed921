"""Command-line interface.

Subcommands::

    scoregof test        --null gaussian --stat cvm --boot parametric --B 499 --alpha 0.05 --seed 7 --in data.csv --out result.json
    scoregof calibrate   (same flags as test)                      --out calibration.json [--replicates reps.csv]
    scoregof size        --config study.toml --seed 7 --out size.csv [--format csv|json]
    scoregof power       --config study.toml --seed 7 --out power.csv
    scoregof drift       --config drift.toml --seed 7 --out drift.csv
    scoregof equivalence --config equiv.toml --seed 7 --out equiv.csv

Exit status: 0 on success, 2 on usage errors, 3 on data or model errors.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from .bootstrap import decide, null_distribution, observed_statistic
from .directions import build_family, family_from_dict
from .estimator import make_null, make_scheme
from .exceptions import DomainError
from .harness import (
    DriftConfig,
    StudyConfig,
    drift_check,
    equivalence_check,
    run_power_study,
    run_size_study,
    write_report,
)
from .model import null_from_dict
from .stats import NAMES, StatisticSpec

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

EXIT_USAGE = 2
EXIT_DATA = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# --------------------------------------------------------------------------- #
# Input and output
# --------------------------------------------------------------------------- #


def _is_number(tok):
    try:
        float(tok)
    except ValueError:
        return False
    return True


def read_sample(path) -> np.ndarray:
    """One real per line, or two comma-separated reals; an optional header line."""
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    except OSError as err:
        raise DomainError(f"cannot read {path}: {err.strerror}") from None
    if rows and not _is_number(rows[0][0].strip()):
        rows = rows[1:]
    if not rows:
        raise DomainError(f"{path}: no data rows")
    width = len(rows[0])
    if width not in (1, 2):
        raise DomainError(f"{path}: expected 1 or 2 columns, found {width}")
    out = np.empty((len(rows), width))
    for i, r in enumerate(rows):
        if len(r) != width:
            raise DomainError(f"{path}: line {i + 1} has {len(r)} fields, expected {width}")
        for j, tok in enumerate(r):
            try:
                out[i, j] = float(tok)
            except ValueError:
                raise DomainError(f"{path}: line {i + 1} field {j + 1} is not a real number: {tok!r}") from None
    return out[:, 0] if width == 1 else out


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def dump_json(obj, path):
    text = json.dumps(obj, indent=2, default=_json_default) + "\n"
    if path == "-":
        sys.stdout.write(text)
        return
    with open(path, "w") as fh:
        fh.write(text)


def _load_config(path) -> dict:
    try:
        with open(path, "rb") as fh:
            if str(path).endswith(".json"):
                return json.load(fh)
            return tomllib.load(fh)
    except OSError as err:
        raise DomainError(f"cannot read config {path}: {err.strerror}") from None
    except (ValueError, tomllib.TOMLDecodeError) as err:
        raise UsageError(f"malformed config {path}: {err}") from None


def _param(text):
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    key, value = text.split("=", 1)
    try:
        return key.replace("-", "_"), json.loads(value)
    except json.JSONDecodeError:
        return key.replace("-", "_"), value


# --------------------------------------------------------------------------- #
# Subcommands
# --------------------------------------------------------------------------- #


def _test_specs(args):
    null = make_null(args.null, args.dist, args.dist_params, args.rho0)
    fam = build_family(args.family, **dict(args.family_param)) if args.family else None
    stat = StatisticSpec(args.stat, family=fam)
    scheme = make_scheme(args.boot, args.B, args.m, args.replace)
    return null, stat, scheme


def _run_test(args):
    null, stat, scheme = _test_specs(args)
    X = read_sample(args.input)
    T, diag = observed_statistic(X, null, stat, scheme)
    dist = null_distribution(X, null, stat, scheme, args.seed)
    out = decide(T, dist, args.alpha)
    out.null = null.to_dict()
    out.family = stat.family.to_dict() if stat.family is not None else {"kind": "cvm-closed-form"}
    diag = dict(diag)
    diag["stat"] = stat.to_dict()
    diag["input"] = args.input
    if dist.m is not None:
        diag["m"] = dist.m
    out.diagnostics = diag
    return out, dist


def cmd_test(args):
    out, dist = _run_test(args)
    dump_json(out.to_dict(), args.out)
    if args.replicates:
        dist.to_csv(args.replicates)


def cmd_calibrate(args):
    out, dist = _run_test(args)
    d = out.to_dict()
    d["replicates"] = dist.replicates.tolist()
    dump_json(d, args.out)
    if args.replicates:
        dist.to_csv(args.replicates)


def _study_config(args):
    cfg = _load_config(args.config)
    cfg["seed"] = args.seed
    return cfg


def cmd_size(args):
    report = run_size_study(StudyConfig.from_dict(_study_config(args)))
    write_report(report, args.out, args.format)
    return report


def cmd_power(args):
    report = run_power_study(StudyConfig.from_dict(_study_config(args)))
    write_report(report, args.out, args.format)
    return report


def cmd_drift(args):
    report = drift_check(DriftConfig.from_dict(_study_config(args)))
    write_report(report, args.out, args.format)
    return report


def cmd_equivalence(args):
    cfg = _study_config(args)
    fam = cfg.get("family")
    report = equivalence_check(null_from_dict(cfg["null"]), family_from_dict(fam) if fam else None,
                               tuple(cfg.get("n", (50, 200, 800))), cfg.get("R", 500), cfg["seed"])
    write_report(report, args.out, args.format)
    return report


def _seed(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be a non-negative integer, got {text!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError(f"seed must be a non-negative integer, got {text!r}")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="scoregof", description="Score-process goodness-of-fit tests.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    for name, func, help_ in (("test", cmd_test, "run one test and write a JSON outcome"),
                              ("calibrate", cmd_calibrate, "bootstrap the null distribution only")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--null", required=True, choices=("simple", "gaussian", "independence", "copula"))
        p.add_argument("--dist", default="uniform", help="scipy.stats distribution for the simple null")
        p.add_argument("--dist-params", type=float, nargs="*", default=())
        p.add_argument("--rho0", type=float, default=0.0, help="copula correlation under the null")
        p.add_argument("--stat", required=True, choices=NAMES)
        p.add_argument("--family", default=None, help="direction family kind for sup/quad")
        p.add_argument("--family-param", type=_param, action="append", default=[], metavar="KEY=VALUE")
        p.add_argument("--boot", default="parametric", choices=("parametric", "resampling", "m-out-of-n"))
        p.add_argument("--B", type=int, default=199)
        p.add_argument("--m", type=int, default=None)
        p.add_argument("--replace", action="store_true", help="m-out-of-n with replacement")
        p.add_argument("--alpha", type=float, default=0.05)
        p.add_argument("--seed", type=_seed, required=True)
        p.add_argument("--in", dest="input", required=True)
        p.add_argument("--out", required=True)
        p.add_argument("--replicates", default=None, help="also write the replicate CSV here")
        p.set_defaults(func=func)

    for name, func in (("size", cmd_size), ("power", cmd_power), ("drift", cmd_drift),
                       ("equivalence", cmd_equivalence)):
        p = sub.add_parser(name, help=f"run a {name} study from a TOML or JSON config")
        p.add_argument("--config", required=True)
        p.add_argument("--seed", type=_seed, required=True)
        p.add_argument("--out", required=True)
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except UsageError as err:
        print(f"scoregof: error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (TypeError, KeyError) as err:
        print(f"scoregof: error: bad configuration: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (DomainError, OSError) as err:
        print(f"scoregof: error: {err}", file=sys.stderr)
        return EXIT_DATA
    return 0


if __name__ == "__main__":
    sys.exit(main())
