"""Command-line entry point ``maxent``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import harness
from .fem import SolverError
from .gmm import ModelEvaluationError
from .oracles import ORACLES, oracle_freeze
from .qmc import load_generating_vector

EXIT_CONFIG = 2
EXIT_NUMERIC = 3

_SAMPLER_NAMES = {"mc": "mc", "lattice": "lattice_plain", "tent": "lattice_tent"}


def _cmd_run(args) -> int:
    if args.config:
        cfgs = harness.load_config(args.config)
    else:
        cfgs = [harness.default_config(args.experiment)]
    out = Path(args.out)
    reports = harness.run_study(cfgs)
    for cfg in cfgs:
        report = reports[cfg.sampler]
        target = out if len(cfgs) == 1 else out / cfg.sampler
        harness.emit_report(report, target)
        harness.write_summary(report, cfg, target)
        print(f"{cfg.name} {cfg.sampler}: slope {report.slope:.3f} "
              f"(reference {report.reference:.10g}) -> {target}")
    return 0


def _cmd_oracle(args) -> int:
    path = oracle_freeze(args.name, args.out_dir)
    print(path)
    return 0


def _cmd_entropy(args) -> int:
    base = harness.default_config("deconv" if args.model == "deconv" else "elliptic")
    model = base.model
    if args.model == "elliptic" and args.mesh is not None:
        model = harness.EllipticSpec(n=args.mesh, K=args.kl_terms)
    method = args.method or base.entropy.method
    if method not in harness.ENTROPY_METHODS:
        raise harness.ConfigError(f"unknown entropy method {method!r}")
    if args.M < 1 or args.N < 2:
        raise harness.ConfigError("need M >= 1 and N >= 2")
    sampler = _SAMPLER_NAMES[args.sampler]
    rng_s = harness.child_rng(args.seed, args.M, 0, "surrogate")
    rng_e = harness.child_rng(args.seed, args.M, 0, "entropy")
    s = harness.surrogate_for(model, base.prior, sampler, args.M, rng_s)
    est = harness.estimate(s, harness.EntropySpec(method=method), args.N, rng_e)
    print(json.dumps(est.as_dict()))
    return 0


def _cmd_vectors_check(args) -> int:
    path = Path(args.file)
    max_count = args.max_count
    z = load_generating_vector(path, args.dim, max_count)
    odd = bool(np.all(z % 2 == 1))
    print(json.dumps({"file": str(path), "dim": int(z.size), "max_count": max_count,
                      "first": [int(v) for v in z[:5]], "all_odd": odd}))
    if not odd:
        print("warning: even components are not coprime with power-of-two counts",
              file=sys.stderr)
        return EXIT_CONFIG
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="maxent", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a convergence study")
    src = run.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", help="TOML study configuration")
    src.add_argument("--experiment", choices=("deconv", "elliptic"),
                     help="run the published protocol defaults")
    run.add_argument("--out", default="out", help="output directory (default: out)")
    run.set_defaults(func=_cmd_run)

    ora = sub.add_parser("oracle", help="freeze a reference value to a fixture")
    ora.add_argument("--name", required=True, help=f"one of {', '.join(sorted(ORACLES))}")
    ora.add_argument("--out-dir", default="fixtures")
    ora.set_defaults(func=_cmd_oracle)

    ent = sub.add_parser("entropy", help="one surrogate entropy estimate as JSON")
    ent.add_argument("--model", choices=("deconv", "elliptic"), required=True)
    ent.add_argument("--sampler", choices=tuple(_SAMPLER_NAMES), required=True)
    ent.add_argument("-M", type=int, required=True)
    ent.add_argument("-N", type=int, required=True)
    ent.add_argument("--seed", type=int, required=True)
    ent.add_argument("--method", choices=harness.ENTROPY_METHODS,
                     help="defaults to gauss_lattice (deconv) or mobius (elliptic)")
    ent.add_argument("--mesh", type=int, help="elliptic mesh size n")
    ent.add_argument("--kl-terms", type=int, default=100)
    ent.set_defaults(func=_cmd_entropy)

    vec = sub.add_parser("vectors", help="generating vector utilities")
    vsub = vec.add_subparsers(dest="vectors_command", required=True)
    chk = vsub.add_parser("check", help="validate a generating vector file")
    chk.add_argument("file")
    chk.add_argument("--dim", type=int, help="components to read (default: all)")
    chk.add_argument("--max-count", type=int, default=2**20)
    chk.set_defaults(func=_cmd_vectors_check)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (harness.ConfigError, FileNotFoundError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FloatingPointError, SolverError, ModelEvaluationError,
            harness.RealizationError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
