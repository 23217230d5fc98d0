"""Command-line harness.

Subcommands: ``run <config>``, ``verify [--level quick|full]``,
``bench <config>``, ``dump-params <problem> <M>``.  Exit codes: 0 success,
1 usage error, 2 audit or certificate failure.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import driver, harness
from .errors import CertificateFailure, OqnError
from .problems import catalog


def _parse_problem_token(token: str):
    """'cosine_mixture:d=4' or 'rosenbrock_local:d=6:seed=3'."""
    parts = token.split(":")
    name = parts[0]
    dim = 4
    seed = 0
    kwargs = {}
    for part in parts[1:]:
        key, _, val = part.partition("=")
        if key in ("d", "dim"):
            dim = int(val)
        elif key == "seed":
            seed = int(val)
        elif key in ("mu", "kappa", "box"):
            kwargs[key] = float(val)
        else:
            raise ValueError(f"unknown problem option {key!r}")
    return catalog(name, dim, seed=seed, **kwargs)


def _cmd_run(args) -> int:
    cfg = harness.load_config(args.config)
    exp = harness.run_experiment(cfg)
    harness.write_outputs(exp)
    doc = harness.report_document(exp)
    print(json.dumps(doc, indent=2, sort_keys=True))
    print(f"wall_time_s={exp.wall_time_s:.3f}", file=sys.stderr)
    audits = doc.get("audits") or {}
    if audits and not audits.get("all_ok", True):
        return 2
    return 0


def _cmd_verify(args) -> int:
    checks = harness.verify_suite(args.level)
    failed = 0
    for c in checks:
        status = "PASS" if c.passed else "FAIL"
        line = f"[{status}] {c.name}"
        if c.detail:
            line += f"  ({c.detail})"
        print(line)
        failed += 0 if c.passed else 1
    print(f"{len(checks) - failed}/{len(checks)} checks passed")
    return 0 if failed == 0 else 2


def _cmd_bench(args) -> int:
    with open(args.config, encoding="utf-8") as fh:
        text = fh.read()
    rows, summary = harness.bench(text)
    print("method,budget,seed,best_grad_norm,gradients,matvecs")
    for method, budget, seed, val, grads, mvs in rows:
        print(f"{method},{budget},{seed},{val!r},{grads},{mvs}")
    for method, slope in summary["slopes"].items():
        print(f"# slope[{method}] = {slope:.4f}", file=sys.stderr)
    return 0


def _cmd_dump_params(args) -> int:
    spec = _parse_problem_token(args.problem)
    params = driver.compute_hyperparams(spec, args.budget, gap_bound=args.gap_bound)
    print(json.dumps({
        "d_radius": params.d_radius,
        "eta": params.eta,
        "t_len": params.t_len,
        "k_eps": params.k_eps,
        "m_total": params.m_total,
        "delta_tr": params.delta_tr,
    }, indent=2, sort_keys=True))
    return 0


class _UsageExit1Parser(argparse.ArgumentParser):
    """Usage errors exit 1; code 2 is reserved for audit failures."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def build_parser() -> argparse.ArgumentParser:
    parser = _UsageExit1Parser(prog="oqn", description=__doc__)
    sub = parser.add_subparsers(dest="command", parser_class=_UsageExit1Parser)

    p_run = sub.add_parser("run", help="run a single configured experiment")
    p_run.add_argument("config")
    p_run.set_defaults(func=_cmd_run)

    p_verify = sub.add_parser("verify", help="run the property suites")
    p_verify.add_argument("--level", default="quick", choices=("quick", "full"))
    p_verify.set_defaults(func=_cmd_verify)

    p_bench = sub.add_parser("bench", help="grid over methods and budgets")
    p_bench.add_argument("config")
    p_bench.set_defaults(func=_cmd_bench)

    p_dump = sub.add_parser("dump-params", help="print auto hyperparameters")
    p_dump.add_argument("problem", help="name:d=DIM[:seed=S]")
    p_dump.add_argument("budget", type=int)
    p_dump.add_argument("--gap-bound", type=float, default=None)
    p_dump.set_defaults(func=_cmd_dump_params)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not getattr(args, "func", None):
        parser.print_usage()
        return 1
    try:
        return args.func(args)
    except CertificateFailure as exc:
        print(f"certificate failure: {exc}", file=sys.stderr)
        return 2
    except (OqnError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
