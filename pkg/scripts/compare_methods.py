#!/usr/bin/env python3
"""Head-to-head on one problem: quasi-Newton loop vs the frozen-matrix
optimistic baseline vs plain gradient descent, at equal gradient budgets."""

import argparse
import sys

from oqn import catalog, compute_hyperparams, run
from oqn.harness import baseline_gd
from oqn.rng import RngStream


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--problem", default="cosine_mixture")
    ap.add_argument("--dim", type=int, default=8)
    ap.add_argument("--budget", type=int, default=600)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    spec = catalog(args.problem, args.dim)
    params = compute_hyperparams(spec, args.budget)
    print(f"problem={args.problem} d={args.dim} M={params.m_total} "
          f"(T={params.t_len}, K={params.k_eps}, D={params.d_radius:.4g})")

    rows = []
    for method in ("oqn", "og"):
        rep = run(spec, params, RngStream(args.seed), audit_level="episode",
                  method=method)
        rows.append((method, rep.grad_norm_final, rep.totals["gradients"],
                     rep.totals["matvecs"]))
    gd_steps = 2 * params.m_total + params.k_eps + 1  # equal gradient budget
    gd = baseline_gd(spec, gd_steps)
    rows.append(("gd", min(gd.grad_norms), gd.gradients, 0))

    print(f"{'method':<6} {'best |grad|':>14} {'gradients':>10} {'matvecs':>10}")
    for method, best, grads, mvs in rows:
        print(f"{method:<6} {best:>14.4e} {grads:>10d} {mvs:>10d}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
