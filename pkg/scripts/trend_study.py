#!/usr/bin/env python3
"""Budget-scaling study: best-episode gradient norm vs iteration budget.

Writes one CSV row per (budget, seed) and prints the fitted log-log slope
of the per-budget medians.  Defaults reproduce the acceptance trend check.
"""

import argparse
import sys

import numpy as np

from oqn import catalog, compute_hyperparams, run
from oqn.rng import RngStream


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--problem", default="cosine_mixture")
    ap.add_argument("--dim", type=int, default=8)
    ap.add_argument("--budgets", default="240,480,960,1920")
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--out", default=None, help="CSV path (default stdout)")
    args = ap.parse_args()

    spec = catalog(args.problem, args.dim)
    budgets = [int(b) for b in args.budgets.split(",")]
    lines = ["budget,seed,best_grad_norm,gradients,matvecs"]
    medians = []
    for budget in budgets:
        params = compute_hyperparams(spec, budget)
        vals = []
        for seed in range(args.seeds):
            rep = run(spec, params, RngStream(seed), audit_level="off")
            vals.append(rep.grad_norm_final)
            lines.append(f"{budget},{seed},{rep.grad_norm_final!r},"
                         f"{rep.totals['gradients']},{rep.totals['matvecs']}")
        medians.append(float(np.median(vals)))
        print(f"budget {budget}: median best |grad| = {medians[-1]:.3e}",
              file=sys.stderr)
    slope = float(np.polyfit(np.log(budgets), np.log(medians), 1)[0])
    print(f"log-log slope of medians: {slope:.4f}", file=sys.stderr)
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        print(text, end="")
    return 0


if __name__ == "__main__":
    sys.exit(main())
