"""Property batteries behind `oqn verify`: each check re-derives an invariant
with an independent oracle (dense eigensolvers, finite differences, exact
KKT solves) and reports a pass flag plus the observed margin."""

from __future__ import annotations

import math

import numpy as np

from . import driver, harness
from .eig import MinEvecCase, SepCase, min_evec, sep
from .hessian_learner import LearnerState, QuadLoss, default_rho, learner_step
from .linops import Counter, ShiftedOperator, SymOperator, dense_extreme_eig
from .problems import catalog, fd_check_gradient, fd_check_hessian
from .rng import RngStream
from .trsolver import TrustRegionSubproblem, tr_solve

SCALES = {
    "quick": dict(pairs=150, fd_points=20, trials=150, tr_instances=60,
                  learner_samples=150, run_dim=4, run_budget=120),
    "full": dict(pairs=1000, fd_points=100, trials=1000, tr_instances=500,
                 learner_samples=1000, run_dim=10, run_budget=1000),
}


def _sym(rng, d, scale=1.0):
    m = rng.uniform(-scale, scale, size=(d, d))
    return np.tril(m) + np.tril(m, -1).T


def run_all(level: str, seed: int) -> list:
    cfg = SCALES[level]
    rng = np.random.default_rng(seed)
    checks = []
    checks += _check_problems(rng, cfg)
    checks += _check_linops(rng, cfg)
    checks += _check_eig(rng, cfg, seed)
    checks += _check_trsolver(rng, cfg, seed)
    checks += _check_learner(rng, cfg, seed)
    checks += _check_driver(cfg, seed)
    return checks


def _check_problems(rng, cfg):
    out = []
    for name, dim in (("quadratic", 6), ("cosine_mixture", 6),
                      ("coupled_trig", 6), ("rosenbrock_local", 6)):
        spec = catalog(name, dim, seed=3)
        lo, hi = (-spec.box, spec.box) if spec.box else (-3.0, 3.0)
        worst_g = worst_h = 0.0
        for _ in range(cfg["fd_points"]):
            x = rng.uniform(lo, hi, size=dim)
            worst_g = max(worst_g, fd_check_gradient(spec, x))
            worst_h = max(worst_h, fd_check_hessian(spec, x))
        out.append(harness.CheckResult(
            f"problems.fd.{name}", worst_g <= 1e-6 and worst_h <= 1e-4,
            f"grad_err={worst_g:.2e} hess_err={worst_h:.2e}"))
        viol = 0.0
        for _ in range(cfg["pairs"]):
            x = rng.uniform(lo, hi, size=dim)
            y = rng.uniform(lo, hi, size=dim)
            dist = np.linalg.norm(x - y)
            if dist == 0:
                continue
            gd = np.linalg.norm(spec.grad(x) - spec.grad(y))
            hd = np.linalg.norm(spec.hess(x) - spec.hess(y), ord=2)
            viol = max(viol, gd - spec.l1 * dist, hd - spec.l2 * dist)
        out.append(harness.CheckResult(
            f"problems.lipschitz.{name}", viol <= 1e-9, f"violation={viol:.2e}"))
    return out


def _check_linops(rng, cfg):
    out = []
    d = 20
    counter = Counter()
    op = SymOperator(_sym(rng, d), counter)
    for _ in range(7):
        op.apply(rng.standard_normal(d))
    out.append(harness.CheckResult(
        "linops.counter", counter.count == 7, f"count={counter.count}"))
    lam = 0.7
    base_min, base_max, _, _ = dense_extreme_eig(op)
    sh_min, sh_max, _, _ = dense_extreme_eig(ShiftedOperator(op, lam))
    err = max(abs(sh_min - (base_min - lam)), abs(sh_max - (base_max - lam)))
    out.append(harness.CheckResult(
        "linops.shifted_spectrum", err <= 1e-9, f"err={err:.2e}"))
    return out


def _check_eig(rng, cfg, seed):
    out = []
    sandwich_hits = 0
    resid_ok = True
    budget_ok = True
    n_trials = cfg["trials"]
    for t in range(n_trials):
        d = int(rng.integers(2, 31))
        a = _sym(rng, d, scale=float(rng.uniform(0.5, 3.0)))
        op = SymOperator(a, Counter())
        lam_min, lam_max, _, _ = dense_extreme_eig(op)
        spread = max(lam_max - lam_min, 1e-12)
        delta = float(rng.uniform(0.02, 0.5)) * spread
        stream = RngStream(seed * 100003 + t)
        res = min_evec(op, delta, 0.05, spread, stream)
        if res.lambda_hat <= lam_min <= res.lambda_hat + delta:
            sandwich_hits += 1
        if res.case is MinEvecCase.NEGATIVE_EIG:
            resid = np.linalg.norm(a @ res.v_hat - res.lambda_hat * res.v_hat)
            resid_ok = resid_ok and resid <= delta
        budget_ok = budget_ok and res.matvecs_used <= d
    frac = sandwich_hits / n_trials
    out.append(harness.CheckResult(
        "eig.minevec.sandwich", frac >= 0.95, f"fraction={frac:.3f}"))
    out.append(harness.CheckResult("eig.minevec.residual", resid_ok))
    out.append(harness.CheckResult("eig.minevec.budget", budget_ok))

    sep_scale_hits = 0
    sep_exact_ok = True
    sep_budget_ok = True
    for t in range(n_trials):
        d = int(rng.integers(2, 31))
        l1 = float(rng.uniform(0.5, 2.0))
        w = _sym(rng, d, scale=float(rng.uniform(0.2, 3.0)))
        op = SymOperator(w, Counter())
        stream = RngStream(seed * 99991 + t)
        res = sep(op, l1, 0.05, stream)
        w_norm = np.linalg.norm(w, ord=2)
        if res.case is SepCase.INSIDE_DOUBLED:
            if w_norm <= 2.0 * l1:
                sep_scale_hits += 1
        else:
            if w_norm / res.gamma <= 2.0 * l1:
                sep_scale_hits += 1
            nuc = float(np.sum(np.abs(np.linalg.eigvalsh(res.s_mat))))
            lhs = float(np.vdot(res.s_mat, w)) - l1 * nuc
            sep_exact_ok = sep_exact_ok and lhs >= res.gamma - 1.0 - 1e-9
            sep_exact_ok = sep_exact_ok and np.linalg.norm(res.s_mat) <= 1.0 / l1 + 1e-10
        n_cap = min(d, math.ceil(0.5 * math.log(11.0 * d / 0.05**2) + 0.5))
        sep_budget_ok = sep_budget_ok and res.matvecs_used <= n_cap
    frac = sep_scale_hits / n_trials
    out.append(harness.CheckResult(
        "eig.sep.scaling", frac >= 0.95, f"fraction={frac:.3f}"))
    out.append(harness.CheckResult("eig.sep.separation", sep_exact_ok))
    out.append(harness.CheckResult("eig.sep.budget", sep_budget_ok))
    return out


def _check_trsolver(rng, cfg, seed):
    out = []
    sound_ok = True
    quality_ok = True
    alpha_ok = True
    worst_gap = -math.inf
    for t in range(cfg["tr_instances"]):
        d = int(rng.integers(2, 21))
        a = _sym(rng, d)
        b = rng.standard_normal(d)
        b *= rng.uniform(0, 5) / max(np.linalg.norm(b), 1e-12)
        d_rad = float(rng.choice([0.1, 1.0, 10.0]))
        delta = float(rng.choice([1e-2, 1e-4]))
        op = SymOperator(a, Counter())
        problem = TrustRegionSubproblem(
            a_op=op, b=b, radius=d_rad, delta=delta, q=0.01,
            b_bound=2.0 * op.frobenius_norm())
        sol = tr_solve(problem, RngStream(seed * 7919 + t))
        norm = np.linalg.norm(sol.delta_vec)
        sound_ok = sound_ok and norm <= d_rad + 1e-12 and sol.residual <= delta
        exact = harness.brute_tr(a, b, d_rad)
        gap = (harness.tr_objective(a, b, sol.delta_vec)
               - harness.tr_objective(a, b, exact))
        worst_gap = max(worst_gap, gap - delta * d_rad)
        quality_ok = quality_ok and gap <= delta * d_rad + 1e-9
        if sol.branch.value == "regularized_interior":
            alpha_ok = alpha_ok and abs(norm - d_rad) <= 1e-10 * d_rad
    out.append(harness.CheckResult("trsolver.soundness", sound_ok))
    out.append(harness.CheckResult(
        "trsolver.quality_vs_exact", quality_ok, f"worst_excess={worst_gap:.2e}"))
    out.append(harness.CheckResult("trsolver.interior_alpha_exact", alpha_ok))
    return out


def _check_learner(rng, cfg, seed):
    out = []
    nuc_ok = True
    worst = -math.inf
    d_rad = 1.0
    for _ in range(cfg["learner_samples"]):
        d = int(rng.integers(2, 11))
        b = _sym(rng, d)
        s = rng.standard_normal(d)
        s *= rng.uniform(0, d_rad) / max(np.linalg.norm(s), 1e-12)
        y = rng.standard_normal(d)
        r = y - b @ s
        grad = -np.outer(r, s) - np.outer(s, r)
        nuc = float(np.sum(np.linalg.svd(grad, compute_uv=False)))
        bound = 2.0 * d_rad * math.sqrt(float(r @ r))
        worst = max(worst, nuc - bound)
        nuc_ok = nuc_ok and nuc <= bound + 1e-9
    out.append(harness.CheckResult(
        "learner.nuclear_bound", nuc_ok, f"worst_excess={worst:.2e}"))

    feas_ok = True
    d = 6
    l1 = 1.3
    state = LearnerState.fresh(d, l1, default_rho(d_rad), 0.01)
    stream = RngStream(seed + 17)
    for i in range(60):
        y = rng.standard_normal(d)
        s = rng.standard_normal(d)
        s *= d_rad / max(np.linalg.norm(s), 1e-12)
        state, _ = learner_step(state, QuadLoss(y, s), stream)
        feas_ok = feas_ok and np.linalg.norm(state.w_mat) <= math.sqrt(d) * l1 + 1e-9
    out.append(harness.CheckResult("learner.frobenius_feasible", feas_ok))
    return out


def _check_driver(cfg, seed):
    out = []
    spec = catalog("cosine_mixture", cfg["run_dim"])
    params = driver.compute_hyperparams(spec, cfg["run_budget"])
    report = driver.run(spec, params, RngStream(seed), audit_level="full")
    expected = 2 * params.m_total + params.k_eps + 1
    out.append(harness.CheckResult(
        "driver.gradient_count", report.totals["gradients"] == expected,
        f"{report.totals['gradients']} vs {expected}"))
    for key in ("conversion_step_ok", "averaging_episode_ok", "regret_ok",
                "stationarity_ok", "dynamic_regret_ok", "comparator_loss_ok",
                "comparator_path_ok", "fixed_point_ok"):
        if key in report.audits:
            out.append(harness.CheckResult(f"driver.{key}", bool(report.audits[key])))
    return out
