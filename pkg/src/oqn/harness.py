"""Experiment harness: configs, baselines, brute-force oracles, reports.

The config format is flat key=value text (diff-friendly, no dependencies).
Reports are JSON-shaped structured text whose content is a pure function of
(config, seed); wall time is echoed to the console but kept out of the files
so reruns are bit-identical.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numpy.typing import NDArray
from scipy.optimize import brentq

from . import driver
from .driver import HyperParams, RunReport, compute_hyperparams
from .errors import DimTooLarge, UnknownLevel
from .linops import Counter
from .problems import ObjectiveSpec, catalog, eval_gradient
from .rng import RngStream

METHODS = ("oqn", "og_baseline", "gd_baseline")

CSV_HEADER = "k,grad_norm_wbar,episode_regret,sum_loss,cum_gradients,cum_matvecs"


@dataclass
class RunConfig:
    problem: str
    dim: int
    method: str = "oqn"
    budget: int = 120
    seed: int = 0
    problem_seed: int = 0
    p_fail: float = 0.01
    audit: str = "episode"
    params: str = "auto"
    gap_bound: Optional[float] = None
    manual: Optional[HyperParams] = None
    step_size: Optional[float] = None
    eps_target: Optional[float] = None
    out_csv: Optional[str] = None
    out_report: Optional[str] = None
    problem_kwargs: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.audit not in driver.AUDIT_LEVELS:
            raise ValueError(f"audit must be one of {driver.AUDIT_LEVELS}")


_PROBLEM_KEYS = {"mu": float, "kappa": float, "box": float}
_MANUAL_KEYS = ("d_radius", "eta", "t_len", "k_eps", "delta_tr")


def parse_config(text: str) -> RunConfig:
    """Parse flat key=value lines; '#' starts a comment; blank lines ignored."""
    pairs = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"bad config line (need key=value): {raw!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        pairs[key] = val

    def pop(key, cast, default=None):
        if key in pairs:
            return cast(pairs.pop(key))
        return default

    cfg = RunConfig(
        problem=pop("problem", str, "cosine_mixture"),
        dim=pop("dim", int, 4),
        method=pop("method", str, "oqn"),
        budget=pop("budget", int, 120),
        seed=pop("seed", int, 0),
        problem_seed=pop("problem_seed", int, 0),
        p_fail=pop("p_fail", float, 0.01),
        audit=pop("audit", str, "episode"),
        params=pop("params", str, "auto"),
        gap_bound=pop("gap_bound", float),
        step_size=pop("step_size", float),
        eps_target=pop("eps_target", float),
        out_csv=pop("out_csv", str),
        out_report=pop("out_report", str),
    )
    if cfg.params == "manual":
        vals = {k: pairs.pop(k, None) for k in _MANUAL_KEYS}
        missing = [k for k, v in vals.items() if v is None]
        if missing:
            raise ValueError(f"params=manual needs keys {missing}")
        t_len, k_eps = int(vals["t_len"]), int(vals["k_eps"])
        cfg.manual = HyperParams(
            d_radius=float(vals["d_radius"]), eta=float(vals["eta"]),
            t_len=t_len, k_eps=k_eps, m_total=t_len * k_eps,
            delta_tr=float(vals["delta_tr"]), p_fail=cfg.p_fail,
        )
    elif cfg.params != "auto":
        raise ValueError("params must be 'auto' or 'manual'")
    for key, cast in _PROBLEM_KEYS.items():
        if key in pairs:
            cfg.problem_kwargs[key] = cast(pairs.pop(key))
    if pairs:
        raise ValueError(f"unknown config keys: {sorted(pairs)}")
    return cfg


def load_config(path: str) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def build_spec(cfg: RunConfig) -> ObjectiveSpec:
    return catalog(cfg.problem, cfg.dim, seed=cfg.problem_seed, **cfg.problem_kwargs)


def effective_seed(cfg: RunConfig) -> int:
    env = os.environ.get("OQN_SEED")
    return int(env) if env is not None else cfg.seed


# --------------------------------------------------------------------------
# baselines


@dataclass
class GdReport:
    grad_norms: list
    x_final: NDArray
    gradients: int


def baseline_gd(spec: ObjectiveSpec, steps: int, step_size: Optional[float] = None) -> GdReport:
    """Plain gradient descent with step 1/L1: the standard comparator."""
    if step_size is None:
        step_size = 1.0 / spec.l1
    if step_size <= 0:
        raise ValueError("step_size must be positive")
    counter = Counter()
    x = spec.x0.copy()
    norms = []
    for _ in range(steps):
        g = eval_gradient(spec, x, counter)
        norms.append(float(np.linalg.norm(g)))
        x = x - step_size * g
    return GdReport(grad_norms=norms, x_final=x, gradients=counter.count)


def baseline_og(spec: ObjectiveSpec, params: HyperParams, rng: RngStream,
                audit_level: str = "episode") -> RunReport:
    """The conversion loop with the matrix frozen at zero: the hint is the
    trailing-point gradient and the update is the explicit projection."""
    return driver.run(spec, params, rng, audit_level=audit_level, method="og")


# --------------------------------------------------------------------------
# brute-force trust-region oracle (test-side; never on the hot path)


def brute_tr(a_dense: NDArray, b: NDArray, d_radius: float, dim_cap: int = 20) -> NDArray:
    """Exact trust-region minimizer by eigendecomposition plus a root solve
    on the boundary multiplier, covering the interior, boundary and
    degenerate (hard) cases."""
    a_dense = np.asarray(a_dense, dtype=float)
    b = np.asarray(b, dtype=float)
    d = a_dense.shape[0]
    if d > dim_cap:
        raise DimTooLarge(f"brute_tr caps at dim {dim_cap}, got {d}")
    evals, evecs = np.linalg.eigh(a_dense)
    bt = evecs.T @ b
    lam_min = evals[0]

    if lam_min > 0:
        y = -bt / evals
        if np.linalg.norm(y) <= d_radius:
            return evecs @ y

    def norm_y(mu: float) -> float:
        return float(np.linalg.norm(bt / (evals + mu)))

    mu_floor = max(0.0, -lam_min)
    # perturb off exact singularity; detect the hard case by the limit norm
    tiny = 1e-14 * max(1.0, float(abs(evals[-1])), float(abs(lam_min)))
    if norm_y(mu_floor + tiny) < d_radius:
        # hard case: pseudo-inverse solution plus a minimum-eigenvector step
        gap = evals - lam_min
        mask = gap > 1e-12 * max(1.0, float(evals[-1] - lam_min))
        y = np.where(mask, -bt / np.where(mask, gap, 1.0), 0.0)
        interior_norm_sq = float(y @ y)
        tau = math.sqrt(max(0.0, d_radius**2 - interior_norm_sq))
        y = y + tau * (np.arange(d) == 0)
        return evecs @ y

    mu_hi = mu_floor + tiny
    while norm_y(mu_hi) >= d_radius:
        mu_hi = 2.0 * mu_hi + float(np.linalg.norm(b)) / d_radius + 1.0
    mu_star = brentq(lambda mu: norm_y(mu) - d_radius, mu_floor + tiny, mu_hi,
                     xtol=1e-15, rtol=8.9e-16, maxiter=200)
    y = -bt / (evals + mu_star)
    return evecs @ y


def tr_objective(a_dense: NDArray, b: NDArray, x: NDArray) -> float:
    return 0.5 * float(x @ (a_dense @ x)) + float(b @ x)


# --------------------------------------------------------------------------
# experiment execution and serialization


@dataclass
class ExperimentReport:
    config: RunConfig
    report: object
    wall_time_s: float
    csv_rows: list


def _csv_rows_from_report(report: RunReport) -> list:
    return [
        f"{ep.k},{ep.grad_norm_at_wbar!r},{ep.episode_regret!r},"
        f"{ep.sum_loss!r},{ep.cum_gradients},{ep.cum_matvecs}"
        for ep in report.episodes
    ]


def run_experiment(cfg: RunConfig) -> ExperimentReport:
    """Execute one configured run and assemble its CSV rows and report."""
    import time

    spec = build_spec(cfg)
    seed = effective_seed(cfg)
    t0 = time.perf_counter()
    if cfg.method == "gd_baseline":
        gd = baseline_gd(spec, cfg.budget, cfg.step_size)
        wall = time.perf_counter() - t0
        rows = [f"{i + 1},{g!r},,,{i + 1},0" for i, g in enumerate(gd.grad_norms)]
        return ExperimentReport(config=cfg, report=gd, wall_time_s=wall, csv_rows=rows)
    if cfg.params == "manual":
        params = cfg.manual
    else:
        params = compute_hyperparams(spec, cfg.budget, cfg.p_fail, cfg.gap_bound)
    rng = RngStream(seed)
    method = "og" if cfg.method == "og_baseline" else "oqn"
    report = driver.run(spec, params, rng, audit_level=cfg.audit, method=method,
                        eps_target=cfg.eps_target)
    wall = time.perf_counter() - t0
    return ExperimentReport(config=cfg, report=report, wall_time_s=wall,
                            csv_rows=_csv_rows_from_report(report))


def _jsonable(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def report_document(exp: ExperimentReport) -> dict:
    """Deterministic report body (no wall time; that goes to the console)."""
    cfg = exp.config
    doc = {
        "config": {
            "problem": cfg.problem, "dim": cfg.dim, "method": cfg.method,
            "budget": cfg.budget, "seed": effective_seed(cfg),
            "p_fail": cfg.p_fail, "audit": cfg.audit,
            "gap_bound": cfg.gap_bound, "params": cfg.params,
        },
    }
    rep = exp.report
    if isinstance(rep, GdReport):
        doc["result"] = {
            "grad_norm_final": rep.grad_norms[-1] if rep.grad_norms else None,
            "gradients": rep.gradients,
        }
        return _jsonable(doc)
    doc["params"] = {
        "d_radius": rep.params.d_radius, "eta": rep.params.eta,
        "t_len": rep.params.t_len, "k_eps": rep.params.k_eps,
        "m_total": rep.params.m_total, "delta_tr": rep.params.delta_tr,
        "p_fail": rep.params.p_fail,
    }
    doc["result"] = {
        "grad_norm_final": rep.grad_norm_final,
        "stationary_start": rep.stationary_start,
        "gradients": rep.totals.get("gradients"),
        "matvecs": rep.totals.get("matvecs"),
        "tr_stats": {k: v for k, v in rep.totals.get("tr", {}).items()},
        "episodes": len(rep.episodes),
        "box_violations": rep.totals.get("box_violations", 0),
    }
    doc["audits"] = rep.audits
    return _jsonable(doc)


def write_outputs(exp: ExperimentReport) -> None:
    cfg = exp.config
    if cfg.out_csv:
        with open(cfg.out_csv, "w", encoding="utf-8") as fh:
            fh.write(CSV_HEADER + "\n")
            for row in exp.csv_rows:
                fh.write(row + "\n")
    if cfg.out_report:
        with open(cfg.out_report, "w", encoding="utf-8") as fh:
            json.dump(report_document(exp), fh, indent=2, sort_keys=True)
            fh.write("\n")


def debug_dump_operator(op) -> dict:
    """Row-major lower-triangle serialization of a symmetric operator."""
    mat = op.dense()
    d = mat.shape[0]
    tri = [float(mat[i, j]) for i in range(d) for j in range(i + 1)]
    return {"dim": d, "lower_triangle_row_major": tri}


# --------------------------------------------------------------------------
# bench grid


def bench(cfg_text: str) -> tuple[list, dict]:
    """Grid over methods x budgets x seeds; returns rows and fitted slopes.

    Extra keys over the run config: ``budgets`` and ``seeds`` (comma lists),
    ``methods`` (comma list).  Each cell gets an isolated stream and
    counters.  Slope = least-squares fit of log(best grad norm) vs log(M),
    per method, using the median over seeds at each budget.
    """
    pairs = {}
    for raw in cfg_text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            key, val = (s.strip() for s in line.split("=", 1))
            pairs[key] = val
    problem = pairs.get("problem", "cosine_mixture")
    dim = int(pairs.get("dim", 8))
    budgets = [int(s) for s in pairs.get("budgets", "240,480,960").split(",")]
    seeds = [int(s) for s in pairs.get("seeds", "0,1,2").split(",")]
    methods = [s.strip() for s in pairs.get("methods", "oqn").split(",")]
    p_fail = float(pairs.get("p_fail", 0.01))
    audit = pairs.get("audit", "off")
    problem_seed = int(pairs.get("problem_seed", 0))

    rows = []
    best = {}
    for method in methods:
        for budget in budgets:
            per_seed = []
            for seed in seeds:
                cfg = RunConfig(problem=problem, dim=dim, method=method,
                                budget=budget, seed=seed, p_fail=p_fail,
                                audit=audit, problem_seed=problem_seed)
                exp = run_experiment(cfg)
                rep = exp.report
                if isinstance(rep, GdReport):
                    val = min(rep.grad_norms)
                    grads = rep.gradients
                    mvs = 0
                else:
                    val = rep.grad_norm_final
                    grads = rep.totals["gradients"]
                    mvs = rep.totals["matvecs"]
                per_seed.append(val)
                rows.append((method, budget, seed, val, grads, mvs))
            best[(method, budget)] = float(np.median(per_seed))
    slopes = {}
    for method in methods:
        xs = np.log([b for b in budgets])
        ys = np.log([best[(method, b)] for b in budgets])
        slopes[method] = float(np.polyfit(xs, ys, 1)[0])
    return rows, {"medians": best, "slopes": slopes}


# --------------------------------------------------------------------------
# property-suite runner


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


def verify_suite(level: str = "quick", seed: int = 20240) -> list:
    """Execute the per-module property batteries at the requested scale."""
    if level not in ("quick", "full"):
        raise UnknownLevel(f"level must be 'quick' or 'full', got {level!r}")
    from . import verify as _verify

    return _verify.run_all(level, seed)
