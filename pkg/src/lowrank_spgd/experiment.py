"""Run solves described by an :class:`~lowrank_spgd.config.ExperimentConfig`.

Each (seed, lambda, T) grid point writes one CSV trace; the sweep then writes
``summary.yaml`` with the resolved config, per-run results and, when the
horizon grid has several points, fitted log-log slopes.
"""

from __future__ import annotations

import copy
import io
import itertools
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np
import yaml

from . import factored as fm
from .memtrack import max_rss_bytes, track_allocations
from .problems import FactoredLeastSquares, MultivariateRegression
from .prox import DomainSpec
from .solver import SolverConfig, StepSchedule, composite_objective, dense_baseline_solve, spgd_solve

CSV_HEADER = "t,eta,objective,rank,grad_sq_norm,dist_to_ref"


def build_problem(pcfg):
    kind = pcfg["kind"]
    common = dict(m=pcfg["m"], n=pcfg["n"], rank=pcfg["rank"], sigma=pcfg["sigma"], seed=pcfg["seed"])
    if kind == "factored_least_squares":
        return FactoredLeastSquares.random(distribution=pcfg["probing"], **common)
    return MultivariateRegression.random(feature_scale=pcfg["feature_scale"], noise=pcfg["noise"], **common)


def _target_norm(problem):
    target = problem.target if isinstance(problem, FactoredLeastSquares) else problem.w_bar
    return fm.frobenius_norm(target)


def build_domain(scfg, problem):
    dom = scfg["domain"]
    if dom["kind"] == "unbounded":
        return DomainSpec.unbounded()
    radius = dom["radius"] if dom["radius"] is not None else dom["radius_factor"] * _target_norm(problem)
    return DomainSpec.frobenius_ball(radius)


def build_solver_config(scfg, problem, seed, lam=None, horizon=None):
    sch = scfg["schedule"]
    T = scfg["T"] if horizon is None else horizon
    if sch["kind"] == "inverse_mu_t":
        mu = sch["mu"] if sch["mu"] is not None else problem.strong_convexity
        schedule = StepSchedule.inverse_mu_t(mu, T)
    else:
        schedule = StepSchedule.constant_over_sqrt_t(sch["c"], T)
    return SolverConfig(
        lam=scfg["lambda"] if lam is None else lam,
        schedule=schedule,
        domain=build_domain(scfg, problem),
        sketch_width=scfg["k"],
        rank_budget=scfg["rank_budget"],
        seed=seed,
        trace_every=scfg["trace_every"],
        reortho_every=scfg["reortho_every"],
    )


def reference_solution(problem, solver_config, mode="auto"):
    """(reference iterate, reference objective) or (None, None)."""
    if mode == "none":
        return None, None
    lam = solver_config.lam
    if isinstance(problem, FactoredLeastSquares) and mode in ("auto", "closed_form"):
        ref = problem.optimum(lam, solver_config.domain)
        return ref, composite_objective(problem, ref, lam)
    if mode == "closed_form":
        raise ValueError("closed-form reference only exists for factored_least_squares")
    m, n = problem.shape
    if m * n > fm.DENSE_SIZE_CAP:
        return None, None
    ref = fm.from_dense(dense_baseline_solve(problem, solver_config), tol=1e-14)
    return ref, composite_objective(problem, ref, lam)


def _fmt(x):
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def trace_csv(result, header_comment):
    buf = io.StringIO()
    for line in header_comment.rstrip("\n").splitlines():
        buf.write(f"# {line}\n")
    buf.write(CSV_HEADER + "\n")
    for rec in result.trace:
        row = (rec.t, rec.eta, rec.objective, rec.rank, rec.grad_sq_norm, rec.dist_to_ref)
        buf.write(",".join(_fmt(v) for v in row) + "\n")
    return buf.getvalue()


def read_trace_csv(path):
    """Parse a trace file back into a list of row dicts (comment lines skipped)."""
    rows = []
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    header = lines[0].strip().split(",")
    for ln in lines[1:]:
        vals = ln.strip().split(",")
        rows.append({k: (int(v) if k in ("t", "rank") else float(v)) for k, v in zip(header, vals)})
    return header, rows


def run_name(seed, lam, T):
    return f"trace_seed{seed}_lam{lam:g}_T{T}.csv"


def run_one(cfg_data, seed, lam, T, out_dir):
    """Solve one grid point, write its trace, return its summary entry."""
    problem = build_problem(cfg_data["problem"])
    sconf = build_solver_config(cfg_data["solver"], problem, seed, lam, T)
    ref, ref_obj = reference_solution(problem, sconf, cfg_data["reference"])

    resolved = copy.deepcopy(cfg_data)
    resolved["solver"]["lambda"] = lam
    resolved["solver"]["T"] = T
    resolved["sweep"]["seeds"] = [seed]
    resolved["run"] = {"seed": seed, "lambda": lam, "T": T, "step_schedule": sconf.schedule.kind,
                       "radius": sconf.domain.radius}

    start = time.perf_counter()
    if cfg_data["output"]["track_memory"]:
        with track_allocations() as mem:
            result = spgd_solve(problem, sconf, reference=ref)
        peak = int(mem.peak_bytes)
    else:
        result = spgd_solve(problem, sconf, reference=ref)
        peak = None
    wall = time.perf_counter() - start

    path = os.path.join(out_dir, run_name(seed, lam, T))
    with open(path, "w") as fh:
        fh.write(trace_csv(result, yaml.safe_dump(resolved, sort_keys=False)))

    final_obj = composite_objective(problem, result.final, lam)
    entry = {
        "seed": seed,
        "lambda": float(lam),
        "T": int(T),
        "trace_file": os.path.basename(path),
        "final_objective": float(final_obj),
        "final_rank": int(result.final.rank),
        "max_rank": int(result.max_rank),
        "max_grad_sq_norm": float(result.max_grad_sq_norm) if result.trace else None,
        "wall_time_s": float(wall),
        "peak_traced_bytes": peak,
        "max_rss_bytes": int(max_rss_bytes()),
    }
    if ref is not None:
        dist = fm.frobenius_distance(result.final, ref)
        entry["final_dist_to_ref"] = float(dist)
        entry["final_objective_gap"] = float(final_obj - ref_obj)
    return entry


def loglog_slope(xs, ys):
    xs, ys = np.asarray(xs, float), np.asarray(ys, float)
    ok = (xs > 0) & (ys > 0)
    if ok.sum() < 2:
        return None
    return float(np.polyfit(np.log(xs[ok]), np.log(ys[ok]), 1)[0])


def rate_fits(entries):
    """Fitted slopes of seed-averaged final metrics against T, per lambda."""
    fits = []
    for lam, group in itertools.groupby(sorted(entries, key=lambda e: (e["lambda"], e["T"])),
                                        key=lambda e: e["lambda"]):
        group = list(group)
        horizons = sorted({e["T"] for e in group if e["T"] > 0})
        if len(horizons) < 2:
            continue
        fit = {"lambda": lam, "horizons": horizons}
        for key, name in (("final_dist_to_ref", "dist_sq"), ("final_objective_gap", "objective_gap")):
            if all(key in e for e in group):
                means = []
                for T in horizons:
                    vals = [e[key] for e in group if e["T"] == T]
                    means.append(float(np.mean([v * v for v in vals]) if name == "dist_sq" else np.mean(vals)))
                fit[f"mean_{name}"] = means
                fit[f"slope_{name}"] = loglog_slope(horizons, means)
        fits.append(fit)
    return fits


def run_experiment(cfg, out_dir=None, seeds=None, trace_every=None):
    """Run the full sweep; returns the summary dict (also written to ``summary.yaml``)."""
    data = copy.deepcopy(cfg.data)
    if seeds is not None:
        data["sweep"]["seeds"] = list(seeds)
    if trace_every is not None:
        data["solver"]["trace_every"] = int(trace_every)
    if out_dir is not None:
        data["output"]["dir"] = out_dir
    out_dir = data["output"]["dir"]
    os.makedirs(out_dir, exist_ok=True)

    lambdas = data["sweep"]["lambdas"] or [data["solver"]["lambda"]]
    horizons = data["sweep"]["horizons"] or [data["solver"]["T"]]
    jobs = [(data, s, lam, T, out_dir) for lam in lambdas for T in horizons for s in data["sweep"]["seeds"]]
    workers = min(data["sweep"]["workers"], len(jobs))
    start = time.perf_counter()
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            entries = list(pool.map(run_one, *zip(*jobs)))
    else:
        entries = [run_one(*job) for job in jobs]

    peaks = [e["peak_traced_bytes"] for e in entries if e["peak_traced_bytes"] is not None]
    summary = {
        "config": data,
        "results": {
            "runs": entries,
            "total_wall_time_s": time.perf_counter() - start,
            "largest_allocation_bound_bytes": max(peaks) if peaks else None,
            "dense_size_bytes": 8 * data["problem"]["m"] * data["problem"]["n"],
        },
    }
    fits = rate_fits(entries)
    if fits:
        summary["results"]["rate_fits"] = fits
    with open(os.path.join(out_dir, "summary.yaml"), "w") as fh:
        fh.write("# resolved config and results; rerun with `lowrank-spgd solve` on the config block\n")
        yaml.safe_dump(_plain(summary), fh, sort_keys=False)
    return summary


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and math.isnan(obj):
        return None
    return obj
