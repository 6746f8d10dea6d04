"""Command-line front end.

Every record is a deterministic function of (config, seed, replicate), and
parallel runs merge results in replicate order, so output bytes do not
depend on the number of workers.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import multiprocessing as mp
import sys
from collections import Counter

import numpy as np

from . import coupling, diagnostics, order, partition, percolation, thinning
from .config import ConfigError, RunConfig
from .models import AreaInteraction, ContinuumRandomCluster, HardSphere, Strauss, hamiltonian
from .order import OrderInterval
from .poisson import RadiusLaw, sample_poisson
from .rng import stream
from .space import Box, Configuration, Point, Window
from .stattests import count_table_test

COMMANDS = ("sample", "thin", "couple", "percolate", "decay", "verify")


# --------------------------------------------------------------------------
# output


def fmt_float(x: float) -> str:
    return "%.17g" % x


def to_json(obj) -> str:
    """Compact JSON with 17 significant digits for floats; non-finite floats become null."""
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt_float(float(obj)) if math.isfinite(obj) else "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        return "{" + ",".join(f"{json.dumps(str(k))}:{to_json(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ",".join(to_json(v) for v in obj) + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _csv_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return fmt_float(float(v)) if math.isfinite(v) else ""
    if isinstance(v, (int, np.integer, str)):
        return str(v)
    return to_json(v)


def write_records(records, fmt: str, fh, columns=None):
    if fmt == "jsonl":
        for rec in records:
            fh.write(to_json(rec) + "\n")
        return
    records = list(records)
    if columns is None:
        columns = []
        for rec in records:
            for k in rec:
                if k not in columns:
                    columns.append(k)
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(columns)
    for rec in records:
        w.writerow([_csv_cell(rec.get(c)) for c in columns])


def rows_of(omega: Configuration) -> list:
    return omega.rows().tolist()


# --------------------------------------------------------------------------
# replicate workers


def _sample_one(cfg: RunConfig, seed: int, rep: int) -> dict:
    rng = stream(seed, rep, "poisson")
    if cfg["sampler"] == "rejection":
        omega = partition.gibbs_rejection_sample(cfg.lam, OrderInterval(), None, cfg.model,
                                                 cfg.window, cfg.Q, rng, cfg.alpha)
    else:
        omega, _ = thinning.thin_sample(_kernel(cfg), rng)
    return {"replicate": rep, "points": rows_of(omega),
            "meta": {"sampler": cfg["sampler"], "model": cfg.model.name, "n": len(omega)}}


def _kernel(cfg: RunConfig) -> thinning.ThinningKernel:
    est = cfg["estimator"]
    return thinning.ThinningKernel(cfg.model, cfg.lam, cfg.Q, cfg.window, alpha=cfg.alpha,
                                   method=est["method"], z_budget=est["quad_budget"],
                                   bias_budget=est["bias_budget"])


def _thin_one(cfg: RunConfig, seed: int, rep: int) -> dict:
    info = {}
    kept, poisson = thinning.thin_sample(_kernel(cfg), stream(seed, rep, "poisson"), info)
    return {"replicate": rep, "kept": rows_of(kept), "poisson": rows_of(poisson),
            "meta": {"n_kept": len(kept), "n_poisson": len(poisson),
                     "bias": info["bias"], "flagged": info["flagged"]}}


def _couple_one(cfg: RunConfig, seed: int, rep: int) -> dict:
    c = cfg["couple"]
    try:
        s = coupling.disagreement_sample(cfg.model, cfg.lam, cfg.alpha, cfg.Q, cfg.window,
                                         cfg.gamma1, cfg.gamma2, seed, rep,
                                         depth_cap=int(c["depth_cap"]), shared=bool(c["shared"]))
    except coupling.DepthCapExceeded as exc:
        return {"replicate": rep, "aborted": True, "trace": exc.trace()}
    rep_ = coupling.verify_disagreement(s)
    return {"replicate": rep, "xi1": rows_of(s.xi1), "xi2": rows_of(s.xi2), "xi3": rows_of(s.xi3),
            "layers": s.n_layers, "depth": s.depth, "disagreement": rep_["n_disagreement"],
            "verification": {"passed": rep_["passed"], "violations": rep_["violations"]}}


def _sweep_one(cfg: RunConfig, seed: int, rep: int):
    p = cfg["percolate"]
    window = percolation.ball_window(max(p["distances"]), cfg.perc_Q, p["d"], p["W"])
    return percolation.sweep_replicate(p["alphas"], p["distances"], cfg.perc_Q, window,
                                       stream(seed, rep, "mc"))


def _critical_one(cfg: RunConfig, seed: int, job):
    si, rep = job
    p = cfg["percolate"]
    size = p["threshold_sizes"][si]
    window = percolation.box_window(size, cfg.perc_Q, p["d"], p["W"])
    a_max = percolation.default_alpha_max(cfg.perc_Q, p["d"])
    return percolation.critical_alpha_one(window, cfg.perc_Q, a_max, stream(seed, 1 + si, rep, "mc"))


def _decay_one(cfg: RunConfig, seed: int, rep: int):
    return partition.gibbs_rejection_sample(cfg.lam, OrderInterval(), None, cfg.model, cfg.window,
                                            cfg.Q, stream(seed, rep, "poisson"), cfg.alpha)


WORKERS = {"sample": _sample_one, "thin": _thin_one, "couple": _couple_one,
           "sweep": _sweep_one, "critical": _critical_one, "decay": _decay_one}


def _chunk_job(args):
    name, data, seed, jobs = args
    cfg = RunConfig(data)
    fn = WORKERS[name]
    return [fn(cfg, seed, j) for j in jobs]


def run_jobs(name: str, cfg: RunConfig, seed: int, jobs: list, workers: int) -> list:
    """Evaluate a worker over jobs, merged in job order whatever the pool size."""
    if workers <= 1 or len(jobs) < 2:
        return _chunk_job((name, cfg.data, seed, jobs))
    n_chunks = min(len(jobs), workers * 4)
    bounds = np.linspace(0, len(jobs), n_chunks + 1).astype(int)
    chunks = [(name, cfg.data, seed, jobs[a:b]) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
    ctx = mp.get_context("fork") if "fork" in mp.get_all_start_methods() else mp.get_context()
    with ctx.Pool(workers) as pool:
        parts = pool.map(_chunk_job, chunks)
    return [r for part in parts for r in part]


# --------------------------------------------------------------------------
# commands


def cmd_sample(cfg, seed, reps, workers):
    return run_jobs("sample", cfg, seed, list(range(reps)), workers)


def cmd_thin(cfg, seed, reps, workers):
    return run_jobs("thin", cfg, seed, list(range(reps)), workers)


def cmd_couple(cfg, seed, reps, workers):
    records = run_jobs("couple", cfg, seed, list(range(reps)), workers)
    depth = Counter(r["depth"] for r in records if not r.get("aborted"))
    violations = sum(len(r["verification"]["violations"]) for r in records if not r.get("aborted"))
    summary = {"summary": {"records": len(records), "violations": violations,
                           "aborted": sum(1 for r in records if r.get("aborted")),
                           "depth_histogram": {str(k): depth[k] for k in sorted(depth)}}}
    return records + [summary]


PERC_COLUMNS = ["kind", "alpha", "distance", "p_connect", "se", "reps", "seed",
                "kappa", "K", "r_squared", "ci_low", "ci_high"]


def cmd_percolate(cfg, seed, reps, workers):
    p = cfg["percolate"]
    alphas, dists = list(p["alphas"]), list(p["distances"])
    hits = np.zeros((len(alphas), len(dists)))
    for h in run_jobs("sweep", cfg, seed, list(range(reps)), workers):
        hits += h
    prob = hits / reps
    se = np.sqrt(prob * (1 - prob) / reps)
    rows = []
    for i, a in enumerate(alphas):
        for j, n in enumerate(dists):
            rows.append({"kind": "point", "alpha": float(a), "distance": float(n),
                         "p_connect": float(prob[i, j]), "se": float(se[i, j]),
                         "reps": reps, "seed": seed})
    for i, a in enumerate(alphas):
        if len(dists) >= 4 and np.all(prob[i] > 0):
            fit = percolation.fit_decay(list(zip(dists, prob[i], se[i])))
            rows.append({"kind": "decay", "alpha": float(a), "reps": reps, "seed": seed,
                         "kappa": fit.kappa, "K": fit.K, "r_squared": fit.r_squared})
    sizes = p["threshold_sizes"]
    t_reps = int(p["threshold_reps"])
    if p["d"] >= 2 and len(sizes) >= 2 and t_reps > 0:
        jobs = [(si, r) for si in range(len(sizes)) for r in range(t_reps)]
        vals = np.array(run_jobs("critical", cfg, seed, jobs, workers)).reshape(len(sizes), t_reps)
        a_max = percolation.default_alpha_max(cfg.perc_Q, p["d"])
        est = percolation.threshold_from_samples(sizes, list(vals), a_max, stream(seed, 0, "mc"))
        rows.append({"kind": "threshold", "alpha": est.alpha_c, "reps": t_reps, "seed": seed,
                     "ci_low": est.ci_low, "ci_high": est.ci_high})
    return rows


def cmd_decay(cfg, seed, reps, workers):
    dc = cfg["decay"]
    samples = run_jobs("decay", cfg, seed, list(range(reps)), workers)
    table = diagnostics.correlation_table(cfg.model, cfg.lam, cfg.Q, cfg.window, dc["cell"],
                                          dc["separations"], reps, None, cfg.alpha, samples=samples)
    rows = [{"kind": "correlation", **r._asdict()} for r in table]
    mags = [(r.separation, abs(r.cov_density), r.cov_se) for r in table]
    if len(mags) >= 4 and all(v > 0 for _, v, _ in mags):
        fit = percolation.fit_decay(mags)
        rows.append({"kind": "fit", "kappa": fit.kappa, "K": fit.K, "r_squared": fit.r_squared})
    inf = dc.get("influence")
    if inf:
        box = Box(tuple(inf["box_lo"]), tuple(inf["box_hi"]))
        event = diagnostics.EVENTS[inf.get("event", "count_at_least_1")]
        rep = diagnostics.boundary_influence(cfg.model, cfg.lam, box, cfg.window, cfg.gamma1,
                                             cfg.gamma2, event, reps, cfg.Q, cfg.alpha, seed)
        rows.append({"kind": "influence", "direct_gap": rep.direct_gap, "gap_se": rep.gap_se,
                     "percolation_bound": rep.percolation_bound, "bound_se": rep.bound_se,
                     "distance": rep.distance, "holds": rep.holds})
    return rows


# --------------------------------------------------------------------------
# verify


def _check(name, passed, **stat):
    return {"check": name, "passed": bool(passed), "stat": stat}


def _verify_order(rng):
    bad = 0
    for W in (4, 8, 16, 32):
        for m in (2, 3, 4):
            w = Window((0.0,) * (m - 1), (1.0,) * (m - 1), 1.0, W)
            ints = rng.integers(0, 2 ** W, size=(500, m))
            for row in ints.tolist():
                if order.deinterleave(order.interleave(row, m), m) != row:
                    bad += 1
            c, r = order.from_ints(w, ints)
            bad += int(np.any(order.to_ints(w, c, r) != ints))
    return _check("order_roundtrip", bad == 0, failures=bad)


def _verify_blocks():
    m, W = 2, 4
    bad = 0
    for level in range(W + 1):
        side = 2 ** level
        for a0 in range(0, 2 ** W, side):
            for a1 in range(0, 2 ** W, side):
                keys = sorted(order.interleave([a0 + i, a1 + j], m)
                              for i in range(side) for j in range(side))
                bad += keys[-1] - keys[0] + 1 != side ** m or len(set(keys)) != side ** m
    return _check("hyperblock_bijection", bad == 0, failures=int(bad))


def _verify_z():
    worst = 0.0
    for L in (0.3, 0.7, 1.0):
        for lam in (0.5, 1.0, 2.0):
            a = partition.z_exact_1d(lam, 0.0, L, 0.1, HardSphere()).value
            b = partition.z_tonks(lam, L, 0.1)
            worst = max(worst, abs(a - b) / b)
    return _check("hard_rod_partition_function", worst < 1e-8, max_rel_error=worst)


def _verify_additivity(rng):
    worst = 0.0
    for model in (HardSphere(), Strauss(0.7), ContinuumRandomCluster(2.0), AreaInteraction(0.8)):
        for _ in range(30):
            n = int(rng.integers(0, 7))
            omega = Configuration(rng.random((n, 2)), rng.uniform(0.02, 0.2, n), d=2)
            gamma = Configuration(rng.random((3, 2)) + 1.3, rng.uniform(0.02, 0.5, 3), d=2)
            perm = rng.permutation(n)
            a = hamiltonian(model, None, omega, gamma, order=perm)
            b = model.energy(omega, gamma)
            if math.isinf(a) or math.isinf(b):
                worst = max(worst, 0.0 if a == b else math.inf)
            else:
                worst = max(worst, abs(a - b))
    return _check("energy_additivity", worst < 1e-9, max_abs_error=worst)


def _verify_thinning(cfg, seed, reps):
    k = _kernel(cfg)
    a = [len(thinning.thin_sample(k, stream(seed, i, "poisson"))[0]) for i in range(reps)]
    b = [len(partition.gibbs_rejection_sample(cfg.lam, OrderInterval(), None, cfg.model, cfg.window,
                                              cfg.Q, stream(seed, i, "aux"), cfg.alpha))
         for i in range(reps)]
    _, p, _ = count_table_test(a, b)
    return _check("thinning_matches_rejection", p > 0.01, p_value=p, reps=reps)


def _verify_coupling(cfg, seed, reps):
    bad = 0
    for i in range(reps):
        s = coupling.disagreement_sample(cfg.model, cfg.lam, cfg.alpha, cfg.Q, cfg.window,
                                         cfg.gamma1, cfg.gamma2, seed, i)
        bad += not coupling.verify_disagreement(s)["passed"]
    return _check("coupling_structure", bad == 0, violating_samples=bad, reps=reps)


def _verify_percolation(rng):
    Q = RadiusLaw.delta(0.5)
    p, _ = percolation.connection_sweep([0.0, 0.4, 0.8], [1, 2, 3, 4], Q, 2, 200, rng)
    mono = bool(np.all(np.diff(p, axis=0) >= 0) and np.all(np.diff(p, axis=1) <= 0))
    return _check("percolation_monotone", mono and p[0].max() == 0.0, p_first_alpha_row=p[1].tolist())


def _verify_upsilon(rng):
    Q = RadiusLaw.delta(0.5)
    w = Window((-4.0, -4.0), (4.0, 4.0), 0.5, 24)
    ok = all(percolation.upsilon_holds(sample_poisson(w, 2.0, Q, rng), 0.5) for _ in range(200))
    return _check("radius_control_delta", ok)


def _planted():
    X = Point((0.5, 0.5), 0.1)
    lonely = Configuration.from_points([X])
    far = Configuration([[5.0, 5.0]], [0.1])
    s = coupling.CouplingSample(lonely, Configuration.empty(2), lonely, (), Configuration.empty(2), far)
    rep = coupling.verify_disagreement(s)
    return _check("planted_violation_fixture", rep["passed"], violations=len(rep["violations"]))


def cmd_verify(cfg, seed, reps, workers):
    rng = stream(seed, 0, "mc")
    checks = [_verify_order(rng), _verify_blocks(), _verify_z(), _verify_additivity(rng),
              _verify_thinning(cfg, seed, reps), _verify_coupling(cfg, seed, min(reps, 500)),
              _verify_percolation(rng), _verify_upsilon(rng)]
    if cfg["verify"].get("fixture") == "planted":
        checks.append(_planted())
    failed = [c["check"] for c in checks if not c["passed"]]
    return checks + [{"summary": {"passed": not failed, "failed": failed}}]


# --------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="gibbsballs", description="Sample, couple and diagnose Gibbs processes of balls.",
        epilog=("commands: sample (Gibbs draws), thin (draws with their dominating Poisson "
                "process), couple (disagreement-coupled triples), percolate (Boolean-model "
                "connection table), decay (cell correlations), verify (built-in self checks)"))
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="YAML run configuration")
    ap.add_argument("--seed", type=int, help="override the configured seed")
    ap.add_argument("--reps", type=int, help="override the configured replicate count")
    ap.add_argument("--out", help="output path (default: standard output)")
    ap.add_argument("--format", choices=("jsonl", "csv"), default=None,
                    help="jsonl (default) or csv (default for percolate)")
    ap.add_argument("--workers", type=int, help="override the configured worker count")
    ap.add_argument("--print-config", action="store_true",
                    help="print the fully resolved configuration and exit")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig.from_file(args.config) if args.config else RunConfig.default()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if args.print_config:
        sys.stdout.write(cfg.dump())
        return 0
    seed = cfg["seed"] if args.seed is None else args.seed
    reps = cfg["reps"] if args.reps is None else args.reps
    if args.command == "verify" and args.reps is None:
        reps = cfg["verify"]["reps"]
    workers = cfg["workers"] if args.workers is None else args.workers
    fmt = args.format or ("csv" if args.command == "percolate" else "jsonl")
    fn = {"sample": cmd_sample, "thin": cmd_thin, "couple": cmd_couple, "percolate": cmd_percolate,
          "decay": cmd_decay, "verify": cmd_verify}[args.command]
    records = fn(cfg, seed, reps, workers)
    columns = PERC_COLUMNS if args.command == "percolate" and fmt == "csv" else None
    if fmt == "csv" and args.command in ("sample", "thin", "couple", "verify"):
        records = [_flatten(r) for r in records]
    buf = io.StringIO()
    write_records(records, fmt, buf, columns)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    if args.command == "verify":
        return 0 if records[-1]["summary"]["passed"] else 1
    if args.command == "couple" and records[-1]["summary"]["violations"]:
        return 1
    return 0


def _flatten(rec: dict) -> dict:
    """One CSV row per record: scalars kept, nested values serialised as JSON."""
    if "summary" in rec:
        return {"summary": to_json(rec["summary"])}
    return {k: (v if isinstance(v, (int, float, str, bool)) else to_json(v)) for k, v in rec.items()}


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
