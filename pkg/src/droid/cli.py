"""Command-line front end: characterize, generate, simulate, batch, compare.

Exit codes: 0 success (a simulate run that synchronized), 2 timeout,
1 any parse/validation/kernel error, 64 bad usage.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import analysis
from .errors import DroidError
from .ising import (brute_force_ground_state, hamiltonian, load_problem,
                    problem_hash, random_problem, save_problem)
from .netlist import build_a2a
from .phase import solve_phases
from .sim import SimConfig, simulate, write_periods_csv, write_result_json
from .timing import SurrogateParams, characterize_surrogate, load_timing, save_timing

ORACLE_LIMIT = 24


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.exit(64)


def _sample_seed(master, k):
    return int(np.random.SeedSequence([master, k]).generate_state(1)[0])


def _run_one_sample(m, tf, nl, n, solver, max_time, tolerance, seed):
    if solver == "event":
        cfg = SimConfig(max_time=max_time, tolerance=tolerance, seed=seed)
        res = simulate(nl, tf, cfg)
    else:
        res = solve_phases(m, tf, seed, max_cycles=int(max_time / (2.0 * (4 * m.n + 1) * tf.d0)) or 1,
                           solver=solver)
    spins = res.spins[:m.n]
    return {
        "seed": seed,
        "spins": spins,
        "energy": hamiltonian(m, spins),
        "reason": res.reason,
        "events_processed": getattr(res, "events_processed", 0),
        "wall_time_ms": round(getattr(res, "wall_time_ms", 0.0), 3),
    }


_POOL_CTX = {}


def _pool_init(timing_path, problem_path, n, solver, max_time, tolerance):
    tf = load_timing(timing_path)
    m = load_problem(problem_path)
    nl = build_a2a(n, m, tf) if solver == "event" else None
    _POOL_CTX.update(m=m, tf=tf, nl=nl, n=n, solver=solver,
                     max_time=max_time, tolerance=tolerance)


def _pool_run(job):
    k, seed = job
    c = _POOL_CTX
    try:
        rec = _run_one_sample(c["m"], c["tf"], c["nl"], c["n"], c["solver"],
                              c["max_time"], c["tolerance"], seed)
        rec["sample"] = k
        return rec
    except DroidError as exc:
        return {"sample": k, "seed": seed, "error": str(exc)}


def run_batch(timing_path, problem_path, n, samples, solver, max_time,
              tolerance, master_seed, workers=1):
    """Independent runs with per-sample derived seeds; failures are recorded
    per sample and the batch continues."""
    jobs = [(k, _sample_seed(master_seed, k)) for k in range(samples)]
    if workers <= 1:
        _pool_init(timing_path, problem_path, n, solver, max_time, tolerance)
        results = [_pool_run(job) for job in jobs]
        _POOL_CTX.clear()
    else:
        with ProcessPoolExecutor(
                max_workers=workers, initializer=_pool_init,
                initargs=(timing_path, problem_path, n, solver, max_time, tolerance)) as pool:
            results = list(pool.map(_pool_run, jobs))
    return sorted(results, key=lambda r: r["sample"])


def _summarize(m, results, solver, master_seed, max_time, tolerance):
    energies = [r["energy"] for r in results if "error" not in r]
    if m.n <= ORACLE_LIMIT:
        _, optimum = brute_force_ground_state(m)
        source = "oracle"
    else:
        optimum = min(energies) if energies else None
        source = "best-sample"
    hist = analysis.normalize_and_bin(energies, optimum) if optimum else None
    summary = {
        "problem_hash": problem_hash(m),
        "n_spins": m.n,
        "solver": solver,
        "samples": len(results),
        "master_seed": master_seed,
        "max_time_ps": max_time,
        "tolerance_ps": tolerance,
        "optimum": optimum,
        "optimum_source": source,
        "bin_width": analysis.BIN_WIDTH,
        "failures": sum(1 for r in results if "error" in r),
        "synchronized": sum(1 for r in results if r.get("reason") == "synchronized"),
        "results": results,
    }
    if hist is not None:
        summary["histogram"] = {"edges": hist.edges, "counts": hist.counts,
                                "total": hist.total}
    return summary, hist


def cmd_characterize(args):
    p = SurrogateParams(d0=args.d0, tt0=args.tt0, delta0=args.delta0,
                        k_tt=args.ktt, rho=args.rho, window_w=args.window_ps)
    tf = characterize_surrogate(p, args.cmax)
    save_timing(tf, args.out)
    print(f"wrote timing tables for c_max={args.cmax} to {args.out}")
    return 0


def cmd_generate(args):
    m = random_problem(args.n, args.density, args.jmax, args.seed)
    save_problem(m, args.out)
    print(f"wrote {args.n}-spin problem (density {args.density}, seed {args.seed}) to {args.out}")
    return 0


def cmd_simulate(args):
    tf = load_timing(args.timing)
    m = load_problem(args.problem)
    n = args.n or m.n
    os.makedirs(args.out, exist_ok=True)
    if args.solver == "event":
        nl = build_a2a(n, m, tf)
        cfg = SimConfig(max_time=args.max_time_ps, tolerance=args.tolerance_ps,
                        seed=args.seed)
        res = simulate(nl, tf, cfg)
    else:
        period = 2.0 * (4 * m.n + 1) * tf.d0
        res = solve_phases(m, tf, args.seed,
                           max_cycles=max(int(args.max_time_ps / period), 1),
                           solver=args.solver)
    spins = res.spins[:m.n]
    energy = hamiltonian(m, spins)
    write_result_json(res, os.path.join(args.out, "spins.json"), energy=energy,
                      extra={"solver": args.solver, "problem_hash": problem_hash(m)})
    write_periods_csv(res, os.path.join(args.out, "periods.csv"))
    print(f"{res.reason}: energy {energy}, spins {spins}")
    return 0 if res.reason == "synchronized" else 2


def cmd_batch(args):
    workers = int(os.environ.get("DROID_WORKERS", args.workers))
    m = load_problem(args.problem)
    n = args.n or m.n
    results = run_batch(args.timing, args.problem, n, args.samples, args.solver,
                        args.max_time_ps, args.tolerance_ps, args.seed,
                        workers=workers)
    summary, hist = _summarize(m, results, args.solver, args.seed,
                               args.max_time_ps, args.tolerance_ps)
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if hist is not None:
        analysis.write_histogram_csv(hist, os.path.join(args.out, "histogram.csv"))
    best = min((r["energy"] for r in results if "error" not in r), default=None)
    print(f"{args.samples} samples done, best energy {best}, "
          f"{summary['failures']} failures")
    return 0


def _load_summary(path):
    with open(path) as fh:
        s = json.load(fh)
    h = s.get("histogram")
    if h is None:
        raise DroidError(f"{path} carries no histogram")
    return s, analysis.Histogram(edges=h["edges"], counts=h["counts"], total=h["total"])


def cmd_compare(args):
    sa, ha = _load_summary(args.set_a)
    sb, hb = _load_summary(args.set_b)
    if sa["problem_hash"] != sb["problem_hash"]:
        raise DroidError("sample sets were produced from different problems "
                         f"({sa['problem_hash'][:12]} vs {sb['problem_hash'][:12]})")
    report = analysis.emd_report(ha, hb)
    text = json.dumps(report, indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    print(text)
    return 0


def build_parser():
    ap = _Parser(prog="droid",
                 description="Event-driven simulator for coupled ring-oscillator "
                             "Ising arrays")
    sub = ap.add_subparsers(dest="command", required=True)

    c = sub.add_parser("characterize", help="emit surrogate timing tables")
    c.add_argument("--out", required=True)
    c.add_argument("--cmax", type=int, default=7)
    c.add_argument("--d0", type=float, default=50.0)
    c.add_argument("--tt0", type=float, default=40.0)
    c.add_argument("--delta0", type=float, default=1.0)
    c.add_argument("--ktt", type=float, default=0.1)
    c.add_argument("--rho", type=float, default=0.05)
    c.add_argument("--window-ps", type=float, default=75.0)
    c.set_defaults(func=cmd_characterize)

    g = sub.add_parser("generate", help="write a random problem file")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--density", type=float, required=True)
    g.add_argument("--jmax", type=int, default=7)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("simulate", help="run one problem to synchronization")
    s.add_argument("--timing", required=True)
    s.add_argument("--problem", required=True)
    s.add_argument("--n", type=int, default=0)
    s.add_argument("--max-time-ps", type=float, default=500000.0)
    s.add_argument("--tolerance-ps", type=float, default=0.1)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--solver", choices=("event", "genadler", "dtphase"),
                   default="event")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    b = sub.add_parser("batch", help="independent samples plus histogram")
    b.add_argument("--timing", required=True)
    b.add_argument("--problem", required=True)
    b.add_argument("--n", type=int, default=0)
    b.add_argument("--samples", type=int, required=True)
    b.add_argument("--max-time-ps", type=float, default=500000.0)
    b.add_argument("--tolerance-ps", type=float, default=0.1)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--solver", choices=("event", "genadler", "dtphase"),
                   default="event")
    b.add_argument("--workers", type=int, default=1)
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_batch)

    cp = sub.add_parser("compare", help="EMD between two batch summaries")
    cp.add_argument("set_a")
    cp.add_argument("set_b")
    cp.add_argument("--out")
    cp.set_defaults(func=cmd_compare)
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    if getattr(args, "samples", 1) is not None and getattr(args, "samples", 1) < 1:
        print("samples must be >= 1", file=sys.stderr)
        return 64
    try:
        return args.func(args)
    except DroidError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
