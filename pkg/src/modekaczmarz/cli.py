"""Command-line entry point: ``modekaczmarz <command> ...``.

Exit status is 0 on success, 2 for configuration errors and 3 for runtime
failures.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import analysis as an
from .harness import (PRESETS, CaseReport, ConfigError, RunReport, analysis_for, emit_csv,
                      load_preset, parse_config, run_case_seed, run_experiment, single_seed,
                      with_overrides)
from .kaczmarz import generate_problem

EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _load(args):
    if args.config and args.preset:
        raise ConfigError("give either --config or --preset, not both")
    if args.config:
        with open(args.config) as fh:
            cfg = parse_config(fh.read())
    else:
        cfg = load_preset(args.preset or "honest")
    if getattr(args, "set", None):
        cfg = with_overrides(cfg, args.set)
    if getattr(args, "full_trace", False):
        cfg = with_overrides(cfg, ["experiment.full_trace=on"])
    return cfg


def _counts(args) -> an.CategoryCounts:
    if args.counts:
        counts = [int(c) for c in args.counts.split(",")]
    else:
        counts = an.equal_split_counts(args.N, args.p, args.k) if args.k else [args.N]
    return an.CategoryCounts(counts, args.n)


def cmd_probs(args) -> int:
    cc = _counts(args)
    mp = an.mode_probabilities(cc)
    out = {"counts": list(cc.counts), "n": cc.n, **mp.to_dict()}
    workers = []
    for ell, c in enumerate(cc.counts):
        if c:
            p_w, given, joint = an.worker_mode_probability(cc, ell)
            workers.append({"category": ell, "P_w": f"{p_w.numerator}/{p_w.denominator}",
                            "P_mode_given_w": float(given), "P_joint": float(joint)})
    out["workers"] = workers
    print(json.dumps(out, indent=2))
    return 0


def cmd_mc(args) -> int:
    cc = _counts(args)
    est = an.mc_mode_probability(cc, args.trials, args.seed)
    exact = an.mode_probabilities(cc).per_category
    rows = [{"category": i, "estimate": float(e), "std_error": float(s), "exact": float(x)}
            for i, (e, s, x) in enumerate(zip(est.per_category, est.std_error, exact))]
    print(json.dumps({"trials": est.trials, "q": est.q, "q_std_error": est.q_std_error,
                      "per_category": rows}, indent=2))
    return 0


def cmd_bound(args) -> int:
    cc = _counts(args)
    mp = an.mode_probabilities(cc)
    prob = generate_problem(args.m, args.d, 0.0, args.seed)
    norms = [prob.m * args.error_scale**2] * cc.k
    inp = an.ConvergenceBoundInputs.from_matrix(prob.A, norms, mp.q_conditional,
                                                float(prob.x_star @ prob.x_star))
    its = np.arange(0, args.iters, args.every)
    print("update,bound")
    for i, b in zip(its, an.convergence_bound(inp, its)):
        print(f"{i + 1},{b!r}")
    return 0


def cmd_solve(args) -> int:
    cfg = _load(args)
    case = cfg.cases()[0]
    probs = analysis_for(case)
    res = run_case_seed(case, args.seed, probs, full_trace=args.full_trace)
    print(json.dumps({"case": case.label, **res.scalars()}, indent=2))
    if args.out:
        report = RunReport(cfg.name, cfg.kind, cfg.echo(),
                           [CaseReport(case.label, case.values, case.counts(), probs, [res])])
        emit_csv(report, args.out)
    return 0


def cmd_experiment(args) -> int:
    cfg = _load(args)
    if args.seed is not None:
        cfg = single_seed(cfg, args.seed)
    report = run_experiment(cfg, args.out)
    for case in report.cases:
        s = case.summary()
        row = s["table_row"]
        line = f"{case.label:32s} q={row['q']:.4f} q0={row['q0']:.6f}"
        if "median_final_error" in s:
            prs = [(x.precision, x.recall) for x in case.seeds]
            line += f" median_err={s['median_final_error']:.3e} prec/rec={prs[0][0]:.3f}/{prs[0][1]:.3f}"
        print(line)
    return 0


def cmd_presets(args) -> int:
    for name in sorted(PRESETS):
        print(name)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="modekaczmarz",
                                 description="Adversary-tolerant distributed Kaczmarz simulator")
    sub = ap.add_subparsers(dest="command", required=True)

    def cfg_flags(p):
        p.add_argument("--config", help="config document path")
        p.add_argument("--preset", help="named preset (see 'presets')")
        p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                       help="override a config key; repeatable")
        p.add_argument("--out", help="output directory")
        p.add_argument("--full-trace", action="store_true", help="keep every iteration in curves")

    def count_flags(p):
        p.add_argument("--counts", help="comma-separated counts N_0,N_1,...,N_k")
        p.add_argument("--N", type=int, default=100)
        p.add_argument("--p", type=float, default=0.8)
        p.add_argument("--k", type=int, default=5)
        p.add_argument("--n", type=int, default=5)

    p = sub.add_parser("solve", help="run one case for one seed")
    cfg_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("experiment", help="run a preset or config file")
    cfg_flags(p)
    p.add_argument("--seed", type=int, default=None, help="run only this seed")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("probs", help="exact mode probabilities for given counts")
    count_flags(p)
    p.set_defaults(func=cmd_probs)

    p = sub.add_parser("mc", help="Monte Carlo estimate of mode probabilities")
    count_flags(p)
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_mc)

    p = sub.add_parser("bound", help="convergence bound curve")
    count_flags(p)
    p.add_argument("--m", type=int, default=1000)
    p.add_argument("--d", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--error-scale", type=float, default=1.0)
    p.add_argument("--iters", type=int, default=5000)
    p.add_argument("--every", type=int, default=100)
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("presets", help="list preset names")
    p.set_defaults(func=cmd_presets)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
