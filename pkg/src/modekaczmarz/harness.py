"""Experiment configuration, presets, batch execution and file output.

A config document is plain text with ``[section]`` headers and
``key = value`` lines; ``#`` starts a comment. Keys marked sweepable accept
a comma-separated list, and an experiment runs the Cartesian product of all
swept values.

    [experiment]
    kind = simulate            # or: probabilities
    seeds = 0, 1, 2

    [problem]
    m = 1000
    d = 100

    [pool]
    N = 100
    p = 0.2, 0.8
    k = 10

    [solve]
    n = 30, 50
    blocklist = off, on
"""

from __future__ import annotations

import csv
import itertools
import json
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np

from .adversary import ErrorSpec, build_pool_from_counts
from .analysis import (CategoryCounts, ConvergenceBoundInputs, convergence_bound,
                       equal_split_counts, mode_probabilities)
from .blocklist import BlockPolicy, precision_recall
from .kaczmarz import generate_problem
from .solver import SKIPPED, SolveConfig, run


class ConfigError(ValueError):
    pass


def _bool(v: str) -> bool:
    s = v.strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _opt_int(v: str):
    return None if v.strip().lower() in ("", "none", "auto") else int(v)


# section -> key -> (parser, default, sweepable)
SCHEMA: dict[str, dict[str, tuple[Any, Any, bool]]] = {
    "experiment": {
        "name": (str, "custom", False),
        "kind": (str, "simulate", False),
        "seeds": (int, [0], True),
        "out": (str, "", False),
        "full_trace": (_bool, False, False),
    },
    "problem": {
        "m": (int, 1000, False),
        "d": (int, 100, False),
        "noise_magnitude": (float, 0.0, True),
    },
    "pool": {
        "N": (int, 100, False),
        "p": (float, 0.2, True),
        "k": (int, 10, True),
        "fractions": (float, None, True),
        "split": (str, "exact", False),
        "error_model": (str, "constant", True),
        "error_scale": (float, 1.0, False),
    },
    "solve": {
        "n": (int, 10, True),
        "p_threshold": (float, None, False),
        "max_iter": (int, 50_000, False),
        "tol": (float, 0.0, False),
        "stop_on_tol": (_bool, False, False),
        "group_tol": (float, 1e-9, False),
        "selection": (str, "any", False),
        "blocklist": (_bool, False, True),
        "policy": (str, "fraction", False),
        "policy_value": (float, 0.5, False),
        "period": (int, 100, False),
        "min_active": (_opt_int, None, False),
        "short_active": (str, "halt", False),
        "count_skips": (_bool, False, False),
    },
}

SWEEP_ORDER = [("pool", "p"), ("pool", "k"), ("pool", "error_model"),
               ("problem", "noise_magnitude"), ("solve", "n"), ("solve", "blocklist")]


@dataclass
class ExperimentConfig:
    """Parsed experiment. ``values[section][key]`` holds scalars or, for sweeps, lists."""

    values: dict[str, dict[str, Any]]
    source: str = ""

    @property
    def name(self) -> str:
        return self.values["experiment"]["name"]

    @property
    def kind(self) -> str:
        return self.values["experiment"]["kind"]

    @property
    def seeds(self) -> list[int]:
        return list(self.values["experiment"]["seeds"])

    def cases(self) -> list["Case"]:
        axes = []
        for sec, key in SWEEP_ORDER:
            v = self.values[sec][key]
            axes.append(v if isinstance(v, list) else [v])
        out = []
        for combo in itertools.product(*axes):
            vals = {s: dict(d) for s, d in self.values.items()}
            for (sec, key), v in zip(SWEEP_ORDER, combo):
                vals[sec][key] = v
            out.append(Case(vals))
        return out

    def echo(self) -> dict:
        return json.loads(json.dumps(self.values))


@dataclass
class Case:
    values: dict[str, dict[str, Any]]

    @property
    def label(self) -> str:
        pl, sv, pr = self.values["pool"], self.values["solve"], self.values["problem"]
        parts = [f"p{pl['p']:g}", f"k{pl['k']}", f"n{sv['n']}"]
        if pl["error_model"] != "constant":
            parts.append(pl["error_model"])
        if pr["noise_magnitude"]:
            parts.append(f"noise{pr['noise_magnitude']:g}")
        parts.append("bl-on" if sv["blocklist"] else "bl-off")
        return "_".join(parts)

    def counts(self) -> list[int]:
        pl = self.values["pool"]
        N, p, k = pl["N"], pl["p"], pl["k"]
        if pl["fractions"] is not None:
            fr = pl["fractions"] if isinstance(pl["fractions"], list) else [pl["fractions"]]
            return [N - sum(int(round(N * f)) for f in fr)] + [int(round(N * f)) for f in fr]
        if k == 0 or p == 0:
            return [N] + [0] * k
        return equal_split_counts(N, p, k)

    def category_counts(self) -> CategoryCounts:
        return CategoryCounts(self.counts(), self.values["solve"]["n"])

    def error_specs(self, seed: int) -> list[ErrorSpec]:
        pl = self.values["pool"]
        k, m = len(self.counts()) - 1, self.values["problem"]["m"]
        scale, model = pl["error_scale"], pl["error_model"]
        rng = np.random.default_rng([seed, 7])
        if model == "constant":
            return [ErrorSpec.constant(scale * v) for v in rng.standard_normal(k)]
        if model == "per_row":
            return [ErrorSpec.per_row(scale * rng.standard_normal(m)) for _ in range(k)]
        return [ErrorSpec.random(scale) for _ in range(k)]

    def solve_config(self, seed: int) -> SolveConfig:
        sv, pl = self.values["solve"], self.values["pool"]
        p_thr = sv["p_threshold"] if sv["p_threshold"] is not None else pl["p"]
        return SolveConfig(
            n=sv["n"], p_threshold=p_thr, max_iter=sv["max_iter"], tol=sv["tol"],
            stop_on_tol=sv["stop_on_tol"], blocklist=sv["blocklist"],
            policy=BlockPolicy(sv["policy"], sv["policy_value"]), period=sv["period"],
            min_active=sv["min_active"], count_skips=sv["count_skips"],
            group_tol=sv["group_tol"], selection=sv["selection"],
            short_active=sv["short_active"], seed=seed,
        )


# -- parsing -------------------------------------------------------------------

def _parse_value(parser, raw: str, sweepable: bool):
    items = [s.strip() for s in raw.split(",")]
    if len(items) > 1:
        if not sweepable:
            raise ValueError("this key does not accept a list")
        return [parser(s) for s in items]
    return parser(items[0])


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a config document, applying defaults for missing keys."""
    values = {sec: {k: spec[1] for k, spec in keys.items()} for sec, keys in SCHEMA.items()}
    section = None
    seen: dict[tuple[str, str], int] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in SCHEMA:
                raise ConfigError(f"line {lineno}: unknown section [{section}]")
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        if section is None:
            raise ConfigError(f"line {lineno}: key outside of any section")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in SCHEMA[section]:
            raise ConfigError(f"line {lineno}: unknown key '{key}' in [{section}]")
        parser, _, sweepable = SCHEMA[section][key]
        try:
            values[section][key] = _parse_value(parser, raw, sweepable)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {section}.{key}: {exc}") from None
        seen[(section, key)] = lineno
    if not isinstance(values["experiment"]["seeds"], list):
        values["experiment"]["seeds"] = [values["experiment"]["seeds"]]
    fr = values["pool"]["fractions"]
    if fr is not None and not isinstance(fr, list):
        values["pool"]["fractions"] = [fr]
    cfg = ExperimentConfig(values, text)
    _validate(cfg, seen)
    return cfg


def _validate(cfg: ExperimentConfig, seen: dict) -> None:
    def where(sec, key):
        ln = seen.get((sec, key))
        return f"line {ln}: " if ln else ""

    v = cfg.values
    if v["experiment"]["kind"] not in ("simulate", "probabilities"):
        raise ConfigError(where("experiment", "kind") + "kind must be 'simulate' or 'probabilities'")
    if not cfg.seeds:
        raise ConfigError("seeds must be non-empty")
    if v["pool"]["split"] not in ("exact", "even"):
        raise ConfigError(where("pool", "split") + "split must be 'exact' or 'even'")
    for model in _as_list(v["pool"]["error_model"]):
        if model not in ("constant", "per_row", "random"):
            raise ConfigError(where("pool", "error_model") + f"unknown error model {model!r}")
    if v["solve"]["policy"] not in ("fraction", "top", "absolute"):
        raise ConfigError(where("solve", "policy") + "policy must be fraction, top or absolute")
    if v["solve"]["short_active"] not in ("halt", "shrink"):
        raise ConfigError(where("solve", "short_active") + "short_active must be halt or shrink")
    if v["solve"]["selection"] not in ("any", "largest", "strict"):
        raise ConfigError(where("solve", "selection") + "selection must be any, largest or strict")
    if v["problem"]["m"] < v["problem"]["d"] or v["problem"]["d"] < 1:
        raise ConfigError(where("problem", "m") + "need m >= d >= 1")
    N = v["pool"]["N"]
    for n in _as_list(v["solve"]["n"]):
        if not 1 <= n <= N:
            raise ConfigError(where("solve", "n") + f"n={n} must lie in 1..N={N}")
    fr = v["pool"]["fractions"]
    for p in _as_list(v["pool"]["p"]):
        if not 0 <= p <= 1:
            raise ConfigError(where("pool", "p") + f"p={p} outside [0, 1]")
        if fr is not None:
            if abs(sum(fr) - p) > 1e-9:
                raise ConfigError(where("pool", "fractions") + f"fractions sum to {sum(fr):g}, not p={p:g}")
            if any(abs(N * f - round(N * f)) > 1e-9 for f in fr):
                raise ConfigError(where("pool", "fractions") + "fractions do not give integer counts")
            continue
        for k in _as_list(v["pool"]["k"]):
            if k < 0 or (k == 0 and p > 0):
                raise ConfigError(where("pool", "k") + f"k={k} invalid for p={p:g}")
            if abs(N * p - round(N * p)) > 1e-9:
                raise ConfigError(where("pool", "p") + f"N*p = {N * p:g} is not an integer")
            if k and v["pool"]["split"] == "exact" and round(N * p) % k:
                raise ConfigError(where("pool", "k") +
                                  f"{round(N * p)} adversaries do not split evenly into k={k} "
                                  "categories (set split = even to allow it)")
    thr = v["solve"]["p_threshold"]
    if thr is not None and not 0 <= thr <= 1:
        raise ConfigError(where("solve", "p_threshold") + "p_threshold outside [0, 1]")


def _as_list(v):
    return v if isinstance(v, list) else [v]


# -- presets -------------------------------------------------------------------

PRESETS: dict[str, str] = {
    "fig1": """
[experiment]
name = fig1
seeds = 0, 1, 2, 3, 4
[pool]
N = 100
k = 10
p = 0.2, 0.8
[solve]
n = 30, 40, 50, 60, 70
blocklist = off, on
""",
    "fig2": """
[experiment]
name = fig2
seeds = 0, 1, 2, 3, 4
[pool]
N = 100
k = 10
p = 0.2, 0.4, 0.6, 0.8
[solve]
n = 10
blocklist = off, on
""",
    "fig3": """
[experiment]
name = fig3
seeds = 0, 1, 2, 3, 4
[pool]
N = 100
p = 0.8
k = 5, 10, 20, 40
[solve]
n = 10
blocklist = off, on
""",
    "fig4": """
[experiment]
name = fig4
seeds = 0, 1, 2, 3, 4
[problem]
noise_magnitude = 1e-4
[pool]
N = 100
k = 10
p = 0.8
[solve]
n = 30, 40, 50, 60, 70
blocklist = off, on
""",
    "table2": """
[experiment]
name = table2
kind = probabilities
[pool]
N = 100
p = 0.8, 0.2
k = 3, 5, 10, 15
split = even
[solve]
n = 5
""",
    "table3": """
[experiment]
name = table3
kind = probabilities
[pool]
N = 100
p = 0.8, 0.2
k = 5
[solve]
n = 10, 15, 20
""",
    "table4": """
[experiment]
name = table4
seeds = 0
[pool]
N = 100
k = 10
p = 0.8
[solve]
n = 30, 40, 50, 60, 70
max_iter = 2000
blocklist = on
policy = fraction
policy_value = 0.5
period = 100
min_active = 1
short_active = shrink
""",
    "honest": """
[experiment]
name = honest
seeds = 0
[pool]
N = 100
p = 0
k = 0
[solve]
n = 5
""",
}


def load_preset(name: str) -> ExperimentConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(sorted(PRESETS))}")
    return parse_config(PRESETS[name])


# -- running -------------------------------------------------------------------

def downsample_indices(length: int, full: bool = False) -> np.ndarray:
    """Iteration indices kept in curves: all up to 1000, then every 10th."""
    idx = np.arange(length)
    if full or length <= 1000:
        return idx
    return np.concatenate((idx[:1000], idx[1000:][(idx[1000:] + 1) % 10 == 0]))


@dataclass
class SeedResult:
    seed: int
    final_error: float
    iterations: int
    updates: int
    skips: int
    corrupted_updates: int
    status: str
    precision: float
    recall: float
    blocked: list[int]
    curve_iter: np.ndarray = field(repr=False)
    curve_error: np.ndarray = field(repr=False)
    curve_skipped: np.ndarray = field(repr=False)
    bound_iter: np.ndarray = field(repr=False)
    bound: np.ndarray = field(repr=False)
    counter: np.ndarray = field(repr=False)
    participation: np.ndarray = field(repr=False)
    assignment: np.ndarray = field(repr=False)

    def scalars(self) -> dict:
        return {
            "seed": self.seed, "final_error": self.final_error, "iterations": self.iterations,
            "updates": self.updates, "skips": self.skips,
            "corrupted_updates": self.corrupted_updates, "status": self.status,
            "precision": self.precision, "recall": self.recall, "blocked": self.blocked,
        }


@dataclass
class CaseReport:
    label: str
    params: dict
    counts: list[int]
    probabilities: dict
    seeds: list[SeedResult] = field(default_factory=list)

    def table_row(self) -> dict:
        pr = self.probabilities
        per = [float(x) for x in pr["_per_category"]]
        adv = per[1:]
        return {
            "p": self.params["pool"]["p"], "k": self.params["pool"]["k"], "n": self.params["solve"]["n"],
            "q_mode_adv": float(np.mean(adv)) if adv else 0.0,
            "q_mode_honest": per[0], "q": float(pr["_q"]), "q0": float(pr["_q0"]),
        }

    def summary(self) -> dict:
        out = {"label": self.label, "counts": self.counts,
               "probabilities": {k: v for k, v in self.probabilities.items() if not k.startswith("_")},
               "table_row": self.table_row()}
        if self.seeds:
            fe = [s.final_error for s in self.seeds]
            out["median_final_error"] = float(np.median(fe))
            out["seeds"] = [s.scalars() for s in self.seeds]
        return out


@dataclass
class RunReport:
    name: str
    kind: str
    config: dict
    cases: list[CaseReport]

    def summary(self) -> dict:
        return {"name": self.name, "kind": self.kind, "config": self.config,
                "cases": [c.summary() for c in self.cases]}


def analysis_for(case: Case) -> dict:
    mp = mode_probabilities(case.category_counts())
    d = mp.to_dict()
    d["_per_category"] = mp.per_category
    d["_q"] = mp.q
    d["_q0"] = mp.q0
    d["_q_conditional"] = mp.q_conditional
    return d


def run_case_seed(case: Case, seed: int, probabilities: dict | None = None,
                  full_trace: bool = False) -> SeedResult:
    """Run one (case, seed) simulation and summarize it."""
    pr = case.values["problem"]
    problem = generate_problem(pr["m"], pr["d"], pr["noise_magnitude"], seed)
    errors = case.error_specs(seed)
    pool = build_pool_from_counts(case.counts(), errors, seed)
    trace = run(problem, pool, case.solve_config(seed))

    keep = downsample_indices(trace.iterations, full_trace)
    probabilities = probabilities or analysis_for(case)
    inp = ConvergenceBoundInputs.from_matrix(
        problem.A, [e.norm_sq(problem.m) for e in errors],
        probabilities["_q_conditional"], float(problem.x_star @ problem.x_star))
    bkeep = downsample_indices(len(trace.error_by_update), full_trace)
    prec, rec = precision_recall(trace.blocklist.blocked, pool.adversaries)
    return SeedResult(
        seed=seed, final_error=trace.final_error, iterations=trace.iterations,
        updates=trace.updates, skips=trace.skips, corrupted_updates=trace.corrupted_updates,
        status=trace.status, precision=prec, recall=rec,
        blocked=sorted(trace.blocklist.blocked),
        curve_iter=keep + 1, curve_error=trace.error_norm[keep],
        curve_skipped=trace.chosen_category[keep] == SKIPPED,
        bound_iter=bkeep + 1,
        bound=convergence_bound(inp, bkeep) if len(bkeep) else np.empty(0),
        counter=trace.blocklist.counter.copy(), participation=trace.blocklist.participation.copy(),
        assignment=pool.assignment.copy(),
    )


def run_experiment(config: ExperimentConfig, out: str | os.PathLike | None = None) -> RunReport:
    """Run every case and seed of ``config``; write outputs when ``out`` (or the config's out) is set."""
    full = config.values["experiment"]["full_trace"]
    cases = []
    for case in config.cases():
        probs = analysis_for(case)
        cr = CaseReport(case.label, case.values, case.counts(), probs)
        if config.kind == "simulate":
            for seed in config.seeds:
                try:
                    cr.seeds.append(run_case_seed(case, seed, probs, full))
                except Exception as exc:
                    raise RuntimeError(f"case {case.label}, seed {seed}: {exc}") from exc
        cases.append(cr)
    report = RunReport(config.name, config.kind, config.echo(), cases)
    out = out or config.values["experiment"]["out"]
    if out:
        emit_csv(report, out)
    return report


# -- output --------------------------------------------------------------------

def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _g(x: float) -> str:
    return repr(float(x))


def emit_csv(report: RunReport, path: str | os.PathLike) -> None:
    """Write CSV files and ``summary.json`` for ``report`` into directory ``path``."""
    outdir = Path(path)
    outdir.mkdir(parents=True, exist_ok=True)
    table = []
    for case in report.cases:
        lab = case.label
        per = case.probabilities["_per_category"]
        _write_csv(outdir / f"probabilities_{lab}.csv",
                   ["category", "count", "q_mode_exact", "q_mode_decimal"],
                   [[i, c, f"{x.numerator}/{x.denominator}", _g(x)]
                    for i, (c, x) in enumerate(zip(case.counts, per))])
        row = case.table_row()
        table.append([lab] + [row[k] for k in ("p", "k", "n")] +
                     [_g(row[k]) for k in ("q_mode_adv", "q_mode_honest", "q", "q0")])
        if not case.seeds:
            continue
        conv, bound = [], []
        for s in case.seeds:
            conv.extend([int(i), s.seed, _g(e), int(sk)]
                        for i, e, sk in zip(s.curve_iter, s.curve_error, s.curve_skipped))
            bound.extend([int(i), s.seed, _g(b)] for i, b in zip(s.bound_iter, s.bound))
            blocked = set(s.blocked)
            _write_csv(outdir / f"blocklist_{lab}_seed{s.seed}.csv",
                       ["worker", "category", "counter", "participation", "blocked"],
                       [[w, int(s.assignment[w]), int(s.counter[w]), int(s.participation[w]),
                         int(w in blocked)] for w in range(len(s.counter))])
        _write_csv(outdir / f"convergence_{lab}.csv", ["iteration", "seed", "error_norm", "skipped"], conv)
        _write_csv(outdir / f"bound_{lab}.csv", ["update", "seed", "bound"], bound)
    _write_csv(outdir / "table.csv",
               ["case", "p", "k", "n", "q_mode_adv", "q_mode_honest", "q", "q0"], table)
    with open(outdir / "summary.json", "w") as fh:
        json.dump(report.summary(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def with_overrides(config: ExperimentConfig, overrides: list[str]) -> ExperimentConfig:
    """Re-parse ``config`` with ``section.key=value`` lines appended."""
    extra = []
    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"override {item!r} must look like section.key=value")
        lhs, rhs = item.split("=", 1)
        sec, key = lhs.strip().split(".", 1)
        extra.append(f"[{sec}]\n{key} = {rhs}")
    return parse_config(config.source + "\n" + "\n".join(extra))


def single_seed(config: ExperimentConfig, seed: int) -> ExperimentConfig:
    vals = {s: dict(d) for s, d in config.values.items()}
    vals["experiment"]["seeds"] = [seed]
    return replace(config, values=vals)
