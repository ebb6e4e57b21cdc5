"""Adaptive large-neighborhood search over destroy/repair operators.

Each iteration draws one removal and one insertion operator by roulette on
adaptive weights, partially destroys the current solution, repairs it, and
accepts the candidate under simulated annealing.  Weights are refreshed
every segment from the scores the operators earned.
"""

from __future__ import annotations

import json
import math
import os
import random
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Optional

from .model import Instance, Solution, validate_solution
from .operators import (
    REMOVAL_OPERATORS,
    InsertionEvaluator,
    RemovalRequest,
    build_initial,
    removal_count,
    repair,
)
from .schedule import Simulator


class ConfigError(ValueError):
    pass


DEFAULT_REMOVAL_OPS = ("rrr", "srr", "shaw", "shaw_tw", "tsr", "rsr")
DEFAULT_INSERTION_OPS = ("greedy", "regret4", "regret5", "regret6")


@dataclass(frozen=True)
class AlnsConfig:
    max_iterations: int = 25_000
    segment_length: int = 200
    psi: int = 100           # absolute removal cap
    xi: float = 0.35         # relative removal cap
    sigma_best: int = 33
    sigma_improve: int = 9
    sigma_accept: int = 13
    rho: float = 0.1
    sa_start_gap: float = 0.05
    sa_start_acceptance: float = 0.5
    sa_end_fraction: float = 0.002
    seed: int = 0
    removal_ops: tuple[str, ...] = DEFAULT_REMOVAL_OPS
    insertion_ops: tuple[str, ...] = DEFAULT_INSERTION_OPS
    shaw_p: int = 6
    regret_literal: bool = False
    max_seconds: Optional[float] = None
    strict_validation: bool = False

    def check(self) -> None:
        if self.max_iterations < 0:
            raise ConfigError("max_iterations must be >= 0")
        if self.segment_length <= 0:
            raise ConfigError("segment_length must be positive")
        if not 0 < self.xi <= 1:
            raise ConfigError("xi must be in (0, 1]")
        if self.psi <= 0:
            raise ConfigError("psi must be positive")
        if not 0 < self.rho <= 1:
            raise ConfigError("rho must be in (0, 1]")
        if min(self.sigma_best, self.sigma_improve, self.sigma_accept) < 0:
            raise ConfigError("scores must be non-negative")
        if not 0 < self.sa_start_acceptance < 1:
            raise ConfigError("sa_start_acceptance must be in (0, 1)")
        if not 0 < self.sa_end_fraction <= 1:
            raise ConfigError("sa_end_fraction must be in (0, 1]")
        if self.sa_start_gap <= 0:
            raise ConfigError("sa_start_gap must be positive")
        for name in self.removal_ops:
            if name not in REMOVAL_OPERATORS:
                raise ConfigError(f"unknown removal operator {name!r}")
        for name in self.insertion_ops:
            if name != "greedy":
                if not name.startswith("regret"):
                    raise ConfigError(f"unknown insertion operator {name!r}")
                try:
                    k = int(name[len("regret"):])
                except ValueError:
                    raise ConfigError(f"unknown insertion operator {name!r}") from None
                if k < 2:
                    raise ConfigError("regret operators need k >= 2")
        if not self.removal_ops or not self.insertion_ops:
            raise ConfigError("need at least one operator per class")


_CONFIG_FIELDS = {f.name for f in AlnsConfig.__dataclass_fields__.values()}


def load_config(path: str) -> AlnsConfig:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    return config_from_dict(doc)


def config_from_dict(doc: dict) -> AlnsConfig:
    unknown = set(doc) - _CONFIG_FIELDS
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    for key in ("removal_ops", "insertion_ops"):
        if key in doc:
            doc[key] = tuple(doc[key])
    cfg = AlnsConfig(**doc)
    cfg.check()
    return cfg


def temperature_schedule(config: AlnsConfig, initial_cost: int) -> tuple[float, float]:
    """(T0, cooling factor): start so a start-gap-sized worsening is accepted
    with the configured probability; cool geometrically to the end fraction."""
    base = max(initial_cost, 1)
    t0 = (config.sa_start_gap * base) / -math.log(config.sa_start_acceptance)
    m = max(config.max_iterations, 1)
    cooling = config.sa_end_fraction ** (1.0 / m)
    return t0, cooling


def accept(current_cost: int, candidate_cost: int, temperature: float, rng: random.Random) -> bool:
    """Always take improvements; take worsenings with exp(-gap/T)."""
    if candidate_cost < current_cost:
        return True
    gap = candidate_cost - current_cost
    return rng.random() < math.exp(-gap / temperature)


@dataclass
class OperatorStats:
    name: str
    weight: float = 1.0
    segment_score: int = 0
    segment_uses: int = 0
    uses: int = 0
    best_count: int = 0

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "weight": round(self.weight, 6),
            "uses": self.uses,
            "best_count": self.best_count,
        }


@dataclass(frozen=True)
class TraceRow:
    iteration: int
    current_cents: int
    best_cents: int
    temperature: float


@dataclass
class RunReport:
    iterations: int
    initial_cents: int
    best_cents: int
    trace: list[TraceRow] = field(default_factory=list)
    removal_stats: list[OperatorStats] = field(default_factory=list)
    insertion_stats: list[OperatorStats] = field(default_factory=list)
    wall_s: float = 0.0
    stopped_early: bool = False

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "initial_cents": self.initial_cents,
            "best_cents": self.best_cents,
            "wall_s": round(self.wall_s, 3),
            "stopped_early": self.stopped_early,
            "removal_operators": [s.as_dict() for s in self.removal_stats],
            "insertion_operators": [s.as_dict() for s in self.insertion_stats],
            "trace": [
                [r.iteration, r.current_cents, r.best_cents, round(r.temperature, 6)]
                for r in self.trace
            ],
        }


def _roulette(stats: list[OperatorStats], rng: random.Random) -> int:
    total = sum(s.weight for s in stats)
    shot = rng.random() * total
    acc = 0.0
    for i, s in enumerate(stats):
        acc += s.weight
        if shot < acc:
            return i
    return len(stats) - 1


def _threads() -> int:
    try:
        return max(0, int(os.environ.get("FTL_THREADS", "0")))
    except ValueError:
        return 0


def _warm_cache(ev: InsertionEvaluator, s_in, trips, workers: int) -> None:
    """Pre-resolve insertion cells in parallel; results are pure, so the
    outcome is identical to sequential evaluation."""
    pairs = [(rid, trip) for rid in s_in for trip in trips]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        list(pool.map(lambda p: ev.cell(p[0], p[1]), pairs))


def run(instance: Instance, config: AlnsConfig = AlnsConfig()) -> tuple[Solution, RunReport]:
    """Execute the full search and return the best solution found."""
    config.check()
    instance.check()
    rng = random.Random(config.seed)
    sim = Simulator(instance)
    ev = InsertionEvaluator(sim)
    threads = _threads()

    removal_stats = [OperatorStats(name) for name in config.removal_ops]
    insertion_stats = [OperatorStats(name) for name in config.insertion_ops]

    def removal_call(req: RemovalRequest, solution):
        op = REMOVAL_OPERATORS[req.operator]
        if req.operator in ("shaw", "shaw_tw"):
            return op(sim, solution, req.count, rng, p=config.shaw_p)
        return op(sim, solution, req.count, rng)

    start = time.perf_counter()
    current = build_initial(instance, sim)
    best = current
    t0, cooling = temperature_schedule(config, current.cost_total)
    temperature = t0
    xi = Fraction(str(config.xi))

    report = RunReport(config.max_iterations, current.cost_total, current.cost_total)
    report.trace.append(TraceRow(0, current.cost_total, best.cost_total, temperature))
    stopped_early = False

    repair_memo: dict = {}
    for it in range(1, config.max_iterations + 1):
        ri = _roulette(removal_stats, rng)
        ii = _roulette(insertion_stats, rng)
        q = removal_count(config.psi, xi, current.planned_count)
        trips, removed = removal_call(RemovalRequest(config.removal_ops[ri], q), current)
        # repair is a pure function of this key; revisited states are free
        memo_key = (
            tuple(t.requests for t in trips),
            tuple(sorted(removed)),
            current.bank,
            config.insertion_ops[ii],
        )
        candidate = repair_memo.get(memo_key)
        if candidate is None:
            if threads > 1:
                _warm_cache(ev, sorted(set(removed) | current.bank), trips, threads)
            candidate = repair(
                sim,
                trips,
                current.bank,
                removed,
                mode=config.insertion_ops[ii],
                evaluator=ev,
                regret_literal=config.regret_literal,
            )
            repair_memo[memo_key] = candidate
        ok = accept(current.cost_total, candidate.cost_total, temperature, rng)
        score = 0
        if candidate.cost_total < best.cost_total:
            score = config.sigma_best
            removal_stats[ri].best_count += 1
            insertion_stats[ii].best_count += 1
        elif candidate.cost_total < current.cost_total:
            score = config.sigma_improve
        elif ok:
            score = config.sigma_accept
        for stats, idx in ((removal_stats, ri), (insertion_stats, ii)):
            stats[idx].segment_score += score
            stats[idx].segment_uses += 1
            stats[idx].uses += 1
        if ok:
            if config.strict_validation:
                problems = validate_solution(instance, candidate)
                if problems:
                    raise RuntimeError(f"accepted infeasible solution: {problems[:3]}")
            current = candidate
        if candidate.cost_total < best.cost_total:
            best = candidate
        temperature *= cooling

        if it % config.segment_length == 0:
            for stats in (removal_stats, insertion_stats):
                for s in stats:
                    if s.segment_uses:
                        s.weight = (1 - config.rho) * s.weight + config.rho * (
                            s.segment_score / s.segment_uses
                        )
                    s.segment_score = 0
                    s.segment_uses = 0
            report.trace.append(TraceRow(it, current.cost_total, best.cost_total, temperature))
            # caches are pure; the caps only bound memory
            if len(ev.cells) > 400_000:
                ev.cells.clear()
                ev.lbs.clear()
                ev.lineage.clear()
            if len(sim._trips) > 150_000:
                sim.clear_caches()
            if len(repair_memo) > 50_000:
                repair_memo.clear()
        if config.max_seconds is not None and time.perf_counter() - start > config.max_seconds:
            stopped_early = True
            report.iterations = it
            report.trace.append(TraceRow(it, current.cost_total, best.cost_total, temperature))
            break

    if config.max_iterations % config.segment_length and not stopped_early:
        report.trace.append(
            TraceRow(config.max_iterations, current.cost_total, best.cost_total, temperature)
        )
    report.best_cents = best.cost_total
    report.removal_stats = removal_stats
    report.insertion_stats = insertion_stats
    report.wall_s = time.perf_counter() - start
    report.stopped_early = stopped_early
    return best, report


def write_report(report: RunReport, json_path: str, trace_csv_path: Optional[str] = None) -> None:
    with open(json_path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(report.to_dict(), fh, indent=2)
        fh.write("\n")
    if trace_csv_path:
        with open(trace_csv_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("iteration,current_cost,best_cost,temperature\n")
            for row in report.trace:
                fh.write(
                    f"{row.iteration},{row.current_cents / 100:.2f},"
                    f"{row.best_cents / 100:.2f},{row.temperature:.6f}\n"
                )


def with_seed(config: AlnsConfig, seed: int) -> AlnsConfig:
    return replace(config, seed=seed)
