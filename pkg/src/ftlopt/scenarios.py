"""The three business scenarios and their KPI reports.

all-sm outsources every request, all-fct forces everything onto own
vehicles through a prohibitive outsourcing penalty, mixed lets the search
decide.  `compare` runs all three and writes CSV reports.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, replace
from typing import Optional

from .engine import AlnsConfig, RunReport, run, write_report
from .model import Instance, Solution, fmt_km, fmt_money
from .schedule import Simulator

CSV_HEADER = (
    "scenario,total_cost,vehicle_cost,outsourced_cost,vehicles,loaded_km,"
    "empty_km,outsourced_km,pct_own,min_km,avg_km,max_km,cpu_s"
)


@dataclass(frozen=True)
class ScenarioResult:
    scenario: str  # "all-sm" | "all-fct" | "mixed"
    total_cents: int
    vehicle_cents: int
    outsourced_cents: int
    vehicles: int
    loaded_d10: int
    empty_d10: int
    outsourced_d10: int
    pct_own: float
    min_d10: int
    avg_km: float
    max_d10: int
    cpu_s: float
    residual: int = 0  # all-fct only: requests no vehicle could serve

    def csv_row(self) -> str:
        return ",".join(
            (
                self.scenario,
                fmt_money(self.total_cents),
                fmt_money(self.vehicle_cents),
                fmt_money(self.outsourced_cents),
                str(self.vehicles),
                fmt_km(self.loaded_d10),
                fmt_km(self.empty_d10),
                fmt_km(self.outsourced_d10),
                f"{self.pct_own:.1f}",
                fmt_km(self.min_d10),
                f"{self.avg_km:.1f}",
                fmt_km(self.max_d10),
                f"{self.cpu_s:.2f}",
            )
        )


def _result(
    instance: Instance,
    scenario: str,
    solution: Solution,
    cpu_s: float,
    residual: int = 0,
    count_outsourced: bool = True,
) -> ScenarioResult:
    loaded = sum(t.loaded_d10 for t in solution.trips)
    empty = sum(t.empty_d10 for t in solution.trips)
    outsourced_km = sum(instance.direct_d10(rid) for rid in solution.bank)
    n_requests = len(instance.requests)
    pct = 100.0 * solution.planned_count / n_requests if n_requests else 0.0
    totals = [t.total_d10 for t in solution.trips]
    outsourced_cents = solution.cost_outsourced if count_outsourced else 0
    return ScenarioResult(
        scenario=scenario,
        total_cents=solution.cost_vehicles + outsourced_cents,
        vehicle_cents=solution.cost_vehicles,
        outsourced_cents=outsourced_cents,
        vehicles=len(solution.trips),
        loaded_d10=loaded,
        empty_d10=empty,
        outsourced_d10=outsourced_km,
        pct_own=pct,
        min_d10=min(totals) if totals else 0,
        avg_km=(sum(totals) / len(totals) / 10.0) if totals else 0.0,
        max_d10=max(totals) if totals else 0,
        cpu_s=cpu_s,
        residual=residual,
    )


def scenario_all_sm(instance: Instance) -> tuple[ScenarioResult, Solution]:
    """Everything to the spot market; a sum, not a search."""
    started = time.perf_counter()
    bank = frozenset(r.id for r in instance.requests)
    cost = sum(r.sm_price_cents for r in instance.requests)
    solution = Solution((), bank, 0, cost, cost)
    return _result(instance, "all-sm", solution, time.perf_counter() - started), solution


def fct_penalty_cents(instance: Instance) -> int:
    """Outsourcing penalty that stands in for 'a huge number': ten times the
    vehicle cost of all direct distances combined."""
    total_direct = sum(instance.direct_d10(r.id) for r in instance.requests)
    return instance.cost.kappa_cents * total_direct


def fct_instance(instance: Instance) -> Instance:
    penalty = fct_penalty_cents(instance)
    return replace(
        instance,
        requests=tuple(replace(r, sm_price_cents=penalty) for r in instance.requests),
        cost=replace(instance.cost, explicit_sm_prices={}),
    )


def scenario_all_fct(
    instance: Instance, config: AlnsConfig
) -> tuple[ScenarioResult, Solution, RunReport]:
    """Serve everything by own vehicles; leftovers are flagged, not priced.

    KPIs cover the trips only; requests that no vehicle could serve within
    the rules are reported in `residual`.
    """
    started = time.perf_counter()
    best, report = run(fct_instance(instance), config)
    cpu = time.perf_counter() - started
    result = _result(
        instance, "all-fct", best, cpu, residual=len(best.bank), count_outsourced=False
    )
    return result, best, report


def scenario_mixed(
    instance: Instance, config: AlnsConfig
) -> tuple[ScenarioResult, Solution, RunReport]:
    started = time.perf_counter()
    best, report = run(instance, config)
    cpu = time.perf_counter() - started
    return _result(instance, "mixed", best, cpu), best, report


def solution_to_dict(instance: Instance, solution: Solution) -> dict:
    return {
        "trips": [
            {
                "requests": list(t.requests),
                "loaded_km": t.loaded_d10 / 10,
                "empty_km": t.empty_d10 / 10,
            }
            for t in solution.trips
        ],
        "bank": sorted(solution.bank),
        "cost_vehicles": fmt_money(solution.cost_vehicles),
        "cost_outsourced": fmt_money(solution.cost_outsourced),
        "cost_total": fmt_money(solution.cost_total),
    }


def compare(
    instance: Instance, config: AlnsConfig, out_dir: str, master_seed: Optional[int] = None
) -> list[ScenarioResult]:
    """Run all three scenarios and write compare.csv plus summary.csv.

    Scenario seeds are derived from the master seed by fixed offsets
    (all-fct: +1, mixed: +2), so the three runs are independent and
    reproducible.
    """
    os.makedirs(out_dir, exist_ok=True)
    seed = config.seed if master_seed is None else master_seed
    sm_result, sm_solution = scenario_all_sm(instance)
    fct_result, fct_solution, fct_report = scenario_all_fct(
        instance, replace(config, seed=seed + 1)
    )
    mixed_result, mixed_solution, mixed_report = scenario_mixed(
        instance, replace(config, seed=seed + 2)
    )

    rows = [sm_result, fct_result, mixed_result]
    with open(os.path.join(out_dir, "compare.csv"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(CSV_HEADER + "\n")
        for row in rows:
            fh.write(row.csv_row() + "\n")

    # one-line overview in the nothing | everything | mixed layout
    with open(os.path.join(out_dir, "summary.csv"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(
            "instance,nothing_km,nothing_cost,everything_km,everything_cost,"
            "mixed_pct_req,mixed_loaded_km,mixed_empty_km,mixed_vehicle_cost,"
            "mixed_outsourced_km,mixed_outsourced_cost,mixed_total_cost\n"
        )
        fh.write(
            ",".join(
                (
                    instance.name or "instance",
                    fmt_km(fct_result.loaded_d10 + fct_result.empty_d10),
                    fmt_money(fct_result.total_cents),
                    fmt_km(sm_result.outsourced_d10),
                    fmt_money(sm_result.total_cents),
                    f"{mixed_result.pct_own:.1f}",
                    fmt_km(mixed_result.loaded_d10),
                    fmt_km(mixed_result.empty_d10),
                    fmt_money(mixed_result.vehicle_cents),
                    fmt_km(mixed_result.outsourced_d10),
                    fmt_money(mixed_result.outsourced_cents),
                    fmt_money(mixed_result.total_cents),
                )
            )
            + "\n"
        )

    for tag, solution, report in (
        ("all-sm", sm_solution, None),
        ("all-fct", fct_solution, fct_report),
        ("mixed", mixed_solution, mixed_report),
    ):
        with open(
            os.path.join(out_dir, f"{tag}.solution.json"), "w", encoding="utf-8", newline="\n"
        ) as fh:
            json.dump(solution_to_dict(instance, solution), fh, indent=2)
            fh.write("\n")
        if report is not None:
            write_report(
                report,
                os.path.join(out_dir, f"{tag}.report.json"),
                os.path.join(out_dir, f"{tag}.trace.csv"),
            )
    return rows


def dump_schedules(instance: Instance, solution: Solution) -> str:
    """CSV text of every trip's schedule (debugging aid)."""
    sim = Simulator(instance)
    lines = ["trip,node,location,arrival,service_start,departure,segments"]
    for ti, trip in enumerate(solution.trips):
        sched = sim.schedule_for(trip)
        k = 0
        for ni, node in enumerate(sched.nodes):
            segs = []
            while k < len(sched.segments) and sched.segments[k].end <= node.departure:
                s = sched.segments[k]
                segs.append(f"{s.kind}:{s.start}-{s.end}")
                k += 1
            lines.append(
                f"{ti},{ni},{node.location},{node.arrival},{node.service_start},"
                f"{node.departure},{'|'.join(segs)}"
            )
    return "\n".join(lines) + "\n"
