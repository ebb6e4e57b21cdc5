"""Removal and insertion machinery for the search engine.

Six removal operators (random/time/stop route removal, random/time shipment
removal, two similarity-removal variants) and the insertion procedure that
re-plans unassigned shipments: insert where profitable, open a vehicle only
when the existing fleet is well utilised, otherwise leave the shipment to
the spot market.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

from .model import Instance, Solution, Trip
from .schedule import Simulator


@dataclass(frozen=True)
class RemovalRequest:
    """One removal invocation: which operator, how many shipments."""

    operator: str
    count: int


@dataclass(frozen=True)
class InsertionCostCell:
    request_id: int
    trip_index: int
    position: Optional[int]
    delta_d10: Optional[int]
    feasible: bool


def removal_count(psi: int, xi: Fraction, planned: int) -> int:
    """q = min(psi, ceil(xi * planned), planned)."""
    if planned <= 0:
        return 0
    rel = -((-xi.numerator * planned) // xi.denominator)
    return min(psi, rel, planned)


# ---------------------------------------------------------------------------
# insertion evaluation (shared by repair and the engine's statistics)


class InsertionEvaluator:
    """Cached exact insertion costs per (request, trip version).

    Cache entries are keyed by trip uid, so any change to a trip silently
    invalidates its column; cached and fresh evaluations always agree
    because both call the same pure feasibility check.
    """

    def __init__(self, sim: Simulator):
        self.sim = sim
        self.cells: dict[tuple[int, int], Optional[tuple[int, int]]] = {}
        self.lbs: dict[tuple[int, int], int] = {}
        self.singles: dict[int, Optional[Trip]] = {}
        # new trip uid -> (parent uid, splice position, monotone guard)
        self.lineage: dict[int, tuple[int, int, bool]] = {}

    def single(self, rid: int) -> Optional[Trip]:
        """The one-request trip for rid, or None; request data never changes,
        so this cache is never invalidated."""
        if rid not in self.singles:
            self.singles[rid] = self.sim.single_trip(rid)
        return self.singles[rid]

    def clear(self) -> None:
        self.cells.clear()
        self.lbs.clear()
        self.lineage.clear()
        self.sim.clear_caches()

    def note_splice(self, old: Trip, new: Trip, rid: int, pos: int) -> None:
        """Record that `new` is `old` with `rid` spliced at `pos`.

        When the detour via the new request cannot shorten the timeline
        (always true once two service operations outweigh any rounding in
        the time matrix), a request that fit nowhere in the old trip can
        only fit next to the fresh one, which makes its re-evaluation O(1).
        """
        sim = self.sim
        guard = True
        seq = old.requests
        if 0 < pos < len(seq):
            a = sim.dest[seq[pos - 1]]
            b = sim.origin[seq[pos]]
            o, d = sim.origin[rid], sim.dest[rid]
            guard = (
                sim.time[a][o] + sim.time[o][d] + sim.time[d][b] + 2 * sim.regs.sigma
                >= sim.time[a][b]
            )
        self.lineage[new.uid] = (old.uid, pos, guard)

    def lower_bound(self, rid: int, trip: Trip) -> int:
        key = (rid, trip.uid)
        v = self.lbs.get(key)
        if v is None:
            sim = self.sim
            v = min(
                sim.insertion_delta_d10(trip, rid, pos) for pos in range(len(trip.requests) + 1)
            )
            self.lbs[key] = v
        return v

    def cell(self, rid: int, trip: Trip) -> Optional[tuple[int, int]]:
        """Best feasible (delta_d10, position) in this trip, or None."""
        key = (rid, trip.uid)
        if key in self.cells:
            return self.cells[key]
        lin = self.lineage.get(trip.uid)
        if lin is not None and lin[2] and self.cells.get((rid, lin[0]), 1) is None:
            # rid fit nowhere in the parent trip: only the spliced request's
            # two flanks are new ground
            positions = (lin[1], lin[1] + 1)
        else:
            positions = None
        out = self.sim.best_insertion(trip, rid, positions)
        self.cells[key] = out
        return out

    def best_greedy(self, s_in: Sequence[int], trips: Sequence[Trip], spare_vehicle: bool = False):
        """Cheapest feasible cell as (delta, rid, trip_index, pos), or None.

        Resolves cells lazily in ascending distance-lower-bound order; exact
        because a cell can never beat a bound below it.  With spare_vehicle
        an empty route is one more candidate column, at index len(trips).
        """
        cands = [
            (self.lower_bound(rid, trip), rid, ti)
            for rid in s_in
            for ti, trip in enumerate(trips)
        ]
        n_trips = len(trips)
        if spare_vehicle:
            cands.extend((self.sim.instance.direct_d10(rid), rid, n_trips) for rid in s_in)
        cands.sort()
        best = None
        for lb, rid, ti in cands:
            if best is not None and lb > best[0]:
                break
            if ti == n_trips:
                cell = (lb, 0) if self.single(rid) is not None else None
            else:
                cell = self.cell(rid, trips[ti])
            if cell is None:
                continue
            key = (cell[0], rid, ti, cell[1])
            if best is None or key < best:
                best = key
        return best

    def matrix(self, s_in: Sequence[int], trips: Sequence[Trip]) -> list[InsertionCostCell]:
        out = []
        for rid in s_in:
            for ti, trip in enumerate(trips):
                cell = self.cell(rid, trip)
                if cell is None:
                    out.append(InsertionCostCell(rid, ti, None, None, False))
                else:
                    out.append(InsertionCostCell(rid, ti, cell[1], cell[0], True))
        return out


# ---------------------------------------------------------------------------
# removal operators


def _rebuild_without(
    sim: Simulator, trips: Sequence[Trip], removed: set[int]
) -> tuple[list[Trip], list[int]]:
    """Drop removed ids from all trips, re-simulating the survivors.

    A shortened sequence that turns out unschedulable (possible with
    non-metric matrices) dissolves entirely; its leftovers join the removal.
    """
    out: list[Trip] = []
    extra: list[int] = []
    for trip in trips:
        keep = tuple(rid for rid in trip.requests if rid not in removed)
        if not keep:
            continue
        if len(keep) == len(trip.requests):
            out.append(trip)
            continue
        rebuilt = sim.build_trip(keep)
        if rebuilt is None:
            extra.extend(keep)
        else:
            out.append(rebuilt)
    return out, extra


def _roulette_without_replacement(
    weights: list[float], count: int, rng: random.Random
) -> list[int]:
    """Indices drawn by weight, no repeats; weights must be positive."""
    alive = list(range(len(weights)))
    picked = []
    while alive and len(picked) < count:
        total = sum(weights[i] for i in alive)
        shot = rng.random() * total
        acc = 0.0
        chosen = alive[-1]
        for i in alive:
            acc += weights[i]
            if shot < acc:
                chosen = i
                break
        picked.append(chosen)
        alive.remove(chosen)
    return picked


def _route_travel_time(sim: Simulator, trip: Trip) -> int:
    time = sim.time
    total = 0
    prev_dest = None
    for rid in trip.requests:
        r = sim.instance.request(rid)
        if prev_dest is not None:
            total += time[prev_dest][r.origin]
        total += time[r.origin][r.destination]
        prev_dest = r.destination
    return total


def _remove_routes(sim, solution, q, rng, weigher) -> tuple[list[Trip], list[int]]:
    trips = list(solution.trips)
    if not trips or q <= 0:
        return trips, []
    weights = [weigher(t) for t in trips]
    removed: list[int] = []
    chosen: list[int] = []
    alive = list(range(len(trips)))
    while alive and len(removed) < q:
        total = sum(weights[i] for i in alive)
        shot = rng.random() * total
        acc = 0.0
        pick = alive[-1]
        for i in alive:
            acc += weights[i]
            if shot < acc:
                pick = i
                break
        chosen.append(pick)
        alive.remove(pick)
        removed.extend(trips[pick].requests)
    survivors = [t for i, t in enumerate(trips) if i not in set(chosen)]
    return survivors, removed


def remove_random_routes(sim: Simulator, solution: Solution, q: int, rng: random.Random):
    return _remove_routes(sim, solution, q, rng, lambda t: 1.0)


def remove_time_routes(sim: Simulator, solution: Solution, q: int, rng: random.Random):
    return _remove_routes(sim, solution, q, rng, lambda t: float(_route_travel_time(sim, t)))


def remove_stop_routes(sim: Simulator, solution: Solution, q: int, rng: random.Random):
    return _remove_routes(sim, solution, q, rng, lambda t: 1.0 / len(t.requests))


def _planned_in_order(solution: Solution) -> list[int]:
    return [rid for t in solution.trips for rid in t.requests]


def remove_random_shipments(sim: Simulator, solution: Solution, q: int, rng: random.Random):
    planned = _planned_in_order(solution)
    if not planned or q <= 0:
        return list(solution.trips), []
    q = min(q, len(planned))
    removed = rng.sample(planned, q)
    trips, extra = _rebuild_without(sim, solution.trips, set(removed))
    return trips, removed + extra


def remove_time_shipments(sim: Simulator, solution: Solution, q: int, rng: random.Random):
    planned = _planned_in_order(solution)
    if not planned or q <= 0:
        return list(solution.trips), []
    time = sim.time
    weights = []
    for trip in solution.trips:
        reqs = [sim.instance.request(rid) for rid in trip.requests]
        for i, r in enumerate(reqs):
            w = 1  # keeps every weight positive for the roulette
            if i > 0:
                w += time[reqs[i - 1].destination][r.origin]
            if i + 1 < len(reqs):
                w += time[r.destination][reqs[i + 1].origin]
            weights.append(float(w))
    picked = _roulette_without_replacement(weights, min(q, len(planned)), rng)
    removed = [planned[i] for i in picked]
    trips, extra = _rebuild_without(sim, solution.trips, set(removed))
    return trips, removed + extra


def shaw_relatedness(
    instance: Instance, d_max: int, horizon_minutes: int, a: int, b: int, variant: str
) -> float:
    ra = instance.request(a)
    rb = instance.request(b)
    tw = abs(ra.pickup_window.start - rb.pickup_window.start) / horizon_minutes
    if variant == "tw":
        return tw
    dist = instance.matrix.distance
    spatial = (dist[ra.origin][rb.origin] + dist[ra.destination][rb.destination]) / max(d_max, 1)
    return spatial + tw


def remove_shaw(
    sim: Simulator,
    solution: Solution,
    q: int,
    rng: random.Random,
    variant: str = "distance_tw",
    p: int = 6,
):
    """Remove mutually similar shipments; low relatedness value = similar."""
    planned = _planned_in_order(solution)
    if not planned or q <= 0:
        return list(solution.trips), []
    instance = sim.instance
    d_max = instance.matrix.max_distance()
    horizon_minutes = instance.horizon.end_minute
    removed = [planned[rng.randrange(len(planned))]]
    pool = [rid for rid in planned if rid != removed[0]]
    while pool and len(removed) < q:
        ref = removed[rng.randrange(len(removed))]
        pool.sort(
            key=lambda rid: (
                shaw_relatedness(instance, d_max, horizon_minutes, ref, rid, variant),
                rid,
            )
        )
        rank = int(rng.random() ** p * len(pool))
        removed.append(pool.pop(min(rank, len(pool) - 1)))
    trips, extra = _rebuild_without(sim, solution.trips, set(removed))
    return trips, removed + extra


REMOVAL_OPERATORS = {
    "rrr": remove_random_routes,
    "trr": remove_time_routes,
    "srr": remove_stop_routes,
    "rsr": remove_random_shipments,
    "tsr": remove_time_shipments,
    "shaw": lambda sim, sol, q, rng, p=6: remove_shaw(sim, sol, q, rng, "distance_tw", p),
    "shaw_tw": lambda sim, sol, q, rng, p=6: remove_shaw(sim, sol, q, rng, "tw", p),
}


# ---------------------------------------------------------------------------
# insertion procedure


def _regret_value(values: list[int], k: int, cap: int, literal: bool) -> int:
    """Regret of a shipment given its per-route insertion costs.

    Routes with no feasible position, and missing routes when fewer than k
    exist, count at the outsourcing price cap.
    """
    c = sorted(values)
    while len(c) < k:
        c.append(cap)
    c = c[:k]
    if literal:
        return (k - 1) * (c[-1] - c[0])
    return sum(ci - c[0] for ci in c[1:])


def _ratio_pick(instance: Instance, s_in: list[int]) -> int:
    """Shipment with the least outsourcing cost per direct distance unit."""
    best = s_in[0]
    for rid in s_in[1:]:
        rb, db = instance.request(best).sm_price_cents, instance.direct_d10(best)
        rc, dc = instance.request(rid).sm_price_cents, instance.direct_d10(rid)
        if rc * db < rb * dc:
            best = rid
    return best


def _splice(trip: Trip, rid: int, pos: int) -> tuple[int, ...]:
    return trip.requests[:pos] + (rid,) + trip.requests[pos:]


def repair(
    sim: Simulator,
    trips: Sequence[Trip],
    bank: Sequence[int],
    removed: Sequence[int],
    mode: str = "greedy",
    evaluator: Optional[InsertionEvaluator] = None,
    regret_literal: bool = False,
) -> Solution:
    """Re-plan every unassigned shipment and return a complete solution.

    mode is "greedy" or "regret<k>".  Each round picks the next shipment,
    inserts it when cheaper than its outsourcing price, otherwise opens a
    new trip only if all current trips are utilised up to the minimum
    distance and the new trip itself is no dearer than outsourcing; the
    fallback is the outsourcing bank.  Ties go to the lowest request id,
    then the lowest trip index.  A final pass dissolves trips that ended
    below the minimum distance.
    """
    instance = sim.instance
    ev = evaluator or InsertionEvaluator(sim)
    kappa = instance.cost.kappa_cents
    mu = instance.mu_d10
    k = 0
    if mode != "greedy":
        if not mode.startswith("regret"):
            raise ValueError(f"unknown insertion mode {mode!r}")
        k = int(mode[len("regret"):])
        if k < 2:
            raise ValueError("regret needs k >= 2")

    trips = list(trips)
    s_in = sorted(set(bank) | set(removed))
    new_bank: list[int] = []
    # per-candidate state, maintained incrementally: only the column of a
    # changed trip is re-evaluated, which matches recomputing the matrix
    # every round because evaluation is pure
    rows: Optional[dict[int, list]] = None
    if mode != "greedy" and s_in:
        rows = {cand: [ev.cell(cand, t) for t in trips] for cand in s_in}
    best_of: dict[int, object] = dict.fromkeys(s_in, False)  # False = unresolved
    while s_in:
        # a spare vehicle (empty route) joins the candidate columns only
        # while every used vehicle is utilised up to the minimum distance
        spare = all(t.total_d10 >= mu for t in trips)
        rid = None
        cell = None  # (delta_d10, trip_index, pos); trip_index == len(trips) = spare vehicle
        if mode == "greedy":
            found = None
            for cand in s_in:
                got = best_of[cand]
                if got is False:
                    hit = ev.best_greedy([cand], trips)
                    got = None if hit is None else (hit[0], hit[2], hit[3])
                    best_of[cand] = got
                if spare and ev.single(cand) is not None:
                    alt = (sim.direct[cand], len(trips), 0)
                    if got is None or alt < got:
                        got = alt
                if got is not None:
                    key = (got[0], cand, got[1], got[2])
                    if found is None or key < found:
                        found = key
            if found is not None:
                delta, rid, ti, pos = found
                cell = (delta, ti, pos)
        else:
            n_trips = len(trips)
            best_key = None
            any_feasible = False
            for cand in s_in:
                cap = sim.price10[cand]
                values = []
                best_cell = None
                for ti, got in enumerate(rows[cand]):
                    if got is None:
                        values.append(cap)
                    else:
                        values.append(kappa * got[0])
                        if best_cell is None or (got[0], ti) < (best_cell[0], best_cell[1]):
                            best_cell = (got[0], ti, got[1])
                if spare:
                    if ev.single(cand) is not None:
                        direct = sim.direct[cand]
                        values.append(kappa * direct)
                        if best_cell is None or (direct, n_trips) < (best_cell[0], best_cell[1]):
                            best_cell = (direct, n_trips, 0)
                    else:
                        values.append(cap)
                regret = _regret_value(values, k, cap, regret_literal)
                key = (-regret, cand)
                if best_key is None or key < best_key:
                    best_key = key
                    rid = cand
                    cell = best_cell
                if best_cell is not None:
                    any_feasible = True
            if not any_feasible:
                rid = None  # no feasible insertion anywhere: use the cost ratio rule
        if rid is None:
            # nothing fits anywhere: take the worst outsourcing value per km first
            rid = _ratio_pick(instance, s_in)
            cell = None

        price10 = sim.price10[rid]
        changed_ti = None
        if cell is not None and cell[1] == len(trips):
            # spare-vehicle column won the matrix
            if kappa * cell[0] <= price10:
                trips.append(ev.single(rid))
                changed_ti = -1  # appended
            else:
                new_bank.append(rid)
        elif cell is not None and kappa * cell[0] < price10:
            delta, ti, pos = cell
            rebuilt = sim.splice_trip(trips[ti], rid, pos)
            assert rebuilt is not None
            ev.note_splice(trips[ti], rebuilt, rid, pos)
            trips[ti] = rebuilt
            changed_ti = ti
        else:
            single = ev.single(rid) if spare else None
            if single is not None and kappa * single.total_d10 <= price10:
                trips.append(single)
                changed_ti = -1
            else:
                new_bank.append(rid)
        s_in.remove(rid)
        del best_of[rid]
        if rows is not None:
            del rows[rid]
            if changed_ti == -1:
                new_trip = trips[-1]
                for cand in s_in:
                    rows[cand].append(ev.cell(cand, new_trip))
            elif changed_ti is not None:
                new_trip = trips[changed_ti]
                for cand in s_in:
                    rows[cand][changed_ti] = ev.cell(cand, new_trip)
        elif changed_ti == -1:
            new_trip = trips[-1]
            ti_new = len(trips) - 1
            for cand in s_in:
                got = best_of[cand]
                if got is False:
                    continue
                c_new = ev.cell(cand, new_trip)
                if c_new is not None:
                    alt = (c_new[0], ti_new, c_new[1])
                    if got is None or alt < got:
                        best_of[cand] = alt
        elif changed_ti is not None:
            new_trip = trips[changed_ti]
            for cand in s_in:
                got = best_of[cand]
                if got is False:
                    continue
                if got is not None and got[1] == changed_ti:
                    best_of[cand] = False  # its winner column changed: rescan
                    continue
                c_new = ev.cell(cand, new_trip)
                if c_new is not None:
                    alt = (c_new[0], changed_ti, c_new[1])
                    if got is None or alt < got:
                        best_of[cand] = alt

    # dissolve trips that ended below the minimum driven distance
    while True:
        keep = [t for t in trips if t.total_d10 >= mu]
        drop = [t for t in trips if t.total_d10 < mu]
        if not drop:
            break
        trips = keep
        for rid in sorted(rid for t in drop for rid in t.requests):
            found = ev.best_greedy([rid], trips) if trips else None
            price10 = sim.price10[rid]
            if found is not None and kappa * found[0] < price10:
                delta, _rid, ti, pos = found
                rebuilt = sim.splice_trip(trips[ti], rid, pos)
                assert rebuilt is not None
                ev.note_splice(trips[ti], rebuilt, rid, pos)
                trips[ti] = rebuilt
            else:
                new_bank.append(rid)

    total_d10 = sum(t.total_d10 for t in trips)
    cost_vehicles = instance.cost.vehicle_cost(total_d10)
    cost_out = sum(instance.request(rid).sm_price_cents for rid in new_bank)
    return Solution(
        tuple(trips), frozenset(new_bank), cost_vehicles, cost_out, cost_vehicles + cost_out
    )


def build_initial(instance: Instance, sim: Optional[Simulator] = None) -> Solution:
    """Greedy construction from the everything-outsourced start."""
    sim = sim or Simulator(instance)
    all_ids = [r.id for r in instance.requests]
    return repair(sim, [], [], all_ids, mode="greedy")
