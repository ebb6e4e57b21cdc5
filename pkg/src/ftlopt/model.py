"""Domain types and cost accounting shared by every other module.

Units are exact integers throughout so that totals are bit-reproducible:
time is minutes from the horizon origin (Monday 00:00 of the planning week),
distance is tenths of a kilometre (``d10``), money is euro cents.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional

MINUTES_PER_DAY = 1440
SUNDAY = 6  # weekday index, Monday = 0


# ---------------------------------------------------------------------------
# unit helpers


def cents(x) -> int:
    """Euro amount (float/str/int) to integer cents."""
    return int(round(float(x) * 100))


def d10_from_km(x) -> int:
    """Kilometres to integer tenth-km."""
    return int(round(float(x) * 10))


def fmt_money(c: int) -> str:
    """Cents to a '1234.56' string, exactly."""
    sign = "-" if c < 0 else ""
    c = abs(c)
    return f"{sign}{c // 100}.{c % 100:02d}"


def fmt_km(d10: int) -> str:
    """Tenth-km to a '123.4' string, exactly."""
    sign = "-" if d10 < 0 else ""
    d10 = abs(d10)
    return f"{sign}{d10 // 10}.{d10 % 10}"


def travel_minutes(d10: int, nu_kmh: float) -> int:
    """Travel time for a distance, rounded up to whole minutes."""
    if d10 == 0:
        return 0
    if float(nu_kmh).is_integer():
        nu = int(nu_kmh)
        return -((-d10 * 6) // nu)
    return math.ceil(d10 * 6 / nu_kmh)


# ---------------------------------------------------------------------------
# domain types


@dataclass(frozen=True)
class RegParams:
    """Simplified driving-time regulation parameters (defaults: production set)."""

    tau_n: int = 450   # max cumulative nonstop driving, minutes
    tau_b: int = 990   # min shift-break, minutes
    tau_s: int = 1320  # min Sunday-break, minutes
    sigma: int = 120   # per (un)loading operation, minutes
    nu: float = 70.0   # average speed, km/h

    def check(self) -> None:
        if not (self.tau_s >= self.tau_b > 0):
            raise ValueError("need tau_s >= tau_b > 0")
        if self.tau_n <= 0 or self.sigma < 0 or self.nu <= 0:
            raise ValueError("need tau_n > 0, sigma >= 0, nu > 0")


#: (upper bound in d10 or None for the open tier, rate in cents/km)
SmTier = tuple[Optional[int], int]

#: production spot-market rate table: <150 km 1.75, <350 km 1.40, else 1.15 EUR/km
DEFAULT_SM_TIERS: tuple[SmTier, ...] = ((1500, 175), (3500, 140), (None, 115))

DEFAULT_KAPPA_CENTS = 106  # 1.06 EUR per driven km, loaded or empty


@dataclass(frozen=True)
class CostModel:
    """Vehicle cost rate plus tiered spot-market rates.

    A distance exactly on a tier bound belongs to the upper tier. Explicit
    per-request prices, when present, override the tiers.
    """

    kappa_cents: int = DEFAULT_KAPPA_CENTS
    sm_tiers: tuple[SmTier, ...] = DEFAULT_SM_TIERS
    explicit_sm_prices: dict[int, int] = field(default_factory=dict)

    def check(self) -> None:
        if self.kappa_cents <= 0:
            raise ValueError("kappa must be positive")
        bounds = [b for b, _ in self.sm_tiers[:-1]]
        if self.sm_tiers[-1][0] is not None:
            raise ValueError("final tier must be open")
        if any(b is None for b in bounds) or bounds != sorted(set(bounds)):
            raise ValueError("tier bounds must be strictly increasing")
        if any(r <= 0 for _, r in self.sm_tiers):
            raise ValueError("tier rates must be positive")

    def sm_rate(self, direct_d10: int) -> int:
        """Rate in cents/km for a direct distance."""
        for bound, rate in self.sm_tiers:
            if bound is None or direct_d10 < bound:
                return rate
        raise AssertionError("tiers are total by construction")

    def sm_price(self, direct_d10: int, request_id: Optional[int] = None) -> int:
        """Spot-market price in cents for outsourcing one request."""
        if request_id is not None and request_id in self.explicit_sm_prices:
            return self.explicit_sm_prices[request_id]
        # rate[c/km] * d10[0.1 km] is in tenth-cents; round half up
        return (self.sm_rate(direct_d10) * direct_d10 + 5) // 10

    def vehicle_cost(self, total_d10: int) -> int:
        """Cost in cents of driving a total distance, rounded once."""
        return (self.kappa_cents * total_d10 + 5) // 10


@dataclass(frozen=True, order=True)
class TimeWindow:
    start: int  # minutes from horizon origin
    end: int

    def check(self) -> None:
        if self.start > self.end:
            raise ValueError(f"window start {self.start} after end {self.end}")


@dataclass(frozen=True)
class Request:
    id: int
    origin: int
    destination: int
    pickup_window: TimeWindow
    delivery_windows: tuple[TimeWindow, ...]
    sm_price_cents: int  # resolved s_r

    def check(self) -> None:
        if self.origin == self.destination:
            raise ValueError(f"request {self.id}: origin equals destination")
        if not self.delivery_windows:
            raise ValueError(f"request {self.id}: no delivery windows")
        if self.sm_price_cents <= 0:
            raise ValueError(f"request {self.id}: sm price must be positive")
        self.pickup_window.check()
        prev_end = None
        for w in self.delivery_windows:
            w.check()
            if prev_end is not None and w.start <= prev_end:
                raise ValueError(f"request {self.id}: delivery windows overlap or unsorted")
            prev_end = w.end


@dataclass(frozen=True)
class TravelMatrix:
    """Distances (d10) and times (minutes) per ordered location pair."""

    n_locations: int
    distance: tuple[tuple[int, ...], ...]
    time: tuple[tuple[int, ...], ...]

    @staticmethod
    def from_distances(dist_d10: list[list[int]], nu_kmh: float) -> "TravelMatrix":
        n = len(dist_d10)
        time = tuple(
            tuple(travel_minutes(dist_d10[i][j], nu_kmh) for j in range(n)) for i in range(n)
        )
        return TravelMatrix(n, tuple(tuple(row) for row in dist_d10), time)

    def check(self) -> None:
        for grid in (self.distance, self.time):
            if len(grid) != self.n_locations:
                raise ValueError("matrix row count mismatch")
            for i, row in enumerate(grid):
                if len(row) != self.n_locations:
                    raise ValueError("matrix column count mismatch")
                if row[i] != 0:
                    raise ValueError("matrix diagonal must be zero")
                if any(v < 0 for v in row):
                    raise ValueError("matrix entries must be non-negative")

    def max_distance(self) -> int:
        return max(max(row) for row in self.distance) if self.n_locations else 0


@dataclass(frozen=True)
class Horizon:
    origin_weekday: int  # 0 = Monday ... 6 = Sunday
    days: int

    @property
    def end_minute(self) -> int:
        return self.days * MINUTES_PER_DAY

    def check(self) -> None:
        if not 0 <= self.origin_weekday <= 6:
            raise ValueError("origin_weekday must be 0..6")
        if self.days <= 0:
            raise ValueError("horizon must cover at least one day")


@dataclass(frozen=True)
class Instance:
    requests: tuple[Request, ...]
    matrix: TravelMatrix
    cost: CostModel
    regs: RegParams
    mu_d10: int
    horizon: Horizon
    name: str = ""
    coords: Optional[tuple[tuple[float, float], ...]] = None  # per location, when known

    def check(self) -> None:
        self.matrix.check()
        self.cost.check()
        self.regs.check()
        self.horizon.check()
        if self.mu_d10 < 0:
            raise ValueError("mu must be non-negative")
        seen = set()
        for r in self.requests:
            r.check()
            if r.id in seen:
                raise ValueError(f"duplicate request id {r.id}")
            seen.add(r.id)
            for loc in (r.origin, r.destination):
                if not 0 <= loc < self.matrix.n_locations:
                    raise ValueError(f"request {r.id}: unknown location {loc}")
            ends = [r.pickup_window.end] + [w.end for w in r.delivery_windows]
            if max(ends) > self.horizon.end_minute:
                raise ValueError(f"request {r.id}: window beyond horizon")

    def request(self, rid: int) -> Request:
        return self._by_id()[rid]

    def _by_id(self) -> dict[int, Request]:
        cache = getattr(self, "_id_cache", None)
        if cache is None:
            cache = {r.id: r for r in self.requests}
            object.__setattr__(self, "_id_cache", cache)
        return cache

    def direct_d10(self, rid: int) -> int:
        r = self.request(rid)
        return self.matrix.distance[r.origin][r.destination]


_trip_uid = itertools.count(1)


@dataclass(frozen=True)
class Trip:
    """An ordered request sequence served by one vehicle.

    ``frontiers`` caches the per-node driver-state sets computed by the
    schedule module; a trip object is only ever built for a feasible sequence.
    """

    requests: tuple[int, ...]
    loaded_d10: int
    empty_d10: int
    frontiers: tuple = field(compare=False, repr=False, default=())
    uid: int = field(compare=False, repr=False, default_factory=lambda: next(_trip_uid))

    @property
    def total_d10(self) -> int:
        return self.loaded_d10 + self.empty_d10


@dataclass(frozen=True)
class Solution:
    trips: tuple[Trip, ...]
    bank: frozenset[int]
    cost_vehicles: int
    cost_outsourced: int
    cost_total: int

    @property
    def planned_count(self) -> int:
        return sum(len(t.requests) for t in self.trips)

    def planned_ids(self) -> list[int]:
        return [rid for t in self.trips for rid in t.requests]


# ---------------------------------------------------------------------------
# whole-solution accounting


class PartitionViolation(ValueError):
    """The trips and bank of a solution do not partition the request set."""


@dataclass(frozen=True)
class CostBreakdown:
    vehicles: int
    outsourced: int

    @property
    def total(self) -> int:
        return self.vehicles + self.outsourced


def trip_distances(instance: Instance, requests: tuple[int, ...]) -> tuple[int, int]:
    """Recompute (loaded_d10, empty_d10) for a request sequence."""
    dist = instance.matrix.distance
    loaded = 0
    empty = 0
    prev_dest = None
    for rid in requests:
        r = instance.request(rid)
        if prev_dest is not None:
            empty += dist[prev_dest][r.origin]
        loaded += dist[r.origin][r.destination]
        prev_dest = r.destination
    return loaded, empty


def _check_partition(instance: Instance, solution: Solution) -> list[str]:
    problems = []
    counts: dict[int, int] = {}
    for rid in solution.planned_ids():
        counts[rid] = counts.get(rid, 0) + 1
    for rid in solution.bank:
        counts[rid] = counts.get(rid, 0) + 1
    for r in instance.requests:
        n = counts.pop(r.id, 0)
        if n == 0:
            problems.append(f"request {r.id} missing")
        elif n > 1:
            problems.append(f"request {r.id} appears {n} times")
    for rid in sorted(counts):
        problems.append(f"unknown request {rid}")
    return problems


def solution_cost(instance: Instance, solution: Solution) -> CostBreakdown:
    """Recompute the cost decomposition from scratch.

    Raises PartitionViolation when a request is missing or duplicated.
    """
    problems = _check_partition(instance, solution)
    if problems:
        raise PartitionViolation("; ".join(problems))
    total_d10 = 0
    for t in solution.trips:
        loaded, empty = trip_distances(instance, t.requests)
        total_d10 += loaded + empty
    vehicles = instance.cost.vehicle_cost(total_d10)
    outsourced = sum(instance.request(rid).sm_price_cents for rid in sorted(solution.bank))
    return CostBreakdown(vehicles, outsourced)


@dataclass(frozen=True)
class Violation:
    kind: str      # "partition" | "min_distance" | "schedule"
    detail: str
    trip_index: Optional[int] = None


def validate_solution(instance: Instance, solution: Solution) -> list[Violation]:
    """All feasibility violations of a solution; empty list means feasible.

    Checks the partition property, every trip's schedule, and the per-trip
    minimum driven distance.
    """
    from . import schedule  # local import keeps module dependencies one-way

    out = [Violation("partition", p) for p in _check_partition(instance, solution)]
    for i, trip in enumerate(solution.trips):
        loaded, empty = trip_distances(instance, trip.requests)
        if (loaded, empty) != (trip.loaded_d10, trip.empty_d10):
            out.append(Violation("partition", f"trip {i}: cached distances stale", i))
        if loaded + empty < instance.mu_d10:
            out.append(
                Violation(
                    "min_distance",
                    f"trip {i}: total {fmt_km(loaded + empty)} km < mu {fmt_km(instance.mu_d10)} km",
                    i,
                )
            )
        result = schedule.simulate_trip(instance, trip.requests)
        if isinstance(result, schedule.Infeasible):
            out.append(Violation("schedule", f"trip {i}: {result.reason} at node {result.node}", i))
    return out
