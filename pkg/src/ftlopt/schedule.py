"""Earliest-arrival trip scheduling under driving-time rules.

The driver state at a node is a label ``(service_start, nonstop_drive)``.
Because a later-but-more-rested state can beat an earlier-but-tired one
further down the trip, a single label is not enough: every node keeps the
full Pareto frontier of non-dominated labels, and a trip is feasible iff the
frontier at its last node is non-empty.  Frontiers stay tiny (a handful of
entries), so this is also the hot path used by insertion evaluation.

Rules realised here:
  * driving in stints of at most tau_n minutes between rests of >= tau_b;
    rests may be taken early (before the counter is full);
  * a contiguous non-drive, non-service period of >= tau_b resets the
    nonstop counter; service interrupts contiguity, waiting does not;
  * each Sunday carries a blackout [Sunday 00:00, 00:00 + tau_s) during
    which driving and service are forbidden (waiting is allowed and, being
    >= tau_b, resets the counter);
  * an (un)loading operation takes sigma minutes and must fit entirely
    inside one declared window of its node.
"""

from __future__ import annotations

from bisect import bisect_left
from dataclasses import dataclass
from typing import Optional, Sequence

from .model import (
    MINUTES_PER_DAY,
    SUNDAY,
    Instance,
    RegParams,
    Request,
    TimeWindow,
    Trip,
    trip_distances,
)

NO_WINDOW = "no_window"
HORIZON = "horizon_exceeded"

WEEK = 7 * MINUTES_PER_DAY


@dataclass(frozen=True)
class Label:
    arrival: int        # earliest feasible service start, minutes
    nonstop_drive: int  # driving minutes since the last qualifying rest


@dataclass(frozen=True)
class Infeasible:
    reason: str
    node: int = -1


@dataclass(frozen=True)
class NodeTiming:
    location: int
    arrival: int
    service_start: int
    departure: int


@dataclass(frozen=True)
class Segment:
    kind: str  # "drive" | "break" | "wait" | "service"
    start: int
    end: int


@dataclass(frozen=True)
class Schedule:
    nodes: tuple[NodeTiming, ...]
    segments: tuple[Segment, ...]


@dataclass(frozen=True)
class Calendar:
    """Sunday-blackout arithmetic for a horizon starting on a given weekday."""

    origin_weekday: int
    tau_s: int
    horizon_end: int

    def blackout_end_at(self, t: int) -> Optional[int]:
        """End of the blackout containing minute t, or None."""
        day = t // MINUTES_PER_DAY
        since_sunday = (self.origin_weekday + day - SUNDAY) % 7
        start = (day - since_sunday) * MINUTES_PER_DAY
        if start <= t < start + self.tau_s:
            return start + self.tau_s
        return None

    def next_blackout_start(self, t: int) -> int:
        """First blackout start strictly after a non-blackout minute t."""
        day = t // MINUTES_PER_DAY
        since_sunday = (self.origin_weekday + day - SUNDAY) % 7
        return (day - since_sunday) * MINUTES_PER_DAY + WEEK


def calendar_for(instance: Instance) -> Calendar:
    return Calendar(
        instance.horizon.origin_weekday, instance.regs.tau_s, instance.horizon.end_minute
    )


# ---------------------------------------------------------------------------
# leg propagation


def _leg_arrivals(t0: int, c0: int, drive: int, regs: RegParams, cal: Calendar, trace: bool):
    """Pareto states (arrival, counter) after driving `drive` minutes from (t0, c0).

    With trace=True each state also carries the step recipe needed to
    materialise its segment timeline.
    """
    tau_n, tau_b = regs.tau_n, regs.tau_b
    tau_s = cal.tau_s
    horizon_end = cal.horizon_end
    w_shift = cal.origin_weekday - SUNDAY
    if t0 <= horizon_end:
        if drive == 0:
            return [(t0, c0, () if trace else None)]
        if c0 + drive <= tau_n and t0 + drive <= horizon_end:
            day = t0 // MINUTES_PER_DAY
            sunday_start = (day - (w_shift + day) % 7) * MINUTES_PER_DAY
            if t0 >= sunday_start + tau_s and t0 + drive <= sunday_start + WEEK:
                # common case: one uninterrupted stint, nothing else non-dominated
                return [(t0 + drive, c0 + drive, (("drive", 0),) if trace else None)]
    out = []
    stack = [(t0, c0, drive, () if trace else None)]
    while stack:
        t, c, rem, steps = stack.pop()
        if t > horizon_end:
            continue
        if rem == 0:
            out.append((t, c, steps))
            continue
        day = t // MINUTES_PER_DAY
        sunday_start = (day - (w_shift + day) % 7) * MINUTES_PER_DAY
        if t < sunday_start + tau_s:
            be = sunday_start + tau_s
            c2 = 0 if be - t >= tau_b else c
            stack.append((be, c2, rem, steps + (("wait", be),) if trace else None))
            continue
        nb = sunday_start + WEEK
        # complete the leg before the next blackout, with k rests inside
        k_min = max(0, -(-(rem - (tau_n - c)) // tau_n))
        k = k_min
        while True:
            counter = rem + c - k * tau_n
            if counter <= 0:
                break
            arr = t + rem + k * tau_b
            if arr > nb or arr > horizon_end:
                break
            out.append((arr, counter, steps + (("drive", k),) if trace else None))
            k += 1
        # or drive as far as possible, rest through the blackout, continue
        avail = nb - t
        drove = 0
        cc = c
        while avail > 0 and drove < rem:
            stint = min(tau_n - cc, rem - drove, avail)
            drove += stint
            avail -= stint
            cc += stint
            if drove == rem or avail == 0:
                break
            if cc == tau_n:
                if avail <= tau_b:
                    break
                avail -= tau_b
                cc = 0
        if drove < rem:
            stack.append(
                (
                    nb + cal.tau_s,
                    0,
                    rem - drove,
                    steps + (("spill", drove),) if trace else None,
                )
            )
    return _pareto(out)


def _pareto(states: list) -> list:
    """Keep non-dominated (t, c) states, sorted by time; first wins on ties."""
    if len(states) <= 1:
        return states
    states.sort(key=lambda s: (s[0], s[1]))
    kept = []
    best_c = None
    for s in states:
        if best_c is None or s[1] < best_c:
            kept.append(s)
            best_c = s[1]
    return kept


def _earliest_fit(
    t: int, starts: Sequence[int], ends: Sequence[int], sigma: int, cal: Calendar
) -> Optional[int]:
    """Earliest service start >= t that fits a window, avoids blackouts, and
    completes inside the horizon."""
    tau_s = cal.tau_s
    w_shift = cal.origin_weekday - SUNDAY
    i = 0 if len(ends) == 1 else bisect_left(ends, t + sigma)
    while i < len(starts):
        s = starts[i]
        if t > s:
            s = t
        if sigma > 0:
            while True:
                day = s // MINUTES_PER_DAY
                sunday_start = (day - (w_shift + day) % 7) * MINUTES_PER_DAY
                if s < sunday_start + tau_s:
                    s = sunday_start + tau_s  # inside the weekly blackout
                elif sunday_start + WEEK < s + sigma:
                    s = sunday_start + WEEK + tau_s  # operation would cross into it
                else:
                    break
        if s + sigma <= ends[i]:
            return s if s + sigma <= cal.horizon_end else None
        i += 1
    return None


def _align(arrivals, starts, ends, regs: RegParams, cal: Calendar, trace: bool):
    """Service-start labels at a node from its arrival states.

    Each arrival yields the as-soon-as-possible service (waiting >= tau_b
    resets the counter) and, for tired drivers, a rest-first variant.
    """
    out = []
    zero_s = None  # earliest known fresh-counter service start
    for idx, (t, c, _steps) in enumerate(arrivals):
        if zero_s is not None and t >= zero_s:
            break  # every later variant starts no earlier and rests no better
        meta = (idx, t, c) if trace else None
        s = _earliest_fit(t, starts, ends, regs.sigma, cal)
        if s is not None:
            rested = s - t >= regs.tau_b
            c_eff = 0 if rested else c
            out.append((s, c_eff, meta))
            if c_eff == 0 and (zero_s is None or s < zero_s):
                zero_s = s
        if s is not None and c > 0 and zero_s is None:
            s2 = _earliest_fit(t + regs.tau_b, starts, ends, regs.sigma, cal)
            if s2 is not None:
                out.append((s2, 0, meta))
                zero_s = s2
    return _pareto(out)


# ---------------------------------------------------------------------------
# trip simulation


class Simulator:
    """Per-instance compiled scheduling machinery (pure, shareable)."""

    def __init__(self, instance: Instance):
        self.instance = instance
        self.regs = instance.regs
        self.cal = calendar_for(instance)
        self.dist = instance.matrix.distance
        self.time = instance.matrix.time
        # per-request flat tables for the hot paths
        self.origin: dict[int, int] = {}
        self.dest: dict[int, int] = {}
        self.direct: dict[int, int] = {}
        self.price10: dict[int, int] = {}
        self.pw: dict[int, tuple[int, int]] = {}
        self.dw: dict[int, tuple[tuple[int, ...], tuple[int, ...]]] = {}
        for r in instance.requests:
            self.origin[r.id] = r.origin
            self.dest[r.id] = r.destination
            self.direct[r.id] = instance.matrix.distance[r.origin][r.destination]
            self.price10[r.id] = r.sm_price_cents * 10
            self.pw[r.id] = (r.pickup_window.start, r.pickup_window.end)
            self.dw[r.id] = (
                tuple(w.start for w in r.delivery_windows),
                tuple(w.end for w in r.delivery_windows),
            )
        self._node_data: dict[int, tuple] = {}
        self._schedules: dict[int, Schedule] = {}
        self._latest: dict[int, tuple[int, ...]] = {}
        self._seq_locs: dict[int, tuple[tuple[int, ...], tuple[int, ...]]] = {}
        self._seq_nodes: dict[int, tuple] = {}
        self._trips: dict[tuple[int, ...], Optional[Trip]] = {}

    def clear_caches(self) -> None:
        """Drop memoised trips and per-trip derivatives (bounds memory)."""
        self._trips.clear()
        self._schedules.clear()
        self._latest.clear()
        self._seq_locs.clear()
        self._seq_nodes.clear()

    def _locs(self, trip: Trip) -> tuple[tuple[int, ...], tuple[int, ...]]:
        locs = self._seq_locs.get(trip.uid)
        if locs is None:
            locs = (
                tuple(self.origin[q] for q in trip.requests),
                tuple(self.dest[q] for q in trip.requests),
            )
            self._seq_locs[trip.uid] = locs
        return locs

    def _nodes_of(self, rid: int):
        """((loc, starts, ends) pickup, (loc, starts, ends) delivery) for a request."""
        data = self._node_data.get(rid)
        if data is None:
            ps, pe = self.pw[rid]
            pick = (self.origin[rid], (ps,), (pe,))
            deliv = (self.dest[rid],) + self.dw[rid]
            data = (pick, deliv)
            self._node_data[rid] = data
        return data

    def latest_starts(self, trip: Trip) -> tuple[int, ...]:
        """Per node: latest service start that can still finish the trip when
        driving takes exactly the matrix time (a no-breaks relaxation)."""
        lat = self._latest.get(trip.uid)
        if lat is not None:
            return lat
        sigma = self.regs.sigma
        tau_n, tau_b = self.regs.tau_n, self.regs.tau_b
        time = self.time
        seq = trip.requests
        nodes = []
        for rid in seq:
            nodes.append((self.origin[rid], self.pw[rid][1]))
            nodes.append((self.dest[rid], self.dw[rid][1][-1]))
        out = [0] * len(nodes)
        nxt = None
        for i in range(len(nodes) - 1, -1, -1):
            loc, last_end = nodes[i]
            bound = last_end - sigma
            if nxt is not None:
                t = time[loc][nxt]
                if t > tau_n:
                    t += tau_b * ((t - 1) // tau_n)  # unavoidable rests
                bound = min(bound, out[i + 1] - sigma - t)
            out[i] = bound
            nxt = loc
        lat = tuple(out)
        self._latest[trip.uid] = lat
        return lat

    def node_sequence(self, requests: Sequence[int]):
        nodes = []
        for rid in requests:
            pick, deliv = self._nodes_of(rid)
            nodes.append(pick)
            nodes.append(deliv)
        return nodes

    def frontiers(self, requests: Sequence[int], trace: bool = False):
        """Per-node label frontiers for a request sequence, or Infeasible."""
        nodes = self.node_sequence(requests)
        first_start = self.instance.request(requests[0]).pickup_window.start
        arrivals = [(first_start, 0, () if trace else None)]
        result = []
        prev_loc = None
        for i, (loc, starts, ends) in enumerate(nodes):
            if i > 0:
                travel = self.time[prev_loc][loc]
                merged = []
                for j, (s, c, _m) in enumerate(result[-1]):
                    depart = s + self.regs.sigma
                    for t, cc, steps in _leg_arrivals(
                        depart, c, travel, self.regs, self.cal, trace
                    ):
                        merged.append((t, cc, (j, steps) if trace else None))
                arrivals = _pareto(merged)
                if not arrivals:
                    return Infeasible(HORIZON, i)
            frontier = _align(
                arrivals,
                starts,
                ends,
                self.regs,
                self.cal,
                trace,
            )
            if not frontier:
                return Infeasible(NO_WINDOW, i)
            if trace:
                # meta: (arrival index, arrival time, arrival counter) + leg parentage
                frontier = [
                    (s, c, (meta, arrivals[meta[0]][2]) if meta else None)
                    for (s, c, meta) in frontier
                ]
            result.append(frontier)
            prev_loc = loc
        return result

    # -- trip construction -------------------------------------------------

    def build_trip(self, requests: Sequence[int]) -> Optional[Trip]:
        seq = tuple(requests)
        if seq in self._trips:
            return self._trips[seq]
        fronts = self.frontiers(seq)
        if isinstance(fronts, Infeasible):
            trip = None
        else:
            loaded, empty = trip_distances(self.instance, seq)
            bare = tuple(tuple((s, c) for (s, c, _m) in f) for f in fronts)
            trip = Trip(seq, loaded, empty, frontiers=bare)
        self._trips[seq] = trip
        return trip

    def schedule_for(self, trip: Trip) -> Schedule:
        sched = self._schedules.get(trip.uid)
        if sched is None:
            sched = simulate_trip(self.instance, trip.requests, simulator=self)
            assert isinstance(sched, Schedule)
            self._schedules[trip.uid] = sched
        return sched

    # -- insertion evaluation ----------------------------------------------

    def insertion_delta_d10(self, trip: Optional[Trip], rid: int, pos: int) -> int:
        dist = self.dist
        o, d = self.origin[rid], self.dest[rid]
        direct = self.direct[rid]
        if trip is None or not trip.requests:
            return direct
        seq = trip.requests
        if pos == 0:
            return direct + dist[d][self.origin[seq[0]]]
        if pos == len(seq):
            return dist[self.dest[seq[-1]]][o] + direct
        prev_d = self.dest[seq[pos - 1]]
        next_o = self.origin[seq[pos]]
        return dist[prev_d][o] + direct + dist[d][next_o] - dist[prev_d][next_o]

    def _position_plausible(self, trip: Trip, rid: int, pos: int) -> bool:
        """O(1) necessary condition from the trip's earliest-start frontier
        and its latest-start relaxation; never rejects a feasible splice."""
        sigma = self.regs.sigma
        tau_n, tau_b = self.regs.tau_n, self.regs.tau_b
        time = self.time

        def span(t):
            return t if t <= tau_n else t + tau_b * ((t - 1) // tau_n)

        o, d = self.origin[rid], self.dest[rid]
        ps, pe = self.pw[rid]
        dws, dwe = self.dw[rid]
        seq = trip.requests
        if pos > 0:
            depart = trip.frontiers[2 * pos - 1][0][0] + sigma
            arr_o = depart + span(time[self.dest[seq[pos - 1]]][o])
        else:
            arr_o = ps
        s_o = arr_o if arr_o > ps else ps
        if s_o + sigma > pe:
            return False
        arr_d = s_o + sigma + span(time[o][d])
        s_d = arr_d if arr_d > dws[0] else dws[0]
        if s_d + sigma > dwe[-1]:
            return False
        if pos < len(seq):
            lat = self.latest_starts(trip)
            if s_d + sigma + span(time[d][self.origin[seq[pos]]]) > lat[2 * pos]:
                return False
        return True

    def best_insertion(self, trip: Trip, rid: int, positions=None):
        """Cheapest schedulable splice of rid into trip: (delta_d10, pos) or None.

        One fused sweep computes the distance delta and the O(1) incompatibility
        screen per position; only surviving positions are simulated, cheapest
        delta first.
        """
        seq = trip.requests
        n = len(seq)
        dist = self.dist
        time = self.time
        sigma = self.regs.sigma
        tau_n, tau_b = self.regs.tau_n, self.regs.tau_b
        o, d = self.origin[rid], self.dest[rid]
        direct = self.direct[rid]
        ps, pe = self.pw[rid]
        dws, dwe = self.dw[rid]
        dw0 = dws[0]
        dwl = dwe[-1]
        origs, dests = self._locs(trip)
        fronts = trip.frontiers
        lat = self.latest_starts(trip)
        dist_d = dist[d]
        time_d = time[d]
        t_od = time[o][d]
        if t_od > tau_n:
            t_od += tau_b * ((t_od - 1) // tau_n)
        cands = []
        for pos in positions if positions is not None else range(n + 1):
            if pos > 0:
                prev_d = dests[pos - 1]
                delta = dist[prev_d][o] + direct
                t_in = time[prev_d][o]
                if t_in > tau_n:
                    t_in += tau_b * ((t_in - 1) // tau_n)
                arr_o = fronts[2 * pos - 1][0][0] + sigma + t_in
            else:
                delta = direct
                arr_o = ps
            if pos < n:
                next_o = origs[pos]
                delta += dist_d[next_o]
                if pos > 0:
                    delta -= dist[prev_d][next_o]
            s_o = arr_o if arr_o > ps else ps
            if s_o + sigma > pe:
                continue
            s_d = s_o + sigma + t_od
            if s_d < dw0:
                s_d = dw0
            if s_d + sigma > dwl:
                continue
            if pos < n:
                t_out = time_d[origs[pos]]
                if t_out > tau_n:
                    t_out += tau_b * ((t_out - 1) // tau_n)
                if s_d + sigma + t_out > lat[2 * pos]:
                    continue
            cands.append((delta, pos))
        cands.sort()
        for delta, pos in cands:
            if self._insertion_sim(trip, rid, pos):
                return delta, pos
        return None

    def insertion_feasible(self, trip: Optional[Trip], rid: int, pos: int) -> bool:
        """Exact feasibility of splicing request `rid` at `pos`.

        Warm-starts from the trip's cached frontier before the splice point
        and stops early once the propagated frontiers re-converge with the
        cached suffix; the outcome equals full resimulation.
        """
        if trip is None or not trip.requests:
            return self.single_trip(rid) is not None
        if not self._position_plausible(trip, rid, pos):
            return False
        return self._insertion_sim(trip, rid, pos)

    def _trip_nodes(self, trip: Trip):
        nodes = self._seq_nodes.get(trip.uid)
        if nodes is None:
            nodes = []
            for q in trip.requests:
                qp, qd = self._nodes_of(q)
                nodes.append(qp)
                nodes.append(qd)
            nodes = tuple(nodes)
            self._seq_nodes[trip.uid] = nodes
        return nodes

    def _insertion_sim(self, trip: Trip, rid: int, pos: int) -> bool:
        regs, cal = self.regs, self.cal
        sigma = regs.sigma
        tau_n, tau_b, tau_s = regs.tau_n, regs.tau_b, cal.tau_s
        horizon_end = cal.horizon_end
        w_shift = cal.origin_weekday - SUNDAY
        time = self.time
        pick, deliv = self._nodes_of(rid)
        if pos > 0:
            frontier = trip.frontiers[2 * pos - 1]
            prev_loc = self.dest[trip.requests[pos - 1]]
        else:
            frontier = None
            prev_loc = None
        trip_nodes = self._trip_nodes(trip)
        cached_offset = 2 * pos  # node index in the old trip matching i == 2
        n_total = 2 + len(trip_nodes) - cached_offset
        old_fronts = trip.frontiers
        for i in range(n_total):
            if i == 0:
                loc, starts, ends = pick
            elif i == 1:
                loc, starts, ends = deliv
            else:
                loc, starts, ends = trip_nodes[cached_offset + i - 2]
            if frontier is None:
                arrivals = [(pick[1][0], 0, None)]
            else:
                travel = time[prev_loc][loc]
                if len(frontier) == 1:
                    lab = frontier[0]
                    t0 = lab[0] + sigma
                    c0 = lab[1]
                    # fused fast path: one stint, then window alignment, all
                    # exactly as the general machinery would produce
                    day = t0 // MINUTES_PER_DAY
                    ss = (day - (w_shift + day) % 7) * MINUTES_PER_DAY
                    arr = t0 + travel
                    if (
                        c0 + travel <= tau_n
                        and arr <= horizon_end
                        and t0 >= ss + tau_s
                        and arr <= ss + WEEK
                    ):
                        s = _earliest_fit(arr, starts, ends, sigma, cal)
                        if s is None:
                            return False
                        cc = c0 + travel
                        if cc == 0 or s - arr >= tau_b:
                            frontier = ((s, 0),)
                        else:
                            s2 = _earliest_fit(arr + tau_b, starts, ends, sigma, cal)
                            if s2 is None or s2 == s:
                                frontier = ((s, 0),) if s2 == s else ((s, cc),)
                            else:
                                frontier = ((s, cc), (s2, 0))
                        if i >= 2:
                            old = old_fronts[cached_offset + i - 2]
                            if frontier == old:
                                return True
                        prev_loc = loc
                        continue
                    arrivals = _leg_arrivals(t0, c0, travel, regs, cal, False)
                else:
                    merged = []
                    for lab in frontier:
                        merged.extend(
                            _leg_arrivals(lab[0] + sigma, lab[1], travel, regs, cal, False)
                        )
                    arrivals = _pareto(merged)
                if not arrivals:
                    return False
            frontier = _align(arrivals, starts, ends, regs, cal, False)
            if not frontier:
                return False
            if i >= 2:
                old = old_fronts[cached_offset + i - 2]
                if len(old) == len(frontier) and all(
                    (lab[0], lab[1]) == o for lab, o in zip(frontier, old)
                ):
                    return True
            prev_loc = loc
        return True

    def splice_trip(self, trip: Optional[Trip], rid: int, pos: int) -> Optional[Trip]:
        """The trip with rid spliced in at pos, or None when unschedulable.

        Reuses the prefix frontiers and, once the propagated suffix
        re-converges with the cached one, the remaining frontiers as well;
        the resulting trip equals a from-scratch build of the sequence.
        """
        if trip is None or not trip.requests:
            return self.single_trip(rid)
        seq = trip.requests
        new_seq = seq[:pos] + (rid,) + seq[pos:]
        if new_seq in self._trips:
            return self._trips[new_seq]
        regs, cal = self.regs, self.cal
        sigma = regs.sigma
        time = self.time
        pick, deliv = self._nodes_of(rid)
        if pos > 0:
            frontier = trip.frontiers[2 * pos - 1]
            prev_loc = self.dest[seq[pos - 1]]
        else:
            frontier = None
            prev_loc = None
        new_nodes = [pick, deliv]
        for q in seq[pos:]:
            qp, qd = self._nodes_of(q)
            new_nodes.append(qp)
            new_nodes.append(qd)
        cached_offset = 2 * pos
        computed: list[tuple] = []
        converged_at = None
        for i, (loc, starts, ends) in enumerate(new_nodes):
            if frontier is None:
                arrivals = [(pick[1][0], 0, None)]
            else:
                travel = time[prev_loc][loc]
                merged = []
                for lab in frontier:
                    merged.extend(_leg_arrivals(lab[0] + sigma, lab[1], travel, regs, cal, False))
                arrivals = _pareto(merged)
                if not arrivals:
                    self._trips[new_seq] = None
                    return None
            frontier = _align(arrivals, starts, ends, regs, cal, False)
            if not frontier:
                self._trips[new_seq] = None
                return None
            bare = tuple((lab[0], lab[1]) for lab in frontier)
            computed.append(bare)
            if i >= 2 and bare == trip.frontiers[cached_offset + i - 2]:
                converged_at = i
                break
            prev_loc = loc
        new_fronts = trip.frontiers[: 2 * pos] + tuple(computed)
        if converged_at is not None:
            new_fronts += trip.frontiers[cached_offset + converged_at - 1 :]
        delta = self.insertion_delta_d10(trip, rid, pos)
        loaded = trip.loaded_d10 + self.direct[rid]
        empty = trip.empty_d10 + delta - self.direct[rid]
        out = Trip(new_seq, loaded, empty, frontiers=new_fronts)
        self._trips[new_seq] = out
        return out

    def single_trip(self, rid: int) -> Optional[Trip]:
        return self.build_trip((rid,))


# ---------------------------------------------------------------------------
# public operations


def propagate(
    label: Label,
    depart_time: int,
    drive_minutes: int,
    target_windows: Sequence[TimeWindow],
    regs: RegParams,
    calendar: Calendar,
):
    """Earliest service-start label after one travel leg, or Infeasible.

    The returned label is the best (smallest service start) member of the
    reachable state frontier; rests may be scheduled before the nonstop
    counter is full when that pays off.
    """
    arrivals = _leg_arrivals(depart_time, label.nonstop_drive, drive_minutes, regs, calendar, False)
    if not arrivals:
        return Infeasible(HORIZON)
    starts = tuple(w.start for w in target_windows)
    ends = tuple(w.end for w in target_windows)
    frontier = _align(arrivals, starts, ends, regs, calendar, False)
    if not frontier:
        return Infeasible(NO_WINDOW)
    s, c, _meta = frontier[0]
    return Label(s, c)


def _materialize_leg(t0, c0, drive, steps, regs: RegParams, cal: Calendar):
    """Replay one leg's recipe into (segments, arrival, counter)."""
    tau_n, tau_b = regs.tau_n, regs.tau_b
    segs: list[Segment] = []
    t, c, rem = t0, c0, drive
    for op, arg in steps:
        if op == "wait":
            if arg > t:
                segs.append(Segment("wait", t, arg))
            c = 0 if arg - t >= tau_b else c
            t = arg
        elif op == "spill":
            # drive as far as the recipe says, then rest through the blackout
            nb = cal.next_blackout_start(t)
            avail = nb - t
            left = arg
            while avail > 0 and left > 0:
                stint = min(tau_n - c, left, avail)
                if stint > 0:
                    segs.append(Segment("drive", t, t + stint))
                    t += stint
                    c += stint
                    left -= stint
                    avail -= stint
                if left == 0 or avail == 0:
                    break
                if c == tau_n:
                    if avail <= tau_b:
                        break
                    segs.append(Segment("break", t, t + tau_b))
                    t += tau_b
                    avail -= tau_b
                    c = 0
            if left:
                raise AssertionError("spill replay drove less than recorded")
            rem -= arg
            end = nb + cal.tau_s
            segs.append(Segment("wait", t, end))
            t = end
            c = 0
        else:  # ("drive", k): finish the leg with k rests inside
            k = arg
            last = rem + c - k * tau_n if k else rem
            left = rem - last
            breaks = 0
            while left > 0 or breaks < k:
                stint = min(tau_n - c, left)
                if stint > 0:
                    segs.append(Segment("drive", t, t + stint))
                    t += stint
                    c += stint
                    left -= stint
                if breaks < k:
                    segs.append(Segment("break", t, t + tau_b))
                    t += tau_b
                    c = 0
                    breaks += 1
            if last > 0:
                segs.append(Segment("drive", t, t + last))
                t += last
                c += last
            rem = 0
    return segs, t, c


def simulate_trip(instance: Instance, requests: Sequence[int], simulator: Simulator = None):
    """Full earliest-completion schedule for a request sequence, or Infeasible.

    The vehicle appears at the first pickup at that window's start with a
    fresh driving counter; service and travel legs alternate from there.
    """
    if not requests:
        raise ValueError("empty request sequence")
    if len(set(requests)) != len(requests):
        raise ValueError("duplicate requests in sequence")
    sim = simulator or Simulator(instance)
    fronts = sim.frontiers(requests, trace=True)
    if isinstance(fronts, Infeasible):
        return fronts

    # pick the earliest-finishing label at the last node and walk parents back
    chain = []
    pick = min(range(len(fronts[-1])), key=lambda i: fronts[-1][i][:2])
    for i in range(len(fronts) - 1, -1, -1):
        s, c, meta = fronts[i][pick]
        (arr_idx, arr_t, arr_c), leg = meta
        parent_and_steps = leg  # (prev label index, leg steps) or () at node 0
        if i == 0:
            chain.append((s, c, arr_t, arr_c, None, ()))
            break
        prev_idx, steps = parent_and_steps
        chain.append((s, c, arr_t, arr_c, prev_idx, steps))
        pick = prev_idx
    chain.reverse()

    nodes = sim.node_sequence(requests)
    sigma = instance.regs.sigma
    timings = []
    segments: list[Segment] = []
    prev_depart = None
    prev_loc = None
    for i, ((loc, _st, _en), (s, c, arr_t, arr_c, _parent, steps)) in enumerate(zip(nodes, chain)):
        if i == 0:
            arrival = arr_t
        else:
            travel = instance.matrix.time[prev_loc][loc]
            prev_label = chain[i - 1]
            legs, t_end, c_end = _materialize_leg(
                prev_depart, prev_label[1], travel, steps, instance.regs, sim.cal
            )
            if t_end != arr_t or c_end != arr_c:
                raise AssertionError("leg replay mismatch")
            segments.extend(legs)
            arrival = arr_t
        if s > arrival:
            segments.append(Segment("wait", arrival, s))
        if sigma > 0:
            segments.append(Segment("service", s, s + sigma))
        timings.append(NodeTiming(loc, arrival, s, s + sigma))
        prev_depart = s + sigma
        prev_loc = loc
    return Schedule(tuple(timings), tuple(segments))


def check_insertion(instance: Instance, trip: Trip, request: Request, position: int):
    """Schedule of the trip with `request` spliced in at `position`.

    Equivalent to simulating the spliced sequence from scratch.
    """
    if not 0 <= position <= len(trip.requests):
        raise ValueError(f"position {position} out of range")
    seq = trip.requests[:position] + (request.id,) + trip.requests[position:]
    return simulate_trip(instance, seq)
