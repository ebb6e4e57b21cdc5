"""Shared generators for randomized tests.

Everything here is seeded and uses exact integer units (d10 for distance,
minutes for time, cents for money) like the package itself.
"""

import math
import random

from ftlopt.model import (
    CostModel,
    Horizon,
    Instance,
    RegParams,
    Request,
    TimeWindow,
    TravelMatrix,
)

REGS = RegParams()


def euclid_d10(points):
    n = len(points)
    dist = [[0] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            if i != j:
                d = math.hypot(points[i][0] - points[j][0], points[i][1] - points[j][1])
                dist[i][j] = 10 * int(math.floor(d + 0.5))
    return dist


def micro_instance(seed: int, mu_mode: str = "small") -> Instance:
    """Euclidean micro-instance with 3-7 requests and mixed price levels.

    mu_mode "small" keeps the minimum distance below the shortest request
    (every single-request trip stays admissible); "large" forces bundling.
    """
    rng = random.Random(seed)
    n_req = rng.randint(3, 7)
    n_loc = 2 * n_req
    pts = [(rng.uniform(0, 300), rng.uniform(0, 300)) for _ in range(n_loc)]
    dist = euclid_d10(pts)
    matrix = TravelMatrix.from_distances(dist, 70)
    cost = CostModel()
    days = rng.randint(5, 10)
    requests = []
    for rid in range(1, n_req + 1):
        o, d = 2 * rid - 2, 2 * rid - 1
        day = rng.randint(0, 2)
        pw = TimeWindow(day * 1440 + 360, day * 1440 + 1080)
        dws = tuple(TimeWindow(dd * 1440 + 360, dd * 1440 + 1080) for dd in range(day, days))
        level = rng.choice((0.8, 1.0, 1.3, 1.8))
        price = max(1, int(cost.sm_price(dist[o][d]) * level))
        requests.append(Request(rid, o, d, pw, dws, price))
    if mu_mode == "small":
        mu = rng.choice((0, min(dist[r.origin][r.destination] for r in requests) // 2))
    else:
        mu = rng.randint(2000, 4000)
    instance = Instance(tuple(requests), matrix, cost, REGS, mu, Horizon(0, days))
    instance.check()
    return instance


def leg_case(seed: int):
    """A single propagate call: start label, drive length, target windows."""
    rng = random.Random(seed)
    days = rng.randint(4, 14)
    horizon_end = days * 1440
    depart = rng.randint(0, horizon_end // 3)
    counter = rng.randint(0, REGS.tau_n)
    drive = rng.randint(0, 3 * REGS.tau_n)
    windows = []
    t = rng.randint(0, horizon_end // 2)
    for _ in range(rng.randint(1, 4)):
        ws = t + rng.randint(0, 900)
        we = ws + rng.randint(REGS.sigma, 1800)
        if we > horizon_end:
            break
        windows.append(TimeWindow(ws, we))
        t = we + rng.randint(1, 500)
    if not windows:
        windows = [TimeWindow(0, horizon_end)]
    return depart, counter, drive, tuple(windows), days


def trip_case(seed: int):
    """Instance plus request sequence (1-3 requests) for trip-level checks."""
    rng = random.Random(seed)
    style = rng.choice(("ladder", "free"))
    n_loc = rng.randint(2, 6)
    days = rng.randint(6, 14)
    horizon_end = days * 1440
    dist = [[0] * n_loc for _ in range(n_loc)]
    for i in range(n_loc):
        for j in range(n_loc):
            if i != j:
                dist[i][j] = rng.randint(1, 9000)
    matrix = TravelMatrix.from_distances(dist, 70)
    n_req = rng.randint(1, 3)
    requests = []
    for rid in range(1, n_req + 1):
        o, d = rng.sample(range(n_loc), 2)
        if style == "ladder":
            day = rng.randint(0, 3)
            pw = TimeWindow(day * 1440 + 360, day * 1440 + 1080)
            wins = tuple(
                TimeWindow(dd * 1440 + 360, dd * 1440 + 1080) for dd in range(day, days)
            )
        else:
            ps = rng.randint(0, horizon_end // 3)
            pw = TimeWindow(ps, min(ps + rng.randint(REGS.sigma, 2880), horizon_end))
            wins = []
            t = rng.randint(0, horizon_end // 2)
            for _ in range(rng.randint(1, 4)):
                ws = t + rng.randint(0, 800)
                we = ws + rng.randint(REGS.sigma, 2000)
                if we > horizon_end:
                    break
                wins.append(TimeWindow(ws, we))
                t = we + rng.randint(1, 400)
            wins = tuple(wins) if wins else (TimeWindow(0, horizon_end),)
        requests.append(Request(rid, o, d, pw, wins, 1000))
    instance = Instance(tuple(requests), matrix, CostModel(), REGS, 0, Horizon(0, days))
    instance.check()
    return instance, tuple(r.id for r in requests)
