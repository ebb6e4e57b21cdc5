"""Benchmark file parsing, instance transformation, and native JSON I/O.

The native JSON layout is the only interchange format between CLI commands;
it is described in docs/formats.md.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .model import (
    DEFAULT_SM_TIERS,
    MINUTES_PER_DAY,
    CostModel,
    Horizon,
    Instance,
    RegParams,
    Request,
    SmTier,
    TimeWindow,
    TravelMatrix,
    cents,
    d10_from_km,
)


class ParseError(ValueError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class TransformError(ValueError):
    pass


class SchemaError(ValueError):
    def __init__(self, pointer: str, message: str = ""):
        super().__init__(f"{pointer}: {message}" if message else pointer)
        self.pointer = pointer


@dataclass(frozen=True)
class GhNode:
    id: int
    x: float
    y: float
    demand: int
    tw_start: int
    tw_end: int
    service: int


@dataclass(frozen=True)
class GhInstance:
    name: str
    nodes: tuple[GhNode, ...]


@dataclass(frozen=True)
class TransformConfig:
    factor: int = 6
    day_open: int = 360    # 06:00
    day_close: int = 1080  # 18:00
    mu_per_day_km: int = 250
    kappa_cents: int = 106
    sm_tiers: tuple[SmTier, ...] = DEFAULT_SM_TIERS
    regs: RegParams = field(default_factory=RegParams)
    slack_days: int = 7    # horizon past the last ready day


def parse_gh(text: str) -> GhInstance:
    """Read a whitespace-column benchmark file (depot plus customer rows)."""
    lines = text.splitlines()
    name = ""
    data_from = 0
    for i, line in enumerate(lines):
        stripped = line.strip()
        if not stripped:
            continue
        if not name and len(stripped.split()) == 1:
            name = stripped
        if stripped.upper().startswith("CUST"):
            # both the section line and the column-header line match; the
            # node rows follow the last of them
            data_from = i + 1
    nodes = []
    for i in range(data_from, len(lines)):
        tokens = lines[i].split()
        if not tokens:
            continue
        if len(tokens) != 7:
            if nodes or data_from:
                raise ParseError(i + 1, f"expected 7 columns, got {len(tokens)}")
            continue
        try:
            nodes.append(
                GhNode(
                    int(tokens[0]),
                    float(tokens[1]),
                    float(tokens[2]),
                    int(float(tokens[3])),
                    int(float(tokens[4])),
                    int(float(tokens[5])),
                    int(float(tokens[6])),
                )
            )
        except ValueError:
            raise ParseError(i + 1, f"non-numeric field in {lines[i].strip()!r}") from None
    if not nodes:
        raise ParseError(1, "no node rows found")
    return GhInstance(name, tuple(nodes))


def _round_km(value: float) -> int:
    """Round to the closest integer kilometre, halves up."""
    return int(math.floor(value + 0.5))


def transform(gh: GhInstance, cfg: TransformConfig = TransformConfig()) -> Instance:
    """Turn a benchmark instance into a multi-day full-truck-load instance.

    Node 0 (the depot) is dropped; node n and N/2 + n become the pickup and
    delivery of request n.  Distances and pickup start times are stretched
    by the factor, locations open daily between day_open and day_close, and
    the minimum driven distance scales with the number of days that have
    pickups.
    """
    by_id = {n.id: n for n in gh.nodes}
    if 0 not in by_id:
        raise TransformError("node 0 (depot) not found")
    customers = sorted((n for n in gh.nodes if n.id != 0), key=lambda n: n.id)
    n = len(customers)
    if n % 2:
        raise TransformError(f"{n} non-depot nodes cannot be paired")
    half = n // 2
    for i in range(1, n + 1):
        if i not in by_id:
            raise TransformError(f"node {i} missing; ids must be consecutive")

    f = cfg.factor
    index = {node.id: k for k, node in enumerate(customers)}
    coords = tuple((f * node.x, f * node.y) for node in customers)
    dist = [[0] * n for _ in range(n)]
    for a in range(n):
        for b in range(n):
            if a != b:
                dx = coords[a][0] - coords[b][0]
                dy = coords[a][1] - coords[b][1]
                dist[a][b] = 10 * _round_km(math.hypot(dx, dy))
    matrix = TravelMatrix.from_distances(dist, cfg.regs.nu)

    ready_days = []
    for i in range(1, half + 1):
        ready_days.append((f * by_id[i].tw_start) // MINUTES_PER_DAY)
    last_ready = max(ready_days)
    horizon = Horizon(0, last_ready + 1 + cfg.slack_days)  # day 0 is a Monday

    cost = CostModel(cfg.kappa_cents, cfg.sm_tiers)
    requests = []
    for i in range(1, half + 1):
        pickup = index[i]
        delivery = index[half + i]
        day = ready_days[i - 1]
        pickup_window = TimeWindow(
            day * MINUTES_PER_DAY + cfg.day_open, day * MINUTES_PER_DAY + cfg.day_close
        )
        delivery_windows = tuple(
            TimeWindow(d * MINUTES_PER_DAY + cfg.day_open, d * MINUTES_PER_DAY + cfg.day_close)
            for d in range(day, horizon.days)
        )
        direct = dist[pickup][delivery]
        # co-located pairs exist in some benchmark files; a request still
        # needs a positive outsourcing price
        price = max(1, cost.sm_price(direct, i))
        requests.append(Request(i, pickup, delivery, pickup_window, delivery_windows, price))

    mu_d10 = 10 * cfg.mu_per_day_km * len(set(ready_days))
    instance = Instance(
        requests=tuple(requests),
        matrix=matrix,
        cost=cost,
        regs=cfg.regs,
        mu_d10=mu_d10,
        horizon=horizon,
        name=gh.name,
        coords=coords,
    )
    instance.check()
    return instance


# ---------------------------------------------------------------------------
# native JSON format


def _km_out(d10: int):
    return d10 // 10 if d10 % 10 == 0 else d10 / 10


def _money_out(c: int):
    return c // 100 if c % 100 == 0 else c / 100


def instance_to_dict(instance: Instance) -> dict:
    locations = []
    for i in range(instance.matrix.n_locations):
        loc: dict = {"id": i}
        if instance.coords is not None:
            x, y = instance.coords[i]
            loc["x"] = x
            loc["y"] = y
        locations.append(loc)
    cost: dict = {
        "kappa": _money_out(instance.cost.kappa_cents),
        "sm_tiers": [
            [None if b is None else _km_out(b), _money_out(r)] for b, r in instance.cost.sm_tiers
        ],
    }
    if instance.cost.explicit_sm_prices:
        cost["explicit_sm_prices"] = {
            str(k): _money_out(v) for k, v in sorted(instance.cost.explicit_sm_prices.items())
        }
    return {
        "name": instance.name,
        "locations": locations,
        "matrix": {
            "distance": [[_km_out(v) for v in row] for row in instance.matrix.distance],
            "time": [list(row) for row in instance.matrix.time],
        },
        "requests": [
            {
                "id": r.id,
                "origin": r.origin,
                "destination": r.destination,
                "pickup_window": {"start": r.pickup_window.start, "end": r.pickup_window.end},
                "delivery_windows": [{"start": w.start, "end": w.end} for w in r.delivery_windows],
                "sm_price": _money_out(r.sm_price_cents),
            }
            for r in instance.requests
        ],
        "cost": cost,
        "regs": {
            "tau_n": instance.regs.tau_n,
            "tau_b": instance.regs.tau_b,
            "tau_s": instance.regs.tau_s,
            "sigma": instance.regs.sigma,
            "nu": instance.regs.nu if not float(instance.regs.nu).is_integer() else int(instance.regs.nu),
        },
        "mu": _km_out(instance.mu_d10),
        "horizon": {"origin_weekday": instance.horizon.origin_weekday, "days": instance.horizon.days},
    }


def write_instance(instance: Instance, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(instance_to_dict(instance), fh, indent=2)
        fh.write("\n")


def _need(obj: dict, key: str, where: str):
    if not isinstance(obj, dict) or key not in obj:
        raise SchemaError(f"{where}/{key}", "missing")
    return obj[key]


def _window(obj, where: str) -> TimeWindow:
    return TimeWindow(int(_need(obj, "start", where)), int(_need(obj, "end", where)))


def instance_from_dict(doc: dict) -> Instance:
    locations = _need(doc, "locations", "")
    n = len(locations)
    coords = None
    if locations and all("x" in loc and "y" in loc for loc in locations):
        coords = tuple((float(loc["x"]), float(loc["y"])) for loc in locations)
    for i, loc in enumerate(locations):
        if _need(loc, "id", f"/locations/{i}") != i:
            raise SchemaError(f"/locations/{i}/id", "ids must be 0..n-1 in order")

    regs_doc = _need(doc, "regs", "")
    regs = RegParams(
        int(_need(regs_doc, "tau_n", "/regs")),
        int(_need(regs_doc, "tau_b", "/regs")),
        int(_need(regs_doc, "tau_s", "/regs")),
        int(_need(regs_doc, "sigma", "/regs")),
        float(_need(regs_doc, "nu", "/regs")),
    )

    matrix_doc = _need(doc, "matrix", "")
    if matrix_doc == "euclidean":
        if coords is None:
            raise SchemaError("/matrix", "euclidean directive needs x/y on every location")
        dist = [
            [
                0 if a == b else 10 * _round_km(math.hypot(coords[a][0] - coords[b][0],
                                                           coords[a][1] - coords[b][1]))
                for b in range(n)
            ]
            for a in range(n)
        ]
        matrix = TravelMatrix.from_distances(dist, regs.nu)
    else:
        rows = _need(matrix_doc, "distance", "/matrix")
        if len(rows) != n:
            raise SchemaError("/matrix/distance", f"expected {n} rows")
        dist = [[d10_from_km(v) for v in row] for row in rows]
        if "time" in matrix_doc:
            time = tuple(tuple(int(v) for v in row) for row in matrix_doc["time"])
            matrix = TravelMatrix(n, tuple(tuple(r) for r in dist), time)
        else:
            matrix = TravelMatrix.from_distances(dist, regs.nu)

    cost_doc = _need(doc, "cost", "")
    tiers = tuple(
        (None if b is None else d10_from_km(b), cents(r))
        for b, r in _need(cost_doc, "sm_tiers", "/cost")
    )
    explicit = {
        int(k): cents(v) for k, v in cost_doc.get("explicit_sm_prices", {}).items()
    }
    cost = CostModel(cents(_need(cost_doc, "kappa", "/cost")), tiers, explicit)

    requests = []
    for i, rd in enumerate(_need(doc, "requests", "")):
        where = f"/requests/{i}"
        requests.append(
            Request(
                int(_need(rd, "id", where)),
                int(_need(rd, "origin", where)),
                int(_need(rd, "destination", where)),
                _window(_need(rd, "pickup_window", where), f"{where}/pickup_window"),
                tuple(
                    _window(w, f"{where}/delivery_windows/{k}")
                    for k, w in enumerate(_need(rd, "delivery_windows", where))
                ),
                cents(_need(rd, "sm_price", where)),
            )
        )

    horizon_doc = _need(doc, "horizon", "")
    instance = Instance(
        requests=tuple(requests),
        matrix=matrix,
        cost=cost,
        regs=regs,
        mu_d10=d10_from_km(_need(doc, "mu", "")),
        horizon=Horizon(
            int(_need(horizon_doc, "origin_weekday", "/horizon")),
            int(_need(horizon_doc, "days", "/horizon")),
        ),
        name=doc.get("name", ""),
        coords=coords,
    )
    try:
        instance.check()
    except ValueError as exc:
        raise SchemaError("/", str(exc)) from None
    return instance


def read_instance(path: str) -> Instance:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError("/", f"not valid JSON: {exc}") from None
    return instance_from_dict(doc)
