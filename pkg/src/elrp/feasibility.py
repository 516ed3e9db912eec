"""Solution types, model-free feasibility checking and a tiny exact solver.

The checker recomputes load and battery traces from the route stops alone; it
never trusts traces stored in a solution. Battery values are ranges in km:
``B1`` on arrival at a stop and ``B2`` on departure.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .instance import Instance, NodeKind
from .soc import full_recharge

TOL = 1e-6
SOLUTION_VERSION = 1


class InfeasibleError(RuntimeError):
    """No feasible solution was found (or exists) for an instance."""


@dataclass(frozen=True)
class Objective:
    station_cost: float
    routing_cost: float
    total: float


@dataclass(frozen=True)
class Route:
    vehicle: int
    stops: tuple[int, ...]
    load_trace: tuple[float, ...] = ()
    battery_trace: tuple[tuple[float, float], ...] = ()

    @property
    def inner(self) -> tuple[int, ...]:
        return self.stops[1:-1]


@dataclass(frozen=True)
class Solution:
    opened: tuple[int, ...]
    routes: tuple[Route, ...]
    objective: Objective
    info: dict = field(default_factory=dict, compare=False)

    @property
    def total(self) -> float:
        return self.objective.total

    def route_of(self, vehicle: int) -> Optional[Route]:
        for r in self.routes:
            if r.vehicle == vehicle:
                return r
        return None


@dataclass(frozen=True)
class Violation:
    tag: str
    where: str
    magnitude: float
    message: str

    def __str__(self):
        return f"[{self.tag}] {self.where}: {self.message} (magnitude {self.magnitude:.6g})"


class ViolationReport(list):
    """List of violations; empty means the solution is feasible."""

    @property
    def clean(self) -> bool:
        return len(self) == 0

    def tags(self) -> set[str]:
        return {v.tag for v in self}

    def __str__(self):
        if self.clean:
            return "feasible: no violations"
        return "\n".join(str(v) for v in self)


# -- objective and traces --------------------------------------------------------

def objective(instance: Instance, solution: Solution) -> Objective:
    """Station fixed costs plus per-vehicle distance costs, recomputed."""
    f = instance.fixed_cost
    station_cost = float(sum(f.get(j, 0.0) for j in solution.opened))
    d = instance.dist
    routing = 0.0
    for r in solution.routes:
        rate = instance.vehicle[r.vehicle].cost_rate if r.vehicle in instance.vehicle else 0.0
        length = sum(d[a][b] for a, b in zip(r.stops, r.stops[1:]))
        routing += rate * length
    return Objective(station_cost, routing, station_cost + routing)


def traces(instance: Instance, charging, stops: Sequence[int]):
    """Load on board after each stop and (B1, B2) range pair at each stop."""
    w = instance.demand
    d = instance.dist
    phi = instance.phi
    load = sum(w[n] for n in stops)
    b2 = phi * instance.soc0
    loads = [load]
    batt = [(b2, b2)]
    for a, b in zip(stops, stops[1:]):
        b1 = b2 - d[a][b]
        load -= w[b]
        if instance.is_station(b):
            b2 = charging.range_after(max(b1, 0.0), phi)
        else:
            b2 = b1
        loads.append(load)
        batt.append((b1, b2))
    return tuple(loads), tuple(batt)


def make_solution(instance: Instance, charging, opened: Iterable[int],
                  routes: Iterable[tuple[int, Sequence[int]]], info: Optional[dict] = None
                  ) -> Solution:
    """Build a Solution from (vehicle id, inner stops) pairs.

    Empty routes are dropped; depot endpoints are added around the inner stops.
    """
    built = []
    for vehicle, inner in routes:
        inner = list(inner)
        if not inner:
            continue
        stops = (instance.depot, *inner, instance.depot_copy)
        loads, batt = traces(instance, charging, stops)
        built.append(Route(vehicle, stops, loads, batt))
    built.sort(key=lambda r: r.vehicle)
    sol = Solution(tuple(sorted(set(opened))), tuple(built), Objective(0.0, 0.0, 0.0),
                   dict(info or {}))
    return Solution(sol.opened, sol.routes, objective(instance, sol), sol.info)


# -- checker ---------------------------------------------------------------------

def check_solution(instance: Instance, charging, solution: Solution) -> ViolationReport:
    """Verify a solution against the routing, capacity and battery semantics.

    Tags name the violated rule: assignment, station-open, route, departure,
    capacity, battery or objective.
    """
    report = ViolationReport()
    nodes = instance.nodes
    n_nodes = len(nodes)
    o, o2 = instance.depot, instance.depot_copy
    opened = set(solution.opened)
    phi = instance.phi
    d = instance.dist

    for j in solution.opened:
        if not (0 <= j < n_nodes) or nodes[j].kind != NodeKind.STATION:
            report.append(Violation("station-open", f"opened {j}", 1.0, "opened node is not a station"))

    visits = {i: 0 for i in instance.customer_ids}
    seen_vehicles = set()
    for r in solution.routes:
        where = f"vehicle {r.vehicle}"
        if r.vehicle not in instance.vehicle:
            report.append(Violation("departure", where, 1.0, "unknown vehicle"))
            continue
        if r.vehicle in seen_vehicles:
            report.append(Violation("departure", where, 1.0, "vehicle departs the depot more than once"))
        seen_vehicles.add(r.vehicle)
        stops = r.stops
        if any(not (0 <= s < n_nodes) for s in stops):
            report.append(Violation("route", where, 1.0, "route references an unknown node"))
            continue
        if len(stops) < 3 or stops[0] != o or stops[-1] != o2:
            report.append(Violation("route", where, 1.0,
                                    "route must start at the depot, end at its copy and visit a node"))
            continue
        inner = stops[1:-1]
        if any(s in (o, o2) for s in inner):
            report.append(Violation("route", where, 1.0, "depot visited inside a route"))
            continue
        for a, b in zip(stops, stops[1:]):
            if a == b:
                report.append(Violation("route", where, 1.0, f"self-loop at node {a}"))
        station_visits = [s for s in inner if nodes[s].kind == NodeKind.STATION]
        for s in sorted(set(station_visits)):
            if station_visits.count(s) > 1:
                report.append(Violation("route", where, station_visits.count(s) - 1,
                                        f"station {s} visited more than once by one vehicle"))
            if s not in opened:
                report.append(Violation("station-open", where, 1.0, f"station {s} used but not opened"))
        for s in inner:
            if nodes[s].kind == NodeKind.CUSTOMER:
                visits[s] += 1

        vehicle = instance.vehicle[r.vehicle]
        load = sum(instance.demand[s] for s in inner)
        if load > vehicle.capacity + TOL:
            report.append(Violation("capacity", where, load - vehicle.capacity,
                                    f"load {load:g} exceeds capacity {vehicle.capacity:g}"))

        b2 = phi * instance.soc0
        for a, b in zip(stops, stops[1:]):
            b1 = b2 - d[a][b]
            if b1 < -TOL:
                report.append(Violation("battery", f"{where} arc {a}->{b}", -b1,
                                        f"battery range short by {-b1:.6g} km"))
            if nodes[b].kind == NodeKind.STATION:
                b2 = charging.range_after(max(b1, 0.0), phi)
            else:
                b2 = b1

    for i, count in visits.items():
        if count != 1:
            report.append(Violation("assignment", f"customer {i}", abs(count - 1),
                                    f"visited {count} times"))

    recomputed = objective(instance, solution)
    claimed = solution.objective
    if abs(claimed.total - recomputed.total) > TOL * max(1.0, abs(recomputed.total)):
        report.append(Violation("objective", "objective", abs(claimed.total - recomputed.total),
                                f"reported total {claimed.total:.6f} != recomputed "
                                f"{recomputed.total:.6f}"))
    return report


# -- persistence -------------------------------------------------------------------

def solution_to_dict(solution: Solution) -> dict:
    return {
        "version": SOLUTION_VERSION,
        "info": solution.info,
        "opened": list(solution.opened),
        "routes": [
            {
                "vehicle": r.vehicle,
                "stops": list(r.stops),
                "load_trace": list(r.load_trace),
                "battery_trace": [list(p) for p in r.battery_trace],
            }
            for r in solution.routes
        ],
        "objective": {
            "station_cost": solution.objective.station_cost,
            "routing_cost": solution.objective.routing_cost,
            "total": solution.objective.total,
        },
    }


def solution_from_dict(doc: dict) -> Solution:
    if doc.get("version") != SOLUTION_VERSION:
        raise ValueError(f"solution.version: unsupported version {doc.get('version')!r}")
    try:
        routes = tuple(
            Route(int(r["vehicle"]), tuple(int(s) for s in r["stops"]),
                  tuple(float(x) for x in r.get("load_trace", ())),
                  tuple((float(a), float(b)) for a, b in r.get("battery_trace", ())))
            for r in doc["routes"]
        )
        obj = doc["objective"]
        return Solution(tuple(int(j) for j in doc["opened"]), routes,
                        Objective(float(obj["station_cost"]), float(obj["routing_cost"]),
                                  float(obj["total"])),
                        dict(doc.get("info", {})))
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed solution document: {exc}") from exc


def save_solution(solution: Solution, path) -> None:
    Path(path).write_text(json.dumps(solution_to_dict(solution), indent=1) + "\n",
                          encoding="utf-8")


def load_solution(path) -> Solution:
    return solution_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


# -- exact oracle for tiny instances ------------------------------------------------

MAX_TINY_CUSTOMERS = 6
MAX_TINY_STATIONS = 3
MAX_TINY_VEHICLES = 2


def _best_paths(instance: Instance, charging, allowed: Sequence[int]) -> dict:
    """Shortest battery-feasible path o -> ... -> o' for every customer subset.

    Stations in ``allowed`` may be visited at most once each, in any number
    between consecutive customers. Labels are pruned by (cost, range)
    dominance per (node, visited customers, used stations).
    """
    d = instance.dist
    phi = instance.phi
    o, o2 = instance.depot, instance.depot_copy
    customers = instance.customer_ids
    cbit = {c: 1 << k for k, c in enumerate(customers)}
    sbit = {s: 1 << k for k, s in enumerate(allowed)}
    best: dict[int, tuple[float, tuple[int, ...]]] = {}
    labels: dict[tuple[int, int, int], list[tuple[float, float]]] = {}

    def dominated(key, cost, batt):
        for c0, b0 in labels.get(key, ()):
            if c0 <= cost + 1e-12 and b0 >= batt - 1e-12:
                return True
        labels.setdefault(key, []).append((cost, batt))
        return False

    stack = [(o, phi * instance.soc0, 0, 0, 0.0, ())]
    while stack:
        node, batt, mask, used, cost, path = stack.pop()
        if mask:
            arrive = batt - d[node][o2]
            if arrive >= -1e-9:
                total = cost + d[node][o2]
                prev = best.get(mask)
                if prev is None or total < prev[0] - 1e-12:
                    best[mask] = (total, path)
        for c in customers:
            if mask & cbit[c]:
                continue
            b1 = batt - d[node][c]
            if b1 < -1e-9:
                continue
            key = (c, mask | cbit[c], used)
            ncost = cost + d[node][c]
            if not dominated(key, ncost, b1):
                stack.append((c, b1, mask | cbit[c], used, ncost, path + (c,)))
        for s in allowed:
            if used & sbit[s] or s == node:
                continue
            b1 = batt - d[node][s]
            if b1 < -1e-9:
                continue
            b2 = charging.range_after(max(b1, 0.0), phi)
            key = (s, mask, used | sbit[s])
            ncost = cost + d[node][s]
            if not dominated(key, ncost, b2):
                stack.append((s, b2, mask, used | sbit[s], ncost, path + (s,)))
    return best


def exact_solve_tiny(instance: Instance, charging=None, variant: str = "EVL") -> Solution:
    """Exhaustive optimum for tiny instances.

    ``variant="EV"`` recharges every battery to ``soc_full`` (the base model);
    ``"EVL"`` uses ``charging``. Raises ``InfeasibleError`` when no solution
    exists and ``ValueError`` when the instance exceeds the enumeration budget.
    """
    n_i, n_j, n_e = len(instance.customers), len(instance.stations), len(instance.fleet)
    if n_i > MAX_TINY_CUSTOMERS or n_j > MAX_TINY_STATIONS or n_e > MAX_TINY_VEHICLES:
        raise ValueError(
            f"instance too large for exact_solve_tiny: |I|={n_i} (<= {MAX_TINY_CUSTOMERS}), "
            f"|J|={n_j} (<= {MAX_TINY_STATIONS}), |E|={n_e} (<= {MAX_TINY_VEHICLES})"
        )
    variant = variant.upper()
    if variant == "EV":
        charging = full_recharge(instance.soc_full)
    elif variant != "EVL":
        raise ValueError(f"unknown variant {variant!r}")
    elif charging is None:
        raise ValueError("variant EVL requires a charging model")

    customers = instance.customer_ids
    full = (1 << n_i) - 1
    demand_of = [sum(instance.demand[c] for k, c in enumerate(customers) if m >> k & 1)
                 for m in range(full + 1)]
    fleet = instance.fleet

    best_total, best_plan = float("inf"), None
    for size in range(n_j + 1):
        for subset in itertools.combinations(instance.station_ids, size):
            station_cost = sum(instance.fixed_cost[j] for j in subset)
            if station_cost >= best_total:
                continue
            paths = _best_paths(instance, charging, subset)
            # assign[e][mask]: cheapest way for vehicles e.. to serve mask
            memo: dict[tuple[int, int], tuple[float, tuple]] = {}

            def assign(e: int, mask: int):
                if mask == 0:
                    return 0.0, ()
                if e == len(fleet):
                    return float("inf"), ()
                key = (e, mask)
                if key in memo:
                    return memo[key]
                veh = fleet[e]
                result = assign(e + 1, mask)
                sub = mask
                while sub:
                    if demand_of[sub] <= veh.capacity + 1e-9 and sub in paths:
                        rest, plan = assign(e + 1, mask & ~sub)
                        cost = veh.cost_rate * paths[sub][0] + rest
                        if cost < result[0] - 1e-12:
                            result = (cost, ((veh.id, paths[sub][1]),) + plan)
                    sub = (sub - 1) & mask
                memo[key] = result
                return result

            routing, plan = assign(0, full)
            if station_cost + routing < best_total - 1e-9:
                best_total = station_cost + routing
                best_plan = (subset, plan)

    if best_plan is None:
        raise InfeasibleError("no feasible solution exists for this instance")
    subset, plan = best_plan
    used = {s for _, path in plan for s in path if instance.is_station(s)}
    return make_solution(instance, charging, sorted(used), plan,
                         info={"algorithm": "exact", "variant": variant})
