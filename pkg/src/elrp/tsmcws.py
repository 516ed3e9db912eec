"""Two-phase tabu search / modified Clarke-Wright savings heuristic.

Tabu search chooses which candidate stations are located; given a located
set, a savings construction builds the routes, repairing range violations of
a merged route by inserting located stations.
"""

from __future__ import annotations

import math
import random
import weakref
from collections import deque
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

from .feasibility import InfeasibleError, Solution, make_solution
from .instance import Instance
from .routing import EPS, RouteKit


@dataclass(frozen=True)
class TsMcwsParams:
    n_itr_small: int = 5
    n_itr_large: int = 10
    size_threshold: int = 75
    tabu_tenure: int = 7
    ts_max_iter: int = 50
    ts_candidates: int = 12
    cover_radius: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        for name in ("n_itr_small", "n_itr_large", "size_threshold", "tabu_tenure",
                     "ts_max_iter", "ts_candidates"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.cover_radius is not None and not self.cover_radius > 0:
            raise ValueError("cover_radius must be > 0")

    def radius(self, instance: Instance) -> float:
        if self.cover_radius is not None:
            return self.cover_radius
        return instance.phi * instance.soc_full / 2.0

    def n_itr(self, instance: Instance) -> int:
        if len(instance.customers) <= self.size_threshold:
            return self.n_itr_small
        return self.n_itr_large


class RoutingPlan(NamedTuple):
    routes: list[tuple[int, list[int]]]
    unserved: list[int]


def radius_cover_select(instance: Instance, n_j: int, r: float) -> tuple[int, ...]:
    """Greedy maximum coverage of customers within radius ``r``.

    Picks the station covering most not-yet-covered customers, ties broken by
    the smaller station id, until ``n_j`` stations are chosen.
    """
    stations = instance.station_ids
    if not 0 <= n_j <= len(stations):
        raise ValueError(f"n_j={n_j} outside [0, {len(stations)}]")
    d = instance.dist
    covers = {j: {i for i in instance.customer_ids if d[j][i] <= r + EPS} for j in stations}
    chosen: list[int] = []
    covered: set[int] = set()
    remaining = list(stations)
    while len(chosen) < n_j:
        j = max(remaining, key=lambda s: (len(covers[s] - covered), -s))
        chosen.append(j)
        covered |= covers[j]
        remaining.remove(j)
    return tuple(sorted(chosen))


_savings_cache: "weakref.WeakKeyDictionary[Instance, list]" = weakref.WeakKeyDictionary()


def savings_list(instance: Instance) -> list[tuple[float, int, int]]:
    """All customer pairs with their saving, largest first."""
    cached = _savings_cache.get(instance)
    if cached is None:
        d = instance.dist
        o, o2 = instance.depot, instance.depot_copy
        cust = instance.customer_ids
        cached = [(d[o][i] + d[j][o2] - d[i][j], i, j)
                  for a, i in enumerate(cust) for j in cust[a + 1:]]
        cached.sort(key=lambda t: (-t[0], t[1], t[2]))
        _savings_cache[instance] = cached
    return cached


def mcws_routes(instance: Instance, charging, open_stations: Sequence[int],
                kit: Optional[RouteKit] = None) -> RoutingPlan:
    """Savings construction with station-insertion repair of merged routes.

    Positive-saving merges are applied first. If more routes remain than
    vehicles, a second pass applies any feasible merge in savings order.
    Customers left without a vehicle are reported as unserved.
    """
    kit = kit or RouteKit(instance, charging)
    d = kit.d
    allowed = sorted(open_stations)
    station = kit.station
    k_max = max((v.capacity for v in instance.fleet), default=0.0)

    routes: dict[int, list[int]] = {}
    load: dict[int, float] = {}
    route_of: dict[int, int] = {}
    # first and last customer of each route
    ends: dict[int, tuple[int, int]] = {}
    unserved: list[int] = []
    for i in instance.customer_ids:
        if kit.w[i] > k_max:
            unserved.append(i)
            continue
        stops = [i] if kit.feasible([i]) else kit.repair([i], allowed)
        if stops is None:
            unserved.append(i)
            continue
        routes[i] = stops
        load[i] = kit.w[i]
        route_of[i] = i
        ends[i] = (i, i)

    def try_merge(i: int, j: int, improving_only: bool) -> bool:
        ra, rb = route_of.get(i), route_of.get(j)
        if ra is None or rb is None or ra == rb:
            return False
        ea, eb = ends[ra], ends[rb]
        if i not in ea or j not in eb:
            return False
        if load[ra] + load[rb] > k_max + EPS:
            return False
        A, B = routes[ra], routes[rb]
        a_or = A if ea[1] == i else A[::-1]
        b_or = B if eb[0] == j else B[::-1]
        # stations outside the end customers are dropped by the merge
        a_strip = a_or[:a_or.index(i) + 1]
        b_strip = b_or[b_or.index(j):]
        shared = {n for n in a_strip if station[n]}
        if any(n in shared for n in b_strip):
            # a vehicle visits each station at most once
            b_strip = [n for n in b_strip if n not in shared]
            merged = None
        else:
            leave = kit.leave(a_strip)
            if leave is not None and leave[-1] - d[i][j] >= kit.need(b_strip)[0] - EPS:
                merged = a_strip + b_strip
            else:
                merged = None
        if merged is None:
            # battery use depends on direction, so the reversed route may repair
            seq = a_strip + b_strip
            merged = kit.repair(seq, allowed) or kit.repair(seq[::-1], allowed)
            if merged is None:
                return False
        if improving_only and kit.length(merged) >= kit.length(A) + kit.length(B) - EPS:
            return False
        del routes[rb]
        routes[ra] = merged
        load[ra] += load.pop(rb)
        cust = [n for n in merged if not station[n]]
        ends[ra] = (cust[0], cust[-1])
        del ends[rb]
        for n in B:
            if not station[n]:
                route_of[n] = ra
        return True

    savings = savings_list(instance)
    get = route_of.get
    n_fleet = len(instance.fleet)
    for improving_only in (True, False):
        if not improving_only and len(routes) <= n_fleet:
            break
        for s, i, j in savings:
            if improving_only and s <= 0:
                break
            # cheap endpoint test before the full merge attempt
            ra, rb = get(i), get(j)
            if ra is None or rb is None or ra == rb or i not in ends[ra] or j not in ends[rb]:
                continue
            try_merge(i, j, improving_only)
            if not improving_only and len(routes) <= n_fleet:
                break

    final = [kit.cleanup(r) for r in routes.values()]
    final.sort(key=lambda r: (-kit.demand(r), r))
    vehicles = sorted(instance.fleet, key=lambda v: (-v.capacity, v.id))
    plan = []
    for k, stops in enumerate(final):
        if k < len(vehicles) and kit.demand(stops) <= vehicles[k].capacity + EPS:
            plan.append((vehicles[k].id, stops))
        else:
            unserved.extend(n for n in stops if not station[n])
    return RoutingPlan(plan, sorted(unserved))


class _Evaluator:
    """Memoised located-set -> (objective, plan) map for one run."""

    def __init__(self, instance: Instance, charging):
        self.inst = instance
        self.charging = charging
        self.kit = RouteKit(instance, charging)
        self.cache: dict[frozenset, tuple[float, Optional[RoutingPlan]]] = {}

    def __call__(self, located: frozenset) -> tuple[float, Optional[RoutingPlan]]:
        hit = self.cache.get(located)
        if hit is not None:
            return hit
        plan = mcws_routes(self.inst, self.charging, sorted(located), self.kit)
        if plan.unserved:
            result = (math.inf, None)
        else:
            used = {n for _, stops in plan.routes for n in stops if self.kit.station[n]}
            cost = sum(self.inst.fixed_cost[j] for j in used)
            cost += sum(self.inst.vehicle[v].cost_rate * self.kit.length(s) for v, s in plan.routes)
            result = (cost, plan)
        self.cache[located] = result
        return result

    def solution(self, located: frozenset, info: dict) -> Solution:
        _, plan = self(located)
        used = sorted({n for _, stops in plan.routes for n in stops if self.kit.station[n]})
        info = dict(info, located=sorted(located))
        return make_solution(self.inst, self.charging, used, plan.routes, info=info)


def _tabu(ev: _Evaluator, located: frozenset, params: TsMcwsParams, rng: random.Random,
          history: Optional[list] = None) -> frozenset:
    """Station-swap tabu search; returns the best located set seen."""
    stations = ev.inst.station_ids
    current = located
    best, best_val = located, ev(located)[0]
    tabu: deque[tuple[int, int]] = deque(maxlen=params.tabu_tenure)
    for _ in range(params.ts_max_iter):
        closed = [j for j in stations if j not in current]
        moves = [(a, b) for a in sorted(current) for b in closed]
        if not moves:
            break
        if len(moves) > params.ts_candidates:
            moves = sorted(rng.sample(moves, params.ts_candidates))
        tabu_nodes = {n for mv in tabu for n in mv}
        chosen = None
        for out_j, in_j in moves:
            cand = (current - {out_j}) | {in_j}
            val = ev(cand)[0]
            is_tabu = out_j in tabu_nodes or in_j in tabu_nodes
            if is_tabu and not val < best_val - EPS:
                continue
            if chosen is None or (val, (out_j, in_j)) < (chosen[0], chosen[1]):
                chosen = (val, (out_j, in_j), cand)
        if chosen is None:
            continue
        val, move, current = chosen
        tabu.append(move)
        if history is not None:
            history.append(len(tabu))
        if val < best_val - EPS:
            best, best_val = current, val
    return best


def tabu_search(instance: Instance, charging, solution: Solution,
                params: TsMcwsParams = TsMcwsParams(), _ev: Optional[_Evaluator] = None,
                _rng: Optional[random.Random] = None) -> Solution:
    """Improve the located station set of ``solution`` by station swaps."""
    ev = _ev or _Evaluator(instance, charging)
    rng = _rng or random.Random(params.seed)
    located = frozenset(solution.info.get("located", solution.opened))
    if not located or len(located) == len(instance.stations):
        return solution
    start_val = ev(located)[0]
    best = _tabu(ev, located, params, rng)
    if not ev(best)[0] < min(start_val, solution.total) - EPS:
        return solution
    return ev.solution(best, dict(solution.info))


def ts_mcws(instance: Instance, charging, params: TsMcwsParams = TsMcwsParams()) -> Solution:
    """Outer loop: grow the number of located stations from one upward.

    Stops after ``n_itr`` consecutive station counts without improving the
    best objective (counted once some count is feasible), or once every
    candidate station has been tried.
    """
    ev = _Evaluator(instance, charging)
    rng = random.Random(params.seed)
    info = {"algorithm": "tsmcws", "seed": params.seed}
    n_stations = len(instance.stations)
    if n_stations == 0:
        val, plan = ev(frozenset())
        if plan is None:
            raise InfeasibleError("customers cannot be served without charging stations")
        return ev.solution(frozenset(), info)

    r = params.radius(instance)
    n_itr = params.n_itr(instance)
    best_set, best_val = None, math.inf
    trace = []
    stall = 0
    for n_j in range(1, n_stations + 1):
        located = frozenset(radius_cover_select(instance, n_j, r))
        improved_set = _tabu(ev, located, params, rng)
        val = min(ev(located)[0], ev(improved_set)[0])
        cand = located if ev(located)[0] <= ev(improved_set)[0] else improved_set
        trace.append(val)
        if val < best_val - EPS:
            best_set, best_val = cand, val
            stall = 0
        elif best_set is not None:
            stall += 1
        if stall >= n_itr:
            break
    if best_set is None:
        raise InfeasibleError("no feasible routing found for any number of located stations")
    info["trace"] = [None if math.isinf(v) else v for v in trace]
    return ev.solution(best_set, info)
