"""Sweep-based iterated greedy + adaptive large neighbourhood search.

Each iteration strips every located station from a copy of the current
solution, re-locates stations greedily (iterated greedy), improves the routes
with destroy/repair moves chosen by adaptive roulette, and accepts the copy
by a simulated-annealing rule.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Optional, Sequence

from .feasibility import InfeasibleError, Solution, make_solution
from .instance import Instance
from .routing import EPS, RouteKit

REMOVAL_OPERATORS = ("random", "worst", "related")
INSERTION_OPERATORS = ("greedy", "regret2")


@dataclass(frozen=True)
class SigalnsParams:
    iter_max: int = 30
    alns_steps: int = 5
    destroy_fraction: float = 0.15
    ig_destruct_d: Optional[int] = None
    sigma1: float = 10.0
    sigma2: float = 5.0
    sigma3: float = 2.0
    reaction_factor: float = 0.2
    segment_length: int = 20
    sa_start_accept_prob: float = 0.5
    sa_cooling: float = 0.995
    seed: int = 0

    def __post_init__(self):
        if self.iter_max < 0 or self.alns_steps < 0:
            raise ValueError("iter_max and alns_steps must be >= 0")
        if not 0 < self.destroy_fraction < 1:
            raise ValueError("destroy_fraction must lie in (0, 1)")
        if not 0 <= self.reaction_factor < 1:
            raise ValueError("reaction_factor must lie in [0, 1)")
        if not 0 < self.sa_cooling < 1:
            raise ValueError("sa_cooling must lie in (0, 1)")
        if not 0 < self.sa_start_accept_prob < 1:
            raise ValueError("sa_start_accept_prob must lie in (0, 1)")
        if not self.sigma1 >= self.sigma2 >= self.sigma3 >= 0:
            raise ValueError("scores must satisfy sigma1 >= sigma2 >= sigma3 >= 0")
        if self.segment_length <= 0:
            raise ValueError("segment_length must be positive")
        if self.ig_destruct_d is not None and self.ig_destruct_d < 1:
            raise ValueError("ig_destruct_d must be >= 1")


# -- plan helpers ---------------------------------------------------------------

class _Plan:
    """Opened stations plus one stop list per vehicle (possibly empty)."""

    __slots__ = ("opened", "routes")

    def __init__(self, opened, routes):
        self.opened = set(opened)
        self.routes = routes  # list of [vehicle_id, stops]

    def copy(self) -> "_Plan":
        return _Plan(self.opened, [[v, list(s)] for v, s in self.routes])


def _cost(inst: Instance, kit: RouteKit, plan: _Plan) -> float:
    total = sum(inst.fixed_cost[j] for j in plan.opened)
    for v, stops in plan.routes:
        if stops:
            total += inst.vehicle[v].cost_rate * kit.length(stops)
    return total


def _used_stations(kit: RouteKit, plan: _Plan) -> set[int]:
    return {n for _, s in plan.routes for n in s if kit.station[n]}


def _to_solution(inst: Instance, charging, plan: _Plan, info: dict) -> Solution:
    return make_solution(inst, charging, sorted(plan.opened),
                         [(v, s) for v, s in plan.routes if s], info=info)


def _from_solution(inst: Instance, solution: Solution) -> _Plan:
    by_vehicle = {r.vehicle: list(r.inner) for r in solution.routes}
    routes = [[v.id, by_vehicle.get(v.id, [])] for v in inst.fleet]
    return _Plan(solution.opened, routes)


# -- construction -----------------------------------------------------------------

def _sweep_order(inst: Instance) -> list[int]:
    o = inst.nodes[inst.depot]
    ang = {i: math.atan2(inst.nodes[i].y - o.y, inst.nodes[i].x - o.x) for i in inst.customer_ids}
    order = sorted(inst.customer_ids, key=lambda i: (ang[i], i))
    if len(order) < 2:
        return order
    # start right after the widest angular gap
    gaps = [(ang[order[(k + 1) % len(order)]] - ang[order[k]]) % (2 * math.pi)
            for k in range(len(order))]
    k = max(range(len(order)), key=lambda t: (gaps[t], -t))
    return order[k + 1:] + order[:k + 1]


def _sweep_plan(inst: Instance, kit: RouteKit, order: Sequence[int]) -> Optional[_Plan]:
    all_st = list(inst.station_ids)
    vehicles = sorted(inst.fleet, key=lambda v: (-v.capacity, v.id))
    routes: list[list] = []
    leftovers: list[int] = []
    cur: list[int] = []
    load = 0.0
    vi = 0

    def close():
        nonlocal cur, load, vi
        if cur:
            routes.append([vehicles[vi].id, kit.cleanup(cur)])
            vi += 1
        cur, load = [], 0.0

    for c in order:
        w = kit.w[c]
        if vi < len(vehicles) and cur and load + w > vehicles[vi].capacity + EPS:
            close()
        if vi >= len(vehicles) or w > vehicles[vi].capacity + EPS:
            leftovers.append(c)
            continue
        trial = cur + [c]
        if not kit.feasible(trial):
            trial = kit.repair(trial, all_st)
        if trial is None:
            close()
            if vi >= len(vehicles):
                leftovers.append(c)
                continue
            trial = kit.repair([c], all_st)
            if trial is None:
                return None
        cur = trial
        load += w
    if cur:
        close()

    for v in vehicles[vi:]:
        routes.append([v.id, []])
    plan = _Plan(_used_stations(kit, _Plan((), routes)), routes)
    for c in leftovers:
        if not _insert_anywhere(inst, kit, plan, c):
            return None
    plan.routes.sort(key=lambda r: r[0])
    plan.opened = _used_stations(kit, plan)
    return plan


def modified_sweep(instance: Instance, charging, _kit: Optional[RouteKit] = None) -> Solution:
    """Polar sweep around the depot with station range repair.

    A route takes customers in angular order until capacity or range breaks;
    range breaks are first repaired by inserting the smallest-detour candidate
    station, which becomes opened. Customers left when the fleet runs out are
    inserted at their cheapest feasible position. If that fails, the sweep is
    retried from every other starting customer and in the opposite direction;
    as a last resort the savings construction with all stations is used.
    """
    inst = instance
    kit = _kit or RouteKit(inst, charging)
    for c in inst.customer_ids:
        if kit.w[c] > max((v.capacity for v in inst.fleet), default=0.0) + EPS:
            raise InfeasibleError(f"customer {c} exceeds every vehicle capacity")
        if kit.repair([c], list(inst.station_ids)) is None:
            raise InfeasibleError(f"customer {c} cannot be reached from the depot")
    order = _sweep_order(inst)
    attempts = [order[k:] + order[:k] for k in range(len(order))]
    attempts += [list(reversed(a)) for a in attempts]
    for k, seq in enumerate(attempts):
        plan = _sweep_plan(inst, kit, seq)
        if plan is not None:
            return _to_solution(inst, charging, plan, {"algorithm": "sweep", "attempt": k})
    from .tsmcws import mcws_routes

    routing = mcws_routes(inst, charging, inst.station_ids, kit)
    if routing.unserved:
        raise InfeasibleError(f"customers {routing.unserved} cannot be routed with the fleet")
    plan = _Plan((), [[v, list(s)] for v, s in routing.routes])
    served = {v for v, _ in routing.routes}
    plan.routes += [[v.id, []] for v in inst.fleet if v.id not in served]
    plan.routes.sort(key=lambda r: r[0])
    plan.opened = _used_stations(kit, plan)
    return _to_solution(inst, charging, plan, {"algorithm": "sweep", "attempt": "savings"})


def _insert_anywhere(inst: Instance, kit: RouteKit, plan: _Plan, c: int) -> bool:
    cap = {v.id: v.capacity for v in inst.fleet}
    all_st = list(inst.station_ids)
    best = None
    for r, (v, stops) in enumerate(plan.routes):
        if kit.demand(stops) + kit.w[c] > cap[v] + EPS:
            continue
        leave = kit.leave(stops)
        if leave is None:
            continue
        need = kit.need(stops)
        opt = kit.best_insertion(stops, leave, need, c, all_st)
        if opt is None:
            continue
        extra = sum(inst.fixed_cost[n] for n in opt[2]
                    if kit.station[n] and n not in plan.opened)
        cost = inst.vehicle[v].cost_rate * opt[0] + extra
        if best is None or cost < best[0]:
            best = (cost, r, opt)
    if best is not None:
        _, r, (_, p, nodes) = best
        plan.routes[r][1][p:p] = list(nodes)
        plan.opened |= {n for n in nodes if kit.station[n]}
        return True
    # several stations may be needed: full repair at every position
    for r, (v, stops) in enumerate(plan.routes):
        if kit.demand(stops) + kit.w[c] > cap[v] + EPS:
            continue
        opt = kit.insert_repaired(stops, c, all_st)
        if opt is None:
            continue
        extra = sum(inst.fixed_cost[n] for n in set(opt[0]) - set(stops)
                    if kit.station[n] and n not in plan.opened)
        cost = inst.vehicle[v].cost_rate * opt[1] + extra
        if best is None or cost < best[0]:
            best = (cost, r, opt[0])
    if best is None:
        return False
    _, r, new_stops = best
    plan.routes[r][1] = new_stops
    plan.opened |= {n for n in new_stops if kit.station[n]}
    return True


# -- iterated greedy station relocation --------------------------------------------------

def _ig(inst: Instance, kit: RouteKit, plan: _Plan, d: Optional[int],
        rng: random.Random) -> Optional[_Plan]:
    if d is None or d >= len(plan.opened):
        # full destruction is deterministic, so repeated inputs are memoised
        memo = kit.memo.setdefault("ig", {})
        key = (frozenset(plan.opened), tuple((v, tuple(s)) for v, s in plan.routes))
        if key not in memo:
            memo[key] = _ig_run(inst, kit, plan, None, rng)
        hit = memo[key]
        return None if hit is None else hit.copy()
    return _ig_run(inst, kit, plan, d, rng)


def _ig_run(inst: Instance, kit: RouteKit, plan: _Plan, d: Optional[int],
            rng: random.Random) -> Optional[_Plan]:
    if d is None or d >= len(plan.opened):
        removed = set(plan.opened)
    else:
        removed = set(rng.sample(sorted(plan.opened), d))
    kept = set(plan.opened) - removed
    routes = [[v, [n for n in s if n not in removed]] for v, s in plan.routes]
    opened = set(kept)
    candidates = [j for j in inst.station_ids if j not in opened]

    while True:
        failing = []
        for idx, (v, stops) in enumerate(routes):
            fixed, ok = kit.repair_partial(stops, sorted(opened))
            routes[idx][1] = fixed
            if not ok:
                failing.append(idx)
        if not failing:
            break
        best = None
        for j in candidates:
            if j in opened:
                continue
            helped, detours = 0, 0.0
            for idx in failing:
                res = kit.fix_first(routes[idx][1], [j])
                if res is not None:
                    helped += 1
                    detours += inst.vehicle[routes[idx][0]].cost_rate * res[1]
            if helped == 0:
                continue
            key = (-helped, inst.fixed_cost[j] + detours, j)
            if best is None or key < best:
                best = key
        if best is None:
            return None
        opened.add(best[2])

    routes = [[v, kit.cleanup(s)] for v, s in routes]
    out = _Plan((), routes)
    out.opened = _used_stations(kit, out)
    return _drop_stations(inst, kit, out)


def _close_station(inst: Instance, kit: RouteKit, plan: _Plan, j: int) -> Optional[_Plan]:
    """Cheapest plan without station ``j``.

    Affected routes either shed customers until they are feasible with the
    remaining stations or are emptied altogether; the displaced customers are
    reinserted without opening stations. As a third option all routes are
    rebuilt by the savings construction over the remaining stations.
    """
    best, best_cost = None, math.inf
    trials = [_close_variant(inst, kit, plan, j, whole) for whole in (False, True)]
    trials.append(_rebuild(inst, kit, frozenset(plan.opened - {j})))
    for trial in trials:
        if trial is not None:
            c = _cost(inst, kit, trial)
            if c < best_cost - EPS:
                best, best_cost = trial, c
    return best


def _rebuild(inst: Instance, kit: RouteKit, stations: frozenset) -> Optional[_Plan]:
    from .tsmcws import mcws_routes

    memo = kit.memo.setdefault("rebuild", {})
    if stations not in memo:
        routing = mcws_routes(inst, None, sorted(stations), kit)
        if routing.unserved:
            memo[stations] = None
        else:
            served = {v for v, _ in routing.routes}
            routes = [[v, _two_opt(kit, list(s))] for v, s in routing.routes]
            routes += [[v.id, []] for v in inst.fleet if v.id not in served]
            routes.sort(key=lambda r: r[0])
            out = _Plan((), routes)
            out.opened = _used_stations(kit, out)
            memo[stations] = out
    hit = memo[stations]
    return None if hit is None else hit.copy()


def _close_variant(inst: Instance, kit: RouteKit, plan: _Plan, j: int,
                   whole: bool) -> Optional[_Plan]:
    trial = plan.copy()
    trial.opened.discard(j)
    allowed = sorted(trial.opened)
    ejected: list[int] = []
    for r in trial.routes:
        if j not in r[1]:
            continue
        if whole:
            ejected.extend(n for n in r[1] if not kit.station[n])
            r[1] = []
            continue
        stops, ok = kit.repair_partial([n for n in r[1] if n != j], allowed)
        while not ok:
            k = min(kit.first_failure(stops), len(stops) - 1)
            while k >= 0 and kit.station[stops[k]]:
                k -= 1
            if k < 0:
                return None
            ejected.append(stops.pop(k))
            stops, ok = kit.repair_partial(kit.cleanup(stops), allowed)
        r[1] = stops
    if ejected and not _reinsert(inst, kit, trial, ejected, regret=True, allow_open=False):
        return None
    trial.routes = [[v, _two_opt(kit, kit.cleanup(s))] for v, s in trial.routes]
    trial.opened = _used_stations(kit, trial)
    return trial


def _drop_stations(inst: Instance, kit: RouteKit, plan: _Plan) -> _Plan:
    """Close opened stations one at a time while that lowers the cost."""
    cost = _cost(inst, kit, plan)
    improved = True
    while improved:
        improved = False
        for j in sorted(plan.opened, key=lambda s: (-inst.fixed_cost[s], s)):
            trial = _close_station(inst, kit, plan, j)
            if trial is None:
                continue
            c = _cost(inst, kit, trial)
            if c < cost - EPS:
                plan, cost, improved = trial, c, True
                break
    return plan


def _two_opt(kit: RouteKit, stops: list[int]) -> list[int]:
    """First-improvement 2-opt restricted to range-feasible reversals."""
    d = kit.d
    stops = list(stops)
    improved = True
    while improved:
        improved = False
        path = [kit.o] + stops + [kit.o2]
        n = len(stops)
        for i in range(n - 1):
            a, b = path[i], path[i + 1]
            for k in range(i + 1, n):
                c, e = path[k + 1], path[k + 2]
                if d[a][c] + d[b][e] - d[a][b] - d[c][e] < -1e-7:
                    trial = stops[:i] + stops[i:k + 1][::-1] + stops[k + 1:]
                    if kit.feasible(trial):
                        stops = trial
                        improved = True
                        break
            if improved:
                break
    return stops


def ig_relocate_stations(instance: Instance, charging, solution: Solution,
                         d: Optional[int] = None, seed: int = 0) -> tuple[int, ...]:
    """Remove located stations and re-add them greedily until every route is
    range-repairable. ``d=None`` removes all of them.

    Each greedy round opens the station that fixes the most failing routes,
    ties broken by fixed cost plus detour.
    """
    kit = RouteKit(instance, charging)
    out = _ig(instance, kit, _from_solution(instance, solution), d, random.Random(seed))
    if out is None:
        raise InfeasibleError("no station set repairs every route")
    return tuple(sorted(out.opened))


# -- ALNS --------------------------------------------------------------------------

def roulette(weights: Sequence[float], rng: random.Random) -> int:
    """Index drawn with probability proportional to its weight."""
    total = sum(weights)
    x = rng.random() * total
    acc = 0.0
    for k, w in enumerate(weights):
        acc += w
        if x < acc:
            return k
    return len(weights) - 1


def update_weights(weights: Sequence[float], scores: Sequence[float], uses: Sequence[int],
                   rho: float) -> list[float]:
    """Blend each used operator's mean score into its weight."""
    return [
        (1 - rho) * w + rho * s / u if u > 0 else w
        for w, s, u in zip(weights, scores, uses)
    ]


def _n_remove(inst: Instance, params: SigalnsParams) -> int:
    return max(1, math.ceil(params.destroy_fraction * len(inst.customers)))


def _remove_random(inst, kit, plan, q, rng):
    served = [n for _, s in plan.routes for n in s if not kit.station[n]]
    return rng.sample(sorted(served), min(q, len(served)))


def _removal_gain(inst, kit, plan):
    d = kit.d
    gains = []
    for v, stops in plan.routes:
        rate = inst.vehicle[v].cost_rate
        for p, c in enumerate(stops):
            if kit.station[c]:
                continue
            prev = kit.o if p == 0 else stops[p - 1]
            nxt = kit.o2 if p == len(stops) - 1 else stops[p + 1]
            gains.append((rate * (d[prev][c] + d[c][nxt] - d[prev][nxt]), c))
    return gains


def _remove_worst(inst, kit, plan, q, rng):
    trial = plan.copy()
    removed = []
    for _ in range(q):
        gains = _removal_gain(inst, kit, trial)
        if not gains:
            break
        _, c = max(gains, key=lambda t: (t[0], -t[1]))
        removed.append(c)
        for r in trial.routes:
            if c in r[1]:
                r[1].remove(c)
    return removed


def _remove_related(inst, kit, plan, q, rng):
    served = sorted(n for _, s in plan.routes for n in s if not kit.station[n])
    if not served:
        return []
    d = kit.d
    seed = rng.choice(served)
    dmax = max(max(d[seed][c] for c in served), EPS)
    wmax = max(max(kit.w[c] for c in served), EPS)
    rel = sorted(served, key=lambda c: (d[seed][c] / dmax + abs(kit.w[seed] - kit.w[c]) / wmax, c))
    return rel[:q]


_REMOVERS = (_remove_random, _remove_worst, _remove_related)


class _RouteState:
    __slots__ = ("vehicle", "stops", "leave", "need", "load", "cap", "rate")

    def __init__(self, inst, kit, vehicle, stops):
        self.vehicle = vehicle
        self.cap = inst.vehicle[vehicle].capacity
        self.rate = inst.vehicle[vehicle].cost_rate
        self.set(kit, stops)

    def set(self, kit, stops):
        self.stops = stops
        self.leave = kit.leave(stops)
        self.need = kit.need(stops)
        self.load = kit.demand(stops)


def _insertion_options(inst, kit, st: _RouteState, c, opened_sorted):
    if st.leave is None or st.load + kit.w[c] > st.cap + EPS:
        return None
    opt = kit.best_insertion(st.stops, st.leave, st.need, c, opened_sorted)
    if opt is None:
        return None
    return st.rate * opt[0], opt[1], opt[2]


def _fallback_option(inst, kit, st: _RouteState, c, closed):
    """Cheapest insertion that opens one new station (cost includes f_j)."""
    if st.leave is None or st.load + kit.w[c] > st.cap + EPS:
        return None
    best = None
    for s in closed:
        opt = kit.best_insertion(st.stops, st.leave, st.need, c, [s])
        if opt is None:
            continue
        extra = inst.fixed_cost[s] if s in opt[2] else 0.0
        cost = st.rate * opt[0] + extra
        if best is None or cost < best[0]:
            best = (cost, opt[1], opt[2])
    return best


def _reinsert(inst, kit, plan: _Plan, removed: list[int], regret: bool,
              allow_open: bool = True) -> bool:
    states = [_RouteState(inst, kit, v, s) for v, s in plan.routes]
    opened_sorted = sorted(plan.opened)
    pending = sorted(removed)
    cache: dict[tuple[int, int], Optional[tuple]] = {}
    repaired: dict[tuple[int, int], Optional[tuple]] = {}

    def option(c, r):
        key = (c, r)
        if key not in cache:
            cache[key] = _insertion_options(inst, kit, states[r], c, opened_sorted)
        return cache[key]

    def repaired_option(c, r):
        key = (c, r)
        if key not in repaired:
            st = states[r]
            full = None
            if st.leave is not None and st.load + kit.w[c] <= st.cap + EPS:
                full = kit.insert_repaired(st.stops, c, opened_sorted)
            repaired[key] = None if full is None else (st.rate * full[1], full[0])
        return repaired[key]

    def forget(r):
        for table in (cache, repaired):
            for key in [k for k in table if k[1] == r]:
                del table[key]

    while pending:
        choice = None
        for c in pending:
            best = second = None
            for r in range(len(states)):
                opt = option(c, r)
                if opt is None:
                    continue
                if best is None or (opt[0], r) < (best[0], best[1]):
                    best, second = (opt[0], r, opt), best
                elif second is None or opt[0] < second[0]:
                    second = (opt[0], r, opt)
            if best is None:
                continue
            best_cost, r, opt = best
            if regret:
                second_cost = second[0] if second is not None else math.inf
                key = (-(second_cost - best_cost), best_cost, c)
            else:
                key = (best_cost, c)
            if choice is None or key < choice[0]:
                choice = (key, c, r, opt)
        if choice is None:
            # several opened stations may be needed around one customer
            for c in pending:
                for r in range(len(states)):
                    full = repaired_option(c, r)
                    if full is not None and (choice is None or (full[0], c) < choice[0]):
                        choice = ((full[0], c), c, r, full[1])
            if choice is not None:
                _, c, r, new_stops = choice
                states[r].set(kit, new_stops)
                forget(r)
                pending.remove(c)
                continue
        if choice is None:
            if not allow_open:
                return False
            # no customer fits with the opened stations: allow opening one
            closed = [j for j in inst.station_ids if j not in plan.opened]
            for c in pending:
                for r in range(len(states)):
                    opt = _fallback_option(inst, kit, states[r], c, closed)
                    if opt is not None and (choice is None or (opt[0], c) < choice[0]):
                        choice = ((opt[0], c), c, r, opt)
            if choice is None:
                return False
        _, c, r, (_, p, nodes) = choice
        st = states[r]
        new_stops = st.stops[:p] + list(nodes) + st.stops[p:]
        st.set(kit, new_stops)
        new_st = {n for n in nodes if kit.station[n]}
        if new_st - plan.opened:
            plan.opened |= new_st
            opened_sorted = sorted(plan.opened)
            cache.clear()
            repaired.clear()
        else:
            forget(r)
        pending.remove(c)
    for idx, st in enumerate(states):
        plan.routes[idx][1] = st.stops
    return True


def _destroy_repair(inst, kit, plan: _Plan, params: SigalnsParams, rng, rem: int, ins: int
                    ) -> Optional[_Plan]:
    q = _n_remove(inst, params)
    removed = _REMOVERS[rem](inst, kit, plan, q, rng)
    trial = plan.copy()
    gone = set(removed)
    opened_sorted = sorted(trial.opened)
    for r in trial.routes:
        stops = [n for n in r[1] if n not in gone]
        if not kit.feasible(stops):
            stops = kit.repair(stops, opened_sorted)
            if stops is None:
                return None
        r[1] = stops
    if not _reinsert(inst, kit, trial, removed, regret=(ins == 1)):
        return None
    trial.routes = [[v, _two_opt(kit, kit.cleanup(s))] for v, s in trial.routes]
    trial.opened = _used_stations(kit, trial)
    return trial


def alns_step(instance: Instance, charging, solution: Solution, params: SigalnsParams,
              weights: tuple[Sequence[float], Sequence[float]], rng: random.Random,
              operators: Optional[tuple[int, int]] = None):
    """One roulette-selected destroy/repair move on ``solution``.

    Returns ``(candidate, (removal_index, insertion_index), ok)``; when the
    repair fails the input solution is returned with ``ok=False``.
    """
    kit = RouteKit(instance, charging)
    if operators is None:
        operators = (roulette(weights[0], rng), roulette(weights[1], rng))
    out = _destroy_repair(instance, kit, _from_solution(instance, solution), params, rng,
                          *operators)
    if out is None:
        return solution, operators, False
    return _to_solution(instance, charging, out, dict(solution.info)), operators, True


def acceptance_probability(delta: float, temperature: Optional[float]) -> float:
    if delta <= 0:
        return 1.0
    if not temperature:
        return 0.0
    return math.exp(-delta / temperature)


def sigalns(instance: Instance, charging, params: SigalnsParams = SigalnsParams(),
            history: Optional[dict] = None) -> Solution:
    """Run the full sweep / iterated greedy / ALNS loop and return the best plan.

    ``history``, if given, receives per-iteration traces (best and current
    objective, temperature, operator weights).
    """
    inst = instance
    kit = RouteKit(inst, charging)
    rng = random.Random(params.seed)
    s0 = modified_sweep(inst, charging, kit)
    current = _from_solution(inst, s0)
    cur_cost = _cost(inst, kit, current)
    best, best_cost = current.copy(), cur_cost

    w_rem = [1.0] * len(REMOVAL_OPERATORS)
    w_ins = [1.0] * len(INSERTION_OPERATORS)
    sc_rem, us_rem = [0.0] * len(w_rem), [0] * len(w_rem)
    sc_ins, us_ins = [0.0] * len(w_ins), [0] * len(w_ins)
    temperature: Optional[float] = None
    worsening: list[float] = []
    steps = 0
    if history is not None:
        history.update(best=[best_cost], current=[cur_cost], temperature=[], weights=[])

    it = 1
    while it < params.iter_max:
        trial = _ig(inst, kit, current.copy(), params.ig_destruct_d, rng) or current.copy()
        trial_cost = _cost(inst, kit, trial)
        for _ in range(params.alns_steps):
            rem, ins = roulette(w_rem, rng), roulette(w_ins, rng)
            cand = _destroy_repair(inst, kit, trial, params, rng, rem, ins)
            score = 0.0
            if cand is not None:
                c_cost = _cost(inst, kit, cand)
                if c_cost < best_cost - EPS:
                    score = params.sigma1
                elif c_cost < trial_cost - EPS:
                    score = params.sigma2
                elif c_cost <= trial_cost + EPS:
                    score = params.sigma3
                if c_cost < best_cost - EPS:
                    best, best_cost = cand.copy(), c_cost
                if c_cost <= trial_cost + EPS or \
                        rng.random() < acceptance_probability(c_cost - trial_cost, temperature):
                    trial, trial_cost = cand, c_cost
            sc_rem[rem] += score
            us_rem[rem] += 1
            sc_ins[ins] += score
            us_ins[ins] += 1
            steps += 1
            if steps % params.segment_length == 0:
                w_rem = update_weights(w_rem, sc_rem, us_rem, params.reaction_factor)
                w_ins = update_weights(w_ins, sc_ins, us_ins, params.reaction_factor)
                sc_rem, us_rem = [0.0] * len(w_rem), [0] * len(w_rem)
                sc_ins, us_ins = [0.0] * len(w_ins), [0] * len(w_ins)

        delta = trial_cost - cur_cost
        if delta > EPS and temperature is None:
            worsening.append(delta)
        if delta <= EPS or rng.random() < acceptance_probability(delta, temperature):
            current, cur_cost = trial, trial_cost
        if cur_cost < best_cost - EPS:
            best, best_cost = current.copy(), cur_cost

        if temperature is None:
            if it >= params.segment_length:
                mean = sum(worsening) / len(worsening) if worsening else 0.01 * max(cur_cost, 1.0)
                temperature = -mean / math.log(params.sa_start_accept_prob)
        else:
            temperature *= params.sa_cooling
        if history is not None:
            history["best"].append(best_cost)
            history["current"].append(cur_cost)
            history["temperature"].append(temperature)
            history["weights"].append((tuple(w_rem), tuple(w_ins)))
        it += 1

    best.routes.sort(key=lambda r: r[0])
    return _to_solution(inst, charging, best, {"algorithm": "sigalns", "seed": params.seed})
