import itertools
import math

import pytest

from conftest import tiny_charging, tiny_instance
from elrp.feasibility import (InfeasibleError, Objective, Solution, check_solution,
                              exact_solve_tiny, load_solution, make_solution, objective,
                              save_solution)
from elrp.instance import build_instance
from elrp.sigalns import sigalns
from elrp.soc import default_calibration, full_recharge

CH = default_calibration(10)


def line_instance(cust_x=30.0, demand=5, capacity=10, stations=()):
    # phi = 0.5 km per SOC point: 45 km of starting range, 50 km full
    return build_instance((0, 0), [(cust_x, 0, demand)], list(stations), [(capacity, 1.0)],
                          phi=0.5, soc0=90, soc_full=90)


def test_pendulum_within_range_is_clean():
    inst = line_instance(cust_x=20)
    sol = make_solution(inst, CH, [], [(0, [1])])
    assert check_solution(inst, CH, sol).clean
    assert sol.total == pytest.approx(40.0)


def test_capacity_violation_is_tagged():
    # demand one unit above the capacity of the vehicle that serves it
    inst = build_instance((0, 0), [(20, 0, 11)], [], [(11, 1.0), (10, 1.0)], phi=0.5)
    assert check_solution(inst, CH, make_solution(inst, CH, [], [(0, [1])])).clean
    report = check_solution(inst, CH, make_solution(inst, CH, [], [(1, [1])]))
    assert report.tags() == {"capacity"}
    assert report[0].magnitude == pytest.approx(1.0)


def test_battery_violation_reports_km_shortfall():
    inst = line_instance(cust_x=30)  # 60 km round trip, 45 km of range
    sol = make_solution(inst, CH, [], [(0, [1])])
    report = check_solution(inst, CH, sol)
    assert report.tags() == {"battery"}
    assert report[0].magnitude == pytest.approx(15.0)


def test_station_must_be_opened_and_visited_once():
    inst = line_instance(cust_x=30, stations=[(15, 0, 100)])
    ok = make_solution(inst, CH, [2], [(0, [2, 1])])
    assert check_solution(inst, CH, ok).clean
    closed = make_solution(inst, CH, [], [(0, [2, 1])])
    assert "station-open" in check_solution(inst, CH, closed).tags()
    twice = make_solution(inst, CH, [2], [(0, [2, 1, 2])])
    assert "route" in check_solution(inst, CH, twice).tags()


def test_missing_and_duplicate_customers():
    inst = build_instance((0, 0), [(5, 0, 1), (0, 5, 1)], [], [(10, 1), (10, 1)], phi=0.5)
    missing = make_solution(inst, CH, [], [(0, [1])])
    assert check_solution(inst, CH, missing).tags() == {"assignment"}
    dup = make_solution(inst, CH, [], [(0, [1, 2]), (1, [1])])
    assert "assignment" in check_solution(inst, CH, dup).tags()


def test_tampered_objective_is_reported():
    inst = line_instance(cust_x=10)
    sol = make_solution(inst, CH, [], [(0, [1])])
    bad = Solution(sol.opened, sol.routes, Objective(0, 1, 1))
    assert check_solution(inst, CH, bad).tags() == {"objective"}


def test_objective_is_arc_by_arc_sum(seed7):
    sol = sigalns(seed7, CH)
    d = seed7.dist
    routing = 0.0
    for r in sol.routes:
        for k in range(len(r.stops) - 1):
            routing += seed7.vehicle[r.vehicle].cost_rate * d[r.stops[k]][r.stops[k + 1]]
    station = sum(seed7.fixed_cost[j] for j in sol.opened)
    assert sol.objective.routing_cost == pytest.approx(routing, abs=1e-9)
    assert sol.objective.station_cost == pytest.approx(station)
    assert sol.total == pytest.approx(routing + station)


def test_objective_degenerate_cases():
    inst = line_instance(stations=[(15, 0, 1000)])
    assert objective(inst, Solution((), (), Objective(0, 0, 0))) == Objective(0, 0, 0)
    assert objective(inst, Solution((2,), (), Objective(0, 0, 0))) == Objective(1000, 0, 1000)


def test_traces_follow_semantics():
    inst = line_instance(cust_x=30, stations=[(15, 0, 100)])
    sol = make_solution(inst, CH, [2], [(0, [2, 1])])
    r = sol.routes[0]
    assert r.load_trace == (5, 5, 0, 0)
    b = r.battery_trace
    assert b[0] == (45, 45)
    assert b[1][0] == pytest.approx(30)
    assert b[1][1] == pytest.approx(CH.range_after(30, 0.5))
    assert b[2][0] == b[2][1]


def test_solution_file_roundtrip(tmp_path):
    inst = line_instance(cust_x=30, stations=[(15, 0, 100)])
    sol = make_solution(inst, CH, [2], [(0, [2, 1])], info={"algorithm": "hand"})
    save_solution(sol, tmp_path / "s.json")
    back = load_solution(tmp_path / "s.json")
    assert back == sol and back.info == sol.info


# -- exact oracle --------------------------------------------------------------------

def test_exact_single_customer_in_range():
    inst = line_instance(cust_x=20, stations=[(10, 10, 5)])
    sol = exact_solve_tiny(inst, CH)
    assert [r.stops for r in sol.routes] == [(0, 1, 3)]
    assert sol.opened == () and sol.total == pytest.approx(40)


def test_exact_opens_station_when_needed():
    # customer at 30 km, start range 45 km: a station halfway makes it reachable
    inst = line_instance(cust_x=30, stations=[(15, 0, 7)])
    sol = exact_solve_tiny(inst, CH)
    assert sol.opened == (2,)
    assert sol.total == pytest.approx(7 + 60)
    assert check_solution(inst, CH, sol).clean


def test_exact_infeasible_without_station():
    with pytest.raises(InfeasibleError):
        exact_solve_tiny(line_instance(cust_x=30), CH)


def test_exact_budget():
    big = build_instance((0, 0), [(i, 0, 1) for i in range(1, 8)], [], [(100, 1)])
    with pytest.raises(ValueError, match="too large"):
        exact_solve_tiny(big, CH)


def brute_force(inst, charging):
    """Plain enumeration of station sets, assignments, stop orders and station
    sequences between consecutive stops."""
    best = math.inf
    cust = inst.customer_ids
    stations = inst.station_ids
    vehicles = [v.id for v in inst.fleet]
    for k in range(len(stations) + 1):
        for opened in itertools.combinations(stations, k):
            for assign in itertools.product(vehicles, repeat=len(cust)):
                total = sum(inst.fixed_cost[j] for j in opened)
                ok = True
                for v in vehicles:
                    mine = [c for c, a in zip(cust, assign) if a == v]
                    if not mine:
                        continue
                    if sum(inst.demand[c] for c in mine) > inst.vehicle[v].capacity:
                        ok = False
                        break
                    best_route = math.inf
                    for perm in itertools.permutations(mine):
                        gaps = len(perm) + 1
                        seqs = [p for r in range(len(opened) + 1)
                                for p in itertools.permutations(opened, r)]
                        for picks in itertools.product(seqs, repeat=gaps):
                            used = [j for p in picks for j in p]
                            if len(used) != len(set(used)):
                                continue
                            stops = []
                            for g in range(gaps):
                                stops.extend(picks[g])
                                if g < len(perm):
                                    stops.append(perm[g])
                            sol = make_solution(inst, charging, opened, [(v, stops)])
                            if check_solution(inst, charging, sol).tags() <= {"assignment"}:
                                best_route = min(best_route, sol.objective.routing_cost)
                    if best_route == math.inf:
                        ok = False
                        break
                    total += best_route
                if ok:
                    best = min(best, total)
    return best


def test_exact_matches_brute_force():
    for seed in range(12):
        inst = tiny_instance(seed, n_customers=3, n_stations=2)
        ch = tiny_charging(seed)
        bf = brute_force(inst, ch)
        try:
            got = exact_solve_tiny(inst, ch).total
        except InfeasibleError:
            got = math.inf
        if bf == math.inf:
            assert got == math.inf
        else:
            assert got == pytest.approx(bf, rel=1e-9)


def test_exact_ev_variant_uses_full_recharge():
    inst = line_instance(cust_x=30, stations=[(15, 0, 7)])
    sol = exact_solve_tiny(inst, variant="EV")
    assert check_solution(inst, full_recharge(inst.soc_full), sol).clean
