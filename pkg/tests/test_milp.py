import math
import random

import pytest

from conftest import highspy, solve_model, tiny_charging, tiny_instance
from elrp.feasibility import check_solution, exact_solve_tiny, InfeasibleError
from elrp.instance import build_instance, generate_instance
from elrp.milp import (DecodeError, arc_set, assignment_from_solution, big_m,
                       build_ev_model, build_evl_model, decode_solution, export_lp, lp_text)
from elrp.soc import FixedCharge, default_calibration


def one_one_one():
    return build_instance((0, 0), [(10, 0, 3)], [(0, 10, 500)], [(20, 1)])


def test_arc_pruning_hand_enumeration():
    # nodes o=0, i=1, j=2, o'=3: arcs o->i, o->j, i->j, i->o', j->i, j->o'
    assert arc_set(one_one_one()) == [(0, 1), (0, 2), (1, 2), (1, 3), (2, 1), (2, 3)]


def test_ev_counts_match_hand_enumeration():
    m = build_ev_model(one_one_one())
    # X: |J| = 1; Y and R: one per arc; B1 on n != o; B2 on n != o'; U on n != o
    assert [m.count(s) for s in ("X", "Y", "R", "B1", "B2", "Z", "U")] == [1, 6, 6, 3, 3, 0, 3]
    # assign 1, open 1, flow 2 (customer + station), return 1, depart 1,
    # load_station 1, load_customer 1, load_arc 6, range_up 6, range_lo 6,
    # range_init 1, recharge_full 1, range_customer 1 -> 29, plus 4 order rows
    # (one per arc not leaving o)
    fams = {"assign": 1, "open": 1, "flow": 2, "return": 1, "depart": 1, "load_station": 1,
            "load_customer": 1, "load_arc": 6, "range_up": 6, "range_lo": 6, "range_init": 1,
            "recharge_full": 1, "range_customer": 1, "order": 4}
    for fam, n in fams.items():
        assert len(m.family(fam)) == n, fam
    assert len(m.constraints) == 33


def test_evl_counts_match_hand_enumeration():
    m = build_evl_model(one_one_one(), default_calibration(10))
    assert m.count("Z") == 1
    assert len(m.family("recharge_full")) == 0
    for fam in ("recharge", "z_open", "z_b1", "z_lower"):
        assert len(m.family(fam)) == 1
    assert len(m.constraints) == 33 - 1 + 4
    assert len(m.variables) == 23


def test_closed_form_counts(seed7):
    m = build_evl_model(seed7, default_calibration(0))
    n_e = len(seed7.fleet)
    assert m.count("X") == len(seed7.stations)
    assert m.count("Z") == len(seed7.stations) * n_e
    assert m.count("Y") <= seed7.n_nodes ** 2 * n_e
    names = [c.name for c in m.constraints]
    assert len(names) == len(set(names))
    nvar = len(m.variables)
    assert all(0 <= j < nvar for c in m.constraints for j, _ in c.terms)


def test_big_m():
    inst = generate_instance(1, 4, 3, 30, 2)
    assert big_m(inst) == 2 * (4 + 3)


def test_no_stations_means_no_location_rows():
    inst = build_instance((0, 0), [(10, 0, 3), (0, 5, 1)], [], [(20, 1)])
    m = build_ev_model(inst)
    assert m.count("X") == 0
    assert not m.family("open") and not m.family("recharge_full")


def test_empty_fleet_gives_objective_over_x_only(tmp_path):
    inst = build_instance((0, 0), [], [(3, 3, 100), (1, 1, 50)], [])
    m = build_ev_model(inst)
    assert m.count("Y") == 0
    text = lp_text(m)
    assert "obj: 100 X_1 + 50 X_2" in text
    if highspy is not None:
        status, obj, _ = solve_model(m, tmp_path)
        assert status == "optimal" and obj == 0


def test_export_is_deterministic(tmp_path, seed7):
    a, b = tmp_path / "a.lp", tmp_path / "b.lp"
    export_lp(build_evl_model(seed7, default_calibration(-10)), a)
    export_lp(build_evl_model(seed7, default_calibration(-10)), b)
    assert a.read_bytes() == b.read_bytes()


@pytest.mark.skipif(highspy is None, reason="highspy not installed")
def test_lp_reimport_counts(tmp_path, seed7):
    m = build_evl_model(seed7, default_calibration(-10))
    path = tmp_path / "m.lp"
    export_lp(m, path)
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.readModel(str(path))
    assert h.getNumCol() == len(m.variables)
    assert h.getNumRow() == len(m.constraints)


def test_seed7_external_solve_is_checker_clean(tmp_path, seed7):
    ch = default_calibration(10)
    m = build_evl_model(seed7, ch)
    status, obj, values = solve_model(m, tmp_path, time_limit=300)
    assert status == "optimal"
    sol = decode_solution(m, values, ch)
    assert check_solution(seed7, ch, sol).clean
    assert sol.total == pytest.approx(obj, rel=1e-6)
    assert m.objective_value(values) == pytest.approx(sol.total, abs=1e-6 * max(1, obj))


def test_ev_equals_evl_with_topping_charge(tmp_path):
    # A recharge map that always tops up to soc_full is the base model's rule.
    for seed in range(6):
        inst = tiny_instance(100 + seed, n_customers=3, n_stations=2, n_vehicles=1)
        s1, o1, _ = solve_model(build_ev_model(inst), tmp_path)
        s2, o2, _ = solve_model(build_evl_model(inst, FixedCharge(0.0, inst.soc_full)), tmp_path)
        assert s1 == s2
        if s1 == "optimal":
            assert o1 == pytest.approx(o2, rel=1e-6)


def test_decode_zero_customer_instance():
    inst = build_instance((0, 0), [], [(3, 3, 100)], [(10, 1)])
    m = build_ev_model(inst)
    sol = decode_solution(m, {v.name: 0.0 for v in m.variables})
    assert sol.routes == () and sol.opened == () and sol.total == 0


def test_decode_single_customer_route():
    inst = one_one_one()
    m = build_ev_model(inst)
    values = {v.name: 0.0 for v in m.variables}
    values.update({"Y_0_1_0": 1.0, "Y_1_3_0": 1.0})
    sol = decode_solution(m, values)
    assert [r.stops for r in sol.routes] == [(0, 1, 3)]
    assert sol.total == pytest.approx(20.0)


def test_decode_rejects_detached_cycle():
    inst = build_instance((0, 0), [(10, 0, 1), (0, 10, 1)], [(5, 5, 10)], [(20, 1)])
    m = build_ev_model(inst)
    values = {v.name: 0.0 for v in m.variables}
    values.update({"Y_0_1_0": 1.0, "Y_1_4_0": 1.0, "Y_2_3_0": 1.0, "Y_3_2_0": 1.0})
    with pytest.raises(DecodeError, match="subtour"):
        decode_solution(m, values)


def test_decode_rejects_fractional():
    m = build_ev_model(one_one_one())
    with pytest.raises(DecodeError, match="fractional"):
        decode_solution(m, {"Y_0_1_0": 0.5})


def test_encode_decode_roundtrip():
    for seed in range(10):
        inst = tiny_instance(seed, n_customers=3)
        ch = tiny_charging(seed)
        try:
            sol = exact_solve_tiny(inst, ch)
        except InfeasibleError:
            continue
        m = build_evl_model(inst, ch)
        back = decode_solution(m, assignment_from_solution(m, sol), ch)
        assert [r.stops for r in back.routes] == [r.stops for r in sol.routes]
        assert back.total == pytest.approx(sol.total)
