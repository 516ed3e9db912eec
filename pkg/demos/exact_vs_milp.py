"""Cross-checking the model three ways on a tiny instance.

For a handful of customers the optimum can be found by enumeration. The
same instance is then exported as a MILP and solved with scipy's HiGHS
interface. The decoded solution goes through the checker, and both
objectives must agree. The LP file is also written so any other solver can
read it.

One vehicle serves four customers on a tour longer than its range, so it has
to charge on the way. In the cold a stop restores less range, which the
optimum answers with a second station.

    python demos/exact_vs_milp.py [model.lp]
"""

import sys

from scipy.optimize import Bounds, LinearConstraint, milp

from elrp import build_instance, check_solution, default_calibration, exact_solve_tiny
from elrp.milp import build_evl_model, decode_solution, export_lp


def solve_milp(model, charging):
    c, A, lo, hi, lb, ub, integrality = model.matrices()
    res = milp(c, constraints=LinearConstraint(A, lo, hi), bounds=Bounds(lb, ub),
               integrality=integrality)
    return res.fun, decode_solution(model, dict(zip(model.names(), res.x)), charging)


def main(lp_path=None):
    # four customers 20 km from the depot, two candidate stations on the diagonal
    inst = build_instance(
        depot_xy=(20, 20),
        customers=[(40, 20, 4), (20, 40, 3), (0, 20, 5), (20, 0, 2)],
        stations=[(34, 34, 60.0), (6, 6, 45.0)],
        fleet=[(20, 1.0)],
        phi=1.2, soc0=90, soc_full=90,
    )
    print(f"range at departure {inst.phi * inst.soc0:.0f} km, touring all customers takes at least 125 km\n")

    for temp in (-10.0, 10.0):
        charging = default_calibration(temp, 40)
        exact = exact_solve_tiny(inst, charging)
        model = build_evl_model(inst, charging)
        obj, decoded = solve_milp(model, charging)
        report = check_solution(inst, charging, decoded)
        print(f"{temp:+.0f} C, 40-minute stops")
        print(f"  enumeration: {[r.stops for r in exact.routes]}  stations {exact.opened}  "
              f"cost {exact.total:.2f}")
        print(f"  MILP ({len(model.variables)} vars, {len(model.constraints)} rows): "
              f"{[r.stops for r in decoded.routes]}  cost {obj:.2f}")
        print(f"  checker {'clean' if report.clean else report}, "
              f"objectives agree: {abs(obj - exact.total) <= 1e-6 * exact.total}\n")

    if lp_path:
        export_lp(build_evl_model(inst, default_calibration(-10.0, 40)), lp_path)
        print(f"LP file for -10 C written to {lp_path}")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else None)
