import math
import random

import numpy as np
import pytest

from elrp.instance import build_instance, generate_instance
from elrp.milp import MilpModel, lp_text
from elrp.soc import default_calibration

try:
    import highspy
except ImportError:  # pragma: no cover - scipy fallback below
    highspy = None


def tiny_instance(seed: int, n_customers=None, n_stations=None, n_vehicles=None):
    """Random instance small enough for the exact enumerator and a MILP solve.

    Range is short relative to the region so that some instances need a
    station and a few are infeasible.
    """
    rng = random.Random(seed)
    n_i = n_customers if n_customers is not None else rng.randint(1, 5)
    n_j = n_stations if n_stations is not None else rng.randint(0, 2)
    n_e = n_vehicles if n_vehicles is not None else rng.randint(1, 2)
    side = 40.0
    customers = [(rng.uniform(0, side), rng.uniform(0, side), rng.randint(1, 6))
                 for _ in range(n_i)]
    stations = [(rng.uniform(0, side), rng.uniform(0, side), rng.uniform(20, 60))
                for _ in range(n_j)]
    fleet = [(rng.choice([10, 15, 30]), 1.0) for _ in range(n_e)]
    return build_instance((side / 2, side / 2), customers, stations, fleet,
                          phi=0.5, soc0=90, soc_full=90, seed=seed)


def tiny_charging(seed: int):
    rng = random.Random(seed * 7919 + 1)
    return default_calibration(rng.choice([-10.0, 0.0, 10.0, 30.0]),
                               rng.choice([20.0, 40.0, 80.0]))


def solve_model(model: MilpModel, tmp_path=None, time_limit=120.0):
    """Solve ``model`` with an external MILP solver.

    HiGHS reads the exported LP file, which also exercises the export; scipy's
    MILP interface (itself HiGHS-based) is the fallback when highspy is
    missing. Returns (status, objective, values by name) with status one of
    "optimal", "infeasible", "other".
    """
    if highspy is not None and tmp_path is not None:
        path = tmp_path / f"{model.name}_{id(model)}.lp"
        path.write_text(lp_text(model), encoding="ascii")
        h = highspy.Highs()
        h.setOptionValue("output_flag", False)
        h.setOptionValue("time_limit", float(time_limit))
        h.setOptionValue("mip_rel_gap", 1e-9)
        h.setOptionValue("threads", 1)
        h.readModel(str(path))
        h.run()
        status = h.modelStatusToString(h.getModelStatus()).lower()
        if "infeasible" in status:
            return "infeasible", math.inf, {}
        if status != "optimal":
            return "other", math.nan, {}
        lp = h.getLp()
        names = list(lp.col_names_)
        vals = list(h.getSolution().col_value)
        return "optimal", h.getInfo().objective_function_value, dict(zip(names, vals))
    from scipy.optimize import Bounds, LinearConstraint, milp

    c, A, lo, hi, lb, ub, integrality = model.matrices()
    res = milp(c, constraints=LinearConstraint(A, lo, hi), bounds=Bounds(lb, ub),
               integrality=integrality, options={"time_limit": time_limit, "mip_rel_gap": 1e-9})
    if res.status == 2:
        return "infeasible", math.inf, {}
    if res.status != 0:
        return "other", math.nan, {}
    return "optimal", float(res.fun), dict(zip(model.names(), res.x))


@pytest.fixture
def seed7():
    return generate_instance(7, 10, 5, 60, 3)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# -- acceptance summary ------------------------------------------------------------

ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def record(criterion: int, ok: bool, detail: str) -> bool:
    """Remember one acceptance verdict for the end-of-session summary."""
    prev = ACCEPTANCE.get(criterion)
    if prev is not None:
        ok = ok and prev[0]
        detail = f"{prev[1]}; {detail}"
    ACCEPTANCE[criterion] = (ok, detail)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'} - {detail}")
