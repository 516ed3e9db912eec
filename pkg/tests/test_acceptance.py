"""Acceptance criteria 1-8.

The suite run (10 instances, 3 temperatures, 2 algorithms, 5 seeds) is shared
by criteria 1, 4 and 5 and takes tens of minutes on one core; set
ELRP_ACCEPT_JOBS to spread the grid over worker processes. A pass/fail line
per criterion is printed at the end of the session.
"""

import math
import os
import random
import statistics

import numpy as np
import pytest
from scipy.integrate import solve_ivp
from scipy.stats import binomtest

from conftest import record, solve_model, tiny_charging, tiny_instance
from elrp.bench import (DEFAULT_GAP_PAIR, BenchRow, REPORT_COLUMNS, build_report, default_suite,
                        gap_percent, temperature_sweep)
from elrp.cli import main as cli_main
from elrp.feasibility import (InfeasibleError, check_solution, exact_solve_tiny,
                              make_solution)
from elrp.milp import (DecodeError, assignment_from_solution, build_evl_model,
                       decode_solution, fixed_binaries_feasible)
from elrp.sigalns import SigalnsParams, sigalns
from elrp.soc import mu_params
from elrp.tsmcws import ts_mcws

TEMPS = (-10.0, 10.0, 30.0)
SEEDS = 5
RUN_LIMIT_S = 300.0


@pytest.fixture(scope="session")
def suite():
    return default_suite()


@pytest.fixture(scope="session")
def suite_report(suite, tmp_path_factory):
    out = tmp_path_factory.mktemp("acceptance_suite")
    jobs = int(os.environ.get("ELRP_ACCEPT_JOBS", "1"))
    report = temperature_sweep(suite, ["tsmcws", "sigalns"], TEMPS, (80.0,), reps=SEEDS,
                               base_seed=0, jobs=jobs, out_dir=out)
    print(f"\nacceptance suite report: {out / 'report.csv'}")
    return report


@pytest.fixture(scope="session")
def tinies():
    """Tiny instances with |I| <= 5, |J| <= 2, |E| <= 2, at least 20 feasible."""
    out, seed, feasible = [], 0, 0
    while feasible < 24:
        inst, ch = tiny_instance(1000 + seed), tiny_charging(1000 + seed)
        seed += 1
        assert len(inst.customers) <= 5 and len(inst.stations) <= 2 and len(inst.fleet) <= 2
        try:
            ex = exact_solve_tiny(inst, ch)
            feasible += 1
        except InfeasibleError:
            ex = None
        out.append((inst, ch, ex))
    return out


# -- 1 -----------------------------------------------------------------------------

def test_criterion_1_feasibility_soundness(suite_report):
    # every run is checked inside run_replications; a violation aborts the sweep
    runs = [run for row in suite_report.rows for run in row.runs]
    slowest = max(run.runtime_s for run in runs)
    expected = 10 * 2 * len(TEMPS) * SEEDS
    ok = len(runs) == expected and slowest < RUN_LIMIT_S
    detail = f"{len(runs)}/{expected} runs checker-clean, slowest run {slowest:.1f} s"
    record(1, ok, detail)
    assert ok, detail


# -- 2 -----------------------------------------------------------------------------

def test_criterion_2_oracle_equivalence(tinies, tmp_path):
    n_feasible = sum(ex is not None for _, _, ex in tinies)
    mismatches, beaten, unclean = [], [], 0
    for k, (inst, ch, ex) in enumerate(tinies):
        status, obj, _ = solve_model(build_evl_model(inst, ch), tmp_path)
        if ex is None:
            if status != "infeasible":
                mismatches.append((k, "exact infeasible", status, obj))
            continue
        unclean += not check_solution(inst, ch, ex).clean
        if status != "optimal" or abs(obj - ex.total) > 1e-4 * max(1.0, abs(ex.total)):
            mismatches.append((k, ex.total, status, obj))
        for seed in range(3):
            for sol in (ts_mcws(inst, ch), sigalns(inst, ch, SigalnsParams(seed=seed))):
                if sol.total < ex.total - 1e-6:
                    beaten.append((k, sol.info.get("algorithm"), sol.total, ex.total))
    ok = n_feasible >= 20 and unclean == 0 and not mismatches and not beaten
    detail = (f"{len(tinies)} tiny instances ({n_feasible} feasible): {unclean} unclean optima, "
              f"{len(mismatches)} MILP mismatches, {len(beaten)} heuristic wins over the optimum")
    record(2, ok, detail)
    assert ok, (detail, mismatches[:3], beaten[:3])


# -- 3 -----------------------------------------------------------------------------

def random_candidate(inst, ch, rng):
    """A random plan: station set, customer split, order and station stops.

    Half of the draws start from a heuristic solution with at most one small
    mutation, so that both verdicts occur often.
    """
    if rng.random() < 0.5:
        try:
            base = sigalns(inst, ch, SigalnsParams(iter_max=3, seed=rng.randrange(100)))
        except InfeasibleError:
            base = None
        if base is not None:
            opened = set(base.opened)
            routes = [[r.vehicle, list(r.inner)] for r in base.routes]
            move = rng.randrange(5)
            if move == 1 and inst.station_ids:
                opened ^= {rng.choice(inst.station_ids)}
            elif move == 2 and routes:
                r = rng.choice(routes)[1]
                rng.shuffle(r)
            elif move == 3 and routes:
                r = rng.choice(routes)[1]
                r.insert(rng.randrange(len(r) + 1), rng.choice(inst.station_ids or [r[0]]))
            elif move == 4 and routes:
                r = rng.choice(routes)[1]
                del r[rng.randrange(len(r))]
            return opened, routes
    opened = {j for j in inst.station_ids if rng.random() < 0.5}
    routes = {v.id: [] for v in inst.fleet}
    for c in inst.customer_ids:
        if rng.random() < 0.95:
            routes[rng.choice(list(routes))].append(c)
    out = []
    for v, stops in routes.items():
        rng.shuffle(stops)
        for j in inst.station_ids:
            if rng.random() < 0.4:
                stops.insert(rng.randrange(len(stops) + 1), j)
        out.append([v, stops])
    return opened, out


def test_criterion_3_encoding_cross_validation(tinies):
    rng = random.Random(2024)
    models = [(inst, ch, build_evl_model(inst, ch)) for inst, ch, _ in tinies]
    trials = disagreements = clean_count = 0
    while trials < 1200:
        inst, ch, model = models[trials % len(models)]
        opened, routes = random_candidate(inst, ch, rng)
        sol = make_solution(inst, ch, opened, routes)
        binaries = assignment_from_solution(model, sol)
        if rng.random() < 0.1:
            # flip a few arc bits at random
            keys = [k for k in binaries if k.startswith("Y_")]
            for k in rng.sample(keys, min(2, len(keys))):
                binaries[k] = 1.0 - binaries[k]
        model_ok = fixed_binaries_feasible(model, binaries)
        try:
            decoded = decode_solution(model, binaries, ch)
            checker_ok = check_solution(inst, ch, decoded).clean
        except DecodeError:
            checker_ok = False
        disagreements += model_ok != checker_ok
        clean_count += checker_ok
        trials += 1
    ok = disagreements == 0 and trials >= 1000
    detail = (f"{trials} random assignments ({clean_count} clean, {trials - clean_count} "
              f"violating): {disagreements} disagreements")
    record(3, ok, detail)
    assert ok, detail
    assert 0.2 * trials < clean_count < 0.8 * trials


# -- 4 -----------------------------------------------------------------------------

def _pairs(values):
    """Strict decreases over (-10, 10), (10, 30) and (-10, 30)."""
    a, b, c = values
    return [b < a, c < b, c < a]


def test_criterion_4_temperature_trend(suite_report):
    lines, ok = [], True
    per_temp = {}
    for alg in ("tsmcws", "sigalns"):
        stations = [suite_report.aggregate(alg, t, 80.0).stations_opened for t in TEMPS]
        cost = [suite_report.aggregate(alg, t, 80.0).best for t in TEMPS]
        per_temp[alg] = (stations, cost)
        for name, vals in (("stations", stations), ("cost", cost)):
            hits = sum(_pairs(vals))
            ok &= hits >= 2
            lines.append(f"{alg} {name} " + " > ".join(f"{v:.1f}" for v in vals) + f" ({hits}/3)")
    for k, name in ((0, "stations"), (1, "cost")):
        agg = [statistics.fmean(per_temp[a][k][i] for a in per_temp) for i in range(3)]
        both = agg[1] <= agg[0] and agg[2] <= agg[1]
        ok &= both
        lines.append(f"aggregate {name} " + " >= ".join(f"{v:.1f}" for v in agg))
    detail = "; ".join(lines)
    record(4, ok, detail)
    assert ok, detail


# -- 5 -----------------------------------------------------------------------------

def test_criterion_5_heuristic_ordering(suite_report):
    one, two = DEFAULT_GAP_PAIR  # sigalns, tsmcws
    cells = [(r.instance, r.temperature) for r in suite_report.rows if r.algorithm == one]
    best = {a: [suite_report.row(i, a, t, 80.0).best for i, t in cells] for a in (one, two)}
    rt = {a: [suite_report.row(i, a, t, 80.0).runtime_s for i, t in cells] for a in (one, two)}

    def sign_test(xs, ys):
        wins = sum(x < y - 1e-9 for x, y in zip(xs, ys))
        losses = sum(x > y + 1e-9 for x, y in zip(xs, ys))
        p = binomtest(wins, wins + losses, 0.5, alternative="greater").pvalue if wins + losses else 1.0
        return wins, losses, p

    w_b, l_b, p_b = sign_test(best[one], best[two])
    w_t, l_t, p_t = sign_test(rt[one], rt[two])
    mean_b = {a: statistics.fmean(v) for a, v in best.items()}
    mean_t = {a: statistics.fmean(v) for a, v in rt.items()}
    ok_best = mean_b[one] <= mean_b[two] and p_b < 0.05
    ok_time = mean_t[one] <= mean_t[two] and p_t < 0.05
    detail = (f"mean Best {mean_b[one]:.1f} vs {mean_b[two]:.1f}, sign test {w_b}-{l_b} p={p_b:.3g}; "
              f"mean runtime {mean_t[one]:.2f} s vs {mean_t[two]:.2f} s, sign test {w_t}-{l_t} "
              f"p={p_t:.3g}")
    record(5, ok_best and ok_time, detail)
    assert ok_best and ok_time, detail


# -- 6 -----------------------------------------------------------------------------

def ode_oracle(soc, t, c, lam):
    l0, l1, l2 = lam
    sol = solve_ivp(lambda _, y: [l0 + l1 * c + l2 * y[0]], (0.0, t), [soc],
                    method="DOP853", rtol=1e-12, atol=1e-12)
    return sol.y[0, -1]


def test_criterion_6_soc_numerics():
    rng = np.random.default_rng(6)
    worst = 0.0
    for _ in range(1000):
        t = rng.uniform(0.0, 240.0)
        c = rng.uniform(-30.0, 45.0)
        soc = rng.uniform(0.0, 100.0)
        lam = (rng.uniform(0.1, 2.0), rng.uniform(-0.05, 0.05), rng.uniform(-0.05, -1e-4))
        mu1, mu2 = mu_params(*lam, t, c)
        want = ode_oracle(soc, t, c, lam)
        got = mu1 * soc + mu2
        worst = max(worst, abs(got - want) / max(abs(want), 1e-12))
    ident = all(mu_params(0.68, 0.018, -0.005, 0.0, c) == (1.0, 0.0) for c in (-10, 0, 10, 30))
    ok = worst <= 1e-6 and ident
    detail = f"max relative error {worst:.2e} over 1000 points, t=0 identity {'exact' if ident else 'broken'}"
    record(6, ok, detail)
    assert ok, detail


# -- 7 -----------------------------------------------------------------------------

def test_criterion_7_determinism(suite, tmp_path):
    subset = [s for s in suite if s[0] in ("I015", "I060")]
    dirs = [tmp_path / "a", tmp_path / "b"]
    reports = [temperature_sweep(subset, ["tsmcws", "sigalns"], TEMPS, (80.0,), reps=2,
                                 out_dir=d) for d in dirs]
    same_rows = reports[0].csv_rows(timing=False) == reports[1].csv_rows(timing=False)
    files = sorted(p.name for p in (dirs[0] / "solutions").iterdir())
    same_files = all((dirs[0] / "solutions" / f).read_bytes() == (dirs[1] / "solutions" / f).read_bytes()
                     for f in files)
    cli_out = []
    inst = tmp_path / "i.json"
    cli_main(["generate", "--seed", "3", "--customers", "20", "--stations", "6", "--out", str(inst)])
    for alg in ("tsmcws", "sigalns"):
        for k in range(2):
            path = tmp_path / f"{alg}{k}.json"
            cli_main(["solve", "--algorithm", alg, "--instance", str(inst), "--temperature", "-10",
                      "--seed", "9", "--out", str(path)])
            cli_out.append(path.read_bytes())
    same_cli = cli_out[0] == cli_out[1] and cli_out[2] == cli_out[3]
    ok = same_rows and same_files and same_cli
    detail = (f"bench rerun rows identical={same_rows}, {len(files)} solution files identical="
              f"{same_files}, CLI solve outputs identical={same_cli}")
    record(7, ok, detail)
    assert ok, detail


# -- 8 -----------------------------------------------------------------------------

def test_criterion_8_gap_of_means():
    gap = gap_percent(32773.6, 33907.9)
    rows = [BenchRow("avg", "sigalns", -10.0, 80.0, 57.5, 11, 32773.6, 32773.6, 0.0, 5),
            BenchRow("avg", "tsmcws", -10.0, 80.0, 57.5, 11, 33907.9, 33907.9, 0.0, 5)]
    report = build_report(rows)
    agg = [r for r in report.csv_rows() if r[0] == "aggregate" and r[2] == "tsmcws"][0]
    labelled = agg[REPORT_COLUMNS.index("gap_of_means_percent")]
    distinct = ("gap_of_means_percent" in REPORT_COLUMNS and "mean_of_gaps_percent" in REPORT_COLUMNS)
    ok = round(gap, 2) == 3.46 and math.isclose(labelled, gap) and distinct
    detail = f"gap_percent(32773.6, 33907.9) = {gap:.4f}%, reported as gap_of_means_percent"
    record(8, ok, detail)
    assert ok, detail
