"""Replication runs, summary statistics and the temperature / charge-time grid.

Rows are keyed by (instance, algorithm, temperature, charge time). Gaps
compare two algorithms' Best values per cell; both the mean of per-cell gaps
and the gap of the mean Best values are reported.
"""

from __future__ import annotations

import csv
import math
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence

from .feasibility import InfeasibleError, Solution, check_solution, save_solution
from .instance import Instance, generate_instance
from .sigalns import SigalnsParams, sigalns
from .soc import default_calibration
from .tsmcws import TsMcwsParams, mcws_routes, ts_mcws


class BenchmarkError(RuntimeError):
    pass


ALGORITHMS: dict[str, tuple[Callable, type]] = {
    "tsmcws": (ts_mcws, TsMcwsParams),
    "sigalns": (sigalns, SigalnsParams),
}

# gap(%) = 100 (Best_2 - Best_1) / Best_1 with algorithm 1 first
DEFAULT_GAP_PAIR = ("sigalns", "tsmcws")

SUITE_SIZES = tuple(range(15, 151, 15))
SUITE_SIDE = 150.0
SUITE_TEMPS = (-10.0, 10.0, 30.0)

REPORT_COLUMNS = (
    "kind", "instance", "algorithm", "temperature", "charge_time", "n_customers",
    "stations_opened", "best", "average", "runtime_s", "reps",
    "gap_percent", "gap_of_means_percent", "mean_of_gaps_percent",
)
PLOT_COLUMNS = ("instance", "algorithm", "temperature", "charge_time", "seed",
                "objective", "stations_opened", "runtime_s")


def gap_percent(best_1: float, best_2: float) -> float:
    if not best_1 > 0:
        raise ValueError(f"best_1 must be > 0, got {best_1}")
    return 100.0 * (best_2 - best_1) / best_1


@dataclass
class RunRecord:
    seed: int
    objective: float
    stations_opened: int
    runtime_s: float
    solution: Solution = field(repr=False, compare=False)


@dataclass
class BenchRow:
    instance: str
    algorithm: str
    temperature: Optional[float]
    charge_time: Optional[float]
    n_customers: float
    stations_opened: float
    best: float
    average: float
    runtime_s: float
    reps: int
    runs: list[RunRecord] = field(default_factory=list, repr=False, compare=False)

    @property
    def key(self):
        return (self.instance, self.algorithm, self.temperature, self.charge_time)


@dataclass
class GapRow:
    instance: str
    temperature: Optional[float]
    charge_time: Optional[float]
    gap_percent: float


@dataclass
class AggregateRow:
    algorithm: str
    temperature: Optional[float]
    charge_time: Optional[float]
    n_customers: float
    stations_opened: float
    best: float
    average: float
    runtime_s: float
    n_instances: int


@dataclass
class BenchReport:
    rows: list[BenchRow]
    gaps: list[GapRow]
    aggregates: list[AggregateRow]
    gap_pair: tuple[str, str] = DEFAULT_GAP_PAIR

    def row(self, instance, algorithm, temperature=None, charge_time=None) -> BenchRow:
        for r in self.rows:
            if r.key == (instance, algorithm, temperature, charge_time):
                return r
        raise KeyError((instance, algorithm, temperature, charge_time))

    def aggregate(self, algorithm, temperature=None, charge_time=None) -> AggregateRow:
        for a in self.aggregates:
            if (a.algorithm, a.temperature, a.charge_time) == (algorithm, temperature, charge_time):
                return a
        raise KeyError((algorithm, temperature, charge_time))

    def gap_summary(self, temperature=None, charge_time=None) -> dict[str, float]:
        """Both gap aggregations for one (temperature, charge time) group."""
        one, two = self.gap_pair
        cell = [g.gap_percent for g in self.gaps
                if (g.temperature, g.charge_time) == (temperature, charge_time)]
        a1 = self.aggregate(one, temperature, charge_time)
        a2 = self.aggregate(two, temperature, charge_time)
        return {
            "mean_of_gaps_percent": statistics.fmean(cell) if cell else math.nan,
            "gap_of_means_percent": gap_percent(a1.best, a2.best),
        }

    # -- output --------------------------------------------------------------
    def csv_rows(self, timing: bool = True) -> list[list]:
        gap_at = {(g.instance, g.temperature, g.charge_time): g.gap_percent for g in self.gaps}
        out = []
        for r in self.rows:
            gap = gap_at.get((r.instance, r.temperature, r.charge_time)) \
                if r.algorithm == self.gap_pair[1] else None
            out.append(["cell", r.instance, r.algorithm, r.temperature, r.charge_time,
                        r.n_customers, r.stations_opened, r.best, r.average,
                        r.runtime_s if timing else None, r.reps, gap, None, None])
        for a in self.aggregates:
            gaps = {}
            if a.algorithm == self.gap_pair[1]:
                try:
                    gaps = self.gap_summary(a.temperature, a.charge_time)
                except KeyError:
                    gaps = {}
            out.append(["aggregate", "", a.algorithm, a.temperature, a.charge_time,
                        a.n_customers, a.stations_opened, a.best, a.average,
                        a.runtime_s if timing else None, a.n_instances, None,
                        gaps.get("gap_of_means_percent"), gaps.get("mean_of_gaps_percent")])
        return out

    def write_csv(self, path, timing: bool = True) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(REPORT_COLUMNS)
            for row in self.csv_rows(timing):
                w.writerow(["" if v is None else _fmt(v) for v in row])

    def write_plot_data(self, path, timing: bool = True) -> None:
        """Long format: one line per replication."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(PLOT_COLUMNS)
            for r in self.rows:
                for run in r.runs:
                    w.writerow([r.instance, r.algorithm, _fmt(r.temperature), _fmt(r.charge_time),
                                run.seed, _fmt(run.objective), run.stations_opened,
                                _fmt(run.runtime_s) if timing else ""])


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(round(v, 6))
    return str(v)


# -- runs ----------------------------------------------------------------------

def make_params(algorithm: str, seed: int, overrides: Optional[dict] = None):
    try:
        _, cls = ALGORITHMS[algorithm]
    except KeyError:
        raise ValueError(f"unknown algorithm {algorithm!r}; choose from {sorted(ALGORITHMS)}") from None
    return cls(**dict(overrides or {}, seed=seed))


def solve(instance: Instance, algorithm: str, charging, seed: int = 0,
          overrides: Optional[dict] = None) -> Solution:
    fn, _ = ALGORITHMS[algorithm] if algorithm in ALGORITHMS else (None, None)
    params = make_params(algorithm, seed, overrides)
    return fn(instance, charging, params)


def run_replications(instance: Instance, algorithm: str, charging, reps: int = 5,
                     base_seed: int = 0, *, instance_id: str = "instance",
                     overrides: Optional[dict] = None, solution_dir=None,
                     temperature=None, charge_time=None) -> BenchRow:
    """Run ``reps`` seeds; every counted solution must be checker-clean."""
    if reps < 1:
        raise ValueError("reps must be >= 1")
    runs: list[RunRecord] = []
    for seed in range(base_seed, base_seed + reps):
        t0 = time.perf_counter()
        try:
            sol = solve(instance, algorithm, charging, seed, overrides)
        except InfeasibleError as exc:
            raise BenchmarkError(f"instance {instance_id}: {algorithm} seed {seed} failed: {exc}") from exc
        elapsed = time.perf_counter() - t0
        report = check_solution(instance, charging, sol)
        if not report.clean:
            raise BenchmarkError(
                f"instance {instance_id}: {algorithm} seed {seed} returned an infeasible "
                f"solution:\n{report}")
        if solution_dir is not None:
            path = Path(solution_dir) / _solution_name(instance_id, algorithm, temperature,
                                                       charge_time, seed)
            save_solution(sol, path)
        runs.append(RunRecord(seed, sol.total, len(sol.opened), elapsed, sol))
    best_run = min(runs, key=lambda r: (r.objective, r.seed))
    return BenchRow(
        instance=instance_id,
        algorithm=algorithm,
        temperature=temperature,
        charge_time=charge_time,
        n_customers=len(instance.customers),
        stations_opened=best_run.stations_opened,
        best=best_run.objective,
        average=statistics.fmean(r.objective for r in runs),
        runtime_s=statistics.fmean(r.runtime_s for r in runs),
        reps=reps,
        runs=runs,
    )


def _solution_name(instance_id, algorithm, temperature, charge_time, seed) -> str:
    parts = [instance_id, algorithm]
    if temperature is not None:
        parts.append(f"T{temperature:g}")
    if charge_time is not None:
        parts.append(f"t{charge_time:g}")
    parts.append(f"s{seed}")
    return "_".join(parts) + ".json"


def _cell(job):
    (iid, inst, alg, temp, ct, reps, base_seed, overrides, sol_dir) = job
    charging = default_calibration(temp, ct)
    return run_replications(inst, alg, charging, reps, base_seed, instance_id=iid,
                            overrides=overrides, solution_dir=sol_dir,
                            temperature=temp, charge_time=ct)


def temperature_sweep(instances, algorithms: Sequence[str], temps: Sequence[float],
                      charge_times: Sequence[float] = (80.0,), reps: int = 5,
                      base_seed: int = 0, *, overrides: Optional[dict] = None,
                      jobs: int = 1, out_dir=None,
                      gap_pair: tuple[str, str] = DEFAULT_GAP_PAIR) -> BenchReport:
    """Full factorial over instances x algorithms x temperatures x charge times.

    ``instances`` is a mapping id -> Instance or a sequence of (id, Instance).
    ``overrides`` maps algorithm name -> parameter dict. Cells run in worker
    processes when ``jobs > 1``; the report order does not depend on it.
    """
    items = list(instances.items()) if isinstance(instances, dict) else list(instances)
    if not items or not algorithms or not temps or not charge_times:
        raise ValueError("instances, algorithms, temps and charge_times must be nonempty")
    for alg in algorithms:
        if alg not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {alg!r}; choose from {sorted(ALGORITHMS)}")
    sol_dir = None
    if out_dir is not None:
        sol_dir = Path(out_dir) / "solutions"
        sol_dir.mkdir(parents=True, exist_ok=True)
    overrides = overrides or {}
    grid = [(iid, inst, alg, float(t), float(ct), reps, base_seed, overrides.get(alg), sol_dir)
            for iid, inst in items for alg in algorithms for t in temps for ct in charge_times]
    if jobs > 1 and len(grid) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_cell, grid))
    else:
        rows = [_cell(job) for job in grid]

    report = build_report(rows, gap_pair)
    if out_dir is not None:
        report.write_csv(Path(out_dir) / "report.csv")
        report.write_plot_data(Path(out_dir) / "plot_data.csv")
    return report


def build_report(rows: list[BenchRow], gap_pair: tuple[str, str] = DEFAULT_GAP_PAIR) -> BenchReport:
    one, two = gap_pair
    by_key = {r.key: r for r in rows}
    gaps = []
    for r in rows:
        if r.algorithm != two:
            continue
        base = by_key.get((r.instance, one, r.temperature, r.charge_time))
        if base is not None:
            gaps.append(GapRow(r.instance, r.temperature, r.charge_time,
                               gap_percent(base.best, r.best)))
    groups: dict[tuple, list[BenchRow]] = {}
    for r in rows:
        groups.setdefault((r.algorithm, r.temperature, r.charge_time), []).append(r)
    aggregates = [
        AggregateRow(
            algorithm=alg, temperature=t, charge_time=ct,
            n_customers=statistics.fmean(m.n_customers for m in members),
            stations_opened=statistics.fmean(m.stations_opened for m in members),
            best=statistics.fmean(m.best for m in members),
            average=statistics.fmean(m.average for m in members),
            runtime_s=statistics.fmean(m.runtime_s for m in members),
            n_instances=len(members),
        )
        for (alg, t, ct), members in groups.items()
    ]
    return BenchReport(rows, gaps, aggregates, gap_pair)


# -- instance suite ------------------------------------------------------------------

def suite_instance(n_customers: int, seed: Optional[int] = None, *, side: float = SUITE_SIDE,
                   n_stations: Optional[int] = None, temps: Iterable[float] = SUITE_TEMPS,
                   charge_times: Iterable[float] = (80.0,), max_attempts: int = 20) -> Instance:
    """One suite instance with the smallest workable fleet.

    The fleet starts at ceil(total demand / capacity) and grows until the
    savings construction with every candidate station serves all customers
    at each combination of ``temps`` and ``charge_times``. A draw with a
    customer that no fleet can serve is replaced by the draw at
    ``seed + 1000 * k``.
    """
    base = n_customers if seed is None else seed
    n_st = max(5, n_customers // 5) if n_stations is None else n_stations
    models = [default_calibration(t, ct) for t in temps for ct in charge_times]
    for attempt in range(max_attempts):
        s = base + 1000 * attempt
        probe = generate_instance(s, n_customers, n_st, side, n_customers)
        if any(mcws_routes(probe, m, probe.station_ids).unserved for m in models):
            continue
        capacity = probe.fleet[0].capacity
        fleet = max(1, math.ceil(sum(c.demand for c in probe.customers) / capacity))
        while fleet <= n_customers:
            inst = generate_instance(s, n_customers, n_st, side, fleet)
            if all(not mcws_routes(inst, m, inst.station_ids).unserved for m in models):
                return inst
            fleet += 1
    raise BenchmarkError(f"no servable suite instance with {n_customers} customers "
                         f"after {max_attempts} draws")


def default_suite(sizes: Sequence[int] = SUITE_SIZES, **kwargs) -> list[tuple[str, Instance]]:
    """Ten instances from 15 to 150 customers (seed = size)."""
    return [(f"I{n:03d}", suite_instance(n, **kwargs)) for n in sizes]
