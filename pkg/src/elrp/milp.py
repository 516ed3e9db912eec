"""MILP models of the electric location-routing problem and LP-file export.

Two models are built over the same arc set:

* ``build_ev_model``: stations recharge to ``soc_full``.
* ``build_evl_model``: stations apply the temperature-dependent affine recharge
  map, linearised through ``Z[j,e] = B1[j,e] * X[j]``.

Constraint rows are named ``<family>_<indices>``: assign, open, flow, return,
depart, load_station, load_customer, load_arc, range_up, range_lo,
range_init, range_customer, then recharge_full for the base model or
recharge, z_open, z_b1, z_lower for the temperature-aware one, and order
for the rows that exclude cycles detached from the depot.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional

import numpy as np
from scipy import sparse

from .feasibility import Solution, make_solution
from .instance import Instance

log = logging.getLogger(__name__)

BINARY = "binary"
CONTINUOUS = "continuous"
SYMBOL_ORDER = ("X", "Y", "R", "B1", "B2", "Z", "U")
BINARY_TOL = 1e-6


class DecodeError(ValueError):
    """An assignment does not describe depot-anchored routes."""


@dataclass(frozen=True)
class Variable:
    name: str
    kind: str
    lower: float
    upper: float


@dataclass(frozen=True)
class Constraint:
    name: str
    terms: tuple[tuple[int, float], ...]
    sense: str  # "<=", "=", ">="
    rhs: float


@dataclass
class MilpModel:
    name: str
    variables: list[Variable] = field(default_factory=list)
    constraints: list[Constraint] = field(default_factory=list)
    objective: dict[int, float] = field(default_factory=dict)
    index: dict[tuple, int] = field(default_factory=dict)
    instance: Optional[Instance] = None
    charging: object = None

    def var(self, symbol: str, *idx) -> int:
        return self.index[(symbol, *idx)]

    def has(self, symbol: str, *idx) -> bool:
        return (symbol, *idx) in self.index

    def count(self, symbol: str) -> int:
        return sum(1 for key in self.index if key[0] == symbol)

    def family(self, prefix: str) -> list[Constraint]:
        tag = prefix + "_"
        return [c for c in self.constraints if c.name.startswith(tag) or c.name == prefix]

    def names(self) -> list[str]:
        return [v.name for v in self.variables]

    # -- numeric views ------------------------------------------------------
    def matrices(self):
        """Return (c, A, lower_rows, upper_rows, lb, ub, integrality)."""
        n = len(self.variables)
        rows, cols, vals = [], [], []
        lo, hi = [], []
        for r, con in enumerate(self.constraints):
            for j, a in con.terms:
                rows.append(r)
                cols.append(j)
                vals.append(a)
            lo.append(con.rhs if con.sense in ("=", ">=") else -np.inf)
            hi.append(con.rhs if con.sense in ("=", "<=") else np.inf)
        A = sparse.csr_matrix((vals, (rows, cols)), shape=(len(self.constraints), n))
        c = np.zeros(n)
        for j, a in self.objective.items():
            c[j] = a
        lb = np.array([v.lower for v in self.variables])
        ub = np.array([v.upper for v in self.variables])
        integrality = np.array([1 if v.kind == BINARY else 0 for v in self.variables])
        return c, A, np.array(lo), np.array(hi), lb, ub, integrality

    def objective_value(self, values: Mapping[str, float]) -> float:
        return sum(a * values.get(self.variables[j].name, 0.0) for j, a in self.objective.items())

    def violated(self, values: Mapping[str, float], tol: float = 1e-6) -> list[str]:
        """Names of rows and bounds violated by a full assignment."""
        x = np.array([values.get(v.name, 0.0) for v in self.variables])
        bad = [v.name for v, xv in zip(self.variables, x)
               if xv < v.lower - tol or xv > v.upper + tol]
        for con in self.constraints:
            lhs = sum(a * x[j] for j, a in con.terms)
            if ((con.sense == "<=" and lhs > con.rhs + tol)
                    or (con.sense == ">=" and lhs < con.rhs - tol)
                    or (con.sense == "=" and abs(lhs - con.rhs) > tol)):
                bad.append(con.name)
        return bad


class _Builder:
    def __init__(self, name: str, instance: Instance):
        self.model = MilpModel(name=name, instance=instance)

    def add_var(self, symbol, idx, kind, lower, upper):
        name = symbol + "".join(f"_{i}" for i in idx)
        self.model.index[(symbol, *idx)] = len(self.model.variables)
        self.model.variables.append(Variable(name, kind, float(lower), float(upper)))

    def add(self, name, terms, sense, rhs):
        merged: dict[int, float] = {}
        for j, a in terms:
            merged[j] = merged.get(j, 0.0) + a
        row = tuple((j, a) for j, a in sorted(merged.items()) if a != 0.0)
        self.model.constraints.append(Constraint(name, row, sense, float(rhs)))


def arc_set(instance: Instance) -> list[tuple[int, int]]:
    """Arcs n -> n' without self-loops, arcs into o, arcs out of o', or o -> o'."""
    o, o2 = instance.depot, instance.depot_copy
    n = instance.n_nodes
    return [(a, b) for a in range(n) for b in range(n)
            if a != b and b != o and a != o2 and not (a == o and b == o2)]


def big_m(instance: Instance) -> float:
    return float(len(instance.fleet) * (len(instance.customers) + len(instance.stations)))


def _build(instance: Instance, charging, name: str, linearized: bool,
           subtour_elimination: bool) -> MilpModel:
    b = _Builder(name, instance)
    m = b.model
    o, o2 = instance.depot, instance.depot_copy
    I, J = instance.customer_ids, instance.station_ids
    E = [v.id for v in instance.fleet]
    k = {v.id: v.capacity for v in instance.fleet}
    rate = {v.id: v.cost_rate for v in instance.fleet}
    d = instance.dist
    dmax = instance.d_max
    phi = instance.phi
    N = range(instance.n_nodes)
    arcs = arc_set(instance)
    out_arcs = {n: [] for n in N}
    in_arcs = {n: [] for n in N}
    for a, c in arcs:
        out_arcs[a].append(c)
        in_arcs[c].append(a)

    if instance.fleet:
        k_max = max(k.values())
        if any(instance.demand[i] > k_max for i in I):
            log.warning("a customer demand exceeds every vehicle capacity; model is infeasible")

    # variables, symbol-major then index order
    for j in J:
        b.add_var("X", (j,), BINARY, 0, 1)
    for a, c in arcs:
        for e in E:
            b.add_var("Y", (a, c, e), BINARY, 0, 1)
    for a, c in arcs:
        for e in E:
            b.add_var("R", (a, c, e), CONTINUOUS, 0, k[e])
    for n in N:
        if n != o:
            for e in E:
                b.add_var("B1", (n, e), CONTINUOUS, 0, dmax)
    for n in N:
        if n != o2:
            for e in E:
                b.add_var("B2", (n, e), CONTINUOUS, 0, dmax)
    if linearized:
        for j in J:
            for e in E:
                b.add_var("Z", (j, e), CONTINUOUS, 0, dmax)
    if subtour_elimination:
        for n in N:
            if n != o:
                for e in E:
                    b.add_var("U", (n, e), CONTINUOUS, 0, instance.n_nodes - 1)

    X = lambda j: m.var("X", j)  # noqa: E731
    Y = lambda a, c, e: m.var("Y", a, c, e)  # noqa: E731
    R = lambda a, c, e: m.var("R", a, c, e)  # noqa: E731
    B1 = lambda n, e: m.var("B1", n, e)  # noqa: E731
    B2 = lambda n, e: m.var("B2", n, e)  # noqa: E731

    # objective
    for j in J:
        m.objective[X(j)] = instance.fixed_cost[j]
    for a, c in arcs:
        for e in E:
            m.objective[Y(a, c, e)] = rate[e] * d[a][c]

    # each customer entered exactly once
    for i in I:
        b.add(f"assign_{i}", [(Y(n, i, e), 1.0) for n in in_arcs[i] for e in E], "=", 1)
    # station use only if opened
    M = big_m(instance)
    for j in J:
        b.add(f"open_{j}", [(Y(n, j, e), 1.0) for n in in_arcs[j] for e in E] + [(X(j), -M)],
              "<=", 0)
    # flow balance at customers and stations
    for n in (*I, *J):
        for e in E:
            b.add(f"flow_{n}_{e}",
                  [(Y(n, c, e), 1.0) for c in out_arcs[n]]
                  + [(Y(a, n, e), -1.0) for a in in_arcs[n]], "=", 0)
    # a vehicle leaving o returns to o'
    for e in E:
        b.add(f"return_{e}", [(Y(o, c, e), 1.0) for c in out_arcs[o]]
              + [(Y(a, o2, e), -1.0) for a in in_arcs[o2]], "=", 0)
    # at most one departure per vehicle
    for e in E:
        b.add(f"depart_{e}", [(Y(o, c, e), 1.0) for c in out_arcs[o]], "<=", 1)
    # load unchanged through stations
    for j in J:
        for e in E:
            b.add(f"load_station_{j}_{e}", [(R(a, j, e), 1.0) for a in in_arcs[j]]
                  + [(R(j, c, e), -1.0) for c in out_arcs[j]], "=", 0)
    # load drops by the demand at a visited customer
    for i in I:
        for e in E:
            terms = [(R(i, c, e), 1.0) for c in out_arcs[i]]
            terms += [(R(a, i, e), -1.0) for a in in_arcs[i]]
            terms += [(Y(a, i, e), instance.demand[i] + k[e]) for a in in_arcs[i]]
            b.add(f"load_customer_{i}_{e}", terms, "<=", k[e])
    # load only on used arcs, within capacity
    for a, c in arcs:
        for e in E:
            b.add(f"load_arc_{a}_{c}_{e}", [(R(a, c, e), 1.0), (Y(a, c, e), -k[e])], "<=", 0)
    # range propagation along used arcs
    for a, c in arcs:
        for e in E:
            b.add(f"range_up_{a}_{c}_{e}",
                  [(B1(c, e), 1.0), (B2(a, e), -1.0), (Y(a, c, e), d[a][c] + dmax)], "<=", dmax)
    for a, c in arcs:
        for e in E:
            b.add(f"range_lo_{a}_{c}_{e}",
                  [(B1(c, e), 1.0), (B2(a, e), -1.0), (Y(a, c, e), d[a][c] - dmax)], ">=", -dmax)
    # initial range
    for e in E:
        b.add(f"range_init_{e}", [(B2(o, e), 1.0)], "=", phi * instance.soc0)
    if not linearized:
        # recharge to soc_full at opened stations
        for j in J:
            for e in E:
                b.add(f"recharge_full_{j}_{e}", [(B2(j, e), 1.0), (X(j), -phi * instance.soc_full)], "<=", 0)
    # range unchanged at customers
    for i in I:
        for e in E:
            b.add(f"range_customer_{i}_{e}", [(B1(i, e), 1.0), (B2(i, e), -1.0)], "=", 0)
    if linearized:
        mu1, mu2 = charging.mu1, charging.mu2
        Z = lambda j, e: m.var("Z", j, e)  # noqa: E731
        for j in J:
            for e in E:
                b.add(f"recharge_{j}_{e}", [(B2(j, e), 1.0), (Z(j, e), -mu1), (X(j), -mu2 * phi)],
                      "<=", 0)
        for j in J:
            for e in E:
                b.add(f"z_open_{j}_{e}", [(Z(j, e), 1.0), (X(j), -dmax)], "<=", 0)
        for j in J:
            for e in E:
                b.add(f"z_b1_{j}_{e}", [(Z(j, e), 1.0), (B1(j, e), -1.0)], "<=", 0)
        for j in J:
            for e in E:
                b.add(f"z_lower_{j}_{e}", [(Z(j, e), 1.0), (B1(j, e), -1.0), (X(j), -dmax)],
                      ">=", -dmax)
        # Z >= 0 is the variable lower bound
    if subtour_elimination:
        big = instance.n_nodes
        U = lambda n, e: m.var("U", n, e)  # noqa: E731
        for a, c in arcs:
            if a == o:
                continue
            for e in E:
                b.add(f"order_{a}_{c}_{e}", [(U(a, e), 1.0), (U(c, e), -1.0), (Y(a, c, e), big)],
                      "<=", big - 1)
    return m


def build_ev_model(instance: Instance, subtour_elimination: bool = True) -> MilpModel:
    """Base model: stations recharge opened-station visits to ``soc_full``."""
    m = _build(instance, None, "EV", linearized=False, subtour_elimination=subtour_elimination)
    return m


def build_evl_model(instance: Instance, charging, subtour_elimination: bool = True) -> MilpModel:
    """Temperature-aware model with the linearised affine recharge bound."""
    m = _build(instance, charging, "EVL", linearized=True, subtour_elimination=subtour_elimination)
    m.charging = charging
    return m


# -- LP export ----------------------------------------------------------------

def _num(x: float) -> str:
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(float(x))


def _expr(terms, names) -> list[str]:
    parts = []
    for j, a in terms:
        sign = "-" if a < 0 else "+"
        mag = abs(a)
        coef = "" if mag == 1 else _num(mag) + " "
        parts.append(f"{sign} {coef}{names[j]}")
    if not parts:
        return ["0 " + names[0]] if names else ["0"]
    if parts[0].startswith("+ "):
        parts[0] = parts[0][2:]
    return parts


def _wrap(head: str, parts: list[str], tail: str = "", width: int = 200) -> list[str]:
    lines, line = [], head
    for p in parts:
        if len(line) + len(p) + 1 > width and line.strip():
            lines.append(line)
            line = "   "
        line += (" " if line and not line.endswith(" ") else "") + p
    line += tail
    lines.append(line)
    return lines


def lp_text(model: MilpModel) -> str:
    names = model.names()
    out = [f"\\ model {model.name}", "Minimize"]
    obj_terms = sorted(model.objective.items())
    out += _wrap(" obj:", _expr(obj_terms, names))
    out.append("Subject To")
    sense_txt = {"<=": "<=", ">=": ">=", "=": "="}
    for con in model.constraints:
        out += _wrap(f" {con.name}:", _expr(con.terms, names),
                     f" {sense_txt[con.sense]} {_num(con.rhs)}")
    out.append("Bounds")
    for v in model.variables:
        if v.kind == BINARY:
            continue
        out.append(f" {_num(v.lower)} <= {v.name} <= {_num(v.upper)}")
    binaries = [v.name for v in model.variables if v.kind == BINARY]
    if binaries:
        out.append("Binaries")
        out += _wrap("", binaries)
    out.append("End")
    return "\n".join(out) + "\n"


def export_lp(model: MilpModel, path) -> None:
    Path(path).write_text(lp_text(model), encoding="ascii")


# -- decoding ---------------------------------------------------------------------

def decode_solution(model: MilpModel, assignment: Mapping[str, float], charging=None
                    ) -> Solution:
    """Rebuild routes by following Y arcs from o to o' for every vehicle.

    Raises ``DecodeError`` for fractional binaries, branching, dead ends and
    cycles that are not attached to the depot.
    """
    inst = model.instance
    o, o2 = inst.depot, inst.depot_copy
    for v in model.variables:
        if v.kind == BINARY:
            x = assignment.get(v.name, 0.0)
            if min(abs(x), abs(x - 1.0)) > BINARY_TOL:
                raise DecodeError(f"binary {v.name} has fractional value {x}")
    on = lambda name: assignment.get(name, 0.0) > 0.5  # noqa: E731

    opened = [j for j in inst.station_ids if on(model.variables[model.var("X", j)].name)]
    succ: dict[int, dict[int, list[int]]] = {v.id: {} for v in inst.fleet}
    for key, j in model.index.items():
        if key[0] != "Y" or not on(model.variables[j].name):
            continue
        _, a, c, e = key
        succ[e].setdefault(a, []).append(c)

    routes = []
    for e in sorted(succ):
        arcs = succ[e]
        if not arcs:
            continue
        for a, outs in arcs.items():
            if len(outs) > 1:
                raise DecodeError(f"vehicle {e}: node {a} has {len(outs)} outgoing arcs")
        if o not in arcs:
            cycle = _trace_cycle(arcs, min(arcs))
            raise DecodeError(f"vehicle {e}: arcs without a depot departure, cycle {cycle}")
        path, node, used = [o], o, set()
        while node != o2:
            if node not in arcs:
                raise DecodeError(f"vehicle {e}: route dead-ends at node {node}")
            used.add(node)
            node = arcs[node][0]
            if node in path:
                raise DecodeError(f"vehicle {e}: route revisits node {node}")
            path.append(node)
        leftover = set(arcs) - used
        if leftover:
            cycle = _trace_cycle(arcs, min(leftover))
            raise DecodeError(f"vehicle {e}: subtour detached from the depot {cycle}")
        routes.append((e, path[1:-1]))

    if charging is None:
        charging = model.charging
    if charging is None:
        from .soc import full_recharge
        charging = full_recharge(inst.soc_full)
    sol = make_solution(inst, charging, opened, routes, info={"source": f"milp:{model.name}"})
    has_cont = any(v.kind == CONTINUOUS and v.name in assignment for v in model.variables)
    if not has_cont:
        return sol
    rebuilt = []
    for r in sol.routes:
        loads, batt = [], []
        for pos, n in enumerate(r.stops):
            nxt = r.stops[pos + 1] if pos + 1 < len(r.stops) else None
            prv = r.stops[pos - 1] if pos > 0 else None
            if nxt is not None:
                loads.append(assignment.get(model.variables[model.var("R", n, nxt, r.vehicle)].name, 0.0))
            else:
                loads.append(assignment.get(model.variables[model.var("R", prv, n, r.vehicle)].name, 0.0))
            b1 = assignment.get(f"B1_{n}_{r.vehicle}") if n != o else None
            b2 = assignment.get(f"B2_{n}_{r.vehicle}") if n != o2 else None
            b1 = b2 if b1 is None else b1
            b2 = b1 if b2 is None else b2
            batt.append((float(b1), float(b2)))
        rebuilt.append(type(r)(r.vehicle, r.stops, tuple(loads), tuple(batt)))
    return Solution(sol.opened, tuple(rebuilt), sol.objective, sol.info)


def _trace_cycle(arcs: dict[int, list[int]], start: int) -> list[int]:
    cycle, node = [start], start
    while True:
        nxt = arcs.get(node)
        if not nxt:
            return cycle
        node = nxt[0]
        if node in cycle:
            return cycle + [node]
        cycle.append(node)


def assignment_from_solution(model: MilpModel, solution: Solution) -> dict[str, float]:
    """Binary part (X, Y) of the assignment that encodes a solution."""
    values = {v.name: 0.0 for v in model.variables if v.kind == BINARY}
    for j in solution.opened:
        values[model.variables[model.var("X", j)].name] = 1.0
    for r in solution.routes:
        for a, c in zip(r.stops, r.stops[1:]):
            if model.has("Y", a, c, r.vehicle):
                values[model.variables[model.var("Y", a, c, r.vehicle)].name] = 1.0
    return values


def fixed_binaries_feasible(model: MilpModel, binaries: Mapping[str, float]) -> bool:
    """Whether continuous values exist that complete the given X/Y values.

    Solves the LP over the continuous variables with every binary fixed.
    """
    from scipy.optimize import linprog

    c, A, lo, hi, lb, ub, integrality = model.matrices()
    fixed = np.array([binaries.get(v.name, 0.0) for v in model.variables])
    is_bin = integrality == 1
    lb = np.where(is_bin, fixed, lb)
    ub = np.where(is_bin, fixed, ub)
    A = A.tocsr()
    eq = lo == hi
    le = np.isfinite(hi) & ~eq
    ge = np.isfinite(lo) & ~eq
    A_ub = sparse.vstack([A[le], -A[ge]]).tocsr()
    b_ub = np.concatenate([hi[le], -lo[ge]])
    res = linprog(np.zeros(len(c)), A_ub=A_ub, b_ub=b_ub, A_eq=A[eq], b_eq=lo[eq],
                  bounds=list(zip(lb, ub)), method="highs")
    return res.status == 0
