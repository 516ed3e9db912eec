"""Problem data model, seeded instance generator and JSON persistence.

Node ids are positions in ``Instance.nodes``: the depot is node 0, customers
follow, then candidate stations, and the depot copy is the last node.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

FORMAT_VERSION = 1


class InstanceFormatError(ValueError):
    """Raised when an instance file or object violates the data model."""


class NodeKind(str, Enum):
    DEPOT = "depot"
    DEPOT_COPY = "depot_copy"
    CUSTOMER = "customer"
    STATION = "station"


@dataclass(frozen=True)
class Node:
    id: int
    kind: NodeKind
    x: float
    y: float


@dataclass(frozen=True)
class Customer:
    node: int
    demand: float


@dataclass(frozen=True)
class StationCandidate:
    node: int
    fixed_cost: float


@dataclass(frozen=True)
class Vehicle:
    id: int
    capacity: float
    cost_rate: float = 1.0


def distance(a: Node, b: Node) -> float:
    """Euclidean distance in km between two nodes."""
    return math.hypot(a.x - b.x, a.y - b.y)


def euclidean_matrix(nodes: Sequence[Node]) -> np.ndarray:
    xy = np.array([[n.x, n.y] for n in nodes], dtype=float).reshape(-1, 2)
    diff = xy[:, None, :] - xy[None, :, :]
    return np.hypot(diff[..., 0], diff[..., 1])


@dataclass(frozen=True, eq=False)
class Instance:
    """Immutable electric location-routing instance.

    ``phi`` converts one SOC percentage point to km of range, so the range of a
    full battery is ``d_max = 100 * phi``. ``distances`` is built from the
    coordinates unless an explicit matrix is supplied.
    """

    nodes: tuple[Node, ...]
    customers: tuple[Customer, ...]
    stations: tuple[StationCandidate, ...]
    fleet: tuple[Vehicle, ...]
    phi: float
    soc0: float
    soc_full: float
    distances: Optional[np.ndarray] = None
    seed: Optional[int] = None
    explicit_distances: bool = False
    name: str = ""
    _meta: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "customers", tuple(self.customers))
        object.__setattr__(self, "stations", tuple(self.stations))
        object.__setattr__(self, "fleet", tuple(self.fleet))
        if self.distances is None:
            matrix = euclidean_matrix(self.nodes)
            object.__setattr__(self, "explicit_distances", False)
        else:
            matrix = np.array(self.distances, dtype=float)
            object.__setattr__(self, "explicit_distances", True)
        matrix.setflags(write=False)
        object.__setattr__(self, "distances", matrix)
        self.validate()

    # -- validation -----------------------------------------------------
    def validate(self) -> None:
        nodes = self.nodes
        for pos, node in enumerate(nodes):
            if node.id != pos:
                raise InstanceFormatError(f"nodes[{pos}].id: expected {pos}, got {node.id}")
        kinds = [n.kind for n in nodes]
        if kinds.count(NodeKind.DEPOT) != 1:
            raise InstanceFormatError("nodes: exactly one depot required")
        if kinds.count(NodeKind.DEPOT_COPY) != 1:
            raise InstanceFormatError("nodes: exactly one depot_copy required")
        if kinds[0] != NodeKind.DEPOT or kinds[-1] != NodeKind.DEPOT_COPY:
            raise InstanceFormatError("nodes: depot must be first and depot_copy last")
        o, o2 = nodes[0], nodes[-1]
        if (o.x, o.y) != (o2.x, o2.y):
            raise InstanceFormatError("nodes: depot and depot_copy coordinates differ")

        cust_ids = [c.node for c in self.customers]
        stat_ids = [s.node for s in self.stations]
        if any(nodes[i].kind != NodeKind.CUSTOMER for i in cust_ids if 0 <= i < len(nodes)):
            raise InstanceFormatError("customers: node is not of kind customer")
        if any(nodes[j].kind != NodeKind.STATION for j in stat_ids if 0 <= j < len(nodes)):
            raise InstanceFormatError("stations: node is not of kind station")
        if sorted(cust_ids) != [n.id for n in nodes if n.kind == NodeKind.CUSTOMER]:
            raise InstanceFormatError("customers: must list every customer node exactly once")
        if sorted(stat_ids) != [n.id for n in nodes if n.kind == NodeKind.STATION]:
            raise InstanceFormatError("stations: must list every station node exactly once")

        if len({v.id for v in self.fleet}) != len(self.fleet):
            raise InstanceFormatError("fleet: duplicate vehicle id")
        for v in self.fleet:
            if not v.capacity > 0:
                raise InstanceFormatError(f"fleet[{v.id}].capacity must be > 0")
            if v.cost_rate < 0:
                raise InstanceFormatError(f"fleet[{v.id}].cost_rate must be >= 0")
        for c in self.customers:
            if c.demand < 0:
                raise InstanceFormatError(f"customers[node={c.node}].demand must be >= 0")
        if self.fleet:
            k_max = max(v.capacity for v in self.fleet)
            for c in self.customers:
                if c.demand > k_max:
                    raise InstanceFormatError(
                        f"customers[node={c.node}].demand exceeds every vehicle capacity"
                    )
        for s in self.stations:
            if s.fixed_cost < 0:
                raise InstanceFormatError(f"stations[node={s.node}].fixed_cost must be >= 0")
        if not self.phi > 0:
            raise InstanceFormatError("params.phi must be > 0")
        if not 0 <= self.soc0 <= 100:
            raise InstanceFormatError("params.soc0 must lie in [0, 100]")
        if not 0 < self.soc_full <= 100:
            raise InstanceFormatError("params.soc_full must lie in (0, 100]")

        d = self.distances
        n = len(nodes)
        if d.shape != (n, n):
            raise InstanceFormatError(f"distances: expected shape ({n}, {n}), got {d.shape}")
        if not np.all(np.isfinite(d)) or np.any(d < 0):
            raise InstanceFormatError("distances: entries must be finite and nonnegative")
        if np.any(np.diag(d) != 0):
            raise InstanceFormatError("distances: diagonal must be zero")
        if not np.allclose(d, d.T, rtol=0, atol=1e-9):
            raise InstanceFormatError("distances: matrix must be symmetric")
        if d[0, n - 1] != 0:
            raise InstanceFormatError("distances: depot to depot_copy must be zero")

    # -- derived views ------------------------------------------------------
    @property
    def depot(self) -> int:
        return 0

    @property
    def depot_copy(self) -> int:
        return len(self.nodes) - 1

    @property
    def d_max(self) -> float:
        return self.phi * 100.0

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @cached_property
    def customer_ids(self) -> tuple[int, ...]:
        return tuple(c.node for c in self.customers)

    @cached_property
    def station_ids(self) -> tuple[int, ...]:
        return tuple(s.node for s in self.stations)

    @cached_property
    def demand(self) -> tuple[float, ...]:
        """Demand per node id (zero for non-customers)."""
        w = [0.0] * self.n_nodes
        for c in self.customers:
            w[c.node] = float(c.demand)
        return tuple(w)

    @cached_property
    def fixed_cost(self) -> dict[int, float]:
        return {s.node: float(s.fixed_cost) for s in self.stations}

    @cached_property
    def dist(self) -> list[list[float]]:
        """Distance matrix as nested lists; faster than numpy for scalar lookups."""
        return self.distances.tolist()

    @cached_property
    def vehicle(self) -> dict[int, Vehicle]:
        return {v.id: v for v in self.fleet}

    def is_customer(self, node: int) -> bool:
        return self.nodes[node].kind == NodeKind.CUSTOMER

    def is_station(self, node: int) -> bool:
        return self.nodes[node].kind == NodeKind.STATION

    def __eq__(self, other):
        if not isinstance(other, Instance):
            return NotImplemented
        return (
            self.nodes == other.nodes
            and self.customers == other.customers
            and self.stations == other.stations
            and self.fleet == other.fleet
            and (self.phi, self.soc0, self.soc_full) == (other.phi, other.soc0, other.soc_full)
            and self.seed == other.seed
            and self.explicit_distances == other.explicit_distances
            and np.array_equal(self.distances, other.distances)
        )

    __hash__ = object.__hash__


def build_instance(
    depot_xy: tuple[float, float],
    customers: Sequence[tuple[float, float, float]],
    stations: Sequence[tuple[float, float, float]],
    fleet: Sequence[tuple[float, float]],
    phi: float = 2.0,
    soc0: float = 90.0,
    soc_full: float = 90.0,
    seed: Optional[int] = None,
    name: str = "",
) -> Instance:
    """Assemble an instance from plain tuples.

    ``customers`` holds ``(x, y, demand)``, ``stations`` holds
    ``(x, y, fixed_cost)`` and ``fleet`` holds ``(capacity, cost_rate)``.
    """
    nodes = [Node(0, NodeKind.DEPOT, float(depot_xy[0]), float(depot_xy[1]))]
    cust, stat = [], []
    for x, y, w in customers:
        nid = len(nodes)
        nodes.append(Node(nid, NodeKind.CUSTOMER, float(x), float(y)))
        cust.append(Customer(nid, float(w)))
    for x, y, f in stations:
        nid = len(nodes)
        nodes.append(Node(nid, NodeKind.STATION, float(x), float(y)))
        stat.append(StationCandidate(nid, float(f)))
    nodes.append(Node(len(nodes), NodeKind.DEPOT_COPY, float(depot_xy[0]), float(depot_xy[1])))
    vehicles = [Vehicle(e, float(k), float(c)) for e, (k, c) in enumerate(fleet)]
    return Instance(nodes, cust, stat, vehicles, phi=phi, soc0=soc0, soc_full=soc_full,
                    seed=seed, name=name)


def generate_instance(
    seed: int,
    n_customers: int,
    n_stations: int,
    region_side: float = 60.0,
    fleet_size: int = 3,
    *,
    demand_range: tuple[int, int] = (1, 10),
    cost_range: tuple[float, float] = (800.0, 1200.0),
    capacity: float = 100.0,
    cost_rate: float = 1.0,
    phi: float = 2.0,
    soc0: float = 90.0,
    soc_full: float = 90.0,
    central_share: float = 0.7,
) -> Instance:
    """Generate a synthetic instance with customers clustered around the center.

    A share ``central_share`` of customers is drawn from a bivariate normal
    centred on the region (sigma = side / 6, clipped to the square); the rest
    are uniform. The depot sits at the center, stations are uniform.
    """
    if n_customers < 1 or n_stations < 1 or fleet_size < 1:
        raise ValueError("n_customers, n_stations and fleet_size must be >= 1")
    if not region_side > 0:
        raise ValueError("region_side must be > 0")

    rng = np.random.default_rng(seed)
    side = float(region_side)
    center = side / 2.0
    central = rng.random(n_customers) < central_share
    normal_xy = np.clip(rng.normal(center, side / 6.0, size=(n_customers, 2)), 0.0, side)
    uniform_xy = rng.uniform(0.0, side, size=(n_customers, 2))
    cust_xy = np.where(central[:, None], normal_xy, uniform_xy)
    demands = rng.integers(demand_range[0], demand_range[1] + 1, size=n_customers)
    stat_xy = rng.uniform(0.0, side, size=(n_stations, 2))
    costs = rng.uniform(cost_range[0], cost_range[1], size=n_stations)

    customers = [(float(x), float(y), int(w)) for (x, y), w in zip(cust_xy, demands)]
    stations = [(float(x), float(y), float(f)) for (x, y), f in zip(stat_xy, costs)]
    fleet = [(capacity, cost_rate)] * fleet_size
    inst = build_instance((center, center), customers, stations, fleet,
                          phi=phi, soc0=soc0, soc_full=soc_full, seed=seed)
    inst._meta["generator"] = {
        "n_customers": n_customers,
        "n_stations": n_stations,
        "region_side": side,
        "fleet_size": fleet_size,
    }
    return inst


# -- persistence ------------------------------------------------------------

def instance_to_dict(instance: Instance) -> dict:
    doc = {
        "meta": {"version": FORMAT_VERSION, "seed": instance.seed, "name": instance.name},
        "nodes": [{"id": n.id, "kind": n.kind.value, "x": n.x, "y": n.y} for n in instance.nodes],
        "customers": [{"node": c.node, "demand": c.demand} for c in instance.customers],
        "stations": [{"node": s.node, "fixed_cost": s.fixed_cost} for s in instance.stations],
        "fleet": [{"id": v.id, "capacity": v.capacity, "cost_rate": v.cost_rate}
                  for v in instance.fleet],
        "params": {"phi": instance.phi, "soc0": instance.soc0, "soc_full": instance.soc_full},
    }
    if "generator" in instance._meta:
        doc["meta"]["generator"] = instance._meta["generator"]
    if instance.explicit_distances:
        doc["distances"] = instance.distances.tolist()
    return doc


def _field(obj: dict, key: str, where: str):
    if not isinstance(obj, dict) or key not in obj:
        raise InstanceFormatError(f"{where}.{key}: missing")
    return obj[key]


def _number(obj: dict, key: str, where: str) -> float:
    value = _field(obj, key, where)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise InstanceFormatError(f"{where}.{key}: expected a number, got {value!r}")
    return value


def instance_from_dict(doc: dict) -> Instance:
    meta = _field(doc, "meta", "instance")
    version = _field(meta, "version", "meta")
    if version != FORMAT_VERSION:
        raise InstanceFormatError(
            f"meta.version: unsupported version {version!r} (expected {FORMAT_VERSION})"
        )
    nodes = []
    for k, raw in enumerate(_field(doc, "nodes", "instance")):
        where = f"nodes[{k}]"
        try:
            kind = NodeKind(_field(raw, "kind", where))
        except ValueError:
            raise InstanceFormatError(f"{where}.kind: unknown kind {raw.get('kind')!r}") from None
        nodes.append(Node(int(_number(raw, "id", where)), kind,
                          float(_number(raw, "x", where)), float(_number(raw, "y", where))))
    nodes.sort(key=lambda n: n.id)
    customers = [
        Customer(int(_number(c, "node", f"customers[{k}]")), _number(c, "demand", f"customers[{k}]"))
        for k, c in enumerate(_field(doc, "customers", "instance"))
    ]
    stations = [
        StationCandidate(int(_number(s, "node", f"stations[{k}]")),
                         _number(s, "fixed_cost", f"stations[{k}]"))
        for k, s in enumerate(_field(doc, "stations", "instance"))
    ]
    fleet = [
        Vehicle(int(_number(v, "id", f"fleet[{k}]")), _number(v, "capacity", f"fleet[{k}]"),
                _number(v, "cost_rate", f"fleet[{k}]"))
        for k, v in enumerate(_field(doc, "fleet", "instance"))
    ]
    params = _field(doc, "params", "instance")
    inst = Instance(
        nodes, customers, stations, fleet,
        phi=_number(params, "phi", "params"),
        soc0=_number(params, "soc0", "params"),
        soc_full=_number(params, "soc_full", "params"),
        distances=doc.get("distances"),
        seed=meta.get("seed"),
        name=meta.get("name", "") or "",
    )
    if "generator" in meta:
        inst._meta["generator"] = meta["generator"]
    return inst


def save_instance(instance: Instance, path) -> None:
    text = json.dumps(instance_to_dict(instance), indent=1)
    Path(path).write_text(text + "\n", encoding="utf-8")


def load_instance(path) -> Instance:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InstanceFormatError(f"{path}: not valid JSON ({exc})") from exc
    return instance_from_dict(doc)
