"""Route evaluation kernel shared by the heuristics.

Routes are lists of inner stops (customers and stations); the depot and its
copy are implicit at both ends. Ranges are in km. ``leave[k]`` is the range on
departure from stop ``k`` and ``need[k]`` the smallest arrival range at stop
``k`` from which the rest of the route can be completed, which makes
insertion checks O(1).
"""

from __future__ import annotations

import math
from typing import Iterable, Optional, Sequence

from .instance import Instance

EPS = 1e-9
INF = math.inf


class RouteKit:
    def __init__(self, instance: Instance, charging):
        self.inst = instance
        self.d = instance.dist
        self.o = instance.depot
        self.o2 = instance.depot_copy
        self.phi = instance.phi
        self.start = instance.phi * instance.soc0
        self.dmax = instance.d_max
        self.w = instance.demand
        self.station = [instance.is_station(n) for n in range(instance.n_nodes)]
        self.mu1 = float(charging.mu1)
        self.mu2 = float(charging.mu2) * instance.phi
        # scratch space for callers that memoise per-run results
        self.memo: dict = {}

    # -- recharge map in km ---------------------------------------------------
    def recharge(self, b: float) -> float:
        r = self.mu1 * b + self.mu2
        if r < b:
            r = b
        return r if r < self.dmax else self.dmax

    def need_before_charge(self, r: float) -> float:
        """Smallest arrival range at a station that leaves with at least ``r``."""
        if r <= 0:
            return 0.0
        if r > self.dmax + EPS:
            return INF
        need = r
        if self.mu1 > 0:
            need = min(need, (r - self.mu2) / self.mu1)
        elif self.mu2 >= r:
            need = 0.0
        return need if need > 0 else 0.0

    # -- whole-route evaluation ------------------------------------------------
    def length(self, stops: Sequence[int]) -> float:
        d = self.d
        prev, total = self.o, 0.0
        for n in stops:
            total += d[prev][n]
            prev = n
        return total + d[prev][self.o2]

    def demand(self, stops: Iterable[int]) -> float:
        w = self.w
        return sum(w[n] for n in stops)

    def leave(self, stops: Sequence[int]) -> Optional[list[float]]:
        """Departure range at every stop, or None if some arrival is negative."""
        d, station = self.d, self.station
        b, prev = self.start, self.o
        out = []
        for n in stops:
            b -= d[prev][n]
            if b < -EPS:
                return None
            if station[n]:
                b = self.recharge(b if b > 0 else 0.0)
            out.append(b)
            prev = n
        return out

    def first_failure(self, stops: Sequence[int]) -> int:
        """Index of the first negative arrival (len(stops) means o'), or -1."""
        d, station = self.d, self.station
        b, prev = self.start, self.o
        for k, n in enumerate(stops):
            b -= d[prev][n]
            if b < -EPS:
                return k
            if station[n]:
                b = self.recharge(b if b > 0 else 0.0)
            prev = n
        if b - d[prev][self.o2] < -EPS:
            return len(stops)
        return -1

    def feasible(self, stops: Sequence[int]) -> bool:
        return self.first_failure(stops) < 0

    def need(self, stops: Sequence[int]) -> list[float]:
        """Minimal arrival range per stop; element ``len(stops)`` is o' (0)."""
        d, station = self.d, self.station
        out = [0.0] * (len(stops) + 1)
        nxt, req = self.o2, 0.0
        for k in range(len(stops) - 1, -1, -1):
            n = stops[k]
            dep = d[n][nxt] + req
            if station[n]:
                req = self.need_before_charge(dep)
            else:
                req = dep if dep <= self.dmax + EPS else INF
            out[k] = req
            nxt = n
        return out

    # -- repair ---------------------------------------------------------------------
    def fix_first(self, stops: Sequence[int], allowed: Sequence[int]):
        """Insert one station so that the first negative arrival disappears.

        The station goes after the last charging point and before the failure,
        choosing the smallest detour (later position on ties). Returns
        ``(new_stops, detour_km)``, ``(stops, 0.0)`` if already feasible, or
        None when no station in ``allowed`` helps.
        """
        stops = list(stops)
        k = self.first_failure(stops)
        if k < 0:
            return stops, 0.0
        d = self.d
        used = set(stops)
        last = -1
        for q in range(k):
            if self.station[stops[q]]:
                last = q
        leave = self.leave(stops[:k]) or []
        path = stops + [self.o2]
        # tail[q]: distance from path[q] to path[k] along the route
        tail = [0.0] * (k + 1)
        for q in range(k - 1, -1, -1):
            tail[q] = tail[q + 1] + d[path[q]][path[q + 1]]
        best = None
        for q in range(last + 1, k + 1):
            prev = self.o if q == 0 else stops[q - 1]
            b = self.start if q == 0 else leave[q - 1]
            nxt = path[q]
            for s in allowed:
                if s in used:
                    continue
                b1 = b - d[prev][s]
                if b1 < -EPS:
                    continue
                arr = self.recharge(b1 if b1 > 0 else 0.0) - d[s][nxt] - tail[q]
                if arr < -EPS:
                    continue
                detour = d[prev][s] + d[s][nxt] - d[prev][nxt]
                key = (detour, -q, s)
                if best is None or key < best[0]:
                    best = (key, q, s)
        if best is None:
            return None
        (detour, _, _), q, s = best
        stops.insert(q, s)
        return stops, detour

    def repair(self, stops: Sequence[int], allowed: Sequence[int]) -> Optional[list[int]]:
        """Insert stations from ``allowed`` until the route is range-feasible.

        Returns None if some failure cannot be fixed.
        """
        stops = list(stops)
        for _ in range(len(allowed) + 1):
            if self.feasible(stops):
                return stops
            fixed = self.fix_first(stops, allowed)
            if fixed is None:
                return None
            stops = fixed[0]
        return stops if self.feasible(stops) else None

    def repair_partial(self, stops: Sequence[int], allowed: Sequence[int]):
        """Apply ``fix_first`` while it succeeds; returns (stops, feasible)."""
        stops = list(stops)
        while True:
            if self.feasible(stops):
                return stops, True
            fixed = self.fix_first(stops, allowed)
            if fixed is None:
                return stops, False
            stops = fixed[0]

    def insert_repaired(self, stops: Sequence[int], c: int, allowed: Sequence[int]):
        """Cheapest insertion of ``c`` at any position followed by ``repair``.

        Slower than ``best_insertion`` but may add several stations. Returns
        ``(new_stops, delta_km)`` or None.
        """
        base = self.length(stops)
        best = None
        for p in range(len(stops) + 1):
            trial = self.repair(list(stops[:p]) + [c] + list(stops[p:]), allowed)
            if trial is None:
                continue
            trial = self.cleanup(trial)
            delta = self.length(trial) - base
            if best is None or delta < best[1] - EPS:
                best = (trial, delta)
        return best

    def cleanup(self, stops: Sequence[int]) -> list[int]:
        """Drop stations the route can do without, largest saving first."""
        stops = list(stops)
        d = self.d
        while True:
            cands = []
            for q, n in enumerate(stops):
                if not self.station[n]:
                    continue
                prev = self.o if q == 0 else stops[q - 1]
                nxt = self.o2 if q == len(stops) - 1 else stops[q + 1]
                cands.append((d[prev][n] + d[n][nxt] - d[prev][nxt], q))
            for _, q in sorted(cands, key=lambda t: (-t[0], t[1])):
                trial = stops[:q] + stops[q + 1:]
                if self.feasible(trial):
                    stops = trial
                    break
            else:
                return stops

    # -- insertion of one customer ----------------------------------------------
    def best_insertion(self, stops: Sequence[int], leave: Sequence[float], need: Sequence[float],
                       c: int, stations: Sequence[int] = ()):
        """Cheapest range-feasible way to insert customer ``c``.

        Returns ``(delta_km, position, inserted_nodes)`` or None. When the
        direct insertion fails at every position, a single station from
        ``stations`` may be placed before or after ``c``.
        """
        d = self.d
        best = None
        n = len(stops)
        for p in range(n + 1):
            prev = self.o if p == 0 else stops[p - 1]
            nxt = self.o2 if p == n else stops[p]
            b = self.start if p == 0 else leave[p - 1]
            a = b - d[prev][c]
            if a < -EPS or a - d[c][nxt] < need[p] - EPS:
                continue
            delta = d[prev][c] + d[c][nxt] - d[prev][nxt]
            if best is None or delta < best[0]:
                best = (delta, p, (c,))
        if best is not None or not stations:
            return best
        used = set(stops)
        for p in range(n + 1):
            prev = self.o if p == 0 else stops[p - 1]
            nxt = self.o2 if p == n else stops[p]
            b = self.start if p == 0 else leave[p - 1]
            base = d[prev][nxt]
            a_direct = b - d[prev][c]
            for s in stations:
                if s in used:
                    continue
                # prev -> s -> c -> nxt
                b1 = b - d[prev][s]
                if b1 >= -EPS:
                    a = self.recharge(b1 if b1 > 0 else 0.0) - d[s][c]
                    if a >= -EPS and a - d[c][nxt] >= need[p] - EPS:
                        delta = d[prev][s] + d[s][c] + d[c][nxt] - base
                        if best is None or delta < best[0]:
                            best = (delta, p, (s, c))
                # prev -> c -> s -> nxt
                if a_direct >= -EPS:
                    b1 = a_direct - d[c][s]
                    if b1 >= -EPS and self.recharge(b1 if b1 > 0 else 0.0) - d[s][nxt] >= need[p] - EPS:
                        delta = d[prev][c] + d[c][s] + d[s][nxt] - base
                        if best is None or delta < best[0]:
                            best = (delta, p, (c, s))
        return best
