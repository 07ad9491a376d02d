"""The layout SWAP-cost objective and an exact brute-force solver.

Two cost modes are supported:

* ``literal``: an interaction placed at distance d costs 2*d SWAPs
  (the round-trip proxy), so even adjacent placements cost 2.
* ``adjacent-free``: 2*(d-1), so adjacent placements are free. This is the
  default for benchmarking since it makes embeddable circuits reach cost 0.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .circuit import ProgramGraph
from .errors import (
    ConstraintViolationError,
    IncompleteLayoutError,
    SearchSpaceTooLargeError,
)
from .topology import CouplingGraph, DistanceMatrix

UNASSIGNED = -1

COST_MODES = ("literal", "adjacent-free")


@dataclass
class Layout:
    """Partial or total injective map logical -> physical."""

    assign: np.ndarray

    def __post_init__(self):
        self.assign = np.asarray(self.assign, dtype=np.int64)

    @classmethod
    def empty(cls, n):
        return cls(np.full(n, UNASSIGNED, dtype=np.int64))

    @property
    def n(self):
        return len(self.assign)

    def is_total(self):
        return bool((self.assign != UNASSIGNED).all())

    def is_injective(self):
        used = self.assign[self.assign != UNASSIGNED]
        return len(used) == len(set(used.tolist()))

    def validate(self, num_physical=None):
        if not self.is_total():
            raise IncompleteLayoutError(
                f"{int((self.assign == UNASSIGNED).sum())} logical qubits unassigned"
            )
        if not self.is_injective():
            raise ConstraintViolationError("duplicate physical target in layout")
        if num_physical is not None and (
            (self.assign < 0).any() or (self.assign >= num_physical).any()
        ):
            raise ConstraintViolationError(
                f"assignment out of range [0, {num_physical})"
            )

    def copy(self):
        return Layout(self.assign.copy())

    def to_dict(self, num_physical=None):
        d = {"n": self.n, "assign": self.assign.tolist()}
        if num_physical is not None:
            d["N"] = num_physical
        return d

    @classmethod
    def from_dict(cls, data):
        return cls(np.asarray(data["assign"], dtype=np.int64))

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def save(self, path, num_physical=None):
        with open(path, "w") as fh:
            json.dump(self.to_dict(num_physical), fh)


@dataclass(frozen=True)
class CostModel:
    mode: str
    distance: DistanceMatrix

    def __post_init__(self):
        if self.mode not in COST_MODES:
            raise ValueError(f"unknown cost mode '{self.mode}'")

    @classmethod
    def for_graph(cls, cg: CouplingGraph, mode="adjacent-free"):
        return cls(mode, cg.distances)

    def edge_cost(self, dist):
        if self.mode == "literal":
            return 2.0 * dist
        return 2.0 * (dist - 1)


def fast_cost_fn(pg: ProgramGraph, cm: CostModel):
    """Closure evaluating the SWAP cost of a total assignment array.

    Skips layout validation; callers own the invariants. Used in the hot
    loops of local search and brute force.
    """
    ei, ej = pg.edge_arrays()
    d = cm.distance.entries
    if cm.mode == "literal":
        def cost(assign):
            return float(2 * d[assign[ei], assign[ej]].sum())
    else:
        def cost(assign):
            return float(2 * (d[assign[ei], assign[ej]] - 1).sum())
    return cost


def swap_cost(layout: Layout, pg: ProgramGraph, cm: CostModel) -> float:
    layout.validate(cm.distance.n)
    if layout.n != pg.num_logical:
        raise ConstraintViolationError(
            f"layout covers {layout.n} qubits, program graph has {pg.num_logical}"
        )
    return fast_cost_fn(pg, cm)(layout.assign)


def reward(layout: Layout, pg: ProgramGraph, cm: CostModel) -> float:
    return -swap_cost(layout, pg, cm)


def brute_force_optimal(pg: ProgramGraph, cg: CouplingGraph, cm: CostModel,
                        cap=10**7):
    """Minimum-cost total injective layout by branch-and-bound enumeration.

    Ties break to the lexicographically smallest assignment array, which the
    ascending-seat DFS with strict-improvement acceptance yields for free.
    """
    n, big_n = pg.num_logical, cg.num_physical
    if n > big_n:
        raise ConstraintViolationError(f"n={n} exceeds N={big_n}")
    space = math.perm(big_n, n)
    if space > cap:
        raise SearchSpaceTooLargeError(
            f"{space} injections exceed the cap of {cap}"
        )

    d = cm.distance.entries.astype(np.float64)
    if cm.mode == "literal":
        edge_cost = 2.0 * d
    else:
        edge_cost = 2.0 * (d - 1)

    # edges from qubit t back to already-placed qubits, for incremental cost
    back_edges = [[] for _ in range(n)]
    for i, j in pg.edges:
        lo, hi = min(i, j), max(i, j)
        back_edges[hi].append(lo)

    assign = np.full(n, UNASSIGNED, dtype=np.int64)
    used = np.zeros(big_n, dtype=bool)
    best = {"cost": math.inf, "assign": None}

    def dfs(t, partial):
        if partial >= best["cost"]:
            return
        if t == n:
            best["cost"] = partial
            best["assign"] = assign.copy()
            return
        for seat in range(big_n):
            if used[seat]:
                continue
            inc = sum(edge_cost[assign[q], seat] for q in back_edges[t])
            if partial + inc >= best["cost"]:
                continue
            assign[t] = seat
            used[seat] = True
            dfs(t + 1, partial + inc)
            used[seat] = False
            assign[t] = UNASSIGNED

    dfs(0, 0.0)
    return Layout(best["assign"]), best["cost"]
