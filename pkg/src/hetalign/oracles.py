"""Naive reference computations for tests.

Nothing here touches the sparse-matrix code paths: meta paths are counted
by walking edge lists hop by hop, proximities by explicit loops, labelings
by exhaustive search. Every routine refuses inputs above its budget.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass

import numpy as np


class BudgetExceeded(ValueError):
    pass


@dataclass(frozen=True)
class OracleBudget:
    max_users: int = 20
    max_edges: int = 60
    max_candidates: int = 26


DEFAULT_BUDGET = OracleBudget()

# hop = (network, relation, direction); "anchor" / "same-<attr>" cross networks
_TEMPLATES = {
    "PI1": [(0, "follow", 1)],
    "PI2": [(0, "follow", 1), (0, "follow", 1)],
    "PI3": [(0, "follow", 1), (0, "follow", -1)],
    "PI4": [(0, "follow", -1), (0, "follow", 1)],
    "PI5": [(0, "write", 1), (0, "at", 1), (0, "at", -1), (0, "write", -1)],
    "PI6": [(0, "write", 1), (0, "checkin", 1), (0, "checkin", -1), (0, "write", -1)],
    "PA1": [(1, "follow", 1), "anchor", (2, "follow", -1)],
    "PA2": [(1, "follow", -1), "anchor", (2, "follow", 1)],
    "PA3": [(1, "follow", 1), "anchor", (2, "follow", 1)],
    "PA4": [(1, "follow", -1), "anchor", (2, "follow", -1)],
    "PA5": [(1, "write", 1), (1, "at", 1), "same-timestamp", (2, "at", -1), (2, "write", -1)],
    "PA6": [(1, "write", 1), (1, "checkin", 1), "same-location", (2, "checkin", -1), (2, "write", -1)],
}


def _neighbours(net, rel, direction):
    table = defaultdict(list)
    for a, b in getattr(net, rel + "_edges").tolist():
        if direction == 1:
            table[a].append(b)
        else:
            table[b].append(a)
    return table


def _check_budget(net, budget):
    n_edges = sum(len(getattr(net, r + "_edges")) for r in ("follow", "write", "checkin", "at"))
    if net.n_users > budget.max_users or n_edges > budget.max_edges:
        raise BudgetExceeded(f"{net.n_users} users / {n_edges} edges exceeds the oracle budget")


class _Walker:
    """Hop-by-hop expansion of one meta-path template."""

    def __init__(self, source, path, budget):
        self.path = getattr(path, "name", path)
        self.template = _TEMPLATES[self.path]
        self.intra = self.path.startswith("PI")
        self.source = source
        nets = {0: source} if self.intra else {1: source.net1, 2: source.net2}
        for net in nets.values():
            _check_budget(net, budget)
        self.tables = {}
        for hop in self.template:
            if isinstance(hop, tuple):
                which, rel, direction = hop
                self.tables[hop] = _neighbours(nets[which], rel, direction)
        self.anchors = defaultdict(list)
        if not self.intra:
            for a, b in source.labeled_anchors:
                self.anchors[a].append(b)

    def _step(self, node, hop):
        if hop == "anchor":
            return self.anchors[node]
        if isinstance(hop, str):
            kind = hop.split("-", 1)[1] + "s"
            value = getattr(self.source.net1, kind)[node]
            return [j for j, other in enumerate(getattr(self.source.net2, kind)) if other == value]
        return self.tables[hop][node]

    def endpoints(self, x):
        """Multiset of walk endpoints starting from ``x``."""
        counts = defaultdict(int)

        def walk(node, depth):
            if depth == len(self.template):
                counts[node] += 1
                return
            for nxt in self._step(node, self.template[depth]):
                walk(nxt, depth + 1)

        walk(x, 0)
        if self.intra:
            counts.pop(x, None)
        return counts


def enumerate_paths(source, path: str, x: int, y: int, budget: OracleBudget = DEFAULT_BUDGET) -> int:
    """Count instances of meta path ``path`` from user ``x`` to user ``y`` by DFS.

    ``source`` is a network for ``PI*`` and an aligned pair for ``PA*``.
    Intra paths never pair a user with itself.
    """
    return _Walker(source, path, budget).endpoints(x).get(y, 0)


def count_table(source, path: str, budget: OracleBudget = DEFAULT_BUDGET) -> np.ndarray:
    """Dense table of :func:`enumerate_paths` over every user pair."""
    walker = _Walker(source, path, budget)
    if walker.intra:
        n1 = n2 = source.n_users
    else:
        n1, n2 = source.net1.n_users, source.net2.n_users
    out = np.zeros((n1, n2), dtype=np.int64)
    for x in range(n1):
        for y, c in walker.endpoints(x).items():
            out[x, y] = c
    return out


def diagram_table(source, factors, budget: OracleBudget = DEFAULT_BUDGET) -> np.ndarray:
    """Diagram instances: one instance per tuple of factor-path instances on the same endpoints.

    ``factors`` is a list of ``(path name, transposed)``.
    """
    out = None
    for name, transposed in factors:
        t = count_table(source, name, budget)
        t = t.T if transposed else t
        out = t.copy() if out is None else out * t
    return out


def intra_proximity(tables: dict[str, np.ndarray], weights: dict[str, float]) -> np.ndarray:
    """IntraMD-Pro by direct evaluation over user pairs."""
    n = next(iter(tables.values())).shape[0]
    out = np.zeros((n, n))
    for name, D in tables.items():
        for x in range(n):
            for y in range(n):
                denom = sum(D[x, m] for m in range(n)) + sum(D[y, m] for m in range(n))
                if denom:
                    out[x, y] += weights[name] * (D[x, y] + D[y, x]) / denom
    return out


def inter_proximity(tables: dict[str, np.ndarray], weights: dict[str, float]) -> np.ndarray:
    """InterMD-Pro by direct evaluation over user pairs."""
    n1, n2 = next(iter(tables.values())).shape
    out = np.zeros((n1, n2))
    for name, D in tables.items():
        for x in range(n1):
            for y in range(n2):
                denom = sum(D[x, m] for m in range(n2)) + sum(D[m, y] for m in range(n1))
                if denom:
                    out[x, y] += weights[name] * 2 * D[x, y] / denom
    return out


def _column_owner(A):
    A = np.asarray(A.todense() if hasattr(A, "todense") else A)
    return [int(np.flatnonzero(A[:, j])[0]) for j in range(A.shape[1])]


def exhaustive_alignment(X, labeled_mask, A1, A2, w, budget: OracleBudget = DEFAULT_BUDGET) -> np.ndarray:
    """Feasible 0/1 labeling minimizing ``||X w - y||^2`` by enumerating all matchings."""
    scores = np.asarray(X) @ np.asarray(w)
    n = len(scores)
    if n > budget.max_candidates:
        raise BudgetExceeded(f"{n} candidates exceeds the oracle budget")
    left, right = _column_owner(A1), _column_owner(A2)
    best = [None, np.inf]

    def search(j, y, used_l, used_r):
        if j == n:
            cost = sum((scores[i] - y[i]) ** 2 for i in range(n))
            if cost < best[1]:
                best[0], best[1] = list(y), cost
            return
        free = left[j] not in used_l and right[j] not in used_r
        if labeled_mask[j]:
            if not free:
                return
            y[j] = 1
            search(j + 1, y, used_l | {left[j]}, used_r | {right[j]})
            y[j] = 0
            return
        search(j + 1, y, used_l, used_r)
        if free:
            y[j] = 1
            search(j + 1, y, used_l | {left[j]}, used_r | {right[j]})
            y[j] = 0

    search(0, [0] * n, frozenset(), frozenset())
    if best[0] is None:
        raise ValueError("labeled candidates are infeasible")
    return np.array(best[0], dtype=np.int64)


def finite_difference_gradient(objective, point: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Central differences of a scalar ``objective`` at every entry of ``point``."""
    if h <= 0:
        raise ValueError("h must be > 0")
    point = np.array(point, dtype=float)
    grad = np.zeros_like(point)
    for idx in np.ndindex(point.shape):
        orig = point[idx]
        point[idx] = orig + h
        up = objective(point)
        point[idx] = orig - h
        down = objective(point)
        point[idx] = orig
        grad[idx] = (up - down) / (2 * h)
    return grad
