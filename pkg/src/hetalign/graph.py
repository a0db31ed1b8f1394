"""Attributed heterogeneous social networks and aligned network pairs.

A network has two entity kinds (users, posts), two attribute kinds
(locations, timestamps) and four directed relations::

    follow  : user -> user
    write   : user -> post
    checkin : post -> location
    at      : post -> timestamp

Identifiers are kept as strings and re-indexed densely in declaration order,
so user ``i`` is always the ``i``-th user row of the node file.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

logger = logging.getLogger(__name__)

NODE_KINDS = ("user", "post", "location", "timestamp")
# relation -> (source kind, target kind)
RELATIONS = {
    "follow": ("user", "user"),
    "write": ("user", "post"),
    "checkin": ("post", "location"),
    "at": ("post", "timestamp"),
}
DEFAULT_TIMESTAMP_BUCKET = 3600.0


class ParseError(ValueError):
    """Malformed input line."""

    def __init__(self, path, lineno, message):
        super().__init__(f"{path}:{lineno}: {message}")
        self.path = path
        self.lineno = lineno


class ValidationError(ValueError):
    """Input violates a structural invariant (dangling edge, one-to-one, ...)."""


def _edge_array(pairs) -> np.ndarray:
    arr = np.asarray(list(pairs), dtype=np.int64).reshape(-1, 2)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class HeterogeneousNetwork:
    """Immutable attributed heterogeneous network.

    Edge arrays hold dense indices, shape ``(m, 2)``. Use :meth:`build` to
    construct from identifiers with validation and de-duplication.
    """

    users: tuple[str, ...]
    posts: tuple[str, ...] = ()
    locations: tuple[str, ...] = ()
    timestamps: tuple[str, ...] = ()
    follow_edges: np.ndarray = field(default_factory=lambda: _edge_array([]))
    write_edges: np.ndarray = field(default_factory=lambda: _edge_array([]))
    checkin_edges: np.ndarray = field(default_factory=lambda: _edge_array([]))
    at_edges: np.ndarray = field(default_factory=lambda: _edge_array([]))

    def __post_init__(self):
        for kind in NODE_KINDS:
            ids = getattr(self, kind + "s")
            if len(set(ids)) != len(ids):
                raise ValidationError(f"duplicate {kind} identifier")
        for rel, (src, dst) in RELATIONS.items():
            edges = _edge_array(getattr(self, rel + "_edges"))
            object.__setattr__(self, rel + "_edges", edges)
            n_src, n_dst = self.count(src), self.count(dst)
            if edges.size:
                bad = (edges[:, 0] < 0) | (edges[:, 0] >= n_src) | (edges[:, 1] < 0) | (edges[:, 1] >= n_dst)
                if bad.any():
                    i, j = edges[np.argmax(bad)]
                    raise ValidationError(f"{rel} edge ({i}, {j}) references a missing {src}/{dst}")
                if len(np.unique(edges, axis=0)) != len(edges):
                    raise ValidationError(f"duplicate {rel} edges")

    # -- construction -----------------------------------------------------

    @classmethod
    def build(
        cls,
        users: Iterable[str],
        posts: Iterable[str] = (),
        locations: Iterable[str] = (),
        timestamps: Iterable[str] = (),
        follow: Iterable[tuple[str, str]] = (),
        write: Iterable[tuple[str, str]] = (),
        checkin: Iterable[tuple[str, str]] = (),
        at: Iterable[tuple[str, str]] = (),
    ) -> "HeterogeneousNetwork":
        """Build from identifier lists and identifier edge pairs.

        Duplicate edges are dropped with a warning, as are self-follows.
        Unknown endpoints raise :class:`ValidationError` naming the edge.
        """
        nodes = {
            "user": tuple(str(u) for u in users),
            "post": tuple(str(p) for p in posts),
            "location": tuple(str(x) for x in locations),
            "timestamp": tuple(str(t) for t in timestamps),
        }
        index = {kind: {v: i for i, v in enumerate(ids)} for kind, ids in nodes.items()}
        edges = {}
        for rel, pairs in (("follow", follow), ("write", write), ("checkin", checkin), ("at", at)):
            src, dst = RELATIONS[rel]
            seen = set()
            out = []
            for a, b in pairs:
                a, b = str(a), str(b)
                try:
                    key = (index[src][a], index[dst][b])
                except KeyError:
                    raise ValidationError(f"{rel} edge {a!r} -> {b!r}: endpoint is not a declared {src}/{dst}") from None
                if rel == "follow" and key[0] == key[1]:
                    logger.warning("dropping self-follow of user %r", a)
                    continue
                if key in seen:
                    logger.warning("dropping duplicate %s edge %r -> %r", rel, a, b)
                    continue
                seen.add(key)
                out.append(key)
            edges[rel + "_edges"] = _edge_array(out)
        return cls(nodes["user"], nodes["post"], nodes["location"], nodes["timestamp"], **edges)

    # -- accessors --------------------------------------------------------

    def count(self, kind: str) -> int:
        return len(getattr(self, kind + "s"))

    @property
    def n_users(self) -> int:
        return len(self.users)

    @cached_property
    def user_index(self) -> dict[str, int]:
        return {u: i for i, u in enumerate(self.users)}

    def _relation(self, rel: str) -> sp.csr_matrix:
        src, dst = RELATIONS[rel]
        edges = getattr(self, rel + "_edges")
        data = np.ones(len(edges))
        return sp.csr_matrix((data, (edges[:, 0], edges[:, 1])), shape=(self.count(src), self.count(dst)))

    @cached_property
    def follow(self) -> sp.csr_matrix:
        """Binary user x user follow adjacency."""
        return self._relation("follow")

    @cached_property
    def write(self) -> sp.csr_matrix:
        return self._relation("write")

    @cached_property
    def checkin(self) -> sp.csr_matrix:
        return self._relation("checkin")

    @cached_property
    def at(self) -> sp.csr_matrix:
        return self._relation("at")

    def edge_ids(self, rel: str) -> list[tuple[str, str]]:
        """Typed edge list of ``rel`` as identifier pairs."""
        src, dst = RELATIONS[rel]
        a, b = getattr(self, src + "s"), getattr(self, dst + "s")
        return [(a[i], b[j]) for i, j in getattr(self, rel + "_edges")]

    def subnetwork(self, user_indices: Sequence[int]) -> "HeterogeneousNetwork":
        """Sub-network induced by ``user_indices``.

        Keeps follow edges among the selected users, every post they wrote,
        and the locations/timestamps those posts attach to. Users appear in
        the order given.
        """
        keep = [int(u) for u in user_indices]
        users = [self.users[u] for u in keep]
        chosen = set(keep)
        write = [(u, p) for u, p in self.edge_ids("write") if self.user_index[u] in chosen]
        post_ids = {p for _, p in write}
        posts = [p for p in self.posts if p in post_ids]
        checkin = [(p, x) for p, x in self.edge_ids("checkin") if p in post_ids]
        at = [(p, t) for p, t in self.edge_ids("at") if p in post_ids]
        loc_ids = {x for _, x in checkin}
        ts_ids = {t for _, t in at}
        follow = [(a, b) for a, b in self.edge_ids("follow")
                  if self.user_index[a] in chosen and self.user_index[b] in chosen]
        return HeterogeneousNetwork.build(
            users,
            posts,
            [x for x in self.locations if x in loc_ids],
            [t for t in self.timestamps if t in ts_ids],
            follow=follow,
            write=write,
            checkin=checkin,
            at=at,
        )


@dataclass(frozen=True, eq=False)
class AlignedPair:
    """Two networks plus the labeled (known) anchor links between their users.

    ``labeled_anchors`` holds ``(net1 user index, net2 user index)`` pairs,
    sorted, and obeys the one-to-one constraint.
    """

    net1: HeterogeneousNetwork
    net2: HeterogeneousNetwork
    labeled_anchors: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        anchors = tuple(sorted((int(a), int(b)) for a, b in self.labeled_anchors))
        object.__setattr__(self, "labeled_anchors", anchors)
        validate_anchors(anchors, self.net1.n_users, self.net2.n_users)

    def anchor_matrix(self) -> sp.csr_matrix:
        """Binary ``|U1| x |U2|`` matrix of the labeled anchors."""
        n1, n2 = self.net1.n_users, self.net2.n_users
        if not self.labeled_anchors:
            return sp.csr_matrix((n1, n2))
        rows, cols = zip(*self.labeled_anchors)
        return sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n1, n2))

    def with_anchors(self, anchors: Iterable[tuple[int, int]]) -> "AlignedPair":
        return AlignedPair(self.net1, self.net2, tuple(anchors))


def validate_anchors(anchors, n1: int, n2: int) -> None:
    left, right = set(), set()
    for a, b in anchors:
        if not (0 <= a < n1 and 0 <= b < n2):
            raise ValidationError(f"anchor ({a}, {b}) out of range")
        if a in left:
            raise ValidationError(f"one-to-one violation: net1 user {a} has several anchors")
        if b in right:
            raise ValidationError(f"one-to-one violation: net2 user {b} has several anchors")
        left.add(a)
        right.add(b)


# -- TSV I/O -----------------------------------------------------------------


def _rows(path: Path, ncols: int):
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n").rstrip("\r")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != ncols:
                raise ParseError(path, lineno, f"expected {ncols} tab-separated columns, got {len(parts)}")
            yield lineno, parts


def bucket_timestamp(raw: str, width: float | None) -> str:
    """Discretize a numeric timestamp to the start of its bucket.

    Non-numeric identifiers pass through unchanged. Bucketing is idempotent.
    """
    if width is None:
        return raw
    try:
        t = float(raw)
    except ValueError:
        return raw
    if not math.isfinite(t):
        return raw
    return str(int(math.floor(t / width) * width))


def load_network(node_file, edge_file, timestamp_bucket: float | None = DEFAULT_TIMESTAMP_BUCKET) -> HeterogeneousNetwork:
    """Read a network from a node TSV (``kind, id``) and edge TSV (``relation, src, dst``).

    Numeric timestamp identifiers are bucketed to ``timestamp_bucket``
    seconds (``None`` keeps them verbatim); timestamps landing in the same
    bucket become one attribute node.
    """
    node_file, edge_file = Path(node_file), Path(edge_file)
    nodes: dict[str, list[str]] = {k: [] for k in NODE_KINDS}
    seen: dict[str, set[str]] = {k: set() for k in NODE_KINDS}
    for lineno, (kind, ident) in _rows(node_file, 2):
        if kind not in nodes:
            raise ParseError(node_file, lineno, f"unknown node kind {kind!r}")
        if kind == "timestamp":
            ident = bucket_timestamp(ident, timestamp_bucket)
        elif ident in seen[kind]:
            raise ParseError(node_file, lineno, f"duplicate {kind} {ident!r}")
        if ident not in seen[kind]:
            seen[kind].add(ident)
            nodes[kind].append(ident)

    edges: dict[str, list[tuple[str, str]]] = {r: [] for r in RELATIONS}
    for lineno, (rel, src, dst) in _rows(edge_file, 3):
        if rel not in edges:
            raise ParseError(edge_file, lineno, f"unknown relation {rel!r}")
        if rel == "at":
            dst = bucket_timestamp(dst, timestamp_bucket)
        edges[rel].append((src, dst))
    return HeterogeneousNetwork.build(
        nodes["user"], nodes["post"], nodes["location"], nodes["timestamp"], **edges
    )


def write_network(net: HeterogeneousNetwork, node_file, edge_file) -> None:
    with open(node_file, "w", encoding="utf-8") as fh:
        for kind in NODE_KINDS:
            for ident in getattr(net, kind + "s"):
                fh.write(f"{kind}\t{ident}\n")
    with open(edge_file, "w", encoding="utf-8") as fh:
        for rel in RELATIONS:
            for a, b in net.edge_ids(rel):
                fh.write(f"{rel}\t{a}\t{b}\n")


def load_anchors(anchor_file, net1: HeterogeneousNetwork, net2: HeterogeneousNetwork) -> list[tuple[int, int]]:
    """Read ``user_id_net1, user_id_net2`` rows as index pairs (no one-to-one check)."""
    anchor_file = Path(anchor_file)
    out = []
    for lineno, (a, b) in _rows(anchor_file, 2):
        try:
            out.append((net1.user_index[a], net2.user_index[b]))
        except KeyError:
            raise ParseError(anchor_file, lineno, f"anchor ({a!r}, {b!r}) references an unknown user") from None
    return out


def load_aligned_pair(net1: HeterogeneousNetwork, net2: HeterogeneousNetwork, anchor_file) -> AlignedPair:
    return AlignedPair(net1, net2, tuple(load_anchors(anchor_file, net1, net2)))


def write_anchors(anchors, net1: HeterogeneousNetwork, net2: HeterogeneousNetwork, anchor_file) -> None:
    with open(anchor_file, "w", encoding="utf-8") as fh:
        for a, b in sorted(anchors):
            fh.write(f"{net1.users[a]}\t{net2.users[b]}\n")
