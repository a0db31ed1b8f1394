"""Pairing sub-networks across the two partitions by matching score."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MatchedPair:
    rank: int
    sub1: int
    sub2: int
    users1: tuple[int, ...]
    users2: tuple[int, ...]
    known_anchors: tuple[tuple[int, int], ...]
    m_score: float

    @property
    def n_candidates(self) -> int:
        return len(self.users1) * len(self.users2)


def m_score(users1, users2, anchors) -> float:
    """``|A|^2 / (|U1| |U2|)`` where ``A`` are the anchors with both ends inside.

    Empty user sets score 0.
    """
    users1, users2 = set(users1), set(users2)
    if not users1 or not users2:
        logger.debug("empty sub-network in m_score")
        return 0.0
    n = sum(1 for a, b in anchors if a in users1 and b in users2)
    return n * n / (len(users1) * len(users2))


def _members(labels, k):
    labels = np.asarray(labels)
    return [tuple(int(u) for u in np.flatnonzero(labels == c)) for c in range(k)]


def score_matrix(labels1, labels2, anchors, k: int) -> np.ndarray:
    """M-Score of every (cluster in network 1, cluster in network 2) pair."""
    m1, m2 = _members(labels1, k), _members(labels2, k)
    labels1, labels2 = np.asarray(labels1), np.asarray(labels2)
    hits = np.zeros((k, k))
    for a, b in anchors:
        hits[labels1[a], labels2[b]] += 1
    sizes = np.outer([len(u) for u in m1], [len(u) for u in m2]).astype(float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(sizes > 0, hits * hits / np.where(sizes > 0, sizes, 1.0), 0.0)


def greedy_pairs(scores: np.ndarray, s: int) -> list[tuple[int, int]]:
    """Up to ``s`` one-to-one pairs taken in descending score.

    Ties are broken by ``(row, col)`` in lexicographic order.
    """
    rows, cols = scores.shape
    order = sorted(((-scores[i, j], i, j) for i in range(rows) for j in range(cols)))
    used1, used2, out = set(), set(), []
    for _, i, j in order:
        if len(out) >= s:
            break
        if i in used1 or j in used2:
            continue
        used1.add(i)
        used2.add(j)
        out.append((i, j))
    return out


def match_top_s(labels1, labels2, anchors, s: int, k: int | None = None) -> list[MatchedPair]:
    """Select the top-``s`` sub-network pairs, each cluster used at most once.

    ``labels1``/``labels2`` are per-user cluster ids, ``anchors`` the labeled
    anchor index pairs. Pairs come back in rank order.
    """
    if k is None:
        k = int(max(np.max(labels1, initial=-1), np.max(labels2, initial=-1))) + 1
    if s > k:
        raise ValueError(f"s={s} exceeds the number of clusters k={k}")
    anchors = [(int(a), int(b)) for a, b in anchors]
    scores = score_matrix(labels1, labels2, anchors, k)
    m1, m2 = _members(labels1, k), _members(labels2, k)
    pairs = []
    for rank, (i, j) in enumerate(greedy_pairs(scores, s)):
        u1, u2 = set(m1[i]), set(m2[j])
        known = tuple(sorted((a, b) for a, b in anchors if a in u1 and b in u2))
        pairs.append(MatchedPair(rank, i, j, m1[i], m2[j], known, float(scores[i, j])))
    return pairs


def coverage_ratio(pairs, test_anchors) -> float:
    """Fraction of held-out anchors with both endpoints inside one selected pair."""
    test_anchors = list(test_anchors)
    if not test_anchors:
        return 0.0
    covered = 0
    sets = [(set(p.users1), set(p.users2)) for p in pairs]
    for a, b in test_anchors:
        if any(a in u1 and b in u2 for u1, u2 in sets):
            covered += 1
    return covered / len(test_anchors)


def search_space(pairs) -> int:
    """Number of candidate links kept after pruning."""
    return sum(p.n_candidates for p in pairs)
