"""Weighted, normalized meta-diagram proximity between users.

Intra-network score of a diagram for users ``x, y``::

    (|D(x, y)| + |D(y, x)|) / (|D(x, .)| + |D(y, .)|)

Inter-network score for ``x`` in network 1 and ``y`` in network 2::

    2 |D(x, y)| / (|D(x, .)| + |D(., y)|)

Both are combined over diagrams with weights summing to one. A pair whose
denominator is zero scores 0.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np
import scipy.sparse as sp

from .graph import AlignedPair, HeterogeneousNetwork
from .metadiagram import count_diagram, get_diagram

DEFAULT_INTRA_DIAGRAMS = ("PI1", "PI3", "PI4", "PI5", "PI6", "PSI_I1")
DEFAULT_INTER_DIAGRAMS = ("PA1", "PA2", "PA5", "PA6", "PSI_A1", "PSI_A2")


@dataclass(frozen=True)
class DiagramWeights:
    """Nonnegative diagram weights summing to one."""

    weights: Mapping[str, float]

    def __post_init__(self):
        w = dict(self.weights)
        if not w:
            raise ValueError("empty weight map")
        if any(v < 0 or not np.isfinite(v) for v in w.values()):
            raise ValueError("diagram weights must be finite and nonnegative")
        if abs(sum(w.values()) - 1.0) > 1e-9:
            raise ValueError(f"diagram weights sum to {sum(w.values())!r}, expected 1")
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, names: Iterable[str]) -> "DiagramWeights":
        names = list(dict.fromkeys(names))
        return cls({n: 1.0 / len(names) for n in names})

    def check(self, diagrams: Iterable[str]) -> None:
        if set(diagrams) != set(self.weights):
            raise ValueError(
                f"weights cover {sorted(self.weights)} but diagrams are {sorted(set(diagrams))}"
            )


def _ratio(numer: sp.spmatrix, denom_row: np.ndarray, denom_col: np.ndarray) -> sp.csr_matrix:
    coo = sp.coo_matrix(numer)
    denom = denom_row[coo.row] + denom_col[coo.col]
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = np.where(denom > 0, coo.data / denom, 0.0)
    out = sp.csr_matrix((vals, (coo.row, coo.col)), shape=numer.shape)
    out.eliminate_zeros()
    return out


def intra_scores(counts: sp.spmatrix) -> sp.csr_matrix:
    """Single-diagram intra proximity from a square count matrix."""
    counts = sp.csr_matrix(counts, dtype=float)
    out_deg = np.asarray(counts.sum(axis=1)).ravel()
    return _ratio(counts + counts.T, out_deg, out_deg)


def inter_scores(counts: sp.spmatrix) -> sp.csr_matrix:
    """Single-diagram inter proximity from a ``|U1| x |U2|`` count matrix."""
    counts = sp.csr_matrix(counts, dtype=float)
    out_deg = np.asarray(counts.sum(axis=1)).ravel()
    in_deg = np.asarray(counts.sum(axis=0)).ravel()
    return _ratio(2.0 * counts, out_deg, in_deg)


def combine_scores(per_diagram: Mapping[str, sp.csr_matrix], weights: DiagramWeights, shape) -> sp.csr_matrix:
    total = sp.csr_matrix(shape, dtype=float)
    for name in sorted(per_diagram):
        total = total + weights.weights[name] * per_diagram[name]
    return total


def _resolve(diagrams, weights, scope):
    diagrams = list(dict.fromkeys(diagrams))
    for name in diagrams:
        if get_diagram(name).scope != scope:
            raise ValueError(f"{name} is not an {scope}-network diagram")
    weights = DiagramWeights.uniform(diagrams) if weights is None else weights
    weights.check(diagrams)
    return diagrams, weights


def intra_diagram_scores(network: HeterogeneousNetwork, diagrams: Iterable[str]) -> dict[str, sp.csr_matrix]:
    cache: dict = {}
    return {name: intra_scores(count_diagram(network, name, cache)) for name in diagrams}


def inter_diagram_scores(pair: AlignedPair, diagrams: Iterable[str]) -> dict[str, sp.csr_matrix]:
    cache: dict = {}
    return {name: inter_scores(count_diagram(pair, name, cache)) for name in diagrams}


def intra_md_pro(
    network: HeterogeneousNetwork,
    diagrams: Iterable[str] = DEFAULT_INTRA_DIAGRAMS,
    weights: DiagramWeights | None = None,
) -> sp.csr_matrix:
    """IntraMD-Pro matrix: symmetric, zero diagonal, entries in [0, 1].

    ``weights`` defaults to uniform over ``diagrams`` and must otherwise
    cover exactly the requested diagrams.
    """
    diagrams, weights = _resolve(diagrams, weights, "intra")
    n = network.n_users
    return combine_scores(intra_diagram_scores(network, diagrams), weights, (n, n))


def inter_md_pro(
    pair: AlignedPair,
    diagrams: Iterable[str] = DEFAULT_INTER_DIAGRAMS,
    weights: DiagramWeights | None = None,
) -> sp.csr_matrix:
    """InterMD-Pro matrix of shape ``|U1| x |U2|``; anchor paths use the labeled anchors."""
    diagrams, weights = _resolve(diagrams, weights, "inter")
    shape = (pair.net1.n_users, pair.net2.n_users)
    return combine_scores(inter_diagram_scores(pair, diagrams), weights, shape)


def write_proximity(matrix, path) -> None:
    """Dump nonzero entries as ``row, col, value`` TSV triples, row-major."""
    coo = sp.coo_matrix(matrix)
    order = np.lexsort((coo.col, coo.row))
    with open(path, "w", encoding="utf-8") as fh:
        for k in order:
            fh.write(f"{coo.row[k]}\t{coo.col[k]}\t{float(coo.data[k])!r}\n")
