"""Meta-path and meta-diagram instance counts as sparse user x user matrices.

Intra-network paths (``PI*``) connect two users of one network; inter-network
paths (``PA*``) connect a user of network 1 to a user of network 2, either
through a labeled anchor link (``PA1``-``PA4``) or through a shared attribute
value (``PA5``, ``PA6``). A meta diagram joins several paths on the same
endpoint pair; its instance count is the elementwise product of the factor
counts.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import reduce

import numpy as np
import scipy.sparse as sp

from .graph import AlignedPair, HeterogeneousNetwork


class MetaPath(enum.Enum):
    """Catalogued meta paths: ``(scope, family, description)``."""

    PI1 = ("intra", "f", "U -follow-> U")
    PI2 = ("intra", "f", "U -follow-> U -follow-> U")
    PI3 = ("intra", "f", "U -follow-> U <-follow- U")
    PI4 = ("intra", "f", "U <-follow- U -follow-> U")
    PI5 = ("intra", "a", "U -write-> P -at-> T <-at- P <-write- U")
    PI6 = ("intra", "a", "U -write-> P -checkin-> L <-checkin- P <-write- U")
    PA1 = ("inter", "f", "U -follow-> U <-anchor-> U <-follow- U")
    PA2 = ("inter", "f", "U <-follow- U <-anchor-> U -follow-> U")
    PA3 = ("inter", "f", "U -follow-> U <-anchor-> U -follow-> U")
    PA4 = ("inter", "f", "U <-follow- U <-anchor-> U <-follow- U")
    PA5 = ("inter", "a", "U -write-> P -at-> T <-at- P <-write- U")
    PA6 = ("inter", "a", "U -write-> P -checkin-> L <-checkin- P <-write- U")

    @property
    def scope(self) -> str:
        return self.value[0]

    @property
    def family(self) -> str:
        return self.value[1]

    @property
    def uses_anchors(self) -> bool:
        return self.scope == "inter" and self.family == "f"


# (#social factors, #attribute factors) of admissible compositions
_COMPOSITION_CLASSES = {(1, 0), (0, 1), (2, 0), (0, 2), (1, 1), (1, 2), (2, 2)}


@dataclass(frozen=True)
class MetaDiagram:
    """A named Hadamard composition of meta paths.

    ``factors`` holds ``(path, transposed)``; a transposed intra factor walks
    the path from target back to source (e.g. the mutual-follow diagram).
    """

    name: str
    factors: tuple[tuple[MetaPath, bool], ...]

    def __post_init__(self):
        if not self.factors:
            raise ValueError("a meta diagram needs at least one factor")
        scopes = {p.scope for p, _ in self.factors}
        if len(scopes) != 1:
            raise ValueError(f"{self.name}: mixes intra and inter paths")
        if self.scope == "inter" and any(t for _, t in self.factors):
            raise ValueError(f"{self.name}: inter paths cannot be transposed")
        nf = sum(p.family == "f" for p, _ in self.factors)
        na = len(self.factors) - nf
        if (nf, na) not in _COMPOSITION_CLASSES:
            raise ValueError(f"{self.name}: ({nf} social, {na} attribute) is not a catalogued composition")

    @property
    def scope(self) -> str:
        return self.factors[0][0].scope

    @property
    def uses_anchors(self) -> bool:
        return any(p.uses_anchors for p, _ in self.factors)


def _d(*tags):
    return tuple((MetaPath[t.rstrip("'")], t.endswith("'")) for t in tags)


CATALOG: dict[str, MetaDiagram] = {
    **{p.name: MetaDiagram(p.name, ((p, False),)) for p in MetaPath},
    "PSI_I1": MetaDiagram("PSI_I1", _d("PI1", "PI1'")),
    "PSI_I2": MetaDiagram("PSI_I2", _d("PI5", "PI6")),
    "PSI_I3": MetaDiagram("PSI_I3", _d("PI1", "PI5", "PI6")),
    "PSI_A1": MetaDiagram("PSI_A1", _d("PA1", "PA2")),
    "PSI_A2": MetaDiagram("PSI_A2", _d("PA5", "PA6")),
    "PSI_A3": MetaDiagram("PSI_A3", _d("PA1", "PA5", "PA6")),
}


def get_diagram(name: str) -> MetaDiagram:
    """Look up a catalogued diagram, or parse an ad-hoc composition.

    Ad-hoc names join path tags with ``*``; a trailing ``'`` transposes an
    intra factor, e.g. ``"PI3*PI5"`` or ``"PI1*PI1'"``.
    """
    if name in CATALOG:
        return CATALOG[name]
    tags = name.split("*")
    try:
        return MetaDiagram(name, _d(*tags))
    except KeyError:
        raise ValueError(f"unknown meta diagram {name!r}") from None


def _zero_diagonal(m: sp.spmatrix) -> sp.csr_matrix:
    m = sp.csr_matrix(m, dtype=float, copy=True)
    m.setdiag(0)
    m.eliminate_zeros()
    return m


def _shared_values(a: tuple[str, ...], b: tuple[str, ...]) -> sp.csr_matrix:
    """Binary matrix pairing identical attribute identifiers across networks."""
    index = {v: j for j, v in enumerate(b)}
    pairs = [(i, index[v]) for i, v in enumerate(a) if v in index]
    rows = [i for i, _ in pairs]
    cols = [j for _, j in pairs]
    return sp.csr_matrix((np.ones(len(pairs)), (rows, cols)), shape=(len(a), len(b)))


def _intra(net: HeterogeneousNetwork, path: MetaPath) -> sp.csr_matrix:
    F, W = net.follow, net.write
    if path is MetaPath.PI1:
        m = F
    elif path is MetaPath.PI2:
        m = F @ F
    elif path is MetaPath.PI3:
        m = F @ F.T
    elif path is MetaPath.PI4:
        m = F.T @ F
    elif path is MetaPath.PI5:
        m = (W @ net.at) @ (W @ net.at).T
    else:
        m = (W @ net.checkin) @ (W @ net.checkin).T
    # self-pairs carry no proximity; also removes x -> y -> x returns in PI2
    return _zero_diagonal(m)


def _inter(pair: AlignedPair, path: MetaPath) -> sp.csr_matrix:
    g1, g2 = pair.net1, pair.net2
    F1, F2 = g1.follow, g2.follow
    if path.uses_anchors:
        A = pair.anchor_matrix()
        if path is MetaPath.PA1:
            m = F1 @ A @ F2.T
        elif path is MetaPath.PA2:
            m = F1.T @ A @ F2
        elif path is MetaPath.PA3:
            m = F1 @ A @ F2
        else:
            m = F1.T @ A @ F2.T
    elif path is MetaPath.PA5:
        m = (g1.write @ g1.at) @ _shared_values(g1.timestamps, g2.timestamps) @ (g2.write @ g2.at).T
    else:
        m = (g1.write @ g1.checkin) @ _shared_values(g1.locations, g2.locations) @ (g2.write @ g2.checkin).T
    m = sp.csr_matrix(m, dtype=float)
    m.eliminate_zeros()
    return m


def count_meta_path(source: HeterogeneousNetwork | AlignedPair, path: MetaPath | str) -> sp.csr_matrix:
    """Instance counts of ``path`` between every user pair.

    ``source`` is a network for intra paths and an :class:`AlignedPair` for
    inter paths; anchor-based inter paths only see ``labeled_anchors``.
    Intra results have a zero diagonal.
    """
    path = MetaPath[path] if isinstance(path, str) else path
    if path.scope == "intra":
        if not isinstance(source, HeterogeneousNetwork):
            raise ValueError(f"{path.name} is an intra-network path; pass a single network")
        return _intra(source, path)
    if not isinstance(source, AlignedPair):
        raise ValueError(f"{path.name} is an inter-network path; pass an AlignedPair")
    return _inter(source, path)


def compose_diagram(factor_counts) -> sp.csr_matrix | np.ndarray:
    """Elementwise product of equally shaped factor count matrices."""
    factor_counts = list(factor_counts)
    if not factor_counts:
        raise ValueError("no factors to compose")
    shape = factor_counts[0].shape
    for m in factor_counts[1:]:
        if m.shape != shape:
            raise ValueError(f"factor shapes differ: {shape} vs {m.shape}")

    def mul(a, b):
        if sp.issparse(a):
            return a.multiply(b)
        if sp.issparse(b):
            return b.multiply(a)
        return np.multiply(a, b)

    out = reduce(mul, factor_counts)
    return sp.csr_matrix(out) if sp.issparse(out) else np.asarray(out, dtype=float)


def count_diagram(source, diagram: MetaDiagram | str, cache: dict | None = None) -> sp.csr_matrix:
    """Instance counts of a (possibly composed) meta diagram.

    ``cache`` maps :class:`MetaPath` to already computed path counts and is
    filled in place, so diagrams sharing factors reuse work.
    """
    diagram = get_diagram(diagram) if isinstance(diagram, str) else diagram
    cache = {} if cache is None else cache
    factors = []
    for path, transposed in diagram.factors:
        if path not in cache:
            cache[path] = count_meta_path(source, path)
        factors.append(cache[path].T.tocsr() if transposed else cache[path])
    return sp.csr_matrix(compose_diagram(factors), dtype=float)
