"""Synergistic spectral partition of two networks.

Both networks are partitioned jointly by minimizing::

    alpha * Tr(H1' L1 H1) + beta * Tr(H2' L2 H2)
      + theta * (||S H2 H2' S' - H1 H1'||_F^2 + ||S' H1 H1' S - H2 H2'||_F^2)
      + rho1 * ||H1' D1 H1 - I||_F^2 + rho2 * ||H2' D2 H2 - I||_F^2

where ``S`` is the inter-network proximity, ``L = D - S_intra`` the graph
Laplacians and ``H`` the user-cluster confidence matrices. The descent
alternates one gradient step on ``H1`` and one on ``H2`` per iteration.
Clusters are read off ``H`` rows with K-means.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from sklearn.cluster import KMeans

from .graph import HeterogeneousNetwork

logger = logging.getLogger(__name__)


class DivergenceError(RuntimeError):
    pass


@dataclass
class PartitionConfig:
    k: int = 4
    alpha: float = 1.0
    beta: float = 1.0
    theta: float = 80.0
    rho1: float = 1e3
    rho2: float = 1e3
    eta1: float = 1e-3
    eta2: float = 1e-3
    max_iters: int = 300
    tol: float = 1e-6
    seed: int = 0
    # halve the step until the objective does not increase
    backtracking: bool = True
    min_step: float = 1e-18

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be positive")
        for name in ("alpha", "beta", "rho1", "rho2", "eta1", "eta2", "tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if self.theta < 0:
            raise ValueError("theta must be >= 0")
        if self.max_iters < 0:
            raise ValueError("max_iters must be >= 0")

    def validate_sizes(self, n1: int, n2: int) -> None:
        if self.k > min(n1, n2):
            raise ValueError(f"k={self.k} exceeds the smaller network ({min(n1, n2)} users)")


def _dense(m) -> np.ndarray:
    return m.toarray() if sp.issparse(m) else np.asarray(m, dtype=float)


def laplacian(S) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(L, D)`` with ``D = diag(row sums of S)`` and ``L = D - S``."""
    S = _dense(S)
    D = np.diag(S.sum(axis=1))
    return D - S, D


@dataclass
class PartitionState:
    H1: np.ndarray
    H2: np.ndarray
    L1: np.ndarray
    D1: np.ndarray
    L2: np.ndarray
    D2: np.ndarray
    objective_trace: list[float] = field(default_factory=list)
    # (objective, ncut1, ncut2, discrepancy) per iteration, iteration 0 = init
    terms_trace: list[tuple[float, float, float, float]] = field(default_factory=list)
    converged: bool = False

    @classmethod
    def from_proximity(cls, S1, S2, H1, H2) -> "PartitionState":
        L1, D1 = laplacian(S1)
        L2, D2 = laplacian(S2)
        return cls(np.array(H1, dtype=float), np.array(H2, dtype=float), L1, D1, L2, D2)


def ncut_value(H: np.ndarray, L: np.ndarray) -> float:
    """``Tr(H' L H)``."""
    if L.shape[0] != L.shape[1] or L.shape[1] != H.shape[0]:
        raise ValueError(f"shape mismatch: L {L.shape}, H {H.shape}")
    return float(np.sum(H * (L @ H)))


def transition_confidence(S_inter, H_other: np.ndarray) -> np.ndarray:
    """Cluster confidence carried over from the partner network: ``S @ H_other``.

    Pass ``S.T`` to carry network-1 confidences into network 2.
    """
    if S_inter.shape[1] != H_other.shape[0]:
        raise ValueError(f"shape mismatch: S {S_inter.shape}, H {H_other.shape}")
    return np.asarray(S_inter @ H_other)


def discrepancy(H1: np.ndarray, H2: np.ndarray, S_inter) -> float:
    S = _dense(S_inter)
    Hb1 = transition_confidence(S, H2)
    Hb2 = transition_confidence(S.T, H1)
    d1 = np.linalg.norm(Hb1 @ Hb1.T - H1 @ H1.T) ** 2
    d2 = np.linalg.norm(Hb2 @ Hb2.T - H2 @ H2.T) ** 2
    return float(d1 + d2)


def _penalty(H, D) -> float:
    k = H.shape[1]
    return float(np.linalg.norm(H.T @ D @ H - np.eye(k)) ** 2)


def objective_terms(state: PartitionState, config: PartitionConfig, S_inter) -> dict[str, float]:
    ncut1 = ncut_value(state.H1, state.L1)
    ncut2 = ncut_value(state.H2, state.L2)
    disc = discrepancy(state.H1, state.H2, S_inter)
    pen1 = _penalty(state.H1, state.D1)
    pen2 = _penalty(state.H2, state.D2)
    total = (config.alpha * ncut1 + config.beta * ncut2 + config.theta * disc
             + config.rho1 * pen1 + config.rho2 * pen2)
    return {"objective": total, "ncut1": ncut1, "ncut2": ncut2, "discrepancy": disc,
            "penalty1": pen1, "penalty2": pen2}


def joint_objective(state: PartitionState, config: PartitionConfig, S_inter) -> float:
    return objective_terms(state, config, S_inter)["objective"]


def _gradient(H, other, S, L, D, weight, rho, theta) -> np.ndarray:
    # S maps the other network's users onto H's users
    k = H.shape[1]
    grad = weight * (L + L.T) @ H
    HtDH = H.T @ D @ H
    grad += 4.0 * rho * (D @ H) @ (HtDH - np.eye(k))
    if theta:
        Hb = S @ other
        grad += 4.0 * theta * (H @ (H.T @ H) - Hb @ (Hb.T @ H))
        P = S.T @ H
        grad += 4.0 * theta * S @ (P @ (P.T @ P) - other @ (other.T @ P))
    return grad


def gradient_H(state: PartitionState, config: PartitionConfig, S_inter, which: int) -> np.ndarray:
    """Gradient of :func:`joint_objective` with respect to ``H1`` (``which=1``) or ``H2``."""
    S = _dense(S_inter)
    if which == 1:
        return _gradient(state.H1, state.H2, S, state.L1, state.D1, config.alpha, config.rho1, config.theta)
    if which == 2:
        return _gradient(state.H2, state.H1, S.T, state.L2, state.D2, config.beta, config.rho2, config.theta)
    raise ValueError("which must be 1 or 2")


def spectral_init(S, k: int, seed: int = 0) -> np.ndarray:
    """Bottom-``k`` generalized eigenvectors of ``(L, D)``, so that ``H' D H = I``.

    Isolated users get zero rows. Falls back to seeded uniform noise in
    ``[0, 1/sqrt(k))`` if the eigensolve fails.
    """
    S = _dense(S)
    n = S.shape[0]
    d = S.sum(axis=1)
    inv_sqrt = np.where(d > 0, 1.0 / np.sqrt(np.where(d > 0, d, 1.0)), 0.0)
    L_sym = np.eye(n) - inv_sqrt[:, None] * S * inv_sqrt[None, :]
    try:
        _, U = scipy.linalg.eigh(L_sym, subset_by_index=[0, k - 1])
        H = inv_sqrt[:, None] * U
        if not np.all(np.isfinite(H)):
            raise np.linalg.LinAlgError("non-finite eigenvectors")
    except (np.linalg.LinAlgError, ValueError) as exc:
        logger.warning("spectral initialization failed (%s); using random start", exc)
        rng = np.random.default_rng(seed)
        H = rng.uniform(0.0, 1.0 / np.sqrt(k), size=(n, k))
    return H


def _descend(state, config, S, which, eta):
    """One gradient step on the selected ``H``; returns the new objective."""
    attr = "H1" if which == 1 else "H2"
    H = getattr(state, attr)
    current = joint_objective(state, config, S)
    grad = gradient_H(state, config, S, which)
    step = eta
    while True:
        setattr(state, attr, H - step * grad)
        value = joint_objective(state, config, S)
        if not config.backtracking or value <= current:
            return value
        step *= 0.5
        if step < config.min_step:
            setattr(state, attr, H)
            return current


def synergistic_partition(S1, S2, S_inter, config: PartitionConfig, H1=None, H2=None) -> PartitionState:
    """Alternating gradient descent on the joint partition objective.

    Starts from the spectral solution of each network unless ``H1``/``H2``
    are given. Stops when the relative objective decrease of an iteration
    falls below ``config.tol`` or after ``config.max_iters`` iterations.
    With ``backtracking`` off, ten consecutive increases raise
    :class:`DivergenceError`.
    """
    S = _dense(S_inter)
    config.validate_sizes(S.shape[0], S.shape[1])
    H1 = spectral_init(S1, config.k, config.seed) if H1 is None else H1
    H2 = spectral_init(S2, config.k, config.seed + 1) if H2 is None else H2
    state = PartitionState.from_proximity(S1, S2, H1, H2)

    def record():
        t = objective_terms(state, config, S)
        state.objective_trace.append(t["objective"])
        state.terms_trace.append((t["objective"], t["ncut1"], t["ncut2"], t["discrepancy"]))
        return t["objective"]

    previous = record()
    increases = 0
    for it in range(config.max_iters):
        # blow-ups surface below as a non-finite objective
        with np.errstate(over="ignore", invalid="ignore"):
            _descend(state, config, S, 1, config.eta1)
            _descend(state, config, S, 2, config.eta2)
            value = record()
        if not np.isfinite(value):
            raise DivergenceError(f"objective became non-finite at iteration {it + 1}; reduce eta")
        if value > previous:
            increases += 1
            if increases >= 10:
                raise DivergenceError(
                    f"objective increased for 10 consecutive iterations (now {value:.6g}); reduce eta"
                )
        else:
            increases = 0
        decrease = previous - value
        if 0 <= decrease <= config.tol * max(abs(previous), np.finfo(float).tiny):
            state.converged = True
            break
        previous = value
    return state


@dataclass
class ClusterAssignment:
    """Per-network cluster labels in ``0..k-1``."""

    labels1: np.ndarray
    labels2: np.ndarray
    k: int

    def members(self, which: int, cluster: int) -> np.ndarray:
        labels = self.labels1 if which == 1 else self.labels2
        return np.flatnonzero(labels == cluster)

    def subnetworks(self, net: HeterogeneousNetwork, which: int) -> list[HeterogeneousNetwork]:
        """One induced sub-network per cluster, carrying the users' posts and attributes."""
        return [net.subnetwork(self.members(which, c)) for c in range(self.k)]


def _canonical(labels: np.ndarray) -> np.ndarray:
    # relabel by order of first appearance
    mapping: dict[int, int] = {}
    for lab in labels:
        mapping.setdefault(int(lab), len(mapping))
    return np.array([mapping[int(lab)] for lab in labels], dtype=np.int64)


def kmeans_labels(H: np.ndarray, k: int, seed: int) -> np.ndarray:
    n = H.shape[0]
    if k <= 1 or n == 0:
        return np.zeros(n, dtype=np.int64)
    distinct = len(np.unique(np.round(H, 12), axis=0))
    if distinct < k:
        logger.warning("only %d distinct rows for %d clusters; some clusters will be empty", distinct, k)
        k = distinct
    km = KMeans(n_clusters=k, n_init=10, max_iter=300, random_state=seed)
    return _canonical(km.fit_predict(H))


def extract_clusters(state: PartitionState, k: int, seed: int = 0) -> ClusterAssignment:
    """K-means over the rows of ``H1`` and ``H2``."""
    return ClusterAssignment(kmeans_labels(state.H1, k, seed), kmeans_labels(state.H2, k, seed), k)
