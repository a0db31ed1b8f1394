import numpy as np
import pytest
from sklearn.cluster import SpectralClustering
from sklearn.metrics import adjusted_rand_score

from hetalign.oracles import finite_difference_gradient
from hetalign.partition import (
    ClusterAssignment,
    DivergenceError,
    PartitionConfig,
    PartitionState,
    discrepancy,
    extract_clusters,
    gradient_H,
    joint_objective,
    laplacian,
    ncut_value,
    objective_terms,
    synergistic_partition,
    transition_confidence,
)

from conftest import random_network


def sym(rng, n, density=0.6):
    S = rng.random((n, n)) * (rng.random((n, n)) < density)
    S = np.triu(S, 1)
    return S + S.T


def instance(rng, n1=5, n2=4, k=2, **kw):
    S1, S2 = sym(rng, n1), sym(rng, n2)
    S = rng.random((n1, n2)) * (rng.random((n1, n2)) < 0.5)
    state = PartitionState.from_proximity(S1, S2, rng.normal(size=(n1, k)) * 0.5, rng.normal(size=(n2, k)) * 0.5)
    config = PartitionConfig(k=k, **kw)
    return state, config, S


def rel_err(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(a), np.linalg.norm(b), 1e-300)


def planted(n_per_block, blocks=2, p=1.0):
    labels = np.repeat(np.arange(blocks), n_per_block)
    S = (labels[:, None] == labels[None, :]).astype(float) * p
    np.fill_diagonal(S, 0)
    return S, labels


# -- pieces of the objective ------------------------------------------------------


def test_laplacian_rows_sum_to_zero(rng):
    for _ in range(10):
        L, D = laplacian(sym(rng, 7))
        assert np.abs(L.sum(axis=1)).max() <= 1e-12
        assert np.array_equal(D, np.diag(np.diag(D)))


def test_ncut_zero_cases(rng):
    S, labels = planted(3)
    L, _ = laplacian(S)
    assert ncut_value(np.zeros((6, 2)), L) == 0
    assert ncut_value(np.eye(2)[labels], L) == pytest.approx(0, abs=1e-12)


def test_ncut_is_the_trace(rng):
    H, L = rng.normal(size=(4, 2)), laplacian(sym(rng, 4))[0]
    assert ncut_value(H, L) == pytest.approx(np.trace(H.T @ L @ H))
    with pytest.raises(ValueError):
        ncut_value(np.ones((3, 2)), L)


def test_transition_confidence(rng):
    H = rng.random((3, 2))
    np.testing.assert_array_equal(transition_confidence(np.eye(3), H), H)
    assert not transition_confidence(np.zeros((3, 3)), H).any()
    S = rng.random((3, 3))
    want = [[sum(S[i, m] * H[m, c] for m in range(3)) for c in range(2)] for i in range(3)]
    np.testing.assert_allclose(transition_confidence(S, H), want)


def test_discrepancy_consistent_and_flipped():
    labels = np.array([0, 0, 1, 1])
    H = np.eye(2)[labels]
    assert discrepancy(H, H, np.eye(4)) == 0
    flipped = np.eye(2)[np.array([0, 1, 1, 1])]
    assert discrepancy(H, flipped, np.eye(4)) > 0


def test_discrepancy_matches_pairwise_sum(rng):
    for _ in range(10):
        n, k = 5, 3
        H1, H2 = rng.random((n, k)), rng.random((n, k))
        S = rng.random((n, n))
        total = 0.0
        for H, Hb in ((H1, S @ H2), (H2, S.T @ H1)):
            pairs = diag = 0.0
            for i in range(n):
                for j in range(n):
                    d = (sum(Hb[i, c] * Hb[j, c] for c in range(k)) - sum(H[i, c] * H[j, c] for c in range(k))) ** 2
                    if i < j:
                        pairs += d
                    elif i == j:
                        diag += d
            # Frobenius form counts each unordered pair twice plus the diagonal
            total += 2 * pairs + diag
        assert discrepancy(H1, H2, S) == pytest.approx(total, rel=1e-12)


def test_objective_at_zero_is_penalty_only(rng):
    state, config, S = instance(rng, k=3, rho1=7.0, rho2=5.0)
    state.H1[:] = 0
    state.H2[:] = 0
    assert joint_objective(state, config, S) == pytest.approx((7.0 + 5.0) * 3)


def test_theta_zero_decouples(rng):
    state, config, S = instance(rng, theta=0.0)
    t = objective_terms(state, config, S)
    other = objective_terms(state, config, rng.random(S.shape))
    assert t["objective"] == pytest.approx(other["objective"])
    assert t["objective"] == pytest.approx(
        t["ncut1"] + config.rho1 * t["penalty1"] + t["ncut2"] + config.rho2 * t["penalty2"])


# -- gradient ---------------------------------------------------------------------


def _fd(state, config, S, which):
    attr = "H1" if which == 1 else "H2"
    base = getattr(state, attr).copy()

    def f(H):
        setattr(state, attr, H)
        return joint_objective(state, config, S)

    g = finite_difference_gradient(f, base.copy())
    setattr(state, attr, base)
    return g


@pytest.mark.parametrize("which", [1, 2])
def test_gradient_matches_finite_differences(rng, which):
    for _ in range(5):
        state, config, S = instance(rng, theta=float(rng.uniform(0, 100)), rho1=1e3, rho2=10.0)
        assert rel_err(gradient_H(state, config, S, which), _fd(state, config, S, which)) <= 1e-5


def test_gradient_vanishes_at_trivial_stationary_point():
    state = PartitionState.from_proximity(np.zeros((3, 3)), np.zeros((3, 3)), np.zeros((3, 2)), np.zeros((3, 2)))
    config = PartitionConfig(k=2, theta=0.0, rho1=1e-3, rho2=1e-3)
    assert not gradient_H(state, config, np.zeros((3, 3)), 1).any()


def test_gradient_linear_in_theta(rng):
    state, config, S = instance(rng, theta=0.0)
    base = gradient_H(state, config, S, 1)
    g1 = gradient_H(state, PartitionConfig(k=2, theta=3.0), S, 1) - base
    g2 = gradient_H(state, PartitionConfig(k=2, theta=6.0), S, 1) - base
    np.testing.assert_allclose(g2, 2 * g1, rtol=1e-10, atol=1e-10)


def test_gradient_which_is_validated(rng):
    state, config, S = instance(rng)
    with pytest.raises(ValueError):
        gradient_H(state, config, S, 3)


# -- descent ----------------------------------------------------------------------


def test_max_iters_zero_returns_initialization(rng):
    S1, S2 = sym(rng, 6), sym(rng, 6)
    H1, H2 = rng.random((6, 2)), rng.random((6, 2))
    state = synergistic_partition(S1, S2, np.eye(6), PartitionConfig(k=2, max_iters=0), H1, H2)
    np.testing.assert_array_equal(state.H1, H1)
    np.testing.assert_array_equal(state.H2, H2)
    assert len(state.objective_trace) == 1


def test_backtracking_descent_is_monotone(rng):
    for _ in range(5):
        S1, S2 = sym(rng, 8), sym(rng, 7)
        config = PartitionConfig(k=3, max_iters=40, eta1=1e-2, eta2=1e-2)
        trace = synergistic_partition(S1, S2, rng.random((8, 7)) * 0.3, config).objective_trace
        assert all(b <= a for a, b in zip(trace, trace[1:]))


def test_divergence_detected_without_backtracking(rng):
    S1, S2 = sym(rng, 6), sym(rng, 6)
    config = PartitionConfig(k=2, eta1=10.0, eta2=10.0, backtracking=False, max_iters=50)
    with pytest.raises(DivergenceError):
        synergistic_partition(S1, S2, np.eye(6), config)


def test_k_larger_than_network(rng):
    with pytest.raises(ValueError, match="exceeds"):
        synergistic_partition(sym(rng, 3), sym(rng, 3), np.eye(3), PartitionConfig(k=4))


def test_theta_zero_recovers_spectral_blocks():
    S, labels = planted(6)
    S[0, 7] = S[7, 0] = 0.05  # keep the graph connected
    state = synergistic_partition(S, S, np.zeros((12, 12)), PartitionConfig(k=2, theta=0.0, rho1=1e3, rho2=1e3))
    got = extract_clusters(state, 2, seed=0)
    ref = SpectralClustering(2, affinity="precomputed", random_state=0).fit_predict(S)
    assert adjusted_rand_score(ref, labels) == 1.0
    assert adjusted_rand_score(got.labels1, ref) == 1.0
    assert adjusted_rand_score(got.labels2, ref) == 1.0


def test_coupling_reduces_discrepancy():
    S, _ = planted(5)
    rng = np.random.default_rng(3)
    H1, H2 = rng.random((10, 2)), rng.random((10, 2))
    state = synergistic_partition(S, S, np.eye(10), PartitionConfig(k=2, theta=80.0), H1, H2)
    disc = [t[3] for t in state.terms_trace]
    assert disc[-1] < disc[0]


# -- clusters ---------------------------------------------------------------------


def test_one_hot_rows_cluster_by_argmax():
    labels = np.array([1, 0, 2, 1, 0, 2])
    H = np.eye(3)[labels]
    state = PartitionState(H, H, *(np.zeros((6, 6)),) * 4)
    got = extract_clusters(state, 3)
    assert adjusted_rand_score(got.labels1, labels) == 1.0
    assert got.labels1.tolist() == [0, 1, 2, 0, 1, 2]  # first-appearance order


def test_single_cluster():
    H = np.random.default_rng(0).random((5, 1))
    state = PartitionState(H, H, *(np.zeros((5, 5)),) * 4)
    assert extract_clusters(state, 1).labels1.tolist() == [0] * 5


def test_noisy_planted_rows_recovered(rng):
    labels = np.repeat([0, 1], 10)
    H = np.eye(2)[labels] + rng.normal(scale=0.01, size=(20, 2))
    state = PartitionState(H, H, *(np.zeros((20, 20)),) * 4)
    assert adjusted_rand_score(extract_clusters(state, 2).labels1, labels) == 1.0


def test_subnetworks_partition_the_users(rng):
    net = random_network(rng, max_users=10)
    labels = rng.integers(0, 3, size=net.n_users)
    subs = ClusterAssignment(labels, labels, 3).subnetworks(net, 1)
    users = [u for s in subs for u in s.users]
    assert sorted(users) == sorted(net.users)
