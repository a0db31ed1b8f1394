import numpy as np
import pytest

from hetalign.graph import AlignedPair, HeterogeneousNetwork

# attribute vocabularies are shared across networks so that PA5/PA6 have hits
LOCATIONS = ("l0", "l1", "l2")
TIMESTAMPS = ("0", "3600", "7200")


def random_network(rng, tag="u", max_users=8, max_edges=60):
    """Small random network inside the oracle budget (<= 20 users, <= 60 edges)."""
    n = int(rng.integers(1, max_users + 1))
    n_posts = int(rng.integers(0, 2 * n + 1))
    users = [f"{tag}{i}" for i in range(n)]
    posts = [f"{tag}p{i}" for i in range(n_posts)]
    locs = list(LOCATIONS[: int(rng.integers(1, 4))])
    stamps = list(TIMESTAMPS[: int(rng.integers(1, 4))])

    follow = {(users[a], users[b]) for a, b in rng.integers(0, n, size=(int(rng.integers(0, 3 * n + 1)), 2)) if a != b}
    write = [(users[int(rng.integers(n))], p) for p in posts]
    checkin = [(p, locs[int(rng.integers(len(locs)))]) for p in posts if rng.random() < 0.8]
    at = [(p, stamps[int(rng.integers(len(stamps)))]) for p in posts if rng.random() < 0.8]
    follow = sorted(follow)
    budget = max_edges - len(write) - len(checkin) - len(at)
    follow = follow[: max(budget, 0)]
    return HeterogeneousNetwork.build(users, posts, locs, stamps,
                                      follow=follow, write=write, checkin=checkin, at=at)


def random_pair(rng, max_users=8):
    net1 = random_network(rng, "a", max_users, max_edges=60)
    net2 = random_network(rng, "b", max_users, max_edges=60)
    m = min(net1.n_users, net2.n_users)
    n_anchor = int(rng.integers(0, m + 1))
    left = rng.permutation(net1.n_users)[:n_anchor]
    right = rng.permutation(net2.n_users)[:n_anchor]
    anchors = tuple(sorted((int(a), int(b)) for a, b in zip(left, right)))
    return AlignedPair(net1, net2, anchors)


def follow_only(n, follows):
    users = [f"u{i}" for i in range(n)]
    return HeterogeneousNetwork.build(users, [], [], [], follow=[(users[a], users[b]) for a, b in follows])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
