import numpy as np
import pytest
import scipy.sparse as sp

from hetalign.graph import AlignedPair, HeterogeneousNetwork
from hetalign.metadiagram import (
    CATALOG,
    MetaPath,
    compose_diagram,
    count_diagram,
    count_meta_path,
    get_diagram,
)
from hetalign.oracles import count_table, diagram_table

from conftest import follow_only, random_network, random_pair


def dense(m):
    return m.toarray() if sp.issparse(m) else np.asarray(m)


def test_pi1_is_the_follow_adjacency():
    net = follow_only(2, [(0, 1)])
    assert dense(count_meta_path(net, "PI1")).tolist() == [[0, 1], [0, 0]]


def test_pi3_common_out_neighbour():
    net = follow_only(3, [(0, 2), (1, 2)])
    m = dense(count_meta_path(net, MetaPath.PI3))
    assert m[0, 1] == 1 and m[1, 0] == 1
    assert np.all(np.diag(m) == 0)


def test_pa5_counts_shared_timestamp_chains():
    n1 = HeterogeneousNetwork.build(["a"], ["p"], [], ["3600"], write=[("a", "p")], at=[("p", "3600")])
    n2 = HeterogeneousNetwork.build(["b"], ["q", "r"], [], ["3600"],
                                    write=[("b", "q"), ("b", "r")], at=[("q", "3600"), ("r", "3600")])
    assert dense(count_meta_path(AlignedPair(n1, n2), "PA5")).tolist() == [[2]]


def test_attribute_ids_must_match_across_networks():
    n1 = HeterogeneousNetwork.build(["a"], ["p"], ["x"], [], write=[("a", "p")], checkin=[("p", "x")])
    n2 = HeterogeneousNetwork.build(["b"], ["q"], ["y"], [], write=[("b", "q")], checkin=[("q", "y")])
    assert count_meta_path(AlignedPair(n1, n2), "PA6").nnz == 0


def test_anchor_paths_vanish_without_anchors(rng):
    pair = random_pair(rng).with_anchors(())
    for name in ("PA1", "PA2", "PA3", "PA4"):
        assert count_meta_path(pair, name).nnz == 0


def test_scope_mismatch_raises():
    net = follow_only(2, [(0, 1)])
    with pytest.raises(ValueError):
        count_meta_path(net, "PA1")
    with pytest.raises(ValueError):
        count_meta_path(AlignedPair(net, net), "PI1")


def test_compose_identity_and_annihilation():
    M = np.array([[1, 2], [0, 1]])
    assert dense(compose_diagram([M, np.ones((2, 2))])).tolist() == M.tolist()
    assert not dense(compose_diagram([M, np.zeros((2, 2))])).any()
    out = compose_diagram([sp.csr_matrix(M), np.array([[3, 0], [1, 1]])])
    assert dense(out).tolist() == [[3, 0], [0, 1]]


def test_compose_shape_mismatch():
    with pytest.raises(ValueError):
        compose_diagram([np.ones((2, 2)), np.ones((2, 3))])


def test_mutual_follow_diagram():
    net = follow_only(3, [(0, 1), (1, 0), (1, 2)])
    m = dense(count_diagram(net, "PSI_I1"))
    assert m.tolist() == [[0, 1, 0], [1, 0, 0], [0, 0, 0]]


def test_catalog_scopes():
    assert {d.scope for n, d in CATALOG.items() if n.startswith(("PI", "PSI_I"))} == {"intra"}
    assert {d.scope for n, d in CATALOG.items() if n.startswith(("PA", "PSI_A"))} == {"inter"}
    assert CATALOG["PSI_A1"].uses_anchors and not CATALOG["PSI_A2"].uses_anchors


@pytest.mark.parametrize("name", ["PI1*PA1", "PI1*PI3*PI4", "PI5*PI6*PI5", "PA1'", "PX9"])
def test_invalid_compositions(name):
    with pytest.raises(ValueError):
        get_diagram(name)


def test_adhoc_composition_counts(rng):
    net = random_network(rng)
    got = dense(count_diagram(net, "PI3*PI5"))
    assert np.array_equal(got, dense(count_meta_path(net, "PI3")) * dense(count_meta_path(net, "PI5")))


def test_intra_paths_match_walk_oracle(rng):
    for _ in range(30):
        net = random_network(rng)
        for path in ("PI1", "PI2", "PI3", "PI4", "PI5", "PI6"):
            assert np.array_equal(dense(count_meta_path(net, path)), count_table(net, path)), path


def test_inter_paths_match_walk_oracle(rng):
    for _ in range(30):
        pair = random_pair(rng)
        for path in ("PA1", "PA2", "PA3", "PA4", "PA5", "PA6"):
            assert np.array_equal(dense(count_meta_path(pair, path)), count_table(pair, path)), path


def test_catalogued_diagrams_match_oracle(rng):
    for _ in range(10):
        net, pair = random_network(rng), random_pair(rng)
        for name, diagram in CATALOG.items():
            source = net if diagram.scope == "intra" else pair
            factors = [(p.name, t) for p, t in diagram.factors]
            assert np.array_equal(dense(count_diagram(source, name)), diagram_table(source, factors)), name


def test_counts_are_nonnegative_integers(rng):
    pair = random_pair(rng)
    for path in MetaPath:
        source = pair.net1 if path.scope == "intra" else pair
        m = dense(count_meta_path(source, path))
        assert (m >= 0).all() and np.array_equal(m, np.round(m))
