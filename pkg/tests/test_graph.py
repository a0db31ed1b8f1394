import logging

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hetalign.graph import (
    AlignedPair,
    HeterogeneousNetwork,
    ParseError,
    ValidationError,
    bucket_timestamp,
    load_aligned_pair,
    load_network,
    write_anchors,
    write_network,
)

from conftest import follow_only, random_network


def _write(path, lines):
    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    return path


def test_load_three_users_two_follows(tmp_path):
    nodes = _write(tmp_path / "n.tsv", ["user\t0", "user\t1", "user\t2"])
    edges = _write(tmp_path / "e.tsv", ["follow\t0\t1", "follow\t1\t2"])
    net = load_network(nodes, edges)
    assert net.n_users == 3
    assert len(net.follow_edges) == 2
    assert net.follow[0, 1] == 1 and net.follow[1, 2] == 1


def test_edge_to_undeclared_user_is_rejected(tmp_path):
    nodes = _write(tmp_path / "n.tsv", ["user\t0", "user\t1"])
    edges = _write(tmp_path / "e.tsv", ["follow\t0\t9"])
    with pytest.raises(ValidationError, match="'9'"):
        load_network(nodes, edges)


def test_empty_edge_file(tmp_path):
    nodes = _write(tmp_path / "n.tsv", ["user\ta", "user\tb"])
    edges = _write(tmp_path / "e.tsv", [])
    net = load_network(nodes, edges)
    assert net.n_users == 2
    assert all(len(getattr(net, r + "_edges")) == 0 for r in ("follow", "write", "checkin", "at"))


def test_parse_error_carries_line_number(tmp_path):
    nodes = _write(tmp_path / "n.tsv", ["# header", "user\ta", "user b"])
    edges = _write(tmp_path / "e.tsv", [])
    with pytest.raises(ParseError) as err:
        load_network(nodes, edges)
    assert err.value.lineno == 3


def test_unknown_kind_and_relation(tmp_path):
    edges = _write(tmp_path / "e.tsv", [])
    with pytest.raises(ParseError, match="node kind"):
        load_network(_write(tmp_path / "n.tsv", ["group\tg"]), edges)
    nodes = _write(tmp_path / "n2.tsv", ["user\ta", "user\tb"])
    with pytest.raises(ParseError, match="relation"):
        load_network(nodes, _write(tmp_path / "e2.tsv", ["likes\ta\tb"]))


def test_duplicate_user_rejected(tmp_path):
    with pytest.raises(ParseError, match="duplicate"):
        load_network(_write(tmp_path / "n.tsv", ["user\ta", "user\ta"]), _write(tmp_path / "e.tsv", []))


def test_duplicate_edges_and_self_follows_dropped(caplog):
    with caplog.at_level(logging.WARNING):
        net = HeterogeneousNetwork.build(["a", "b"], follow=[("a", "b"), ("a", "b"), ("a", "a")])
    assert net.follow_edges.tolist() == [[0, 1]]
    assert "duplicate" in caplog.text and "self-follow" in caplog.text


def test_timestamps_in_one_bucket_merge(tmp_path):
    nodes = _write(tmp_path / "n.tsv", ["user\tu", "post\tp", "post\tq", "timestamp\t7201", "timestamp\t7300"])
    edges = _write(tmp_path / "e.tsv", ["write\tu\tp", "write\tu\tq", "at\tp\t7201", "at\tq\t7300"])
    net = load_network(nodes, edges)
    assert net.timestamps == ("7200",)
    assert net.at.toarray().tolist() == [[1], [1]]
    raw = load_network(nodes, edges, timestamp_bucket=None)
    assert raw.timestamps == ("7201", "7300")


@given(st.floats(min_value=-1e9, max_value=1e9, allow_nan=False), st.sampled_from([1.0, 60.0, 3600.0, 86400.0]))
def test_bucketing_is_idempotent(t, width):
    once = bucket_timestamp(repr(t), width)
    assert bucket_timestamp(once, width) == once
    assert float(once) <= t < float(once) + width


def test_non_numeric_timestamp_passes_through():
    assert bucket_timestamp("morning", 3600) == "morning"


def test_network_round_trip(tmp_path, rng):
    for _ in range(10):
        net = random_network(rng)
        write_network(net, tmp_path / "n.tsv", tmp_path / "e.tsv")
        back = load_network(tmp_path / "n.tsv", tmp_path / "e.tsv")
        assert back.users == net.users and back.posts == net.posts
        for rel in ("follow", "write", "checkin", "at"):
            assert back.edge_ids(rel) == net.edge_ids(rel)


def test_relation_matrices_are_binary_and_shaped(rng):
    net = random_network(rng)
    assert net.follow.shape == (net.n_users, net.n_users)
    assert net.write.shape == (net.n_users, len(net.posts))
    assert net.checkin.shape == (len(net.posts), len(net.locations))
    assert net.at.shape == (len(net.posts), len(net.timestamps))
    for m in (net.follow, net.write, net.checkin, net.at):
        assert set(np.unique(m.toarray())) <= {0, 1}


def test_edge_arrays_are_read_only():
    net = follow_only(2, [(0, 1)])
    with pytest.raises(ValueError):
        net.follow_edges[0, 0] = 1


def test_subnetwork_keeps_users_posts_and_attributes():
    net = HeterogeneousNetwork.build(
        ["a", "b", "c"], ["p", "q"], ["L"], ["0"],
        follow=[("a", "b"), ("b", "c")], write=[("a", "p"), ("c", "q")],
        checkin=[("p", "L")], at=[("q", "0")],
    )
    sub = net.subnetwork([0, 1])
    assert sub.users == ("a", "b")
    assert sub.edge_ids("follow") == [("a", "b")]
    assert sub.posts == ("p",) and sub.locations == ("L",) and sub.timestamps == ()


def _two_nets():
    return follow_only(3, []), follow_only(3, [])


def test_anchor_file_loading(tmp_path):
    n1, n2 = _two_nets()
    pair = load_aligned_pair(n1, n2, _write(tmp_path / "a.tsv", ["u0\tu0", "u1\tu1"]))
    assert pair.labeled_anchors == ((0, 0), (1, 1))
    empty = load_aligned_pair(n1, n2, _write(tmp_path / "b.tsv", []))
    assert empty.labeled_anchors == ()
    assert empty.anchor_matrix().nnz == 0


def test_anchor_one_to_one_enforced(tmp_path):
    n1, n2 = _two_nets()
    with pytest.raises(ValidationError, match="one-to-one"):
        load_aligned_pair(n1, n2, _write(tmp_path / "a.tsv", ["u0\tu0", "u0\tu1"]))
    with pytest.raises(ValidationError, match="one-to-one"):
        AlignedPair(n1, n2, ((0, 2), (1, 2)))


def test_anchor_unknown_user(tmp_path):
    n1, n2 = _two_nets()
    with pytest.raises(ParseError, match="unknown user"):
        load_aligned_pair(n1, n2, _write(tmp_path / "a.tsv", ["u0\tzz"]))


def test_anchor_round_trip(tmp_path):
    n1, n2 = _two_nets()
    pair = AlignedPair(n1, n2, ((2, 0), (0, 1)))
    write_anchors(pair.labeled_anchors, n1, n2, tmp_path / "a.tsv")
    assert load_aligned_pair(n1, n2, tmp_path / "a.tsv").labeled_anchors == ((0, 1), (2, 0))
