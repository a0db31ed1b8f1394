"""Command-line entry point.

Every subcommand works on a data directory in the layout written by ``gen``
(``net{1,2}.nodes.tsv``, ``net{1,2}.edges.tsv``, ``anchors.train.tsv`` and
optionally ``anchors.test.tsv``) and a work directory that holds the stage
artifacts. Later stages read what earlier ones wrote there.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from . import graph, matching, partition, pipeline
from .pipeline import PipelineConfig, StageError

_CONFIG_FLAGS = dataclasses.fields(PipelineConfig)


def _config_type(f):
    if f.name in ("threshold", "intra_diagrams", "inter_diagrams", "intra_weights", "inter_weights"):
        return str
    if f.name == "timestamp_bucket":
        return float
    return type(f.default)


def _add_config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="flat JSON object of configuration keys")
    g = p.add_argument_group("configuration overrides")
    for f in _CONFIG_FLAGS:
        g.add_argument(f"--{f.name.replace('_', '-')}", dest=f.name, type=_config_type(f), default=None)
    g.add_argument("--rho", type=float, help="set rho1 and rho2")
    g.add_argument("--eta", type=float, help="set eta1 and eta2")


def _config(args) -> PipelineConfig:
    overrides = {}
    for shared in ("rho", "eta"):
        if getattr(args, shared) is not None:
            overrides[shared + "1"] = overrides[shared + "2"] = getattr(args, shared)
    overrides.update({f.name: getattr(args, f.name) for f in _CONFIG_FLAGS if getattr(args, f.name) is not None})
    if args.config is not None:
        return PipelineConfig.from_file(args.config, **overrides)
    return PipelineConfig.from_mapping(overrides)


def _data_paths(data: Path) -> dict[str, Path]:
    return {
        "nodes1": data / "net1.nodes.tsv", "edges1": data / "net1.edges.tsv",
        "nodes2": data / "net2.nodes.tsv", "edges2": data / "net2.edges.tsv",
        "train": data / "anchors.train.tsv", "test": data / "anchors.test.tsv",
    }


def _load(data: Path, config: PipelineConfig):
    paths = _data_paths(data)
    net1 = graph.load_network(paths["nodes1"], paths["edges1"], config.timestamp_bucket)
    net2 = graph.load_network(paths["nodes2"], paths["edges2"], config.timestamp_bucket)
    pair = graph.load_aligned_pair(net1, net2, paths["train"])
    test = graph.load_anchors(paths["test"], net1, net2) if paths["test"].exists() else []
    return pair, test


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc


def _pairs_from_files(out: Path, pair):
    labels1 = pipeline.read_clusters(out / "net1.clusters.tsv", pair.net1)
    labels2 = pipeline.read_clusters(out / "net2.clusters.tsv", pair.net2)
    selected = [matching.MatchedPair(rank, i, j, *_members(labels1, labels2, pair.labeled_anchors, i, j))
                for rank, i, j in pipeline.read_pairs(out / "pairs.tsv")]
    return labels1, labels2, selected


def _members(labels1, labels2, anchors, i, j):
    u1 = tuple(int(u) for u in (labels1 == i).nonzero()[0])
    u2 = tuple(int(u) for u in (labels2 == j).nonzero()[0])
    s1, s2 = set(u1), set(u2)
    known = tuple(sorted((a, b) for a, b in anchors if a in s1 and b in s2))
    return u1, u2, known, matching.m_score(u1, u2, anchors)


# -- subcommands ----------------------------------------------------------------


def cmd_gen(args) -> None:
    data = _stage("gen", pipeline.generate_synthetic, n_users=args.n_users, k_blocks=args.k_blocks,
                  p_in=args.p_in, p_out=args.p_out, n_posts_per_user=args.n_posts_per_user,
                  attr_vocab=args.attr_vocab, anchor_fraction=args.anchor_fraction,
                  noise=args.noise, seed=args.seed, overlap=args.overlap)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    paths = _data_paths(out)
    net1, net2 = data.pair.net1, data.pair.net2
    graph.write_network(net1, paths["nodes1"], paths["edges1"])
    graph.write_network(net2, paths["nodes2"], paths["edges2"])
    graph.write_anchors(data.train_anchors, net1, net2, paths["train"])
    graph.write_anchors(data.test_anchors, net1, net2, paths["test"])


def cmd_partition(args) -> None:
    config = _stage("config", _config, args)
    pair, _ = _stage("load", _load, args.data, config)
    S1, S2, S_inter, _ = _stage("proximity", pipeline.compute_proximities, pair, config)
    state = _stage("partition", partition.synergistic_partition, S1, S2, S_inter, config.partition_config())
    assignment = _stage("clusters", partition.extract_clusters, state, config.k, config.seed)
    args.out.mkdir(parents=True, exist_ok=True)
    pipeline.write_clusters(assignment.labels1, pair.net1, args.out / "net1.clusters.tsv")
    pipeline.write_clusters(assignment.labels2, pair.net2, args.out / "net2.clusters.tsv")
    pipeline.write_trace(state, args.out / "trace.tsv")


def cmd_match(args) -> None:
    config = _stage("config", _config, args)
    pair, _ = _stage("load", _load, args.data, config)

    def run():
        labels1 = pipeline.read_clusters(args.out / "net1.clusters.tsv", pair.net1)
        labels2 = pipeline.read_clusters(args.out / "net2.clusters.tsv", pair.net2)
        return matching.match_top_s(labels1, labels2, pair.labeled_anchors, config.s, config.k)

    pairs = _stage("match", run)
    pipeline.write_pairs(pairs, args.out / "pairs.tsv")


def cmd_align(args) -> None:
    config = _stage("config", _config, args)
    pair, _ = _stage("load", _load, args.data, config)
    _, _, pairs = _stage("match", _pairs_from_files, args.out, pair)
    per_diagram = _stage("proximity", lambda: pipeline.proximity.inter_diagram_scores(pair, config.inter_diagrams))
    problems = _stage("features", pipeline.build_problems, pairs, per_diagram, pair.labeled_anchors, config)
    solutions = _stage("align", pipeline.align_all, problems, config.threads)
    results = list(zip(problems, solutions))
    prediction = _stage("aggregate", pipeline.aggregate, results)
    pipeline.write_predictions(prediction, pair, args.out / "predictions.tsv")
    pipeline.write_convergence(results, args.out / "convergence.tsv")


def cmd_eval(args) -> None:
    config = _stage("config", _config, args)
    pair, test = _stage("load", _load, args.data, config)

    def run():
        predicted = pipeline.read_predictions(args.out / "predictions.tsv", pair)
        shape = (pair.net1.n_users, pair.net2.n_users)
        report = pipeline.evaluate(predicted, test, pair.labeled_anchors, shape)
        pairs_file = args.out / "pairs.tsv"
        if pairs_file.exists():
            _, _, pairs = _pairs_from_files(args.out, pair)
            report.coverage_ratio = matching.coverage_ratio(pairs, test)
            report.search_space = matching.search_space(pairs)
        report.total_candidates = shape[0] * shape[1]
        return report

    report = _stage("eval", run)
    pipeline.write_report(report, args.out / "report.json", config)
    print(json.dumps({"precision": report.precision, "recall": report.recall, "f1": report.f1}))


def cmd_pipeline(args) -> None:
    config = _stage("config", _config, args)
    pair, test = _stage("load", _load, args.data, config)
    result = pipeline.run_pipeline(config, pair, test, out_dir=args.out)
    r = result.report
    print(json.dumps({"precision": r.precision, "recall": r.recall, "f1": r.f1}))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hetalign", description="Partition-based anchor link inference.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="write a synthetic aligned network pair")
    g.add_argument("--out", type=Path, required=True)
    g.add_argument("--n-users", type=int, default=200)
    g.add_argument("--k-blocks", type=int, default=4)
    g.add_argument("--p-in", type=float, default=0.2)
    g.add_argument("--p-out", type=float, default=0.0)
    g.add_argument("--n-posts-per-user", type=int, default=5)
    g.add_argument("--attr-vocab", type=int, default=1000)
    g.add_argument("--anchor-fraction", type=float, default=0.5)
    g.add_argument("--noise", type=float, default=0.0)
    g.add_argument("--overlap", type=float, default=1.0)
    g.add_argument("--seed", type=int, default=0)
    g.set_defaults(func=cmd_gen)

    for name, func, help_ in [
        ("partition", cmd_partition, "co-partition both networks"),
        ("match", cmd_match, "select the top-s sub-network pairs"),
        ("align", cmd_align, "infer anchors inside the selected pairs"),
        ("eval", cmd_eval, "score predictions against held-out anchors"),
        ("pipeline", cmd_pipeline, "run every stage"),
    ]:
        p = sub.add_parser(name, help=help_)
        p.add_argument("--data", type=Path, required=True, help="directory in the layout written by gen")
        p.add_argument("--out", type=Path, required=True, help="work directory for stage artifacts")
        _add_config_args(p)
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except StageError as exc:
        print(f"hetalign {args.command}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
