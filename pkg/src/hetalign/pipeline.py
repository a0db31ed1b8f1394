"""End-to-end orchestration: proximity, partition, match, parallel align, evaluate."""
from __future__ import annotations

import dataclasses
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from . import graph, matching, partition, proximity
from .alignment import AlignmentProblem, AlignmentSolution, Prediction, aggregate, align_pair, extract_features
from .graph import AlignedPair, HeterogeneousNetwork, ValidationError

logger = logging.getLogger(__name__)


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage


def _parse_weights(value):
    if value is None or isinstance(value, Mapping):
        return value
    out = {}
    for item in str(value).split(","):
        name, _, w = item.partition("=")
        out[name.strip()] = float(w)
    return out


def _parse_names(value):
    if isinstance(value, str):
        return tuple(v.strip() for v in value.split(",") if v.strip())
    return tuple(value)


@dataclass
class PipelineConfig:
    # partition
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
    # diagrams
    intra_diagrams: tuple[str, ...] = proximity.DEFAULT_INTRA_DIAGRAMS
    inter_diagrams: tuple[str, ...] = proximity.DEFAULT_INTER_DIAGRAMS
    intra_weights: dict[str, float] | None = None
    inter_weights: dict[str, float] | None = None
    # matching / alignment
    s: int = 4
    c: float = 10.0
    threshold: float | None = None  # None: calibrated on labeled links
    align_max_iters: int = 50
    # data / runtime
    train_ratio: float = 0.5
    timestamp_bucket: float | None = graph.DEFAULT_TIMESTAMP_BUCKET
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        self.intra_diagrams = _parse_names(self.intra_diagrams)
        self.inter_diagrams = _parse_names(self.inter_diagrams)
        self.intra_weights = _parse_weights(self.intra_weights)
        self.inter_weights = _parse_weights(self.inter_weights)
        if isinstance(self.threshold, str):
            self.threshold = None if self.threshold.strip().lower() == "auto" else float(self.threshold)
        if not 0 < self.train_ratio < 1:
            raise ValueError("train_ratio must lie in (0, 1)")
        if self.s < 0 or self.s > self.k:
            raise ValueError(f"s must lie in [0, k]; got s={self.s}, k={self.k}")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")
        if self.c <= 0:
            raise ValueError("c must be > 0")
        self.partition_config()
        self.weights("intra")
        self.weights("inter")

    def partition_config(self) -> partition.PartitionConfig:
        return partition.PartitionConfig(
            k=self.k, alpha=self.alpha, beta=self.beta, theta=self.theta, rho1=self.rho1, rho2=self.rho2,
            eta1=self.eta1, eta2=self.eta2, max_iters=self.max_iters, tol=self.tol, seed=self.seed,
        )

    def weights(self, scope: str) -> proximity.DiagramWeights:
        names = self.intra_diagrams if scope == "intra" else self.inter_diagrams
        given = self.intra_weights if scope == "intra" else self.inter_weights
        w = proximity.DiagramWeights.uniform(names) if given is None else proximity.DiagramWeights(given)
        w.check(names)
        return w

    @classmethod
    def from_mapping(cls, values: Mapping[str, Any]) -> "PipelineConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(values) - known)
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**values)

    @classmethod
    def from_file(cls, path, **overrides) -> "PipelineConfig":
        """Flat JSON object of config keys; ``overrides`` win over the file."""
        with open(path, encoding="utf-8") as fh:
            values = json.load(fh)
        if not isinstance(values, dict):
            raise ValueError(f"{path}: config must be a JSON object")
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_mapping(values)

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        d["intra_diagrams"] = list(self.intra_diagrams)
        d["inter_diagrams"] = list(self.inter_diagrams)
        return d


# -- synthetic data -------------------------------------------------------------


@dataclass
class SyntheticData:
    pair: AlignedPair                      # labeled_anchors = revealed (training) anchors
    true_anchors: list[tuple[int, int]]
    train_anchors: list[tuple[int, int]]
    test_anchors: list[tuple[int, int]]
    blocks1: np.ndarray
    blocks2: np.ndarray


def _sbm(rng, blocks, p_in, p_out):
    same = blocks[:, None] == blocks[None, :]
    adj = rng.random((len(blocks), len(blocks))) < np.where(same, p_in, p_out)
    np.fill_diagonal(adj, False)
    return adj


def generate_synthetic(
    n_users: int = 200,
    k_blocks: int = 4,
    p_in: float = 0.2,
    p_out: float = 0.0,
    n_posts_per_user: int = 5,
    attr_vocab: int = 1000,
    anchor_fraction: float = 0.5,
    noise: float = 0.0,
    seed: int = 0,
    overlap: float = 1.0,
) -> SyntheticData:
    """Two planted k-block networks with a shared, partially revealed user correspondence.

    The first ``overlap * n_users`` latent users exist in both networks.
    Their follow links and post attributes are copied into network 2, each
    one independently resampled with probability ``noise``. Attribute tokens
    of a user are drawn from its block's slice of a vocabulary of
    ``attr_vocab`` locations and ``attr_vocab`` hourly timestamps.
    ``anchor_fraction`` of the true anchors are revealed as labeled.
    """
    if n_users < 1 or k_blocks < 1 or n_posts_per_user < 0 or attr_vocab < k_blocks:
        raise ValidationError("n_users, k_blocks must be positive and attr_vocab >= k_blocks")
    if not (0 <= p_out < p_in <= 1):
        raise ValidationError("need 0 <= p_out < p_in <= 1")
    if not (0 <= noise <= 1 and 0 <= anchor_fraction <= 1 and 0 <= overlap <= 1):
        raise ValidationError("noise, anchor_fraction and overlap must lie in [0, 1]")
    if k_blocks > n_users:
        raise ValidationError("more blocks than users")

    rng = np.random.default_rng(seed)
    n = n_users
    n_shared = int(round(overlap * n))
    blocks = (np.arange(n) * k_blocks) // n
    slice_len = attr_vocab // k_blocks

    def draw_tokens(block, size):
        return block * slice_len + rng.integers(0, slice_len, size=size)

    # latent network 1
    adj1 = _sbm(rng, blocks, p_in, p_out)
    loc1 = np.array([draw_tokens(b, n_posts_per_user) for b in blocks]).reshape(n, n_posts_per_user)
    ts1 = np.array([draw_tokens(b, n_posts_per_user) for b in blocks]).reshape(n, n_posts_per_user)

    # latent network 2: shared users copy network 1 up to noise
    fresh = _sbm(rng, blocks, p_in, p_out)
    keep = rng.random((n, n)) >= noise
    shared = np.zeros(n, dtype=bool)
    shared[:n_shared] = True
    both = shared[:, None] & shared[None, :]
    adj2 = np.where(both & keep, adj1, fresh)
    np.fill_diagonal(adj2, False)
    loc2 = np.array([draw_tokens(b, n_posts_per_user) for b in blocks]).reshape(n, n_posts_per_user)
    ts2 = np.array([draw_tokens(b, n_posts_per_user) for b in blocks]).reshape(n, n_posts_per_user)
    copy_loc = shared[:, None] & (rng.random((n, n_posts_per_user)) >= noise)
    copy_ts = shared[:, None] & (rng.random((n, n_posts_per_user)) >= noise)
    loc2 = np.where(copy_loc, loc1, loc2)
    ts2 = np.where(copy_ts, ts1, ts2)

    order1, order2 = rng.permutation(n), rng.permutation(n)

    def build(tag, order, adj, loc, ts):
        # order[i] = latent user placed at index i
        pos = np.empty(n, dtype=np.int64)
        pos[order] = np.arange(n)
        users = [f"{tag}{i}" for i in range(n)]
        follow = [(users[pos[a]], users[pos[b]]) for a, b in zip(*np.nonzero(adj))]
        posts, write, checkin, at = [], [], [], []
        for i, latent in enumerate(order):
            for j in range(n_posts_per_user):
                pid = f"{tag}{i}p{j}"
                posts.append(pid)
                write.append((users[i], pid))
                checkin.append((pid, f"loc{loc[latent, j]}"))
                at.append((pid, str(int(ts[latent, j]) * 3600)))
        locations = sorted({x for _, x in checkin}, key=lambda v: int(v[3:]))
        timestamps = sorted({t for _, t in at}, key=int)
        net = HeterogeneousNetwork.build(users, posts, locations, timestamps,
                                         follow=follow, write=write, checkin=checkin, at=at)
        return net, pos

    net1, pos1 = build("a", order1, adj1, loc1, ts1)
    net2, pos2 = build("b", order2, adj2, loc2, ts2)
    true_anchors = sorted((int(pos1[j]), int(pos2[j])) for j in range(n_shared))
    perm = rng.permutation(len(true_anchors))
    n_train = int(round(anchor_fraction * len(true_anchors)))
    train = sorted(true_anchors[i] for i in perm[:n_train])
    test = sorted(true_anchors[i] for i in perm[n_train:])
    return SyntheticData(AlignedPair(net1, net2, tuple(train)), true_anchors, train, test,
                         blocks[order1], blocks[order2])


def split_anchors(anchors, train_ratio: float, seed: int) -> tuple[list, list]:
    """Seeded uniform split of true anchors into (train, test)."""
    anchors = sorted(anchors)
    perm = np.random.default_rng(seed).permutation(len(anchors))
    n_train = int(round(train_ratio * len(anchors)))
    return sorted(anchors[i] for i in perm[:n_train]), sorted(anchors[i] for i in perm[n_train:])


# -- evaluation -----------------------------------------------------------------


@dataclass
class EvalReport:
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int
    coverage_ratio: float | None = None
    search_space: int | None = None
    total_candidates: int | None = None
    timings: dict[str, float] = field(default_factory=dict)
    align_iterations: list[int] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)


def evaluate(predictions, test_anchors, train_anchors=(), shape: tuple[int, int] | None = None) -> EvalReport:
    """Precision, recall and F1 of predicted anchors against held-out anchors.

    Predictions that are training anchors are ignored; anchors outside every
    matched pair were never predicted and count as false negatives.
    """
    test, train = set(map(tuple, test_anchors)), set(map(tuple, train_anchors))
    if test & train:
        raise ValidationError(f"{len(test & train)} anchors are in both the training and test sets")
    predicted = set(map(tuple, predictions)) - train
    if shape is not None:
        for a, b in predicted | test:
            if not (0 <= a < shape[0] and 0 <= b < shape[1]):
                raise ValidationError(f"anchor ({a}, {b}) outside the candidate space {shape}")
    tp = len(predicted & test)
    fp = len(predicted - test)
    fn = len(test - predicted)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return EvalReport(precision, recall, f1, tp, fp, fn)


# -- pipeline -------------------------------------------------------------------


@dataclass
class PipelineResult:
    report: EvalReport
    prediction: Prediction
    pairs: list[matching.MatchedPair]
    assignment: partition.ClusterAssignment
    state: partition.PartitionState
    solutions: list[tuple[AlignmentProblem, AlignmentSolution]]


class _Stages:
    def __init__(self):
        self.timings: dict[str, float] = {}

    def run(self, name, fn, *args, **kwargs):
        start = time.perf_counter()
        try:
            return fn(*args, **kwargs)
        except StageError:
            raise
        except Exception as exc:
            raise StageError(name, exc) from exc
        finally:
            self.timings[name] = time.perf_counter() - start


def compute_proximities(pair: AlignedPair, config: PipelineConfig):
    S1 = proximity.intra_md_pro(pair.net1, config.intra_diagrams, config.weights("intra"))
    S2 = proximity.intra_md_pro(pair.net2, config.intra_diagrams, config.weights("intra"))
    per_diagram = proximity.inter_diagram_scores(pair, config.inter_diagrams)
    S_inter = proximity.combine_scores(per_diagram, config.weights("inter"), (pair.net1.n_users, pair.net2.n_users))
    return S1, S2, S_inter, per_diagram


def build_problems(pairs, per_diagram, labeled, config: PipelineConfig) -> list[AlignmentProblem]:
    labeled = set(labeled)
    problems = []
    for p in pairs:
        X = extract_features(p.users1, p.users2, per_diagram)[:, :-1]
        problems.append(AlignmentProblem.build(
            p.users1, p.users2, X, labeled,
            c=config.c, max_iters=config.align_max_iters, threshold=config.threshold,
        ))
    return problems


def align_all(problems, threads: int = 1) -> list[AlignmentSolution]:
    """Solve every pair; results come back in input (rank) order."""
    if threads == 1 or len(problems) <= 1:
        return [align_pair(p) for p in problems]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(align_pair, problems))


def run_pipeline(config: PipelineConfig, pair: AlignedPair, test_anchors=None, out_dir=None) -> PipelineResult:
    """Run every stage on ``pair`` (whose labeled anchors are the training set)."""
    stages = _Stages()
    train = list(pair.labeled_anchors)
    S1, S2, S_inter, per_diagram = stages.run("proximity", compute_proximities, pair, config)
    pconf = config.partition_config()
    state = stages.run("partition", partition.synergistic_partition, S1, S2, S_inter, pconf)
    assignment = stages.run("clusters", partition.extract_clusters, state, config.k, config.seed)
    pairs = stages.run("match", matching.match_top_s, assignment.labels1, assignment.labels2,
                       train, config.s, config.k)
    problems = stages.run("features", build_problems, pairs, per_diagram, train, config)
    solutions = stages.run("align", align_all, problems, config.threads)
    results = list(zip(problems, solutions))
    prediction = stages.run("aggregate", aggregate, results)

    shape = (pair.net1.n_users, pair.net2.n_users)
    test = list(test_anchors) if test_anchors is not None else []
    report = stages.run("eval", evaluate, prediction.positives, test, train, shape)
    report.coverage_ratio = matching.coverage_ratio(pairs, test)
    report.search_space = matching.search_space(pairs)
    report.total_candidates = shape[0] * shape[1]
    report.align_iterations = [sol.iterations for sol in solutions]
    report.timings = dict(stages.timings)
    result = PipelineResult(report, prediction, pairs, assignment, state, results)
    if out_dir is not None:
        write_artifacts(result, pair, out_dir, config)
    return result


# -- artifacts ------------------------------------------------------------------


def write_clusters(labels, net: HeterogeneousNetwork, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for u, c in zip(net.users, labels):
            fh.write(f"{u}\t{int(c)}\n")


def read_clusters(path, net: HeterogeneousNetwork) -> np.ndarray:
    labels = np.full(net.n_users, -1, dtype=np.int64)
    for lineno, (u, c) in graph._rows(Path(path), 2):
        if u not in net.user_index:
            raise graph.ParseError(path, lineno, f"unknown user {u!r}")
        labels[net.user_index[u]] = int(c)
    if (labels < 0).any():
        raise ValidationError(f"{path}: {int((labels < 0).sum())} users have no cluster")
    return labels


def write_trace(state: partition.PartitionState, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("iter\tobjective\tncut1\tncut2\tdiscrepancy\n")
        for i, (obj, n1, n2, d) in enumerate(state.terms_trace):
            fh.write("\t".join([str(i)] + [repr(float(v)) for v in (obj, n1, n2, d)]) + "\n")


def write_pairs(pairs, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("rank\tsub1\tsub2\tm_score\tn_known_anchors\n")
        for p in pairs:
            fh.write(f"{p.rank}\t{p.sub1}\t{p.sub2}\t{p.m_score!r}\t{len(p.known_anchors)}\n")


def read_pairs(path) -> list[tuple[int, int, int]]:
    """``(rank, sub1, sub2)`` rows of a pairs file."""
    out = []
    for lineno, row in graph._rows(Path(path), 5):
        if row[0] == "rank":
            continue
        out.append((int(row[0]), int(row[1]), int(row[2])))
    return out


def write_predictions(prediction: Prediction, pair: AlignedPair, path) -> None:
    u1, u2 = pair.net1.users, pair.net2.users
    with open(path, "w", encoding="utf-8") as fh:
        for a, b, lab, score in sorted(prediction.rows):
            fh.write(f"{u1[a]}\t{u2[b]}\t{lab}\t{score!r}\n")


def read_predictions(path, pair: AlignedPair) -> set[tuple[int, int]]:
    out = set()
    for lineno, (a, b, lab, _) in graph._rows(Path(path), 4):
        try:
            idx = (pair.net1.user_index[a], pair.net2.user_index[b])
        except KeyError:
            raise graph.ParseError(path, lineno, f"unknown user in ({a!r}, {b!r})") from None
        if int(lab) == 1:
            out.add(idx)
    return out


def write_convergence(solutions, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("pair_rank\titer\tdelta_y\n")
        for rank, (_, sol) in enumerate(solutions):
            for it, dy in enumerate(sol.trace, 1):
                fh.write(f"{rank}\t{it}\t{dy}\n")


def write_report(report: EvalReport, path, config: PipelineConfig | None = None) -> None:
    doc = {"metrics": report.to_dict()}
    if config is not None:
        doc["config"] = config.to_dict()
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_artifacts(result: PipelineResult, pair: AlignedPair, out_dir, config: PipelineConfig) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_clusters(result.assignment.labels1, pair.net1, out / "net1.clusters.tsv")
    write_clusters(result.assignment.labels2, pair.net2, out / "net2.clusters.tsv")
    write_trace(result.state, out / "trace.tsv")
    write_pairs(result.pairs, out / "pairs.tsv")
    write_predictions(result.prediction, pair, out / "predictions.tsv")
    write_convergence(result.solutions, out / "convergence.tsv")
    write_report(result.report, out / "report.json", config)
