"""Bootstrap edge-confidence estimation and model-averaged network building.

The confidence matrix holds, per ordered node pair, the fraction of
bootstrap-learned graphs containing that edge. The average graph keeps the
edges whose confidence clears a threshold, inserted greedily in decreasing
confidence so the result is always a DAG.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .bn import CausalBayesianNetwork
from .completion import GroupedData
from .dataset import Dataset
from .errors import DataFormatError, GraphError
from .graph import Dag, Edge, PriorKnowledge
from .params import em_fit
from .structure import SemConfig, structural_em


@dataclass(frozen=True)
class BootstrapConfig:
    """Bootstrap settings: n resamples of m records each, plus the seed the
    per-bootstrap seeds derive from (bootstrap i uses seed + i)."""

    n: int = 25
    m: int | None = None  # None: resamples match the dataset size
    seed: int = 0
    sem: SemConfig = SemConfig()

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.m is not None and self.m < 1:
            raise ValueError("m must be >= 1")


@dataclass(frozen=True)
class ConfidenceMatrix:
    """Edge-inclusion frequencies over n bootstrap graphs.

    Entries are exact multiples of 1/n: ``counts[i, j]`` graphs contained
    the edge nodes[i] -> nodes[j].
    """

    nodes: tuple[str, ...]
    counts: np.ndarray
    n: int

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        size = len(self.nodes)
        if counts.shape != (size, size):
            raise ValueError(f"counts must be {size}x{size}")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if (counts < 0).any() or (counts > self.n).any():
            raise ValueError("counts must lie in [0, n]")
        if np.diagonal(counts).any():
            raise ValueError("diagonal must be zero")
        counts = counts.copy()
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "nodes", tuple(self.nodes))

    @property
    def values(self) -> np.ndarray:
        return self.counts / self.n

    def value(self, source: str, target: str) -> float:
        return float(self.counts[self.nodes.index(source), self.nodes.index(target)]) / self.n

    def edge_strengths(self) -> list[tuple[str, str, float]]:
        """Nonzero entries as (source, target, strength), strongest first."""
        out = []
        for i, source in enumerate(self.nodes):
            for j, target in enumerate(self.nodes):
                if self.counts[i, j]:
                    out.append((source, target, float(self.counts[i, j]) / self.n))
        out.sort(key=lambda item: (-item[2], self.nodes.index(item[0]), self.nodes.index(item[1])))
        return out


def resample(data: Dataset, m: int, seed: int) -> Dataset:
    """m records drawn uniformly with replacement; missing cells ride along."""
    if data.n_records == 0:
        raise ValueError("cannot resample an empty dataset")
    if m < 1:
        raise ValueError("m must be >= 1")
    rng = np.random.default_rng(seed)
    rows = rng.integers(0, data.n_records, size=m)
    return data.subset(rows)


def _bootstrap_edges(args) -> set[tuple[int, int]]:
    data, knowledge, sem, m, seed = args
    sample = resample(data, m, seed)
    dag = structural_em(sample, knowledge, sem)
    index = {name: i for i, name in enumerate(dag.nodes)}
    return {(index[s], index[t]) for s, t in dag.edges}


def confidence_matrix(
    data: Dataset,
    knowledge: PriorKnowledge | None = None,
    cfg: BootstrapConfig = BootstrapConfig(),
    workers: int = 1,
    on_progress: Callable[[int, int], None] | None = None,
) -> ConfidenceMatrix:
    """Learn a graph on each of n bootstrap resamples and count edges.

    Bootstrap i runs on ``resample(data, m, cfg.seed + i)``, so the result
    does not depend on execution order and parallel runs reproduce the
    sequential output exactly. ``on_progress(done, total)`` is a side
    channel for long runs; it never influences the result.
    """
    if data.n_records == 0:
        raise ValueError("dataset is empty")
    k = knowledge if knowledge is not None else PriorKnowledge.empty()
    m = cfg.m if cfg.m is not None else data.n_records
    names = tuple(v.name for v in data.variables)
    tasks = [(data, k, cfg.sem, m, cfg.seed + i) for i in range(cfg.n)]
    edge_sets: list[set[tuple[int, int]] | None] = [None] * cfg.n

    if workers > 1 and cfg.n > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {pool.submit(_bootstrap_edges, task): i for i, task in enumerate(tasks)}
            for done, future in enumerate(as_completed(futures), start=1):
                edge_sets[futures[future]] = future.result()
                if on_progress is not None:
                    on_progress(done, cfg.n)
    else:
        for i, task in enumerate(tasks):
            edge_sets[i] = _bootstrap_edges(task)
            if on_progress is not None:
                on_progress(i + 1, cfg.n)

    counts = np.zeros((len(names), len(names)), dtype=np.int64)
    for edges in edge_sets:
        for i, j in edges:
            counts[i, j] += 1
    return ConfidenceMatrix(nodes=names, counts=counts, n=cfg.n)


@dataclass(frozen=True)
class AverageGraphResult:
    """Average graph plus a record of what the greedy insertion skipped."""

    dag: Dag
    included: tuple[Edge, ...]
    skipped_cycle: tuple[Edge, ...]
    skipped_forbidden: tuple[Edge, ...]
    dropped_ties: tuple[tuple[Edge, Edge], ...]


def build_average_graph(
    confidence: ConfidenceMatrix, threshold: float, knowledge: PriorKnowledge | None = None
) -> AverageGraphResult:
    """Assemble the average graph from edges with confidence >= threshold.

    Required edges go in first, unconditionally. Remaining candidates are
    inserted in decreasing confidence, skipping any that would close a
    cycle or violate the constraints. When both directions of a pair clear
    the threshold only the higher-confidence one is considered; on an exact
    tie the tier order decides, and with no tier information both are
    dropped and reported.
    """
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must be in [0, 1], got {threshold}")
    k = knowledge if knowledge is not None else PriorKnowledge.empty()
    nodes = confidence.nodes
    index = {name: i for i, name in enumerate(nodes)}
    for source, target in k.required:
        if source not in index or target not in index:
            raise GraphError(f"required edge {source!r} -> {target!r} names an unknown node")

    values = confidence.values
    candidates: dict[Edge, float] = {}
    for i, source in enumerate(nodes):
        for j, target in enumerate(nodes):
            if i != j and values[i, j] >= threshold and (source, target) not in k.required:
                candidates[(source, target)] = float(values[i, j])

    dropped_ties: list[tuple[Edge, Edge]] = []
    for edge in sorted(candidates, key=lambda e: (index[e[0]], index[e[1]])):
        mirror = (edge[1], edge[0])
        if mirror not in candidates or index[edge[0]] > index[edge[1]]:
            continue  # handle each antiparallel pair once
        forward, backward = candidates[edge], candidates[mirror]
        if forward > backward:
            del candidates[mirror]
        elif backward > forward:
            del candidates[edge]
        else:
            tier_a, tier_b = k.tier_of(edge[0]), k.tier_of(edge[1])
            if tier_a is not None and tier_b is not None and tier_a != tier_b:
                loser = mirror if tier_a < tier_b else edge
                del candidates[loser]
            else:
                del candidates[edge]
                del candidates[mirror]
                dropped_ties.append((edge, mirror))

    edges: set[Edge] = set(k.required)
    included: list[Edge] = []
    skipped_cycle: list[Edge] = []
    skipped_forbidden: list[Edge] = []
    working = Dag(nodes, edges)
    order = sorted(candidates, key=lambda e: (-candidates[e], index[e[0]], index[e[1]]))
    for source, target in order:
        if (source, target) in k.all_forbidden:
            skipped_forbidden.append((source, target))
            continue
        if working.reaches(target, source):
            skipped_cycle.append((source, target))
            continue
        edges.add((source, target))
        included.append((source, target))
        working = Dag(nodes, edges)

    return AverageGraphResult(
        dag=working,
        included=tuple(included),
        skipped_cycle=tuple(skipped_cycle),
        skipped_forbidden=tuple(skipped_forbidden),
        dropped_ties=tuple(dropped_ties),
    )


def average_graph(
    confidence: ConfidenceMatrix, threshold: float, knowledge: PriorKnowledge | None = None
) -> Dag:
    return build_average_graph(confidence, threshold, knowledge).dag


@dataclass(frozen=True)
class LearnedNetwork:
    """Full pipeline output: the fitted network plus its side artifacts."""

    network: CausalBayesianNetwork
    confidence: ConfidenceMatrix
    average: AverageGraphResult
    em_trace: tuple[float, ...]


def learn_cbn(
    data: Dataset,
    knowledge: PriorKnowledge | None = None,
    cfg: BootstrapConfig = BootstrapConfig(),
    threshold: float = 0.5,
    workers: int = 1,
) -> LearnedNetwork:
    """Confidence matrix -> average graph -> EM fit on the full dataset."""
    confidence = confidence_matrix(data, knowledge, cfg, workers=workers)
    average = build_average_graph(confidence, threshold, knowledge)
    cpts, trace = em_fit(average.dag, GroupedData(data), cfg.sem.em)
    network = CausalBayesianNetwork(average.dag, data.variables, cpts)
    return LearnedNetwork(
        network=network, confidence=confidence, average=average, em_trace=tuple(trace)
    )


# -- text formats -----------------------------------------------------------


def format_confidence(confidence: ConfidenceMatrix) -> str:
    """Square text table: header row/column of node names, 6-decimal entries."""
    lines = [f"# edge confidence over n={confidence.n} bootstraps"]
    lines.append("node " + " ".join(confidence.nodes))
    values = confidence.values
    for i, name in enumerate(confidence.nodes):
        lines.append(name + " " + " ".join(f"{values[i, j]:.6f}" for j in range(len(confidence.nodes))))
    return "\n".join(lines) + "\n"


def parse_confidence(text: str) -> ConfidenceMatrix:
    n = None
    header: list[str] | None = None
    rows: list[tuple[str, list[float]]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            marker = "n="
            if marker in line:
                try:
                    n = int(line.split(marker, 1)[1].split()[0])
                except ValueError:
                    raise DataFormatError(f"line {lineno}: bad bootstrap count") from None
            continue
        parts = line.split()
        if header is None:
            if parts[0] != "node":
                raise DataFormatError(f"line {lineno}: expected header starting with 'node'")
            header = parts[1:]
            continue
        rows.append((parts[0], [float(tok) for tok in parts[1:]]))
    if n is None or header is None:
        raise DataFormatError("confidence table lacks the n= comment or header row")
    if [name for name, _ in rows] != header:
        raise DataFormatError("row names do not match the header")
    values = np.asarray([vals for _, vals in rows], dtype=np.float64)
    counts = np.rint(values * n).astype(np.int64)
    return ConfidenceMatrix(nodes=tuple(header), counts=counts, n=n)


def read_confidence(path) -> ConfidenceMatrix:
    with open(path, "r", encoding="utf-8") as handle:
        return parse_confidence(handle.read())


def write_confidence(path, confidence: ConfidenceMatrix) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(format_confidence(confidence))


def format_edge_strengths(confidence: ConfidenceMatrix) -> str:
    """Columnar strength-plot data: source, target, strength per line."""
    lines = ["source target strength"]
    for source, target, strength in confidence.edge_strengths():
        lines.append(f"{source} {target} {strength:.6f}")
    return "\n".join(lines) + "\n"


def write_edge_strengths(path, confidence: ConfidenceMatrix) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(format_edge_strengths(confidence))
