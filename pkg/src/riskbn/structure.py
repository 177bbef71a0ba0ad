"""Score-based structure search: decomposable BIC, constrained
hill-climbing over add/delete/reverse moves, and Structural EM."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .bn import CausalBayesianNetwork
from .completion import Completion, GroupedData, as_grouped
from .dataset import Dataset
from .errors import ConstraintError, GraphError, SchemaError
from .graph import Dag, EditMove, PriorKnowledge, apply_move
from .params import EmConfig, em_fit, table_from_counts, tabulate_family_counts

# A move must beat the incumbent score by this much; guards against
# floating-point noise oscillation without affecting real improvements.
IMPROVEMENT_EPS = 1e-9


@dataclass(frozen=True)
class ScoreConfig:
    """Scoring criterion settings; BIC with optional count smoothing."""

    kind: str = "BIC"
    ess: float = 0.0

    def __post_init__(self):
        if self.kind != "BIC":
            raise ValueError(f"only the BIC criterion is implemented, got {self.kind!r}")
        if self.ess < 0:
            raise ValueError("ess must be >= 0")


@dataclass(frozen=True)
class SemConfig:
    """Structural EM settings: inner EM, outer iteration cap and score."""

    em: EmConfig = EmConfig()
    max_sem_iterations: int = 10
    score: ScoreConfig = ScoreConfig()

    def __post_init__(self):
        if self.max_sem_iterations < 1:
            raise ValueError("max_sem_iterations must be >= 1")


class CompleteDataCounts:
    """Family-count source backed by a complete dataset."""

    def __init__(self, data: Dataset):
        if not data.is_complete():
            raise SchemaError("dataset has missing cells; run the search on expected statistics")
        self.data = data
        self.variables = data.variables
        self.n_records = float(data.n_records)

    def family_counts(self, child: str, parents: Sequence[str]) -> np.ndarray:
        return tabulate_family_counts(self.data, child, parents)


def as_count_source(data_or_stats) -> CompleteDataCounts | Completion:
    if isinstance(data_or_stats, Dataset):
        return CompleteDataCounts(data_or_stats)
    if isinstance(data_or_stats, (CompleteDataCounts, Completion)):
        return data_or_stats
    raise TypeError(
        f"expected a complete Dataset or a Completion, got {type(data_or_stats).__name__}"
    )


def bic_family_score(counts: np.ndarray, ess: float, n_records: float) -> float:
    """BIC term of one family from its (possibly fractional) counts.

    Fitted log-likelihood of the family minus
    (log n / 2) * (card(child) - 1) * (number of parent configurations).
    """
    counts = np.asarray(counts, dtype=np.float64)
    rows, card = counts.shape
    table = table_from_counts(counts, ess)
    mask = counts > 0
    loglik = float((counts[mask] * np.log(table[mask])).sum()) if mask.any() else 0.0
    penalty = 0.5 * math.log(n_records) * (card - 1) * rows if n_records > 0 else 0.0
    return loglik - penalty


def family_score(
    child: str,
    parents: Sequence[str],
    data_or_stats,
    score: ScoreConfig = ScoreConfig(),
    n_records: float | None = None,
) -> float:
    """Decomposable score of one family against data or expected statistics."""
    if child in tuple(parents):
        raise SchemaError(f"{child!r} cannot be its own parent")
    if isinstance(data_or_stats, np.ndarray):
        counts = data_or_stats
        if n_records is None:
            n_records = float(counts.sum())
    else:
        source = as_count_source(data_or_stats)
        counts = source.family_counts(child, tuple(parents))
        if n_records is None:
            n_records = source.n_records
    return bic_family_score(counts, score.ess, n_records)


def total_score(dag: Dag, data_or_stats, score: ScoreConfig = ScoreConfig()) -> float:
    """Sum of family scores over all nodes."""
    source = as_count_source(data_or_stats)
    return math.fsum(
        family_score(node, dag.parents(node), source, score) for node in dag.nodes
    )


def _moves_in_order(dag: Dag) -> list[EditMove]:
    # Fixed enumeration: all additions, then deletions, then reversals,
    # each ordered by (source index, target index). Tie-breaking and hence
    # the whole search is deterministic because of this order.
    moves = [
        EditMove.add(source, target)
        for source in dag.nodes
        for target in dag.nodes
        if source != target and not dag.has_edge(source, target)
    ]
    edges = dag.edge_list()
    moves += [EditMove.delete(source, target) for source, target in edges]
    moves += [EditMove.reverse(source, target) for source, target in edges]
    return moves


def hill_climb(
    data_or_stats,
    knowledge: PriorKnowledge | None = None,
    score: ScoreConfig = ScoreConfig(),
    start: Dag | None = None,
) -> Dag:
    """Greedy local search over add/delete/reverse moves.

    Returns a DAG satisfying the prior knowledge at which no single
    admissible move improves the summed family score.
    """
    source = as_count_source(data_or_stats)
    names = tuple(v.name for v in source.variables)
    k = knowledge if knowledge is not None else PriorKnowledge.empty()
    if start is None:
        start = Dag(names, k.required)
    if start.nodes != names:
        raise SchemaError("start graph nodes do not match the data variables")
    if not k.satisfied_by(start):
        raise ConstraintError("start graph violates the prior knowledge")

    rank = {name: i for i, name in enumerate(names)}
    cache: dict[tuple[str, tuple[str, ...]], float] = {}

    def scored(child: str, parents: tuple[str, ...]) -> float:
        key = (child, parents)
        if key not in cache:
            cache[key] = family_score(child, parents, source, score)
        return cache[key]

    def with_parent(parents: tuple[str, ...], extra: str) -> tuple[str, ...]:
        return tuple(sorted(parents + (extra,), key=rank.__getitem__))

    def without_parent(parents: tuple[str, ...], gone: str) -> tuple[str, ...]:
        return tuple(p for p in parents if p != gone)

    current = start
    node_score = {node: scored(node, current.parents(node)) for node in names}

    while True:
        best_delta = IMPROVEMENT_EPS
        best_move = None
        for move in _moves_in_order(current):
            try:
                apply_move(current, move, k)
            except GraphError:
                continue
            u, v = move.edge
            if move.kind.value == "add":
                delta = scored(v, with_parent(current.parents(v), u)) - node_score[v]
            elif move.kind.value == "delete":
                delta = scored(v, without_parent(current.parents(v), u)) - node_score[v]
            else:
                delta = (
                    scored(u, with_parent(current.parents(u), v))
                    + scored(v, without_parent(current.parents(v), u))
                    - node_score[u]
                    - node_score[v]
                )
            if delta > best_delta:
                best_delta = delta
                best_move = move
        if best_move is None:
            break
        current = apply_move(current, best_move, k)
        u, v = best_move.edge
        node_score[v] = scored(v, current.parents(v))
        node_score[u] = scored(u, current.parents(u))
    return current


def structural_em(
    data: Dataset | GroupedData,
    knowledge: PriorKnowledge | None = None,
    cfg: SemConfig = SemConfig(),
) -> Dag:
    """Alternate EM completion and constrained hill-climbing to a fixed point.

    Starts from the empty graph augmented with the required edges. Each
    outer iteration fits parameters on the current graph, freezes the
    resulting expected statistics, and runs hill-climbing against them;
    the loop stops when the graph no longer changes.
    """
    grouped = as_grouped(data)
    k = knowledge if knowledge is not None else PriorKnowledge.empty()
    names = tuple(v.name for v in grouped.variables)
    dag = Dag(names, k.required)
    for _ in range(cfg.max_sem_iterations):
        cpts, _ = em_fit(dag, grouped, cfg.em)
        network = CausalBayesianNetwork(dag, grouped.variables, cpts)
        frozen = Completion(network, grouped)
        updated = hill_climb(frozen, k, cfg.score, start=dag)
        if updated == dag:
            break
        dag = updated
    return dag
