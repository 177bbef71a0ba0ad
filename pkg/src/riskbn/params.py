"""Parameter estimation: closed-form counts on complete data, EM otherwise."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .bn import CausalBayesianNetwork, Cpt, mixed_radix_strides
from .completion import Completion, GroupedData, as_grouped
from .dataset import Dataset, Variable
from .errors import SchemaError
from .graph import Dag

INIT_KINDS = ("uniform", "random")


@dataclass(frozen=True)
class EmConfig:
    """EM settings.

    ``ess`` is the total Dirichlet pseudo-count spread over each CPT; the
    default of 1 keeps every fitted probability strictly positive so
    inference never meets zero-probability evidence. Convergence is on the
    relative change of the observed-data log-likelihood,
    |ll_t - ll_{t-1}| / max(1, |ll_{t-1}|).
    """

    max_iterations: int = 100
    tolerance: float = 1e-6
    ess: float = 1.0
    init: str = "uniform"
    seed: int = 0

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be > 0")
        if self.ess < 0:
            raise ValueError("ess must be >= 0")
        if self.init not in INIT_KINDS:
            raise ValueError(f"init must be one of {INIT_KINDS}")


@dataclass(frozen=True)
class SufficientStatistics:
    """Per-node (expected) count tables, congruent to the CPT shapes."""

    counts: dict[str, np.ndarray]
    n_records: float


def _check_schema(dag: Dag, variables: Sequence[Variable]) -> None:
    if tuple(v.name for v in variables) != dag.nodes:
        raise SchemaError("dataset variables do not match the graph's nodes")


def tabulate_family_counts(data: Dataset, child: str, parents: Sequence[str]) -> np.ndarray:
    """Exact counts of one family's configurations in complete data."""
    child_col = data.column(child)
    child_card = data.variable(child).card
    parent_cards = [data.variable(p).card for p in parents]
    if (child_col < 0).any() or any((data.column(p) < 0).any() for p in parents):
        raise SchemaError("complete data required for direct tabulation")
    n_rows = int(np.prod(parent_cards)) if parents else 1
    if parents:
        strides = mixed_radix_strides(parent_cards)
        cols = np.stack([data.column(p) for p in parents], axis=1)
        rows = cols @ strides
    else:
        rows = np.zeros(data.n_records, dtype=np.int64)
    flat = rows * child_card + child_col
    counts = np.bincount(flat, minlength=n_rows * child_card)
    return counts.reshape(n_rows, child_card).astype(np.float64)


def table_from_counts(counts: np.ndarray, ess: float) -> np.ndarray:
    """Row-normalize counts with a Dirichlet pseudo-count of ``ess`` total.

    Each cell gets ess / (rows * card) extra mass; with ess = 0, rows with
    zero total become uniform.
    """
    counts = np.asarray(counts, dtype=np.float64)
    rows, card = counts.shape
    alpha_cell = ess / (rows * card)
    row_totals = counts.sum(axis=1) + ess / rows
    table = np.empty_like(counts)
    positive = row_totals > 0
    table[positive] = (counts[positive] + alpha_cell) / row_totals[positive, None]
    table[~positive] = 1.0 / card
    return table


def cpts_from_counts(
    dag: Dag, variables: Sequence[Variable], counts: Mapping[str, np.ndarray], ess: float
) -> dict[str, Cpt]:
    return {
        node: Cpt(node, dag.parents(node), table_from_counts(counts[node], ess))
        for node in dag.nodes
    }


def mle_fit(dag: Dag, data: Dataset, ess: float = 0.0) -> dict[str, Cpt]:
    """Closed-form (smoothed) maximum-likelihood CPTs from complete data."""
    _check_schema(dag, data.variables)
    if not data.is_complete():
        raise SchemaError("mle_fit needs complete data; use em_fit for missing cells")
    counts = {
        node: tabulate_family_counts(data, node, dag.parents(node)) for node in dag.nodes
    }
    return cpts_from_counts(dag, data.variables, counts, ess)


def expected_counts(bn: CausalBayesianNetwork, data: Dataset | GroupedData) -> SufficientStatistics:
    """Expected family counts of the network's own families given the data.

    Complete records contribute indicator counts; incomplete ones spread
    posterior mass over their missing cells.
    """
    completion = Completion(bn, data)
    counts = {
        node: completion.family_counts(node, bn.dag.parents(node)) for node in bn.dag.nodes
    }
    return SufficientStatistics(counts=counts, n_records=completion.n_records)


def _initial_cpts(
    dag: Dag, variables: Sequence[Variable], cfg: EmConfig
) -> dict[str, Cpt]:
    by_name = {v.name: v for v in variables}
    rng = np.random.default_rng(cfg.seed)
    cpts = {}
    for node in dag.nodes:
        parent_cards = [by_name[p].card for p in dag.parents(node)]
        n_rows = int(np.prod(parent_cards)) if parent_cards else 1
        card = by_name[node].card
        if cfg.init == "uniform":
            table = np.full((n_rows, card), 1.0 / card)
        else:
            table = rng.dirichlet(np.ones(card), size=n_rows)
        cpts[node] = Cpt(node, dag.parents(node), table)
    return cpts


def em_fit(
    dag: Dag, data: Dataset | GroupedData, cfg: EmConfig = EmConfig()
) -> tuple[dict[str, Cpt], list[float]]:
    """EM parameter fit on (possibly) incomplete data.

    Returns the fitted CPTs and the observed-data log-likelihood trace, one
    entry per E-step, evaluated at the parameters entering that step.
    """
    grouped = as_grouped(data)
    _check_schema(dag, grouped.variables)
    variables = grouped.variables
    families = [(node, dag.parents(node)) for node in dag.nodes]
    cpts = _initial_cpts(dag, variables, cfg)
    trace: list[float] = []
    for _ in range(cfg.max_iterations):
        network = CausalBayesianNetwork(dag, variables, cpts)
        completion = Completion(network, grouped)
        trace.append(completion.loglik)
        if len(trace) >= 2:
            previous, current = trace[-2], trace[-1]
            if abs(current - previous) / max(1.0, abs(previous)) < cfg.tolerance:
                break
        counts = {node: completion.family_counts(node, parents) for node, parents in families}
        cpts = cpts_from_counts(dag, variables, counts, cfg.ess)
    return cpts, trace
