"""Clinical cohort schema stand-in and synthetic network generators.

The real multicenter cohort is not distributable, so tests and experiments
run against synthetic cohorts drawn from a hand-specified generating
network whose variables, cardinalities and temporal tiers mirror the
clinical schema.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bn import CausalBayesianNetwork, network_from_tables
from .dataset import Variable
from .graph import Dag, PriorKnowledge

HOSPITAL = "Hospital"


@dataclass(frozen=True)
class CohortSchema:
    """Variable list with tier assignment and an optional context variable.

    The context variable (hospital of treatment) may have children but
    never parents: it sits alone in the earliest tier and additionally all
    edges into it are forbidden.
    """

    variables: tuple[Variable, ...]
    tiers: tuple[frozenset[str], ...]
    context: str | None = None

    def names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.variables)

    def variable(self, name: str) -> Variable:
        for var in self.variables:
            if var.name == name:
                return var
        raise KeyError(name)

    def prior_knowledge(self) -> PriorKnowledge:
        forbidden = []
        if self.context is not None:
            forbidden = [
                (name, self.context) for name in self.names() if name != self.context
            ]
        return PriorKnowledge(required=(), forbidden=forbidden, tiers=self.tiers)


_TIER1 = (
    ("ER", ("negative", "positive")),
    ("PR", ("negative", "positive")),
    ("L1CAM", ("negative", "positive")),
    ("p53", ("wildtype", "mutant")),
    ("CervicalCytology", ("normal", "abnormal")),
    ("Thrombocytosis", ("no", "yes")),
    ("Lymphadenopathy", ("no", "yes")),
    ("LVSI", ("no", "yes")),
    ("Ca125", ("normal", "elevated")),
    ("PreoperativeGrade", ("grade1", "grade2", "grade3")),
)
_TIER2 = (
    ("Chemotherapy", ("no", "yes")),
    ("Radiotherapy", ("no", "yes")),
    ("PostoperativeGrade", ("grade1", "grade2", "grade3")),
)
_TIER3 = (
    ("DSS1yr", ("alive", "deceased")),
    ("DSS3yr", ("alive", "deceased")),
    ("DSS5yr", ("alive", "deceased")),
    ("LNM", ("negative", "positive")),
    ("MyometrialInvasion", ("lt50pct", "ge50pct")),
)

REFERENCE_EDGES = (
    ("PreoperativeGrade", "ER"),
    ("PreoperativeGrade", "PR"),
    ("PreoperativeGrade", "L1CAM"),
    ("PreoperativeGrade", "p53"),
    ("PreoperativeGrade", "Ca125"),
    ("PreoperativeGrade", "LVSI"),
    ("PreoperativeGrade", "CervicalCytology"),
    ("ER", "PR"),
    ("Ca125", "Thrombocytosis"),
    ("LVSI", "Lymphadenopathy"),
    ("PreoperativeGrade", "PostoperativeGrade"),
    ("LVSI", "Chemotherapy"),
    ("Lymphadenopathy", "Radiotherapy"),
    ("LVSI", "MyometrialInvasion"),
    ("MyometrialInvasion", "LNM"),
    ("PostoperativeGrade", "LNM"),
    ("Chemotherapy", "LNM"),
    ("LNM", "DSS1yr"),
    ("Chemotherapy", "DSS1yr"),
    ("DSS1yr", "DSS3yr"),
    ("Radiotherapy", "DSS3yr"),
    ("DSS3yr", "DSS5yr"),
)


def clinical_schema(include_hospital: bool = False) -> CohortSchema:
    """The 18-variable clinical schema; 19 with the hospital context variable."""
    specs = list(_TIER1) + list(_TIER2) + list(_TIER3)
    variables = [Variable(name, states) for name, states in specs]
    tiers = [
        frozenset(name for name, _ in _TIER1),
        frozenset(name for name, _ in _TIER2),
        frozenset(name for name, _ in _TIER3),
    ]
    context = None
    if include_hospital:
        hospital = Variable(HOSPITAL, tuple(f"h{i:02d}" for i in range(1, 11)))
        variables.insert(0, hospital)
        tiers.insert(0, frozenset({HOSPITAL}))
        context = HOSPITAL
    return CohortSchema(variables=tuple(variables), tiers=tuple(tiers), context=context)


def strong_tables(
    dag: Dag,
    variables: tuple[Variable, ...],
    seed: int,
    sharpness: float = 0.3,
    floor: float = 0.08,
) -> dict[str, np.ndarray]:
    """Row-stochastic tables with a graded, monotone parent response.

    The sum of a row's parent states, rescaled to [0, 1], places the mode
    of the child's distribution along its state axis, so every single
    parent shifts the child's distribution in the same direction (no
    parity-style interactions a greedy search could never see). The
    response direction alternates across nodes; ``floor`` keeps all
    probabilities away from zero. Root marginals are mildly random.
    """
    rng = np.random.default_rng(seed)
    by_name = {v.name: v for v in variables}
    tables: dict[str, np.ndarray] = {}
    for offset, node in enumerate(dag.nodes):
        card = by_name[node].card
        parent_cards = [by_name[p].card for p in dag.parents(node)]
        n_rows = int(np.prod(parent_cards)) if parent_cards else 1
        if not parent_cards:
            tables[node] = rng.dirichlet(np.full(card, 5.0)).reshape(1, card)
            continue
        table = np.empty((n_rows, card))
        configs = np.stack(
            np.meshgrid(*[np.arange(c) for c in parent_cards], indexing="ij"), axis=-1
        ).reshape(n_rows, len(parent_cards))
        max_level = sum(c - 1 for c in parent_cards)
        states = np.arange(card, dtype=float)
        for row in range(n_rows):
            level = float(configs[row].sum()) / max_level
            if offset % 2:
                level = 1.0 - level
            center = level * (card - 1) + 0.15 * (rng.random() - 0.5)
            weights = np.exp(-np.abs(states - center) / sharpness)
            weights /= weights.sum()
            table[row] = (1.0 - floor) * weights + floor / card
        tables[node] = table
    return tables


def reference_network(seed: int = 7) -> CausalBayesianNetwork:
    """Stand-in generating network over the 18 clinical variables.

    The edge set follows the variable roles (grade drives the biomarker
    cluster, invasion and treatment drive the target, outcomes chain
    forward in time) and respects the temporal tiers. For synthetic tests
    only; it is not elicited clinical knowledge.
    """
    schema = clinical_schema(include_hospital=False)
    dag = Dag(schema.names(), REFERENCE_EDGES)
    tables = strong_tables(dag, schema.variables, seed=seed)
    return network_from_tables(dag, schema.variables, tables)


def random_dag(n_nodes: int, seed: int, edge_prob: float = 0.4) -> Dag:
    """Random DAG: random node permutation, forward edges kept with edge_prob."""
    rng = np.random.default_rng(seed)
    names = [f"X{i}" for i in range(n_nodes)]
    order = rng.permutation(n_nodes)
    edges = []
    for a in range(n_nodes):
        for b in range(a + 1, n_nodes):
            if rng.random() < edge_prob:
                edges.append((names[order[a]], names[order[b]]))
    return Dag(names, edges)


def random_network(
    n_nodes: int,
    seed: int,
    max_card: int = 3,
    edge_prob: float = 0.4,
    concentration: float = 1.0,
) -> CausalBayesianNetwork:
    """Random network with Dirichlet CPT rows; deterministic per seed."""
    rng = np.random.default_rng(seed)
    dag = random_dag(n_nodes, seed=seed + 1, edge_prob=edge_prob)
    cards = rng.integers(2, max_card + 1, size=n_nodes)
    variables = tuple(
        Variable(name, tuple(f"s{j}" for j in range(cards[i])))
        for i, name in enumerate(dag.nodes)
    )
    by_name = {v.name: v for v in variables}
    tables = {}
    for node in dag.nodes:
        card = by_name[node].card
        parent_cards = [by_name[p].card for p in dag.parents(node)]
        n_rows = int(np.prod(parent_cards)) if parent_cards else 1
        tables[node] = rng.dirichlet(np.full(card, concentration), size=n_rows)
    return network_from_tables(dag, variables, tables)
