"""Discrete causal Bayesian networks: representation, exact inference,
forward sampling, likelihood, and the model file format."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .dataset import Dataset, Variable
from .errors import DataFormatError, ImpossibleEvidenceError, SchemaError
from .factors import Factor, eliminate_variables, min_fill_order, multiply_all
from .graph import Dag

ROW_SUM_TOL = 1e-9


def mixed_radix_strides(cards: Sequence[int]) -> np.ndarray:
    """Row strides for mixed-radix indexing; the last variable varies fastest."""
    strides = np.ones(len(cards), dtype=np.int64)
    for i in range(len(cards) - 2, -1, -1):
        strides[i] = strides[i + 1] * cards[i + 1]
    return strides


@dataclass(frozen=True)
class Cpt:
    """Conditional probability table for one node.

    ``table`` has one row per parent-state configuration, in mixed-radix
    order over the parents as listed (last parent varies fastest), and one
    column per child state. Every row is a probability vector.
    """

    child: str
    parents: tuple[str, ...]
    table: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "parents", tuple(self.parents))
        table = np.asarray(self.table, dtype=np.float64)
        if table.ndim != 2:
            raise SchemaError(f"CPT for {self.child!r} must be 2-d (rows, child states)")
        if (table < 0).any() or (table > 1).any():
            raise SchemaError(f"CPT for {self.child!r} has entries outside [0, 1]")
        sums = table.sum(axis=1)
        if np.abs(sums - 1.0).max(initial=0.0) > ROW_SUM_TOL:
            worst = int(np.argmax(np.abs(sums - 1.0)))
            raise SchemaError(
                f"CPT row {worst} of {self.child!r} sums to {sums[worst]!r}, expected 1"
            )
        table = table.copy()
        table.setflags(write=False)
        object.__setattr__(self, "table", table)

    @property
    def n_rows(self) -> int:
        return self.table.shape[0]

    @property
    def card(self) -> int:
        return self.table.shape[1]


class CausalBayesianNetwork:
    """A DAG plus one CPT per node; immutable after construction."""

    __slots__ = ("dag", "variables", "cpts", "_vars_by_name", "_strides")

    def __init__(self, dag: Dag, variables: Sequence[Variable], cpts: Mapping[str, Cpt]):
        self.dag = dag
        self.variables: tuple[Variable, ...] = tuple(variables)
        names = tuple(v.name for v in self.variables)
        if names != dag.nodes:
            raise SchemaError("variable list and dag node list do not coincide")
        self._vars_by_name = {v.name: v for v in self.variables}

        if set(cpts) != set(names):
            raise SchemaError("need exactly one CPT per node")
        strides: dict[str, np.ndarray] = {}
        for name in names:
            cpt = cpts[name]
            if cpt.child != name:
                raise SchemaError(f"CPT filed under {name!r} is for child {cpt.child!r}")
            expected_parents = dag.parents(name)
            if cpt.parents != expected_parents:
                raise SchemaError(
                    f"CPT parents {cpt.parents!r} for {name!r} do not match "
                    f"graph parents {expected_parents!r}"
                )
            parent_cards = [self._vars_by_name[p].card for p in cpt.parents]
            n_rows = int(np.prod(parent_cards)) if parent_cards else 1
            if cpt.table.shape != (n_rows, self._vars_by_name[name].card):
                raise SchemaError(
                    f"CPT for {name!r} has shape {cpt.table.shape}, "
                    f"expected {(n_rows, self._vars_by_name[name].card)}"
                )
            strides[name] = mixed_radix_strides(parent_cards)
        self.cpts = dict(cpts)
        self._strides = strides

    # -- bookkeeping --------------------------------------------------------

    def variable(self, name: str) -> Variable:
        try:
            return self._vars_by_name[name]
        except KeyError:
            raise SchemaError(f"unknown variable {name!r}") from None

    def card(self, name: str) -> int:
        return self.variable(name).card

    def state_index(self, name: str, state: str | int) -> int:
        var = self.variable(name)
        if isinstance(state, str):
            return var.index_of(state)
        state = int(state)
        if not 0 <= state < var.card:
            raise SchemaError(f"state index {state} out of range for {name!r}")
        return state

    def _evidence_codes(self, evidence: Mapping[str, str | int]) -> dict[str, int]:
        return {name: self.state_index(name, state) for name, state in evidence.items()}

    def parent_row(self, node: str, codes: Mapping[str, int]) -> int:
        parents = self.dag.parents(node)
        if not parents:
            return 0
        strides = self._strides[node]
        return int(sum(codes[p] * int(strides[i]) for i, p in enumerate(parents)))

    def factor_for(self, node: str) -> Factor:
        """The node's CPT as a factor over (parents..., node)."""
        cpt = self.cpts[node]
        cards = [self.card(p) for p in cpt.parents] + [self.card(node)]
        return Factor(cpt.parents + (node,), cpt.table.reshape(cards))

    # -- core quantities ------------------------------------------------------

    def joint_probability(self, assignment: Mapping[str, str | int]) -> float:
        """Product of matching CPT entries for one full assignment."""
        codes = self._evidence_codes(assignment)
        missing = [n for n in self.dag.nodes if n not in codes]
        if missing:
            raise SchemaError(f"assignment does not cover {missing!r}")
        prob = 1.0
        for node in self.dag.nodes:
            row = self.parent_row(node, codes)
            prob *= float(self.cpts[node].table[row, codes[node]])
        return prob

    def log_likelihood(self, data: Dataset) -> float:
        """Sum of log joint probabilities over complete records.

        Returns -inf when any record has probability zero.
        """
        if tuple(data.variables) != self.variables:
            raise SchemaError("dataset schema does not match the network")
        if not data.is_complete():
            raise SchemaError("log_likelihood needs complete data")
        per_record = np.zeros(data.n_records, dtype=np.float64)
        for node in self.dag.nodes:
            cpt = self.cpts[node]
            child = data.column(node)
            if cpt.parents:
                cols = np.stack([data.column(p) for p in cpt.parents], axis=1)
                rows = cols @ self._strides[node]
            else:
                rows = np.zeros(data.n_records, dtype=np.int64)
            probs = cpt.table[rows, child]
            if (probs == 0).any():
                return float("-inf")
            per_record += np.log(probs)
        return math.fsum(per_record.tolist())

    def sample(self, count: int, seed: int) -> Dataset:
        """Forward sampling in topological order; deterministic per seed."""
        if count < 1:
            raise ValueError("count must be >= 1")
        rng = np.random.default_rng(seed)
        names = self.dag.nodes
        columns = {name: np.zeros(count, dtype=np.int64) for name in names}
        for node in self.dag.topological_order():
            cpt = self.cpts[node]
            if cpt.parents:
                cols = np.stack([columns[p] for p in cpt.parents], axis=1)
                rows = cols @ self._strides[node]
            else:
                rows = np.zeros(count, dtype=np.int64)
            cumulative = np.cumsum(cpt.table, axis=1)[rows]
            draws = rng.random(count)
            columns[node] = (draws[:, None] >= cumulative).sum(axis=1).astype(np.int64)
        codes = np.stack([columns[name] for name in names], axis=1)
        return Dataset(self.variables, codes)

    # -- exact inference -------------------------------------------------------

    def _posterior_factor(
        self, evidence: Mapping[str, int], targets: Sequence[str]
    ) -> tuple[Factor, float, float]:
        """Unnormalized joint over ``targets`` given evidence.

        Returns (shaped joint, shaped total, full total). Scalar factors
        left over from evidence reduction are kept out of the shaped joint:
        they cancel in the normalized posterior anyway, and multiplying
        them in would leave order-dependent rounding noise on values that
        should be identical. The full total (scalars included) is the
        evidence probability P(evidence).
        """
        rank = {name: i for i, name in enumerate(self.dag.nodes)}
        reduced: list[Factor] = []
        for node in self.dag.nodes:
            factor = self.factor_for(node)
            for var, state in evidence.items():
                if var in factor.scope:
                    factor = factor.reduce(var, state)
            reduced.append(factor)
        hidden = [n for n in self.dag.nodes if n not in evidence and n not in targets]
        order = min_fill_order([f.scope for f in reduced], hidden, rank)
        remaining = eliminate_variables(reduced, order)
        scalar = 1.0
        shaped_parts = []
        for factor in remaining:
            if factor.scope:
                shaped_parts.append(factor)
            else:
                scalar *= float(factor.values)
        joint = multiply_all(shaped_parts)
        if targets:
            joint = joint.transpose_to([t for t in self.dag.nodes if t in targets])
        shaped_total = joint.total()
        return joint, shaped_total, scalar * shaped_total

    def joint_posterior(
        self, evidence: Mapping[str, str | int], targets: Sequence[str]
    ) -> Factor:
        """Normalized posterior factor over ``targets`` (in node order)."""
        codes = self._evidence_codes(evidence)
        for target in targets:
            self.variable(target)
            if target in codes:
                raise SchemaError(f"target {target!r} cannot also be evidence")
        joint, shaped_total, total = self._posterior_factor(codes, tuple(targets))
        if total <= 0.0:
            raise ImpossibleEvidenceError(
                f"evidence has probability zero under the network: {dict(evidence)!r}"
            )
        return Factor(joint.scope, joint.values / shaped_total)

    def posterior(self, evidence: Mapping[str, str | int], target: str) -> np.ndarray:
        """Posterior distribution of one target variable given evidence."""
        return self.joint_posterior(evidence, (target,)).values

    def evidence_probability(self, evidence: Mapping[str, str | int]) -> float:
        codes = self._evidence_codes(evidence)
        _, _, total = self._posterior_factor(codes, ())
        return total


def network_from_tables(
    dag: Dag, variables: Sequence[Variable], tables: Mapping[str, np.ndarray]
) -> CausalBayesianNetwork:
    """Assemble a network from raw row-stochastic tables keyed by node."""
    cpts = {
        name: Cpt(name, dag.parents(name), np.asarray(tables[name])) for name in dag.nodes
    }
    return CausalBayesianNetwork(dag, variables, cpts)


def enumerate_joint(bn: CausalBayesianNetwork) -> tuple[list[dict[str, int]], np.ndarray]:
    """All full assignments and their joint probabilities, by brute force.

    Exponential in the node count; intended for tests and small networks.
    """
    names = list(bn.dag.nodes)
    cards = [bn.card(n) for n in names]
    assignments: list[dict[str, int]] = []
    probs = []
    index = [0] * len(names)
    while True:
        assignment = dict(zip(names, index))
        assignments.append(assignment)
        probs.append(bn.joint_probability(assignment))
        pos = len(names) - 1
        while pos >= 0:
            index[pos] += 1
            if index[pos] < cards[pos]:
                break
            index[pos] = 0
            pos -= 1
        if pos < 0:
            break
    return assignments, np.asarray(probs)


# -- model file ---------------------------------------------------------------
#
# Sections: [variables] (schema lines), [edges] (edge lines), then one
# [cpt NODE] section per node with one row of space-separated floats per
# parent configuration, in mixed-radix parent order. Floats are written
# with repr() so the file round-trips bit-exactly.


def format_model(bn: CausalBayesianNetwork) -> str:
    lines = ["[variables]"]
    for var in bn.variables:
        lines.append(f"{var.name}: {', '.join(var.states)}")
    lines.append("[edges]")
    for source, target in bn.dag.edge_list():
        lines.append(f"{source} -> {target}")
    for name in bn.dag.nodes:
        cpt = bn.cpts[name]
        lines.append(f"[cpt {name}]")
        if cpt.parents:
            lines.append(f"# parents: {', '.join(cpt.parents)}")
        for row in cpt.table:
            lines.append(" ".join(repr(float(x)) for x in row))
    return "\n".join(lines) + "\n"


def parse_model(text: str) -> CausalBayesianNetwork:
    variables: list[Variable] = []
    edges: list[tuple[str, str]] = []
    tables: dict[str, list[list[float]]] = {}
    section: str | None = None
    current: str | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            inner = line[1:-1].strip()
            if inner == "variables" or inner == "edges":
                section, current = inner, None
            elif inner.startswith("cpt "):
                section, current = "cpt", inner[4:].strip()
                if current in tables:
                    raise DataFormatError(f"line {lineno}: duplicate CPT section for {current!r}")
                tables[current] = []
            else:
                raise DataFormatError(f"line {lineno}: unknown section {inner!r}")
            continue
        if section == "variables":
            if ":" not in line:
                raise DataFormatError(f"line {lineno}: expected 'name: states...'")
            name, rest = line.split(":", 1)
            variables.append(Variable(name.strip(), tuple(s.strip() for s in rest.split(","))))
        elif section == "edges":
            parts = line.split("->")
            if len(parts) != 2:
                raise DataFormatError(f"line {lineno}: expected 'source -> target'")
            edges.append((parts[0].strip(), parts[1].strip()))
        elif section == "cpt":
            try:
                tables[current].append([float(tok) for tok in line.split()])
            except ValueError:
                raise DataFormatError(f"line {lineno}: bad CPT row {line!r}") from None
        else:
            raise DataFormatError(f"line {lineno}: content before any section header")

    if not variables:
        raise DataFormatError("model file has no variables")
    dag = Dag([v.name for v in variables], edges)
    missing = [n for n in dag.nodes if n not in tables]
    if missing:
        raise DataFormatError(f"model file lacks CPTs for {missing!r}")
    arrays = {name: np.asarray(rows, dtype=np.float64) for name, rows in tables.items()}
    return network_from_tables(dag, variables, arrays)


def read_model(path) -> CausalBayesianNetwork:
    with open(path, "r", encoding="utf-8") as handle:
        return parse_model(handle.read())


def write_model(path, bn: CausalBayesianNetwork) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(format_model(bn))
