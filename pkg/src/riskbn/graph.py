"""Directed acyclic graphs, edit moves and prior-knowledge constraints.

Graphs are immutable: every edit goes through :func:`apply_move`, which
returns a new ``Dag``. Node order is significant throughout the package:
matrices index by position in the stored node list and all deterministic
tie-breaking falls back to it.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

from .errors import (
    ConstraintError,
    CycleError,
    DataFormatError,
    EdgeStateError,
    GraphError,
    UnknownNodeError,
)

Edge = tuple[str, str]


class Dag:
    """Immutable directed acyclic graph over named nodes.

    Acyclicity is checked at construction, so any ``Dag`` instance is a
    valid DAG; edge sets with cycles never materialize as graphs.
    """

    __slots__ = ("nodes", "edges", "_index", "_parents", "_children", "_topo")

    def __init__(self, nodes: Sequence[str], edges: Iterable[Edge] = ()):
        self.nodes: tuple[str, ...] = tuple(nodes)
        if len(set(self.nodes)) != len(self.nodes):
            raise GraphError("duplicate node names in node list")
        self._index = {name: i for i, name in enumerate(self.nodes)}

        edge_set: set[Edge] = set()
        for source, target in edges:
            if source not in self._index:
                raise UnknownNodeError(f"unknown node {source!r} in edge ({source!r}, {target!r})")
            if target not in self._index:
                raise UnknownNodeError(f"unknown node {target!r} in edge ({source!r}, {target!r})")
            if source == target:
                raise GraphError(f"self-loop on {source!r}")
            edge_set.add((source, target))
        self.edges: frozenset[Edge] = frozenset(edge_set)

        parents: dict[str, list[str]] = {name: [] for name in self.nodes}
        children: dict[str, list[str]] = {name: [] for name in self.nodes}
        for source, target in self.edge_list():
            parents[target].append(source)
            children[source].append(target)
        self._parents = {k: tuple(v) for k, v in parents.items()}
        self._children = {k: tuple(v) for k, v in children.items()}
        self._topo = self._toposort()

    def _toposort(self) -> tuple[str, ...]:
        # Kahn's algorithm; among ready nodes, the one earliest in the
        # stored node list goes first, which fixes the order completely.
        indegree = {name: len(self._parents[name]) for name in self.nodes}
        order: list[str] = []
        remaining = list(self.nodes)
        while remaining:
            ready = next((n for n in remaining if indegree[n] == 0), None)
            if ready is None:
                raise CycleError("edge set contains a directed cycle")
            remaining.remove(ready)
            order.append(ready)
            for child in self._children[ready]:
                indegree[child] -= 1
        return tuple(order)

    # -- queries -----------------------------------------------------------

    def index_of(self, node: str) -> int:
        try:
            return self._index[node]
        except KeyError:
            raise UnknownNodeError(f"unknown node {node!r}") from None

    def parents(self, node: str) -> tuple[str, ...]:
        """Parents of ``node``, ordered by position in the node list."""
        self.index_of(node)
        return self._parents[node]

    def children(self, node: str) -> tuple[str, ...]:
        """Children of ``node``, ordered by position in the node list."""
        self.index_of(node)
        return self._children[node]

    def has_edge(self, source: str, target: str) -> bool:
        return (source, target) in self.edges

    def edge_list(self) -> list[Edge]:
        """Edges sorted by (source index, target index)."""
        return sorted(self.edges, key=lambda e: (self._index[e[0]], self._index[e[1]]))

    def topological_order(self) -> tuple[str, ...]:
        """Topological order; deterministic given the stored node order."""
        return self._topo

    def reaches(self, source: str, target: str) -> bool:
        """True if a directed path source -> ... -> target exists."""
        self.index_of(source)
        self.index_of(target)
        if source == target:
            return True
        stack = [source]
        seen = {source}
        while stack:
            for child in self._children[stack.pop()]:
                if child == target:
                    return True
                if child not in seen:
                    seen.add(child)
                    stack.append(child)
        return False

    def replace_edges(self, edges: Iterable[Edge]) -> "Dag":
        """New Dag over the same node list with a different edge set."""
        return Dag(self.nodes, edges)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Dag):
            return NotImplemented
        return self.nodes == other.nodes and self.edges == other.edges

    def __hash__(self) -> int:
        return hash((self.nodes, self.edges))

    def __repr__(self) -> str:
        return f"Dag(nodes={list(self.nodes)!r}, edges={self.edge_list()!r})"


class MoveKind(Enum):
    ADD = "add"
    DELETE = "delete"
    REVERSE = "reverse"


@dataclass(frozen=True)
class EditMove:
    """One hill-climbing move: add, delete or reverse a single edge."""

    kind: MoveKind
    edge: Edge

    @classmethod
    def add(cls, source: str, target: str) -> "EditMove":
        return cls(MoveKind.ADD, (source, target))

    @classmethod
    def delete(cls, source: str, target: str) -> "EditMove":
        return cls(MoveKind.DELETE, (source, target))

    @classmethod
    def reverse(cls, source: str, target: str) -> "EditMove":
        return cls(MoveKind.REVERSE, (source, target))

    def inverse(self) -> "EditMove":
        if self.kind is MoveKind.ADD:
            return EditMove(MoveKind.DELETE, self.edge)
        if self.kind is MoveKind.DELETE:
            return EditMove(MoveKind.ADD, self.edge)
        return EditMove(MoveKind.REVERSE, (self.edge[1], self.edge[0]))


def tiers_to_forbidden(tiers: Sequence[Iterable[str]], nodes: Iterable[str]) -> frozenset[Edge]:
    """Forbidden edges implied by an ordered tier partition.

    Every edge from a strictly later tier into an earlier tier is forbidden;
    nodes outside any tier are unconstrained.
    """
    node_set = set(nodes)
    tier_sets = [frozenset(t) for t in tiers]
    seen: set[str] = set()
    for tier in tier_sets:
        for name in tier:
            if name not in node_set:
                raise UnknownNodeError(f"tier member {name!r} is not a known node")
            if name in seen:
                raise GraphError(f"node {name!r} appears in two tiers")
        seen |= tier
    forbidden: set[Edge] = set()
    for later_pos in range(1, len(tier_sets)):
        for earlier_pos in range(later_pos):
            for source in tier_sets[later_pos]:
                for target in tier_sets[earlier_pos]:
                    forbidden.add((source, target))
    return frozenset(forbidden)


class PriorKnowledge:
    """Required/forbidden edge lists plus an ordered temporal tier partition.

    The effective forbidden set is the union of the declared forbidden edges
    and every edge pointing from a later tier into an earlier one.
    """

    __slots__ = ("required", "forbidden", "tiers", "_tier_of", "derived_forbidden")

    def __init__(
        self,
        required: Iterable[Edge] = (),
        forbidden: Iterable[Edge] = (),
        tiers: Sequence[Iterable[str]] = (),
    ):
        self.required: frozenset[Edge] = frozenset(tuple(e) for e in required)
        self.forbidden: frozenset[Edge] = frozenset(tuple(e) for e in forbidden)
        self.tiers: tuple[frozenset[str], ...] = tuple(frozenset(t) for t in tiers)

        for source, target in self.required | self.forbidden:
            if source == target:
                raise GraphError(f"self-loop constraint on {source!r}")
        overlap = self.required & self.forbidden
        if overlap:
            raise ConstraintError(f"edges both required and forbidden: {sorted(overlap)}")

        self._tier_of: dict[str, int] = {}
        for position, tier in enumerate(self.tiers):
            for name in tier:
                if name in self._tier_of:
                    raise GraphError(f"node {name!r} appears in two tiers")
                self._tier_of[name] = position

        derived: set[Edge] = set()
        for later_pos in range(1, len(self.tiers)):
            for earlier_pos in range(later_pos):
                for source in self.tiers[later_pos]:
                    for target in self.tiers[earlier_pos]:
                        derived.add((source, target))
        self.derived_forbidden: frozenset[Edge] = frozenset(derived)

        bad = self.required & self.derived_forbidden
        if bad:
            raise ConstraintError(f"required edges violate the tier ordering: {sorted(bad)}")

        # The required edges on their own must form a DAG.
        req_nodes = sorted({n for e in self.required for n in e})
        Dag(req_nodes, self.required)

    @classmethod
    def empty(cls) -> "PriorKnowledge":
        return cls()

    @property
    def all_forbidden(self) -> frozenset[Edge]:
        return self.forbidden | self.derived_forbidden

    def tier_of(self, node: str) -> int | None:
        return self._tier_of.get(node)

    def allows(self, edge: Edge) -> bool:
        return edge not in self.all_forbidden

    def satisfied_by(self, dag: Dag) -> bool:
        return self.required <= dag.edges and not (dag.edges & self.all_forbidden)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PriorKnowledge):
            return NotImplemented
        return (
            self.required == other.required
            and self.forbidden == other.forbidden
            and self.tiers == other.tiers
        )

    def __repr__(self) -> str:
        return (
            f"PriorKnowledge(required={sorted(self.required)!r}, "
            f"forbidden={sorted(self.forbidden)!r}, tiers={[sorted(t) for t in self.tiers]!r})"
        )


def apply_move(dag: Dag, move: EditMove, knowledge: PriorKnowledge | None = None) -> Dag:
    """Apply a single edit move, returning a new Dag.

    The result is validated in full: it must be acyclic, contain every
    required edge and contain no forbidden edge.
    """
    source, target = move.edge
    dag.index_of(source)
    dag.index_of(target)
    if source == target:
        raise GraphError(f"self-loop move on {source!r}")
    k = knowledge if knowledge is not None else PriorKnowledge.empty()
    present = dag.has_edge(source, target)

    if move.kind is MoveKind.ADD:
        if present:
            raise EdgeStateError(f"cannot add: edge {source!r} -> {target!r} already present")
        if (source, target) in k.all_forbidden:
            raise ConstraintError(f"edge {source!r} -> {target!r} is forbidden")
        # A new edge source -> target closes a cycle exactly when the target
        # already reaches the source.
        if dag.reaches(target, source):
            raise CycleError(f"adding {source!r} -> {target!r} would create a cycle")
        new_edges = dag.edges | {(source, target)}
    elif move.kind is MoveKind.DELETE:
        if not present:
            raise EdgeStateError(f"cannot delete: edge {source!r} -> {target!r} not present")
        if (source, target) in k.required:
            raise ConstraintError(f"edge {source!r} -> {target!r} is required")
        new_edges = dag.edges - {(source, target)}
    elif move.kind is MoveKind.REVERSE:
        if not present:
            raise EdgeStateError(f"cannot reverse: edge {source!r} -> {target!r} not present")
        if (source, target) in k.required:
            raise ConstraintError(f"edge {source!r} -> {target!r} is required")
        if (target, source) in k.all_forbidden:
            raise ConstraintError(f"edge {target!r} -> {source!r} is forbidden")
        without = dag.replace_edges(dag.edges - {(source, target)})
        if without.reaches(source, target):
            raise CycleError(f"reversing {source!r} -> {target!r} would create a cycle")
        new_edges = (dag.edges - {(source, target)}) | {(target, source)}
    else:  # pragma: no cover - enum is exhaustive
        raise GraphError(f"unknown move kind {move.kind!r}")

    result = dag.replace_edges(new_edges)
    if not k.required <= result.edges:
        raise ConstraintError("result is missing a required edge")
    if result.edges & k.all_forbidden:
        raise ConstraintError("result contains a forbidden edge")
    return result


# -- text formats -----------------------------------------------------------
#
# Edge list files: one "source -> target" per line. Prior-knowledge files:
# sections [required], [forbidden] (edge lines) and [tiers] (one ordered
# line of comma-separated names per tier, earliest first). Blank lines and
# lines starting with '#' are ignored in both.


def _parse_edge_line(line: str, lineno: int) -> Edge:
    parts = line.split("->")
    if len(parts) != 2 or not parts[0].strip() or not parts[1].strip():
        raise DataFormatError(f"line {lineno}: expected 'source -> target', got {line!r}")
    return parts[0].strip(), parts[1].strip()


def parse_edge_list(text: str) -> list[Edge]:
    edges = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        edges.append(_parse_edge_line(line, lineno))
    return edges


def format_edge_list(edges: Iterable[Edge]) -> str:
    return "".join(f"{source} -> {target}\n" for source, target in edges)


def read_edge_list(path) -> list[Edge]:
    with open(path, "r", encoding="utf-8") as handle:
        return parse_edge_list(handle.read())


def write_edge_list(path, edges: Iterable[Edge]) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(format_edge_list(edges))


def parse_prior_knowledge(text: str) -> PriorKnowledge:
    required: list[Edge] = []
    forbidden: list[Edge] = []
    tiers: list[list[str]] = []
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip().lower()
            if section not in ("required", "forbidden", "tiers"):
                raise DataFormatError(f"line {lineno}: unknown section {section!r}")
            continue
        if section == "required":
            required.append(_parse_edge_line(line, lineno))
        elif section == "forbidden":
            forbidden.append(_parse_edge_line(line, lineno))
        elif section == "tiers":
            names = [part.strip() for part in line.split(",")]
            if any(not name for name in names):
                raise DataFormatError(f"line {lineno}: empty name in tier line {line!r}")
            tiers.append(names)
        else:
            raise DataFormatError(f"line {lineno}: content before any section header")
    return PriorKnowledge(required=required, forbidden=forbidden, tiers=tiers)


def format_prior_knowledge(knowledge: PriorKnowledge) -> str:
    lines = ["[required]"]
    lines += [f"{s} -> {t}" for s, t in sorted(knowledge.required)]
    lines.append("[forbidden]")
    lines += [f"{s} -> {t}" for s, t in sorted(knowledge.forbidden)]
    lines.append("[tiers]")
    lines += [", ".join(sorted(tier)) for tier in knowledge.tiers]
    return "\n".join(lines) + "\n"


def read_prior_knowledge(path) -> PriorKnowledge:
    with open(path, "r", encoding="utf-8") as handle:
        return parse_prior_knowledge(handle.read())


def write_prior_knowledge(path, knowledge: PriorKnowledge) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(format_prior_knowledge(knowledge))
