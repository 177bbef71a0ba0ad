"""Expected-count engine for EM and Structural EM.

Records are deduplicated, then grouped by missing-cell pattern; within a
pattern every group shares the same posterior shape over its missing
variables, so the per-record inference vectorizes into a handful of numpy
gathers. The posterior joint over each record's missing cells is computed
once per parameter setting and answers arbitrary family-count queries
afterwards, which is exactly what the structure search needs.
"""
from __future__ import annotations

import math
from functools import lru_cache
from typing import Sequence

import numpy as np

from .bn import CausalBayesianNetwork, mixed_radix_strides
from .dataset import MISSING, Dataset, Variable
from .errors import ImpossibleEvidenceError, SchemaError

# Above this many joint cells per record the direct posterior table is not
# materialized and the engine falls back to variable elimination per query.
MAX_JOINT_CELLS = 4096


@lru_cache(maxsize=4096)
def _flat_offsets(cards: tuple[int, ...], strides: tuple[int, ...]) -> np.ndarray:
    """Flat table offsets of every configuration of ``cards``, C-order.

    Tiny arrays requested over and over across patterns and families; the
    cache turns the repeated meshgrid work into a dict lookup.
    """
    if not cards:
        return np.zeros(1, dtype=np.int64)
    configs = np.stack(
        np.meshgrid(*[np.arange(c) for c in cards], indexing="ij"), axis=-1
    ).reshape(-1, len(cards))
    out = configs @ np.asarray(strides, dtype=np.int64)
    out.setflags(write=False)
    return out


def _rank(values: Sequence[int]) -> list[int]:
    """Rank of each element; pure-python argsort-of-argsort for tiny lists."""
    ordered = sorted(range(len(values)), key=values.__getitem__)
    rank = [0] * len(values)
    for position, index in enumerate(ordered):
        rank[index] = position
    return rank


class GroupedData:
    """A dataset collapsed to unique records with multiplicities."""

    __slots__ = ("variables", "codes", "weights", "first_index", "n_records", "_patterns")

    def __init__(self, data: Dataset):
        if data.n_records == 0:
            raise ValueError("dataset is empty")
        self.variables: tuple[Variable, ...] = data.variables
        codes, first, counts = np.unique(
            data.codes, axis=0, return_index=True, return_counts=True
        )
        self.codes = codes
        self.weights = counts.astype(np.float64)
        self.first_index = first
        self.n_records = data.n_records
        self._patterns: list[tuple[tuple[int, ...], np.ndarray]] | None = None

    @property
    def n_groups(self) -> int:
        return self.codes.shape[0]

    def patterns(self) -> list[tuple[tuple[int, ...], np.ndarray]]:
        """Groups partitioned by missing-variable pattern.

        Returns (missing variable indices, group index array) pairs, in a
        deterministic order.
        """
        if self._patterns is None:
            mask = self.codes == MISSING
            unique_masks, inverse = np.unique(mask, axis=0, return_inverse=True)
            out = []
            for pattern_id in range(unique_masks.shape[0]):
                mvars = tuple(int(i) for i in np.flatnonzero(unique_masks[pattern_id]))
                groups = np.flatnonzero(inverse == pattern_id)
                out.append((mvars, groups))
            self._patterns = out
        return self._patterns


def as_grouped(data: Dataset | GroupedData) -> GroupedData:
    return data if isinstance(data, GroupedData) else GroupedData(data)


class _PatternBlock:
    """Posterior over one missing-pattern's variables, for all its groups."""

    __slots__ = ("mvars", "mvars_set", "groups", "cards", "cells", "joint", "z", "fallback")

    def __init__(self, mvars, groups, cards):
        self.mvars = mvars            # missing variable indices, node order
        self.mvars_set = frozenset(mvars)
        self.groups = groups          # group indices sharing the pattern
        self.cards = cards            # cardinalities of mvars
        self.cells = int(np.prod(cards)) if len(cards) else 1
        self.joint: np.ndarray | None = None   # (n_groups, *cards), normalized
        self.z: np.ndarray | None = None       # (n_groups,) evidence probability
        self.fallback = self.cells > MAX_JOINT_CELLS


class Completion:
    """Posterior completion of missing cells under a fixed network.

    ``family_counts(child, parents)`` returns expected counts for any
    family, not only the network's own; the structure search relies on
    this to score candidate graphs against frozen statistics.
    """

    def __init__(self, bn: CausalBayesianNetwork, data: Dataset | GroupedData):
        grouped = as_grouped(data)
        if grouped.variables != bn.variables:
            raise SchemaError("dataset schema does not match the network")
        self.bn = bn
        self.grouped = grouped
        self.names = bn.dag.nodes
        self.cards = np.asarray([v.card for v in bn.variables], dtype=np.int64)
        self._col = {name: i for i, name in enumerate(self.names)}
        self._blocks: list[_PatternBlock] = []
        self._z = np.zeros(grouped.n_groups, dtype=np.float64)
        self._run()
        bad = self._z <= 0.0
        if bad.any():
            group = int(np.argmax(bad))
            record = int(grouped.first_index[group])
            raise ImpossibleEvidenceError(
                f"record {record} has probability zero under the current parameters",
                record_index=record,
            )
        logs = np.log(self._z) * grouped.weights
        self.loglik = math.fsum(logs.tolist())

    # -- posterior construction ------------------------------------------------

    def _run(self) -> None:
        codes = self.grouped.codes
        for mvars, groups in self.grouped.patterns():
            block = _PatternBlock(mvars, groups, tuple(int(self.cards[v]) for v in mvars))
            self._blocks.append(block)
            if block.fallback:
                self._run_fallback(block)
            else:
                self._run_direct(block)

    def _evidence_for_group(self, group: int) -> dict[str, int]:
        row = self.grouped.codes[group]
        return {
            self.names[j]: int(row[j]) for j in range(len(self.names)) if row[j] != MISSING
        }

    def _run_fallback(self, block: _PatternBlock) -> None:
        # Joint table too large to materialize; keep only the evidence
        # probability here and answer family queries by elimination later.
        for group in block.groups:
            evidence = self._evidence_for_group(int(group))
            self._z[group] = self.bn.evidence_probability(evidence)

    def _run_direct(self, block: _PatternBlock) -> None:
        codes = self.grouped.codes[block.groups]
        n_groups = codes.shape[0]
        missing_set = set(block.mvars)
        axis_of = {v: a for a, v in enumerate(block.mvars)}

        scalar = np.ones(n_groups, dtype=np.float64)
        product = np.ones((n_groups,) + tuple(block.cards), dtype=np.float64)

        for node_idx, node in enumerate(self.names):
            cpt = self.bn.cpts[node]
            parent_idx = [self._col[p] for p in cpt.parents]
            strides = mixed_radix_strides([int(self.cards[j]) for j in parent_idx])
            missing_parents = [t for t, j in enumerate(parent_idx) if j in missing_set]
            child_missing = node_idx in missing_set

            obs = codes[:, parent_idx] if parent_idx else np.zeros((n_groups, 0), dtype=np.int64)
            base = (np.maximum(obs, 0) * strides).sum(axis=1) if parent_idx else np.zeros(
                n_groups, dtype=np.int64
            )

            if not missing_parents and not child_missing:
                scalar *= cpt.table[base, codes[:, node_idx]]
                continue

            mp_cards = [int(self.cards[parent_idx[t]]) for t in missing_parents]
            offsets = _flat_offsets(
                tuple(mp_cards), tuple(int(strides[t]) for t in missing_parents)
            )

            gathered = cpt.table[base[:, None] + offsets[None, :], :]  # (g, offs, card)
            if child_missing:
                values = gathered
                var_axes = [parent_idx[t] for t in missing_parents] + [node_idx]
                axis_cards = mp_cards + [int(self.cards[node_idx])]
            else:
                child_codes = codes[:, node_idx]
                values = np.take_along_axis(
                    gathered, child_codes[:, None, None], axis=2
                )[:, :, 0]
                var_axes = [parent_idx[t] for t in missing_parents]
                axis_cards = mp_cards
            values = values.reshape((n_groups,) + tuple(axis_cards))

            # Align this node's axes onto the pattern's (node-ordered) axes.
            order = sorted(range(len(var_axes)), key=lambda a: axis_of[var_axes[a]])
            values = values.transpose((0,) + tuple(1 + a for a in order))
            shape = [n_groups] + [1] * len(block.mvars)
            for v in var_axes:
                shape[1 + axis_of[v]] = int(self.cards[v])
            product = product * values.reshape(shape)

        totals = product.reshape(n_groups, -1).sum(axis=1)
        self._z[block.groups] = scalar * totals
        safe = np.where(totals > 0.0, totals, 1.0)
        block.joint = product / safe.reshape((n_groups,) + (1,) * len(block.mvars))
        block.z = self._z[block.groups]

    # -- queries -----------------------------------------------------------------

    @property
    def variables(self) -> tuple[Variable, ...]:
        return self.grouped.variables

    @property
    def n_records(self) -> float:
        return float(self.grouped.n_records)

    def family_counts(self, child: str, parents: Sequence[str]) -> np.ndarray:
        """Expected counts for one family, shaped like its CPT (rows, card)."""
        fam_idx = [self._col[p] for p in parents] + [self._col[child]]
        fam_cards = [int(self.cards[j]) for j in fam_idx]
        strides = mixed_radix_strides(fam_cards)
        total_cells = int(np.prod(fam_cards))
        flat = np.zeros(total_cells, dtype=np.float64)

        codes = self.grouped.codes
        weights = self.grouped.weights
        obs = codes[:, fam_idx]
        base = (np.maximum(obs, 0) * strides).sum(axis=1)

        fully_observed = (obs >= 0).all(axis=1)
        if fully_observed.any():
            np.add.at(flat, base[fully_observed], weights[fully_observed])

        for block in self._blocks:
            if not (block.mvars_set and any(j in block.mvars_set for j in fam_idx)):
                continue
            missing_positions = [t for t, j in enumerate(fam_idx) if j in block.mvars_set]
            if block.fallback:
                self._add_fallback_counts(
                    block, flat, fam_idx, strides, base, missing_positions
                )
                continue

            axis_of = {v: a for a, v in enumerate(block.mvars)}
            fam_missing_vars = [fam_idx[t] for t in missing_positions]
            keep_axes = [axis_of[v] for v in fam_missing_vars]
            drop_axes = tuple(
                1 + a for a in range(len(block.mvars)) if a not in set(keep_axes)
            )
            sub = block.joint.sum(axis=drop_axes) if drop_axes else block.joint
            # sub's variable axes sit in node order; move them to family order.
            rank = _rank(keep_axes)
            sub = sub.transpose((0,) + tuple(1 + r for r in rank))
            sub = np.ascontiguousarray(sub).reshape(sub.shape[0], -1)

            mp_cards = [int(self.cards[v]) for v in fam_missing_vars]
            offsets = _flat_offsets(
                tuple(mp_cards), tuple(int(strides[t]) for t in missing_positions)
            )

            idx = base[block.groups][:, None] + offsets[None, :]
            np.add.at(flat, idx, weights[block.groups][:, None] * sub)

        return flat.reshape(int(np.prod(fam_cards[:-1])), fam_cards[-1])

    def _add_fallback_counts(self, block, flat, fam_idx, strides, base, missing_positions):
        fam_missing = [fam_idx[t] for t in missing_positions]
        targets = [self.names[v] for v in sorted(fam_missing)]
        for group in block.groups:
            evidence = self._evidence_for_group(int(group))
            posterior = self.bn.joint_posterior(evidence, targets)
            # posterior scope is in node order; align to family order.
            fam_order_names = [self.names[fam_idx[t]] for t in missing_positions]
            posterior = posterior.transpose_to(fam_order_names)
            values = posterior.values.reshape(-1)
            mp_cards = [int(self.cards[fam_idx[t]]) for t in missing_positions]
            offsets = _flat_offsets(
                tuple(mp_cards), tuple(int(strides[t]) for t in missing_positions)
            )
            flat[base[group] + offsets] += self.grouped.weights[group] * values


def expected_counts_by_enumeration(
    bn: CausalBayesianNetwork, data: Dataset
) -> dict[str, np.ndarray]:
    """Brute-force expected family counts; exponential, for tests only.

    Enumerates the full joint, conditions on each record's observed cells by
    filtering, and tabulates family configurations weighted by posterior
    mass. Entirely independent of the pattern-grouped engine.
    """
    from .bn import enumerate_joint

    assignments, probs = enumerate_joint(bn)
    names = bn.dag.nodes
    counts: dict[str, np.ndarray] = {}
    for node in names:
        cpt = bn.cpts[node]
        counts[node] = np.zeros_like(cpt.table)
    for row in range(data.n_records):
        observed = {
            names[j]: int(data.codes[row, j])
            for j in range(len(names))
            if data.codes[row, j] != MISSING
        }
        match = np.asarray(
            [
                all(assignment[name] == state for name, state in observed.items())
                for assignment in assignments
            ]
        )
        mass = probs * match
        total = mass.sum()
        if total <= 0:
            raise ImpossibleEvidenceError(
                f"record {row} has probability zero", record_index=row
            )
        mass = mass / total
        for node in names:
            cpt = bn.cpts[node]
            strides = mixed_radix_strides([bn.card(p) for p in cpt.parents])
            for assignment, weight in zip(assignments, mass):
                if weight == 0.0:
                    continue
                parent_row = int(
                    sum(assignment[p] * int(strides[i]) for i, p in enumerate(cpt.parents))
                )
                counts[node][parent_row, assignment[node]] += weight
    return counts
