"""Discrete factors and sum-product variable elimination."""
from __future__ import annotations

from typing import Iterable, Mapping, Sequence

import numpy as np


class Factor:
    """Nonnegative table over an ordered variable scope.

    ``values`` has one axis per scope variable, in scope order.
    """

    __slots__ = ("scope", "values")

    def __init__(self, scope: Sequence[str], values: np.ndarray):
        self.scope = tuple(scope)
        self.values = np.asarray(values, dtype=np.float64)
        if self.values.ndim != len(self.scope):
            raise ValueError(
                f"factor over {self.scope} needs {len(self.scope)} axes, got {self.values.ndim}"
            )
        if (self.values < 0).any():
            raise ValueError("factor values must be nonnegative")

    def card(self, var: str) -> int:
        return self.values.shape[self.scope.index(var)]

    def multiply(self, other: "Factor") -> "Factor":
        union = list(self.scope) + [v for v in other.scope if v not in self.scope]
        return Factor(union, self._aligned(union) * other._aligned(union))

    def _aligned(self, union: Sequence[str]) -> np.ndarray:
        # Transpose own axes into union order, then insert singleton axes
        # for the union variables this factor does not mention.
        positions = {var: i for i, var in enumerate(union)}
        perm = sorted(range(len(self.scope)), key=lambda a: positions[self.scope[a]])
        values = self.values.transpose(perm)
        shape = []
        axis = 0
        own = [self.scope[a] for a in perm]
        for var in union:
            if axis < len(own) and own[axis] == var:
                shape.append(values.shape[axis])
                axis += 1
            else:
                shape.append(1)
        return values.reshape(shape)

    def marginalize(self, var: str) -> "Factor":
        axis = self.scope.index(var)
        scope = self.scope[:axis] + self.scope[axis + 1 :]
        return Factor(scope, self.values.sum(axis=axis))

    def reduce(self, var: str, state: int) -> "Factor":
        axis = self.scope.index(var)
        scope = self.scope[:axis] + self.scope[axis + 1 :]
        return Factor(scope, np.take(self.values, state, axis=axis))

    def transpose_to(self, scope: Sequence[str]) -> "Factor":
        if set(scope) != set(self.scope):
            raise ValueError(f"cannot reorder {self.scope} to {tuple(scope)}")
        perm = [self.scope.index(var) for var in scope]
        return Factor(scope, self.values.transpose(perm))

    def total(self) -> float:
        return float(self.values.sum())

    def __repr__(self) -> str:
        return f"Factor(scope={self.scope!r}, shape={self.values.shape})"


def multiply_all(factors: Iterable[Factor]) -> Factor:
    factors = list(factors)
    if not factors:
        return Factor((), np.asarray(1.0))
    result = factors[0]
    for factor in factors[1:]:
        result = result.multiply(factor)
    return result


def min_fill_order(
    scopes: Iterable[Sequence[str]], eliminate: Iterable[str], rank: Mapping[str, int]
) -> list[str]:
    """Min-fill elimination order over the factor interaction graph.

    Ties (equal fill-in count) break on ``rank`` so the order, and hence
    the whole elimination, is deterministic.
    """
    neighbors: dict[str, set[str]] = {}
    for scope in scopes:
        for var in scope:
            neighbors.setdefault(var, set())
        for a in scope:
            for b in scope:
                if a != b:
                    neighbors[a].add(b)
    remaining = set(eliminate)
    for var in remaining:
        neighbors.setdefault(var, set())

    order: list[str] = []
    while remaining:
        best = None
        best_key = None
        for var in remaining:
            around = neighbors[var]
            fill = 0
            around_list = sorted(around, key=lambda v: rank.get(v, 0))
            for i, a in enumerate(around_list):
                for b in around_list[i + 1 :]:
                    if b not in neighbors[a]:
                        fill += 1
            key = (fill, rank.get(var, 0))
            if best_key is None or key < best_key:
                best, best_key = var, key
        order.append(best)
        remaining.remove(best)
        around = neighbors.pop(best)
        for a in around:
            neighbors[a].discard(best)
            for b in around:
                if a != b:
                    neighbors[a].add(b)
    return order


def eliminate_variables(factors: Sequence[Factor], order: Sequence[str]) -> list[Factor]:
    """Sum out each variable in ``order``, combining the factors that touch it."""
    working = list(factors)
    for var in order:
        touching = [f for f in working if var in f.scope]
        if not touching:
            continue
        working = [f for f in working if var not in f.scope]
        working.append(multiply_all(touching).marginalize(var))
    return working
