"""Shared fixtures-by-hand and independent oracles used across test modules.

The oracles here deliberately avoid the package's inference machinery:
the dense joint is built by raw numpy broadcasting and conditioned by
boolean masks, so agreement with variable elimination is meaningful.
"""
from __future__ import annotations

import numpy as np

from riskbn.bn import CausalBayesianNetwork, network_from_tables
from riskbn.dataset import Variable
from riskbn.graph import Dag


def two_node_network(p_a1=0.3, p_b1_given_a=(0.1, 0.8)) -> CausalBayesianNetwork:
    va = Variable("A", ("a0", "a1"))
    vb = Variable("B", ("b0", "b1"))
    dag = Dag(["A", "B"], [("A", "B")])
    tables = {
        "A": np.array([[1 - p_a1, p_a1]]),
        "B": np.array([[1 - p_b1_given_a[0], p_b1_given_a[0]],
                       [1 - p_b1_given_a[1], p_b1_given_a[1]]]),
    }
    return network_from_tables(dag, (va, vb), tables)


def chain_network(strength=0.9) -> CausalBayesianNetwork:
    """A -> B -> C, each child copying its parent with given probability."""
    variables = tuple(Variable(n, ("s0", "s1")) for n in "ABC")
    dag = Dag(["A", "B", "C"], [("A", "B"), ("B", "C")])
    copy = np.array([[strength, 1 - strength], [1 - strength, strength]])
    tables = {"A": np.array([[0.5, 0.5]]), "B": copy, "C": copy}
    return network_from_tables(dag, variables, tables)


def dense_joint(bn: CausalBayesianNetwork) -> np.ndarray:
    """Full joint probability table, axes in node order; pure broadcasting."""
    names = list(bn.dag.nodes)
    cards = [bn.card(n) for n in names]
    joint = np.ones(cards)
    for node in names:
        cpt = bn.cpts[node]
        axes = [names.index(p) for p in cpt.parents] + [names.index(node)]
        local = cpt.table.reshape([bn.card(p) for p in cpt.parents] + [bn.card(node)])
        # move the local axes into global positions via reshape-with-ones
        shape = [1] * len(names)
        order = np.argsort(axes)
        local = np.transpose(local, order)
        for axis in axes:
            shape[axis] = cards[axis]
        joint = joint * local.reshape(shape)
    return joint


def oracle_posterior(bn: CausalBayesianNetwork, evidence: dict, target: str) -> np.ndarray:
    """Posterior by conditioning the dense joint; independent of elimination."""
    names = list(bn.dag.nodes)
    joint = dense_joint(bn)
    for name, state in evidence.items():
        index = bn.state_index(name, state)
        sl = [slice(None)] * len(names)
        sl[names.index(name)] = index
        mask = np.zeros(joint.shape[names.index(name)])
        mask[index] = 1.0
        shape = [1] * len(names)
        shape[names.index(name)] = len(mask)
        joint = joint * mask.reshape(shape)
    other_axes = tuple(i for i, n in enumerate(names) if n != target)
    marginal = joint.sum(axis=other_axes)
    return marginal / marginal.sum()


def pairwise_auc(scores, labels) -> float:
    """O(P*N) comparison statistic: P(score_pos > score_neg) + ties/2."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    wins = 0.0
    for p in pos:
        for q in neg:
            if p > q:
                wins += 1.0
            elif p == q:
                wins += 0.5
    return wins / (len(pos) * len(neg))
