import math

import numpy as np
import pytest

from riskbn.bn import network_from_tables
from riskbn.completion import Completion, GroupedData, expected_counts_by_enumeration
from riskbn.dataset import Dataset, MissingnessSpec, Variable, inject_missing
from riskbn.errors import ImpossibleEvidenceError, SchemaError
from riskbn.graph import Dag
from riskbn.params import EmConfig, em_fit, expected_counts, mle_fit, table_from_counts
from riskbn.synthetic import random_network

from helpers import two_node_network


# -- mle_fit ----------------------------------------------------------------------


def test_mle_counting():
    var = Variable("A", ("a0", "a1"))
    data = Dataset((var,), np.array([[1], [1], [1], [0]]))
    cpts = mle_fit(Dag(["A"], []), data, ess=0.0)
    assert np.allclose(cpts["A"].table, [[0.25, 0.75]])


def test_mle_no_data_with_prior_is_uniform():
    variables = (Variable("A", ("a0", "a1")), Variable("B", ("b0", "b1", "b2")))
    dag = Dag(["A", "B"], [("A", "B")])
    data = Dataset(variables, np.empty((0, 2), dtype=np.int64))
    cpts = mle_fit(dag, data, ess=1.0)
    assert np.allclose(cpts["A"].table, [[0.5, 0.5]])
    assert np.allclose(cpts["B"].table, np.full((2, 3), 1 / 3))


def test_mle_zero_count_row_without_prior_is_uniform():
    variables = (Variable("A", ("a0", "a1")), Variable("B", ("b0", "b1")))
    dag = Dag(["A", "B"], [("A", "B")])
    data = Dataset(variables, np.array([[0, 1], [0, 0]]))  # A=1 never observed
    cpts = mle_fit(dag, data, ess=0.0)
    assert np.allclose(cpts["B"].table[1], [0.5, 0.5])


def test_mle_smoothed_counts_oracle():
    # independent count-and-normalize oracle on a 3-node network, 30 records
    net = random_network(3, seed=5, max_card=3)
    data = net.sample(30, seed=6)
    ess = 1.0
    cpts = mle_fit(net.dag, data, ess=ess)
    names = list(net.dag.nodes)
    for node in names:
        parents = net.dag.parents(node)
        card = net.card(node)
        parent_cards = [net.card(p) for p in parents]
        n_rows = int(np.prod(parent_cards)) if parents else 1
        counts = np.zeros((n_rows, card))
        for record in data.codes:
            row = 0
            for parent in parents:
                row = row * net.card(parent) + record[names.index(parent)]
            counts[row, record[names.index(node)]] += 1
        for row in range(n_rows):
            denominator = counts[row].sum() + ess / n_rows
            expected = (counts[row] + ess / (n_rows * card)) / denominator
            assert np.allclose(cpts[node].table[row], expected, atol=1e-12), node


def test_mle_rejects_incomplete_data():
    net = two_node_network()
    data = Dataset(net.variables, np.array([[0, -1]]))
    with pytest.raises(SchemaError):
        mle_fit(net.dag, data)


def test_table_from_counts_formula():
    counts = np.array([[2.0, 3.0], [0.0, 0.0]])
    table = table_from_counts(counts, ess=2.0)
    # rows=2, card=2: alpha_cell = 0.5, alpha_row = 1.0
    assert np.allclose(table[0], [(2 + 0.5) / 6.0, (3 + 0.5) / 6.0])
    assert np.allclose(table[1], [0.5, 0.5])


# -- expected_counts -------------------------------------------------------------------


def test_expected_counts_complete_equals_tabulation():
    net = random_network(4, seed=1, max_card=3)
    data = net.sample(50, seed=2)
    stats = expected_counts(net, data)
    raw = mle_fit(net.dag, data, ess=0.0)  # reuse the counting path indirectly
    for node in net.dag.nodes:
        counts = stats.counts[node]
        assert np.allclose(counts, np.round(counts))  # integer counts
        totals = counts.sum()
        assert totals == pytest.approx(data.n_records, abs=1e-9)
        rows = counts.sum(axis=1, keepdims=True)
        nonzero = rows[:, 0] > 0
        assert np.allclose(counts[nonzero] / rows[nonzero], raw[node].table[nonzero], atol=1e-12)


def test_expected_counts_all_missing_record_gives_family_marginals():
    # oracle: family marginal from the enumerated dense joint
    net = random_network(4, seed=3, max_card=3)
    data = Dataset(net.variables, np.full((1, 4), -1, dtype=np.int64))
    stats = expected_counts(net, data)
    oracle = expected_counts_by_enumeration(net, data)
    for node in net.dag.nodes:
        assert np.allclose(stats.counts[node], oracle[node], atol=1e-9)
        assert stats.counts[node].sum() == pytest.approx(1.0, abs=1e-9)


def test_expected_counts_child_only_observed_bayes_rule():
    # two-node net, parent missing: parent counts split by P(parent | child)
    net = two_node_network(p_a1=0.3, p_b1_given_a=(0.1, 0.8))
    data = Dataset(net.variables, np.array([[-1, 1]]))
    stats = expected_counts(net, data)
    # Bayes: P(A=1 | B=1) = 0.3*0.8 / (0.3*0.8 + 0.7*0.1)
    posterior_a1 = 0.24 / (0.24 + 0.07)
    assert np.allclose(stats.counts["A"], [[1 - posterior_a1, posterior_a1]], atol=1e-12)
    assert stats.counts["B"][0, 1] == pytest.approx(1 - posterior_a1, abs=1e-12)
    assert stats.counts["B"][1, 1] == pytest.approx(posterior_a1, abs=1e-12)


@pytest.mark.parametrize("seed", range(6))
def test_expected_counts_match_enumeration_oracle(seed):
    net = random_network(5, seed=seed + 20, max_card=3, edge_prob=0.5)
    data = net.sample(30, seed=seed + 40)
    for column in list(net.dag.nodes)[:3]:
        data = inject_missing(data, MissingnessSpec("MCAR", 0.4, column, seed=seed))
    stats = expected_counts(net, data)
    oracle = expected_counts_by_enumeration(net, data)
    for node in net.dag.nodes:
        assert np.allclose(stats.counts[node], oracle[node], atol=1e-9), node


def test_expected_counts_mass_conservation():
    net = random_network(5, seed=60, max_card=3)
    data = net.sample(200, seed=61)
    for column in net.dag.nodes:
        data = inject_missing(data, MissingnessSpec("MCAR", 0.25, column, seed=hashless(column)))
    stats = expected_counts(net, data)
    for node in net.dag.nodes:
        assert stats.counts[node].sum() == pytest.approx(200, abs=1e-6)


def hashless(name: str) -> int:
    # deterministic stand-in for hash(); Python's hash is salted per process
    return sum(ord(c) for c in name)


def test_impossible_record_reports_index():
    variables = (Variable("A", ("a0", "a1")),)
    net = network_from_tables(Dag(["A"], []), variables, {"A": np.array([[1.0, 0.0]])})
    data = Dataset(variables, np.array([[0], [1]]))
    with pytest.raises(ImpossibleEvidenceError) as excinfo:
        expected_counts(net, data)
    assert excinfo.value.record_index == 1


# -- em_fit -----------------------------------------------------------------------------


def test_em_on_complete_data_equals_mle_exactly():
    net = random_network(4, seed=8, max_card=3)
    data = net.sample(80, seed=9)
    reference = mle_fit(net.dag, data, ess=1.0)
    for init in ("uniform", "random"):
        cpts, trace = em_fit(net.dag, data, EmConfig(ess=1.0, init=init, seed=4))
        for node in net.dag.nodes:
            assert np.array_equal(cpts[node].table, reference[node].table), (init, node)
        assert len(trace) <= 3


@pytest.mark.parametrize("ess", [0.0, 1.0])
def test_em_trace_monotone(ess):
    for seed in range(5):
        net = random_network(4, seed=seed + 70, max_card=3, edge_prob=0.5)
        data = net.sample(120, seed=seed + 90)
        for column in list(net.dag.nodes)[:2]:
            data = inject_missing(data, MissingnessSpec("MCAR", 0.3, column, seed=seed))
        _, trace = em_fit(net.dag, data, EmConfig(ess=ess))
        for previous, current in zip(trace, trace[1:]):
            assert current >= previous - 1e-9


def test_em_seeded_random_init_reproducible():
    net = random_network(3, seed=100, max_card=2)
    data = net.sample(60, seed=101)
    data = inject_missing(data, MissingnessSpec("MCAR", 0.4, net.dag.nodes[0], seed=5))
    cfg = EmConfig(init="random", seed=17)
    _, first = em_fit(net.dag, data, cfg)
    _, second = em_fit(net.dag, data, cfg)
    assert first == second


def test_em_recovers_generating_cpts():
    # generate-then-recover: 30% MCAR on one node, 5000 records, error < 0.05
    net = two_node_network(p_a1=0.35, p_b1_given_a=(0.15, 0.85))
    data = net.sample(5000, seed=30)
    data = inject_missing(data, MissingnessSpec("MCAR", 0.3, "B", seed=31))
    cpts, _ = em_fit(net.dag, data, EmConfig(ess=1.0))
    assert np.abs(cpts["A"].table - net.cpts["A"].table).max() < 0.05
    assert np.abs(cpts["B"].table - net.cpts["B"].table).max() < 0.05


def test_em_config_validation():
    with pytest.raises(ValueError):
        EmConfig(max_iterations=0)
    with pytest.raises(ValueError):
        EmConfig(tolerance=0.0)
    with pytest.raises(ValueError):
        EmConfig(ess=-1)
    with pytest.raises(ValueError):
        EmConfig(init="fancy")


def test_grouped_data_collapses_duplicates():
    variables = (Variable("A", ("a0", "a1")),)
    data = Dataset(variables, np.array([[0], [1], [0], [0]]))
    grouped = GroupedData(data)
    assert grouped.n_groups == 2
    assert grouped.n_records == 4
    assert sorted(grouped.weights.tolist()) == [1.0, 3.0]


def test_completion_loglik_matches_evidence_probability():
    net = random_network(4, seed=110, max_card=3)
    data = net.sample(25, seed=111)
    data = inject_missing(data, MissingnessSpec("MCAR", 0.5, net.dag.nodes[1], seed=7))
    completion = Completion(net, data)
    names = list(net.dag.nodes)
    expected = 0.0
    for row in range(data.n_records):
        evidence = {
            names[j]: int(data.codes[row, j]) for j in range(4) if data.codes[row, j] != -1
        }
        expected += math.log(net.evidence_probability(evidence))
    assert completion.loglik == pytest.approx(expected, abs=1e-9)
