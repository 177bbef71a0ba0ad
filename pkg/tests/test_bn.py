import math

import numpy as np
import pytest

from riskbn.bn import (
    Cpt,
    enumerate_joint,
    format_model,
    network_from_tables,
    parse_model,
)
from riskbn.dataset import Dataset, Variable
from riskbn.errors import ImpossibleEvidenceError, SchemaError
from riskbn.factors import Factor, eliminate_variables, multiply_all
from riskbn.graph import Dag
from riskbn.synthetic import random_network

from helpers import chain_network, dense_joint, oracle_posterior, two_node_network


def uniform_singleton():
    var = Variable("A", ("a0", "a1"))
    return network_from_tables(Dag(["A"], []), (var,), {"A": np.array([[0.5, 0.5]])})


# -- joint probability -----------------------------------------------------------


def test_joint_uniform_singleton():
    assert uniform_singleton().joint_probability({"A": 0}) == 0.5


def test_joint_two_factor_product():
    net = two_node_network(p_a1=0.3, p_b1_given_a=(0.1, 0.8))
    assert net.joint_probability({"A": 1, "B": 1}) == pytest.approx(0.24, abs=1e-12)


def test_joint_accepts_state_labels():
    net = two_node_network(p_a1=0.3, p_b1_given_a=(0.1, 0.8))
    assert net.joint_probability({"A": "a1", "B": "b1"}) == pytest.approx(0.24, abs=1e-12)


def test_joint_requires_full_assignment():
    net = two_node_network()
    with pytest.raises(SchemaError):
        net.joint_probability({"A": 0})


@pytest.mark.parametrize("seed", range(5))
def test_joint_sums_to_one(seed):
    net = random_network(4, seed=seed, max_card=3)
    _, probs = enumerate_joint(net)
    assert probs.sum() == pytest.approx(1.0, abs=1e-9)


# -- posterior -----------------------------------------------------------------------


def test_posterior_no_evidence_root_marginal():
    net = two_node_network(p_a1=0.3)
    assert np.allclose(net.posterior({}, "A"), [0.7, 0.3], atol=1e-12)


def test_posterior_target_in_evidence_is_error():
    net = two_node_network()
    with pytest.raises(SchemaError):
        net.posterior({"A": 0}, "A")


@pytest.mark.parametrize("seed", range(12))
def test_posterior_matches_enumeration(seed):
    net = random_network(6, seed=seed, max_card=3, edge_prob=0.45)
    rng = np.random.default_rng(seed + 99)
    names = net.dag.nodes
    evidence_vars = rng.choice(len(names), size=2, replace=False)
    target = next(i for i in range(len(names)) if i not in evidence_vars)
    evidence = {names[i]: int(rng.integers(0, net.card(names[i]))) for i in evidence_vars}
    expected = oracle_posterior(net, evidence, names[target])
    assert np.allclose(net.posterior(evidence, names[target]), expected, atol=1e-9)


def test_zero_probability_evidence_is_an_error_not_nan():
    variables = (Variable("A", ("a0", "a1")), Variable("B", ("b0", "b1")))
    dag = Dag(["A", "B"], [("A", "B")])
    tables = {"A": np.array([[1.0, 0.0]]), "B": np.array([[1.0, 0.0], [0.0, 1.0]])}
    net = network_from_tables(dag, variables, tables)
    with pytest.raises(ImpossibleEvidenceError):
        net.posterior({"B": 1}, "A")


def test_elimination_order_independence():
    # the posterior must not depend on the elimination order: compare
    # min-fill against several random orders run through the raw factor ops
    rng = np.random.default_rng(40)
    for seed in range(6):
        net = random_network(6, seed=seed + 300, max_card=3, edge_prob=0.5)
        names = list(net.dag.nodes)
        target = names[int(rng.integers(len(names)))]
        evidence_var = next(n for n in names if n != target)
        evidence = {evidence_var: int(rng.integers(net.card(evidence_var)))}
        reference = net.posterior(evidence, target)
        hidden = [n for n in names if n != target and n not in evidence]
        for _ in range(4):
            order = list(rng.permutation(hidden))
            factors = []
            for node in names:
                factor = net.factor_for(node)
                for var, state in evidence.items():
                    if var in factor.scope:
                        factor = factor.reduce(var, state)
                factors.append(factor)
            remaining = eliminate_variables(factors, order)
            joint = multiply_all(remaining)
            values = joint.transpose_to((target,)).values
            assert np.allclose(values / values.sum(), reference, atol=1e-9)


def test_evidence_probability_matches_dense_joint():
    net = chain_network(0.8)
    joint = dense_joint(net)
    assert net.evidence_probability({"A": 0, "C": 1}) == pytest.approx(
        joint[0, :, 1].sum(), abs=1e-12
    )


# -- sampling ---------------------------------------------------------------------------


def test_degenerate_network_samples_identically():
    variables = (Variable("A", ("a0", "a1")), Variable("B", ("b0", "b1")))
    dag = Dag(["A", "B"], [("A", "B")])
    tables = {"A": np.array([[0.0, 1.0]]), "B": np.array([[1.0, 0.0], [0.0, 1.0]])}
    net = network_from_tables(dag, variables, tables)
    data = net.sample(64, seed=0)
    assert (data.codes == [1, 1]).all()


def test_sampling_determinism():
    net = chain_network()
    assert net.sample(500, seed=7) == net.sample(500, seed=7)
    assert net.sample(500, seed=7) != net.sample(500, seed=8)


def test_sampling_binomial_concentration():
    net = two_node_network(p_a1=0.3)
    data = net.sample(50_000, seed=21)
    frequency = (data.column("A") == 1).mean()
    assert abs(frequency - 0.3) <= 3 * math.sqrt(0.3 * 0.7 / 50_000)


def test_sampling_conditional_frequencies_match_cpt():
    net = chain_network(0.85)
    data = net.sample(50_000, seed=22)
    a = data.column("A")
    b = data.column("B")
    for parent_state in (0, 1):
        rows = a == parent_state
        for child_state in (0, 1):
            observed = (b[rows] == child_state).mean()
            expected = net.cpts["B"].table[parent_state, child_state]
            sigma = math.sqrt(expected * (1 - expected) / rows.sum())
            assert abs(observed - expected) <= 3 * sigma + 1e-9


def test_sample_count_validation():
    with pytest.raises(ValueError):
        chain_network().sample(0, seed=1)


# -- log-likelihood ---------------------------------------------------------------------


def test_loglik_single_record():
    net = uniform_singleton()
    data = Dataset(net.variables, np.array([[0]]))
    assert net.log_likelihood(data) == pytest.approx(math.log(0.5), abs=1e-12)


def test_loglik_doubling_is_exact():
    net = chain_network(0.8)
    data = net.sample(101, seed=3)
    doubled = Dataset(net.variables, np.vstack([data.codes, data.codes]))
    assert net.log_likelihood(doubled) == 2 * net.log_likelihood(data)


def test_loglik_matches_enumerated_joints():
    net = random_network(4, seed=77, max_card=3)
    data = net.sample(20, seed=78)
    expected = math.fsum(
        math.log(net.joint_probability({n: int(data.codes[r, i]) for i, n in enumerate(net.dag.nodes)}))
        for r in range(20)
    )
    assert net.log_likelihood(data) == pytest.approx(expected, abs=1e-9)


def test_loglik_zero_probability_record_is_minus_inf():
    variables = (Variable("A", ("a0", "a1")),)
    net = network_from_tables(Dag(["A"], []), variables, {"A": np.array([[1.0, 0.0]])})
    data = Dataset(variables, np.array([[1]]))
    assert net.log_likelihood(data) == float("-inf")


def test_loglik_requires_complete_data():
    net = chain_network()
    data = Dataset(net.variables, np.array([[0, -1, 0]]))
    with pytest.raises(SchemaError):
        net.log_likelihood(data)


# -- validation and model file --------------------------------------------------------


def test_cpt_row_sum_validated():
    with pytest.raises(SchemaError):
        Cpt("A", (), np.array([[0.5, 0.6]]))


def test_cpt_shape_validated_against_graph():
    variables = (Variable("A", ("a0", "a1")), Variable("B", ("b0", "b1")))
    dag = Dag(["A", "B"], [("A", "B")])
    tables = {"A": np.array([[0.5, 0.5]]), "B": np.array([[0.5, 0.5]])}  # B needs 2 rows
    with pytest.raises(SchemaError):
        network_from_tables(dag, variables, tables)


def test_model_file_round_trips_bit_exactly():
    net = random_network(5, seed=13, max_card=3)
    text = format_model(net)
    parsed = parse_model(text)
    assert format_model(parsed) == text
    for node in net.dag.nodes:
        assert np.array_equal(parsed.cpts[node].table, net.cpts[node].table)
    assert parsed.dag == net.dag
    assert parsed.variables == net.variables


def test_model_file_missing_cpt_rejected():
    from riskbn.errors import DataFormatError

    with pytest.raises(DataFormatError):
        parse_model("[variables]\nA: a0, a1\n[edges]\n")


# -- factors --------------------------------------------------------------------------


def test_factor_multiply_marginalize_agree_with_numpy():
    rng = np.random.default_rng(1)
    fa = Factor(("A", "B"), rng.random((2, 3)))
    fb = Factor(("B", "C"), rng.random((3, 2)))
    product = fa.multiply(fb)
    assert product.scope == ("A", "B", "C")
    expected = fa.values[:, :, None] * fb.values[None, :, :]
    assert np.allclose(product.values, expected)
    assert np.allclose(product.marginalize("B").values, expected.sum(axis=1))


def test_factor_reduce():
    rng = np.random.default_rng(2)
    factor = Factor(("A", "B"), rng.random((2, 3)))
    assert np.allclose(factor.reduce("B", 1).values, factor.values[:, 1])
