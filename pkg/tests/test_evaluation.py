import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from riskbn.bootstrap import BootstrapConfig
from riskbn.dataset import Dataset, MissingnessSpec, Variable, inject_missing
from riskbn.evaluation import (
    ConfusionMatrix,
    GridPoint,
    RocCurve,
    RocPoint,
    auc_confidence_interval,
    confusion,
    format_auc_scatter,
    format_evaluation_report,
    format_grid_results,
    grid_search,
    labelled_scores,
    predict_risk,
    roc_auc,
    sensitivity,
    specificity,
)
from riskbn.graph import PriorKnowledge
from riskbn.params import EmConfig
from riskbn.structure import SemConfig
from riskbn.synthetic import random_network

from helpers import chain_network, oracle_posterior, pairwise_auc


# -- confusion ----------------------------------------------------------------


def test_confusion_perfect_split():
    cm = confusion([0.9, 0.1], [1, 0], 0.5)
    assert (cm.tp, cm.tn, cm.fp, cm.fn) == (1, 1, 0, 0)


def test_confusion_threshold_zero_everything_positive():
    cm = confusion([0.2, 0.8, 0.5], [1, 0, 1], 0.0)
    assert cm.tn == 0 and cm.fn == 0
    assert cm.tp + cm.fp == 3


def test_confusion_matches_direct_tabulation():
    rng = np.random.default_rng(1)
    scores = rng.random(20)
    labels = rng.integers(0, 2, 20)
    if labels.min() == labels.max():
        labels[0] = 1 - labels[0]
    threshold = 0.4
    cm = confusion(scores, labels, threshold)
    tp = fp = tn = fn = 0
    for score, label in zip(scores, labels):
        positive = score >= threshold
        if positive and label == 1:
            tp += 1
        elif positive:
            fp += 1
        elif label == 1:
            fn += 1
        else:
            tn += 1
    assert (cm.tp, cm.fp, cm.tn, cm.fn) == (tp, fp, tn, fn)


def test_confusion_length_mismatch():
    with pytest.raises(ValueError):
        confusion([0.5], [1, 0], 0.5)


def test_confusion_total_invariant():
    cm = confusion([0.1, 0.9, 0.4], [0, 1, 1], 0.5)
    assert cm.total == 3


def test_sensitivity_specificity():
    cm = ConfusionMatrix(tp=1, fp=0, tn=1, fn=0)
    assert sensitivity(cm) == 1.0 and specificity(cm) == 1.0
    cm = ConfusionMatrix(tp=3, fp=2, tn=5, fn=1)
    assert sensitivity(cm) == pytest.approx(0.75)
    assert specificity(cm) == pytest.approx(5 / 7)


def test_sensitivity_undefined_without_positives():
    cm = confusion([0.2, 0.8], [0, 0], 0.5)
    assert sensitivity(cm) is None
    assert specificity(cm) is not None


# -- ROC / AUC -------------------------------------------------------------------


def test_auc_perfect_separation():
    _, auc = roc_auc([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0])
    assert auc == 1.0


def test_auc_all_ties_is_half():
    _, auc = roc_auc([0.5, 0.5, 0.5, 0.5], [1, 0, 1, 0])
    assert auc == 0.5


def test_roc_endpoints_and_monotonicity():
    rng = np.random.default_rng(2)
    curve, _ = roc_auc(rng.random(30), rng.integers(0, 2, 30))
    pts = curve.points
    assert (pts[0].fpr, pts[0].tpr) == (0.0, 0.0)
    assert (pts[-1].fpr, pts[-1].tpr) == (1.0, 1.0)
    assert pts[0].threshold == math.inf


@settings(max_examples=100)
@given(st.integers(0, 10**9))
def test_auc_equals_pairwise_statistic(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(5, 50))
    # quantized scores so ties actually occur
    scores = np.round(rng.random(n), 1)
    labels = rng.integers(0, 2, n)
    if labels.min() == labels.max():
        labels[0] = 1 - labels[0]
    _, auc = roc_auc(scores, labels)
    assert abs(auc - pairwise_auc(scores, labels)) <= 1e-12


def test_degenerate_labels_rejected():
    with pytest.raises(ValueError):
        roc_auc([0.2, 0.8], [1, 1])


def test_roc_curve_validation():
    with pytest.raises(ValueError):
        RocCurve((RocPoint(0.5, 0.0, 1.0),))


def test_auc_confidence_interval_is_ordered_and_deterministic():
    rng = np.random.default_rng(3)
    scores = rng.random(60)
    labels = (scores + rng.normal(0, 0.3, 60) > 0.5).astype(int)
    if labels.min() == labels.max():
        labels[0] = 1 - labels[0]
    low1, high1, skipped1 = auc_confidence_interval(scores, labels, n_boot=500, seed=4)
    low2, high2, skipped2 = auc_confidence_interval(scores, labels, n_boot=500, seed=4)
    assert (low1, high1, skipped1) == (low2, high2, skipped2)
    _, auc = roc_auc(scores, labels)
    assert 0.0 <= low1 <= high1 <= 1.0


# -- predict_risk -------------------------------------------------------------------


def test_observed_target_never_leaks():
    net = chain_network(0.8)
    data = net.sample(40, seed=5)
    scores = predict_risk(net, data, "C", "s1")
    flipped_codes = data.codes.copy()
    flipped_codes[:, 2] = 1 - flipped_codes[:, 2]
    flipped = Dataset(net.variables, flipped_codes)
    assert scores == predict_risk(net, flipped, "C", "s1")


def test_fully_missing_record_scores_prior_marginal():
    net = chain_network(0.8)
    record = Dataset(net.variables, np.full((1, 3), -1, dtype=np.int64))
    score = predict_risk(net, record, "C", "s1")[0]
    assert score == pytest.approx(float(net.posterior({}, "C")[1]), abs=1e-12)


def test_predict_risk_matches_enumeration():
    net = random_network(6, seed=30, max_card=3, edge_prob=0.5)
    data = net.sample(25, seed=31)
    for column in list(net.dag.nodes)[:3]:
        data = inject_missing(data, MissingnessSpec("MCAR", 0.3, column, seed=32))
    target = net.dag.nodes[-1]
    positive = net.variable(target).states[0]
    scores = predict_risk(net, data, target, positive)
    names = list(net.dag.nodes)
    for row, score in enumerate(scores):
        evidence = {
            names[j]: int(data.codes[row, j])
            for j in range(len(names))
            if names[j] != target and data.codes[row, j] != -1
        }
        expected = oracle_posterior(net, evidence, target)[0]
        assert score == pytest.approx(expected, abs=1e-9)


def test_predict_risk_reports_impossible_records_as_none():
    from riskbn.bn import network_from_tables
    from riskbn.graph import Dag

    variables = (Variable("A", ("a0", "a1")), Variable("B", ("b0", "b1")))
    dag = Dag(["A", "B"], [("A", "B")])
    tables = {"A": np.array([[1.0, 0.0]]), "B": np.array([[1.0, 0.0], [0.0, 1.0]])}
    net = network_from_tables(dag, variables, tables)
    records = Dataset(variables, np.array([[0, 0], [1, 1]]))  # second is impossible
    scores = predict_risk(net, records, "B", "b1")
    assert scores[0] is not None and scores[1] is None


def test_labelled_scores_filters_and_counts():
    variables = (Variable("L", ("neg", "pos")),)
    records = Dataset(variables, np.array([[1], [0], [-1], [1]]))
    scores = [0.9, None, 0.5, 0.2]
    kept, labels, undefined, unlabelled = labelled_scores(scores, records, "L", "pos")
    assert kept == [0.9, 0.2] and labels == [1, 1]
    assert undefined == 1 and unlabelled == 1


# -- grid search -------------------------------------------------------------------------


def small_cohort():
    net = chain_network(0.9)
    data = net.sample(600, seed=40)
    data = inject_missing(data, MissingnessSpec("MCAR", 0.1, "B", seed=41))
    from riskbn.dataset import train_test_split

    return net, *train_test_split(data, 0.7, seed=42)


def quick_config(n=2, seed=0):
    return BootstrapConfig(n=n, seed=seed, sem=SemConfig(em=EmConfig(max_iterations=25)))


def test_grid_single_configuration_matches_manual_run():
    from riskbn.bootstrap import learn_cbn

    net, train, test = small_cohort()
    k = PriorKnowledge(tiers=[{"A"}, {"B"}, {"C"}])
    point = GridPoint(bootstrap=quick_config(), threshold=0.5)
    [result] = grid_search(train, test, k, [point], "C", "s1")
    assert result.error is None
    learned = learn_cbn(train, k, point.bootstrap, point.threshold)
    scores = predict_risk(learned.network, test, "C", "s1")
    kept, labels, _, _ = labelled_scores(scores, test, "C", "s1")
    _, expected_auc = roc_auc(kept, labels)
    assert result.out_sample_auc == pytest.approx(expected_auc, abs=1e-12)
    assert result.target_parents == learned.network.dag.parents("C")


def test_grid_duplicate_configurations_identical():
    net, train, test = small_cohort()
    k = PriorKnowledge(tiers=[{"A"}, {"B"}, {"C"}])
    point = GridPoint(bootstrap=quick_config(), threshold=0.5)
    results = grid_search(train, test, k, [point, point], "C", "s1")
    assert results[0].in_sample_auc == results[1].in_sample_auc
    assert results[0].out_sample_auc == results[1].out_sample_auc
    assert results[0].target_parents == results[1].target_parents


def test_grid_two_by_two_and_threshold_monotonicity():
    net, train, test = small_cohort()
    k = PriorKnowledge(tiers=[{"A"}, {"B"}, {"C"}])
    grid = [
        GridPoint(bootstrap=quick_config(n=3, seed=1), threshold=t) for t in (0.3, 0.9)
    ]
    results = grid_search(train, test, k, grid, "C", "s1")
    assert len(results) == 2
    by_threshold = {r.config.threshold: r for r in results}
    for result in results:
        if result.out_sample_auc is not None:
            assert 0.0 <= result.out_sample_auc <= 1.0
    # same bootstrap seed: the higher threshold keeps a subset of edges,
    # so the target's parents must be nested
    assert set(by_threshold[0.9].target_parents) <= set(by_threshold[0.3].target_parents)


def test_grid_failures_are_recorded_not_fatal():
    net, train, test = small_cohort()
    bad = GridPoint(bootstrap=quick_config(), threshold=1.5)
    good = GridPoint(bootstrap=quick_config(), threshold=0.5)
    results = grid_search(train, test, None, [bad, good], "C", "s1")
    errors = [r for r in results if r.error]
    assert len(errors) == 1 and "threshold" in errors[0].error


def test_grid_requires_nonempty_grid():
    net, train, test = small_cohort()
    with pytest.raises(ValueError):
        grid_search(train, test, None, [], "C", "s1")


def test_grid_results_sorted_by_out_of_sample_auc():
    net, train, test = small_cohort()
    grid = [
        GridPoint(bootstrap=quick_config(n=2, seed=s), threshold=0.5) for s in (1, 2, 3)
    ]
    results = grid_search(train, test, None, grid, "C", "s1")
    values = [r.out_sample_auc for r in results if r.out_sample_auc is not None]
    assert values == sorted(values, reverse=True)


# -- reports -----------------------------------------------------------------------------


def test_evaluation_report_structure():
    rng = np.random.default_rng(8)
    scores = rng.random(40)
    labels = (scores > 0.5).astype(int)
    report = format_evaluation_report(scores, labels, ci=(0.8, 1.0, 0), n_undefined=2)
    assert "[summary]" in report and "[roc]" in report and "[confusion]" in report
    assert "records_undefined: 2" in report
    assert "auc_ci_low" in report


def test_grid_and_scatter_formats():
    point = GridPoint(bootstrap=BootstrapConfig(n=2, seed=0), threshold=0.5)
    from riskbn.evaluation import GridResult

    results = [
        GridResult(config=point, in_sample_auc=0.9, out_sample_auc=0.8, target_parents=("B",)),
        GridResult(config=point, error="ValueError: boom"),
    ]
    table = format_grid_results(results)
    assert "0.900000" in table and "ValueError:_boom" in table
    scatter = format_auc_scatter(results)
    assert scatter.count("\n") == 2  # header + one valid point
    assert "B" in scatter
