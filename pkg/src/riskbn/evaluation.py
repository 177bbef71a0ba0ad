"""Prediction quality: confusion counts, ROC/AUC, risk scoring, grid search."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .bn import CausalBayesianNetwork
from .bootstrap import BootstrapConfig, LearnedNetwork, learn_cbn
from .dataset import MISSING, Dataset
from .errors import ImpossibleEvidenceError, SchemaError
from .graph import PriorKnowledge


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValueError("confusion counts must be nonnegative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def confusion(scores: Sequence[float], labels: Sequence[int], threshold: float) -> ConfusionMatrix:
    """Tabulate predictions (positive iff score >= threshold) against labels."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape:
        raise ValueError(f"{scores.shape[0]} scores vs {labels.shape[0]} labels")
    if not np.isin(labels, (0, 1)).all():
        raise ValueError("labels must be binary (0/1)")
    predicted = scores >= threshold
    actual = labels == 1
    return ConfusionMatrix(
        tp=int((predicted & actual).sum()),
        fp=int((predicted & ~actual).sum()),
        tn=int((~predicted & ~actual).sum()),
        fn=int((~predicted & actual).sum()),
    )


def sensitivity(cm: ConfusionMatrix) -> float | None:
    """True positive rate; None when there are no positives to rate."""
    if cm.tp + cm.fn == 0:
        return None
    return cm.tp / (cm.tp + cm.fn)


def specificity(cm: ConfusionMatrix) -> float | None:
    """True negative rate; None when there are no negatives to rate."""
    if cm.tn + cm.fp == 0:
        return None
    return cm.tn / (cm.tn + cm.fp)


@dataclass(frozen=True)
class RocPoint:
    fpr: float
    tpr: float
    threshold: float


@dataclass(frozen=True)
class RocCurve:
    points: tuple[RocPoint, ...]

    def __post_init__(self):
        pts = self.points
        if not pts:
            raise ValueError("ROC curve needs points")
        if (pts[0].fpr, pts[0].tpr) != (0.0, 0.0) or (pts[-1].fpr, pts[-1].tpr) != (1.0, 1.0):
            raise ValueError("ROC curve must run from (0,0) to (1,1)")
        for a, b in zip(pts, pts[1:]):
            if b.fpr < a.fpr or b.tpr < a.tpr:
                raise ValueError("ROC coordinates must be non-decreasing")


def roc_auc(scores: Sequence[float], labels: Sequence[int]) -> tuple[RocCurve, float]:
    """ROC curve over descending unique score thresholds, AUC by trapezoid.

    The trapezoid area equals the pairwise-comparison statistic with ties
    counted one half.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape:
        raise ValueError(f"{scores.shape[0]} scores vs {labels.shape[0]} labels")
    if not np.isin(labels, (0, 1)).all():
        raise ValueError("labels must be binary (0/1)")
    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("need at least one positive and one negative label")

    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    sorted_pos = (labels[order] == 1).astype(np.int64)

    points = [RocPoint(0.0, 0.0, math.inf)]
    tp = fp = 0
    i = 0
    n = len(sorted_scores)
    while i < n:
        j = i
        while j < n and sorted_scores[j] == sorted_scores[i]:
            j += 1
        tp += int(sorted_pos[i:j].sum())
        fp += (j - i) - int(sorted_pos[i:j].sum())
        points.append(RocPoint(fp / n_neg, tp / n_pos, float(sorted_scores[i])))
        i = j

    area_terms = [
        (b.fpr - a.fpr) * (a.tpr + b.tpr) / 2.0 for a, b in zip(points, points[1:])
    ]
    return RocCurve(tuple(points)), math.fsum(area_terms)


def auc_confidence_interval(
    scores: Sequence[float],
    labels: Sequence[int],
    n_boot: int = 2000,
    seed: int = 0,
    level: float = 0.95,
) -> tuple[float, float, int]:
    """Percentile-bootstrap CI for the AUC over the scored records.

    Returns (low, high, skipped) where ``skipped`` counts resamples that
    were degenerate (single-class) and therefore carried no AUC.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    roc_auc(scores, labels)  # validate inputs once
    rng = np.random.default_rng(seed)
    n = len(scores)
    aucs = []
    skipped = 0
    for _ in range(n_boot):
        rows = rng.integers(0, n, size=n)
        sample_labels = labels[rows]
        if sample_labels.min() == sample_labels.max():
            skipped += 1
            continue
        _, auc = roc_auc(scores[rows], sample_labels)
        aucs.append(auc)
    tail = (1.0 - level) / 2.0
    low, high = np.percentile(np.asarray(aucs), [100 * tail, 100 * (1 - tail)])
    return float(low), float(high), skipped


def predict_risk(
    bn: CausalBayesianNetwork, records: Dataset, target: str, positive_state: str
) -> list[float | None]:
    """Posterior probability of the target's positive state per record.

    Each record's observed cells, except the target itself, enter as
    evidence; an observed target value is never conditioned on. Records
    whose evidence is impossible under the network score as None.
    """
    if tuple(records.variables) != bn.variables:
        raise SchemaError("record schema does not match the network")
    target_col = records.var_index(target)
    positive_index = bn.variable(target).index_of(positive_state)
    names = [v.name for v in records.variables]
    out: list[float | None] = []
    for row in range(records.n_records):
        evidence = {
            names[j]: int(records.codes[row, j])
            for j in range(len(names))
            if j != target_col and records.codes[row, j] != MISSING
        }
        try:
            out.append(float(bn.posterior(evidence, target)[positive_index]))
        except ImpossibleEvidenceError:
            out.append(None)
    return out


def labelled_scores(
    scores: Sequence[float | None], records: Dataset, target: str, positive_state: str
) -> tuple[list[float], list[int], int, int]:
    """Pair scores with 0/1 labels from the target column.

    Undefined scores and records with a missing target label are excluded;
    their counts come back as (n_undefined, n_unlabelled).
    """
    column = records.column(target)
    positive_index = records.variable(target).index_of(positive_state)
    kept_scores: list[float] = []
    kept_labels: list[int] = []
    n_undefined = 0
    n_unlabelled = 0
    for row, score in enumerate(scores):
        if score is None:
            n_undefined += 1
            continue
        if column[row] == MISSING:
            n_unlabelled += 1
            continue
        kept_scores.append(score)
        kept_labels.append(1 if column[row] == positive_index else 0)
    return kept_scores, kept_labels, n_undefined, n_unlabelled


@dataclass(frozen=True)
class GridPoint:
    """One grid-search configuration: bootstrap settings plus the edge threshold."""

    bootstrap: BootstrapConfig
    threshold: float

    def describe(self) -> dict:
        m = self.bootstrap.m
        return {
            "n": self.bootstrap.n,
            "m": "auto" if m is None else m,
            "lambda": self.threshold,
            "seed": self.bootstrap.seed,
        }


@dataclass(frozen=True)
class GridResult:
    config: GridPoint
    in_sample_auc: float | None = None
    out_sample_auc: float | None = None
    target_parents: tuple[str, ...] = ()
    in_undefined: int = 0
    out_undefined: int = 0
    error: str | None = None


def _evaluate_split(
    learned: LearnedNetwork, data: Dataset, target: str, positive_state: str
) -> tuple[float | None, int]:
    scores = predict_risk(learned.network, data, target, positive_state)
    kept_scores, kept_labels, n_undefined, _ = labelled_scores(
        scores, data, target, positive_state
    )
    if not kept_labels or min(kept_labels) == max(kept_labels):
        return None, n_undefined
    _, auc = roc_auc(kept_scores, kept_labels)
    return auc, n_undefined


def grid_search(
    train: Dataset,
    test: Dataset,
    knowledge: PriorKnowledge | None,
    grid: Sequence[GridPoint],
    target: str,
    positive_state: str,
    workers: int = 1,
) -> list[GridResult]:
    """Learn on the train split per configuration; score both splits.

    Failures of individual configurations are recorded in their result
    rather than aborting the sweep. Results come back sorted by
    out-of-sample AUC, best first, with the submission order as tie-break.
    """
    if not grid:
        raise ValueError("grid is empty")
    results: list[GridResult] = []
    for point in grid:
        try:
            learned = learn_cbn(
                train, knowledge, point.bootstrap, point.threshold, workers=workers
            )
            in_auc, in_undef = _evaluate_split(learned, train, target, positive_state)
            out_auc, out_undef = _evaluate_split(learned, test, target, positive_state)
            results.append(
                GridResult(
                    config=point,
                    in_sample_auc=in_auc,
                    out_sample_auc=out_auc,
                    target_parents=learned.network.dag.parents(target),
                    in_undefined=in_undef,
                    out_undefined=out_undef,
                )
            )
        except Exception as exc:  # noqa: BLE001 - per-configuration isolation
            results.append(GridResult(config=point, error=f"{type(exc).__name__}: {exc}"))
    order = sorted(
        range(len(results)),
        key=lambda i: (
            -(results[i].out_sample_auc if results[i].out_sample_auc is not None else -math.inf),
            i,
        ),
    )
    return [results[i] for i in order]


# -- report and plot-data emission ---------------------------------------------


def format_roc_points(curve: RocCurve) -> str:
    lines = ["fpr tpr threshold"]
    for point in curve.points:
        lines.append(f"{point.fpr!r} {point.tpr!r} {point.threshold!r}")
    return "\n".join(lines) + "\n"


def format_evaluation_report(
    scores: Sequence[float],
    labels: Sequence[int],
    ci: tuple[float, float, int] | None = None,
    n_undefined: int = 0,
    n_unlabelled: int = 0,
) -> str:
    """Structured text: summary, ROC points, one confusion row per threshold."""
    curve, auc = roc_auc(scores, labels)
    lines = ["[summary]"]
    lines.append(f"records_scored: {len(scores)}")
    lines.append(f"records_undefined: {n_undefined}")
    lines.append(f"records_unlabelled: {n_unlabelled}")
    lines.append(f"auc: {auc!r}")
    if ci is not None:
        low, high, skipped = ci
        lines.append(f"auc_ci_low: {low!r}")
        lines.append(f"auc_ci_high: {high!r}")
        lines.append(f"ci_skipped_resamples: {skipped}")
    lines.append("[roc]")
    lines.append(format_roc_points(curve).rstrip("\n"))
    lines.append("[confusion]")
    lines.append("threshold tp fp tn fn sensitivity specificity")
    for point in curve.points:
        cm = confusion(scores, labels, point.threshold)
        sens = sensitivity(cm)
        spec = specificity(cm)
        lines.append(
            f"{point.threshold!r} {cm.tp} {cm.fp} {cm.tn} {cm.fn} "
            f"{'NA' if sens is None else repr(sens)} {'NA' if spec is None else repr(spec)}"
        )
    return "\n".join(lines) + "\n"


def format_grid_results(results: Sequence[GridResult]) -> str:
    lines = ["n m lambda seed in_auc out_auc target_parents error"]
    for result in results:
        cfg = result.config.describe()
        parents = ";".join(result.target_parents) if result.target_parents else "-"
        in_auc = "NA" if result.in_sample_auc is None else f"{result.in_sample_auc:.6f}"
        out_auc = "NA" if result.out_sample_auc is None else f"{result.out_sample_auc:.6f}"
        error = result.error.replace(" ", "_") if result.error else "-"
        lines.append(
            f"{cfg['n']} {cfg['m']} {cfg['lambda']} {cfg['seed']} {in_auc} {out_auc} {parents} {error}"
        )
    return "\n".join(lines) + "\n"


def format_auc_scatter(results: Sequence[GridResult]) -> str:
    """Scatter-plot data: one point per configuration, grouped by the
    target's parent set (the grouping column external plotters color by)."""
    lines = ["in_auc out_auc parent_set n m lambda seed"]
    for result in results:
        if result.in_sample_auc is None or result.out_sample_auc is None:
            continue
        cfg = result.config.describe()
        parents = ";".join(result.target_parents) if result.target_parents else "(none)"
        lines.append(
            f"{result.in_sample_auc:.6f} {result.out_sample_auc:.6f} {parents} "
            f"{cfg['n']} {cfg['m']} {cfg['lambda']} {cfg['seed']}"
        )
    return "\n".join(lines) + "\n"
