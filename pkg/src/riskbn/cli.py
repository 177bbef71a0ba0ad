"""Command-line interface.

Subcommands: discover (bootstrap confidence + average graph), fit (EM on a
given graph), predict (risk scores), eval (ROC/AUC report), gridsearch,
simulate (synthetic cohorts) and serve (HTTP endpoint for the browser UI).

Every command writes a manifest.json next to its outputs; re-running the
same command on the same inputs reproduces every output byte-for-byte.
Exit codes: 2 usage, 3 I/O, 4 validation, 5 numeric failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import sys
from pathlib import Path

import numpy as np

from .bn import read_model, write_model, CausalBayesianNetwork
from .bootstrap import (
    BootstrapConfig,
    build_average_graph,
    confidence_matrix,
    read_confidence,
    write_confidence,
    write_edge_strengths,
)
from .dataset import (
    Dataset,
    MissingnessSpec,
    inject_missing,
    read_schema,
    read_table,
    write_schema,
    write_table,
)
from .errors import (
    DataFormatError,
    GraphError,
    ImpossibleEvidenceError,
    SchemaError,
)
from .evaluation import (
    GridPoint,
    auc_confidence_interval,
    format_auc_scatter,
    format_evaluation_report,
    format_grid_results,
    format_roc_points,
    grid_search,
    labelled_scores,
    predict_risk,
    roc_auc,
)
from .graph import Dag, read_edge_list, read_prior_knowledge, write_edge_list, write_prior_knowledge
from .manifest import build_manifest, write_manifest
from .params import EmConfig, em_fit
from .server import ModelService, make_server
from .structure import ScoreConfig, SemConfig
from .synthetic import clinical_schema, reference_network

EXIT_IO = 3
EXIT_VALIDATION = 4
EXIT_NUMERIC = 5


# -- shared helpers ------------------------------------------------------------


def _load_data(path: str, schema_path: str | None) -> Dataset:
    schema = None
    if schema_path is not None:
        schema, _ = read_schema(schema_path)
    return read_table(path, schema=schema)


def _load_knowledge(path: str | None):
    if path is None:
        return None
    return read_prior_knowledge(path)


def _em_config(args) -> EmConfig:
    return EmConfig(max_iterations=args.max_em_iter, tolerance=args.tol, ess=args.ess)


def _sem_config(args) -> SemConfig:
    return SemConfig(
        em=_em_config(args),
        max_sem_iterations=args.max_sem_iter,
        score=ScoreConfig(),
    )


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _manifest_args(args) -> dict:
    skip = {"func"}
    return {k: v for k, v in vars(args).items() if k not in skip}


def _finish(args, command: str, inputs: list, outputs: list[Path]) -> int:
    manifest = build_manifest(command, _manifest_args(args), inputs, outputs)
    write_manifest(Path(args.out) / "manifest.json", manifest)
    for path in outputs:
        print(f"wrote {path}")
    print(f"wrote {Path(args.out) / 'manifest.json'}")
    return 0


def _records_for_model(path: str, network: CausalBayesianNetwork) -> Dataset:
    """Read a record file whose columns are any subset of the model variables."""
    with open(path, "r", encoding="utf-8", newline="") as handle:
        text = handle.read()
    reader = csv.reader(io.StringIO(text))
    try:
        header = [cell.strip() for cell in next(reader)]
    except StopIteration:
        raise DataFormatError("empty record file") from None
    names = [v.name for v in network.variables]
    for column in header:
        if column not in names:
            raise DataFormatError(f"record column {column!r} is not a model variable")
    subset = [network.variable(name) for name in header]
    partial = read_table(path, schema=subset)
    codes = np.full((partial.n_records, len(names)), -1, dtype=np.int64)
    for j, name in enumerate(header):
        codes[:, names.index(name)] = partial.codes[:, j]
    return Dataset(network.variables, codes)


# -- subcommands -----------------------------------------------------------------


def cmd_discover(args) -> int:
    data = _load_data(args.data, args.schema)
    knowledge = _load_knowledge(args.knowledge)
    cfg = BootstrapConfig(n=args.n, m=args.m, seed=args.seed, sem=_sem_config(args))

    def progress(done: int, total: int) -> None:
        print(f"bootstrap {done}/{total}", file=sys.stderr, flush=True)

    confidence = confidence_matrix(
        data, knowledge, cfg, workers=args.workers, on_progress=progress
    )
    result = build_average_graph(confidence, args.lam, knowledge)

    out = _outdir(args)
    confidence_path = out / "confidence.txt"
    strengths_path = out / "strengths.txt"
    graph_path = out / "graph.txt"
    write_confidence(confidence_path, confidence)
    write_edge_strengths(strengths_path, confidence)
    write_edge_list(graph_path, result.dag.edge_list())
    if result.dropped_ties:
        print(f"dropped {len(result.dropped_ties)} unresolvable antiparallel tie(s)")
    print(
        f"average graph keeps {len(result.dag.edges)} edge(s) at lambda={args.lam} "
        f"({len(result.skipped_cycle)} cycle-skipped, {len(result.skipped_forbidden)} forbidden)"
    )
    inputs = [args.data] + [p for p in (args.knowledge, args.schema) if p]
    return _finish(args, "discover", inputs, [confidence_path, strengths_path, graph_path])


def cmd_fit(args) -> int:
    data = _load_data(args.data, args.schema)
    edges = read_edge_list(args.graph)
    dag = Dag([v.name for v in data.variables], edges)
    cpts, trace = em_fit(dag, data, _em_config(args))
    network = CausalBayesianNetwork(dag, data.variables, cpts)

    out = _outdir(args)
    model_path = out / "model.txt"
    write_model(model_path, network)
    print(f"EM converged after {len(trace)} E-step(s), log-likelihood {trace[-1]:.6f}")
    inputs = [args.data, args.graph] + ([args.schema] if args.schema else [])
    return _finish(args, "fit", inputs, [model_path])


def cmd_predict(args) -> int:
    network = read_model(args.model)
    records = _records_for_model(args.data, network)
    scores = predict_risk(network, records, args.target, args.positive_state)

    out = _outdir(args)
    scores_path = out / "scores.csv"
    with open(scores_path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["index", "score"])
        for index, score in enumerate(scores):
            writer.writerow([index, "" if score is None else repr(score)])
    n_undefined = sum(1 for s in scores if s is None)
    if n_undefined:
        print(f"{n_undefined} record(s) had zero-probability evidence (empty score)")
    return _finish(args, "predict", [args.model, args.data], [scores_path])


def _read_scores(path: str) -> list[float | None]:
    with open(path, "r", encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["index", "score"]:
            raise DataFormatError("scores file must have an 'index,score' header")
        scores: list[float | None] = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 2:
                raise DataFormatError(f"line {lineno}: expected two cells")
            cell = row[1].strip()
            scores.append(None if cell == "" else float(cell))
    return scores


def cmd_eval(args) -> int:
    scores = _read_scores(args.scores)
    data = _load_data(args.data, args.schema)
    if len(scores) != data.n_records:
        raise DataFormatError(
            f"{len(scores)} scores for {data.n_records} records; files do not match"
        )
    kept_scores, kept_labels, n_undefined, n_unlabelled = labelled_scores(
        scores, data, args.target, args.positive_state
    )
    if not kept_scores:
        raise SchemaError("no scorable records (all undefined or unlabelled)")
    curve, auc = roc_auc(kept_scores, kept_labels)
    ci = auc_confidence_interval(
        kept_scores, kept_labels, n_boot=args.ci_resamples, seed=args.ci_seed
    )
    report = format_evaluation_report(
        kept_scores, kept_labels, ci=ci, n_undefined=n_undefined, n_unlabelled=n_unlabelled
    )

    out = _outdir(args)
    report_path = out / "report.txt"
    roc_path = out / "roc.txt"
    report_path.write_text(report, encoding="utf-8")
    roc_path.write_text(format_roc_points(curve), encoding="utf-8")
    print(f"AUC {auc:.6f} (95% CI {ci[0]:.6f}-{ci[1]:.6f}, {len(kept_scores)} records)")
    return _finish(args, "eval", [args.scores, args.data], [report_path, roc_path])


_GRID_COLUMNS = {"n", "m", "lambda", "seed", "ess", "tol", "max_em_iter", "max_sem_iter"}


def _read_grid(path: str) -> list[GridPoint]:
    with open(path, "r", encoding="utf-8", newline="") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None:
            raise DataFormatError("grid file is empty")
        unknown = set(reader.fieldnames) - _GRID_COLUMNS
        if unknown:
            raise DataFormatError(f"unknown grid columns: {sorted(unknown)}")
        points = []
        for row in reader:
            def cell(name, cast, default):
                value = row.get(name)
                return default if value in (None, "") else cast(value)

            em = EmConfig(
                max_iterations=cell("max_em_iter", int, 100),
                tolerance=cell("tol", float, 1e-6),
                ess=cell("ess", float, 1.0),
            )
            sem = SemConfig(em=em, max_sem_iterations=cell("max_sem_iter", int, 10))
            bootstrap = BootstrapConfig(
                n=cell("n", int, 25),
                m=cell("m", int, None),
                seed=cell("seed", int, 0),
                sem=sem,
            )
            points.append(GridPoint(bootstrap=bootstrap, threshold=cell("lambda", float, 0.5)))
    if not points:
        raise DataFormatError("grid file has no configurations")
    return points


def cmd_gridsearch(args) -> int:
    train = _load_data(args.train, args.schema)
    schema = train.variables
    test = read_table(args.test, schema=schema)
    knowledge = _load_knowledge(args.knowledge)
    grid = _read_grid(args.grid)
    results = grid_search(
        train, test, knowledge, grid, args.target, args.positive_state, workers=args.workers
    )

    out = _outdir(args)
    grid_path = out / "grid.txt"
    scatter_path = out / "scatter.txt"
    grid_path.write_text(format_grid_results(results), encoding="utf-8")
    scatter_path.write_text(format_auc_scatter(results), encoding="utf-8")
    best = results[0]
    if best.out_sample_auc is not None:
        print(f"best out-of-sample AUC {best.out_sample_auc:.6f} at {best.config.describe()}")
    failures = sum(1 for r in results if r.error)
    if failures:
        print(f"{failures} configuration(s) failed; see grid.txt")
    inputs = [args.train, args.test, args.grid] + [
        p for p in (args.knowledge, args.schema) if p
    ]
    return _finish(args, "gridsearch", inputs, [grid_path, scatter_path])


def cmd_simulate(args) -> int:
    if args.reference:
        network = reference_network(seed=args.model_seed)
        schema = clinical_schema(include_hospital=False)
        tiers = schema.tiers
        knowledge = schema.prior_knowledge()
    else:
        network = read_model(args.model)
        tiers = ()
        knowledge = None
    data = network.sample(args.count, seed=args.seed)
    if args.missing_rate > 0.0:
        if not args.missing_target:
            raise SchemaError("--missing-target is required when --missing-rate > 0")
        for index, target in enumerate(args.missing_target):
            spec = MissingnessSpec(
                mechanism=args.missing_mechanism,
                rate=args.missing_rate,
                target=target,
                seed=args.missing_seed + index,
                driver=args.missing_driver,
            )
            data = inject_missing(data, spec)

    out = _outdir(args)
    data_path = out / "data.csv"
    schema_path = out / "schema.txt"
    write_table(data_path, data)
    write_schema(schema_path, data.variables, tiers)
    outputs = [data_path, schema_path]
    if knowledge is not None:
        knowledge_path = out / "knowledge.txt"
        write_prior_knowledge(knowledge_path, knowledge)
        outputs.append(knowledge_path)
    inputs = [] if args.reference else [args.model]
    return _finish(args, "simulate", inputs, outputs)


def cmd_serve(args) -> int:
    network = read_model(args.model)
    confidence = read_confidence(args.confidence) if args.confidence else None
    service = ModelService(network, confidence=confidence, default_target=args.target)
    server = make_server(service, host=args.host, port=args.port)
    host, port = server.server_address[:2]
    # flush so supervising processes see the ready line through a pipe
    print(
        f"serving model on http://{host}:{port} (GET /model, POST /predict, POST /whatif)",
        flush=True,
    )
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


# -- parser ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="riskbn",
        description="Causal Bayesian networks from incomplete categorical data",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_em_flags(p):
        p.add_argument("--ess", type=float, default=1.0, help="Dirichlet pseudo-count for EM")
        p.add_argument("--max-em-iter", type=int, default=100)
        p.add_argument("--tol", type=float, default=1e-6)

    discover = sub.add_parser("discover", help="bootstrap confidence matrix and average graph")
    discover.add_argument("--data", required=True)
    discover.add_argument("--knowledge")
    discover.add_argument("--schema")
    discover.add_argument("--n", type=int, default=25, help="number of bootstraps")
    discover.add_argument("--m", type=int, default=None, help="samples per bootstrap (default: dataset size)")
    discover.add_argument("--lambda", dest="lam", type=float, default=0.5, help="edge confidence threshold")
    discover.add_argument("--seed", type=int, default=0)
    add_em_flags(discover)
    discover.add_argument("--max-sem-iter", type=int, default=10)
    discover.add_argument("--workers", type=int, default=1)
    discover.add_argument("--out", required=True)
    discover.set_defaults(func=cmd_discover)

    fit = sub.add_parser("fit", help="EM parameter fit on a fixed graph")
    fit.add_argument("--data", required=True)
    fit.add_argument("--graph", required=True, help="edge-list file")
    fit.add_argument("--schema")
    add_em_flags(fit)
    fit.add_argument("--out", required=True)
    fit.set_defaults(func=cmd_fit)

    predict = sub.add_parser("predict", help="risk scores for a record file")
    predict.add_argument("--model", required=True)
    predict.add_argument("--data", required=True)
    predict.add_argument("--target", required=True)
    predict.add_argument("--positive-state", required=True)
    predict.add_argument("--out", required=True)
    predict.set_defaults(func=cmd_predict)

    evaluate = sub.add_parser("eval", help="ROC/AUC report from scores and labels")
    evaluate.add_argument("--scores", required=True, help="scores.csv from predict")
    evaluate.add_argument("--data", required=True, help="records carrying the true labels")
    evaluate.add_argument("--target", required=True)
    evaluate.add_argument("--positive-state", required=True)
    evaluate.add_argument("--schema")
    evaluate.add_argument("--ci-resamples", type=int, default=2000)
    evaluate.add_argument("--ci-seed", type=int, default=0)
    evaluate.add_argument("--out", required=True)
    evaluate.set_defaults(func=cmd_eval)

    grid = sub.add_parser("gridsearch", help="hyperparameter sweep over (n, m, lambda, seed)")
    grid.add_argument("--train", required=True)
    grid.add_argument("--test", required=True)
    grid.add_argument("--knowledge")
    grid.add_argument("--schema")
    grid.add_argument("--grid", required=True, help="CSV of configurations")
    grid.add_argument("--target", required=True)
    grid.add_argument("--positive-state", required=True)
    grid.add_argument("--workers", type=int, default=1)
    grid.add_argument("--out", required=True)
    grid.set_defaults(func=cmd_gridsearch)

    simulate = sub.add_parser("simulate", help="sample a synthetic cohort from a model")
    source = simulate.add_mutually_exclusive_group(required=True)
    source.add_argument("--model", help="model file to sample from")
    source.add_argument("--reference", action="store_true", help="use the built-in clinical-shaped network")
    simulate.add_argument("--model-seed", type=int, default=7, help="seed for the built-in network's tables")
    simulate.add_argument("--count", type=int, required=True)
    simulate.add_argument("--seed", type=int, default=0)
    simulate.add_argument("--missing-rate", type=float, default=0.0)
    simulate.add_argument("--missing-mechanism", choices=("MCAR", "MAR", "MNAR"), default="MCAR")
    simulate.add_argument("--missing-target", action="append", default=[],
                          help="column to blank; repeat for several columns")
    simulate.add_argument("--missing-driver")
    simulate.add_argument("--missing-seed", type=int, default=1000)
    simulate.add_argument("--out", required=True)
    simulate.set_defaults(func=cmd_simulate)

    serve = sub.add_parser("serve", help="HTTP endpoint for the browser UI")
    serve.add_argument("--model", required=True)
    serve.add_argument("--confidence", help="confidence matrix export for edge strengths")
    serve.add_argument("--target", help="default prediction target")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8035)
    serve.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    command = args.command
    try:
        return args.func(args)
    except ImpossibleEvidenceError as exc:
        print(f"riskbn {command}: numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (FloatingPointError, ZeroDivisionError, OverflowError) as exc:
        print(f"riskbn {command}: numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataFormatError, SchemaError, GraphError) as exc:
        print(f"riskbn {command}: invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"riskbn {command}: i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"riskbn {command}: invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
