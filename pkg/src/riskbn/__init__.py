"""riskbn: causal Bayesian networks from incomplete categorical data.

Bootstrap-resampled Structural EM with prior-knowledge constraints learns
the graph; EM fits the parameters; exact inference turns the fitted
network into per-patient risk predictions with full ROC/AUC evaluation and
an interactive what-if serving endpoint.
"""

from .bn import CausalBayesianNetwork, Cpt, read_model, write_model
from .bootstrap import (
    AverageGraphResult,
    BootstrapConfig,
    ConfidenceMatrix,
    LearnedNetwork,
    average_graph,
    build_average_graph,
    confidence_matrix,
    learn_cbn,
    resample,
)
from .completion import Completion, GroupedData
from .dataset import (
    MISSING,
    Dataset,
    MissingnessSpec,
    Variable,
    inject_missing,
    read_table,
    train_test_split,
    write_table,
)
from .errors import (
    ConstraintError,
    CycleError,
    DataFormatError,
    EdgeStateError,
    GraphError,
    ImpossibleEvidenceError,
    SchemaError,
    UnknownNodeError,
)
from .evaluation import (
    ConfusionMatrix,
    GridPoint,
    GridResult,
    RocCurve,
    auc_confidence_interval,
    confusion,
    grid_search,
    predict_risk,
    roc_auc,
    sensitivity,
    specificity,
)
from .graph import Dag, EditMove, MoveKind, PriorKnowledge, apply_move, tiers_to_forbidden
from .params import EmConfig, SufficientStatistics, em_fit, expected_counts, mle_fit
from .structure import ScoreConfig, SemConfig, family_score, hill_climb, structural_em, total_score
from .synthetic import CohortSchema, clinical_schema, random_network, reference_network

__version__ = "0.1.0"
