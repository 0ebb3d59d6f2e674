"""Affect-infused contrastive representation learning on windowed multimodal
time series: a minimal dense-network stack, a supervised contrastive
objective with three affect-derived labeling strategies, participant-disjoint
cross-validation, and a synthetic corpus generator."""

from .contrastive import (
    ContrastiveBatch,
    l2_normalize,
    positive_sets,
    supcon_grad,
    supcon_loss,
)
from .corpus import (
    AnnotationTrace,
    ModalityConfig,
    Session,
    WindowSample,
    fuse_annotations,
    generate_synthetic,
    load_corpus,
    standardize_features,
    window_session,
    write_corpus,
)
from .errors import (
    ConfigurationError,
    CorpusFormatError,
    DegenerateInputError,
    TrainingError,
)
from .evaluation import (
    METHODS,
    ExperimentResult,
    FoldSplit,
    aggregate,
    evaluate_accuracy,
    run_experiment,
    split_folds,
)
from .measures import (
    AffectMeasures,
    LabelThresholds,
    affect_change,
    affect_state,
    affect_trend,
    assign_label,
    compute_threshold,
)
from .nn import AdamState, DenseLayer, adam_step, backward, dense_forward, finite_diff_grad, network_forward
from .stats import t_test_two_tailed
from .train import TrainConfig, early_stop, train_encoder_scl, train_end_to_end, train_probe

__version__ = "0.1.0"
