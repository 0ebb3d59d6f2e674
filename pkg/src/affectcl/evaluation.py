"""Participant-disjoint cross-validation over the training methods.

A single experiment cell fixes (method, window length, modality) and runs
k-fold cross-validation n_runs times with derived seeds. The downstream
task is always the binary high/low state classification; its labels come
from the corpus-wide state median with an exclusion band. The change and
trend contrastive thresholds are recomputed per fold from training windows
only. Accuracies are kept raw per (run, fold) and aggregated afterwards.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .corpus import (
    ModalityConfig,
    Session,
    WindowSample,
    apply_standardizer,
    feature_matrix,
    fit_standardizer,
    fuse_annotations,
    window_session,
)
from .errors import ConfigurationError, DegenerateInputError
from .measures import (
    STRATEGY_CHANGE,
    STRATEGY_HIGH_LOW,
    STRATEGY_TREND,
    assign_label,
    category_index,
    compute_threshold,
)
from .nn import DenseLayer, network_forward_batch
from .stats import t_test_two_tailed
from .train import TrainConfig, train_encoder_scl, train_end_to_end, train_probe

logger = logging.getLogger(__name__)

METHOD_SCL_HIGH_LOW = "scl_high_low"
METHOD_SCL_CHANGE = "scl_change_unchanged"
METHOD_SCL_TREND = "scl_up_down"
METHOD_END_TO_END = "end_to_end"
METHOD_MAJORITY = "majority"
METHODS = (
    METHOD_SCL_HIGH_LOW,
    METHOD_SCL_CHANGE,
    METHOD_SCL_TREND,
    METHOD_END_TO_END,
    METHOD_MAJORITY,
)

_SCL_STRATEGY = {
    METHOD_SCL_HIGH_LOW: STRATEGY_HIGH_LOW,
    METHOD_SCL_CHANGE: STRATEGY_CHANGE,
    METHOD_SCL_TREND: STRATEGY_TREND,
}


@dataclass(frozen=True)
class FoldSplit:
    """One fold's disjoint train/test participant sets."""

    fold_index: int
    train_participants: tuple[str, ...]
    test_participants: tuple[str, ...]


def split_folds(participants, k: int, seed: int) -> list[FoldSplit]:
    """Seeded shuffle into k near-equal participant groups (sizes differ by <= 1)."""
    participants = list(participants)
    if k < 2:
        raise ConfigurationError("need at least 2 folds")
    if len(participants) < k:
        raise ConfigurationError(f"cannot split {len(participants)} participants into {k} folds")
    rng = np.random.default_rng(seed)
    order = [participants[i] for i in rng.permutation(len(participants))]
    base, extra = divmod(len(order), k)
    folds: list[FoldSplit] = []
    start = 0
    for fold_index in range(k):
        size = base + (1 if fold_index < extra else 0)
        test = tuple(order[start : start + size])
        train = tuple(p for p in order if p not in test)
        folds.append(FoldSplit(fold_index, train, test))
        start += size
    return folds


def evaluate_accuracy(model: list[DenseLayer], features: np.ndarray, labels: np.ndarray) -> float:
    """Fraction of argmax-correct predictions on a labeled test set."""
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels)
    if x.shape[0] == 0:
        raise DegenerateInputError("empty test set")
    out, _ = network_forward_batch(x, model)
    return float(np.mean(np.argmax(out, axis=1) == y))


@dataclass
class ExperimentResult:
    """Raw per-run per-fold accuracies for one experiment cell, with the
    metadata needed to audit how each number was produced."""

    method: str
    window_length_s: float
    step_s: float
    modality: tuple[str, ...]
    epsilon: float
    n_runs: int
    k_folds: int
    base_seed: int
    state_median: float
    train_config: dict
    run_seeds: list[int] = field(default_factory=list)
    accuracies: list[list[float]] = field(default_factory=list)  # [run][fold]
    fold_test_participants: list[list[list[str]]] = field(default_factory=list)
    fold_thresholds: list[list[float | None]] = field(default_factory=list)
    n_windows_total: int = 0
    n_windows_labeled: int = 0
    shuffled_labels: bool = False

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentResult":
        data = dict(data)
        data["modality"] = tuple(data["modality"])
        return cls(**data)


@dataclass(frozen=True)
class ExperimentSummary:
    """Aggregated view of one cell: grand mean, CI over run means, best fold."""

    mean_accuracy: float
    ci95_half_width: float | None
    best_fold_accuracy: float


def aggregate(result: ExperimentResult) -> ExperimentSummary:
    """Mean over every fold x run accuracy; 95% CI from the run-level means."""
    acc = np.asarray(result.accuracies, dtype=np.float64)
    if acc.size == 0:
        raise DegenerateInputError("no accuracies to aggregate")
    run_means = acc.mean(axis=1)
    half_width: float | None = None
    if run_means.size >= 2:
        from .stats import student_t_two_sided_quantile

        sd = float(np.std(run_means, ddof=1))
        t_crit = student_t_two_sided_quantile(0.05, run_means.size - 1)
        half_width = t_crit * sd / float(np.sqrt(run_means.size))
    return ExperimentSummary(
        mean_accuracy=float(acc.mean()),
        ci95_half_width=half_width,
        best_fold_accuracy=float(acc.max()),
    )


@dataclass
class _LabeledWindows:
    """The state-filtered window population used by every method."""

    windows: list[WindowSample]
    downstream: np.ndarray  # 0 = low, 1 = high
    state_median: float
    n_total: int


def prepare_windows(
    sessions: list[Session],
    window_length_s: float,
    step_s: float,
    modality: ModalityConfig,
    epsilon: float,
    shuffle_labels: bool = False,
    shuffle_seed: int = 0,
) -> _LabeledWindows:
    """Window every session, label with the corpus-wide state median, and
    drop excluded (ambiguous) windows. Optionally shuffle the kept labels."""
    windows: list[WindowSample] = []
    for session in sessions:
        fused = fuse_annotations(session.annotation_traces)
        windows.extend(window_session(session, fused, window_length_s, step_s, modality))
    if not windows:
        raise DegenerateInputError("no windows produced; session too short for the window length")
    thresholds = compute_threshold(
        [w.measures.state for w in windows], STRATEGY_HIGH_LOW, epsilon
    )
    kept: list[WindowSample] = []
    labels: list[int] = []
    for w in windows:
        category = assign_label(w.measures, thresholds)
        if category is None:
            continue
        kept.append(w)
        labels.append(category_index(STRATEGY_HIGH_LOW, category))
    if not kept:
        raise DegenerateInputError("every window fell inside the exclusion band")
    downstream = np.asarray(labels)
    if shuffle_labels:
        rng = np.random.default_rng(shuffle_seed)
        downstream = downstream[rng.permutation(downstream.size)]
    return _LabeledWindows(
        windows=kept,
        downstream=downstream,
        state_median=thresholds.median_value,
        n_total=len(windows),
    )


def _fold_seed(run_seed: int, fold_index: int) -> int:
    return int(np.random.SeedSequence((run_seed, fold_index)).generate_state(1)[0])


def _contrastive_labels(
    method: str, train_windows: list[WindowSample], downstream_train: np.ndarray
) -> tuple[np.ndarray, float | None]:
    """Per-fold contrastive labels and the threshold value they used."""
    strategy = _SCL_STRATEGY[method]
    if strategy == STRATEGY_HIGH_LOW:
        return downstream_train, None
    if strategy == STRATEGY_CHANGE:
        values = [w.measures.change for w in train_windows]
    else:
        values = [w.measures.trend for w in train_windows]
    thresholds = compute_threshold(values, strategy)
    labels = np.asarray(
        [
            category_index(strategy, assign_label(w.measures, thresholds))
            for w in train_windows
        ]
    )
    return labels, thresholds.median_value


def run_experiment(
    sessions: list[Session],
    method: str,
    window_length_s: float,
    step_s: float,
    modality: ModalityConfig,
    n_runs: int,
    k_folds: int,
    train_cfg: TrainConfig,
    epsilon: float = 0.1,
    base_seed: int = 0,
    shuffle_labels: bool = False,
) -> ExperimentResult:
    """Run one experiment cell: n_runs independent k-fold cross-validations."""
    if method not in METHODS:
        raise ConfigurationError(f"unknown method {method!r}; expected one of {METHODS}")
    if n_runs < 1:
        raise ConfigurationError("n_runs must be >= 1")
    prepared = prepare_windows(
        sessions, window_length_s, step_s, modality, epsilon,
        shuffle_labels=shuffle_labels, shuffle_seed=base_seed,
    )
    participants = sorted({w.participant_id for w in prepared.windows})
    pid_arr = np.asarray([w.participant_id for w in prepared.windows])
    features_all = feature_matrix(prepared.windows)
    y_all = prepared.downstream

    result = ExperimentResult(
        method=method,
        window_length_s=window_length_s,
        step_s=step_s,
        modality=modality.ordered,
        epsilon=epsilon,
        n_runs=n_runs,
        k_folds=k_folds,
        base_seed=base_seed,
        state_median=prepared.state_median,
        train_config={
            "lr": train_cfg.lr,
            "batch_size": train_cfg.batch_size,
            "temperature": train_cfg.temperature,
            "patience_epochs": train_cfg.patience_epochs,
            "max_epochs": train_cfg.max_epochs,
            "encoder_units": train_cfg.encoder_units,
        },
        n_windows_total=prepared.n_total,
        n_windows_labeled=len(prepared.windows),
        shuffled_labels=shuffle_labels,
    )

    for run_index in range(n_runs):
        run_seed = base_seed + run_index
        folds = split_folds(participants, k_folds, run_seed)
        run_accs: list[float] = []
        run_tests: list[list[str]] = []
        run_thresholds: list[float | None] = []
        for fold in folds:
            if set(fold.train_participants) & set(fold.test_participants):
                raise ConfigurationError("train and test participants overlap")
            train_mask = np.isin(pid_arr, fold.train_participants)
            test_mask = np.isin(pid_arr, fold.test_participants)
            if not train_mask.any() or not test_mask.any():
                raise DegenerateInputError(
                    f"fold {fold.fold_index}: empty train or test window set"
                )
            mean, std = fit_standardizer(features_all[train_mask])
            x_train = apply_standardizer(features_all[train_mask], mean, std)
            x_test = apply_standardizer(features_all[test_mask], mean, std)
            y_train, y_test = y_all[train_mask], y_all[test_mask]
            cfg = replace(train_cfg, seed=_fold_seed(run_seed, fold.fold_index))

            threshold_value: float | None = None
            if method == METHOD_MAJORITY:
                majority = int(np.argmax(np.bincount(y_train, minlength=2)))
                acc = float(np.mean(y_test == majority))
            elif method == METHOD_END_TO_END:
                model = train_end_to_end(x_train, y_train, cfg)
                acc = evaluate_accuracy(model, x_test, y_test)
            else:
                train_windows = [w for w, m in zip(prepared.windows, train_mask) if m]
                c_labels, threshold_value = _contrastive_labels(
                    method, train_windows, y_train
                )
                encoder = train_encoder_scl(x_train, c_labels, cfg)
                probe = train_probe(encoder, x_train, y_train, cfg)
                acc = evaluate_accuracy([encoder, probe], x_test, y_test)
            run_accs.append(acc)
            run_tests.append(list(fold.test_participants))
            run_thresholds.append(threshold_value)
            logger.info(
                "%s w=%.1fs %s run %d fold %d: accuracy %.4f",
                method, window_length_s, modality.name, run_index, fold.fold_index, acc,
            )
        result.run_seeds.append(run_seed)
        result.accuracies.append(run_accs)
        result.fold_test_participants.append(run_tests)
        result.fold_thresholds.append(run_thresholds)
    return result


def compare_results(a: ExperimentResult, b: ExperimentResult) -> dict:
    """Two-tailed t-test over run-level mean accuracies of two cells."""
    means_a = np.asarray(a.accuracies, dtype=np.float64).mean(axis=1)
    means_b = np.asarray(b.accuracies, dtype=np.float64).mean(axis=1)
    report = {
        "method_a": a.method,
        "method_b": b.method,
        "window_length_s": a.window_length_s,
        "modality": "+".join(a.modality),
        "mean_a": float(means_a.mean()),
        "mean_b": float(means_b.mean()),
        "t": None,
        "p": None,
        "significant": False,
        "degenerate_variance": False,
    }
    try:
        t, p = t_test_two_tailed(means_a, means_b)
    except DegenerateInputError:
        report["degenerate_variance"] = True
        return report
    report.update(t=t, p=p, significant=bool(p < 0.05))
    return report
