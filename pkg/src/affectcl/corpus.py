"""Corpus handling: on-disk layout, annotator fusion, sliding windows,
feature standardization and a synthetic generator with known ground truth.

On-disk layout, one directory per participant:

    <root>/<participant_id>/features_<modality>.csv        header: time_s,f0,f1,...
    <root>/<participant_id>/annotations_<dim>_<annot>.csv  header: time_s,value

All CSVs are comma-separated, decimal point, UTF-8, one sample per row.
Annotation values live in [-1, 1] on a uniform grid starting at 0; feature
timestamps only need to be strictly increasing (window membership is driven
by the timestamps, not an assumed rate).
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, CorpusFormatError, DegenerateInputError
from .measures import AffectMeasures, window_measures

logger = logging.getLogger(__name__)

MODALITY_ORDER = ("audio", "video", "physiology")

# dimensions of the handcrafted per-modality feature sets this loader targets
DEFAULT_MODALITY_DIMS = {"audio": 130, "video": 40, "physiology": 116}


@dataclass(frozen=True)
class AnnotationTrace:
    """One annotator's continuous trace for a session, uniform grid from t=0."""

    annotator_id: str
    values: np.ndarray
    rate_hz: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64))
        if self.rate_hz <= 0:
            raise ConfigurationError("annotation rate must be positive")
        if np.any(self.values < -1.0) or np.any(self.values > 1.0):
            raise ConfigurationError("annotation values must lie in [-1, 1]")

    @property
    def duration_s(self) -> float:
        return self.values.size / self.rate_hz


@dataclass
class Session:
    """One participant's recordings: per-modality feature streams plus annotations."""

    participant_id: str
    feature_streams: dict[str, tuple[np.ndarray, np.ndarray]]  # modality -> (time_s, (n, dim))
    annotation_traces: list[AnnotationTrace]

    def __post_init__(self) -> None:
        for modality, (ts, feats) in self.feature_streams.items():
            if ts.ndim != 1 or feats.ndim != 2 or ts.size != feats.shape[0]:
                raise ConfigurationError(
                    f"{self.participant_id}/{modality}: timestamps and features disagree"
                )
            if np.any(np.diff(ts) <= 0):
                raise ConfigurationError(
                    f"{self.participant_id}/{modality}: timestamps must be strictly increasing"
                )
        if self.annotation_traces:
            n = self.annotation_traces[0].values.size
            rate = self.annotation_traces[0].rate_hz
            for trace in self.annotation_traces:
                if trace.values.size != n or trace.rate_hz != rate:
                    raise ConfigurationError(
                        f"{self.participant_id}: annotator traces differ in length or rate"
                    )


@dataclass(frozen=True)
class ModalityConfig:
    """Which modalities feed the model, and their per-modality dimensions."""

    selected: tuple[str, ...]
    dims: dict[str, int]

    def __post_init__(self) -> None:
        if not self.selected:
            raise ConfigurationError("modality selection must not be empty")
        for name in self.selected:
            if name not in MODALITY_ORDER:
                raise ConfigurationError(f"unknown modality {name!r}")
            if name not in self.dims or self.dims[name] <= 0:
                raise ConfigurationError(f"missing or invalid dimension for {name!r}")
        if len(set(self.selected)) != len(self.selected):
            raise ConfigurationError("duplicate modality in selection")

    @property
    def ordered(self) -> tuple[str, ...]:
        return tuple(m for m in MODALITY_ORDER if m in self.selected)

    @property
    def fused_dim(self) -> int:
        return sum(self.dims[m] for m in self.ordered)

    @property
    def name(self) -> str:
        return "+".join(self.ordered)


@dataclass
class WindowSample:
    """One time window: averaged feature vector plus the window's measures."""

    participant_id: str
    window_start_s: float
    window_length_s: float
    features: np.ndarray
    measures: AffectMeasures


def fuse_annotations(traces: list[AnnotationTrace]) -> AnnotationTrace:
    """Pointwise median across annotators (even count: mean of the middle two)."""
    if not traces:
        raise DegenerateInputError("need at least one annotation trace")
    n = traces[0].values.size
    rate = traces[0].rate_hz
    for trace in traces:
        if trace.values.size != n or trace.rate_hz != rate:
            raise ConfigurationError("annotation traces must share length and rate")
    stacked = np.stack([t.values for t in traces])
    return AnnotationTrace("fused", np.median(stacked, axis=0), rate)


def window_starts(duration_s: float, window_length_s: float, step_s: float) -> np.ndarray:
    """Start times 0, step, 2*step, ... while the full window fits."""
    if window_length_s <= 0 or step_s <= 0:
        raise ConfigurationError("window length and step must be positive")
    if window_length_s > duration_s + 1e-9:
        return np.array([])
    count = int(np.floor((duration_s - window_length_s) / step_s + 1e-9)) + 1
    return np.arange(count) * step_s


def window_session(
    session: Session,
    fused_trace: AnnotationTrace,
    window_length_s: float,
    step_s: float,
    modality: ModalityConfig,
) -> list[WindowSample]:
    """Cut one session into windows of averaged features plus measures.

    Frame and annotation membership both use the half-open interval
    [start, start + length). Windows with no feature frame or fewer than two
    annotation samples are dropped with a warning.
    """
    for name in modality.ordered:
        if name not in session.feature_streams:
            raise ConfigurationError(
                f"{session.participant_id}: modality {name!r} missing from session"
            )
        dim = session.feature_streams[name][1].shape[1]
        if dim != modality.dims[name]:
            raise ConfigurationError(
                f"{session.participant_id}/{name}: expected {modality.dims[name]} dims, found {dim}"
            )
    duration = fused_trace.duration_s
    starts = window_starts(duration, window_length_s, step_s)
    if starts.size == 0:
        logger.warning(
            "%s: window of %.3fs does not fit in %.3fs session; zero windows",
            session.participant_id,
            window_length_s,
            duration,
        )
        return []
    rate = fused_trace.rate_hz
    windows: list[WindowSample] = []
    dropped = 0
    for start in starts:
        end = start + window_length_s
        i_lo = int(np.ceil(start * rate - 1e-9))
        i_hi = int(np.ceil(end * rate - 1e-9))
        ann = fused_trace.values[i_lo:i_hi]
        if ann.size < 2:
            dropped += 1
            continue
        parts = []
        empty = False
        for name in modality.ordered:
            ts, feats = session.feature_streams[name]
            mask = (ts >= start - 1e-9) & (ts < end - 1e-9)
            if not np.any(mask):
                empty = True
                break
            parts.append(feats[mask].mean(axis=0))
        if empty:
            dropped += 1
            continue
        windows.append(
            WindowSample(
                participant_id=session.participant_id,
                window_start_s=float(start),
                window_length_s=float(window_length_s),
                features=np.concatenate(parts),
                measures=window_measures(ann),
            )
        )
    if dropped:
        logger.warning(
            "%s: dropped %d of %d windows (no frames or too few annotation samples)",
            session.participant_id,
            dropped,
            starts.size,
        )
    return windows


def feature_matrix(windows: list[WindowSample]) -> np.ndarray:
    """Stack window feature vectors into a (n, dim) matrix."""
    if not windows:
        raise DegenerateInputError("no windows to stack")
    return np.stack([w.features for w in windows])


def fit_standardizer(train_features: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-dimension mean and population std of the training features."""
    x = np.asarray(train_features, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise DegenerateInputError("training features must be a non-empty (n, dim) matrix")
    return x.mean(axis=0), x.std(axis=0)


def apply_standardizer(features: np.ndarray, mean: np.ndarray, std: np.ndarray) -> np.ndarray:
    """Z-score with the supplied statistics; zero-variance dims map to 0."""
    x = np.asarray(features, dtype=np.float64)
    safe = np.where(std > 0.0, std, 1.0)
    out = (x - mean) / safe
    return np.where(std > 0.0, out, 0.0)


def standardize_features(
    train_windows: list[WindowSample], apply_windows: list[WindowSample]
) -> tuple[list[WindowSample], np.ndarray, np.ndarray]:
    """Standardize apply_windows with statistics fit on train_windows only."""
    mean, std = fit_standardizer(feature_matrix(train_windows))
    standardized = apply_standardizer(feature_matrix(apply_windows), mean, std)
    out = [replace(w, features=standardized[i]) for i, w in enumerate(apply_windows)]
    return out, mean, std


def generate_synthetic(
    n_participants: int,
    session_length_s: float,
    seed: int,
    snr: float,
    dims: dict[str, int] | None = None,
    n_annotators: int = 6,
    annotation_rate_hz: float = 25.0,
    feature_rate_hz: float = 25.0,
) -> list[Session]:
    """Synthetic corpus with a known latent arousal signal per participant.

    Each participant gets a smooth latent signal (a sum of low-frequency
    sinusoids with participant-specific random frequencies and phases,
    clipped to [-1, 1]). Annotator traces are the latent plus small
    independent noise, clipped again. Feature streams embed the latent
    through a fixed random linear map shared across participants, plus
    participant-specific offsets and white noise scaled so that the ratio
    of signal RMS to noise std equals snr (snr <= 0 removes the signal
    component entirely). Everything is reproducible from the seed.
    """
    if n_participants < 2:
        raise ConfigurationError("need at least 2 participants to form disjoint folds")
    if session_length_s <= 0 or n_annotators < 1:
        raise ConfigurationError("invalid session length or annotator count")
    dims = dict(dims) if dims is not None else dict(DEFAULT_MODALITY_DIMS)
    for name in MODALITY_ORDER:
        if dims.get(name, 0) <= 0:
            raise ConfigurationError(f"invalid dimension for modality {name!r}")

    rng = np.random.default_rng(seed)
    embeddings = {m: rng.normal(size=dims[m]) for m in MODALITY_ORDER}

    ann_t = np.arange(int(round(session_length_s * annotation_rate_hz))) / annotation_rate_hz
    feat_t = np.arange(int(round(session_length_s * feature_rate_hz))) / feature_rate_hz

    # latent arousal per participant: slow sinusoids, participant-specific
    # shape, centered per session so all participants share the corpus-level
    # high/low threshold
    latents_ann = []
    latents_feat = []
    for _ in range(n_participants):
        freqs = rng.uniform(0.02, 0.12, size=3)
        phases = rng.uniform(0.0, 2.0 * np.pi, size=3)
        amps = np.array([0.7, 0.4, 0.25])

        def raw_latent(t: np.ndarray) -> np.ndarray:
            waves = amps[:, None] * np.sin(2.0 * np.pi * freqs[:, None] * t[None, :] + phases[:, None])
            return waves.sum(axis=0)

        center = float(np.mean(raw_latent(ann_t)))
        latents_ann.append(np.clip(raw_latent(ann_t) - center, -1.0, 1.0))
        latents_feat.append(np.clip(raw_latent(feat_t) - center, -1.0, 1.0))

    latent_std = float(np.std(np.concatenate(latents_feat)))
    sessions: list[Session] = []
    for p in range(n_participants):
        traces = [
            AnnotationTrace(
                annotator_id=f"a{k}",
                values=np.clip(
                    latents_ann[p] + 0.05 * rng.normal(size=ann_t.size), -1.0, 1.0
                ),
                rate_hz=annotation_rate_hz,
            )
            for k in range(n_annotators)
        ]
        streams: dict[str, tuple[np.ndarray, np.ndarray]] = {}
        for m in MODALITY_ORDER:
            emb = embeddings[m]
            signal_rms = float(np.sqrt(np.mean(emb**2))) * latent_std
            # mild subject shift: keep it well below the signal so a readout
            # fit on training participants transfers to unseen ones
            offset = rng.normal(scale=0.1 * signal_rms, size=dims[m])
            noise_std = signal_rms / snr if snr > 0 else 1.0
            signal = np.outer(latents_feat[p], emb) if snr > 0 else 0.0
            frames = signal + offset[None, :] + rng.normal(scale=noise_std, size=(feat_t.size, dims[m]))
            streams[m] = (feat_t.copy(), frames)
        sessions.append(
            Session(
                participant_id=f"p{p:02d}",
                feature_streams=streams,
                annotation_traces=traces,
            )
        )
    return sessions


def write_corpus(sessions: list[Session], root: str | Path, dimension: str = "arousal") -> None:
    """Write sessions to the documented CSV layout under root."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    for session in sessions:
        pdir = root / session.participant_id
        pdir.mkdir(parents=True, exist_ok=True)
        for modality, (ts, feats) in sorted(session.feature_streams.items()):
            path = pdir / f"features_{modality}.csv"
            with path.open("w", newline="", encoding="utf-8") as fh:
                writer = csv.writer(fh)
                writer.writerow(["time_s"] + [f"f{i}" for i in range(feats.shape[1])])
                for t, row in zip(ts, feats):
                    writer.writerow([repr(float(t))] + [repr(float(v)) for v in row])
        for trace in session.annotation_traces:
            path = pdir / f"annotations_{dimension}_{trace.annotator_id}.csv"
            times = np.arange(trace.values.size) / trace.rate_hz
            with path.open("w", newline="", encoding="utf-8") as fh:
                writer = csv.writer(fh)
                writer.writerow(["time_s", "value"])
                for t, v in zip(times, trace.values):
                    writer.writerow([repr(float(t)), repr(float(v))])


def _read_csv_rows(path: Path, expected_cols: int, problems: list[str]) -> list[list[float]]:
    rows: list[list[float]] = []
    with path.open("r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            problems.append(f"{path}: empty file")
            return rows
        if expected_cols and len(header) != expected_cols:
            problems.append(f"{path}: header has {len(header)} columns, expected {expected_cols}")
            return rows
        width = len(header)
        for lineno, raw in enumerate(reader, start=2):
            if len(raw) != width:
                problems.append(f"{path}:{lineno}: ragged row ({len(raw)} of {width} columns)")
                return rows
            try:
                rows.append([float(v) for v in raw])
            except ValueError:
                problems.append(f"{path}:{lineno}: non-numeric value")
                return rows
    return rows


def _load_annotation(path: Path, problems: list[str]) -> AnnotationTrace | None:
    rows = _read_csv_rows(path, expected_cols=2, problems=problems)
    if not rows:
        if not problems or not problems[-1].startswith(str(path)):
            problems.append(f"{path}: no annotation samples")
        return None
    arr = np.asarray(rows)
    times, values = arr[:, 0], arr[:, 1]
    for i, v in enumerate(values):
        if v < -1.0 or v > 1.0:
            problems.append(f"{path}:{i + 2}: annotation value {v} outside [-1, 1]")
            return None
    if times[0] > 1e-9:
        problems.append(f"{path}: annotation grid must start at 0")
        return None
    if times.size < 2:
        problems.append(f"{path}: need at least 2 annotation samples")
        return None
    diffs = np.diff(times)
    if np.any(diffs <= 0):
        problems.append(f"{path}: timestamps must be strictly increasing")
        return None
    mean_dt = float(diffs.mean())
    if np.max(np.abs(diffs - mean_dt)) > 1e-6:
        problems.append(f"{path}: annotation grid is not uniform")
        return None
    annotator_id = path.stem.split("_")[-1]
    return AnnotationTrace(annotator_id=annotator_id, values=values, rate_hz=1.0 / mean_dt)


def load_corpus(root: str | Path, dimension: str = "arousal") -> list[Session]:
    """Parse every participant directory under root into Sessions.

    Raises CorpusFormatError with an itemized problem list when any file
    violates the layout; logs a one-line parse report on success.
    """
    root = Path(root)
    if not root.is_dir():
        raise CorpusFormatError(f"{root}: corpus root is not a directory")
    pdirs = sorted(d for d in root.iterdir() if d.is_dir())
    if not pdirs:
        raise CorpusFormatError(f"{root}: no sessions (no participant directories found)")
    problems: list[str] = []
    sessions: list[Session] = []
    for pdir in pdirs:
        streams: dict[str, tuple[np.ndarray, np.ndarray]] = {}
        for fpath in sorted(pdir.glob("features_*.csv")):
            modality = fpath.stem.removeprefix("features_")
            rows = _read_csv_rows(fpath, expected_cols=0, problems=problems)
            if not rows:
                if not problems or not problems[-1].startswith(str(fpath)):
                    problems.append(f"{fpath}: no feature frames")
                continue
            arr = np.asarray(rows)
            ts, feats = arr[:, 0], arr[:, 1:]
            if feats.shape[1] == 0:
                problems.append(f"{fpath}: no feature columns")
                continue
            if np.any(np.diff(ts) <= 0):
                problems.append(f"{fpath}: timestamps must be strictly increasing")
                continue
            streams[modality] = (ts, feats)
        traces: list[AnnotationTrace] = []
        for apath in sorted(pdir.glob(f"annotations_{dimension}_*.csv")):
            trace = _load_annotation(apath, problems)
            if trace is not None:
                traces.append(trace)
        if not streams:
            problems.append(f"{pdir}: no feature files")
            continue
        if not traces:
            problems.append(f"{pdir}: no annotation files for dimension {dimension!r}")
            continue
        lengths = {t.values.size for t in traces}
        rates = {t.rate_hz for t in traces}
        if len(lengths) != 1 or len(rates) != 1:
            problems.append(f"{pdir}: annotator traces differ in length or rate")
            continue
        sessions.append(
            Session(
                participant_id=pdir.name,
                feature_streams=streams,
                annotation_traces=traces,
            )
        )
    if problems:
        listing = "\n  ".join(problems[:20])
        more = "" if len(problems) <= 20 else f"\n  ... and {len(problems) - 20} more"
        raise CorpusFormatError(f"corpus load failed with {len(problems)} problem(s):\n  {listing}{more}")
    logger.info(
        "loaded %d sessions from %s (%d annotators, modalities: %s)",
        len(sessions),
        root,
        len(sessions[0].annotation_traces),
        ", ".join(f"{m}={f.shape[1]}" for m, (_, f) in sorted(sessions[0].feature_streams.items())),
    )
    return sessions


def corpus_modality_config(sessions: list[Session], selected: tuple[str, ...]) -> ModalityConfig:
    """Build a ModalityConfig from the dimensions found in loaded sessions."""
    dims: dict[str, int] = {}
    for session in sessions:
        for modality, (_, feats) in session.feature_streams.items():
            dim = feats.shape[1]
            if dims.setdefault(modality, dim) != dim:
                raise ConfigurationError(
                    f"modality {modality!r} has inconsistent dimensions across sessions"
                )
    return ModalityConfig(selected=selected, dims=dims)
