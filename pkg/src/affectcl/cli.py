"""Command-line entry point: corpus synthesis, experiment grids, comparison.

Subcommands:
    synth    write a synthetic corpus in the documented CSV layout
    run      execute a (method x window x modality) grid against a corpus,
             one JSON result per cell plus a combined summary.csv
    compare  two-tailed t-test between matching cells of two result sets
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .corpus import (
    MODALITY_ORDER,
    corpus_modality_config,
    generate_synthetic,
    load_corpus,
    write_corpus,
)
from .errors import ConfigurationError
from .evaluation import (
    METHODS,
    ExperimentResult,
    aggregate,
    compare_results,
    run_experiment,
)
from .train import TrainConfig

logger = logging.getLogger(__name__)

MODALITY_CHOICES = ("audio", "video", "physiology", "audio+video", "all")


def parse_modality(name: str) -> tuple[str, ...]:
    if name == "all":
        return MODALITY_ORDER
    parts = tuple(name.split("+"))
    for part in parts:
        if part not in MODALITY_ORDER:
            raise ConfigurationError(f"unknown modality {part!r} in {name!r}")
    return parts


def _cell_name(method: str, window_length_s: float, modality: tuple[str, ...]) -> str:
    return f"result_{method}_w{window_length_s:g}_{'+'.join(modality)}"


def grid_cells(
    methods: list[str], windows: list[float], modalities: list[tuple[str, ...]]
) -> list[tuple[str, float, tuple[str, ...]]]:
    """The full experiment grid: one cell per (method, window, modality)."""
    return [(m, w, mod) for m in methods for w in windows for mod in modalities]


def _write_json(path: Path, payload: dict) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(payload, indent=2, allow_nan=False) + "\n", encoding="utf-8")
    tmp.replace(path)


def _summary_row(result: ExperimentResult) -> dict:
    summary = aggregate(result)
    return {
        "method": result.method,
        "window_length_s": result.window_length_s,
        "modality": "+".join(result.modality),
        "mean_accuracy": summary.mean_accuracy,
        "ci95_half_width": summary.ci95_half_width,
        "best_fold_accuracy": summary.best_fold_accuracy,
        "n_runs": result.n_runs,
        "k_folds": result.k_folds,
    }


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_summary_csv(path: Path, rows: list[dict]) -> None:
    columns = [
        "method",
        "window_length_s",
        "modality",
        "mean_accuracy",
        "ci95_half_width",
        "best_fold_accuracy",
        "n_runs",
        "k_folds",
    ]
    lines = [",".join(columns)]
    for row in sorted(rows, key=lambda r: (r["method"], r["window_length_s"], r["modality"])):
        lines.append(",".join(_format_cell(row[c]) for c in columns))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def cmd_synth(args: argparse.Namespace) -> int:
    dims = {"audio": args.audio_dim, "video": args.video_dim, "physiology": args.physio_dim}
    sessions = generate_synthetic(
        n_participants=args.participants,
        session_length_s=args.session_length,
        seed=args.seed,
        snr=args.snr,
        dims=dims,
        n_annotators=args.annotators,
    )
    write_corpus(sessions, args.output)
    print(f"wrote {len(sessions)} participants to {args.output}")
    return 0


def _run_cell(payload: tuple) -> tuple[str, dict | None, str | None]:
    """One grid cell; returns (cell_name, result dict, error message)."""
    (corpus_root, method, window, step, modality_names, n_runs, k_folds,
     cfg_kwargs, epsilon, base_seed, shuffle) = payload
    name = _cell_name(method, window, modality_names)
    try:
        sessions = load_corpus(corpus_root)
        modality = corpus_modality_config(sessions, modality_names)
        result = run_experiment(
            sessions,
            method=method,
            window_length_s=window,
            step_s=step,
            modality=modality,
            n_runs=n_runs,
            k_folds=k_folds,
            train_cfg=TrainConfig(**cfg_kwargs),
            epsilon=epsilon,
            base_seed=base_seed,
            shuffle_labels=shuffle,
        )
        return name, result.to_dict(), None
    except Exception as exc:  # per-cell isolation: record and keep going
        return name, None, f"{type(exc).__name__}: {exc}"


def cmd_run(args: argparse.Namespace) -> int:
    out_dir = Path(args.output)
    out_dir.mkdir(parents=True, exist_ok=True)
    modalities = [parse_modality(m) for m in args.modalities]
    cfg_kwargs = {
        "lr": args.lr,
        "batch_size": args.batch_size,
        "temperature": args.temperature,
        "patience_epochs": args.patience,
        "max_epochs": args.max_epochs,
        "encoder_units": args.encoder_units,
    }
    spec = {
        "corpus_root": str(args.corpus),
        "methods": list(args.methods),
        "window_lengths_s": list(args.windows),
        "step_s": args.step,
        "modalities": list(args.modalities),
        "n_runs": args.runs,
        "k_folds": args.folds,
        "epsilon": args.epsilon,
        "base_seed": args.seed,
        "train_config": cfg_kwargs,
        "shuffle_labels": bool(args.shuffle_labels),
    }
    _write_json(out_dir / "spec.json", spec)

    cells = [
        (str(args.corpus), method, window, args.step, modality, args.runs,
         args.folds, cfg_kwargs, args.epsilon, args.seed, bool(args.shuffle_labels))
        for method, window, modality in grid_cells(args.methods, args.windows, modalities)
    ]
    outcomes: list[tuple[str, dict | None, str | None]] = []
    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            outcomes = list(pool.map(_run_cell, cells))
    else:
        outcomes = [_run_cell(cell) for cell in cells]

    rows: list[dict] = []
    failures: list[str] = []
    for name, result_dict, error in outcomes:
        if error is not None:
            failures.append(f"{name}: {error}")
            logger.error("cell %s failed: %s", name, error)
            continue
        result = ExperimentResult.from_dict(result_dict)
        payload = result.to_dict()
        summary = _summary_row(result)
        payload["summary"] = {
            "mean_accuracy": summary["mean_accuracy"],
            "ci95_half_width": summary["ci95_half_width"],
            "best_fold_accuracy": summary["best_fold_accuracy"],
        }
        _write_json(out_dir / f"{name}.json", payload)
        rows.append(summary)
    _write_summary_csv(out_dir / "summary.csv", rows)
    if failures:
        print(f"{len(failures)} cell(s) failed:", file=sys.stderr)
        for line in failures:
            print(f"  {line}", file=sys.stderr)
        return 1
    print(f"wrote {len(rows)} result cell(s) to {out_dir}")
    return 0


def _load_results(path: Path, method_filter: str | None) -> dict[tuple, ExperimentResult]:
    files = [path] if path.is_file() else sorted(path.glob("result_*.json"))
    if not files:
        raise ConfigurationError(f"{path}: no result files found")
    cells: dict[tuple, ExperimentResult] = {}
    for fpath in files:
        data = json.loads(fpath.read_text(encoding="utf-8"))
        data.pop("summary", None)
        result = ExperimentResult.from_dict(data)
        if method_filter is not None and result.method != method_filter:
            continue
        key = (result.window_length_s, "+".join(result.modality))
        if key in cells:
            raise ConfigurationError(
                f"{path}: multiple methods for cell {key}; use a method filter"
            )
        cells[key] = result
    if not cells:
        raise ConfigurationError(f"{path}: no cells left after method filter")
    return cells


def cmd_compare(args: argparse.Namespace) -> int:
    cells_a = _load_results(Path(args.a), args.method_a)
    cells_b = _load_results(Path(args.b), args.method_b)
    if set(cells_a) != set(cells_b):
        only_a = sorted(set(cells_a) - set(cells_b))
        only_b = sorted(set(cells_b) - set(cells_a))
        raise ConfigurationError(
            f"result grids do not match; only in a: {only_a}, only in b: {only_b}"
        )
    reports = [compare_results(cells_a[key], cells_b[key]) for key in sorted(cells_a)]
    header = f"{'window':>8} {'modality':>22} {'mean_a':>8} {'mean_b':>8} {'t':>9} {'p':>9}  verdict"
    print(header)
    for rep in reports:
        if rep["degenerate_variance"]:
            verdict = "degenerate variance"
            t_str = p_str = "-"
        else:
            verdict = "significant (p<0.05)" if rep["significant"] else "not significant"
            t_str = f"{rep['t']:.4f}"
            p_str = f"{rep['p']:.4f}"
        print(
            f"{rep['window_length_s']:>8g} {rep['modality']:>22} "
            f"{rep['mean_a']:>8.4f} {rep['mean_b']:>8.4f} {t_str:>9} {p_str:>9}  {verdict}"
        )
    if args.output:
        _write_json(Path(args.output), {"comparisons": reports})
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="affectcl",
        description="Contrastive affect representation experiments on windowed multimodal corpora.",
    )
    parser.add_argument("--verbose", action="store_true", help="log progress at INFO level")
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate a synthetic corpus")
    p_synth.add_argument("--output", required=True, help="corpus root directory to write")
    p_synth.add_argument("--participants", type=int, default=23)
    p_synth.add_argument("--annotators", type=int, default=6)
    p_synth.add_argument("--session-length", type=float, default=60.0, help="seconds per session")
    p_synth.add_argument("--snr", type=float, default=6.0, help="signal RMS over noise std; <= 0 removes signal")
    p_synth.add_argument("--audio-dim", type=int, default=24)
    p_synth.add_argument("--video-dim", type=int, default=8)
    p_synth.add_argument("--physio-dim", type=int, default=16)
    p_synth.add_argument("--seed", type=int, default=7)
    p_synth.set_defaults(func=cmd_synth)

    p_run = sub.add_parser("run", help="run an experiment grid")
    p_run.add_argument("--corpus", required=True, help="corpus root directory")
    p_run.add_argument("--output", required=True, help="directory for result files")
    p_run.add_argument("--methods", nargs="+", default=list(METHODS), choices=METHODS)
    p_run.add_argument("--windows", nargs="+", type=float, default=[1.0, 2.0, 3.0, 4.0],
                       help="window lengths in seconds")
    p_run.add_argument("--step", type=float, default=0.4, help="sliding step in seconds")
    p_run.add_argument("--modalities", nargs="+", default=list(MODALITY_CHOICES),
                       choices=MODALITY_CHOICES)
    p_run.add_argument("--runs", type=int, default=10)
    p_run.add_argument("--folds", type=int, default=5)
    p_run.add_argument("--epsilon", type=float, default=0.1,
                       help="exclusion half-width around the state median")
    p_run.add_argument("--lr", type=float, default=0.001)
    p_run.add_argument("--batch-size", type=int, default=256)
    p_run.add_argument("--temperature", type=float, default=0.1)
    p_run.add_argument("--patience", type=int, default=10)
    p_run.add_argument("--max-epochs", type=int, default=500)
    p_run.add_argument("--encoder-units", type=int, default=30)
    p_run.add_argument("--seed", type=int, default=1)
    p_run.add_argument("--workers", type=int, default=1,
                       help="parallel cell workers; keep 1 for byte-identical reruns")
    p_run.add_argument("--shuffle-labels", action="store_true",
                       help="permute downstream labels (chance-level control)")
    p_run.set_defaults(func=cmd_run)

    p_cmp = sub.add_parser("compare", help="compare two result sets")
    p_cmp.add_argument("--a", required=True, help="result file or directory")
    p_cmp.add_argument("--b", required=True, help="result file or directory")
    p_cmp.add_argument("--method-a", default=None, help="method filter for side a")
    p_cmp.add_argument("--method-b", default=None, help="method filter for side b")
    p_cmp.add_argument("--output", default=None, help="optional JSON report path")
    p_cmp.set_defaults(func=cmd_compare)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
