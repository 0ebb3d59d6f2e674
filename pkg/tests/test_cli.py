import hashlib
import json
from pathlib import Path

import pytest

from affectcl.cli import grid_cells, main, parse_modality
from affectcl.errors import ConfigurationError
from affectcl.evaluation import ExperimentResult, aggregate


def dir_digest(root: Path) -> dict[str, str]:
    return {
        str(p.relative_to(root)): hashlib.sha256(p.read_bytes()).hexdigest()
        for p in sorted(root.rglob("*"))
        if p.is_file()
    }


def synth_args(out: Path, participants=3, session=12.0, seed=5):
    return [
        "synth",
        "--output", str(out),
        "--participants", str(participants),
        "--session-length", str(session),
        "--audio-dim", "3",
        "--video-dim", "2",
        "--physio-dim", "2",
        "--seed", str(seed),
    ]


def test_parse_modality():
    assert parse_modality("all") == ("audio", "video", "physiology")
    assert parse_modality("audio+video") == ("audio", "video")
    with pytest.raises(ConfigurationError):
        parse_modality("audio+thermal")


def test_grid_has_80_cells_for_the_full_protocol():
    methods = ["scl_high_low", "scl_change_unchanged", "scl_up_down", "end_to_end"]
    windows = [1.0, 2.0, 3.0, 4.0]
    modalities = [parse_modality(m) for m in ("audio", "video", "physiology", "audio+video", "all")]
    cells = grid_cells(methods, windows, modalities)
    assert len(cells) == 80
    assert len(set(cells)) == 80
    # a single-method, single-window, single-modality grid stays one cell
    assert len(grid_cells(["majority"], [2.0], [("audio",)])) == 1


def test_synth_writes_documented_layout(tmp_path):
    out = tmp_path / "corpus"
    assert main(synth_args(out, participants=23, session=2.0)) == 0
    pdirs = sorted(d for d in out.iterdir() if d.is_dir())
    assert len(pdirs) == 23
    for pdir in pdirs[:2]:
        features = sorted(f.name for f in pdir.glob("features_*.csv"))
        assert features == ["features_audio.csv", "features_physiology.csv", "features_video.csv"]
        annotations = list(pdir.glob("annotations_arousal_*.csv"))
        assert len(annotations) == 6
        header = annotations[0].read_text().splitlines()[0]
        assert header == "time_s,value"


def test_synth_single_participant_refused(tmp_path, capsys):
    code = main(synth_args(tmp_path / "corpus", participants=1))
    assert code == 1
    assert "participants" in capsys.readouterr().err


def test_synth_same_seed_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(synth_args(a)) == 0
    assert main(synth_args(b)) == 0
    assert dir_digest(a) == dir_digest(b)


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    corpus = root / "corpus"
    assert main(synth_args(corpus, participants=4, session=20.0)) == 0
    results = root / "results"
    args = [
        "run",
        "--corpus", str(corpus),
        "--output", str(results),
        "--methods", "majority", "end_to_end",
        "--windows", "2.0",
        "--modalities", "audio", "all",
        "--runs", "2",
        "--folds", "2",
        "--batch-size", "64",
        "--patience", "3",
        "--max-epochs", "20",
        "--seed", "3",
    ]
    assert main(args) == 0
    return root, corpus, results, args


def test_run_writes_cells_and_summary(small_run):
    _, _, results, _ = small_run
    cells = sorted(p.name for p in results.glob("result_*.json"))
    assert cells == [
        "result_end_to_end_w2_audio+video+physiology.json",
        "result_end_to_end_w2_audio.json",
        "result_majority_w2_audio+video+physiology.json",
        "result_majority_w2_audio.json",
    ]
    assert (results / "summary.csv").exists()
    assert (results / "spec.json").exists()
    lines = (results / "summary.csv").read_text().splitlines()
    assert len(lines) == 5  # header + 4 cells


def test_results_round_trip_reaggregates_exactly(small_run):
    _, _, results, _ = small_run
    for path in results.glob("result_*.json"):
        payload = json.loads(path.read_text())
        stored = payload.pop("summary")
        result = ExperimentResult.from_dict(payload)
        summary = aggregate(result)
        assert summary.mean_accuracy == stored["mean_accuracy"]
        assert summary.best_fold_accuracy == stored["best_fold_accuracy"]
        if stored["ci95_half_width"] is None:
            assert summary.ci95_half_width is None
        else:
            assert summary.ci95_half_width == stored["ci95_half_width"]


def test_run_rerun_is_byte_identical(small_run, tmp_path):
    _, _, results, args = small_run
    rerun = tmp_path / "rerun"
    new_args = list(args)
    new_args[new_args.index("--output") + 1] = str(rerun)
    assert main(new_args) == 0
    assert (rerun / "summary.csv").read_bytes() == (results / "summary.csv").read_bytes()


def test_compare_against_self(small_run, tmp_path, capsys):
    _, _, results, _ = small_run
    report_path = tmp_path / "cmp.json"
    code = main([
        "compare",
        "--a", str(results), "--method-a", "end_to_end",
        "--b", str(results), "--method-b", "end_to_end",
        "--output", str(report_path),
    ])
    assert code == 0
    out = capsys.readouterr().out
    assert "end_to_end" not in out  # table shows cells, not method names
    report = json.loads(report_path.read_text())
    for row in report["comparisons"]:
        assert row["degenerate_variance"] or row["p"] == 1.0


def test_compare_methods_renders_report(small_run, tmp_path):
    _, _, results, _ = small_run
    report_path = tmp_path / "cmp2.json"
    code = main([
        "compare",
        "--a", str(results), "--method-a", "end_to_end",
        "--b", str(results), "--method-b", "majority",
        "--output", str(report_path),
    ])
    assert code == 0
    report = json.loads(report_path.read_text())
    assert len(report["comparisons"]) == 2
    for row in report["comparisons"]:
        assert row["method_a"] == "end_to_end"
        assert row["method_b"] == "majority"
        assert 0.0 <= row["mean_a"] <= 1.0
        assert 0.0 <= row["mean_b"] <= 1.0


def test_compare_mismatched_grids_fails(small_run, tmp_path, capsys):
    _, _, results, _ = small_run
    solo = tmp_path / "solo"
    solo.mkdir()
    src = results / "result_end_to_end_w2_audio.json"
    (solo / src.name).write_text(src.read_text())
    code = main([
        "compare",
        "--a", str(results), "--method-a", "end_to_end",
        "--b", str(solo),
    ])
    assert code == 1
    assert "do not match" in capsys.readouterr().err


def test_run_failed_cell_recorded_and_exit_nonzero(small_run, tmp_path, capsys):
    _, corpus, _, _ = small_run
    out = tmp_path / "partial"
    code = main([
        "run",
        "--corpus", str(corpus),
        "--output", str(out),
        "--methods", "majority",
        "--windows", "2.0", "99.0",  # the 99 s window cannot fit
        "--modalities", "audio",
        "--runs", "1",
        "--folds", "2",
        "--seed", "1",
    ])
    assert code == 1
    assert (out / "result_majority_w2_audio.json").exists()
    assert not (out / "result_majority_w99_audio.json").exists()
    assert "failed" in capsys.readouterr().err
