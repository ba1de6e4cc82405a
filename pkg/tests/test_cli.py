import csv
import json

import pytest

from hdspeech.cli import EXIT_OK, EXIT_RUNTIME, EXIT_VALIDATION, FAILED_MARKER, main
from hdspeech.evaluation.synth import generate_synthetic_corpus, separable_spec, write_synthetic_corpus

CONFIG = """\
methods: [knn, dnn]
modes: [FA-ORAT, FA-GF]
workers: 1
acoustic: {iterations_per_stage: 2, max_gaussians: 1}
classifier: {max_epochs: 10, patience: 3, width_grid: [4], dropout_grid: [0.0]}
"""


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    manifest = write_synthetic_corpus(generate_synthetic_corpus(separable_spec(6, 2), 1), d / "corpus")
    (d / "cfg.yaml").write_text(CONFIG)
    return d, manifest


@pytest.fixture(scope="module")
def first_run(workspace):
    d, manifest = workspace
    rc = main(["run", "--manifest", str(manifest), "--config", str(d / "cfg.yaml"), "--out", str(d / "run1")])
    assert rc == EXIT_OK
    return d / "run1"


def _run(workspace, out, *extra):
    d, manifest = workspace
    return main(["run", "--manifest", str(manifest), "--config", str(d / "cfg.yaml"), "--out", str(out), *extra])


def test_run_writes_report_and_tables(first_run):
    report = json.loads((first_run / "report.json").read_text())
    assert report["audit"]["passed"]
    rows = list(csv.DictReader((first_run / "results.csv").open()))
    assert len(rows) == 4
    assert {(r["mode"], r["method"]) for r in rows} == {(m, k) for m in ("FA-ORAT", "FA-GF") for k in ("knn", "dnn")}
    for r in rows:
        assert 0 <= float(r["accuracy"]) <= 1 and 0 <= float(r["f1_hd"]) <= 1
    for r in csv.DictReader((first_run / "confusion.csv").open()):
        assert abs(float(r["healthy"]) + float(r["hd"]) - 1) <= 1e-9
    assert report["cochran_q"]["df"] == 3
    assert not (first_run / "wer.csv").exists() and report["wer"] is None
    assert not (first_run / FAILED_MARKER).exists()
    assert (first_run / "artifacts" / "seed0_fold00_S01" / "acoustic_model.npz").exists()


def test_report_reemission_is_identical(first_run, tmp_path):
    assert main(["report", "--report", str(first_run / "report.json"), "--out", str(tmp_path)]) == EXIT_OK
    for name in ("report.json", "results.csv", "confusion.csv", "significance.csv"):
        assert (tmp_path / name).read_bytes() == (first_run / name).read_bytes()


def test_rerun_in_fresh_directory_is_byte_identical(workspace, first_run, tmp_path):
    assert _run(workspace, tmp_path / "again") == EXIT_OK
    assert (tmp_path / "again" / "report.json").read_bytes() == (first_run / "report.json").read_bytes()


def test_worker_count_does_not_change_the_report(workspace, first_run, tmp_path):
    assert _run(workspace, tmp_path / "par", "--workers", "2") == EXIT_OK
    assert (tmp_path / "par" / "report.json").read_bytes() == (first_run / "report.json").read_bytes()


def test_staged_commands_resume_from_checkpoints(workspace, first_run, tmp_path):
    d, manifest = workspace
    base = ["--manifest", str(manifest), "--config", str(d / "cfg.yaml"), "--out", str(tmp_path)]
    assert main(["transcribe", *base]) == EXIT_OK
    assert any(p.name.endswith("_transcripts.pkl") for p in (tmp_path / "checkpoints").iterdir())
    assert not (tmp_path / "report.json").exists()
    assert main(["features", *base]) == EXIT_OK
    assert main(["evaluate", *base]) == EXIT_OK
    assert (tmp_path / "report.json").read_bytes() == (first_run / "report.json").read_bytes()


def test_different_seed_changes_recorded_seed(workspace, tmp_path):
    assert _run(workspace, tmp_path, "--seed", "3", "--modes", "FA-GF", "--methods", "knn") == EXIT_OK
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["seed"] == 3 and list(report["results"]) == ["FA-GF"]
    assert report["cochran_q"] is None  # a single treatment has nothing to compare


def test_asrt_mode_writes_wer_table(workspace, tmp_path):
    assert _run(workspace, tmp_path, "--modes", "ASRT", "--methods", "knn") == EXIT_OK
    rows = list(csv.DictReader((tmp_path / "wer.csv").open()))
    assert [r["speaker"] for r in rows[:6]] == [f"S0{i}" for i in range(1, 7)]
    assert [r["speaker"] for r in rows[6:]] == [f"{g} {s}" for g in ("overall", "HD", "HC") for s in ("mean", "sd")]
    report = json.loads((tmp_path / "report.json").read_text())
    assert set(report["wer"]) == {"speakers", "overall", "HD", "HC"}


def test_ingest_and_synth(workspace, tmp_path, capsys):
    _, manifest = workspace
    assert main(["ingest", "--manifest", str(manifest), "--out", str(tmp_path / "s.json")]) == EXIT_OK
    assert json.loads((tmp_path / "s.json").read_text())["n_speakers"] == 6
    assert main(["synth", "--preset", "noiseless", "--seed", "2", "--out", str(tmp_path / "syn")]) == EXIT_OK
    assert (tmp_path / "syn" / "manifest.json").exists()


def test_validation_errors_exit_1(workspace, tmp_path, capsys):
    d, manifest = workspace
    assert main(["ingest", "--manifest", str(tmp_path / "missing.json")]) == EXIT_VALIDATION
    bad = tmp_path / "bad.yaml"
    bad.write_text("methods: [svm]\n")
    assert main(["run", "--manifest", str(manifest), "--config", str(bad), "--out", str(tmp_path)]) == EXIT_VALIDATION
    bad.write_text("acoustic: {bogus: 1}\n")
    assert main(["run", "--manifest", str(manifest), "--config", str(bad), "--out", str(tmp_path)]) == EXIT_VALIDATION
    assert "error:" in capsys.readouterr().err


def test_runtime_failure_exits_2_and_leaves_marker(tmp_path, capsys):
    manifest = write_synthetic_corpus(generate_synthetic_corpus(separable_spec(3, 1), 0), tmp_path / "c")
    out = tmp_path / "out"
    assert main(["run", "--manifest", str(manifest), "--out", str(out), "--workers", "1"]) == EXIT_RUNTIME
    assert "at least 4 speakers" in (out / FAILED_MARKER).read_text()
    assert "failed:" in capsys.readouterr().err


def test_missing_subcommand_is_a_usage_error():
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2
