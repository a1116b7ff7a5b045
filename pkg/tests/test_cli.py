import json
import shutil
import subprocess
import sys

import pytest

from review_insight.cli import ORDER, STAGES, build_parser, main, parse_sweep, upstream_closure
from review_insight.config import ConfigError, PipelineConfig, load_config


@pytest.fixture(scope="module")
def built(tmp_path_factory):
    out = tmp_path_factory.mktemp("fixture") / "work"
    assert main(["pipeline", "--fixture", "--out", str(out)]) == 0
    return out


@pytest.fixture
def work(built, tmp_path):
    dst = tmp_path / "work"
    shutil.copytree(built, dst)
    return dst


def manifest(d, stage):
    return json.loads((d / f"{stage}.manifest.json").read_text())


def test_pipeline_writes_every_artifact(built):
    for name in ORDER:
        m = manifest(built, name)
        for f in STAGES[name].outputs:
            assert (built / f).exists()
            assert f in m["outputs"]
        assert {"fingerprint", "config_hash", "config", "inputs", "external_inputs", "duration_seconds"} <= set(m)
    report = json.loads((built / "eval_report.json").read_text())
    assert report["n_test"] > 0 and report["rmse_model"] >= 0
    assert "RMSE" in (built / "eval_report.txt").read_text()


def test_evaluate_prints_table(work, capsys):
    assert main(["evaluate", "--fixture", "--out", str(work)]) == 0
    assert "Baseline 2" in capsys.readouterr().out


def test_rerun_skips_up_to_date_stages(work):
    before = {n: manifest(work, n) for n in ORDER}
    assert main(["pipeline", "--fixture", "--out", str(work)]) == 0
    assert {n: manifest(work, n) for n in ORDER} == before


def test_force_reruns_with_identical_outputs(work):
    before = {n: manifest(work, n)["outputs"] for n in ORDER}
    assert main(["pipeline", "--fixture", "--force", "--out", str(work)]) == 0
    assert {n: manifest(work, n)["outputs"] for n in ORDER} == before


def test_downstream_on_fresh_dir_fails(tmp_path, capsys):
    assert main(["evaluate", "--fixture", "--out", str(tmp_path / "empty")]) == 1
    err = capsys.readouterr().err
    assert "review-insight ingest" in err


def test_threshold_change_marks_representatives_stale(work, capsys):
    assert main(["fit", "--fixture", "--out", str(work), "--threshold", "0.6"]) == 1
    assert "review-insight representatives" in capsys.readouterr().err
    # stages before the change stay valid
    assert main(["correlate", "--fixture", "--out", str(work), "--threshold", "0.6"]) == 0


def test_modified_artifact_detected(work, capsys):
    p = work / "segments.jsonl"
    p.write_text(p.read_text() + "\n")
    assert main(["sentiment", "--fixture", "--out", str(work)]) == 1
    err = capsys.readouterr().err
    assert "modified" in err and "review-insight segment" in err


def test_pipeline_repairs_after_modification(work):
    (work / "segments.jsonl").write_text("")
    assert main(["pipeline", "--fixture", "--out", str(work)]) == 0
    assert main(["evaluate", "--fixture", "--out", str(work)]) == 0


def test_threads_do_not_change_fingerprints(work):
    before = manifest(work, "prep")
    assert main(["pipeline", "--fixture", "--out", str(work), "--threads", "2"]) == 0
    assert manifest(work, "prep") == before


def test_config_errors_exit_1(tmp_path, capsys):
    bad = tmp_path / "c.yaml"
    bad.write_text("mglda:\n  k_loc: 0\n  window: -1\nnonsense: 3\n")
    assert main(["ingest", "--config", str(bad)]) == 1
    err = capsys.readouterr().err
    assert "configuration error" in err
    assert main(["ingest", "--fixture", "--k-local", "0", "--out", str(tmp_path)]) == 1
    assert main(["sweep", "--fixture", "--sweep", "0.1-0.5", "--out", str(tmp_path)]) == 1


def test_missing_input_exit_2(tmp_path, capsys):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("paths:\n  reviews: nope.jsonl\n  businesses: nope2.jsonl\n")
    assert main(["ingest", "--config", str(cfg), "--out", str(tmp_path / "w")]) == 2
    assert "nope" in capsys.readouterr().err


def test_flag_overrides():
    from review_insight.cli import apply_overrides

    args = build_parser().parse_args(
        ["fit", "--category", "Mexican", "--k-local", "7", "--window", "2", "--iters", "50", "--seed", "9",
         "--threshold", "0.5", "--min-reviews", "6", "--sweep", "0.2:0.8:0.2", "--threads", "3", "--out", "x"]
    )
    cfg = apply_overrides(PipelineConfig(), args)
    assert cfg.category == "Mexican" and cfg.mglda.k_loc == 7 and cfg.mglda.window == 2
    assert cfg.mglda.iterations == 50 and cfg.seed == 9 and cfg.usermodel.threshold == 0.5
    assert cfg.usermodel.min_reviews == 6 and cfg.usermodel.sweep == [0.2, 0.8, 0.2]
    assert cfg.threads == 3 and cfg.paths.workdir == "x"
    with pytest.raises(ConfigError):
        parse_sweep("a:b")


def test_upstream_closure_order():
    assert upstream_closure("ingest") == []
    closure = upstream_closure("evaluate")
    assert closure.index("ingest") < closure.index("prep") < closure.index("train-topics")
    assert "fit" in closure and "evaluate" not in closure


def test_console_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "review_insight.cli", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "pipeline" in r.stdout
