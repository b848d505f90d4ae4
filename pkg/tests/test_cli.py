import json

import pandas as pd
import pytest
from click.testing import CliRunner

from vrga.cli import main


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def session_dir(runner, tmp_path):
    out = tmp_path / "recorded"
    result = runner.invoke(
        main, ["record-synthetic", "--duration", "2", "--out", str(out)]
    )
    assert result.exit_code == 0, result.output
    return out / "session"


def test_simulate(runner, tmp_path):
    out = tmp_path / "out"
    result = runner.invoke(main, ["simulate", "--duration", "2", "--out", str(out)])
    assert result.exit_code == 0, result.output
    assert "Excellent: 33% less bandwidth" in result.output
    assert "Good: 50% less bandwidth" in result.output
    assert "Mediocre: 53% less bandwidth" in result.output
    assert "Poor: 58% less bandwidth" in result.output
    assert f"Wrote outputs to {out}" in result.output

    qoe = pd.read_csv(out / "simulate" / "qoe.csv")
    assert len(qoe) == 16
    savings = pd.read_csv(out / "simulate" / "savings.csv")
    assert savings["saving_pct"].tolist() == [33, 50, 53, 58]
    with open(out / "files.json") as f:
        files = json.load(f)
    assert files["table"]["simulate/qoe"] == "simulate/qoe.csv"


def test_simulate_is_seeded(runner, tmp_path):
    outputs = []
    for name in ("first", "second"):
        out = tmp_path / name
        args = ["simulate", "--duration", "1", "--seed", "4", "--out", str(out)]
        assert runner.invoke(main, args).exit_code == 0
        outputs.append((out / "simulate" / "qoe.csv").read_bytes())
    assert outputs[0] == outputs[1]


def test_simulate_selection(runner, tmp_path):
    out = tmp_path / "out"
    result = runner.invoke(
        main,
        [
            "simulate",
            "--duration",
            "1",
            "--pipeline",
            "dq",
            "--tier",
            "Good",
            "--out",
            str(out),
        ],
    )
    assert result.exit_code == 0, result.output
    qoe = pd.read_csv(out / "simulate" / "qoe.csv")
    assert qoe[["tier", "pipeline", "update_rate"]].values.tolist() == [
        ["Good", "dq", 10]
    ]
    result = runner.invoke(main, ["simulate", "--tier", "Superb", "--out", str(out)])
    assert result.exit_code == 2


def test_record_synthetic(runner, tmp_path):
    out = tmp_path / "out"
    result = runner.invoke(
        main,
        [
            "record-synthetic",
            "--duration",
            "0.1",
            "--players",
            "2",
            "--wait-time",
            "2=0.5",
            "--out",
            str(out),
        ],
    )
    assert result.exit_code == 0, result.output
    info = (out / "session" / "RecordingInfo.txt").read_text()
    assert "players=2" in info
    assert "wait_time.2=0.5" in info
    assert (out / "session" / "player_2" / "Transform Camera.txt").exists()

    result = runner.invoke(
        main, ["record-synthetic", "--wait-time", "two", "--out", str(out)]
    )
    assert result.exit_code == 2


def test_compress_reconstruct_analyze(runner, session_dir, tmp_path):
    out = tmp_path / "out"
    result = runner.invoke(
        main, ["compress", str(session_dir), "--skip-n", "2", "--out", str(out)]
    )
    assert result.exit_code == 0, result.output
    compressed = out / "compressed_n2"
    assert "skip_n=2" in (compressed / "RecordingInfo.txt").read_text()
    camera = compressed / "player_1" / "Transform Camera.txt"
    assert len(camera.read_text().splitlines()) == 91

    result = runner.invoke(
        main, ["reconstruct", str(compressed), "--pipeline", "dq", "--out", str(out)]
    )
    assert result.exit_code == 0, result.output
    reconstructed = out / "reconstructed_n2_dq"
    info = (reconstructed / "RecordingInfo.txt").read_text()
    assert "reconstructed_from=2" in info
    assert "pipeline=dq" in info

    result = runner.invoke(
        main, ["analyze", str(session_dir), str(reconstructed), "--out", str(out)]
    )
    assert result.exit_code == 0, result.output
    errors = pd.read_csv(out / "analyze" / "errors_n2.csv")
    assert len(errors) == 3 * 90
    assert set(errors["pipeline"]) == {"dq"}
    means = pd.read_csv(out / "analyze" / "means.csv")
    assert means["pipeline"].tolist() == ["dq"]
    assert means["label"].tolist() == ["Dual Quaternions"]
    assert means["mean_rel_err_translation_pct"].iloc[0] < 0.4
    assert (out / "analyze" / "errors_n2.dat").exists()
    assert (out / "analyze" / "errors_n2_translation.gp").exists()

    # sessions are never overwritten
    result = runner.invoke(
        main, ["compress", str(session_dir), "--skip-n", "2", "--out", str(out)]
    )
    assert result.exit_code == 1


def test_analyze_runs_every_skip(runner, session_dir, tmp_path):
    out = tmp_path / "out"
    result = runner.invoke(
        main,
        [
            "analyze",
            str(session_dir),
            "--skip-n",
            "2",
            "--skip-n",
            "3",
            "--pipeline",
            "soa",
            "--pipeline",
            "cga",
            "--out",
            str(out),
        ],
    )
    assert result.exit_code == 0, result.output
    means = pd.read_csv(out / "analyze" / "means.csv")
    assert means[["skip_n", "pipeline"]].values.tolist() == [
        [2, "soa"],
        [2, "cga"],
        [3, "soa"],
        [3, "cga"],
    ]
    assert (out / "analyze" / "errors_n3.csv").exists()


def test_reconstruct_needs_a_compressed_session(runner, session_dir, tmp_path):
    result = runner.invoke(
        main, ["reconstruct", str(session_dir), "--out", str(tmp_path / "out")]
    )
    assert result.exit_code == 1
    assert "skip_n" in result.output


def test_invalid_settings(runner, session_dir, tmp_path):
    out = str(tmp_path / "out")
    result = runner.invoke(
        main, ["compress", str(session_dir), "--skip-n", "1", "--out", out]
    )
    assert result.exit_code == 2
    config = tmp_path / "config.yml"
    config.write_text("seed: 3\nspeed: 2\n")
    result = runner.invoke(main, ["simulate", "--config", str(config), "--out", out])
    assert result.exit_code == 2
    assert "speed" in result.output
    result = runner.invoke(main, ["simulate", "--seed", "x", "--out", out])
    assert result.exit_code == 2


def test_replay_check(runner, session_dir):
    result = runner.invoke(main, ["replay-check", str(session_dir)])
    assert result.exit_code == 0, result.output
    assert "Replayed 181 frames" in result.output
    assert "Replay reproduces the recording" in result.output


def test_bench(runner, tmp_path):
    out = tmp_path / "out"
    result = runner.invoke(
        main,
        ["bench", "--frames", "20", "--pipeline", "soa", "--pipeline", "dq"]
        + ["--out", str(out)],
    )
    assert result.exit_code == 0, result.output
    bench = pd.read_csv(out / "bench" / "bench.csv")
    assert len(bench) == 4
    assert set(bench["pipeline"]) == {"soa", "dq"}


def test_lerp_vs_slerp_uses_the_output_variable(runner, tmp_path, monkeypatch):
    monkeypatch.setenv("VRGA_OUTPUT_DIR", str(tmp_path / "env"))
    result = runner.invoke(main, ["lerp-vs-slerp", "--inbetweens", "5"])
    assert result.exit_code == 0, result.output
    assert "Largest vertex gap" in result.output
    table = pd.read_csv(tmp_path / "env" / "lerp_vs_slerp" / "lerp_vs_slerp.csv")
    assert len(table) == 15
    with open(tmp_path / "env" / "lerp_vs_slerp" / "calibration.json") as f:
        calibration = json.load(f)
    assert calibration["calibrated_max_deviation"] < calibration["bound"]
    assert (tmp_path / "env" / "lerp_vs_slerp" / "lerp_vs_slerp.gp").exists()

    result = runner.invoke(main, ["validate"])
    assert result.exit_code == 0, result.output
    assert "follow their schema" in result.output


def test_validate(runner, tmp_path):
    out = tmp_path / "out"
    result = runner.invoke(main, ["simulate", "--duration", "1", "--out", str(out)])
    assert result.exit_code == 0, result.output
    result = runner.invoke(main, ["validate", str(out)])
    assert result.exit_code == 0, result.output

    (out / "simulate" / "savings.csv").write_text("tier,saving\nGood,50\n")
    (out / "notes.csv").write_text("a,b\n1,2\n")
    result = runner.invoke(main, ["validate", str(out)])
    assert result.exit_code == 1
    assert "savings.csv: header" in result.output
    assert "notes.csv: no known schema" in result.output
