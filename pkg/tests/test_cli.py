import json

import pytest

from crossfp.binio import load_descriptor
from crossfp.cli import dispatch


def run(capsys, *argv):
    code = dispatch(list(argv))
    out = capsys.readouterr().out.strip()
    payload = json.loads(out.splitlines()[-1]) if out else None
    return code, payload


@pytest.fixture(scope="module")
def cli_env(tmp_path_factory):
    """Corpus, trained model and template db, all built through the CLI."""
    root = tmp_path_factory.mktemp("cli")
    corpus = root / "corpus"
    model = root / "model.bin"
    db = root / "templates.db"
    assert dispatch(["synth", "--out", str(corpus), "--fingers", "3", "--seed", "7"]) == 0
    assert dispatch(["train", "--gallery", str(corpus / "sensorA"), "--out", str(model)]) == 0
    for img in ("s000_f1_i0.png", "s000_f1_i1.png"):
        code = dispatch(
            ["enroll", "--db", str(db), "--model", str(model), "--id", "s000",
             str(corpus / "sensorB" / img)]
        )
        assert code == 0
    return {"root": root, "corpus": corpus, "model": model, "db": db}


class TestFlow:
    def test_synth_reports_counts(self, capsys, tmp_path):
        code, payload = run(
            capsys, "synth", "--out", str(tmp_path / "c"), "--fingers", "2",
            "--impressions", "1", "--seed", "1",
        )
        assert code == 0
        assert payload["images"] == 4

    def test_train_reports_model_hash(self, capsys, cli_env, tmp_path):
        code, payload = run(
            capsys, "train", "--gallery", str(cli_env["corpus"] / "sensorA"),
            "--out", str(tmp_path / "m.bin"),
        )
        assert code == 0
        assert payload["samples"] == 6
        assert payload["k"] >= 1
        assert len(payload["model_hash"]) == 64
        assert 0.0 <= payload["top_correlation"] <= 1.0

    def test_verify_without_threshold_reports_score(self, capsys, cli_env):
        probe = cli_env["corpus"] / "sensorB" / "s000_f1_i1.png"
        code, payload = run(
            capsys, "verify", "--db", str(cli_env["db"]), "--model", str(cli_env["model"]),
            "--id", "s000", str(probe),
        )
        assert code == 0
        assert payload["decision"] is None
        assert payload["score"] == pytest.approx(0.0, abs=1e-9)  # enrolled impression

    def test_verify_threshold_accept_and_reject(self, capsys, cli_env):
        impostor = cli_env["corpus"] / "sensorB" / "s001_f1_i0.png"
        code, payload = run(
            capsys, "verify", "--db", str(cli_env["db"]), "--model", str(cli_env["model"]),
            "--id", "s000", "--threshold", "1e9", str(impostor),
        )
        assert (code, payload["decision"]) == (0, "accept")
        code, payload = run(
            capsys, "verify", "--db", str(cli_env["db"]), "--model", str(cli_env["model"]),
            "--id", "s000", "--threshold", "0.001", str(impostor),
        )
        assert (code, payload["decision"]) == (1, "reject")
        assert payload["score"] > 0

    def test_verify_unknown_subject_fails(self, capsys, cli_env):
        probe = cli_env["corpus"] / "sensorB" / "s001_f1_i0.png"
        code, _ = run(
            capsys, "verify", "--db", str(cli_env["db"]), "--model", str(cli_env["model"]),
            "--id", "nobody", str(probe),
        )
        assert code == 1

    def test_extract_coror_header_and_length(self, capsys, cli_env, tmp_path):
        img = cli_env["corpus"] / "sensorA" / "s000_f1_i0.png"
        out = tmp_path / "d.desc"
        code, payload = run(
            capsys, "extract", "--kind", "coror", "--out", str(out), str(img),
        )
        assert code == 0
        assert payload["length"] == 768
        values, header = load_descriptor(out)
        assert header["kind"] == "coror"
        assert header["offsets"] == [5, 10, 15]
        assert values.size == 768

    def test_extract_gaborhog_default_out(self, capsys, cli_env):
        img = cli_env["corpus"] / "sensorA" / "s001_f1_i0.png"
        code, payload = run(capsys, "extract", "--kind", "gaborhog", str(img))
        assert code == 0
        assert payload["length"] == 2592
        assert payload["out"] == str(img) + ".gaborhog.desc"

    def test_extract_honors_set_overrides(self, capsys, cli_env, tmp_path):
        img = cli_env["corpus"] / "sensorA" / "s000_f1_i1.png"
        out = tmp_path / "short.desc"
        code, payload = run(
            capsys, "extract", "--kind", "coror", "--set", "coror.offsets=3",
            "--out", str(out), str(img),
        )
        assert code == 0
        assert payload["length"] == 256

    def test_evaluate_writes_reports(self, capsys, cli_env, tmp_path):
        out = tmp_path / "report"
        code, payload = run(
            capsys, "evaluate", "--gallery", str(cli_env["corpus"] / "sensorA"),
            "--probe", str(cli_env["corpus"] / "sensorB"),
            "--model", str(cli_env["model"]), "--out", str(out),
        )
        assert code == 0
        assert 0.0 <= payload["eer"] <= 1.0
        for name in ("metrics.json", "scores.csv", "det.csv", "det.png", "scores_hist.png"):
            assert (out / name).exists(), name
        stored = json.loads((out / "metrics.json").read_text())
        assert stored["eer"] == pytest.approx(payload["eer"])

    def test_inspect_writes_field_csv(self, capsys, cli_env, tmp_path):
        img = cli_env["corpus"] / "sensorA" / "s002_f1_i0.png"
        csv_path = tmp_path / "field.csv"
        code, payload = run(
            capsys, "inspect", "--field-csv", str(csv_path), str(img),
        )
        assert code == 0
        assert 0.0 <= payload["dominant_orientation_deg"] < 180.0
        lines = csv_path.read_text().splitlines()
        assert lines[0] == "row,col,theta_degrees,valid"
        assert len(lines) == 1 + payload["width"] * payload["height"]


class TestExitCodes:
    def test_unknown_subcommand_is_usage_error(self, capsys):
        assert dispatch(["frobnicate"]) == 2
        capsys.readouterr()

    def test_missing_required_flag_is_usage_error(self, capsys):
        assert dispatch(["train", "--out", "m.bin"]) == 2
        capsys.readouterr()

    def test_missing_model_file_is_domain_error(self, capsys, cli_env):
        probe = cli_env["corpus"] / "sensorB" / "s000_f1_i0.png"
        code = dispatch(
            ["verify", "--db", str(cli_env["db"]), "--model", "/nonexistent.bin",
             "--id", "s000", str(probe)]
        )
        assert code == 1
        assert "error:" in capsys.readouterr().err

    def test_bad_override_is_domain_error(self, capsys, cli_env, tmp_path):
        img = cli_env["corpus"] / "sensorA" / "s000_f1_i0.png"
        code = dispatch(
            ["extract", "--kind", "coror", "--set", "coror.offsets=banana",
             "--out", str(tmp_path / "x.desc"), str(img)]
        )
        assert code == 1
        capsys.readouterr()

    def test_version_exits_zero(self, capsys):
        assert dispatch(["--version"]) == 0
        assert "crossfp" in capsys.readouterr().out
