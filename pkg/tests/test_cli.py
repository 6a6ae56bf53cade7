import csv
import json

import pytest

from nqlab.core.config import settings as app_settings
from nqlab.core.errors import CheckFailed, ConfigInvalid
from nqlab.main import main
from nqlab.schemas.experiment import Command, ExperimentConfig
from nqlab.services.experiment_service import ExperimentService

CONSTANT_KERNEL = {"family": "cesaro", "alpha": 0.0, "delta": 1.0}
SMOOTH_KERNEL = {"family": "cesaro", "alpha": 2.5, "delta": 0.4}


def write_config(tmp_path, document, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(document), encoding="utf-8")
    return str(path)


def read_rows(path):
    with open(path, newline="", encoding="utf-8") as handle:
        return list(csv.DictReader(handle))


def read_manifest(out):
    return json.loads((out / "manifest.json").read_text(encoding="utf-8"))


def test_kernel_check_constant_kernel(tmp_path):
    config = write_config(tmp_path, {"kernel": CONSTANT_KERNEL})
    out = tmp_path / "out"
    assert main(["kernel-check", "--config", config, "--out", str(out)]) == 0

    rows = read_rows(out / "conditions.csv")
    assert [row["condition"] for row in rows] == [str(n) for n in range(1, 8)]
    assert all(row["passed"] == "true" for row in rows)
    manifest = read_manifest(out)
    assert manifest["exit_code"] == 0
    assert manifest["command"] == "kernel-check"
    assert "conditions.csv" in manifest["artifacts"]


def test_mean_of_alternating_series(tmp_path):
    document = {
        "kernel": CONSTANT_KERNEL,
        "series": {"rule": "alternating"},
        "w_values": [10, 100, 1000],
        "expect_sum": 0.5,
        "tolerance": 1e-12,
    }
    out = tmp_path / "out"
    assert main(["mean", "--config", write_config(tmp_path, document), "--out", str(out)]) == 0
    rows = read_rows(out / "means.csv")
    assert [float(row["mean"]) for row in rows] == pytest.approx([0.5, 0.5, 0.5], abs=1e-12)


def test_failed_check_exits_one(tmp_path):
    document = {
        "kernel": CONSTANT_KERNEL,
        "series": {"rule": "alternating"},
        "w_values": [10, 100],
        "expect_sum": 1.0,
    }
    out = tmp_path / "out"
    assert main(["mean", "--config", write_config(tmp_path, document), "--out", str(out)]) == 1
    manifest = read_manifest(out)
    assert manifest["exit_code"] == 1
    assert [c["passed"] for c in manifest["checks"]] == [False]
    checks = read_rows(out / "checks.csv")
    assert checks[0]["name"] == "mean"
    assert checks[0]["passed"] == "false"


def test_run_raises_check_failed_with_manifest(tmp_path):
    service = ExperimentService()
    config = service.load(
        {
            "command": "mean",
            "kernel": CONSTANT_KERNEL,
            "series": {"rule": "alternating"},
            "w_values": [10],
            "expect_sum": 2.0,
        }
    )
    with pytest.raises(CheckFailed) as info:
        service.run(config, tmp_path)
    assert info.value.manifest.failed_checks == ["mean"]


def test_repeated_runs_are_byte_identical(tmp_path):
    document = {
        "kernel": SMOOTH_KERNEL,
        "estimates": ["representation", "riesz_identity"],
        "r": 1,
        "w_values": [5.0, 12.5, 30.0],
        "u_values": [0.3, 1.0, 3.0],
        "jitter": True,
        "seed": 11,
    }
    config = write_config(tmp_path, document)
    first, second = tmp_path / "first", tmp_path / "second"
    codes = [main(["lemma-verify", "--config", config, "--out", str(out)]) for out in (first, second)]
    assert codes[0] == codes[1]
    for name in ("representation.csv", "riesz_identity.csv", "checks.csv"):
        assert (first / name).read_bytes() == (second / name).read_bytes()


def test_seed_changes_jittered_grid(tmp_path):
    document = {
        "kernel": SMOOTH_KERNEL,
        "estimates": ["representation"],
        "r": 1,
        "w_values": [5.0, 12.5, 30.0],
        "u_values": [0.3, 1.0, 3.0],
        "jitter": True,
    }
    config = write_config(tmp_path, document)
    main(["lemma-verify", "--config", config, "--out", str(tmp_path / "a"), "--seed", "1"])
    main(["lemma-verify", "--config", config, "--out", str(tmp_path / "b"), "--seed", "2"])
    a = read_rows(tmp_path / "a" / "representation.csv")
    b = read_rows(tmp_path / "b" / "representation.csv")
    assert {row["w"] for row in a} != {row["w"] for row in b}
    assert read_manifest(tmp_path / "b")["seed"] == 2


def test_representation_on_default_lattice(tmp_path):
    config = write_config(tmp_path, {"kernel": SMOOTH_KERNEL, "estimates": ["representation"], "r": 1})
    out = tmp_path / "out"
    assert main(["lemma-verify", "--config", config, "--out", str(out)]) == 0
    rows = read_rows(out / "representation.csv")
    assert len(rows) == 18
    assert max(float(row["relative_error"]) for row in rows) <= 1e-6


def test_riesz_identity_rows(tmp_path):
    config = write_config(tmp_path, {"estimates": ["riesz_identity"]})
    out = tmp_path / "out"
    assert main(["lemma-verify", "--config", config, "--out", str(out)]) == 0
    rows = read_rows(out / "riesz_identity.csv")
    assert [row["k"] for row in rows] == ["1", "2"]


def test_abs_diagnostic_convergent_showcase(tmp_path):
    document = {"kernel": SMOOTH_KERNEL, "series": {"rule": "alternating"}, "A": 1.0, "W_max": 4096}
    out = tmp_path / "out"
    assert main(["abs-diagnostic", "--config", write_config(tmp_path, document), "--out", str(out)]) == 0
    checks = read_rows(out / "checks.csv")
    assert checks[0]["detail"].startswith("ConvergentEvidence")
    assert read_rows(out / "abs_partial_integrals.csv")


def test_budget_exceeded_exits_three(tmp_path, monkeypatch):
    monkeypatch.setattr(app_settings, "TERM_EVALUATION_CAP", 1000)
    document = {"kernel": SMOOTH_KERNEL, "series": {"rule": "alternating"}}
    out = tmp_path / "out"
    assert main(["abs-diagnostic", "--config", write_config(tmp_path, document), "--out", str(out)]) == 3
    assert read_manifest(out)["error"].startswith("BudgetExceeded")


def test_fourier_experiment_smooth_function(tmp_path):
    document = {
        "function": {"name": "trig_poly", "params": {"a": [0.2, 1.0, 0.5], "b": [0.0, 0.3, 0.0, 0.2]}},
        "derived": {"x": 0.4, "r": 1, "alpha": 1.5},
        "kernel": {"family": "cesaro", "alpha": 1.5, "delta": 0.25},
        "expect_hypotheses": True,
    }
    out = tmp_path / "out"
    assert main(["fourier-experiment", "--config", write_config(tmp_path, document), "--out", str(out)]) == 0
    assert len(read_rows(out / "split.csv")) == 20
    (row,) = read_rows(out / "hypotheses.csv")
    assert row["theorem"] == "T1"
    assert row["hypotheses_hold"] == "true"
    assert float(row["cesaro_order"]) == pytest.approx(0.5 + 1 + 0.25)


def test_validate_accepts_good_config(tmp_path, capsys):
    config = write_config(tmp_path, {"command": "kernel-check", "kernel": CONSTANT_KERNEL})
    assert main(["validate", "--config", config]) == 0
    assert capsys.readouterr().out == ""


@pytest.mark.parametrize(
    "document,message",
    [
        ({"command": "kernel-check", "kernel": {"alpha": -1.0, "delta": 1.0}}, "alpha must be >= 0"),
        (
            {"command": "fourier-experiment", "function": {"name": "cos"}, "derived": {"r": 3, "alpha": 2.0}},
            "requires r < alpha",
        ),
        (
            {"command": "fourier-experiment", "function": {"name": "wobble"}, "derived": {"r": 1, "alpha": 2.5}},
            "unknown function 'wobble'",
        ),
        (
            {"command": "lemma-verify", "kernel": SMOOTH_KERNEL, "estimates": ["near_decay"], "r": 3},
            "requires r < alpha",
        ),
        ({"command": "mean", "kernel": CONSTANT_KERNEL}, "mean requires series, w_values"),
    ],
)
def test_validate_reports_diagnostics(tmp_path, capsys, document, message):
    assert main(["validate", "--config", write_config(tmp_path, document)]) == 2
    assert message in capsys.readouterr().out


def test_validate_does_not_prefix_value_errors():
    diagnostics = ExperimentService().validate({"command": "kernel-check", "kernel": {"alpha": -1.0, "delta": 1.0}})
    assert diagnostics == ["kernel.alpha: alpha must be >= 0"]


def test_invalid_config_exits_two(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json", encoding="utf-8")
    assert main(["kernel-check", "--config", str(path)]) == 2
    assert main(["kernel-check", "--config", str(tmp_path / "missing.json")]) == 2
    config = write_config(tmp_path, {"kernel": {"alpha": -1.0, "delta": 1.0}}, name="bad.json")
    assert main(["kernel-check", "--config", config]) == 2


def test_load_raises_config_invalid():
    with pytest.raises(ConfigInvalid) as info:
        ExperimentService().load({"command": "lemma-verify"})
    assert "at least one estimate" in info.value.diagnostics[0]


def test_command_line_overrides_config(tmp_path):
    raw = {"command": "mean", "kernel": CONSTANT_KERNEL, "series": {"values": [1.0]}, "w_values": [2.0]}
    config = ExperimentService().load({**raw, "tolerance": 1e-3, "seed": 5})
    assert isinstance(config, ExperimentConfig)
    assert config.command == Command.MEAN
    assert config.tolerance == 1e-3
    assert config.seed == 5
