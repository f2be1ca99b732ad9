from __future__ import annotations

import json
from pathlib import Path

import pytest

from renormlab.cli import EXIT_CONFIG, EXIT_OK, EXIT_SOLVER, EXIT_VERIFY, load_config, main
from renormlab.errors import ConfigError

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def _write(tmp_path: Path, text: str) -> Path:
    path = tmp_path / "run.toml"
    path.write_text(text)
    return path


def test_fixedpoint_json(capsys) -> None:
    assert main(["fixedpoint", "--json"]) == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report["schema"] == 1
    assert report["sigma"] == pytest.approx(-1 / 2.502907875, abs=1e-3)
    assert report["coeffs"][0] == 1.0


def test_fixedpoint_low_degree_is_a_solver_failure() -> None:
    assert main(["fixedpoint", "--degree", "4"]) == EXIT_SOLVER


def test_missing_config_file(tmp_path) -> None:
    assert main(["verify", "--config", str(tmp_path / "nope.toml")]) == EXIT_CONFIG


def test_invalid_config_values(tmp_path) -> None:
    path = _write(tmp_path, 'family = "example-N"\ndepth = 99\n')
    assert main(["verify", "--config", str(path)]) == EXIT_CONFIG
    with pytest.raises(ConfigError):
        load_config(_write(tmp_path, "depth = [\n"))


def test_load_config_overrides(tmp_path) -> None:
    cfg = load_config(CONFIGS / "example-n.toml", {"depth": 2, "seed": None})
    assert cfg.depth == 2
    assert cfg.seed == 0
    assert cfg.params.C == 0.02


def test_verify_passes_on_example_family(tmp_path) -> None:
    out = tmp_path / "out"
    code = main(["verify", "--config", str(CONFIGS / "example-n.toml"), "--depth", "2", "--out", str(out)])
    assert code == EXIT_OK
    report = json.loads((out / "verify.json").read_text())
    assert report["passed"] is True
    assert report["failed"] == []
    # rate rows need more resolved levels than depth 2 provides
    assert {row["status"] for row in report["checks"]} <= {"ok", "n/a"}
    assert any(row["check"] == "ddelta" and row["label"].startswith("bracket") for row in report["checks"])


def test_verify_detects_injected_fault(tmp_path) -> None:
    out = tmp_path / "out"
    code = main(["verify", "--config", str(CONFIGS / "fault-injection.toml"), "--depth", "2", "--out", str(out)])
    assert code == EXIT_VERIFY
    report = json.loads((out / "verify.json").read_text())
    assert "class_n" in report["failed"]


def test_verify_marks_degenerate_checks_not_applicable(tmp_path) -> None:
    path = _write(tmp_path, 'family = "degenerate"\ndepth = 2\nchecks = ["class_n", "jac", "dy", "product"]\n')
    out = tmp_path / "out"
    assert main(["verify", "--config", str(path), "--out", str(out)]) == EXIT_OK
    status = {row["check"]: row["status"] for row in json.loads((out / "verify.json").read_text())["checks"]}
    assert status == {"class_n": "ok", "jac": "n/a", "dy": "n/a", "product": "n/a"}


def test_unknown_check_is_rejected(tmp_path) -> None:
    path = _write(tmp_path, 'family = "degenerate"\ndepth = 1\nchecks = ["nope"]\n')
    assert main(["verify", "--config", str(path), "--out", str(tmp_path / "out")]) == EXIT_SOLVER


def test_verify_output_is_deterministic(tmp_path) -> None:
    path = _write(tmp_path, 'family = "example-N"\ndepth = 2\nseed = 3\nchecks = ["class_n", "conjugacy", "frames"]\n')
    for name in ("a", "b"):
        assert main(["verify", "--config", str(path), "--out", str(tmp_path / name)]) == EXIT_OK
    assert (tmp_path / "a" / "verify.json").read_bytes() == (tmp_path / "b" / "verify.json").read_bytes()


def test_cascade_writes_tables(tmp_path) -> None:
    out = tmp_path / "out"
    assert main(["cascade", "--config", str(CONFIGS / "example-n.toml"), "--depth", "1", "--out", str(out)]) == EXIT_OK
    assert json.loads((out / "cascade.json").read_text())["schema"] == 1
    header = (out / "pieces.csv").read_text().splitlines()[0]
    assert header == "word,level,x_min,x_max,y_min,y_max,z_min,z_max,diameter"
    assert (out / "tips.csv").read_text().startswith("level,tau_x")


def test_geometry_holder_standalone(capsys) -> None:
    assert main(["geometry", "--holder", "b1=0.25", "b1t=0.0625"]) == EXIT_OK
    assert "0.75" in capsys.readouterr().out


def test_geometry_holder_bad_arguments() -> None:
    assert main(["geometry", "--holder", "b1=0.1", "b1t=0.2"]) == EXIT_SOLVER
    assert main(["geometry", "--holder", "b1=0.1"]) == EXIT_CONFIG


def test_geometry_criterion_standalone(capsys) -> None:
    assert main(["geometry", "--criterion", "b1=0.05", "kmax=2", "sigma=-0.4"]) == EXIT_OK
    lines = [line for line in capsys.readouterr().out.splitlines() if line.startswith("k=")]
    assert len(lines) == 3


@pytest.mark.slow
def test_verify_passes_at_shipped_depth(tmp_path) -> None:
    out = tmp_path / "out"
    assert main(["verify", "--config", str(CONFIGS / "example-n.toml"), "--out", str(out)]) == EXIT_OK
    report = json.loads((out / "verify.json").read_text())
    assert report["depth"] == 5
    assert report["failed"] == []
    rates = [row for row in report["checks"] if row["check"] == "R" and row["label"] == "rate k=0"]
    assert rates and rates[0]["status"] == "ok"


def test_geometry_overlap_tuning_arguments(tmp_path) -> None:
    base = ["geometry", "--config", str(CONFIGS / "example-n.toml"), "--depth", "2", "--out", str(tmp_path / "out")]
    assert main(base + ["--tune-overlap", "k=0", "n=1", "lo=0.0"]) == EXIT_CONFIG
    assert main(base + ["--tune-overlap", "k=0", "n=1", "lo=0.0", "hi=0.05", "--tune-param", "nope"]) == EXIT_SOLVER


def test_geometry_overlap_tuning_needs_a_sign_change(tmp_path) -> None:
    # eps is off in this family, so its amplitude cannot move the pieces
    args = ["geometry", "--config", str(CONFIGS / "example-n.toml"), "--depth", "2", "--out", str(tmp_path / "out")]
    assert main(args + ["--tune-overlap", "k=0", "n=1", "lo=0.0", "hi=0.05"]) == EXIT_SOLVER
