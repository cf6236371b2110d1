import json
import subprocess
import sys
from pathlib import Path

import jsonschema
import pytest

from superpareto import schemas as sc
from superpareto.cli import main

SCHEMA_DIR = Path(__file__).resolve().parents[1] / "schemas"
SMALL_N = 20_000


def _descriptor(tmp_path, kind, **over):
    d = sc.example_descriptor(kind, n_mc=SMALL_N)
    d.update(over)
    p = tmp_path / f"{kind}.json"
    p.write_text(json.dumps(d))
    return p


def _params(tmp_path, params, name="params.json"):
    p = tmp_path / name
    p.write_text(json.dumps(params))
    return p


@pytest.mark.parametrize("kind", sc.KINDS)
def test_every_example_runs_thread_invariant(tmp_path, kind):
    path = _descriptor(tmp_path, kind)
    outs = []
    for threads in (1, 3):
        out = tmp_path / f"out{threads}.csv"
        assert main(["run", str(path), "--threads", str(threads), "--out", str(out)]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
    assert outs[0].count(b"\n") >= 2


def test_json_output_external_price(tmp_path, capsys):
    path = _params(tmp_path, sc.EXAMPLES["equilibrium_external"])
    assert main(["equilibrium", str(path), "--market", "external", "--seed", "1", "--format", "json"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["summary"]["case"] == "partial_share"
    assert out["rows"][0][1] == pytest.approx(3.0)
    assert out["summary"]["diagnostics"]["u"] == pytest.approx(0.5)


def test_weights_off_simplex_exit_2(tmp_path, capsys):
    params = dict(sc.EXAMPLES["dominance"], theta=[0.5, 0.4])
    assert main(["dominance", str(_params(tmp_path, params)), "--seed", "1"]) == 2
    assert "simplex" in capsys.readouterr().err


def test_missing_seed_and_bad_format_exit_2(tmp_path):
    path = _params(tmp_path, sc.EXAMPLES["dominance"])
    assert main(["dominance", str(path)]) == 2
    assert main(["dominance", str(path), "--seed", "1", "--format", "xml"]) == 2
    d = sc.example_descriptor("dominance")
    del d["seed"]
    assert main(["run", str(_params(tmp_path, d, "nos.json"))]) == 2


def test_unknown_parameter_rejected(tmp_path):
    params = dict(sc.EXAMPLES["dominance"], thetta=[0.5, 0.5])
    assert main(["dominance", str(_params(tmp_path, params)), "--seed", "1"]) == 2


def test_empty_grid_gives_header_only(tmp_path, capsys):
    params = dict(sc.EXAMPLES["dominance"], grid=[])
    assert main(["dominance", str(_params(tmp_path, params)), "--seed", "1", "--n-mc", "1000"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 1 and lines[0].startswith("t,")


def test_unbounded_objective_exit_3(tmp_path, capsys):
    params = {
        "marginal": {"kind": "pareto", "alpha": 1.0},
        "n_assets": 2,
        "rho": {"kind": "var", "p": 0.9},
        "compensation": {"kind": "linear", "gamma": 15.0},
        "constraint": {"kind": "free", "w_max": 100.0},
    }
    assert main(["portfolio", str(_params(tmp_path, params)), "--seed", "1"]) == 3
    assert "decreasing" in capsys.readouterr().err


def test_unreadable_loss_file_exit_2(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("loss\n1\nx\n")
    params = {"data": {"path": str(bad)}, "k": 1}
    assert main(["hill", str(_params(tmp_path, params)), "--seed", "1"]) == 2


def test_shipped_schemas_are_current():
    for name, schema in sc.json_schemas().items():
        shipped = json.loads((SCHEMA_DIR / f"{name}.schema.json").read_text())
        assert shipped == schema, name


def test_examples_validate_against_shipped_schemas():
    desc_schema = json.loads((SCHEMA_DIR / "descriptor.schema.json").read_text())
    for kind in sc.KINDS:
        d = sc.example_descriptor(kind)
        jsonschema.validate(d, desc_schema)
        jsonschema.validate(d["parameters"], json.loads((SCHEMA_DIR / f"{kind}.schema.json").read_text()))


def test_console_script_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "superpareto.cli", "example", "hill"],
                          capture_output=True, text=True, check=True)
    assert json.loads(proc.stdout)["kind"] == "hill"
