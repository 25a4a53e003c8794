import csv
import io
import json
import subprocess
import sys
from pathlib import Path

import jsonschema
import pytest

from kmsheat.cli import CONFIG_MODELS, config_schemas, main, parse_config
from kmsheat.errors import SchemaError

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "docs" / "configs"


def write(tmp_path, payload, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(payload))
    return p


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


# ---------------------------------------------------------------- config parsing

def test_parse_config_dispatches_on_tag():
    cfg = parse_config({"experiment": "karamata", "q": [0.5]})
    assert type(cfg) is CONFIG_MODELS["karamata"]
    assert list(cfg.q) == [0.5]


@pytest.mark.parametrize("payload", [
    {"experiment": "karamata", "q": [1.0], "unknown": 3},
    {"experiment": "no-such-experiment"},
    {"experiment": "graph-kms", "graph": {"cuntz": 2, "vertex_matrix": [[1]]}},
    {"experiment": "karamata", "q": ["1.0"]},
])
def test_parse_config_rejects(payload):
    with pytest.raises(SchemaError):
        parse_config(payload)


def test_parse_config_tag_mismatch():
    with pytest.raises(SchemaError):
        parse_config({"experiment": "karamata"}, expected_tag="graph-kms")


def test_parse_config_bad_json_text():
    with pytest.raises(SchemaError):
        parse_config("{not json")


# ---------------------------------------------------------------- schemas

def test_shipped_schemas_match_models():
    generated = config_schemas()
    for base in (ROOT / "docs" / "schemas", ROOT / "src" / "kmsheat" / "schemas"):
        for tag, schema in generated.items():
            shipped = json.loads((base / f"{tag}.json").read_text())
            assert shipped == json.loads(json.dumps(schema)), (base, tag)


@pytest.mark.parametrize("path", sorted(p for p in CONFIGS.glob("*.json") if "bad" not in p.name))
def test_example_configs_validate(path):
    payload = json.loads(path.read_text())
    schema = config_schemas()[payload["experiment"]]
    jsonschema.validate(payload, schema)
    parse_config(payload)


def test_schema_command_writes_files(tmp_path, capsys):
    code, out, _ = run(["schema", "--out", tmp_path], capsys)
    assert code == 0
    assert sorted(p.stem for p in tmp_path.glob("*.json")) == sorted(CONFIG_MODELS)


# ---------------------------------------------------------------- running experiments

def test_graph_kms_o2(capsys):
    code, out, err = run(["run", "--config", CONFIGS / "graph-kms-o2.json"], capsys)
    assert code == 0, err
    rep = json.loads(out)
    assert rep["pass"] is True and rep["experiment"] == "graph-kms"
    by_name = {c["name"]: c for c in rep["checks"]}
    assert by_name["phi(S_e1 S_e1*)"]["observed"] == pytest.approx(0.5, abs=1e-8)


def test_output_is_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for p in (a, b):
        assert run(["graph-kms", "--config", CONFIGS / "graph-kms-o2.json", "--out", p], capsys)[0] == 0
    assert a.read_bytes() == b.read_bytes()


def test_csv_output(capsys):
    code, out, _ = run(["run", "--config", CONFIGS / "graph-kms-o2.json", "--format", "csv"], capsys)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert rows and set(rows[0]) == {"name", "anchor", "expected", "observed", "tolerance", "pass"}
    assert all(r["pass"] == "True" for r in rows)


def test_bad_edge_exits_with_error(capsys):
    code, out, err = run(["run", "--config", CONFIGS / "graph-kms-bad-edge.json"], capsys)
    assert code == 1
    assert out == ""
    assert "SchemaError" in err


def test_unknown_field_exits_with_error(tmp_path, capsys):
    p = write(tmp_path, {"experiment": "graph-kms", "graph": {"cuntz": 2}, "colour": "red"})
    assert run(["run", "--config", p], capsys)[0] == 1


def test_missing_config_file(tmp_path, capsys):
    code, _, err = run(["run", "--config", tmp_path / "nope.json"], capsys)
    assert code == 1 and "cannot read" in err


def test_subcommand_tag_must_match(capsys):
    code, _, err = run(["karamata", "--config", CONFIGS / "graph-kms-o2.json"], capsys)
    assert code == 1


def test_tolerance_failure_exits_2_with_trend(tmp_path, capsys):
    p = write(tmp_path, {
        "experiment": "dixmier-compare",
        "polynomial": {"coeffs": [{"k": [0], "re": 1.0}]},
        "N": [256, 512],
        "tolerance": 0.001,
    })
    code, out, err = run(["run", "--config", p], capsys)
    assert code == 2
    assert "tolerance failed" in err and "trend" in err
    assert json.loads(out)["pass"] is False


@pytest.mark.parametrize("name", [
    "cp-fixed-point-primitive.json", "cp-kms-doubling.json", "patterson-sullivan-f2.json",
    "torus-trace-circle.json", "karamata.json", "diagnostics-log-over-linear.json",
])
def test_example_configs_pass(name, capsys):
    code, out, err = run(["run", "--config", CONFIGS / name], capsys)
    assert code == 0, err
    assert json.loads(out)["pass"] is True


def test_slowly_varying_psi_fails_diagnostics(tmp_path, capsys):
    p = write(tmp_path, {"experiment": "diagnostics",
                         "psi": {"tag": "inverse_log_power", "s": 1.0}, "rho": 0.0})
    assert run(["run", "--config", p], capsys)[0] == 2


def test_seed_override_is_recorded(tmp_path, capsys):
    code, out, _ = run(["run", "--config", CONFIGS / "torus-trace-circle.json", "--seed", "11"], capsys)
    assert code == 0
    assert json.loads(out)["inputs"]["seed"] == 11


def test_negative_controls_flag(capsys):
    code, out, err = run(["run", "--config", CONFIGS / "graph-kms-o2.json", "--negative-controls"], capsys)
    assert code == 0, err
    names = [c["name"] for c in json.loads(out)["checks"]]
    assert any("control" in n for n in names)


# ---------------------------------------------------------------- reproduce-all

def test_reproduce_all_subset(tmp_path, capsys):
    for _ in range(2):  # rerunning into the same directory is fine
        code, out, _ = run(["reproduce-all", "--out", tmp_path, "--only", "1,3,8",
                            "--negative-controls"], capsys)
        assert code == 0
    lines = [l for l in out.splitlines() if l.startswith("[")]
    assert sum(l.startswith("[PASS] criterion") for l in lines) == 3
    assert all(not l.startswith("[MISSED]") for l in lines)
    rows = list(csv.DictReader((tmp_path / "summary.csv").open()))
    assert {r["criterion"] for r in rows} == {"1", "3", "8"}
    assert all(r["pass"] == "True" for r in rows)
    assert (tmp_path / "negative_controls.csv").exists()
    assert len(json.loads((tmp_path / "criteria.json").read_text())) == 3


def test_reproduce_all_bad_only(tmp_path, capsys):
    assert run(["reproduce-all", "--out", tmp_path, "--only", "x"], capsys)[0] == 1
    assert run(["reproduce-all", "--out", tmp_path, "--only", "99"], capsys)[0] == 1


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "kmsheat.cli", "--version"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("kmsheat ")
