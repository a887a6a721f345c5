import csv
import io
import json
from pathlib import Path

import jsonschema
import pytest

from brittle_bayes.cli import ConfigError, load_config, main, parse_config

from conftest import FIXTURES

SCHEMAS = Path(__file__).parents[1] / "src" / "brittle_bayes" / "schemas"
RESULT_SCHEMA = json.loads((SCHEMAS / "result.schema.json").read_text())
CONFIG_SCHEMA = json.loads((SCHEMAS / "config.schema.json").read_text())


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def run_json(capsys, *argv):
    code, out, err = run(capsys, *argv, "--format", "json")
    assert code == 0, err
    doc = json.loads(out)
    jsonschema.validate(doc, RESULT_SCHEMA)
    return doc


def column(doc, name):
    i = doc["header"].index(name)
    return [row[i] for row in doc["rows"]]


@pytest.mark.parametrize("path", sorted(FIXTURES.glob("*.json")))
def test_fixture_configs_validate(path):
    doc = json.loads(path.read_text())
    if "version" in doc and "qoi" in doc:
        jsonschema.validate(doc, CONFIG_SCHEMA)
        assert load_config(path).name


def test_shiva(capsys):
    doc = run_json(capsys, "prior", "--spec", FIXTURES / "shiva.json")
    assert column(doc, "value") == [pytest.approx(0.5, abs=1e-9)]


def test_unconstrained_both_directions(capsys):
    doc = run_json(capsys, "prior", "--spec", FIXTURES / "unconstrained.json")
    assert dict(zip(column(doc, "direction"), column(doc, "value"))) == {"sup": 1.0, "inf": 0.0}


def test_two_moment_matches_frozen_oracle(capsys):
    oracle = json.loads((FIXTURES / "two-moment.oracle.json").read_text())
    doc = run_json(capsys, "prior", "--spec", FIXTURES / "two-moment.json", "--restarts", 8)
    got = dict(zip(column(doc, "direction"), column(doc, "value")))
    assert got["sup"] == pytest.approx(oracle["sup"], abs=1e-3)
    assert got["inf"] == pytest.approx(oracle["inf"], abs=1e-3)


def test_coin(capsys):
    code, out, _ = run(capsys, "posterior", "--spec", FIXTURES / "coin.json", "--format", "csv")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert float(rows[0]["value"]) == pytest.approx(1.0 / (1.0 + 101 * 2.0 ** -10), abs=1e-12)


def test_learning_sweep(capsys):
    doc = run_json(capsys, "posterior", "--spec", FIXTURES / "learning.json", "--sweep", "alpha=1,2,10")
    assert column(doc, "value") == [pytest.approx(v, abs=1e-3) for v in (0.5, 0.8, 100 / 101)]


def test_no_data_gives_prior_bound(capsys):
    doc = run_json(capsys, "posterior", "--spec", FIXTURES / "no-data.json")
    assert column(doc, "value")[0] == pytest.approx(0.5, abs=1e-6)


def test_sandwich_and_brittleness(capsys):
    doc = run_json(capsys, "sandwich", "--spec", FIXTURES / "shiva.json")
    assert column(doc, "ordered") == [True]
    doc = run_json(capsys, "brittleness", "--spec", FIXTURES / "brittle.json")
    assert column(doc, "implied_bound") == [1.0]
    assert column(doc, "implied_lower") == [0.0]


def test_curve_and_perturb(capsys):
    doc = run_json(capsys, "curve", "gamma")
    assert column(doc, "closed_form")[0] == pytest.approx(1.0 / (1.0 + 2.0 ** -10), abs=1e-15)
    doc = run_json(capsys, "perturb")
    assert abs(column(doc, "post_a")[0] - 0.5) <= 5e-3
    assert column(doc, "post_b")[0] >= 0.95


def test_out_files_are_reproducible(tmp_path, capsys):
    for d in ("a", "b"):
        code, _, _ = run(capsys, "prior", "--spec", FIXTURES / "shiva.json", "--out", tmp_path / d)
        assert code == 0
    for name in ("result.csv", "result.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    jsonschema.validate(json.loads((tmp_path / "a" / "result.json").read_text()), RESULT_SCHEMA)


def test_timing_column_only_on_request(capsys):
    doc = run_json(capsys, "prior", "--spec", FIXTURES / "shiva.json")
    assert column(doc, "wall_time") == [None]
    doc = run_json(capsys, "prior", "--spec", FIXTURES / "shiva.json", "--timing")
    assert column(doc, "wall_time")[0] >= 0.0


def test_seed_from_environment(capsys, monkeypatch):
    spec = FIXTURES / "shiva.json"
    monkeypatch.setenv("BRITTLE_BAYES_SEED", "11")
    env = run_json(capsys, "prior", "--spec", spec)
    flag = run_json(capsys, "prior", "--spec", spec, "--seed", 11)
    assert env == flag


# ---------------------------------------------------------------------------
# errors and exit codes

def test_unknown_field(tmp_path, capsys):
    doc = json.loads((FIXTURES / "shiva.json").read_text())
    doc["tolerance"] = 1e-3
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(doc))
    code, _, err = run(capsys, "prior", "--spec", p)
    assert code == 1
    assert "tolerance" in err


def test_malformed_json_reports_position(tmp_path, capsys):
    p = tmp_path / "broken.json"
    p.write_text('{"version": 1,\n "qoi": }')
    code, _, err = run(capsys, "prior", "--spec", p)
    assert code == 1
    assert "line 2" in err


def test_infeasible_constraints_exit_numeric(tmp_path, capsys):
    doc = json.loads((FIXTURES / "two-moment.json").read_text())
    doc["constraints"] = {"equal": [0.5, 0.1]}
    p = tmp_path / "infeasible.json"
    p.write_text(json.dumps(doc))
    code, _, _ = run(capsys, "prior", "--spec", p, "--restarts", 4)
    assert code == 2


def test_usage_errors(capsys):
    assert run(capsys, "prior")[0] == 1
    assert run(capsys, "frobnicate")[0] == 1
    code, _, err = run(capsys, "scenarios", "nope")
    assert code == 1 and "nope" in err
    assert run(capsys, "scenarios")[0] == 1


def test_parse_config_rejects_wrong_version():
    with pytest.raises(ConfigError, match="version"):
        parse_config({"version": 2, "qoi": {"kind": "mean"}})


def test_scenarios_command(tmp_path, capsys):
    code, out, _ = run(capsys, "scenarios", "coin", "gamma", "--out", tmp_path, "--format", "csv")
    assert code == 0
    assert "coin" in out
    jsonschema.validate(json.loads((tmp_path / "scenarios.json").read_text()),
                        json.loads((SCHEMAS / "scenarios.schema.json").read_text()))
