import csv
import io
import json
from pathlib import Path

import jsonschema
import numpy as np
import pytest

from brittle_bayes.scenarios import (
    REGISTRY,
    UnknownScenario,
    coin_posterior,
    gamma_curve,
    learning_curve,
    model_ab_posteriors,
    model_ab_reference,
    prior_bound_paths,
    reports_csv,
    reports_json,
    run_scenarios,
    scenario_coin,
    scenario_gamma,
    scenario_learning,
    scenario_moment_class,
    scenario_playdoh,
    scenario_posterior_brittle,
    scenario_prior_bound,
    write_reports,
)

SCHEMAS = Path(__file__).parents[1] / "src" / "brittle_bayes" / "schemas"


def test_coin_values():
    assert coin_posterior(1, 101) == pytest.approx(1.0 / (1.0 + 101 / 1024), abs=1e-12)
    assert coin_posterior(1, 0) == 1.0
    # no heads observed: the prior share of the unfair coin survives (the fair coin averages to zero)
    assert coin_posterior(1, 101, heads=0) == pytest.approx(1 / 102, abs=1e-12)
    rep = scenario_coin()
    assert rep.passed and rep.abs_error <= 1e-12


@pytest.mark.parametrize("m, a", [(0.3, 0.6), (0.1, 0.9), (0.6 - 1e-6, 0.6)])
def test_playdoh(m, a):
    rep = scenario_playdoh(m, a)
    assert rep.passed
    assert rep.details["paths_gap"] <= 1e-6


def test_playdoh_rejects_bad_parameters():
    with pytest.raises(ValueError):
        scenario_playdoh(0.7, 0.6)


@pytest.mark.parametrize("q, a, expected", [(0.0, 0.5, 0.0), (0.4, 0.5, 0.8), (0.25, 0.5, 0.5)])
def test_prior_bound(q, a, expected):
    direct, nested = prior_bound_paths(q, a)
    assert direct.value == pytest.approx(expected, abs=1e-3)
    assert nested.value == pytest.approx(expected, abs=1e-3)
    assert abs(direct.value - nested.value) <= 1e-6
    assert scenario_prior_bound(q, a).passed


def test_posterior_brittle_limit_and_no_data():
    assert scenario_posterior_brittle(n=3).computed[0] == pytest.approx(1.0, abs=1e-3)
    rep = scenario_posterior_brittle(q=0.2, a=0.8, n=0)
    assert rep.computed[0] == pytest.approx(0.25, abs=1e-3)
    assert rep.passed


def test_posterior_brittle_sweep_is_monotone():
    rep = scenario_posterior_brittle(n=3, mode="finite", deltas=(0.05, 0.01))
    values = np.array(rep.computed)
    assert np.all(np.diff(values) >= -1e-9)
    assert rep.passed
    with pytest.raises(ValueError):
        scenario_posterior_brittle(mode="other")


def test_learning_curve_closed_form():
    values = [learning_curve(al, 0.75, 0.375) for al in (1, 2, 5, 10, 100)]
    assert values[0] == 0.5
    assert np.all(np.diff(values) > 0)
    assert learning_curve(10, 0.75, 0.375) == pytest.approx(100 / 101, abs=1e-15)
    with pytest.raises(ValueError):
        learning_curve(0.5, 0.75, 0.375)


def test_gamma_curve_closed_form():
    assert gamma_curve(1.0, 4) == 0.5
    assert gamma_curve(2.0, 5) == pytest.approx(1.0 / (1.0 + 2.0 ** -10), abs=1e-15)
    assert np.all(np.diff([gamma_curve(1.5, n) for n in range(1, 8)]) > 0)
    with pytest.raises(ValueError):
        gamma_curve(2.0, 0)


def test_learning_and_gamma_scenarios():
    assert scenario_learning().passed
    rep = scenario_gamma(2.0, 3)
    assert rep.passed
    assert rep.computed[0] == pytest.approx(gamma_curve(2.0, 3), abs=1e-3)


def test_model_ab_without_window_change():
    r = model_ab_posteriors(0.005, 0.01, gap=1.0, theta_grid=2000)
    assert r["post_a"] == pytest.approx(r["post_b"], abs=1e-12)
    assert r["tv_max"] == 0.0


def test_model_ab_quadrature_matches_reference():
    quad = model_ab_posteriors(0.005, 0.01, theta_grid=4000, x_grid=32)
    ref = model_ab_reference(0.005, 0.01)
    assert quad["post_a"] == pytest.approx(ref["post_a"], abs=5e-3)
    assert quad["post_b"] == pytest.approx(ref["post_b"], abs=5e-3)
    assert abs(quad["post_a"] - 0.5) <= 5e-3
    assert quad["post_b"] >= 0.95
    assert quad["tv_max"] <= 0.01


@pytest.mark.parametrize("k, n", [(1, 3), (2, 4), (1, 2)])
def test_moment_class(k, n):
    rep = scenario_moment_class(k, n, n_samples=32)
    assert rep.computed == (0.0, 1.0)
    assert rep.details["verdict"].conditions == (True, True)


def test_registry_and_unknown_name():
    assert set(REGISTRY) >= {"coin", "playdoh", "prior-bound", "posterior-brittle", "learning", "gamma",
                             "model-ab", "moment-class"}
    with pytest.raises(UnknownScenario, match="nope"):
        run_scenarios(["nope"])


def test_report_formats(tmp_path):
    reports = run_scenarios(["coin", "playdoh"])
    rows = list(csv.reader(io.StringIO(reports_csv(reports, include_wall_time=False))))
    assert rows[0][0] == "name" and [r[0] for r in rows[1:]] == ["coin", "playdoh"]
    assert all(r[6] == "true" for r in rows[1:])
    doc = json.loads(reports_json(reports, include_wall_time=False))
    schema = json.loads((SCHEMAS / "scenarios.schema.json").read_text())
    jsonschema.validate(doc, schema)
    assert "wall_time" not in doc["reports"][0]
    write_reports(reports, tmp_path)
    jsonschema.validate(json.loads((tmp_path / "scenarios.json").read_text()), schema)
    assert (tmp_path / "scenarios.csv").read_text().startswith("name,")


def test_reports_are_deterministic():
    a = reports_json(run_scenarios(["coin", "prior-bound"]), include_wall_time=False)
    b = reports_json(run_scenarios(["coin", "prior-bound"]), include_wall_time=False)
    assert a == b
