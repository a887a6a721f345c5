import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from brittle_bayes.measures import ConstraintSpec, MomentMap, Observation, QuantityOfInterest, power
from brittle_bayes.reduction import (
    DataBand,
    NestedSamplingError,
    PriorClassSpec,
    ProgramKind,
    ReductionError,
    markov_inner_sup,
    nested_prior_value,
    philox,
    reduce_positive,
    reduce_posterior,
    reduce_prior,
)
from brittle_bayes.solver import solve

from conftest import LIGHT, grid_lp_oracle


def two_moment(m1, m2):
    return PriorClassSpec(MomentMap.powers(2), ConstraintSpec.point([m1, m2]))


# ---------------------------------------------------------------------------
# reduce_prior

@pytest.mark.parametrize("spec, atoms", [
    (PriorClassSpec.unconstrained(), 1),
    (PriorClassSpec.mean_equals(0.25), 2),
    (two_moment(0.5, 0.3), 3),
])
def test_prior_program_has_n_plus_one_atoms(spec, atoms):
    prog = reduce_prior(QuantityOfInterest.tail(0.5), spec)
    assert prog.kind is ProgramKind.PRIOR_PRIMARY
    assert prog.n_measures == 1
    assert prog.n_atoms == atoms
    lower, upper, _ = prog.constraint_bounds()
    assert lower.size == spec.constraints.dimension


def test_prior_rejects_measure_level_quantity():
    phi = QuantityOfInterest.custom(measure_fn=lambda mu: 0.0, lower=0.0, upper=1.0)
    with pytest.raises(ReductionError, match="requires nested path"):
        reduce_prior(phi, PriorClassSpec.mean_equals(0.2))


def test_prior_rejects_band():
    base = PriorClassSpec.mean_equals(0.2)
    spec = PriorClassSpec(base.moment_map, base.constraints, DataBand(2.0))
    with pytest.raises(ReductionError, match="band"):
        reduce_prior(QuantityOfInterest.tail(0.5), spec)


def test_spec_dimension_mismatch():
    with pytest.raises(ReductionError, match="components"):
        PriorClassSpec(MomentMap.powers(2), ConstraintSpec.point([0.3]))


@pytest.mark.parametrize("level, mode", [(0.5, "joint"), (1.0, "per-ball"), (2.0, "diagonal")])
def test_band_validation(level, mode):
    with pytest.raises(ReductionError):
        DataBand(level, mode)


def test_unconstrained_program_value_is_global_sup():
    res = solve(reduce_prior(QuantityOfInterest.tail(0.5), PriorClassSpec.unconstrained()), LIGHT)
    assert res.value == 1.0


def test_program_json_dump():
    prog = reduce_posterior(QuantityOfInterest.tail(0.5), PriorClassSpec.mean_equals(0.25),
                            Observation(np.array([0.2, 0.8]), 0.05))
    doc = json.loads(json.dumps(prog.to_dict()))
    assert doc["kind"] == "POSTERIOR_FRACTIONAL"
    assert doc["objective"]["form"] == "linear-fractional"
    assert any(c["name"].startswith("normalization") for c in doc["constraints"])


# ---------------------------------------------------------------------------
# reduce_posterior

def test_posterior_atom_budget():
    n = 4
    obs = Observation((np.arange(n) + 0.5) / n, 0.01)
    prog = reduce_posterior(QuantityOfInterest.tail(0.5), PriorClassSpec.mean_equals(0.25), obs)
    assert prog.n_measures == 2
    # one constraint + n balls + 2
    assert prog.n_atoms == 1 + n + 2
    limit = reduce_posterior(QuantityOfInterest.tail(0.5), PriorClassSpec.mean_equals(0.25), obs, limit_mode=True)
    assert limit.n_atoms == 3
    assert limit.n_slack == n


def test_posterior_void_constraint_set():
    with pytest.raises(ReductionError, match="void constraint set"):
        reduce_posterior(QuantityOfInterest.tail(0.5), PriorClassSpec.mean_equals(1.5),
                         Observation(np.array([0.5]), 0.1))


def test_posterior_without_data_matches_prior():
    spec = PriorClassSpec.mean_equals(0.25)
    phi = QuantityOfInterest.tail(0.5)
    post = solve(reduce_posterior(phi, spec, Observation.empty()), LIGHT)
    prior = solve(reduce_prior(phi, spec), LIGHT)
    assert post.value == pytest.approx(prior.value, abs=1e-6)
    assert post.value == pytest.approx(0.5, abs=1e-6)


def test_band_program_carries_band_rows():
    base = PriorClassSpec.mean_equals(0.375)
    spec = PriorClassSpec(base.moment_map, base.constraints, DataBand(2.0))
    obs = Observation(np.array([0.25, 0.75]), 0.25)
    prog = reduce_posterior(QuantityOfInterest.tail(0.75), spec, obs)
    _, _, names = prog.constraint_bounds()
    assert sum("band" in n for n in names) == prog.n_measures
    # in limit mode the band becomes the range of the free data slack
    limit = reduce_posterior(QuantityOfInterest.tail(0.75), spec, obs, limit_mode=True)
    assert limit.n_slack == 1
    assert limit.slack_bounds == (0.5, 2.0)


# ---------------------------------------------------------------------------
# reduce_positive

def test_positive_rejects_negative_psi0():
    with pytest.raises(ReductionError, match="nonnegative"):
        reduce_positive(QuantityOfInterest.mean(), lambda x: x - 0.5)


def test_positive_trivial_simplex():
    # psi0 = 1 alone leaves the probability simplex; n + 1 atoms with n = 0 extra constraints
    fact = reduce_positive(QuantityOfInterest.tail(0.5), lambda x: np.ones_like(x), factorized=True)
    full = reduce_positive(QuantityOfInterest.tail(0.5), lambda x: np.ones_like(x))
    assert (fact.n_atoms, full.n_atoms) == (1, 2)
    # unnormalized mass meets E[psi0] = 1 only to the feasibility tolerance
    assert solve(fact, LIGHT).value == pytest.approx(1.0, abs=1e-6)
    assert solve(full, LIGHT).value == pytest.approx(1.0, abs=1e-6)


def test_positive_data_factor_reproduces_normalization():
    # psi0 = D(delta_x)[B] / c turns E[psi0] = 1 into the posterior normalization
    obs = Observation(np.array([0.3]), 0.2)
    c = 0.5
    prog = reduce_positive(QuantityOfInterest.tail(0.4), lambda x: obs.indicators(x)[..., 0] / c,
                           factorized=True)
    res = solve(prog, LIGHT)
    # E[psi0 * phi] / E[psi0] is the conditional tail probability; the best measure sits in [0.4, 0.5)
    assert res.value == pytest.approx(1.0, abs=1e-6)
    mu = res.witness.measures[0]
    assert mu.weights @ obs.indicators(mu.atoms)[:, 0] == pytest.approx(c, abs=1e-6)


def test_positive_factorized_matches_unfactorized():
    psi0 = lambda x: 1.0 + x  # noqa: E731
    psis = [lambda x: x - 0.4, lambda x: x ** 2 - 0.25]
    phi = QuantityOfInterest.tail(0.6)
    fact = reduce_positive(phi, psi0, psis, factorized=True)
    full = reduce_positive(QuantityOfInterest.custom(atom_fn=lambda x: (1.0 + x) * (x >= 0.6), lower=0.0, upper=2.0,
                                                     breakpoints=(0.6,)), psi0, psis)
    # two constraints besides the normalization: n + 1 atoms factorized, n + 2 otherwise
    assert (fact.n_atoms, full.n_atoms) == (3, 4)
    a, b = solve(fact, LIGHT), solve(full, LIGHT)
    assert a.value == pytest.approx(b.value, abs=1e-6)


# ---------------------------------------------------------------------------
# markov_inner_sup

def brute_markov(q, a, grid=2001):
    """Two-atom measures x1 <= q <= x2 with mean q; weight on x2 is (q - x1) / (x2 - x1)."""
    x = np.linspace(0.0, 1.0, grid)
    lo, hi = x[x <= q], x[x >= q]
    x1, x2 = np.meshgrid(lo, hi, indexing="ij")
    with np.errstate(divide="ignore", invalid="ignore"):
        w2 = np.where(x2 > x1, (q - x1) / (x2 - x1), 1.0)
    w1 = 1.0 - w2
    tail = w1 * (x1 >= a) + w2 * (x2 >= a)
    return float(tail.max())


@pytest.mark.parametrize("q, a, expected", [(0.3, 0.6, 0.5), (0.6, 0.6, 1.0), (0.9, 0.6, 1.0)])
def test_markov_examples(q, a, expected):
    assert markov_inner_sup(q, a) == expected
    assert brute_markov(q, a) == pytest.approx(expected, abs=1e-3)


def test_markov_rejects_bad_threshold():
    with pytest.raises(ReductionError):
        markov_inner_sup(0.3, 1.0)


# ---------------------------------------------------------------------------
# nested_prior_value

def test_nested_point_mass_is_exact():
    est = nested_prior_value(QuantityOfInterest.tail(0.5), MomentMap.powers(1), lambda rng, n: np.full(n, 0.3),
                             n_samples=64)
    assert est.value == markov_inner_sup(0.3, 0.5)
    assert est.stderr == 0.0


def test_nested_two_point_distribution():
    q, a = 0.25, 0.5

    def sampler(rng, n):
        return np.where(rng.random(n) < q / a, a, 0.0)

    est = nested_prior_value(QuantityOfInterest.tail(a), MomentMap.powers(1), sampler, n_samples=4096, seed=3)
    assert est.value == pytest.approx(q / a, abs=4 * est.stderr + 1e-12)


def test_nested_uniform_sampler():
    est = nested_prior_value(QuantityOfInterest.tail(0.5), MomentMap.powers(1), lambda rng, n: rng.random(n),
                             n_samples=20000, seed=1)
    # E[min(1, 2q)] for q uniform on [0, 1]
    assert abs(est.value - 0.75) <= 4 * est.stderr


def test_nested_rejects_sampler_outside_body():
    with pytest.raises(NestedSamplingError, match="leaves moment body"):
        nested_prior_value(QuantityOfInterest.tail(0.5), MomentMap.powers(1), lambda rng, n: rng.random(n) + 0.6,
                           n_samples=100)


def test_nested_is_reproducible():
    args = (QuantityOfInterest.tail(0.5), MomentMap.powers(1), lambda rng, n: rng.random(n))
    assert nested_prior_value(*args, n_samples=500, seed=7) == nested_prior_value(*args, n_samples=500, seed=7)
    assert philox(7).random() == philox(7).random()


# ---------------------------------------------------------------------------
# soundness and tightness

@settings(max_examples=15, deadline=None)
@given(st.floats(0.05, 0.9), st.floats(0.1, 0.95), st.integers(0, 2 ** 31 - 1))
def test_random_feasible_candidates_never_beat_optimum(q, a, seed):
    phi = QuantityOfInterest.tail(a)
    spec = PriorClassSpec.mean_equals(q)
    best = solve(reduce_prior(phi, spec), LIGHT).value
    worst = solve(reduce_prior(phi, spec, "inf"), LIGHT).value
    rng = np.random.default_rng(seed)
    for _ in range(20):
        # random two-atom measure with mean q
        x1, x2 = rng.uniform(0, q), rng.uniform(q, 1)
        w2 = (q - x1) / (x2 - x1) if x2 > x1 else 1.0
        val = (1 - w2) * (x1 >= a) + w2 * (x2 >= a)
        assert val <= best + 1e-6
        assert val >= worst - 1e-6


@pytest.mark.parametrize("m1, m2, a", [(0.3, 0.15, 0.6), (0.5, 0.3, 0.75), (0.4, 0.2, 0.3), (0.6, 0.4, 0.9)])
def test_tightness_against_grid_lp(m1, m2, a):
    phi = QuantityOfInterest.tail(a)
    spec = two_moment(m1, m2)
    feats = lambda x: np.stack([x, x ** 2], axis=-1)  # noqa: E731
    for direction, sense in (("sup", "max"), ("inf", "min")):
        oracle = grid_lp_oracle(lambda x: (x >= a).astype(float), feats, [m1, m2], [m1, m2], grid=51, sense=sense)
        # the infimum of a closed tail is approached from just below the threshold
        fine = grid_lp_oracle(lambda x: (x >= a).astype(float), feats, [m1, m2], [m1, m2], grid=2001, sense=sense,
                              extra=(a - 1e-9,))
        got = solve(reduce_prior(phi, spec, direction), LIGHT).value
        assert got == pytest.approx(fine, abs=1e-3)
        if oracle is not None:
            # coarser grids restrict the class, so they bound the exact value from inside
            assert (got >= oracle - 1e-6) if direction == "sup" else (got <= oracle + 1e-6)


def test_redundant_constraints_do_not_change_optimum():
    phi = QuantityOfInterest.tail(0.5)
    single = solve(reduce_prior(phi, PriorClassSpec.mean_equals(0.25)), LIGHT).value
    doubled_map = MomentMap((power(1), power(1)))
    spec = PriorClassSpec(doubled_map, ConstraintSpec.point([0.25, 0.25]))
    assert solve(reduce_prior(phi, spec), LIGHT).value == pytest.approx(single, abs=1e-6)


def test_interval_constraint_relaxes_equality():
    phi = QuantityOfInterest.tail(0.5)
    z = ConstraintSpec(np.array([0.2]), np.array([0.3]))
    res = solve(reduce_prior(phi, PriorClassSpec(MomentMap.powers(1), z)), LIGHT)
    assert res.value == pytest.approx(0.6, abs=1e-6)
    one_sided = ConstraintSpec(np.array([-math.inf]), np.array([0.3]))
    res = solve(reduce_prior(phi, PriorClassSpec(MomentMap.powers(1), one_sided)), LIGHT)
    assert res.value == pytest.approx(0.6, abs=1e-6)
