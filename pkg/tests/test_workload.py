import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fjbounds.chain import ModulatingChain
from fjbounds.workload import (Discipline, DomainError, WorkloadError, WorkloadSpec, _alpha_by_combinations,
                               alpha_max_exp_mean, beta_max_exp_mgf, max_exp_mgf, stability_check)

rates_st = st.lists(st.floats(0.1, 10.0), min_size=1, max_size=6)


@pytest.mark.parametrize("rates, expected", [
    ((2.0,), 0.5),
    ((1.0, 1.0), 1.5),
    ((1.0, 2.0), 7 / 6),
])
def test_alpha_values(rates, expected):
    assert alpha_max_exp_mean(rates) == pytest.approx(expected, abs=1e-14)


@pytest.mark.parametrize("rates, s, expected", [
    ((1.0, 3.0, 0.5), 0.0, 1.0),
    ((1.0, 1.0), 0.5, 8 / 3),
    ((3.0,), 1.0, 1.5),
])
def test_beta_values(rates, s, expected):
    assert beta_max_exp_mgf(rates, s) == pytest.approx(expected, abs=1e-13)


def test_max_exp_monte_carlo_oracle():
    rng = np.random.default_rng(7)
    v = rng.exponential(1.0, size=(10**6, 2)).max(axis=1)
    se = v.std() / 1e3
    assert abs(v.mean() - 1.5) < 3 * se
    e = np.exp(0.5 * v)
    assert abs(e.mean() - beta_max_exp_mgf((1.0, 1.0), 0.5)) < 3 * e.std() / 1e3
    w = np.maximum(rng.exponential(1.0, 10**6), rng.exponential(0.5, 10**6))
    assert abs(w.mean() - alpha_max_exp_mean((1.0, 2.0))) < 3 * w.std() / 1e3


@pytest.mark.parametrize("bad", [(), (1.0, -2.0), (0.0,), tuple([1.0] * 21)])
def test_alpha_rejects(bad):
    with pytest.raises(ValueError):
        alpha_max_exp_mean(bad)


@pytest.mark.parametrize("s", [-0.1, 1.0, 1.0 - 1e-12, 2.0])
def test_beta_domain(s):
    with pytest.raises(DomainError):
        beta_max_exp_mgf((1.0, 4.0), s)


def test_beta_twenty_servers_accepted():
    rates = np.linspace(1.0, 3.0, 20)
    assert beta_max_exp_mgf(rates, 0.0) == pytest.approx(1.0, abs=1e-9)
    assert alpha_max_exp_mean(rates) >= 1.0


@settings(max_examples=60, deadline=None)
@given(rates=rates_st)
def test_alpha_matches_subset_enumeration_and_lower_bound(rates):
    a = alpha_max_exp_mean(rates)
    assert a == pytest.approx(_alpha_by_combinations(rates), rel=1e-9)
    assert a >= max(1 / r for r in rates) * (1 - 1e-12)


@settings(max_examples=60, deadline=None)
@given(rates=rates_st, perm_seed=st.integers(0, 1000))
def test_permutation_symmetry(rates, perm_seed):
    p = np.random.default_rng(perm_seed).permutation(rates)
    s = 0.5 * min(rates)
    assert alpha_max_exp_mean(p) == pytest.approx(alpha_max_exp_mean(rates), rel=1e-12)
    assert beta_max_exp_mgf(p, s) == pytest.approx(beta_max_exp_mgf(rates, s), rel=1e-12)


@settings(max_examples=60, deadline=None)
@given(rates=rates_st)
def test_beta_nondecreasing_and_at_least_one(rates):
    grid = np.linspace(0, 0.99 * min(rates), 25)
    vals = [beta_max_exp_mgf(rates, s) for s in grid]
    assert vals[0] == pytest.approx(1.0, abs=1e-12)
    assert all(v >= 1 - 1e-12 for v in vals)
    assert all(b >= a - 1e-9 * abs(a) for a, b in zip(vals, vals[1:]))


@settings(max_examples=60, deadline=None)
@given(rates=rates_st)
def test_alpha_is_derivative_of_beta_at_zero(rates):
    h = 1e-4 * min(rates)
    # beta is only defined for s >= 0; extend by the same formula for the central difference
    f = max_exp_mgf(rates).func
    deriv = (f(h) - f(-h)) / (2 * h)
    assert deriv == pytest.approx(alpha_max_exp_mean(rates), abs=1e-6 * max(1.0, deriv))


@pytest.mark.slow
def test_beta_monte_carlo_random_vectors():
    rng = np.random.default_rng(11)
    for _ in range(10):
        mu = rng.uniform(0.2, 5.0, size=rng.integers(1, 7))
        s = 0.5 * mu.min()
        v = (rng.standard_exponential((10**6, mu.size)) / mu).max(axis=1)
        e = np.exp(s * v)
        assert abs(e.mean() - beta_max_exp_mgf(mu, s)) < 3 * e.std() / 1e3


def test_spec_validation():
    with pytest.raises(WorkloadError):
        WorkloadSpec([0.5, 0.5], [[1.0]])
    with pytest.raises(WorkloadError):
        WorkloadSpec([0.5], [[0.0]])
    with pytest.raises(WorkloadError):
        WorkloadSpec([np.inf], [[1.0]])
    spec = WorkloadSpec([0.5], [1.0, 2.0], "blocking")
    assert spec.service_rates.shape == (2, 1)
    assert spec.discipline is Discipline.BLOCKING


def test_stability_single_server():
    rep = stability_check(ModulatingChain([[1.0]]), WorkloadSpec([0.5], [[1.0]]))
    assert rep.server_drifts[0] == pytest.approx(-1.0)
    assert rep.work_conserving_stable


def test_stability_blocking_unstable():
    rep = stability_check(ModulatingChain([[1.0]]), WorkloadSpec([0.9], [[1.0], [1.0]], "blocking"))
    assert rep.blocking_drift == pytest.approx(1.5 - 1 / 0.9)
    assert rep.blocking_drift == pytest.approx(0.3888888889, abs=1e-9)
    assert not rep.blocking_stable
    assert rep.work_conserving_stable  # each server alone: 1 - 1.111 < 0


def test_stability_overloaded():
    rep = stability_check(ModulatingChain([[0.5, 0.5], [0.5, 0.5]]), WorkloadSpec([1e6, 1e6], [[1.0, 1.0]]))
    assert not rep.work_conserving_stable and not rep.blocking_stable


def test_stability_uses_stationary_weights():
    chain = ModulatingChain([[0.9, 0.1], [0.2, 0.8]])
    spec = WorkloadSpec([1.0, 0.25], [[2.0, 0.5]])
    pi = np.array([2 / 3, 1 / 3])
    expected = pi @ (1 / np.array([2.0, 0.5]) - 1 / np.array([1.0, 0.25]))
    assert stability_check(chain, spec).server_drifts[0] == pytest.approx(expected)
