import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from ergomix import ergostats
from ergomix.ergostats import (Observable, default_observables, estimate_invariance, estimate_mixing,
                               estimate_support, holm, ks_two_sample, kolmogorov_sf,
                               orbit_lower_density)
from ergomix.errors import ParameterError
from ergomix.modelspace import default_measure_params

multitest = pytest.importorskip("statsmodels.stats.multitest")


@pytest.mark.parametrize("seed", [0, 1, 2])
@pytest.mark.parametrize("sizes", [(50, 50), (200, 137), (1000, 900)])
def test_ks_matches_scipy(seed, sizes):
    rng = np.random.default_rng(seed)
    a, b = rng.normal(size=sizes[0]), rng.normal(0.1, 1.0, size=sizes[1])
    d, p = ks_two_sample(a, b)
    assert d == pytest.approx(stats.ks_2samp(a, b).statistic, abs=1e-12)
    en = math.sqrt(sizes[0] * sizes[1] / sum(sizes))
    assert p == pytest.approx(stats.kstwobign.sf((en + 0.12 + 0.11 / en) * d), abs=1e-9)


@pytest.mark.parametrize("lam", [0.3, 0.8, 1.36, 2.0])
def test_kolmogorov_sf(lam):
    assert kolmogorov_sf(lam) == pytest.approx(stats.kstwobign.sf(lam), abs=1e-12)


def test_ks_identical_samples():
    x = np.random.default_rng(3).normal(size=100)
    assert ks_two_sample(x, x) == (0.0, 1.0)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(1e-8, 1.0), min_size=1, max_size=25), st.sampled_from([0.01, 0.05, 0.1]))
def test_holm_matches_statsmodels(ps, level):
    expected = multitest.multipletests(ps, alpha=level, method="holm")[0]
    assert holm(ps, level) == list(expected)


def test_observables_are_bounded(planned):
    system, _, plan = planned("birth_death")
    x = system.basic(4)
    for obs in default_observables(system):
        assert -1.0 <= obs(x) <= 1.0
    assert Observable("one", "constant")(x) == 1.0
    radial = Observable("r", "radial", center=system.zero())
    assert radial(system.zero()) == 1.0


def test_invariance_t0_is_identical(planned):
    system, params, plan = planned("translation")
    rep = estimate_invariance(system, params, plan, [0.0, 1.3], default_observables(system), 300, 5)
    assert rep.verdicts["t0_identical"]
    assert all(r["ks"] == 0.0 for r in rep.tests["ks"] if r["t"] == 0)


def test_invariance_abort_is_flagged(planned):
    system, params, plan = planned("translation")
    class Broken:
        id = "broken"

        def __call__(self, x):
            raise FloatingPointError("boom")

    rep = estimate_invariance(system, params, plan, [0.5], [Broken()], 10, 5)
    assert not rep.valid and not rep.passed
    assert "FloatingPointError" in rep.notes[0]


def test_mixing_constant_and_variance(planned):
    system, params, plan = planned("translation")
    obs = default_observables(system)[2]
    const = Observable("one", "constant")
    rep = estimate_mixing(system, params, plan, const, obs, [0.0, 2.0], 200, 9, n_boot=20)
    assert all(c == 0.0 for _, c, _, _ in rep.curve)
    rep = estimate_mixing(system, params, plan, obs, obs, [0.0, 2.0], 200, 9, n_boot=20)
    assert rep.curve[0][1] == pytest.approx(rep.estimates["var_phi"], rel=1e-12)
    with pytest.raises(ParameterError):
        estimate_mixing(system, params, plan, obs, obs, [0.5, 1.0], 10, 9)


def test_support_radius_monotone(planned):
    system, params, plan = planned("translation")
    rates = [estimate_support(system, params, plan, [3], 40, 2, radius=r).estimates["3"]["hit_rate"]
             for r in (0.05, 0.2, 1.0)]
    assert rates == sorted(rates)


def test_support_target_one_is_zero(planned):
    system, _, _ = planned("translation")
    assert ergostats.support_targets(system, [1])[1].values.max() == 0


def test_conditioning_log_prob_is_finite():
    cert = ergostats.conditioning_log_prob(default_measure_params(), 3, 0.1)
    assert cert["N_k"] == 24
    assert math.isfinite(cert["log_bound"]) and cert["log_bound"] < cert["log_event"] <= 0


def test_density_degenerate_cases(planned):
    system, _, _ = planned("translation")
    x0 = system.basic(5)
    full = orbit_lower_density(system, x0, None, math.inf, 2.0, 0.05)
    assert full.estimates["min_density"] == 1.0
    zero = orbit_lower_density(system, system.zero(), None, 1e-9, 2.0, 0.05)
    assert zero.estimates["min_density"] == 1.0
    with pytest.raises(ParameterError):
        orbit_lower_density(system, x0, None, 1.0, 2.0, 0.5)
