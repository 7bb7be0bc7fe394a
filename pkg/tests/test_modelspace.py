import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ergomix import modelspace
from ergomix.errors import CoverageError, ParameterError, RangeError
from ergomix.modelspace import (HCondition, check_model, default_measure_params, eval_model,
                                make_measure_params, sample_model, shift_model)

MP = default_measure_params()
seeds = st.integers(0, 2 ** 32 - 1)


def beta_sum_oracle(terms=400):
    # sum_j (N_{j+1} - N_j) log(1 - 2^-j) with N_j = 2 j (j + 1), i.e. gap 4 (j + 1)
    mpmath.mp.dps = 40
    return float(mpmath.fsum(4 * (j + 1) * mpmath.log(1 - mpmath.mpf(2) ** -j) for j in range(1, terms)))


def test_beta_certificate_default_params():
    assert MP.remainder_bound < 1e-9
    assert MP.beta_log_sum == pytest.approx(beta_sum_oracle(), abs=1e-9)


def test_threshold_extension_is_quadratic():
    assert [MP.N(j) for j in range(1, 14)] == [2 * j * (j + 1) for j in range(1, 14)]


@pytest.mark.parametrize("N", [[4, 8, 12, 16], [1, 2, 3]])
def test_constant_gaps_rejected(N):
    with pytest.raises(ParameterError, match="increasing gaps"):
        make_measure_params(MP.p_head, 0.5, N)


def test_zero_first_mark_rejected():
    head = MP.p_head.copy()
    head[1] += head[0]
    head[0] = 0.0
    with pytest.raises(ParameterError, match="p_1"):
        make_measure_params(head, 0.5, [4, 12, 24])


def test_unnormalized_p_rejected():
    with pytest.raises(ParameterError, match="sum to 1"):
        make_measure_params(MP.p_head * 0.9, 0.5, [4, 12, 24])


@settings(max_examples=40, deadline=None)
@given(seeds, st.floats(2.0, 40.0))
def test_sampled_models_satisfy_invariants(seed, window):
    f = sample_model(MP, window, np.random.default_rng(seed))
    check_model(f)
    assert f.breaks[0] <= -window and f.breaks[-1] >= window


@settings(max_examples=40, deadline=None)
@given(seeds, st.floats(-5.0, 5.0))
def test_shift_round_trip(seed, t):
    f = sample_model(MP, 16.0, np.random.default_rng(seed))
    g = shift_model(shift_model(f, t), -t)
    np.testing.assert_allclose(g.breaks, f.breaks, atol=1e-12)
    assert g.zero == f.zero
    check_model(shift_model(f, t))


def test_shift_labels_first_nonnegative_break():
    f = sample_model(MP, 8.0, np.random.default_rng(3))
    t = -float(f.breaks[f.zero + 2])            # moves s_4 to the origin
    g = shift_model(f, t)
    assert g.zero == f.zero + 2 and g.breaks[g.zero] == pytest.approx(0.0, abs=1e-15)


def test_shift_beyond_sample_raises():
    f = sample_model(MP, 4.0, np.random.default_rng(0))
    with pytest.raises(CoverageError):
        shift_model(f, 1e3)


def test_eval_peaks_and_midpoints():
    f = sample_model(MP, 8.0, np.random.default_rng(11))
    i = np.arange(f.zero - 3, f.zero + 3)
    np.testing.assert_allclose(eval_model(f, f.breaks[i]), f.heights[i])
    mids = 0.5 * (f.breaks[i] + f.breaks[i + 1])
    np.testing.assert_allclose(eval_model(f, mids), 0.0, atol=1e-12)
    with pytest.raises(RangeError):
        eval_model(f, 9.0)


def test_gap_means():
    rng = np.random.default_rng(5)
    fs = [sample_model(MP, 2.0, rng) for _ in range(20000)]
    straddle = np.array([f.breaks[f.zero] - f.breaks[f.zero - 1] for f in fs])
    inner = np.array([f.breaks[f.zero + 1] - f.breaks[f.zero] for f in fs])
    # length-biased Uniform(1/2, 3/2): E g^2 / E g = 13 / 12
    assert straddle.mean() == pytest.approx(13 / 12, abs=0.01)
    assert inner.mean() == pytest.approx(1.0, abs=0.01)
    assert np.all((straddle > 0.5) & (straddle < 1.5))


def test_conditioned_pattern():
    cond = HCondition(height=5, n_ones=4, eps=0.1)
    for seed in range(20):
        f = sample_model(MP, 16.0, np.random.default_rng(seed), condition=cond, check=True)
        z = f.zero
        assert f.heights[z] == 5
        assert set(f.heights[z - 4:z]) == {1} and set(f.heights[z + 1:z + 5]) == {1}
        assert 0 <= f.breaks[z] <= 0.1 and 1 <= f.breaks[z + 1] <= 1.1


def test_degenerate_marks_are_all_ones():
    f = sample_model(modelspace.degenerate_measure_params(), 8.0, np.random.default_rng(0))
    assert set(f.heights) == {1}


def test_model_json_round_trip():
    f = sample_model(MP, 4.0, np.random.default_rng(2))
    g = modelspace.ModelFunction.from_json(f.to_json())
    np.testing.assert_array_equal(g.breaks, f.breaks)
    np.testing.assert_array_equal(g.heights, f.heights)


def test_window_too_small():
    with pytest.raises(ParameterError):
        sample_model(MP, 1.0, np.random.default_rng(0))


def test_ou_covariance():
    grid = np.array([0.0, 0.5, 1.0, 2.0])
    paths = modelspace.ou_process_sample(grid, 40000, np.random.default_rng(9))
    emp = paths.T @ paths[:, 0] / paths.shape[0]
    se = np.sqrt((1 + np.exp(-2 * grid)) / paths.shape[0])
    assert np.all(np.abs(emp - np.exp(-grid)) < 4 * se)


def test_ou_csv(tmp_path):
    grid = np.linspace(0, 1, 3)
    paths = modelspace.ou_process_sample(grid, 2, np.random.default_rng(0))
    modelspace.write_ou_csv(tmp_path / "ou.csv", grid, paths)
    lines = (tmp_path / "ou.csv").read_text().splitlines()
    assert lines[0] == "t,path_id,value" and len(lines) == 7
