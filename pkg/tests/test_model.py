import numpy as np
import pytest
from hypothesis import given, settings
import hypothesis.strategies as st

from besovclass.model import (
    Dataset,
    GroundTruth,
    LikelihoodEvaluator,
    generate_data,
    l1_error,
    log_likelihood,
    read_dataset_csv,
    stream,
    truth_eval,
    write_dataset_csv,
)
from besovclass.priors import link
from besovclass.wavelets import ConfigurationError, GridFunction, grid_points


def test_sigmoid_truth_values():
    t = GroundTruth("sigmoid1d")
    assert truth_eval(t, np.array([[5.0 / 9.0]]))[0] == pytest.approx(0.5, abs=1e-15)
    assert truth_eval(t, np.array([[0.0]]))[0] == pytest.approx(
        1.0 / (1.0 + np.exp(5.0))
    )


def test_step_truth_values():
    t = GroundTruth("step1d")
    out = truth_eval(t, np.array([[0.2], [0.5], [0.9]]))
    np.testing.assert_allclose(out, [0.9, 0.2, 0.5])
    # closed boundaries per the piecewise definition
    out2 = truth_eval(t, np.array([[0.0], [0.4], [0.7], [1.0]]))
    np.testing.assert_allclose(out2, [0.9, 0.2, 0.5, 0.5])


def test_block_truth_values():
    t = GroundTruth("block2d")
    out = truth_eval(t, np.array([[0.3, 0.3], [0.7, 0.7], [0.05, 0.3], [0.49, 0.11]]))
    np.testing.assert_allclose(out, [0.4, 0.0, 0.0, 0.4])


def test_block_truth_literal_flag():
    t = GroundTruth("block2d", block_literal=True)
    assert truth_eval(t, np.array([[0.3, 0.3]]))[0] == pytest.approx(6.4)
    assert truth_eval(t, np.array([[0.7, 0.7]]))[0] == 0.0


def test_skewnormal_truth_in_unit_interval():
    t = GroundTruth("skewnormal2d")
    rng = np.random.default_rng(0)
    pts = rng.random((10_000, 2))
    vals = truth_eval(t, pts)
    assert np.all(vals >= 0.0) and np.all(vals <= 1.0)
    # the 1/4-scaled skew-normal peaks above 1, so the clip must bind
    assert vals.max() == 1.0


def test_all_truths_in_unit_interval():
    rng = np.random.default_rng(1)
    for kind in ("sigmoid1d", "step1d"):
        vals = truth_eval(GroundTruth(kind), rng.random((10_000, 1)))
        assert np.all((0 <= vals) & (vals <= 1))
    for kind in ("skewnormal2d", "block2d"):
        vals = truth_eval(GroundTruth(kind), rng.random((10_000, 2)))
        assert np.all((0 <= vals) & (vals <= 1))


def test_truth_dimension_mismatch():
    with pytest.raises(ConfigurationError):
        truth_eval(GroundTruth("sigmoid1d"), np.array([[0.1, 0.2]]))


def test_generate_constant_truths():
    ones = GroundTruth("customgrid", grid=GridFunction(np.ones(8), 1, 3))
    zeros = GroundTruth("customgrid", grid=GridFunction(np.zeros(8), 1, 3))
    assert np.all(generate_data(ones, 500, 1).Y == 1)
    assert np.all(generate_data(zeros, 500, 1).Y == 0)


def test_generate_data_deterministic():
    t = GroundTruth("sigmoid1d")
    a = generate_data(t, 100, 42)
    b = generate_data(t, 100, 42)
    np.testing.assert_array_equal(a.X, b.X)
    np.testing.assert_array_equal(a.Y, b.Y)
    c = generate_data(t, 100, 43)
    assert not np.array_equal(a.Y, c.Y)


def test_stream_independence():
    a = stream(7, 1, 2, 3).random(5)
    b = stream(7, 1, 2, 3).random(5)
    c = stream(7, 1, 2, 4).random(5)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_sigmoid_label_mean_matches_integral():
    # int_0^1 p0 = (1/9)[log(1+e^4) - log(1+e^-5)] ~ 0.4457
    expected = (np.log1p(np.exp(4.0)) - np.log1p(np.exp(-5.0))) / 9.0
    assert expected == pytest.approx(0.4457, abs=1e-4)
    data = generate_data(GroundTruth("sigmoid1d"), 100_000, 2024)
    sd = np.sqrt(expected * (1 - expected) / 100_000)
    assert abs(data.Y.mean() - expected) < 3 * sd


def test_loglik_empty_dataset():
    p = link(GridFunction(np.zeros(8), 1, 3))
    assert log_likelihood(p, Dataset.empty(1)) == 0.0


def test_loglik_single_pair_half():
    p = GridFunction(np.full(8, 0.5), 1, 3, value_range_unit=True)
    data = Dataset(np.array([[0.3]]), np.array([1]))
    assert log_likelihood(p, data) == pytest.approx(np.log(0.5))


def test_loglik_impossible_outcome():
    p = GridFunction(np.ones(8), 1, 3, value_range_unit=True)
    data = Dataset(np.array([[0.3]]), np.array([0]))
    assert log_likelihood(p, data) == -np.inf


def test_loglik_rejects_bad_probability():
    p = GridFunction(np.full(8, 1.5), 1, 3)
    with pytest.raises(ValueError):
        log_likelihood(p, Dataset(np.array([[0.3]]), np.array([1])))


def test_loglik_deterministic_match_contributes_zero():
    vals = np.zeros(8)
    vals[:4] = 1.0
    p = GridFunction(vals, 1, 3, value_range_unit=True)
    base = Dataset(np.array([[0.9]]), np.array([0]))
    extra = Dataset(np.array([[0.9], [0.1]]), np.array([0, 1]))
    assert log_likelihood(p, base) == log_likelihood(p, extra)


@given(split=st.integers(1, 49))
@settings(max_examples=20, deadline=None)
def test_loglik_additive_over_partitions(split):
    rng = np.random.default_rng(3)
    X = rng.random((50, 1))
    Y = rng.integers(0, 2, 50)
    p = link(GridFunction(rng.standard_normal(16), 1, 4))
    total = log_likelihood(p, Dataset(X, Y))
    part = log_likelihood(p, Dataset(X[:split], Y[:split])) + log_likelihood(
        p, Dataset(X[split:], Y[split:])
    )
    assert total == pytest.approx(part, rel=1e-12, abs=1e-12)


def test_likelihood_evaluator_matches_public_op():
    rng = np.random.default_rng(4)
    w = GridFunction(3.0 * rng.standard_normal(64), 1, 6)
    data = Dataset(rng.random((200, 1)), rng.integers(0, 2, 200))
    ev = LikelihoodEvaluator(data, 1, 6)
    assert ev.loglik(w.values) == pytest.approx(
        log_likelihood(link(w), data), rel=1e-10
    )
    assert ev.loglik(np.zeros(64)) == pytest.approx(200 * np.log(0.5))


def test_likelihood_evaluator_2d_and_empty():
    rng = np.random.default_rng(5)
    w = GridFunction(rng.standard_normal(64), 2, 3)
    data = Dataset(rng.random((50, 2)), rng.integers(0, 2, 50))
    ev = LikelihoodEvaluator(data, 2, 3)
    assert ev.loglik(w.values) == pytest.approx(
        log_likelihood(link(w), data), rel=1e-10
    )
    assert LikelihoodEvaluator(Dataset.empty(2), 2, 3).loglik(w.values) == 0.0


def test_l1_error_zero_for_exact_estimate():
    t = GroundTruth("step1d")
    nodes = grid_points(1, 8)
    est = GridFunction(truth_eval(t, nodes), 1, 8)
    absolute, relative = l1_error(est, t)
    assert absolute == 0.0 and relative == 0.0


def test_l1_norm_of_step_truth():
    # exact piecewise integral: 0.9*0.4 + 0.2*0.3 + 0.5*0.3 = 0.57
    t = GroundTruth("step1d")
    est = GridFunction(np.zeros(1024), 1, 10)
    absolute, relative = l1_error(est, t)
    assert absolute == pytest.approx(0.57, abs=2e-3)
    assert relative == 1.0


def test_l1_error_relative_absent_for_zero_truth():
    t = GroundTruth("customgrid", grid=GridFunction(np.zeros(16), 1, 4))
    absolute, relative = l1_error(GridFunction(np.full(16, 0.25), 1, 4), t)
    assert absolute == pytest.approx(0.25)
    assert relative is None


def test_dataset_csv_round_trip(tmp_path):
    data = generate_data(GroundTruth("block2d"), 37, 11)
    path = tmp_path / "data.csv"
    write_dataset_csv(data, path)
    back = read_dataset_csv(path)
    np.testing.assert_array_equal(back.X, data.X)
    np.testing.assert_array_equal(back.Y, data.Y)
    assert back.truth_kind == "block2d"


def test_dataset_validation():
    with pytest.raises(ValueError):
        Dataset(np.array([[1.5]]), np.array([0]))
    with pytest.raises(ValueError):
        Dataset(np.array([[0.5]]), np.array([2]))
    with pytest.raises(ValueError):
        Dataset(np.array([[0.5]]), np.array([0, 1]))
