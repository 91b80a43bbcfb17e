import numpy as np
import pytest

from pftrain.henon import (
    DivergedTrajectoryError,
    HenonParams,
    attractor_points,
    generate_dataset,
    henon_step,
    one_step_rmse,
    simulate_trained,
)
from pftrain.model import InvalidArgumentError
from pftrain.networks import HENON_TRUE_WEIGHTS, affine_forward, henon_network


@pytest.mark.parametrize("prev, prev2, expected", [(0, 0, 1.0), (1, 0, -0.4), (0, 1, 1.3)])
def test_henon_step(prev, prev2, expected):
    assert henon_step(HenonParams(), prev, prev2) == pytest.approx(expected, abs=1e-15)


def test_clean_states_by_hand():
    # 1 - 1.4*0 + 0.3*0 = 1;  1 - 1.4*1 + 0.3*0 = -0.4;  1 - 1.4*0.16 + 0.3*1 = 1.076
    data = generate_dataset(HenonParams(), 5, 0.0, 0, (0.0, 0.0), np.random.default_rng(0))
    np.testing.assert_allclose(data.clean_states, [0, 0, 1, -0.4, 1.076], atol=1e-15)
    assert len(data) == 3


def test_inputs_are_delayed_outputs():
    data = generate_dataset(HenonParams(), 50, 0.3, 10, (0.1, 0.1), np.random.default_rng(1))
    y = data.noisy_outputs
    for t, ex in enumerate(data.examples, start=2):
        np.testing.assert_array_equal(ex.input, [y[t - 1], y[t - 2]])
        assert ex.output == y[t]
    assert len(data) == 48


def test_noiseless_examples_fit_regressor_exactly():
    data = generate_dataset(HenonParams(), 500, 0.0, 100, (0.1, 0.1), np.random.default_rng(0))
    net = henon_network()
    for ex in data.examples:
        assert affine_forward(net, HENON_TRUE_WEIGHTS, ex.input) == pytest.approx(ex.output, abs=1e-14)


def test_noise_changes_inputs_not_clean_states():
    clean = generate_dataset(HenonParams(), 100, 0.0, 5, (0.1, 0.1), np.random.default_rng(3))
    noisy = generate_dataset(HenonParams(), 100, 0.5, 5, (0.1, 0.1), np.random.default_rng(3))
    np.testing.assert_array_equal(clean.clean_states, noisy.clean_states)
    assert not np.allclose(clean.examples[0].input, noisy.examples[0].input)


def direct_escape_step(xi0, xi1, bound=10.0):
    prev2, prev = xi0, xi1
    for t in range(2, 100):
        nxt = 1.0 - 1.4 * prev**2 + 0.3 * prev2
        if abs(nxt) > bound:
            return t
        prev2, prev = prev, nxt
    return None


def test_divergence_is_reported_with_step():
    expected = direct_escape_step(5.0, 5.0)
    assert expected is not None and expected < 5
    with pytest.raises(DivergedTrajectoryError) as info:
        generate_dataset(HenonParams(), 100, 0.0, 0, (5.0, 5.0), np.random.default_rng(0))
    assert info.value.step == expected
    assert f"step {expected}" in str(info.value)


def test_attractor_is_bounded():
    data = generate_dataset(HenonParams(), 10_000, 0.0, 0, (0.1, 0.1), np.random.default_rng(0))
    assert np.abs(data.clean_states).max() <= 1.8


def test_simulate_trained_examples():
    np.testing.assert_allclose(simulate_trained(HENON_TRUE_WEIGHTS, 3, (0.0, 0.0)).states, [1, -0.4, 1.076], atol=1e-15)
    rep = simulate_trained(np.zeros(5), 10, (0.4, -0.3))
    np.testing.assert_array_equal(rep.states, 0.0)
    assert not rep.diverged


def test_simulate_trained_reproduces_clean_states():
    data = generate_dataset(HenonParams(), 300, 0.0, 0, (0.1, 0.1), np.random.default_rng(0))
    rep = simulate_trained(HENON_TRUE_WEIGHTS, 298, (0.1, 0.1))
    np.testing.assert_array_equal(rep.states, data.clean_states[2:])


def test_simulate_trained_flags_divergence():
    rep = simulate_trained([0, 0, 0, 0, -3.0], 20, (2.0, 2.0))
    assert rep.diverged and rep.diverged_at == 0
    assert rep.states[0] == -12.0
    assert np.isnan(rep.states[rep.diverged_at + 1 :]).all()


def test_attractor_points():
    assert attractor_points([1, 2, 3]) == [(1, 2), (2, 3)]
    assert attractor_points([4, 5]) == [(4, 5)]
    with pytest.raises(InvalidArgumentError):
        attractor_points([1])


def test_one_step_rmse():
    data = generate_dataset(HenonParams(), 200, 0.0, 0, (0.1, 0.1), np.random.default_rng(0))
    assert one_step_rmse(HENON_TRUE_WEIGHTS, data.clean_states) == pytest.approx(0.0, abs=1e-14)
    shifted = HENON_TRUE_WEIGHTS + [0.05, 0, 0, 0, 0]
    assert one_step_rmse(shifted, data.clean_states) == pytest.approx(0.05)


def test_noisy_regressors_bias_least_squares():
    # Inputs are delayed noisy outputs, so even a huge-sample batch fit is biased
    # toward zero on the squared terms. At noise std sqrt(0.2) the bias on the
    # xi(t-1)^2 weight exceeds any sensible convergence tolerance.
    rows, ys = [], []
    for std in (0.0, np.sqrt(0.2)):
        data = generate_dataset(HenonParams(), 100_000, std, 100, (0.1, 0.1), np.random.default_rng(0))
        h = np.array([[1, u2, u2 * u2, u1, u1 * u1] for u1, u2 in (ex.input for ex in data.examples)])
        y = np.array([ex.output for ex in data.examples])
        rows.append(np.linalg.lstsq(h, y, rcond=None)[0])
    clean, noisy = rows
    np.testing.assert_allclose(clean, HENON_TRUE_WEIGHTS, atol=1e-8)
    assert noisy[4] > HENON_TRUE_WEIGHTS[4] + 0.8
