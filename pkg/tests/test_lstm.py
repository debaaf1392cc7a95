import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import lstm_hand_example, numerical_gradient

from wavecast.exceptions import DataError, DivergenceError, ShapeError
from wavecast.lstm import (
    GATES,
    LSTMRegressor,
    LstmConfig,
    LstmParams,
    LstmState,
    init_params,
    loss_and_grads,
    lstm_forward,
    lstm_step,
    predict_sequences,
    train_lstm,
)
from wavecast.synthetic import sine_sequence


def _ones_params():
    return LstmParams.from_gates({g: (np.ones((1, 1)), np.ones((1, 1)), np.zeros(1)) for g in GATES}, [1.0])


def _sine_windows(lag=10):
    s = sine_sequence(200, 25.0)
    xs = np.stack([s[i:i + lag] for i in range(len(s) - lag)])[..., None]
    return xs, s[lag:]


def test_hand_example_against_math_library():
    ref = lstm_hand_example()
    y, state = lstm_step(_ones_params(), [1.0], LstmState.zeros(1))
    np.testing.assert_allclose(state.c, [ref["c"]], atol=1e-12)
    np.testing.assert_allclose(state.y, [ref["y"]], atol=1e-12)
    assert y[0] == pytest.approx(ref["y"], abs=1e-12)
    # intermediate values quoted to five digits
    assert ref["z"] == pytest.approx(0.76159, abs=1e-5)
    assert ref["i"] == pytest.approx(0.73106, abs=1e-5)
    assert ref["c"] == pytest.approx(0.55677, abs=1e-5)
    assert ref["y"] == pytest.approx(0.369606, abs=1e-6)


def test_gate_layout():
    p = init_params(3, 2, seed=0)
    assert p.W.shape == (12, 2) and p.V.shape == (12, 3) and p.b.shape == (12,)
    W_f, V_f, b_f = p.gate("f")
    np.testing.assert_array_equal(W_f, p.W[6:9])
    np.testing.assert_array_equal(b_f, 1.0)
    np.testing.assert_array_equal(p.gate("z")[2], 0.0)


def test_init_ranges_and_seeding():
    p = init_params(16, 4, seed=1)
    assert np.abs(p.W).max() <= 1 / 2
    assert np.abs(p.V).max() <= 1 / 4
    assert np.abs(p.w_out).max() <= 1 / 4
    q = init_params(16, 4, seed=1)
    np.testing.assert_array_equal(p.W, q.W)


def test_forward_matches_steps_and_batch():
    rng = np.random.default_rng(2)
    p = init_params(4, 3, seed=2)
    xs = rng.normal(size=(6, 3))
    state = LstmState.zeros(4)
    for x in xs:
        _, state = lstm_step(p, x, state)
    outputs = lstm_forward(p, xs)
    assert outputs.shape == (6, 4)
    np.testing.assert_allclose(outputs[-1], state.y, atol=1e-15)
    batch = rng.normal(size=(5, 6, 3))
    expected = [lstm_forward(p, b)[-1] @ p.w_out + p.b_out for b in batch]
    np.testing.assert_allclose(predict_sequences(p, batch), expected, atol=1e-14)


def test_shape_errors():
    p = init_params(2, 3, seed=0)
    with pytest.raises(ShapeError):
        lstm_step(p, np.ones(2), LstmState.zeros(2))
    with pytest.raises(DataError):
        lstm_forward(p, np.zeros((0, 3)))
    with pytest.raises(ShapeError):
        LstmParams(np.zeros((8, 3)), np.zeros((8, 3)), np.zeros(8), np.zeros(2), 0.0)


def test_params_serialization():
    p = init_params(3, 2, seed=4)
    d = json.loads(json.dumps(p.to_dict()))
    assert {"h", "p", "W_z", "V_o", "b_f", "readout"} <= set(d)
    back = LstmParams.from_dict(d)
    for a, b in zip(p.arrays(), back.arrays()):
        np.testing.assert_array_equal(a, b)


@pytest.mark.parametrize("seed", range(5))
def test_bptt_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    h, p, T, N = (int(rng.integers(1, 4)) for _ in range(4))
    params = init_params(h, p, seed=seed)
    params.b_out = rng.normal()
    params.W *= 2
    params.V *= 2
    xs = rng.normal(size=(N, T, p))
    t = rng.normal(size=N)
    _, grads = loss_and_grads(params, xs, t)
    for arr, g in zip(params.arrays(), grads.arrays()):
        num = numerical_gradient(lambda: loss_and_grads(params, xs, t)[0], arr)
        rel = np.abs(num - g) / np.maximum(np.abs(num) + np.abs(g), 1e-7)
        assert rel.max() <= 1e-5


def test_training_learns_sine():
    xs, t = _sine_windows()
    result = train_lstm(xs, t, LstmConfig(hidden_size=8, epochs=60, seed=42))
    assert len(result.loss_history) == 60
    assert result.loss_history[-1] < 0.1 * result.initial_loss


def test_training_is_reproducible():
    xs, t = _sine_windows()
    cfg = LstmConfig(hidden_size=4, epochs=3, seed=7)
    a, b = train_lstm(xs, t, cfg), train_lstm(xs, t, cfg)
    assert a.loss_history == b.loss_history
    c = train_lstm(xs, t, LstmConfig(hidden_size=4, epochs=3, seed=8))
    assert c.loss_history != a.loss_history


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_is_reported():
    xs, t = _sine_windows()
    with pytest.raises(DivergenceError):
        train_lstm(xs, t * 1e300, LstmConfig(hidden_size=2, epochs=2, learning_rate=1e300, clip_norm=0))


def test_zero_epochs_returns_initial_params():
    xs, t = _sine_windows()
    start = init_params(2, 1, seed=0)
    result = train_lstm(xs, t, LstmConfig(hidden_size=2, epochs=0), params=start)
    assert result.loss_history == []
    np.testing.assert_array_equal(result.params.W, start.W)


def test_regressor_flat_and_3d_inputs():
    xs, t = _sine_windows(lag=6)
    flat = xs.reshape(len(xs), -1)
    a = LSTMRegressor(n_timesteps=6, hidden_size=4, epochs=5, seed=1).fit(flat, t)
    b = LSTMRegressor(hidden_size=4, epochs=5, seed=1).fit(xs, t)
    np.testing.assert_allclose(a.predict(flat), b.predict(xs), atol=1e-12)
    assert a.n_features_in_ == 6
    assert a.get_params()["hidden_size"] == 4
    with pytest.raises(ShapeError):
        LSTMRegressor(n_timesteps=4).fit(flat[:, :5], t)


def test_regressor_learns_affine_target_scale():
    xs, t = _sine_windows(lag=10)
    est = LSTMRegressor(n_timesteps=10, hidden_size=8, epochs=60, seed=42)
    est.fit(xs.reshape(len(xs), -1) * 10 + 100, t * 10 + 100)
    assert est.score(xs.reshape(len(xs), -1) * 10 + 100, t * 10 + 100) > 0.95


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 4), st.integers(1, 3), st.integers(1, 8), st.integers(0, 2**32 - 1))
def test_hidden_state_bounded_property(h, p, T, seed):
    rng = np.random.default_rng(seed)
    params = init_params(h, p, seed=seed)
    state = LstmState.zeros(h)
    for x in rng.normal(scale=10, size=(T, p)):
        _, state = lstm_step(params, x, state)
        # |y| <= 1 since y = tanh(c) * o; |c| grows at most by one per step
        assert np.all(np.abs(state.y) <= 1)
    assert np.all(np.abs(state.c) <= T)
