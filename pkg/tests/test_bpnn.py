import json
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from windbag import bpnn
from windbag.bpnn import (
    NetConfig, NeuralNet, TrainingDivergence, backprop_step, forward, gradients, init_net, load_net, loss,
    save_net, select_hidden_width, sigmoid, train,
)
from windbag.preprocess import fit_norm

from oracles import max_relative_error, numeric_gradients

PARAMS = ("w", "b_hidden", "v", "b_out")


def random_net(seed, m, h):
    return init_net(NetConfig(m, h, seed=seed, weight_init_range=1.0))


# ------------------------------------------------------------------ sigmoid


def test_sigmoid_values():
    assert sigmoid(0.0) == 0.5
    assert 0 < sigmoid(-745.0) <= 1e-300
    assert sigmoid(745.0) == 1.0
    assert sigmoid(np.array([-1e308, 1e308])).tolist() == [0.0, 1.0]


@settings(max_examples=200)
@given(st.floats(-800, 800))
def test_sigmoid_symmetry(x):
    assert abs(sigmoid(x) + sigmoid(-x) - 1.0) <= 1e-15


# ------------------------------------------------------------------ forward


def test_forward_zero_weights():
    net = NeuralNet(np.zeros((4, 3)), np.zeros(4), np.zeros(4), 0.0, NetConfig(3, 4))
    u, z = forward(net, np.array([1.0, -2.0, 3.0]))
    assert u == 0.5 and np.all(z == 0.5)


def test_forward_hand_evaluated():
    net = NeuralNet(np.ones((1, 1)), np.zeros(1), np.ones(1), 0.0, NetConfig(1, 1))
    u, z = forward(net, np.array([0.0]))
    assert z[0] == 0.5
    assert u == pytest.approx(0.6224593312018546, abs=1e-15)


def test_forward_batch_matches_rows_and_is_deterministic(rng):
    net = random_net(3, 4, 9)
    X = rng.normal(size=(6, 4))
    u, _ = forward(net, X)
    assert u.tolist() == forward(net, X)[0].tolist()
    np.testing.assert_allclose(u, [forward(net, x)[0] for x in X], rtol=0, atol=1e-15)
    assert np.all((u > 0) & (u < 1))


def test_forward_dimension_mismatch():
    with pytest.raises(ValueError):
        forward(random_net(0, 3, 5), np.ones(4))


# --------------------------------------------------------------------- loss


def test_loss_examples(rng):
    net = NeuralNet(np.zeros((2, 1)), np.zeros(2), np.zeros(2), 0.0, NetConfig(1, 2))
    assert loss(net, [[0.3]], [0.5]) == 0.0
    assert loss(net, [[0.3]], [1.0]) == 0.125
    net = random_net(5, 3, 7)
    X, Y = rng.normal(size=(8, 3)), rng.uniform(0.1, 0.9, 8)
    # second code path: explicit per-sample loop
    total = 0.0
    for x, y in zip(X, Y):
        z = [1 / (1 + np.exp(-(net.w[j] @ x + net.b_hidden[j]))) for j in range(7)]
        u = 1 / (1 + np.exp(-(np.dot(net.v, z) + net.b_out)))
        total += 0.5 * (y - u) ** 2
    assert loss(net, X, Y) == pytest.approx(total, rel=1e-13)


def test_loss_errors():
    net = random_net(0, 2, 5)
    with pytest.raises(ValueError):
        loss(net, np.empty((0, 2)), [])
    with pytest.raises(ValueError):
        loss(net, np.ones((3, 2)), np.ones(2))


# ---------------------------------------------------------------- gradients


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(0)
    net = random_net(42, 3, 7)
    X, Y = rng.normal(size=(8, 3)), rng.uniform(0.1, 0.9, 8)
    assert max_relative_error(gradients(net, X, Y), numeric_gradients(net, X, Y)) < 1e-4


def test_zero_learning_rate_leaves_net_unchanged(rng):
    net = random_net(1, 2, 5)
    new, norms = backprop_step(net, rng.normal(size=(4, 2)), rng.uniform(size=4), learning_rate=0.0)
    for name in PARAMS:
        assert np.array_equal(getattr(new, name), getattr(net, name))
    assert norms["w"] > 0


def test_step_on_perfect_fit_is_a_fixed_point(rng):
    net = random_net(2, 2, 5)
    X = rng.normal(size=(5, 2))
    Y, _ = forward(net, X)
    new, norms = backprop_step(net, X, Y)
    assert all(v == 0 for v in norms.values())
    for name in PARAMS:
        assert np.array_equal(getattr(new, name), getattr(net, name))


def test_small_steps_never_increase_loss(rng):
    net = random_net(8, 2, 5)
    X, Y = rng.uniform(size=(30, 2)), rng.uniform(0.1, 0.9, 30)
    prev = loss(net, X, Y)
    for _ in range(200):
        net, _ = backprop_step(net, X, Y, learning_rate=0.5)
        cur = loss(net, X, Y)
        assert cur <= prev + 1e-15
        prev = cur


def test_nonfinite_gradient_raises():
    net = random_net(0, 1, 3)
    with pytest.raises(TrainingDivergence):
        backprop_step(net, [[np.nan]], [0.5])


# -------------------------------------------------------------------- train


def test_train_reduces_loss_and_is_reproducible():
    X = np.linspace(0, 1, 20)[:, None]
    Y = 0.1 + 0.8 * X[:, 0]
    cfg = NetConfig(1, 3, max_epochs=500, seed=4)
    a, b = train(cfg, X, Y), train(cfg, X, Y)
    assert a.train_curve[-1] < a.train_curve[0]
    assert len(a.train_curve) <= cfg.max_epochs
    for name in PARAMS:
        assert np.array_equal(getattr(a, name), getattr(b, name))
    assert a.train_curve == b.train_curve


def test_train_matches_repeated_backprop_steps(rng):
    X, Y = rng.uniform(size=(12, 2)), rng.uniform(0.1, 0.9, 12)
    cfg = NetConfig(2, 5, learning_rate=2.0, max_epochs=25, target_error=0.0, seed=1)
    net = init_net(cfg)
    curve = []
    for _ in range(25):
        curve.append(loss(net, X, Y) / 12)
        net, _ = backprop_step(net, X, Y)
    trained = train(cfg, X, Y)
    np.testing.assert_allclose(trained.w, net.w, rtol=0, atol=1e-13)
    np.testing.assert_allclose(trained.train_curve, curve, rtol=1e-12)


def test_train_does_not_mutate_inputs(rng):
    X, Y = rng.uniform(size=(10, 2)), rng.uniform(0.1, 0.9, 10)
    X0, Y0 = X.copy(), Y.copy()
    init = init_net(NetConfig(2, max_epochs=50))
    w0 = init.w.copy()
    train(init.config, X, Y, init=init)
    assert np.array_equal(X, X0) and np.array_equal(Y, Y0) and np.array_equal(init.w, w0)


def test_train_stops_at_target_error():
    X = np.zeros((4, 1))
    Y = np.full(4, 0.5)
    cfg = NetConfig(1, 2, target_error=1e-3, max_epochs=1000)
    net = train(cfg, X, Y)
    assert net.train_curve[-1] <= 1e-3
    assert len(net.train_curve) < 1000


def test_xor():
    X = np.array([[0, 0], [0, 1], [1, 0], [1, 1]], dtype=float)
    Y = np.array([0.1, 0.9, 0.9, 0.1])
    net = train(NetConfig(2, 5, learning_rate=5.0, max_epochs=20000, target_error=0.0, seed=3), X, Y)
    u, _ = forward(net, X)
    assert np.all((u > 0.5) == (Y > 0.5))


def test_divergence_reports_epoch():
    X = np.array([[np.nan], [1.0]])
    with pytest.raises(TrainingDivergence) as info:
        train(NetConfig(1, 2), X, [0.2, 0.4])
    assert info.value.epoch == 0


def test_default_hidden_width_and_config_validation():
    assert NetConfig(4).hidden_dim == 9
    for kw in (dict(input_dim=0), dict(input_dim=2, learning_rate=0), dict(input_dim=2, max_epochs=-1)):
        with pytest.raises(ValueError):
            NetConfig(**kw)


# -------------------------------------------------------------- width sweep


def test_hidden_width_sweep(rng):
    teacher = random_net(7, 2, 7)
    X = rng.uniform(size=(60, 2))
    Y, _ = forward(teacher, X)
    cfg = NetConfig(2, max_epochs=300, seed=2)
    chosen, scores = select_hidden_width(cfg, (X[:45], Y[:45]), (X[45:], Y[45:]), candidates=(3, 5, 7))
    assert scores[chosen.hidden_dim] == min(scores.values())
    again, _ = select_hidden_width(cfg, (X[:45], Y[:45]), (X[45:], Y[45:]), candidates=(3, 5, 7))
    assert again == chosen
    single, none = select_hidden_width(cfg, (X, Y), (X[:1], Y[:1]), candidates=(11,))
    assert single.hidden_dim == 11 and none == {}
    with pytest.raises(ValueError):
        select_hidden_width(cfg, (X, Y), (X[:0], Y[:0]))


def test_width_sweep_candidates():
    assert bpnn.WIDTH_SWEEP == (5, 7, 9, 11, 13, 15, 17, 19, 21)


# -------------------------------------------------------------- persistence


def test_save_load_round_trip_is_bit_exact(tmp_path, rng):
    X, Y = rng.uniform(size=(10, 3)), rng.uniform(0.1, 0.9, 10)
    net = train(NetConfig(3, max_epochs=40, seed=5), X, Y)
    net = replace(net, norm_x=fit_norm(X), norm_y=fit_norm(Y, (0.1, 0.9)), meta={"features": ["a", "b", "c"]})
    p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
    save_net(net, p1)
    back = load_net(p1)
    for name in PARAMS:
        assert np.array_equal(getattr(back, name), getattr(net, name))
    assert back.config == net.config and back.norm_x == net.norm_x and back.train_curve == net.train_curve
    save_net(back, p2)
    assert p1.read_bytes() == p2.read_bytes()
    u1, _ = forward(net, X)
    u2, _ = forward(back, X)
    assert np.array_equal(u1, u2)


def test_load_rejects_wrong_format(tmp_path):
    p = tmp_path / "m.json"
    p.write_text(json.dumps({"format": "other"}))
    with pytest.raises(ValueError):
        load_net(p)
    p.write_text(json.dumps({"format": bpnn.FORMAT_NAME, "version": 99}))
    with pytest.raises(ValueError, match="version"):
        load_net(p)
