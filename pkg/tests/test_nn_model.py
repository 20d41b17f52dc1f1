import numpy as np
import pytest

from conftest import central_difference
from gyrocal.nn import (Model, ModelConfig, Tensor, TrainConfig, TrainingDiverged,
                        load_checkpoint, loss_rmse100, save_checkpoint, train)
from gyrocal.nn.training import evaluate_loss


def windows(n, w, seed=0, rate=78.0):
    rng = np.random.default_rng(seed)
    s = rng.uniform(0.003, 0.005, n)
    b = rng.uniform(-0.1, 0, n)
    up = (1 + s)[:, None] * rate + b[:, None] + rng.normal(0, 0.03, (n, w))
    down = -(1 + s)[:, None] * rate + b[:, None] + rng.normal(0, 0.03, (n, w))
    x = np.stack([up, down, np.full((n, w), rate)], axis=1)
    return x, np.stack([s, b], axis=1)


def test_output_shape():
    m = Model(seed=0)
    for batch in (1, 3):
        assert m(windows(batch, 290)[0]).shape == (batch, 2)
    with pytest.raises(ValueError):
        m(np.zeros((2, 3, 100)))
    with pytest.raises(ValueError):
        m(np.zeros((2, 2, 290)))


def test_feature_length_shape_oracle():
    # compose valid-conv (L - k + 1) and pooling (L // p) sizes layer by layer
    w = 290
    head_rows, head_cols = (2 - 2 + 1) // 1, (w - 15 + 1) // 4
    rows, cols = (2 * head_rows - 2 + 1) // 1, (head_cols - 7 + 1) // 4
    expected = 32 * rows * cols
    cfg = ModelConfig()
    assert cfg.n_features == expected == 480
    m = Model(cfg, seed=0)
    assert m.fc1.weight.shape == (64, expected)


def test_eval_identical_rows_and_batch_position():
    m = Model(seed=1).eval()
    x, _ = windows(4, 290, seed=3)
    batch = np.stack([x[0], x[1], x[0], x[2]])
    out = m(batch).data
    np.testing.assert_array_equal(out[0], out[2])
    solo = m(x[:1]).data
    np.testing.assert_allclose(solo[0], out[0], rtol=0, atol=1e-12)
    assert m(batch).data.tobytes() == out.tobytes()


def test_invalid_config():
    from gyrocal.nn import ConvSpec
    with pytest.raises(ValueError):
        ModelConfig(head_conv=ConvSpec(1, 15, 16))
    with pytest.raises(ValueError):
        ModelConfig(dropout_p=1.0)
    with pytest.raises(ValueError):
        ModelConfig(bn_epsilon=0)


def _model_loss(model, x, y, scale=1.0):
    model.reseed_dropout(123)
    return loss_rmse100(model(x), y) * scale


def test_model_gradients_match_finite_differences(tiny_config):
    m = Model(tiny_config, seed=3).train()
    x, y = windows(4, 12, seed=1)
    m.zero_grad()
    _model_loss(m, x, y).backward()
    for name, p in m.named_parameters():
        num = central_difference(lambda: _model_loss(m, x, y).item(), p, step=1e-5)
        err = np.abs(p.grad - num) / np.maximum(np.maximum(np.abs(p.grad), np.abs(num)), 1e-8)
        assert err.max() <= 1e-4, name


def test_gradient_linear_in_loss_scale(tiny_config):
    m = Model(tiny_config, seed=4).train()
    x, y = windows(3, 12, seed=2)
    m.zero_grad()
    _model_loss(m, x, y).backward()
    g1 = [p.grad.copy() for p in m.parameters()]
    m.zero_grad()
    _model_loss(m, x, y, scale=2.0).backward()
    for a, b in zip(g1, (p.grad for p in m.parameters())):
        np.testing.assert_allclose(b, 2 * a, rtol=1e-12, atol=1e-15)


def test_unused_parameter_gets_zero_gradient(tiny_config):
    m = Model(tiny_config, seed=5).train()
    x, y = windows(3, 12)
    spare = Tensor(np.ones(3), requires_grad=True)
    m.zero_grad()
    _model_loss(m, x, y).backward()
    assert spare.grad is None
    # a head whose output is multiplied by zero downstream contributes nothing
    m.zero_grad()
    m.combined_head.weight.data[:] = 0.0
    _model_loss(m, x, y).backward()
    for name, p in m.named_parameters():
        if name.startswith(("up_head", "down_head")):
            assert np.all(p.grad == 0), name


def test_checkpoint_round_trip_bit_identical(tmp_path):
    m = Model(seed=7)
    x, y = windows(40, 290, seed=7)
    train(m, (x[:32], y[:32]), (x[32:], y[32:]), TrainConfig(epochs=2, seed=1))
    save_checkpoint(m, tmp_path / "m.json", train_seed=1)
    m2, meta = load_checkpoint(tmp_path / "m.json")
    assert meta["train_seed"] == 1 and meta["config"]["window_len"] == 290
    assert m.predict(x).tobytes() == m2.predict(x).tobytes()


def test_memorize_single_point():
    m = Model(seed=0)
    x, y = windows(1, 290, seed=9)
    m, hist = train(m, (x, y), (x, y), TrainConfig(epochs=200, patience=1000, seed=0))
    assert len(hist.epochs) == 200
    assert evaluate_loss(m, x, y) < 0.01 * hist.epochs[0].train_loss


def test_zero_learning_rate_freezes_parameters():
    m = Model(seed=2)
    before = {n: p.data.copy() for n, p in m.named_parameters()}
    x, y = windows(20, 290, seed=4)
    train(m, (x[:16], y[:16]), (x[16:], y[16:]), TrainConfig(lr=0.0, epochs=3, seed=0))
    for n, p in m.named_parameters():
        assert np.array_equal(before[n], p.data), n


def test_training_is_deterministic():
    x, y = windows(50, 290, seed=5)
    runs = []
    for _ in range(2):
        m, hist = train(Model(seed=3), (x[:40], y[:40]), (x[40:], y[40:]),
                        TrainConfig(epochs=3, batch_size=8, seed=11))
        runs.append((hist.rows(), m.state_dict()))
    assert runs[0][0] == runs[1][0]
    for k in runs[0][1]:
        assert runs[0][1][k].tobytes() == runs[1][1][k].tobytes()


def test_early_stopping_restores_best():
    x, y = windows(40, 290, seed=6)
    m, hist = train(Model(seed=1), (x[:32], y[:32]), (x[32:], y[32:]),
                    TrainConfig(lr=1e-3, epochs=60, patience=5, seed=0))
    assert hist.stopped_early or len(hist.epochs) == 60
    candidates = [(0, hist.initial_val_loss)] + [(r.epoch, r.val_loss) for r in hist.epochs]
    best_epoch, best_val = min(candidates, key=lambda c: c[1])
    assert hist.best_epoch == best_epoch
    assert evaluate_loss(m, x[32:], y[32:]) == pytest.approx(best_val, rel=1e-12)


def test_divergence_aborts():
    x, y = windows(8, 290)
    y[0, 0] = np.nan
    with pytest.raises(TrainingDiverged):
        train(Model(seed=0), (x, y), (x, np.zeros_like(y)), TrainConfig(epochs=1))


def test_empty_sets_rejected():
    x, y = windows(4, 290)
    with pytest.raises(ValueError):
        train(Model(seed=0), (x[:0], y[:0]), (x, y))
