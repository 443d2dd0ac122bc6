import numpy as np
import pytest

from edgedetect.model import ModelConfig, NonFiniteLossError, build_model
from edgedetect.training import Adam, SGD, TrainConfig, _batches, evaluate, train
from helpers import synthetic_windows

SMALL = ModelConfig("FastGRNN", 1, 8, 8, 25)


@pytest.fixture(scope="module")
def data():
    X, y, _, _ = synthetic_windows(800, T=8, seed=1)
    return X, y


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(batch_size=1)
    with pytest.raises(ValueError):
        TrainConfig(optimizer="RMSprop")
    with pytest.raises(ValueError):
        TrainConfig(validation_fraction=1.0)
    with pytest.raises(ValueError):
        TrainConfig(loss_kind="hinge")


def test_batches_cover_everything_and_avoid_singletons():
    rng = np.random.default_rng(0)
    for n in (2, 3, 64, 65, 129, 1000):
        batches = _batches(n, 64, rng)
        assert sorted(np.concatenate(batches)) == list(range(n))
        assert all(len(b) >= 2 for b in batches)


def test_sgd_and_adam_steps():
    t = {"w": np.array([1.0, -1.0])}
    SGD(0.5).step(t, {"w": np.array([2.0, 2.0])})
    np.testing.assert_array_equal(t["w"], [0.0, -2.0])
    t = {"w": np.array([1.0])}
    Adam(0.1).step(t, {"w": np.array([3.0])})
    # first bias-corrected Adam step moves by lr * sign(g)
    assert abs(t["w"][0] - 0.9) < 1e-7


@pytest.mark.parametrize("optimizer", ["Adam", "SGD"])
def test_zero_learning_rate_keeps_weights(data, optimizer):
    X, y = data
    model = build_model(SMALL, 0)
    trained, history = train(model, X, y, TrainConfig(epochs=3, learning_rate=0.0,
                                                      optimizer=optimizer))
    for name in model.trainable_names:
        assert np.array_equal(trained.tensors[name], model.tensors[name]), name
    assert len(history) == 3


def test_input_model_not_modified(data):
    X, y = data
    model = build_model(SMALL, 0)
    before = {n: a.copy() for n, a in model.tensors.items()}
    train(model, X, y, TrainConfig(epochs=1))
    assert all(np.array_equal(before[n], model.tensors[n]) for n in before)


def test_single_class_rejected(data):
    X, _ = data
    with pytest.raises(ValueError, match="both"):
        train(build_model(SMALL), X, np.zeros(len(X), dtype=int))
    with pytest.raises(ValueError):
        train(build_model(SMALL), X[:0], np.zeros(0, dtype=int))


def test_divergence_reports_epoch(data):
    X, y = data
    X = X.copy()
    X[5, 2, 0] = np.nan
    with pytest.raises(NonFiniteLossError) as info:
        train(build_model(SMALL), X, y, TrainConfig(epochs=2, validation_fraction=0.0))
    assert info.value.epoch == 0
    assert info.value.batch_index is not None


def test_loss_decreases_on_average(data):
    X, y = data
    curves = []
    for seed in range(5):
        cfg = TrainConfig(epochs=6, seed=seed, validation_fraction=0.0, early_stop_patience=100)
        _, history = train(build_model(SMALL, seed), X, y, cfg)
        curves.append([h["train_loss"] for h in history])
    mean = np.mean(curves, axis=0)
    assert np.all(np.diff(mean) <= 0), mean


def test_history_and_lr_decay(data):
    X, y = data
    _, history = train(build_model(SMALL), X, y, TrainConfig(epochs=3, lr_decay=0.5,
                                                             early_stop_patience=10))
    assert [h["epoch"] for h in history] == [0, 1, 2]
    assert [h["learning_rate"] for h in history] == [1e-3, 5e-4, 2.5e-4]
    assert all({"train_loss", "val_loss", "val_accuracy"} <= set(h) for h in history)


def test_early_stopping_restores_best(data):
    X, y = data
    # a huge learning rate makes validation loss erratic, so patience triggers
    cfg = TrainConfig(epochs=30, learning_rate=0.5, optimizer="SGD", early_stop_patience=2)
    best, history = train(build_model(SMALL), X, y, cfg)
    assert len(history) < 30
    best_epoch = int(np.argmin([h["val_loss"] for h in history]))
    assert best_epoch == len(history) - 1 - 2


def test_reproducible(data):
    X, y = data
    cfg = TrainConfig(epochs=2, seed=4)
    a, ha = train(build_model(SMALL, 4), X, y, cfg)
    b, hb = train(build_model(SMALL, 4), X, y, cfg)
    assert ha == hb
    assert all(np.array_equal(a.tensors[n], b.tensors[n]) for n in a.tensors)


def test_learns_synthetic_task():
    X, y, _, _ = synthetic_windows(3000, T=8, seed=1)
    model, history = train(build_model(SMALL), X, y, TrainConfig(epochs=10, learning_rate=1e-2))
    assert max(h["val_accuracy"] for h in history) >= 0.95
    report = evaluate(model, X, y)
    assert report.accuracy >= 0.95 and report.auc >= 0.97
    assert report.cell == "FastGRNN"
    with pytest.raises(ValueError):
        evaluate(model, X[:0], y[:0])


def test_evaluate_is_order_independent(data):
    X, y = data
    model = build_model(SMALL, 3)
    perm = np.random.default_rng(0).permutation(len(y))
    a = evaluate(model, X, y).to_dict()
    b = evaluate(model, X[perm], y[perm]).to_dict()
    for d in (a, b):
        d.pop("test_wall_time_s")
        d.pop("loss")
    assert a == b
