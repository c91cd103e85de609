import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

import oracles as orc
from qgnn import dataset as ds
from qgnn import training as tr
from qgnn.losses import LossConfig, axis_losses, batch_loss, kli_batch_sq, kli_terms, mse_batch
from qgnn.model import ModelParams

BATCH = st.integers(1, 16).flatmap(
    lambda b: st.tuples(
        arrays(np.float64, (b, 10), elements=st.floats(-1, 1)),
        arrays(np.float64, (b, 10), elements=st.floats(-1, 1)),
    )
)


# --- losses -----------------------------------------------------------------


def test_mse_examples():
    y = np.full((1, 10), 0.3)
    assert mse_batch(y, y) == 0.0
    assert mse_batch(y + 0.1, y) == pytest.approx(0.1, abs=1e-15)
    with pytest.raises(ValueError):
        mse_batch(np.zeros((2, 10)), np.zeros((2, 9)))


def test_kli_examples():
    rng = np.random.default_rng(0)
    y = rng.uniform(-1, 1, (6, 10))
    assert abs(kli_batch_sq(y, y)) < 1e-6
    assert kli_batch_sq(rng.uniform(-1, 1, (6, 10)), np.zeros((6, 10))) == 0.0


@given(batch=BATCH)
def test_losses_match_scalar_loops(batch):
    pred, labels = batch
    assert mse_batch(pred, labels) == pytest.approx(orc.mse_loop(pred, labels), abs=1e-12)
    assert kli_batch_sq(pred, labels) == pytest.approx(orc.kli_loop(pred, labels), rel=1e-12, abs=1e-12)


@given(batch=BATCH, gamma=st.floats(0, 1))
def test_total_loss_non_negative_with_clipping(batch, gamma):
    pred, labels = batch
    assert batch_loss(pred, labels, LossConfig(gamma=gamma)) >= 0.0


def test_kli_zero_label_contributes_nothing():
    pred = np.full((1, 10), 0.5)
    labels = np.zeros((1, 10))
    labels[0, 3] = 0.2
    terms = kli_terms(pred, labels)
    assert np.count_nonzero(terms) == 1
    assert terms[0, 3] == pytest.approx(0.04 * math.log((0.2 / (0.5 + 1e-8)) ** 2))


def test_clip_knob():
    pred = np.full((2, 10), 0.9)
    labels = np.full((2, 10), 0.1)  # signed KLI negative here
    assert kli_batch_sq(pred, labels) < 0
    assert batch_loss(pred, labels, LossConfig()) == pytest.approx(mse_batch(pred, labels))
    unclipped = batch_loss(pred, labels, LossConfig(clip_kli=False))
    assert unclipped < mse_batch(pred, labels)


def test_loss_config_validation():
    for bad in (dict(gamma=-1), dict(epsilon=0), dict(batch_size=0)):
        with pytest.raises(ValueError):
            LossConfig(**bad)


def test_axis_losses_sum_to_force_part():
    rng = np.random.default_rng(3)
    pred, labels = rng.uniform(-1, 1, (2, 5, 10))
    ax = axis_losses(pred, labels)
    assert ax.sum() == pytest.approx(np.sum((pred[:, :9] - labels[:, :9]) ** 2) / 5)
    assert ax[1] == pytest.approx(np.sum((pred[:, [1, 4, 7]] - labels[:, [1, 4, 7]]) ** 2) / 5)


# --- small datasets -------------------------------------------------------------


@pytest.fixture(scope="module")
def small():
    raw = ds.augment(ds.generate_synthetic(20, 0), 2, 1)
    sp = ds.split(len(raw), 0)
    train, sc = ds.preprocess([raw[i] for i in sp.train])
    val, _ = ds.preprocess([raw[i] for i in sp.val], sc)
    return train, val, sc


def test_total_loss_gamma_weighting_two_batches(small):
    train, _, _ = small
    p = tr.init_params(2, 0)
    b1, b2 = train.subset(range(0, 16)), train.subset(range(16, 32))
    cfg = LossConfig(gamma=0.03125)
    from qgnn.gradients import training_predictions

    parts = []
    for b in (b1, b2):
        pred = training_predictions(b, p)
        parts.append(orc.mse_loop(pred, b.labels) + 0.03125 * max(orc.kli_loop(pred, b.labels), 0.0))
    assert tr.total_loss([b1, b2], p, cfg) == pytest.approx(sum(parts) / 2, abs=1e-12)
    assert tr.total_loss([b1], p, cfg) == pytest.approx(parts[0], abs=1e-12)
    zero = LossConfig(gamma=0.0)
    assert tr.total_loss([b1, b2], p, zero) == pytest.approx(
        np.mean([orc.mse_loop(training_predictions(b, p), b.labels) for b in (b1, b2)]), abs=1e-12
    )
    with pytest.raises(ValueError):
        tr.total_loss([], p)


def test_epoch_loss_invariant_to_partition_when_gamma_zero(small):
    train, _, _ = small
    p = tr.init_params(1, 4)
    cfg = LossConfig(gamma=0.0)
    n = 32
    losses = {}
    for bs in (4, 8, 16, 32):
        batches = [train.subset(range(i, i + bs)) for i in range(0, n, bs)]
        losses[bs] = tr.total_loss(batches, p, cfg)
    assert max(losses.values()) - min(losses.values()) < 1e-12


# --- initialisation and Adam ------------------------------------------------------


def test_init_distributions():
    p = tr.init_params(2, 0)
    assert p.n_params == 50
    assert np.all((p.force_scales >= 1) & (p.force_scales <= 1.5))
    assert np.all((p.pool_scales >= 1) & (p.pool_scales <= 1.5))
    assert -0.2 <= p.force_bias <= 0.2 and -0.2 <= p.pool_bias <= 0.2
    big = tr.init_params(556, 1).thetas.ravel()  # ~10^4 draws
    assert abs(big.mean()) < 0.05 and abs(big.std() - 1) < 0.05
    np.testing.assert_array_equal(tr.init_params(3, 9).to_vector(), tr.init_params(3, 9).to_vector())
    with pytest.raises(ValueError):
        tr.init_params(0, 0)


def _state(n_layers=1):
    return tr.TrainState.fresh(tr.init_params(n_layers, 0))


def test_adam_zero_gradient_no_move():
    st_ = _state()
    before = st_.params.to_vector()
    tr.adam_step(st_, np.zeros(before.size), 1e-3)
    np.testing.assert_array_equal(st_.params.to_vector(), before)


def test_adam_first_step_is_sign_times_lr():
    st_ = _state()
    before = st_.params.to_vector()
    g = np.linspace(-2, 2, before.size)
    g[g == 0] = 0.5
    tr.adam_step(st_, g, 1e-3)
    np.testing.assert_allclose(st_.params.to_vector() - before, -1e-3 * np.sign(g), rtol=1e-6)


def test_adam_matches_scalar_reference():
    rng = np.random.default_rng(5)
    st_ = _state()
    x0 = st_.params.to_vector()
    grads = rng.normal(size=(100, x0.size))
    for g in grads:
        tr.adam_step(st_, g, 1e-2)
    np.testing.assert_allclose(st_.params.to_vector(), orc.adam_loop(x0, grads, 1e-2), atol=1e-12, rtol=0)
    assert st_.m.shape == x0.shape == st_.v.shape


def test_adam_rejects_nan_and_bad_shape():
    st_ = _state()
    g = np.zeros(st_.m.size)
    g[3] = np.nan
    with pytest.raises(tr.NumericalError, match="3"):
        tr.adam_step(st_, g, 1e-3)
    with pytest.raises(ValueError):
        tr.adam_step(st_, np.zeros(5), 1e-3)


# --- training loop -----------------------------------------------------------------


def test_training_smoke_halves_loss():
    raw = ds.generate_synthetic(64, 0)
    data, _ = ds.preprocess(raw)
    cfg = tr.TrainConfig(epochs=100, patience=100, loss=LossConfig(batch_size=16))
    _, hist = tr.train(data, data, cfg)
    assert hist[-1]["train_loss"] < 0.5 * hist[0]["train_loss"]


def test_early_stopping_and_snapshot(small):
    train, val, _ = small
    cfg = tr.TrainConfig(n_layers=1, lr=0.05, epochs=60, patience=5, loss=LossConfig(batch_size=8))
    state, hist = tr.train(train, val, cfg)
    vals = [h["val_loss"] for h in hist]
    assert state.best_val == min(vals)
    assert state.best_epoch == int(np.argmin(vals))
    # halted exactly `patience` epochs after the last improvement, or at the cap
    assert hist[-1]["epoch"] == min(state.best_epoch + 5, 60)
    recomputed, _ = tr.dataset_loss(val, state.best_params, cfg.loss)
    assert recomputed == state.best_val
    assert list(hist[0]) == ["epoch", "train_loss", "val_loss", "train_loss_x", "train_loss_y", "train_loss_z"]


def test_training_is_bit_reproducible(small):
    train, val, _ = small
    cfg = tr.TrainConfig(n_layers=1, epochs=3, loss=LossConfig(batch_size=8), init_seed=2, shuffle_seed=7)
    a = tr.train(train, val, cfg)
    b = tr.train(train, val, cfg)
    assert a[1] == b[1]
    np.testing.assert_array_equal(a[0].best_params.to_vector(), b[0].best_params.to_vector())


def test_train_rejects_empty(small):
    train, _, _ = small
    with pytest.raises(ValueError):
        tr.train(train, train.subset([]), tr.TrainConfig(epochs=1))


def test_rmse_examples_and_oracle():
    assert tr.rmse(np.zeros(9), np.full(9, 0.1)) == pytest.approx(0.1)
    assert tr.rmse([1.0, 2.0], [1.0, 2.0]) == 0.0
    rng = np.random.default_rng(2)
    a, b = rng.normal(size=(2, 40, 9))
    assert tr.rmse(a, b) == pytest.approx(orc.rmse_loop(a, b), abs=1e-12)


def test_evaluate_rmse_uses_predicted_forces(small):
    _, val, _ = small
    p = tr.init_params(2, 3)
    forces, energy = tr.predict_eval(val, p)
    e_rmse, f_rmse = tr.evaluate_rmse(val, p)
    assert f_rmse == pytest.approx(orc.rmse_loop(forces, val.forces), abs=1e-12)
    assert e_rmse == pytest.approx(orc.rmse_loop(forces.reshape(-1, 3, 3).sum(1) @ p.pool_scales + p.pool_bias, val.energy), abs=1e-12)


def test_mean_predictor_rmse(small):
    train, val, _ = small
    e, f = tr.mean_predictor_rmse(train, val)
    assert f == pytest.approx(orc.rmse_loop(np.broadcast_to(train.forces.mean(0), val.forces.shape), val.forces))
    assert e == pytest.approx(orc.rmse_loop(np.full(len(val), train.energy.mean()), val.energy))


# --- checkpoints ---------------------------------------------------------------------


def test_checkpoint_round_trip(tmp_path, small):
    _, _, sc = small
    p = tr.init_params(2, 1)
    path = tr.save_checkpoint(
        tmp_path / "c.json", p, scalers=sc, config=tr.TrainConfig(), best_epoch=4,
        best_val=0.5, seeds={"init": 1},
    )
    doc = tr.load_checkpoint(path)
    np.testing.assert_array_equal(doc["params"].to_vector(), p.to_vector())
    assert doc["n_params"] == 50 and doc["schema_version"] == tr.CHECKPOINT_SCHEMA
    assert doc["train_config"]["loss"]["gamma"] == 0.03125
    assert ds.Scalers.from_dict(doc["scalers"]).to_dict() == sc.to_dict()
    again = tr.save_checkpoint(tmp_path / "d.json", p, scalers=sc, config=tr.TrainConfig(),
                               best_epoch=4, best_val=0.5, seeds={"init": 1})
    assert path.read_bytes() == again.read_bytes()


@pytest.mark.parametrize(
    "edit",
    [
        lambda d: d.update(schema_version=7),
        lambda d: d.update(n_params=51),
        lambda d: d.update(params=[0.0] * 3),
        lambda d: d.pop("layout"),
    ],
)
def test_bad_checkpoints_rejected(tmp_path, edit):
    path = tr.save_checkpoint(tmp_path / "c.json", ModelParams.zeros(2))
    doc = json.loads(path.read_text())
    edit(doc)
    path.write_text(json.dumps(doc))
    with pytest.raises(tr.CheckpointError):
        tr.load_checkpoint(path)
    path.write_text("{ not json")
    with pytest.raises(tr.CheckpointError):
        tr.load_checkpoint(path)
