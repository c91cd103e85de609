"""Parameter initialisation, Adam with early stopping, RMSE evaluation, checkpoints."""

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import model
from .gradients import loss_and_gradient, training_predictions
from .losses import LossConfig, axis_losses, batch_loss
from .model import DEFAULT_LAYOUT, THETAS_PER_LAYER, ModelParams, WireLayout

log = logging.getLogger(__name__)

CHECKPOINT_SCHEMA = 1


class NumericalError(RuntimeError):
    """Non-finite gradients or losses during training."""


class CheckpointError(ValueError):
    """A checkpoint file that is unreadable or inconsistent."""


def init_params(n_layers, seed):
    """Thetas ~ N(0, 1); both biases ~ U(-0.2, 0.2); all 12 scales ~ U(1, 1.5)."""
    if n_layers < 1:
        raise ValueError("n_layers must be >= 1")
    rng = np.random.default_rng(seed)
    thetas = rng.normal(0.0, 1.0, size=(n_layers, THETAS_PER_LAYER))
    force_scales = rng.uniform(1.0, 1.5, size=9)
    force_bias = rng.uniform(-0.2, 0.2)
    pool_scales = rng.uniform(1.0, 1.5, size=3)
    pool_bias = rng.uniform(-0.2, 0.2)
    return ModelParams(thetas, force_scales, force_bias, pool_scales, pool_bias)


@dataclass
class TrainConfig:
    n_layers: int = 2
    lr: float = 1e-3
    epochs: int = 500
    patience: int = 50
    loss: LossConfig = field(default_factory=LossConfig)
    init_seed: int = 0
    shuffle_seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8

    def to_dict(self):
        return asdict(self)


@dataclass
class TrainState:
    params: ModelParams
    m: np.ndarray
    v: np.ndarray
    step: int = 0
    epoch: int = 0
    best_val: float = math.inf
    best_epoch: int = 0
    best_params: ModelParams | None = None
    patience_left: int = 0
    seed: int = 0

    @classmethod
    def fresh(cls, params, patience=50, seed=0):
        n = params.n_params
        return cls(params, np.zeros(n), np.zeros(n), patience_left=patience, seed=seed)


def adam_step(state, gradient, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """One bias-corrected Adam update of ``state.params`` (in place); returns ``state``."""
    g = np.asarray(gradient, dtype=np.float64)
    if g.shape != state.m.shape:
        raise ValueError(f"gradient shape {g.shape} does not match parameters {state.m.shape}")
    if not np.all(np.isfinite(g)):
        bad = np.flatnonzero(~np.isfinite(g))
        raise NumericalError(f"non-finite gradient entries at parameter indices {bad.tolist()}")
    state.step += 1
    state.m = beta1 * state.m + (1.0 - beta1) * g
    state.v = beta2 * state.v + (1.0 - beta2) * g * g
    m_hat = state.m / (1.0 - beta1**state.step)
    v_hat = state.v / (1.0 - beta2**state.step)
    vec = state.params.to_vector() - lr * m_hat / (np.sqrt(v_hat) + eps)
    state.params = ModelParams.from_vector(vec, state.params.n_layers)
    return state


def iter_batches(n, batch_size, order=None):
    order = np.arange(n) if order is None else order
    for start in range(0, n, batch_size):
        yield order[start : start + batch_size]


def total_loss(batches, params, config=LossConfig(), layout=DEFAULT_LAYOUT, engine=None):
    """Mean of the training-mode batch losses over ``batches`` (a list of datasets)."""
    if not batches:
        raise ValueError("need at least one batch")
    losses = [
        batch_loss(training_predictions(b, params, layout, engine), b.labels, config)
        for b in batches
    ]
    return float(np.mean(losses))


def dataset_loss(ds, params, config=LossConfig(), layout=DEFAULT_LAYOUT, engine=None):
    """Loss and per-axis force components over ``ds`` in unshuffled batches."""
    pred = training_predictions(ds, params, layout, engine)
    labels = ds.labels
    losses = []
    axes = []
    for idx in iter_batches(len(ds), config.batch_size):
        losses.append(batch_loss(pred[idx], labels[idx], config))
        axes.append(axis_losses(pred[idx], labels[idx]))
    return float(np.mean(losses)), np.mean(axes, axis=0)


def train(train_ds, val_ds, config=TrainConfig(), layout=DEFAULT_LAYOUT, engine=None, on_epoch=None):
    """Mini-batch Adam with early stopping on the validation loss.

    Returns ``(state, history)``; ``history`` holds one dict per epoch with
    epoch 0 being the untrained model. ``state.best_params`` is the snapshot
    with the lowest validation loss.
    """
    if len(train_ds) == 0 or len(val_ds) == 0:
        raise ValueError("training and validation splits must be non-empty")
    params = init_params(config.n_layers, config.init_seed)
    state = TrainState.fresh(params, config.patience, config.shuffle_seed)
    rng = np.random.default_rng(config.shuffle_seed)
    cfg = config.loss

    def record(epoch, train_loss, axes):
        val_loss, _ = dataset_loss(val_ds, state.params, cfg, layout, engine)
        row = {
            "epoch": epoch,
            "train_loss": train_loss,
            "val_loss": val_loss,
            "train_loss_x": float(axes[0]),
            "train_loss_y": float(axes[1]),
            "train_loss_z": float(axes[2]),
        }
        history.append(row)
        if on_epoch is not None:
            on_epoch(row)
        return val_loss

    history = []
    init_loss, init_axes = dataset_loss(train_ds, state.params, cfg, layout, engine)
    val0 = record(0, init_loss, init_axes)
    state.best_val = val0
    state.best_params = state.params.copy()

    labels = train_ds.labels
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(train_ds))
        losses = []
        axes = []
        for idx in iter_batches(len(train_ds), cfg.batch_size, order):
            batch = train_ds.subset(idx)
            loss, grad, pred = loss_and_gradient(batch, state.params, cfg, layout, engine)
            if not math.isfinite(loss):
                raise NumericalError(f"non-finite loss at epoch {epoch}")
            losses.append(loss)
            axes.append(axis_losses(pred, labels[idx]))
            adam_step(state, grad, config.lr, config.beta1, config.beta2, config.adam_eps)
        state.epoch = epoch
        val_loss = record(epoch, float(np.mean(losses)), np.mean(axes, axis=0))
        if val_loss < state.best_val:
            state.best_val = val_loss
            state.best_epoch = epoch
            state.best_params = state.params.copy()
            state.patience_left = config.patience
        else:
            state.patience_left -= 1
            if state.patience_left <= 0:
                log.info("early stop at epoch %d (best epoch %d)", epoch, state.best_epoch)
                break
    return state, history


def predict_eval(ds, params, layout=DEFAULT_LAYOUT, engine=None):
    """Test-mode predictions ``(forces (n, 9), energy (n,))``: predicted forces are pooled."""
    raw = model.forward_batch(ds.coords, ds.distances, params, layout, engine)
    forces = model.postprocess_forces(raw, params)
    return forces, model.pool_energy(forces, params)


def rmse(pred, target):
    pred = np.asarray(pred, dtype=np.float64)
    return float(np.sqrt(np.mean((pred - np.asarray(target, dtype=np.float64)) ** 2)))


def evaluate_rmse(ds, params, layout=DEFAULT_LAYOUT, engine=None):
    """(RMSE(E), RMSE(F)) with test-mode pooling."""
    forces, energy = predict_eval(ds, params, layout, engine)
    return rmse(energy, ds.energy), rmse(forces, ds.forces)


def mean_predictor_rmse(reference_ds, ds):
    """RMSE of predicting ``reference_ds``'s label means for every sample of ``ds``."""
    f_mean = reference_ds.forces.mean(axis=0)
    e_mean = reference_ds.energy.mean()
    return (
        rmse(np.full(len(ds), e_mean), ds.energy),
        rmse(np.broadcast_to(f_mean, ds.forces.shape), ds.forces),
    )


# --- checkpoints ----------------------------------------------------------


def save_checkpoint(path, params, *, scalers=None, config=None, layout=DEFAULT_LAYOUT,
                    best_epoch=None, best_val=None, seeds=None, extra=None):
    doc = {
        "schema_version": CHECKPOINT_SCHEMA,
        "n_layers": params.n_layers,
        "n_params": params.n_params,
        "params": params.to_vector().tolist(),
        "layout": layout.to_dict(),
        "scalers": scalers.to_dict() if scalers is not None else None,
        "train_config": config.to_dict() if config is not None else None,
        "best_epoch": best_epoch,
        "best_val_loss": best_val,
        "seeds": seeds or {},
    }
    if extra:
        doc.update(extra)
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return Path(path)


def load_checkpoint(path):
    """Return the checkpoint dict with ``params`` and ``layout`` rebuilt."""
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(doc, dict) or doc.get("schema_version") != CHECKPOINT_SCHEMA:
        raise CheckpointError(f"{path}: unsupported or missing checkpoint schema version")
    try:
        n_layers = int(doc["n_layers"])
        params = ModelParams.from_vector(doc["params"], n_layers)
        layout = WireLayout.from_dict(doc["layout"])
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"{path}: inconsistent checkpoint ({exc})") from None
    if doc.get("n_params") != params.n_params:
        raise CheckpointError(
            f"{path}: n_params {doc.get('n_params')} does not match {params.n_params} values"
        )
    doc["params"] = params
    doc["layout"] = layout
    return doc
