"""Gradients of the model outputs and the training loss.

Quantum angles are differentiated by the two-term parameter-shift rule (see
:func:`qgnn.model.raw_jacobian_batch`); the classical head by the chain rule.
Central finite differences serve as an independent check.
"""

import numpy as np

from . import model
from .losses import LossConfig, batch_loss, batch_loss_grad
from .model import DEFAULT_LAYOUT, ModelParams


def parameter_shift_grad(sample, params, output_index=None, layout=DEFAULT_LAYOUT, engine=None):
    """d raw_force / d theta for every quantum parameter.

    Returns ``(9, 18 N)``, or ``(18 N,)`` when ``output_index`` is given.
    """
    _, jac = model.raw_jacobian_batch(
        sample.coords[None], sample.distances[None], params, layout, engine
    )
    return jac[0] if output_index is None else jac[0, output_index]


def training_predictions(batch, params, layout=DEFAULT_LAYOUT, engine=None):
    """``(b, 10)`` predictions with the true forces feeding the energy pool."""
    raw = model.forward_batch(batch.coords, batch.distances, params, layout, engine)
    forces = model.postprocess_forces(raw, params)
    energy = model.pool_energy(batch.forces, params)
    return np.concatenate([forces, energy[:, None]], axis=1)


def loss_and_gradient(batch, params, config=LossConfig(), layout=DEFAULT_LAYOUT, engine=None):
    """Batch loss, its gradient (flat, ModelParams order) and the predictions.

    The energy is pooled from the true forces, so quantum parameters receive
    gradient through the force outputs only.
    """
    raw, jac = model.raw_jacobian_batch(batch.coords, batch.distances, params, layout, engine)
    forces = model.postprocess_forces(raw, params)
    pooled = model.axis_sums(batch.forces)
    energy = pooled @ params.pool_scales + params.pool_bias
    pred = np.concatenate([forces, energy[:, None]], axis=1)
    labels = batch.labels

    loss = batch_loss(pred, labels, config)
    g = batch_loss_grad(pred, labels, config)
    g_forces = g[:, :9]
    g_energy = g[:, 9]

    grad = np.empty(params.n_params)
    nq = params.n_quantum
    grad[:nq] = np.einsum("bj,j,bjp->p", g_forces, params.force_scales, jac)
    grad[nq : nq + 9] = np.sum(g_forces * raw, axis=0)
    grad[nq + 9] = g_forces.sum()
    grad[nq + 10 : nq + 13] = g_energy @ pooled
    grad[nq + 13] = g_energy.sum()
    return loss, grad, pred


def loss_gradient(batch, params, config=LossConfig(), layout=DEFAULT_LAYOUT, engine=None):
    return loss_and_gradient(batch, params, config, layout, engine)[1]


def batch_loss_fn(batch, config=LossConfig(), layout=DEFAULT_LAYOUT, engine=None):
    """``params -> training-mode batch loss``, for finite-difference checks."""

    def fun(params):
        pred = training_predictions(batch, params, layout, engine)
        return batch_loss(pred, batch.labels, config)

    return fun


def finite_diff_grad(fun, params, h=1e-4):
    """Central differences of ``fun(ModelParams)`` w.r.t. every parameter.

    ``fun`` may return a scalar or an array; the result has shape
    ``(n_params,) + shape(fun(params))``.
    """
    if h <= 0:
        raise ValueError("finite-difference step must be positive")
    vec = params.to_vector()
    n_layers = params.n_layers
    cols = []
    for i in range(vec.size):
        up = vec.copy()
        dn = vec.copy()
        up[i] += h
        dn[i] -= h
        f_up = np.asarray(fun(ModelParams.from_vector(up, n_layers)), dtype=np.float64)
        f_dn = np.asarray(fun(ModelParams.from_vector(dn, n_layers)), dtype=np.float64)
        cols.append((f_up - f_dn) / (2.0 * h))
    return np.stack(cols)

