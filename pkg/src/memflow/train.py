"""Mean-squared loss and minibatch Adam training.

Training minimizes the mean over the dataset of the squared Euclidean
distance between model outputs and targets.  The optimizer is plain Adam
with bias correction; shuffling and every random choice derive from the
config seed, so runs are bitwise reproducible.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from memflow.net import (
    backward_batch,
    count_params,
    forward_batch,
    load_params,
    save_params,
)

__all__ = [
    "TrainConfig",
    "TrainReport",
    "TrainingDiverged",
    "mse_loss",
    "train_model",
    "save_model",
    "load_model",
    "data_sizing_ratio",
]


class TrainingDiverged(RuntimeError):
    """Raised when the loss turns non-finite; carries the Adam step index."""

    def __init__(self, message, step):
        super().__init__(message)
        self.step = step


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 64
    epochs: int = 100
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    shuffle_each_epoch: bool = True

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be nonnegative")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not (0 <= self.adam_beta1 < 1 and 0 <= self.adam_beta2 < 1):
            raise ValueError("adam betas must lie in [0, 1)")
        if not self.adam_eps > 0:
            raise ValueError("adam_eps must be positive")


@dataclass(frozen=True)
class TrainReport:
    loss_per_epoch: np.ndarray
    final_loss: float
    wall_time: float


def mse_loss(params, ds):
    """(1/J) * sum_j ||model(Z_j) - z_j||^2 over the dataset."""
    _check_shapes(params, ds)
    resid = forward_batch(params, ds.inputs) - ds.targets
    return float(np.mean(np.sum(resid**2, axis=1)))


def _check_shapes(params, ds):
    if ds.d != params.d or ds.n_mem != params.n_mem:
        raise ValueError(
            f"dataset (d={ds.d}, n_mem={ds.n_mem}) does not match model "
            f"(d={params.d}, n_mem={params.n_mem})"
        )


def train_model(init, ds, cfg):
    """Run minibatch Adam on the mean-squared loss.

    Each epoch visits the whole dataset in ceil(J / batch_size)
    minibatches (the last one may be short).  Returns the trained
    parameters and a report with the full-dataset loss after each epoch.
    A non-finite minibatch loss aborts with the global step index, the
    usual sign of a divergent learning rate.
    """
    _check_shapes(init, ds)
    j_total = ds.size
    if j_total < 1:
        raise ValueError("dataset is empty")
    if cfg.batch_size > j_total:
        raise ValueError(
            f"batch_size {cfg.batch_size} exceeds dataset size {j_total}"
        )
    rng = np.random.default_rng(cfg.seed)
    weights = [w.copy() for w in init.weights]
    biases = [b.copy() for b in init.biases]
    m_w = [np.zeros_like(w) for w in weights]
    v_w = [np.zeros_like(w) for w in weights]
    m_b = [np.zeros_like(b) for b in biases]
    v_b = [np.zeros_like(b) for b in biases]
    b1, b2, eps, lr = cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps, cfg.learning_rate

    def current():
        return type(init)(
            d=init.d, n_mem=init.n_mem, hidden=init.hidden,
            weights=[w.copy() for w in weights], biases=[b.copy() for b in biases],
        )

    t0 = time.perf_counter()
    losses = np.empty(cfg.epochs)
    step = 0
    order = np.arange(j_total)
    for epoch in range(cfg.epochs):
        if cfg.shuffle_each_epoch:
            order = rng.permutation(j_total)
        for lo in range(0, j_total, cfg.batch_size):
            idx = order[lo : lo + cfg.batch_size]
            xb = ds.inputs[idx]
            yb = ds.targets[idx]
            params_now = _View(init, weights, biases)
            pred = forward_batch(params_now, xb)
            resid = pred - yb
            with np.errstate(over="ignore"):  # detected and raised below
                batch_loss = np.mean(np.sum(resid**2, axis=1))
            if not np.isfinite(batch_loss):
                raise TrainingDiverged(
                    f"non-finite loss at step {step} (epoch {epoch}); "
                    "reduce the learning rate",
                    step=step,
                )
            grads, _ = backward_batch(params_now, xb, (2.0 / xb.shape[0]) * resid)
            step += 1
            corr1 = 1.0 - b1**step
            corr2 = 1.0 - b2**step
            for l in range(len(weights)):
                gw, gb = grads.weights[l], grads.biases[l]
                m_w[l] = b1 * m_w[l] + (1 - b1) * gw
                v_w[l] = b2 * v_w[l] + (1 - b2) * gw**2
                m_b[l] = b1 * m_b[l] + (1 - b1) * gb
                v_b[l] = b2 * v_b[l] + (1 - b2) * gb**2
                weights[l] -= lr * (m_w[l] / corr1) / (np.sqrt(v_w[l] / corr2) + eps)
                biases[l] -= lr * (m_b[l] / corr1) / (np.sqrt(v_b[l] / corr2) + eps)
        losses[epoch] = mse_loss(_View(init, weights, biases), ds)
    trained = current()
    report = TrainReport(
        loss_per_epoch=losses,
        final_loss=float(losses[-1]),
        wall_time=time.perf_counter() - t0,
    )
    return trained, report


class _View:
    """Lightweight parameter view over mutable weight/bias lists.

    Lets the hot training loop reuse forward/backward without rebuilding a
    validated NetworkParams per step.
    """

    def __init__(self, proto, weights, biases):
        self.d = proto.d
        self.n_mem = proto.n_mem
        self.hidden = proto.hidden
        self.weights = weights
        self.biases = biases
        self.input_width = proto.input_width
        self.n_layers = len(weights)


def save_model(params, path):
    """Write a trained model checkpoint (text format, see net module)."""
    save_params(params, path)


def load_model(path):
    """Load a checkpoint written by :func:`save_model`."""
    return load_params(path)


def data_sizing_ratio(params, ds):
    """Dataset rows per model parameter; below ~5 training may be data-starved."""
    return ds.size / count_params(params)
