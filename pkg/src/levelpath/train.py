"""Full-batch gradient descent with closed-form backpropagation.

Deterministic by construction: no minibatching, no stochastic layers,
and the subgradient at activation kinks is taken from the right branch.
Only used to manufacture endpoint pairs inside a sublevel set; this is
not a general-purpose trainer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import TrainingDiverged
from .network import Dataset, NetworkSpec, Theta, forward, output_loss, random_theta

__all__ = ["gradients", "train_gd", "TrainResult"]


def gradients(spec: NetworkSpec, theta: Theta, data: Dataset) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Exact gradient of the training loss w.r.t. every weight and bias."""
    feats = forward(spec, theta, data.X)
    G = spec.loss.gradient(feats[-1], data.Y)
    dWs: list[np.ndarray] = [None] * spec.depth
    dbs: list[np.ndarray] = [None] * (spec.depth - 1)
    for i in reversed(range(spec.depth)):
        F_prev = feats[i]
        if i == spec.depth - 1:
            dWs[i] = F_prev.T @ G
            G = G @ theta.weights[i].T
        else:
            H = F_prev @ theta.weights[i] + theta.biases[i]
            local = G * spec.activation.derivative(H)
            dWs[i] = F_prev.T @ local
            dbs[i] = local.sum(axis=0)
            G = local @ theta.weights[i].T
    return dWs, dbs


@dataclass(frozen=True)
class TrainResult:
    theta: Theta
    final_loss: float
    losses: tuple[float, ...]


def train_gd(spec: NetworkSpec, data: Dataset, steps: int, lr: float,
             seed: int | np.random.Generator | None = 0,
             init: Theta | None = None,
             record_every: int = 50) -> TrainResult:
    """Run ``steps`` full-batch gradient descent steps from a seeded init."""
    theta = init if init is not None else random_theta(spec, seed)
    history: list[float] = []
    ws = [w.copy() for w in theta.weights]
    bs = [b.copy() for b in theta.biases]
    current = Theta(tuple(ws), tuple(bs))
    for step in range(steps):
        with np.errstate(over="ignore", invalid="ignore"):
            dWs, dbs = gradients(spec, current, data)
            ws = [w - lr * dw for w, dw in zip(ws, dWs)]
            bs = [b - lr * db for b, db in zip(bs, dbs)]
        if not all(np.all(np.isfinite(w)) for w in ws) or \
           not all(np.all(np.isfinite(b)) for b in bs):
            raise TrainingDiverged(f"non-finite parameters at step {step}; reduce the learning rate")
        current = Theta(tuple(ws), tuple(bs))
        if step % record_every == 0:
            value = output_loss(spec.loss, forward(spec, current, data.X)[-1], data.Y)
            if not np.isfinite(value):
                raise TrainingDiverged(f"loss became {value} at step {step}; reduce the learning rate")
            history.append(value)
    final = output_loss(spec.loss, forward(spec, current, data.X)[-1], data.Y)
    if not np.isfinite(final):
        raise TrainingDiverged("final loss is not finite; reduce the learning rate")
    return TrainResult(theta=current, final_loss=float(final), losses=tuple(history))
