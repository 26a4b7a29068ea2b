"""Network architecture, parameters, feature maps and training losses.

An L-layer network with widths (n_0, ..., n_L) maps an N x n_0 data
matrix through L-1 activated affine layers followed by a purely linear
output layer.  The output layer carries no bias.  All values are plain
float64 numpy arrays and every type here is immutable after
construction, so instances are safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .activations import Activation, LeakyReLU
from .errors import DimensionMismatch, PreconditionError

__all__ = [
    "NetworkSpec",
    "Theta",
    "Dataset",
    "LossKind",
    "SquareLoss",
    "CrossEntropy",
    "forward",
    "loss",
    "output_loss",
    "check_distinct_rows",
    "random_theta",
    "lerp_theta",
]


def _frozen(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=float)
    out.setflags(write=False)
    return out


class LossKind:
    """Training criterion, convex in the network output."""

    name: str = "loss"

    def value(self, yhat: np.ndarray, y: np.ndarray) -> float:
        raise NotImplementedError

    def gradient(self, yhat: np.ndarray, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class SquareLoss(LossKind):
    """Mean squared row error, (1/N) sum_i ||yhat_i - y_i||^2."""

    name = "square"

    def value(self, yhat, y):
        d = yhat - y
        return float(np.sum(d * d) / y.shape[0])

    def gradient(self, yhat, y):
        return 2.0 * (yhat - y) / y.shape[0]


@dataclass(frozen=True)
class CrossEntropy(LossKind):
    """Mean softmax cross-entropy; targets must be one-hot rows."""

    name = "cross_entropy"

    @staticmethod
    def check_targets(y: np.ndarray) -> None:
        one_hot = np.all((y == 0.0) | (y == 1.0)) and np.all(y.sum(axis=1) == 1.0)
        if not one_hot:
            raise PreconditionError("cross-entropy targets must be one-hot rows")

    def value(self, yhat, y):
        self.check_targets(y)
        m = yhat.max(axis=1, keepdims=True)
        lse = m[:, 0] + np.log(np.exp(yhat - m).sum(axis=1))
        picked = np.sum(yhat * y, axis=1)
        return float(np.mean(lse - picked))

    def gradient(self, yhat, y):
        self.check_targets(y)
        m = yhat.max(axis=1, keepdims=True)
        e = np.exp(yhat - m)
        p = e / e.sum(axis=1, keepdims=True)
        return (p - y) / y.shape[0]


_LOSSES = {"square": SquareLoss, "cross_entropy": CrossEntropy}


def loss_kind_by_name(name: str) -> LossKind:
    try:
        return _LOSSES[name]()
    except KeyError:
        raise PreconditionError(f"unknown loss {name!r}; known: {sorted(_LOSSES)}")


@dataclass(frozen=True)
class NetworkSpec:
    """Static architecture: layer widths, activation and loss."""

    widths: tuple[int, ...]
    activation: Activation = LeakyReLU(0.5)
    loss: LossKind = SquareLoss()

    def __post_init__(self):
        widths = tuple(int(w) for w in self.widths)
        if len(widths) < 2:
            raise PreconditionError("need at least an input and an output layer")
        if any(w < 1 for w in widths):
            raise PreconditionError("all widths must be >= 1")
        object.__setattr__(self, "widths", widths)

    @property
    def depth(self) -> int:
        return len(self.widths) - 1

    def subnet(self, from_layer: int) -> "NetworkSpec":
        """Spec of the tail network whose input is layer ``from_layer``."""
        if not (0 <= from_layer < self.depth):
            raise PreconditionError(f"no tail starting at layer {from_layer}")
        return NetworkSpec(self.widths[from_layer:], self.activation, self.loss)


@dataclass(frozen=True)
class Theta:
    """One point in parameter space.

    ``weights[i]`` is the (n_i x n_{i+1}) matrix of layer i+1 and
    ``biases[i]`` its bias; the final layer has no bias, so there is one
    bias fewer than weight matrices.  Arrays are copied and frozen.
    """

    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]

    def __post_init__(self):
        ws = tuple(_frozen(w) for w in self.weights)
        bs = tuple(_frozen(b) for b in self.biases)
        if len(bs) != len(ws) - 1:
            raise PreconditionError("expected one bias per hidden layer and none at the output")
        for i, w in enumerate(ws):
            if w.ndim != 2 or not np.all(np.isfinite(w)):
                raise DimensionMismatch(i + 1, "weight must be a finite 2-d matrix")
        for i, b in enumerate(bs):
            if b.ndim != 1 or not np.all(np.isfinite(b)):
                raise DimensionMismatch(i + 1, "bias must be a finite vector")
            if b.shape[0] != ws[i].shape[1]:
                raise DimensionMismatch(i + 1, f"bias length {b.shape[0]} != width {ws[i].shape[1]}")
        object.__setattr__(self, "weights", ws)
        object.__setattr__(self, "biases", bs)

    @property
    def depth(self) -> int:
        return len(self.weights)

    def validate_against(self, spec: NetworkSpec) -> None:
        if self.depth != spec.depth:
            raise DimensionMismatch(self.depth, f"theta has {self.depth} layers, spec {spec.depth}")
        for i, w in enumerate(self.weights):
            want = (spec.widths[i], spec.widths[i + 1])
            if w.shape != want:
                raise DimensionMismatch(i + 1, f"weight shape {w.shape}, expected {want}")

    def replace(self, layer: int, W: np.ndarray | None = None,
                b: np.ndarray | None = None) -> "Theta":
        """Copy with the 1-based ``layer``'s weight and/or bias swapped."""
        i = layer - 1
        ws = list(self.weights)
        bs = list(self.biases)
        if W is not None:
            ws[i] = W
        if b is not None:
            if i >= len(bs):
                raise DimensionMismatch(layer, "output layer has no bias")
            bs[i] = b
        return Theta(tuple(ws), tuple(bs))

    def blocks(self) -> list[np.ndarray]:
        out: list[np.ndarray] = []
        for i, w in enumerate(self.weights):
            out.append(w)
            if i < len(self.biases):
                out.append(self.biases[i])
        return out

    def norm(self) -> float:
        return float(np.sqrt(sum(np.sum(b * b) for b in self.blocks())))

    def distance(self, other: "Theta") -> float:
        return float(np.sqrt(sum(np.sum((a - b) ** 2)
                                 for a, b in zip(self.blocks(), other.blocks()))))

    def max_abs_difference(self, other: "Theta") -> float:
        return max(float(np.max(np.abs(a - b))) if a.size else 0.0
                   for a, b in zip(self.blocks(), other.blocks()))

    def equal(self, other: "Theta") -> bool:
        return all(np.array_equal(a, b) for a, b in zip(self.blocks(), other.blocks()))


def lerp_theta(a: Theta, b: Theta, lam: float) -> Theta:
    ws = tuple((1.0 - lam) * wa + lam * wb for wa, wb in zip(a.weights, b.weights))
    bs = tuple((1.0 - lam) * ba + lam * bb for ba, bb in zip(a.biases, b.biases))
    return Theta(ws, bs)


def check_distinct_rows(X: np.ndarray, tol: float = 1e-9) -> bool:
    """True iff every pair of rows differs by more than ``tol`` in sup norm."""
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    for i in range(n):
        gaps = np.max(np.abs(X[i + 1:] - X[i]), axis=1) if i + 1 < n else np.array([])
        if gaps.size and np.min(gaps) <= tol:
            return False
    return True


@dataclass(frozen=True)
class Dataset:
    """Training pairs: inputs X (N x n_0) and targets Y (N x n_L).

    Rows of X must be pairwise distinct; duplicated inputs break the
    rank restoration guarantees and are rejected here.
    """

    X: np.ndarray
    Y: np.ndarray
    row_tol: float = 1e-9

    def __post_init__(self):
        X = _frozen(self.X)
        Y = _frozen(self.Y)
        if X.ndim != 2 or Y.ndim != 2 or X.shape[0] != Y.shape[0] or X.shape[0] < 1:
            raise PreconditionError("X and Y must be 2-d with the same positive row count")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
            raise PreconditionError("data must be finite")
        if not check_distinct_rows(X, self.row_tol):
            raise PreconditionError("X must have pairwise distinct rows")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)

    @property
    def n_samples(self) -> int:
        return self.X.shape[0]


def forward(spec: NetworkSpec, theta: Theta, X: np.ndarray) -> list[np.ndarray]:
    """All feature matrices (F_0, ..., F_L) over the rows of X.

    F_0 is X itself, hidden layers apply the activation to an affine
    image of the previous features, and the last layer is linear.
    """
    theta.validate_against(spec)
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != spec.widths[0]:
        raise DimensionMismatch(0, f"data width {X.shape[-1]}, expected {spec.widths[0]}")
    feats = [X]
    F = X
    for i, W in enumerate(theta.weights):
        H = F @ W
        if i < len(theta.biases):
            F = spec.activation(H + theta.biases[i])
        else:
            F = H
        feats.append(F)
    return feats


def output_loss(kind: LossKind, yhat: np.ndarray, y: np.ndarray) -> float:
    """Loss as a function of the network output only."""
    if yhat.shape != y.shape:
        raise PreconditionError(f"output shape {yhat.shape} != target shape {y.shape}")
    return kind.value(np.asarray(yhat, dtype=float), np.asarray(y, dtype=float))


def loss(spec: NetworkSpec, theta: Theta, data: Dataset) -> float:
    """Training objective at ``theta``."""
    return output_loss(spec.loss, forward(spec, theta, data.X)[-1], data.Y)


def random_theta(spec: NetworkSpec, rng: np.random.Generator | int | None = None,
                 scale: float = 1.0) -> Theta:
    """Gaussian init with 1/sqrt(fan-in) weight scaling."""
    rng = np.random.default_rng(rng)
    ws, bs = [], []
    for i in range(spec.depth):
        fan_in = spec.widths[i]
        ws.append(rng.standard_normal((fan_in, spec.widths[i + 1])) * scale / np.sqrt(fan_in))
        if i < spec.depth - 1:
            bs.append(rng.standard_normal(spec.widths[i + 1]) * 0.1 * scale)
    return Theta(tuple(ws), tuple(bs))
