"""Width-N two-layer instances with provably disconnected global minima.

At hidden width equal to the sample count, a two-layer network that
fits its data exactly pins the square feature matrix over any sample
set with independent target rows to full rank.  Exchanging two hidden
neurons preserves the loss but flips the sign of that determinant, and
the invertible matrices of each sign form separate connected
components, so no continuous curve of global minima can join the two
points.  The certificate records exactly those facts; the barrier scan
is its empirical companion and never a proof.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDeterminant, PreconditionError, RankNotRestored
from .linalg import det_sign, numeric_rank
from .network import (Dataset, LeakyReLU, NetworkSpec, SquareLoss, Theta,
                      forward, loss)
from .paths import ParamPath, linear_segment
from .subnet import _homotopy_knots
from .verify import dump_json  # noqa: F401

__all__ = [
    "width_n_spec",
    "build_width_n_instance",
    "permute_neurons",
    "DisconnectionCertificate",
    "certify_disconnection",
    "barrier_scan",
    "embed_extra_neuron",
]

GLOBAL_MIN_TOL = 1e-10


def width_n_spec(N: int, n0: int, slope: float = 0.5) -> NetworkSpec:
    """Two-layer spec with hidden and output width both N, square loss."""
    return NetworkSpec((n0, N, N), LeakyReLU(slope), SquareLoss())


def build_width_n_instance(N: int, n0: int,
                           seed: int | np.random.Generator | None = 0,
                           slope: float = 0.5,
                           max_retries: int = 50) -> tuple[Dataset, Theta]:
    """Instance whose global minima are certifiably disconnected.

    Draws inputs with distinct rows, first-layer weights until the
    feature matrix has full rank N, and an invertible readout; the
    targets are defined as the network output itself, so the returned
    point fits the data exactly and the global minimum value is zero.
    With output width N and invertible readout the target rows are
    independent, which is the other certificate ingredient.
    """
    if N < 2 or n0 < 1:
        raise PreconditionError("need N >= 2 samples and a positive input width")
    rng = np.random.default_rng(seed)
    spec = width_n_spec(N, n0, slope)
    X = None
    for _ in range(max_retries):
        cand = rng.standard_normal((N, n0))
        if numeric_rank(cand).rank == min(N, n0) and \
                np.min([np.max(np.abs(cand[i] - cand[j]))
                        for i in range(N) for j in range(i + 1, N)]) > 1e-6:
            X = cand
            break
    if X is None:
        raise RankNotRestored("could not draw inputs with distinct rows")
    for _ in range(max_retries):
        W1 = rng.standard_normal((n0, N))
        b1 = rng.standard_normal(N)
        F1 = spec.activation(X @ W1 + b1)
        if numeric_rank(F1).rank == N:
            break
    else:
        raise RankNotRestored("could not reach full feature rank")
    for _ in range(max_retries):
        W2 = rng.standard_normal((N, N))
        if det_sign(W2) != 0:
            break
    else:
        raise RankNotRestored("could not draw an invertible readout")
    Y = F1 @ W2
    theta = Theta((W1, W2), (b1,))
    return Dataset(X, Y), theta


def permute_neurons(theta: Theta, j: int, k: int) -> Theta:
    """Exchange two first-hidden-layer neurons.

    Swaps the incoming weight columns and bias entries j and k and the
    matching outgoing rows; the network function is unchanged exactly.
    """
    n1 = theta.weights[0].shape[1]
    if not (0 <= j < n1 and 0 <= k < n1) or j == k:
        raise PreconditionError(f"need two distinct neuron indices below {n1}")
    W1 = theta.weights[0].copy()
    b1 = theta.biases[0].copy()
    W2 = theta.weights[1].copy()
    W1[:, [j, k]] = W1[:, [k, j]]
    b1[[j, k]] = b1[[k, j]]
    W2[[j, k], :] = W2[[k, j], :]
    return Theta((W1, W2) + theta.weights[2:], (b1,) + theta.biases[1:])


@dataclass(frozen=True)
class DisconnectionCertificate:
    """Machine-checkable evidence that two global minima are disconnected.

    Valid iff the two determinant signs are opposite and nonzero, the
    selected target rows are independent, and both points sit at the
    global minimum value.  Any loss-zero path between the points would
    keep the selected feature submatrix invertible, hence keep its
    determinant sign, which the endpoint signs contradict.
    """

    index_set: tuple[int, ...]
    det_sign_theta: int
    det_sign_theta_prime: int
    loss_theta: float
    loss_theta_prime: float
    y_rank: int

    @property
    def valid(self) -> bool:
        return (self.det_sign_theta * self.det_sign_theta_prime == -1
                and self.y_rank == len(self.index_set)
                and self.loss_theta <= GLOBAL_MIN_TOL
                and self.loss_theta_prime <= GLOBAL_MIN_TOL)

    def to_json_dict(self) -> dict:
        return {
            "index_set": list(self.index_set),
            "det_sign_theta": self.det_sign_theta,
            "det_sign_theta_prime": self.det_sign_theta_prime,
            "loss_theta": self.loss_theta,
            "loss_theta_prime": self.loss_theta_prime,
            "y_rank": self.y_rank,
            "valid": self.valid,
        }


def instance_hash(data: Dataset, theta: Theta) -> str:
    h = hashlib.sha256()
    for arr in [data.X, data.Y] + theta.blocks():
        h.update(np.ascontiguousarray(arr).tobytes())
    return h.hexdigest()[:16]


def certify_disconnection(spec: NetworkSpec, data: Dataset, theta: Theta,
                          theta_prime: Theta,
                          index_set: list[int] | None = None) -> DisconnectionCertificate:
    """Certificate for a pair of exact global minima.

    ``index_set`` selects as many samples as there are hidden neurons
    (all samples by default).  Raises DegenerateDeterminant when either
    feature submatrix is numerically singular, in which case the caller
    should redraw the instance.
    """
    n1 = spec.widths[1]
    I = list(range(data.n_samples)) if index_set is None else list(index_set)
    if len(I) != n1:
        raise PreconditionError(f"index set must pick exactly {n1} samples")
    la = loss(spec, theta, data)
    lb = loss(spec, theta_prime, data)
    if la > GLOBAL_MIN_TOL or lb > GLOBAL_MIN_TOL:
        raise PreconditionError("both points must be global minima (loss at most 1e-10)")
    Fa = forward(spec, theta, data.X)[1][I, :]
    Fb = forward(spec, theta_prime, data.X)[1][I, :]
    sa, sb = det_sign(Fa), det_sign(Fb)
    if sa == 0 or sb == 0:
        raise DegenerateDeterminant("feature submatrix is numerically singular; redraw")
    y_rank = numeric_rank(data.Y[I, :]).rank
    return DisconnectionCertificate(tuple(I), sa, sb, float(la), float(lb), y_rank)


def _line_max_loss(spec, data, a: Theta, b: Theta, n_samples: int) -> float:
    worst = -np.inf
    for lam in np.linspace(0.0, 1.0, n_samples):
        from .network import lerp_theta
        worst = max(worst, loss(spec, lerp_theta(a, b, float(lam)), data))
    return worst


def barrier_scan(spec: NetworkSpec, data: Dataset, theta: Theta,
                 theta_prime: Theta,
                 strategies: tuple[str, ...] = ("line", "midpoint-resolve", "optimized"),
                 n_samples: int = 512,
                 rng: np.random.Generator | int | None = 0) -> float:
    """Empirical barrier between two equal-loss points.

    Evaluates the maximum loss along each candidate path family and
    returns the smallest excess over the endpoint loss.  Strictly
    positive values are consistent with disconnection; this is evidence,
    not proof.
    """
    la = loss(spec, theta, data)
    lb = loss(spec, theta_prime, data)
    if abs(la - lb) > 1e-9 * max(1.0, abs(la)):
        raise PreconditionError("barrier scan expects endpoints at equal loss")
    if theta.equal(theta_prime):
        return 0.0
    rng = np.random.default_rng(rng)
    base = max(la, lb)
    best = np.inf
    for strategy in strategies:
        if strategy == "line":
            worst = _line_max_loss(spec, data, theta, theta_prime, n_samples)
        elif strategy == "midpoint-resolve":
            from .network import lerp_theta
            mid = lerp_theta(theta, theta_prime, 0.5)
            F1 = forward(spec, mid, data.X)[1]
            W2, *_ = np.linalg.lstsq(F1, data.Y, rcond=None)
            mid = mid.replace(2, W=W2)
            half = n_samples // 2 + 1
            worst = max(_line_max_loss(spec, data, theta, mid, half),
                        _line_max_loss(spec, data, mid, theta_prime, half))
        elif strategy == "optimized":
            chain, worst = _homotopy_knots(spec, data, theta, theta_prime, base,
                                           rng, n_knots=4, iters=120, samples=9)
            path = ParamPath(spec, tuple(
                linear_segment(chain[i], chain[i + 1], "homotopy-knot-line", False)
                for i in range(len(chain) - 1)))
            per = max(2, n_samples // (4 * len(path)))
            worst = max(loss(spec, th, data) for _, _, th in path.sample(per))
        else:
            raise PreconditionError(f"unknown barrier strategy {strategy!r}")
        best = min(best, worst - base)
    return float(max(best, 0.0))


def embed_extra_neuron(spec: NetworkSpec, theta: Theta,
                       rng: np.random.Generator | int | None = 0) -> tuple[NetworkSpec, Theta]:
    """Widen the first hidden layer by one neuron with zero outgoing weights.

    The added neuron receives random incoming weights but contributes
    nothing to the output, so the network function and loss are exactly
    unchanged while the width condition for sublevel connection becomes
    satisfiable.
    """
    rng = np.random.default_rng(rng)
    n0, n1 = theta.weights[0].shape
    wide = NetworkSpec((spec.widths[0], n1 + 1) + spec.widths[2:],
                       spec.activation, spec.loss)
    W1 = np.hstack([theta.weights[0], rng.standard_normal((n0, 1))])
    b1 = np.concatenate([theta.biases[0], rng.standard_normal(1)])
    W2 = np.vstack([theta.weights[1], np.zeros((1, theta.weights[1].shape[1]))])
    return wide, Theta((W1, W2) + theta.weights[2:], (b1,) + theta.biases[1:])
