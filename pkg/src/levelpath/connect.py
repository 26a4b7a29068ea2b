"""End-to-end sublevel-set path construction.

Given two parameter points inside the alpha-sublevel set of a network
whose first hidden layer is wider than the sample count (and whose
later hidden widths strictly decrease), builds one continuous path
between them along which the sampled loss never exceeds alpha:

1. restore full first-layer feature rank at both endpoints along
   output-preserving paths (the second path is traversed backwards at
   the very end);
2. relabel the second endpoint's first-layer neurons so its leading
   feature columns are independent, again along an output-preserving
   path expressed in original coordinates;
3. align the first layer of the moving point with the relabeled target;
4. connect the tail networks over the now-shared features, which act
   as the tail's training data.
"""

from __future__ import annotations

import numpy as np

from .engine import (align_first_layer, first_layer_permutation_path,
                     restore_full_rank)
from .errors import PreconditionError
from .linalg import independent_columns
from .network import Dataset, NetworkSpec, Theta, forward, loss
from .paths import ParamPath, Segment, constant_segment
from .subnet import subnet_connect
from .verify import verify_path  # noqa: F401  (re-exported for callers)

__all__ = ["connect_sublevel"]


def _tail_theta(theta: Theta) -> Theta:
    return Theta(theta.weights[1:], theta.biases[1:])


def _lift_tail_segment(seg: Segment, W1: np.ndarray, b1: np.ndarray) -> Segment:
    """Embed a tail segment into the full network with layer 1 frozen."""

    def grow(th: Theta) -> Theta:
        return Theta((W1,) + th.weights, (b1,) + th.biases)

    return Segment(grow(seg.start), grow(seg.end), seg.kind, seg.output_preserving,
                   curve=lambda lam: grow(seg.at(lam)))


def connect_sublevel(spec: NetworkSpec, data: Dataset, theta: Theta,
                     theta_prime: Theta, alpha: float,
                     rng: np.random.Generator | int | None = None,
                     verify_tol: float = 1e-6) -> ParamPath:
    """Path from ``theta`` to ``theta_prime`` with loss at most ``alpha``.

    Preconditions: depth at least 2, first hidden width at least N+1,
    hidden widths strictly decreasing from the second hidden layer on,
    and both endpoint losses at most ``alpha``.  The returned path runs
    exactly from ``theta`` to ``theta_prime`` and keeps sampled losses
    within a fraction of ``verify_tol`` above ``alpha``; feed it to
    ``verify_path`` for the numerical certificate.
    """
    theta.validate_against(spec)
    theta_prime.validate_against(spec)
    if spec.depth < 2:
        raise PreconditionError("sublevel connection needs at least two layers")
    N = data.n_samples
    if spec.widths[1] < N + 1:
        raise PreconditionError(
            f"first hidden width must be at least N+1 = {N + 1}, got {spec.widths[1]}")
    if any(spec.widths[i] <= spec.widths[i + 1] for i in range(2, spec.depth)):
        raise PreconditionError("hidden widths after the first must strictly decrease")
    for name, point in (("theta", theta), ("theta_prime", theta_prime)):
        value = loss(spec, point, data)
        if value > alpha:
            raise PreconditionError(
                f"loss at {name} is {value:.6g}, above the requested bound {alpha:.6g}")
    rng = np.random.default_rng(rng)

    if theta.equal(theta_prime):
        return ParamPath(spec, (constant_segment(theta),))

    restore_a = restore_full_rank(spec, data, theta, rng)
    restore_b = restore_full_rank(spec, data, theta_prime, rng)
    theta_a = restore_a.path.end
    theta_b = restore_b.path.end

    # put an independent feature-column set in the leading slots of the
    # target, via a continuous relabeling in original coordinates
    F1_b = forward(spec, theta_b, data.X)[1]
    lead = sorted(independent_columns(F1_b))
    order = lead + sorted(set(range(spec.widths[1])) - set(lead))
    relabel = first_layer_permutation_path(spec, data, theta_b, order)
    theta_target = relabel.end

    align = align_first_layer(spec, data, theta_a, theta_target)
    theta_aligned = align.end

    F1 = forward(spec, theta_aligned, data.X)[1]
    sub_spec = spec.subnet(1)
    sub_data = Dataset(F1, data.Y, row_tol=0.0)
    sub_path = subnet_connect(sub_spec, sub_data, _tail_theta(theta_aligned),
                              _tail_theta(theta_target), alpha, rng,
                              verify_tol=verify_tol)
    W1, b1 = theta_aligned.weights[0], theta_aligned.biases[0]
    lifted = ParamPath(spec, tuple(_lift_tail_segment(s, W1, b1)
                                   for s in sub_path.segments))

    full = restore_a.path.concat(align).concat(lifted)
    full = full.concat(relabel.reversed()).concat(restore_b.path.reversed())
    if not (full.start.equal(theta) and full.end.equal(theta_prime)):
        raise PreconditionError("constructed path does not join the requested endpoints")
    return full
