"""Output-preserving engine moves on the first two weight layers.

Three constructions live here, all of which keep the network output
constant at every point of the returned path:

* ``restore_full_rank`` drives the first-layer feature matrix to
  numeric rank N by silencing the neurons of span-dependent feature
  columns and redrawing their incoming weights.
* ``align_first_layer`` walks the first layer of one parameter point
  onto the first layer of another, one neuron at a time, using the
  zero-row and neuron-transfer curves.
* ``first_layer_permutation_path`` physically relabels first-layer
  neurons along a continuous path, which realizes "reorder the columns
  without loss of generality" steps in original coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NoDependentColumn, PreconditionError, RankNotRestored
from .linalg import (FEAS_TOL, RankDecision, independent_columns, numeric_rank,
                     span_coefficients)
from .network import Dataset, NetworkSpec, Theta, forward
from .paths import (ParamPath, Segment, constant_segment, curve_segment,
                    linear_segment, transfer_neuron, zero_dependent_rows)

__all__ = ["RestoreResult", "restore_full_rank", "align_first_layer",
           "first_layer_permutation_path"]


def _check_engine_inputs(spec: NetworkSpec, data: Dataset, theta: Theta) -> None:
    if spec.depth < 2:
        raise PreconditionError("path constructions need at least two layers")
    theta.validate_against(spec)
    if data.X.shape[1] != spec.widths[0]:
        raise PreconditionError("data width does not match the input layer")


class _PathBuilder:
    """Collects segments, dropping constant ones, and tracks the tip."""

    def __init__(self, spec: NetworkSpec, start: Theta):
        self.spec = spec
        self.tip = start
        self.segments: list[Segment] = []

    def push(self, seg: Segment) -> None:
        if not seg.start.equal(self.tip):
            raise PreconditionError("segment does not chain onto the current tip")
        if not seg.start.equal(seg.end):
            self.segments.append(seg)
        self.tip = seg.end

    def path(self) -> ParamPath:
        segs = self.segments or [constant_segment(self.tip)]
        return ParamPath(self.spec, tuple(segs))


@dataclass(frozen=True)
class RestoreResult:
    path: ParamPath
    achieved_rank: RankDecision


def restore_full_rank(spec: NetworkSpec, data: Dataset, theta: Theta,
                      rng: np.random.Generator | int | None = None,
                      max_retries: int = 50,
                      feas_tol: float = FEAS_TOL) -> RestoreResult:
    """Path from ``theta`` to a point whose first-layer features have rank N.

    Requires first-layer width >= N.  The construction zeroes the
    outgoing rows of every feature column outside a maximal independent
    set (compensating on the spanning rows, so the product into layer 2
    is untouched), then redraws the incoming weights and biases of those
    silenced neurons from a Gaussian.  A redraw is only committed once
    the resulting feature matrix has numeric rank N; fresh draws are
    attempted up to ``max_retries`` times.
    """
    _check_engine_inputs(spec, data, theta)
    N = data.n_samples
    n1 = spec.widths[1]
    if n1 < N:
        raise PreconditionError(f"first layer width {n1} < {N} samples; rank N is unreachable")
    rng = np.random.default_rng(rng)
    builder = _PathBuilder(spec, theta)

    F1 = forward(spec, theta, data.X)[1]
    decision = numeric_rank(F1)
    if decision.rank == N:
        return RestoreResult(builder.path(), decision)

    I = independent_columns(F1)
    Ibar = sorted(set(range(n1)) - set(I))
    E = span_coefficients(F1, I, Ibar, feas_tol)
    builder.push(curve_segment(builder.tip, 2,
                               zero_dependent_rows(F1, builder.tip.weights[1], I, E, feas_tol),
                               kind="zero-dependent-rows"))

    W1, b1 = builder.tip.weights[0], builder.tip.biases[0]
    for _ in range(max_retries):
        W1_new = W1.copy()
        b1_new = b1.copy()
        draws = rng.standard_normal((spec.widths[0], len(Ibar)))
        # anchor each redrawn neuron's kink hyperplane near a random
        # sample: a plain Gaussian bias leaves whole sample gaps almost
        # never crossed, which can cap the feature rank below N
        anchors = data.X[rng.integers(0, N, len(Ibar)), :]
        proj = data.X @ draws
        jitter = 0.5 * proj.std(axis=0) + 1e-6
        b1_new[Ibar] = -np.einsum("ij,ji->i", anchors, draws) \
            + jitter * rng.standard_normal(len(Ibar))
        W1_new[:, Ibar] = draws
        F1_new = spec.activation(data.X @ W1_new + b1_new)
        decision = numeric_rank(F1_new)
        if decision.rank == N:
            builder.push(linear_segment(builder.tip,
                                        builder.tip.replace(1, W=W1_new, b=b1_new),
                                        kind="redraw-silenced-inputs",
                                        output_preserving=True))
            return RestoreResult(builder.path(), decision)
    raise RankNotRestored(f"rank {N} not reached after {max_retries} redraws")


def _smallest_dependent_column(F: np.ndarray, k: int, feas_tol: float) -> tuple[int, np.ndarray]:
    """Smallest j >= k with column j in the span of columns 0..j-1.

    Returns the index and the span coefficients over those columns.
    Always exists when the first k columns are independent and the
    matrix has more columns than rows.
    """
    scale = max(float(np.linalg.norm(F)), 1e-30)
    for j in range(k, F.shape[1]):
        if j == 0:
            if float(np.linalg.norm(F[:, 0])) <= feas_tol * scale:
                return 0, np.zeros(0)
            continue
        coef, *_ = np.linalg.lstsq(F[:, :j], F[:, j], rcond=None)
        residual = float(np.linalg.norm(F[:, j] - F[:, :j] @ coef))
        if residual <= feas_tol * scale:
            return j, coef
    raise NoDependentColumn(
        "no feature column lies in the span of its predecessors; "
        "rerun rank restoration with a looser tolerance")


def _zero_row_segment(theta: Theta, F1: np.ndarray, j: int, coef: np.ndarray,
                      feas_tol: float) -> Segment:
    """Zero row j of the second weight layer via the span curve."""
    n1 = F1.shape[1]
    I = [p for p in range(n1) if p != j]
    E = np.zeros((n1 - 1, 1))
    E[:j, 0] = coef
    curve = zero_dependent_rows(F1, theta.weights[1], I, E, feas_tol)
    return curve_segment(theta, 2, curve, kind="zero-dependent-rows")


def _set_first_layer_column(theta: Theta, j: int, col: np.ndarray, bias: float,
                            kind: str) -> Segment:
    """Straight segment moving one first-layer neuron's incoming weights.

    Only valid while the neuron's outgoing row is zero; the caller
    guarantees that, which is what makes the segment output-preserving.
    """
    W1 = theta.weights[0].copy()
    b1 = theta.biases[0].copy()
    W1[:, j] = col
    b1[j] = bias
    return linear_segment(theta, theta.replace(1, W=W1, b=b1), kind, output_preserving=True)


def align_first_layer(spec: NetworkSpec, data: Dataset, theta: Theta,
                      theta_prime: Theta,
                      feas_tol: float = FEAS_TOL) -> ParamPath:
    """Output-preserving path ending with the first layer of ``theta_prime``.

    Preconditions: first-layer width strictly above the sample count,
    numeric rank N features at ``theta``, and the first N feature
    columns of ``theta_prime`` independent (the caller establishes this
    by rank restoration plus neuron reordering).

    The induction aligns one column of the stacked first-layer matrix
    [W1; b1^T] at a time.  For column k it locates the smallest j >= k
    whose feature column is spanned by its predecessors, silences that
    neuron, turns it into a twin of neuron k, hands neuron k's outgoing
    row over to the twin, and finally moves the freed column k straight
    to its target value.  Every leg keeps the network output constant;
    the final first layer equals the target bit for bit.
    """
    _check_engine_inputs(spec, data, theta)
    theta_prime.validate_against(spec)
    N = data.n_samples
    n1 = spec.widths[1]
    if n1 < N + 1:
        raise PreconditionError(f"first layer width {n1} must exceed the sample count {N}")

    F1_target = forward(spec, theta_prime, data.X)[1]
    if numeric_rank(F1_target[:, :min(N, n1)]).rank < min(N, n1):
        raise PreconditionError("the first N feature columns of the target must be independent")

    target_W1 = theta_prime.weights[0]
    target_b1 = theta_prime.biases[0]
    builder = _PathBuilder(spec, theta)

    for k in range(n1):
        cur = builder.tip
        if np.array_equal(cur.weights[0][:, k], target_W1[:, k]) and \
           cur.biases[0][k] == target_b1[k]:
            continue
        F1 = forward(spec, cur, data.X)[1]
        j, coef = _smallest_dependent_column(F1, k, feas_tol)
        if np.any(builder.tip.weights[1][j, :] != 0.0):
            builder.push(_zero_row_segment(builder.tip, F1, j, coef, feas_tol))
        if j != k:
            cur = builder.tip
            builder.push(_set_first_layer_column(
                cur, j, cur.weights[0][:, k], float(cur.biases[0][k]),
                kind="duplicate-neuron"))
            F1 = forward(spec, builder.tip, data.X)[1]
            builder.push(curve_segment(builder.tip, 2,
                                       transfer_neuron(F1, builder.tip.weights[1], j=j, k=k),
                                       kind="neuron-transfer"))
        builder.push(_set_first_layer_column(
            builder.tip, k, target_W1[:, k], float(target_b1[k]),
            kind="move-column-to-target"))

    final = builder.tip
    if not (np.array_equal(final.weights[0], target_W1)
            and np.array_equal(final.biases[0], target_b1)):
        raise PreconditionError("alignment did not reach the target first layer")
    return builder.path()


def first_layer_permutation_path(spec: NetworkSpec, data: Dataset, theta: Theta,
                                 order: list[int] | tuple[int, ...],
                                 feas_tol: float = FEAS_TOL) -> ParamPath:
    """Continuous output-preserving path that relabels first-layer neurons.

    ``order[s]`` names the neuron of ``theta`` that ends up in slot s:
    the final point has W1[:, s] = W1_old[:, order[s]], the matching
    bias entry, and W2[s, :] = W2_old[order[s], :].

    Needs one span-dependent feature column to serve as a movable blank
    slot, which exists whenever the first layer is wider than the
    feature rank (in particular whenever n1 > N).  Every neuron is
    ferried through the blank with a duplicate-column move followed by
    an outgoing-row transfer; both preserve the output exactly.
    """
    _check_engine_inputs(spec, data, theta)
    n1 = spec.widths[1]
    order = list(order)
    if sorted(order) != list(range(n1)):
        raise PreconditionError("order must be a permutation of the first-layer neurons")
    builder = _PathBuilder(spec, theta)
    if order == list(range(n1)):
        return builder.path()

    F1 = forward(spec, theta, data.X)[1]
    I_max = independent_columns(F1)
    spare = sorted(set(range(n1)) - set(I_max))
    if not spare:
        raise PreconditionError("no span-dependent feature column available as a blank slot")
    d0 = spare[0]

    # silence the blank's outgoing row; the compensation this writes into
    # the other rows travels with them and is undone by the mirrored
    # segment at the far end
    others = [p for p in range(n1) if p != d0]
    E0 = span_coefficients(F1, others, [d0], feas_tol)
    if np.any(theta.weights[1][d0, :] != 0.0):
        builder.push(curve_segment(theta, 2,
                                   zero_dependent_rows(F1, theta.weights[1], others, E0, feas_tol),
                                   kind="zero-dependent-rows"))

    saved_col = theta.weights[0][:, d0].copy()
    saved_bias = float(theta.biases[0][d0])

    dest = {content: slot for slot, content in enumerate(order)}
    pos = {c: c for c in range(n1) if c != d0}
    hole = d0
    f = dest[d0]

    def move(content: int, to_slot: int) -> None:
        nonlocal hole
        src = pos[content]
        cur = builder.tip
        builder.push(_set_first_layer_column(
            cur, to_slot, cur.weights[0][:, src], float(cur.biases[0][src]),
            kind="duplicate-neuron"))
        if np.any(builder.tip.weights[1][src, :] != 0.0):
            F_now = forward(spec, builder.tip, data.X)[1]
            builder.push(curve_segment(builder.tip, 2,
                                       transfer_neuron(F_now, builder.tip.weights[1],
                                                       j=to_slot, k=src),
                                       kind="neuron-transfer"))
        pos[content] = to_slot
        hole = src

    while any(pos[c] != dest[c] for c in pos):
        wanted = order[hole]
        if wanted != d0:
            move(wanted, hole)
        else:
            parked = next(c for c in pos if pos[c] != dest[c])
            move(parked, hole)
    if hole != f:
        raise PreconditionError("neuron relabeling finished with the blank misplaced")

    cur = builder.tip
    if not (np.array_equal(cur.weights[0][:, f], saved_col) and cur.biases[0][f] == saved_bias):
        builder.push(_set_first_layer_column(cur, f, saved_col, saved_bias,
                                             kind="restore-blank-column"))

    # mirrored silencing at the relabeled endpoint; traversed backwards it
    # restores the blank's outgoing row and removes the compensation
    end_theta = Theta(
        tuple([theta.weights[0][:, order], theta.weights[1][order, :]]
              + list(theta.weights[2:])),
        tuple([theta.biases[0][order]] + list(theta.biases[1:])),
    )
    if np.any(end_theta.weights[1][f, :] != 0.0):
        others_end = [s for s in range(n1) if s != f]
        E1 = np.zeros((n1 - 1, 1))
        for idx_p, p in enumerate(others):
            s = dest[p]
            E1[others_end.index(s), 0] = E0[idx_p, 0]
        F1_end = forward(spec, end_theta, data.X)[1]
        seg = curve_segment(end_theta, 2,
                            zero_dependent_rows(F1_end, end_theta.weights[1],
                                                others_end, E1, feas_tol),
                            kind="zero-dependent-rows").reversed()
        builder.push(seg)
    if not builder.tip.equal(end_theta):
        raise PreconditionError("neuron relabeling did not land on the permuted point")
    return builder.path()
