"""Connecting tail-network parameters under a loss bound.

The tail network sees the first-layer features as its training data.
Because those features have full row rank, the pre-activations of the
tail's first layer are freely assignable, and since the activation is a
surjective piecewise-linear bijection, so is the feature matrix itself.
That turns a depth-2 tail into a bilinear problem: output = U @ V with
a freely liftable factor U and the last weight matrix V.  Straight
lines in either factor give outputs affine in the path parameter, so
convexity of the loss bounds every such segment by its endpoint losses.

Regimes:

* R1, depth 1: one straight segment in the last weights.
* R2, depth 2: a re-aimed chain.  The last weights are interpolated in
  short steps; after each step the free factor is re-aimed at a fixed
  low-loss output by an exact right-solve, which restores margin before
  the next step.  Every segment's worst loss is attained at one of its
  endpoints, and all endpoint losses are checked during construction.
* R3, anything else: a numerical homotopy over movable knots, accepted
  only if the verifier passes.  Failure means "no path found", never a
  disproof.
"""

from __future__ import annotations

import numpy as np

from .errors import HomotopyFailed, PreconditionError
from .linalg import numeric_rank
from .network import Dataset, NetworkSpec, Theta, forward, loss, output_loss
from .paths import ParamPath, Segment, constant_segment, linear_segment
from .train import gradients

__all__ = ["subnet_connect"]

_SLACK = 1e-12


class _RegimeInfeasible(Exception):
    """Internal: exact regime construction failed, fall through to R3."""


def _aug(theta: Theta) -> np.ndarray:
    """Stacked first-layer parameters [W1; b1^T] of a tail point."""
    return np.vstack([theta.weights[0], theta.biases[0]])


def _theta_from_aug(theta: Theta, Wt: np.ndarray) -> Theta:
    return theta.replace(1, W=Wt[:-1, :], b=Wt[-1, :])


def _feature_line_segment(spec: NetworkSpec, start: Theta, Dt_pinv: np.ndarray,
                          F_from: np.ndarray, F_to: np.ndarray, kind: str) -> Segment:
    """Straight line in feature space, lifted back to first-layer weights.

    The realized feature path is the straight line from ``F_from`` to
    ``F_to``, so with the later layers frozen the output moves affinely
    and the loss along the segment is bounded by its endpoint losses.
    The lifted weight curve is piecewise affine: the activation inverse
    of an entrywise-affine matrix path.
    """
    act = spec.activation
    inv_from = act.inverse(F_from)
    Wt0 = _aug(start)

    def wt_at(lam: float) -> np.ndarray:
        F = (1.0 - lam) * F_from + lam * F_to
        return Wt0 + Dt_pinv @ (act.inverse(F) - inv_from)

    end = _theta_from_aug(start, wt_at(1.0))
    return Segment(start, end, kind, output_preserving=False,
                   curve=lambda lam: _theta_from_aug(start, wt_at(lam)))


def _descend_last_weights(spec: NetworkSpec, U: np.ndarray, V0: np.ndarray,
                          Y: np.ndarray, steps: int = 200) -> np.ndarray:
    """A lower point of the convex map V -> loss(U @ V).

    Square loss is solved exactly; otherwise plain gradient descent with
    halving steps, which is enough because only *some* improvement is
    needed, not the optimum.
    """
    kind = spec.loss
    if kind.name == "square":
        V, *_ = np.linalg.lstsq(U, Y, rcond=None)
        return V
    V = V0.copy()
    best = output_loss(kind, U @ V, Y)
    lr = 1.0 / max(1.0, float(np.linalg.norm(U, 2)) ** 2 / Y.shape[0])
    for _ in range(steps):
        G = kind.gradient(U @ V, Y)
        V_new = V - lr * (U.T @ G)
        value = output_loss(kind, U @ V_new, Y)
        if value <= best:
            V, best = V_new, value
        else:
            lr *= 0.5
            if lr < 1e-12:
                break
    return V


def _margin_target(spec: NetworkSpec, Y: np.ndarray, bound: float) -> np.ndarray:
    """An output matrix whose loss sits far below ``bound``.

    For square loss the targets themselves (loss zero).  For
    cross-entropy, scaled one-hot logits with the scale grown until the
    loss is at most half the bound.
    """
    if spec.loss.name == "square":
        return Y.copy()
    for c in (4.0, 8.0, 16.0, 32.0, 64.0, 128.0):
        T = c * Y
        if output_loss(spec.loss, T, Y) <= bound / 2.0:
            return T
    raise _RegimeInfeasible("no comfortable logit target below the bound")


def _reaim(Z: np.ndarray, T: np.ndarray) -> np.ndarray:
    """Minimum-norm U with U @ Z = T; Z must have full column rank."""
    Ut, *_ = np.linalg.lstsq(Z.T, T.T, rcond=None)
    return Ut.T


def _connect_depth2(spec: NetworkSpec, data: Dataset, ta: Theta, tb: Theta,
                    alpha: float, link_tol: float,
                    max_links: int = 1024) -> ParamPath:
    """Exact-bound chain for a depth-2 tail (see module docstring)."""
    N = data.n_samples
    n3 = spec.widths[2]
    act = spec.activation
    kind = spec.loss
    Dt = np.hstack([data.X, np.ones((N, 1))])
    if numeric_rank(Dt).rank < N:
        raise _RegimeInfeasible("tail data is not full row rank")
    Dt_pinv = np.linalg.pinv(Dt)
    tol = alpha + link_tol

    U0 = act(Dt @ _aug(ta))
    V0 = ta.weights[1]

    # a full-column-rank last weight matrix inside the sublevel set of
    # V -> loss(U0 @ V); the straight segment to it stays under alpha by
    # convexity
    V_better = _descend_last_weights(spec, U0, V0, data.Y)
    V_hat = None
    for t in (1.0, 0.75, 0.5, 0.25, 0.125, 0.0):
        cand = (1.0 - t) * V0 + t * V_better
        if output_loss(kind, U0 @ cand, data.Y) <= tol and numeric_rank(cand).rank == n3:
            V_hat = cand
            break
    if V_hat is None:
        raise _RegimeInfeasible("no full-rank last weights inside the sublevel set")

    T_star = _margin_target(spec, data.Y, tol)
    U_target_final = act(Dt @ _aug(tb))

    m = 8
    while m <= max_links:
        path = _try_chain(spec, data, ta, tb, tol, Dt, Dt_pinv,
                          V_hat, T_star, U_target_final, m)
        if path is not None:
            return path
        m *= 2
    raise _RegimeInfeasible(f"chain link losses stayed above the bound up to {max_links} links")


def _interp_schedule(V_hat: np.ndarray, V1: np.ndarray, m: int,
                     n_cols: int) -> list[np.ndarray] | None:
    """Interpolated last-weight knots, all but the final one full rank."""
    knots = []
    for i in range(m + 1):
        s = i / m
        Z = (1.0 - s) * V_hat + s * V1
        if i < m and numeric_rank(Z).rank < n_cols:
            fixed = None
            if 0 < i:
                for ds in (0.37 / m, -0.37 / m, 0.53 / m):
                    s2 = s + ds
                    if 0.0 < s2 < 1.0:
                        Z2 = (1.0 - s2) * V_hat + s2 * V1
                        if numeric_rank(Z2).rank == n_cols:
                            fixed = Z2
                            break
            if fixed is None:
                return None
            Z = fixed
        knots.append(Z)
    return knots


def _try_chain(spec, data, ta, tb, tol, Dt, Dt_pinv, V_hat, T_star,
               U_target_final, m) -> ParamPath | None:
    act = spec.activation
    kind = spec.loss
    n3 = spec.widths[2]
    knots = _interp_schedule(V_hat, tb.weights[1], m, n3)
    if knots is None:
        return None

    segments: list[Segment] = []
    tip = ta

    def push(seg: Segment) -> None:
        nonlocal tip
        if not seg.start.equal(seg.end):
            segments.append(seg)
        tip = seg.end

    if not np.array_equal(V_hat, ta.weights[1]):
        push(linear_segment(tip, tip.replace(2, W=V_hat),
                            kind="last-weights-line", output_preserving=False))

    for i in range(m):
        F_now = act(Dt @ _aug(tip))
        U_i = _reaim(knots[i], T_star)
        push(_feature_line_segment(spec, tip, Dt_pinv, F_now, U_i, kind="feature-line"))
        F_real = act(Dt @ _aug(tip))
        if output_loss(kind, F_real @ knots[i], data.Y) > tol:
            return None
        if output_loss(kind, F_real @ knots[i + 1], data.Y) > tol:
            return None
        push(linear_segment(tip, tip.replace(2, W=knots[i + 1]),
                            kind="last-weights-line", output_preserving=False))

    F_now = act(Dt @ _aug(tip))
    push(_feature_line_segment(spec, tip, Dt_pinv, F_now, U_target_final,
                               kind="feature-line"))
    # land exactly on the requested endpoint: the straight first-layer
    # segment below stays inside the fiber of one pre-activation matrix,
    # so the output is constant along it
    push(Segment(tip, tb, kind="fiber-fix", output_preserving=False))
    return ParamPath(spec, tuple(segments)) if segments else ParamPath(
        spec, (constant_segment(tip),))


def _homotopy_knots(spec: NetworkSpec, data: Dataset, ta: Theta, tb: Theta,
                    alpha: float, rng: np.random.Generator,
                    n_knots: int = 6, iters: int = 300,
                    samples: int = 9) -> tuple[list[Theta], float]:
    """Projected descent on the interior knots of a piecewise-linear path.

    Minimizes the squared excess of sampled losses over a target just
    below ``alpha``; returns the best knot chain seen and its maximum
    sampled loss.
    """
    ws = [[(1 - t) * wa + t * wb for wa, wb in zip(ta.weights, tb.weights)]
          for t in np.linspace(0, 1, n_knots + 2)]
    bs = [[(1 - t) * ba + t * bb for ba, bb in zip(ta.biases, tb.biases)]
          for t in np.linspace(0, 1, n_knots + 2)]
    target = alpha - 1e-3 * max(1.0, abs(alpha))
    lams = np.linspace(0.0, 1.0, samples)

    def max_loss(chain_ws, chain_bs) -> float:
        worst = -np.inf
        for k in range(n_knots + 1):
            for lam in lams:
                th = Theta(tuple((1 - lam) * a + lam * b for a, b in zip(chain_ws[k], chain_ws[k + 1])),
                           tuple((1 - lam) * a + lam * b for a, b in zip(chain_bs[k], chain_bs[k + 1])))
                worst = max(worst, loss(spec, th, data))
        return worst

    best_ws = [[w.copy() for w in row] for row in ws]
    best_bs = [[b.copy() for b in row] for row in bs]
    best_val = max_loss(ws, bs)
    for _ in range(iters):
        grads_w = [[np.zeros_like(w) for w in row] for row in ws]
        grads_b = [[np.zeros_like(b) for b in row] for row in bs]
        total_excess = 0.0
        for k in range(n_knots + 1):
            for lam in lams:
                th = Theta(tuple((1 - lam) * a + lam * b for a, b in zip(ws[k], ws[k + 1])),
                           tuple((1 - lam) * a + lam * b for a, b in zip(bs[k], bs[k + 1])))
                value = loss(spec, th, data)
                excess = value - target
                if excess <= 0.0:
                    continue
                total_excess += excess * excess
                dW, db = gradients(spec, th, data)
                for row, weight in ((k, 1 - lam), (k + 1, lam)):
                    if row == 0 or row == n_knots + 1:
                        continue
                    for a, g in zip(grads_w[row], dW):
                        a += 2.0 * excess * weight * g
                    for a, g in zip(grads_b[row], db):
                        a += 2.0 * excess * weight * g
        if total_excess == 0.0:
            break
        gnorm = np.sqrt(sum(float(np.sum(g * g)) for row in grads_w for g in row)
                        + sum(float(np.sum(g * g)) for row in grads_b for g in row))
        step = 0.5 / (1.0 + gnorm)
        for k in range(1, n_knots + 1):
            ws[k] = [w - step * g for w, g in zip(ws[k], grads_w[k])]
            bs[k] = [b - step * g for b, g in zip(bs[k], grads_b[k])]
        value = max_loss(ws, bs)
        if value < best_val:
            best_val = value
            best_ws = [[w.copy() for w in row] for row in ws]
            best_bs = [[b.copy() for b in row] for row in bs]
    chain = [ta] + [Theta(tuple(best_ws[k]), tuple(best_bs[k]))
                    for k in range(1, n_knots + 1)] + [tb]
    return chain, best_val


def _homotopy_path(spec: NetworkSpec, data: Dataset, ta: Theta, tb: Theta,
                   alpha: float, rng: np.random.Generator,
                   verify_tol: float = 1e-6) -> ParamPath:
    chain, best = _homotopy_knots(spec, data, ta, tb, alpha, rng)
    if best > alpha + verify_tol / 2.0:
        raise HomotopyFailed(
            f"no path found: optimized max loss {best:.6g} above bound {alpha:.6g}")
    segs = [linear_segment(chain[k], chain[k + 1], kind="homotopy-knot-line",
                           output_preserving=False)
            for k in range(len(chain) - 1)]
    return ParamPath(spec, tuple(segs))


def subnet_connect(spec: NetworkSpec, data: Dataset, ta: Theta, tb: Theta,
                   alpha: float,
                   rng: np.random.Generator | int | None = None,
                   verify_tol: float = 1e-6) -> ParamPath:
    """Path between two tail-network points with loss at most ``alpha``.

    ``data.X`` holds the rank-N feature matrix serving as the tail's
    training inputs; hidden widths after the tail's input must be
    strictly decreasing.  Both endpoints must lie inside the sublevel
    set.  Dispatches to the exact regimes where available and to the
    verified numerical homotopy otherwise.  Sampled losses along the
    result stay within a fraction of ``verify_tol`` above ``alpha``, so
    verification at ``alpha`` with that tolerance passes.
    """
    ta.validate_against(spec)
    tb.validate_against(spec)
    rng = np.random.default_rng(rng)
    N = data.n_samples
    widths = spec.widths
    if any(widths[i] <= widths[i + 1] for i in range(1, len(widths) - 1)):
        raise PreconditionError("tail hidden widths must be strictly decreasing")
    if numeric_rank(data.X).rank < N:
        raise PreconditionError("tail data must have full row rank")
    tol = alpha + _SLACK * max(1.0, alpha)
    for name, point in (("start", ta), ("end", tb)):
        value = loss(spec, point, data)
        if value > tol:
            raise PreconditionError(f"{name} loss {value:.6g} exceeds the bound {alpha:.6g}")

    if ta.equal(tb):
        return ParamPath(spec, (constant_segment(ta),))
    if spec.depth == 1:
        return ParamPath(spec, (linear_segment(ta, tb, kind="last-layer-line",
                                               output_preserving=False),))
    if spec.depth == 2:
        try:
            return _connect_depth2(spec, data, ta, tb, alpha,
                                   link_tol=verify_tol / 4.0)
        except _RegimeInfeasible:
            pass
    return _homotopy_path(spec, data, ta, tb, alpha, rng, verify_tol=verify_tol)
