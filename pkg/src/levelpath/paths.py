"""Path primitives: closed-form weight curves, segments and chains.

The two weight-matrix curves here are the basic output-preserving moves
everything else is built from:

* ``zero_dependent_rows`` empties the rows of a weight matrix that feed
  from feature columns lying in the span of the others, compensating on
  the spanning rows so the product F @ W never changes.
* ``transfer_neuron`` hands the outgoing row of one neuron over to a
  twin neuron whose feature column is identical, again leaving F @ W
  untouched at every point of the curve.

Both curves are affine in the path parameter and their endpoints are
stored explicitly, so segment chaining can be checked exactly instead
of to a tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterator

import numpy as np

from .errors import PreconditionError
from .network import NetworkSpec, Theta, lerp_theta

__all__ = [
    "MatrixCurve",
    "zero_dependent_rows",
    "transfer_neuron",
    "Segment",
    "ParamPath",
    "constant_segment",
    "linear_segment",
    "curve_segment",
]

EXACT_ZERO_TOL = 1e-12


@dataclass(frozen=True)
class MatrixCurve:
    """Continuous curve of weight matrices over [0, 1].

    ``at`` returns the stored endpoints bit-for-bit at 0 and 1, and the
    closed-form interior elsewhere.
    """

    start: np.ndarray
    end: np.ndarray
    interior: Callable[[float], np.ndarray] = field(repr=False)

    def at(self, lam: float) -> np.ndarray:
        if lam == 0.0:
            return self.start
        if lam == 1.0:
            return self.end
        if not 0.0 <= lam <= 1.0:
            raise PreconditionError(f"path parameter {lam} outside [0, 1]")
        return self.interior(lam)


def zero_dependent_rows(F: np.ndarray, W: np.ndarray,
                        I: list[int] | tuple[int, ...],
                        E: np.ndarray,
                        feas_tol: float = 1e-8) -> MatrixCurve:
    """Curve on W that zeroes the rows of the span-dependent columns.

    ``I`` indexes feature columns whose span contains all remaining
    columns, with coefficients ``E`` (so F[:, Ibar] = F[:, I] @ E).  The
    curve moves row p of W to

        W[p] + lam * (E @ W[Ibar])[p]   for p in I
        (1 - lam) * W[p]                for p in Ibar

    which keeps F @ W constant for every lam and ends with the
    dependent rows identically zero.
    """
    F = np.asarray(F, dtype=float)
    W = np.asarray(W, dtype=float)
    I = list(I)
    Ibar = [j for j in range(F.shape[1]) if j not in set(I)]
    E = np.asarray(E, dtype=float)
    if E.shape != (len(I), len(Ibar)):
        raise PreconditionError(f"coefficient shape {E.shape}, expected {(len(I), len(Ibar))}")
    if W.shape[0] != F.shape[1]:
        raise PreconditionError("W must have one row per feature column")
    scale = float(np.linalg.norm(F))
    residual = float(np.linalg.norm(F[:, Ibar] - F[:, I] @ E)) if Ibar else 0.0
    if residual > feas_tol * max(scale, 1e-30):
        raise PreconditionError(
            f"span precondition violated: residual {residual:.3e} > {feas_tol:.1e} * ||F||")

    compensation = E @ W[Ibar, :] if Ibar else np.zeros((len(I), W.shape[1]))

    def interior(lam: float) -> np.ndarray:
        out = W.copy()
        out[I, :] = W[I, :] + lam * compensation
        out[Ibar, :] = (1.0 - lam) * W[Ibar, :]
        return out

    end = W.copy()
    end[I, :] = W[I, :] + compensation
    end[Ibar, :] = 0.0
    return MatrixCurve(start=W.copy(), end=end, interior=interior)


def transfer_neuron(F: np.ndarray, W: np.ndarray, j: int, k: int,
                    tol: float = EXACT_ZERO_TOL) -> MatrixCurve:
    """Curve on W moving the outgoing row of neuron k onto neuron j.

    Requires row j of W to be zero and feature columns j and k to be
    equal, so the exchanged contributions telescope and F @ W is
    constant along the whole curve.  Ends with row k zero and row j
    carrying the old row k.
    """
    F = np.asarray(F, dtype=float)
    W = np.asarray(W, dtype=float)
    if j == k:
        raise PreconditionError("transfer needs two distinct neurons")
    if np.max(np.abs(W[j, :])) > tol:
        raise PreconditionError(f"row {j} of W must be zero before a transfer")
    if np.max(np.abs(F[:, j] - F[:, k])) > tol:
        raise PreconditionError(f"feature columns {j} and {k} must coincide")

    def interior(lam: float) -> np.ndarray:
        out = W.copy()
        out[k, :] = (1.0 - lam) * W[k, :]
        out[j, :] = lam * W[k, :]
        return out

    end = W.copy()
    end[j, :] = W[k, :]
    end[k, :] = 0.0
    return MatrixCurve(start=W.copy(), end=end, interior=interior)


@dataclass(frozen=True)
class Segment:
    """One continuous leg of a parameter path.

    ``curve`` is the closed-form interior evaluator; when absent the
    segment is the straight line between its endpoints.  Endpoints are
    returned exactly at lam 0 and 1.  ``output_preserving`` marks legs
    whose construction guarantees a constant network output, which the
    verifier then checks by sampling.
    """

    start: Theta
    end: Theta
    kind: str
    output_preserving: bool
    curve: Callable[[float], Theta] | None = field(default=None, repr=False)

    def at(self, lam: float) -> Theta:
        if lam == 0.0 or self.start is self.end:
            return self.start
        if lam == 1.0:
            return self.end
        if not 0.0 <= lam <= 1.0:
            raise PreconditionError(f"path parameter {lam} outside [0, 1]")
        if self.curve is not None:
            return self.curve(lam)
        return lerp_theta(self.start, self.end, lam)

    def reversed(self) -> "Segment":
        fwd = self.curve
        rev = None if fwd is None else (lambda lam: fwd(1.0 - lam))
        return Segment(self.end, self.start, self.kind, self.output_preserving, rev)

    @property
    def is_constant(self) -> bool:
        return self.curve is None and self.start.equal(self.end)


def constant_segment(theta: Theta, kind: str = "constant") -> Segment:
    return Segment(theta, theta, kind, output_preserving=True)


def linear_segment(start: Theta, end: Theta, kind: str,
                   output_preserving: bool) -> Segment:
    return Segment(start, end, kind, output_preserving)


def curve_segment(theta: Theta, layer: int, curve: MatrixCurve, kind: str,
                  output_preserving: bool = True) -> Segment:
    """Lift a weight-matrix curve at 1-based ``layer`` into a full segment."""
    start = theta.replace(layer, W=curve.start)
    end = theta.replace(layer, W=curve.end)
    return Segment(start, end, kind, output_preserving,
                   curve=lambda lam: theta.replace(layer, W=curve.at(lam)))


@dataclass(frozen=True)
class ParamPath:
    """Ordered chain of segments forming one continuous parameter curve.

    Consecutive segments must chain exactly: segment i ends at the very
    value segment i+1 starts from, not merely within a tolerance.
    """

    spec: NetworkSpec
    segments: tuple[Segment, ...]

    def __post_init__(self):
        if len(self.segments) == 0:
            raise PreconditionError("a path needs at least one segment")
        for i in range(len(self.segments) - 1):
            if not self.segments[i].end.equal(self.segments[i + 1].start):
                raise PreconditionError(f"segments {i} and {i + 1} do not chain exactly")
        for seg in self.segments:
            seg.start.validate_against(self.spec)
            seg.end.validate_against(self.spec)
        object.__setattr__(self, "segments", tuple(self.segments))

    @property
    def start(self) -> Theta:
        return self.segments[0].start

    @property
    def end(self) -> Theta:
        return self.segments[-1].end

    def __len__(self) -> int:
        return len(self.segments)

    def reversed(self) -> "ParamPath":
        return ParamPath(self.spec, tuple(s.reversed() for s in reversed(self.segments)))

    def concat(self, other: "ParamPath") -> "ParamPath":
        if other.spec.widths != self.spec.widths:
            raise PreconditionError("cannot concatenate paths over different architectures")
        return ParamPath(self.spec, self.segments + other.segments)

    def sample(self, n_per_segment: int) -> Iterator[tuple[int, float, Theta]]:
        """Uniform lam grid per segment, endpoints included."""
        if n_per_segment < 2:
            raise PreconditionError("need at least 2 samples per segment")
        for idx, seg in enumerate(self.segments):
            for lam in np.linspace(0.0, 1.0, n_per_segment):
                yield idx, float(lam), seg.at(float(lam))
