"""Numerical verification of constructed paths, plus trace exports.

A path is only ever as good as its verification: every constructor in
this library returns paths whose guarantees (loss bound, output
invariance, exact endpoints) are re-checked here by dense sampling
before anything is reported as a success.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import PreconditionError
from .network import Dataset, NetworkSpec, Theta, forward, output_loss
from .paths import ParamPath

__all__ = ["PathReport", "verify_path", "write_trace_csv", "path_description", "dump_json"]

INV_TOL = 1e-8
VERIFY_TOL = 1e-6
ENDPOINT_TOL = 1e-9
CONTINUITY_FACTOR = 64.0


@dataclass(frozen=True)
class PathReport:
    """Verification summary for one path against one loss bound."""

    max_loss: float
    bound: float
    n_samples: int
    endpoint_residuals: tuple[float, float]
    per_segment_invariance: tuple[float, ...]
    segment_preserving: tuple[bool, ...]
    continuity_ok: bool
    verdict: str

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def to_json_dict(self) -> dict:
        return {
            "max_loss": self.max_loss,
            "bound": self.bound,
            "n_samples": self.n_samples,
            "endpoint_residuals": list(self.endpoint_residuals),
            "per_segment_invariance": list(self.per_segment_invariance),
            "segment_preserving": list(self.segment_preserving),
            "continuity_ok": self.continuity_ok,
            "n_segments": len(self.per_segment_invariance),
            "verdict": self.verdict,
        }


def verify_path(spec: NetworkSpec, data: Dataset, path: ParamPath, alpha: float,
                n_samples: int = 200,
                inv_tol: float = INV_TOL,
                verify_tol: float = VERIFY_TOL,
                endpoint_tol: float = ENDPOINT_TOL,
                expected_endpoints: tuple[Theta, Theta] | None = None) -> PathReport:
    """Sample every segment and check the path's claims.

    Each segment is evaluated at ``n_samples`` uniform parameter values
    including both endpoints.  Records the maximum sampled loss, the
    sup-norm residuals of the path endpoints against the requested ones,
    and the maximum output drift of every segment relative to its own
    start.  The verdict is "pass" iff the sampled loss stays within
    ``verify_tol`` of the bound, the endpoints match to ``endpoint_tol``
    and every output-preserving segment drifts at most ``inv_tol``.

    A continuity spot-check flags any sampled parameter step that is out
    of proportion with the segment's total arc length; it is reported
    but does not enter the verdict.
    """
    if n_samples < 2:
        raise PreconditionError("need at least 2 samples per segment")
    max_loss = -np.inf
    drifts: list[float] = []
    preserving: list[bool] = []
    continuity_ok = True
    for seg in path.segments:
        lams = np.linspace(0.0, 1.0, n_samples)
        thetas = [seg.at(float(l)) for l in lams]
        outputs = [forward(spec, th, data.X)[-1] for th in thetas]
        losses = [output_loss(spec.loss, out, data.Y) for out in outputs]
        max_loss = max(max_loss, max(losses))
        base = outputs[0]
        drifts.append(max(float(np.max(np.abs(out - base))) for out in outputs))
        preserving.append(seg.output_preserving)
        steps = [thetas[i].distance(thetas[i + 1]) for i in range(len(thetas) - 1)]
        arc = sum(steps)
        allowed = CONTINUITY_FACTOR * max(arc, 1e-12) / (n_samples - 1) + 1e-12
        if max(steps) > allowed:
            continuity_ok = False

    if expected_endpoints is None:
        residuals = (0.0, 0.0)
    else:
        residuals = (path.start.max_abs_difference(expected_endpoints[0]),
                     path.end.max_abs_difference(expected_endpoints[1]))

    ok = (max_loss <= alpha + verify_tol
          and residuals[0] <= endpoint_tol and residuals[1] <= endpoint_tol
          and all(d <= inv_tol for d, p in zip(drifts, preserving) if p))
    return PathReport(
        max_loss=float(max_loss),
        bound=float(alpha),
        n_samples=int(n_samples),
        endpoint_residuals=residuals,
        per_segment_invariance=tuple(drifts),
        segment_preserving=tuple(preserving),
        continuity_ok=continuity_ok,
        verdict="pass" if ok else "fail",
    )


def _g17(x: float) -> str:
    return format(float(x), ".17g")


def write_trace_csv(spec: NetworkSpec, data: Dataset, path: ParamPath,
                    out_path: str | Path, n_samples: int = 50) -> None:
    """Per-sample trace: segment index, lam, loss, parameter norm, drift."""
    out_path = Path(out_path)
    with out_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["segment_index", "lambda", "loss", "param_l2_norm", "output_drift"])
        for seg_idx, seg in enumerate(path.segments):
            base = forward(spec, seg.start, data.X)[-1]
            for lam in np.linspace(0.0, 1.0, n_samples):
                theta = seg.at(float(lam))
                out = forward(spec, theta, data.X)[-1]
                writer.writerow([
                    seg_idx,
                    _g17(lam),
                    _g17(output_loss(spec.loss, out, data.Y)),
                    _g17(theta.norm()),
                    _g17(float(np.max(np.abs(out - base)))),
                ])


def _blocks_labeled(theta: Theta) -> list[tuple[str, np.ndarray]]:
    labels = []
    for i, w in enumerate(theta.weights):
        labels.append((f"W{i + 1}", w))
        if i < len(theta.biases):
            labels.append((f"b{i + 1}", theta.biases[i]))
    return labels


def path_description(path: ParamPath) -> dict:
    """JSON-ready listing of segments: kind, touched blocks, endpoints."""
    segs = []
    for seg in path.segments:
        touched = [name for (name, a), (_, b)
                   in zip(_blocks_labeled(seg.start), _blocks_labeled(seg.end))
                   if not np.array_equal(a, b)]
        segs.append({
            "kind": seg.kind,
            "output_preserving": seg.output_preserving,
            "touched_blocks": touched,
            "start": {name: arr.tolist() for name, arr in _blocks_labeled(seg.start)},
            "end": {name: arr.tolist() for name, arr in _blocks_labeled(seg.end)},
        })
    return {"widths": list(path.spec.widths), "n_segments": len(path), "segments": segs}


def dump_json(obj: dict, out_path: str | Path) -> None:
    """Deterministic JSON: sorted keys, round-trip exact floats."""
    Path(out_path).write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")
