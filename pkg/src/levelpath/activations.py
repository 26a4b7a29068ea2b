"""Strictly increasing, surjective piecewise-linear activations.

Every activation here is a continuous piecewise-linear bijection of the
real line with strictly positive slopes, so it has an exact closed-form
inverse.  Affine activations (a single slope everywhere) are rejected at
construction time: with only one slope the shifted-combination test
below is trivially defeated and none of the path constructions apply.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .errors import PreconditionError

__all__ = [
    "Activation",
    "LeakyReLU",
    "PiecewiseLinear",
    "A2Report",
    "a2_falsify",
]


class Activation:
    """Interface for strictly monotonic surjective activations."""

    name: str = "activation"

    def __call__(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def inverse(self, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def derivative(self, x: np.ndarray) -> np.ndarray:
        """Slope at ``x``; at a kink the right-hand slope is used."""
        raise NotImplementedError


@dataclass(frozen=True)
class LeakyReLU(Activation):
    """Identity for non-negative inputs, slope ``slope`` below zero.

    The slope must lie in (0, 1), which makes the function strictly
    increasing, onto the reals and genuinely nonlinear.
    """

    slope: float = 0.5

    def __post_init__(self):
        if not (0.0 < self.slope < 1.0):
            raise PreconditionError(f"leaky slope must be in (0, 1), got {self.slope}")

    @property
    def name(self) -> str:
        return f"leaky_relu({self.slope:g})"

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= 0.0, x, self.slope * x)

    def inverse(self, y):
        y = np.asarray(y, dtype=float)
        return np.where(y >= 0.0, y, y / self.slope)

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= 0.0, 1.0, self.slope)


@dataclass(frozen=True)
class PiecewiseLinear(Activation):
    """General increasing piecewise-linear activation.

    ``breakpoints`` are the kink locations in strictly increasing order;
    ``slopes`` has one more entry than ``breakpoints`` and gives the
    slope on each interval, leftmost first.  The function is anchored by
    its value at zero (``offset``), i.e. sigma(x) = offset + the signed
    integral of the slope step function from 0 to x.
    """

    breakpoints: tuple[float, ...]
    slopes: tuple[float, ...]
    offset: float = 0.0
    # values at the breakpoints, precomputed for evaluation and inversion
    _knot_values: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, dtype=float)
        sl = np.asarray(self.slopes, dtype=float)
        if bp.ndim != 1 or bp.size < 1:
            raise PreconditionError("need at least one breakpoint")
        if sl.shape != (bp.size + 1,):
            raise PreconditionError("need exactly len(breakpoints)+1 slopes")
        if np.any(np.diff(bp) <= 0):
            raise PreconditionError("breakpoints must be strictly increasing")
        if np.any(sl <= 0):
            raise PreconditionError("all slopes must be positive")
        if np.unique(sl).size < 2:
            raise PreconditionError("affine activation (single slope) is excluded")
        object.__setattr__(self, "breakpoints", tuple(float(t) for t in bp))
        object.__setattr__(self, "slopes", tuple(float(s) for s in sl))
        object.__setattr__(self, "_knot_values", self._values_at_knots(bp, sl))

    def _values_at_knots(self, bp, sl) -> np.ndarray:
        # value at bp[0] = offset + integral from 0 to bp[0]
        v0 = self.offset + self._integral_scalar(bp, sl, bp[0])
        vals = np.empty(bp.size)
        vals[0] = v0
        if bp.size > 1:
            vals[1:] = v0 + np.cumsum(sl[1:-1] * np.diff(bp))
        vals.setflags(write=False)
        return vals

    @staticmethod
    def _integral_scalar(bp, sl, x) -> float:
        """Signed integral of the slope step function from 0 to x."""
        lo, hi = (0.0, x) if x >= 0.0 else (x, 0.0)
        knots = np.concatenate(([lo], bp[(bp > lo) & (bp < hi)], [hi]))
        idx = np.searchsorted(bp, knots[:-1], side="right")
        total = float(np.sum(sl[idx] * np.diff(knots)))
        return total if x >= 0.0 else -total

    @property
    def name(self) -> str:
        return f"piecewise_linear({len(self.breakpoints)} kinks)"

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        bp = np.asarray(self.breakpoints)
        sl = np.asarray(self.slopes)
        idx = np.searchsorted(bp, x, side="right")
        anchor_idx = np.clip(idx - 1, 0, bp.size - 1)
        anchor_x = bp[anchor_idx]
        anchor_v = self._knot_values[anchor_idx]
        return anchor_v + sl[idx] * (x - anchor_x)

    def inverse(self, y):
        y = np.asarray(y, dtype=float)
        bp = np.asarray(self.breakpoints)
        sl = np.asarray(self.slopes)
        idx = np.searchsorted(self._knot_values, y, side="right")
        anchor_idx = np.clip(idx - 1, 0, bp.size - 1)
        anchor_x = bp[anchor_idx]
        anchor_v = self._knot_values[anchor_idx]
        return anchor_x + (y - anchor_v) / sl[idx]

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(np.asarray(self.breakpoints), x, side="right")
        return np.asarray(self.slopes)[idx]


@dataclass(frozen=True)
class A2Report:
    """Result of the shifted-combination falsification test.

    ``residuals[p]`` is the smallest normalized fitting residual found
    when approximating sigma(x) by a combination of p shifted copies of
    itself.  ``holds`` is True when every residual stays above the
    threshold, which is consistent with (but no proof of) the activation
    admitting no such exact combination.
    """

    residuals: dict[int, float]
    best_shifts: dict[int, tuple[float, ...]]
    threshold: float
    min_residual: float

    @property
    def holds(self) -> bool:
        return self.min_residual > self.threshold


def _shift_residual(act: Activation, grid: np.ndarray, target: np.ndarray,
                    target_norm: float, shifts: np.ndarray) -> float:
    """Best normalized residual of target ~ sum_i c_i sigma(grid - a_i)."""
    M = np.stack([act(grid - a) for a in shifts], axis=1)
    coef, *_ = np.linalg.lstsq(M, target, rcond=None)
    return float(np.linalg.norm(M @ coef - target) / target_norm)


def a2_falsify(kind: Activation, p_max: int, trials: int = 40,
               seed: int | np.random.Generator | None = 0,
               grid_range: tuple[float, float] = (-8.0, 8.0),
               grid_points: int = 801,
               threshold: float = 1e-3,
               min_shift: float = 0.75) -> A2Report:
    """Search for nonzero coefficients with sigma(x) = sum_i c_i sigma(x - a_i).

    For each p up to ``p_max`` the shifts are optimized by a coarse
    lattice scan (p <= 2) and random restarts refined with Nelder-Mead,
    with the inner weights solved by least squares on a dense grid.
    Shifts are kept at least ``min_shift`` away from zero and from each
    other; without that guard, shift pairs closer than the grid spacing
    can fake a perfect fit of any kink that falls between grid points.

    Purely diagnostic: a residual comfortably above ``threshold`` is
    consistent with the no-combination assumption holding, a near-zero
    residual flags a violating activation.
    """
    if p_max < 1:
        raise PreconditionError("p_max must be >= 1")
    rng = np.random.default_rng(seed)
    grid = np.linspace(grid_range[0], grid_range[1], grid_points)
    target = kind(grid)
    target_norm = float(np.linalg.norm(target))
    if target_norm == 0.0:
        target_norm = 1.0

    def admissible(shifts: np.ndarray) -> bool:
        if np.any(np.abs(shifts) < min_shift):
            return False
        if shifts.size > 1:
            pair = np.abs(shifts[:, None] - shifts[None, :])
            if np.any(pair[np.triu_indices(shifts.size, k=1)] < min_shift):
                return False
        return True

    def penalized(shifts: np.ndarray) -> float:
        if not admissible(shifts):
            return 10.0 + float(np.sum(np.maximum(0.0, min_shift - np.abs(shifts))))
        return _shift_residual(kind, grid, target, target_norm, shifts)

    half = (grid_range[1] - grid_range[0]) / 4.0
    lattice = np.arange(-half, half + 0.25, 0.5)
    lattice = lattice[np.abs(lattice) >= min_shift]

    residuals: dict[int, float] = {}
    best_shifts: dict[int, tuple[float, ...]] = {}
    for p in range(1, p_max + 1):
        best, best_a = np.inf, None
        candidates: list[np.ndarray] = []
        if p == 1:
            candidates += [np.array([a]) for a in lattice]
        elif p == 2:
            candidates += [np.array(c) for c in itertools.combinations(lattice, 2)]
        for _ in range(trials):
            a = rng.uniform(-half, half, size=p)
            if admissible(a):
                candidates.append(a)
        for a0 in candidates:
            r0 = penalized(a0)
            if r0 < best:
                best, best_a = r0, a0
        if best_a is not None:
            res = minimize(penalized, best_a, method="Nelder-Mead",
                           options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 400})
            if res.fun < best:
                best, best_a = float(res.fun), np.asarray(res.x)
        residuals[p] = float(best)
        best_shifts[p] = tuple(float(a) for a in np.sort(best_a))
    return A2Report(residuals=residuals, best_shifts=best_shifts,
                    threshold=threshold, min_residual=min(residuals.values()))
