"""Tolerance-aware dense linear algebra shared by the path constructions.

Exact rank statements in the constructions become singular-value
thresholding here; the default tolerances target double precision and
desk-scale matrices (a few dozen rows).  All functions are pure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import Infeasible, PreconditionError

__all__ = [
    "RankDecision",
    "numeric_rank",
    "span_coefficients",
    "exact_solve_right",
    "det_sign",
    "independent_columns",
    "solve_right_full_row_rank",
]

RANK_TOL_REL = 1e-10
FEAS_TOL = 1e-8
DET_DEGENERACY_TOL = 1e-12


@dataclass(frozen=True)
class RankDecision:
    """Numeric rank of a matrix together with the evidence for it."""

    rank: int
    singular_values: tuple[float, ...]
    tol_used: float


def numeric_rank(M: np.ndarray, tol_rel: float = RANK_TOL_REL,
                 tol_abs: float | None = None) -> RankDecision:
    """Rank by singular-value thresholding.

    The cutoff is ``tol_rel * max_singular_value * max(shape)`` unless an
    absolute cutoff is supplied.  Deterministic for fixed input.
    """
    M = np.asarray(M, dtype=float)
    if not np.all(np.isfinite(M)):
        raise PreconditionError("matrix entries must be finite")
    if M.size == 0:
        return RankDecision(0, (), 0.0)
    s = np.linalg.svd(M, compute_uv=False)
    tol = tol_abs if tol_abs is not None else tol_rel * float(s[0]) * max(M.shape)
    return RankDecision(int(np.sum(s > tol)), tuple(float(x) for x in s), float(tol))


def span_coefficients(F: np.ndarray, I: list[int] | tuple[int, ...],
                      Ibar: list[int] | tuple[int, ...],
                      feas_tol: float = FEAS_TOL) -> np.ndarray:
    """Coefficients E with F[:, Ibar] = F[:, I] @ E, or Infeasible.

    ``I`` and ``Ibar`` must partition the column indices.  E is the
    least-squares solution; if the residual exceeds
    ``feas_tol * ||F||_F`` the complement columns are not in the span of
    the chosen ones and the partition was a bad choice.
    """
    F = np.asarray(F, dtype=float)
    n = F.shape[1]
    if sorted(list(I) + list(Ibar)) != list(range(n)):
        raise PreconditionError("I and Ibar must partition the column indices")
    E = np.zeros((len(I), len(Ibar)))
    if len(Ibar) == 0:
        return E
    if len(I) > 0:
        E, *_ = np.linalg.lstsq(F[:, list(I)], F[:, list(Ibar)], rcond=None)
    scale = float(np.linalg.norm(F))
    residual = float(np.linalg.norm(F[:, list(Ibar)] - F[:, list(I)] @ E))
    if residual > feas_tol * scale:
        raise Infeasible(residual, feas_tol * scale,
                         "complement columns are not in the span of the chosen columns")
    return E


def exact_solve_right(F: np.ndarray, Z: np.ndarray,
                      feas_tol: float = FEAS_TOL) -> np.ndarray:
    """W with F @ W = Z for F of full column rank, or Infeasible.

    Used for output-preserving weight corrections: the full column rank
    precondition makes the solution unique, and the residual check
    rejects Z outside the column space.
    """
    F = np.asarray(F, dtype=float)
    Z = np.asarray(Z, dtype=float)
    decision = numeric_rank(F)
    if decision.rank != F.shape[1]:
        raise PreconditionError(
            f"matrix must have full column rank {F.shape[1]}, numeric rank is {decision.rank}")
    W, *_ = np.linalg.lstsq(F, Z, rcond=None)
    scale = max(float(np.linalg.norm(Z)), 1e-30)
    residual = float(np.linalg.norm(F @ W - Z))
    if residual > feas_tol * scale:
        raise Infeasible(residual, feas_tol * scale, "right-hand side is not in the column space")
    return W


def solve_right_full_row_rank(F: np.ndarray, Z: np.ndarray,
                              feas_tol: float = FEAS_TOL) -> np.ndarray:
    """Minimum-norm W with F @ W = Z for F of full row rank.

    For a full row rank F every right-hand side is attainable; the
    residual check still guards against silently inconsistent input.
    """
    F = np.asarray(F, dtype=float)
    Z = np.asarray(Z, dtype=float)
    W, *_ = np.linalg.lstsq(F, Z, rcond=None)
    scale = max(float(np.linalg.norm(Z)), 1.0)
    residual = float(np.linalg.norm(F @ W - Z))
    if residual > feas_tol * scale:
        raise Infeasible(residual, feas_tol * scale, "system F W = Z is not solvable")
    return W


def det_sign(M: np.ndarray, degeneracy_tol: float = DET_DEGENERACY_TOL) -> int:
    """Sign of det(M) in {-1, 0, +1}.

    Computed from a pivoted triangular factorization so huge or tiny
    determinants cannot overflow.  Returns 0 when |det| is below
    ``degeneracy_tol`` relative to ||M||_2 ** n.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise PreconditionError("determinant sign needs a square matrix")
    n = M.shape[0]
    if n == 0:
        return 1
    spectral = float(np.linalg.norm(M, 2))
    if spectral == 0.0:
        return 0
    sign, logabsdet = np.linalg.slogdet(M)
    if sign == 0.0:
        return 0
    if logabsdet - n * np.log(spectral) <= np.log(degeneracy_tol):
        return 0
    return int(sign)


def independent_columns(F: np.ndarray, tol_rel: float = RANK_TOL_REL) -> list[int]:
    """A maximal independent column set, chosen by pivoted QR.

    The returned indices are in pivot order, so every prefix is itself
    independent.
    """
    F = np.asarray(F, dtype=float)
    rank = numeric_rank(F, tol_rel).rank
    if rank == 0:
        return []
    _, _, piv = scipy.linalg.qr(F, mode="economic", pivoting=True)
    return [int(p) for p in piv[:rank]]
