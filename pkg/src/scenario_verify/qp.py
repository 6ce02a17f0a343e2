"""Minimum-deviation QPs with linear inequality constraints.

Both solvers handle

    minimize ||u - u_nom||^2   subject to   A u >= b

by Hildreth's dual coordinate ascent: with multipliers ``lam >= 0`` the
primal is ``u = u_nom + A^T lam`` and each sweep maximizes the dual in one
coordinate at a time. That is cheap for the handful of pairwise barrier
constraints a small robot team produces.
"""
from __future__ import annotations

from typing import Tuple

import numpy as np

DIVERGENCE_LIMIT = 1e12


class QPInfeasible(RuntimeError):
    """Raised when the constraint set appears empty or the solver stalls."""


def solve_qp(
    nominal: np.ndarray,
    A: np.ndarray,
    b: np.ndarray,
    tol: float = 1e-8,
    max_iter: int = 500,
) -> np.ndarray:
    """Project ``nominal`` onto ``{u : A u >= b}``.

    Raises :class:`QPInfeasible` if the multipliers diverge or the primal
    residual is still above ``tol`` after ``max_iter`` sweeps.
    """
    u = np.array(nominal, dtype=np.float64).reshape(-1)
    A = np.asarray(A, dtype=np.float64).reshape(-1, u.size)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    if A.shape[0] != b.size:
        raise ValueError(f"A has {A.shape[0]} rows but b has {b.size} entries")
    if A.shape[0] == 0:
        return u
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b)) and np.all(np.isfinite(u))):
        raise ValueError("non-finite QP data")

    norms = np.einsum("ij,ij->i", A, A)
    zero_rows = norms == 0.0
    if np.any(zero_rows & (b > tol)):
        raise QPInfeasible("constraint 0 >= b with b > 0")
    lam = np.zeros(b.size)
    for _ in range(max_iter):
        moved = 0.0
        for k in np.flatnonzero(~zero_rows):
            step = (b[k] - A[k] @ u) / norms[k]
            new = max(0.0, lam[k] + step)
            d = new - lam[k]
            if d != 0.0:
                lam[k] = new
                u += d * A[k]
                moved = max(moved, abs(d) * norms[k])
        if lam.max() > DIVERGENCE_LIMIT:
            raise QPInfeasible("dual multipliers diverged")
        if moved <= tol and np.max(b - A @ u) <= tol:
            return u
    residual = float(np.max(b - A @ u))
    if residual > tol:
        raise QPInfeasible(f"primal residual {residual:.3e} above tolerance after {max_iter} sweeps")
    return u


def pair_index(n: int) -> Tuple[np.ndarray, np.ndarray]:
    """Robot index pairs ``i < j`` in lexicographic order."""
    i, j = np.triu_indices(n, k=1)
    return i, j


def pairwise_rows(points: np.ndarray, safety_radius: float, gain: float):
    """Barrier data for every pair: ``2 dp . (u_i - u_j) >= -gain * h``.

    ``points`` has shape (..., n, 2). Returns ``dp`` (..., m, 2) and the
    right-hand side ``b`` (..., m) with ``h = |dp|^2 - r^2``.
    """
    i, j = pair_index(points.shape[-2])
    dp = points[..., i, :] - points[..., j, :]
    sq = dp[..., 0] * dp[..., 0] + dp[..., 1] * dp[..., 1]
    h = sq - safety_radius * safety_radius
    return dp, -gain * h, sq


def pairwise_lhs(dp: np.ndarray, u: np.ndarray) -> np.ndarray:
    i, j = pair_index(u.shape[-2])
    du = u[..., i, :] - u[..., j, :]
    return 2.0 * (dp[..., 0] * du[..., 0] + dp[..., 1] * du[..., 1])


def hildreth_pairwise(
    nominal: np.ndarray,
    dp: np.ndarray,
    b: np.ndarray,
    tol: float = 1e-8,
    max_iter: int = 500,
):
    """Batched Hildreth for pairwise barrier constraints.

    ``nominal`` is (B, n, 2), ``dp`` (B, m, 2), ``b`` (B, m). Each problem is
    iterated until its own convergence test passes and is frozen from then
    on, so the answer for one problem never depends on the rest of the batch.

    Returns ``(u, ok)`` where ``ok[k]`` is False for problems declared
    infeasible (their ``u`` is meaningless).
    """
    u = np.array(nominal, dtype=np.float64)
    B, n, _ = u.shape
    pi, pj = pair_index(n)
    m = pi.size
    lam = np.zeros((B, m))
    ok = np.ones(B, dtype=bool)
    if m == 0 or B == 0:
        return u, ok
    sq = dp[..., 0] * dp[..., 0] + dp[..., 1] * dp[..., 1]
    norms = 8.0 * sq
    # coincident points: constraint reads 0 >= b, and b = gain * r^2 > 0
    degenerate = np.any(norms == 0.0, axis=1)
    ok &= ~degenerate
    active = ~degenerate
    safe_norms = np.where(norms == 0.0, 1.0, norms)

    for _ in range(max_iter):
        if not active.any():
            break
        moved = np.zeros(B)
        for k in range(m):
            i, j = pi[k], pj[k]
            dx, dy = dp[:, k, 0], dp[:, k, 1]
            lhs = 2.0 * (dx * (u[:, i, 0] - u[:, j, 0]) + dy * (u[:, i, 1] - u[:, j, 1]))
            new = np.maximum(0.0, lam[:, k] + (b[:, k] - lhs) / safe_norms[:, k])
            d = np.where(active, new - lam[:, k], 0.0)
            lam[:, k] += d
            moved = np.maximum(moved, np.abs(d) * norms[:, k])
            sx, sy = 2.0 * d * dx, 2.0 * d * dy
            # frozen problems must stay bitwise untouched (x + 0.0 flips -0.0)
            u[:, i, 0] = np.where(active, u[:, i, 0] + sx, u[:, i, 0])
            u[:, i, 1] = np.where(active, u[:, i, 1] + sy, u[:, i, 1])
            u[:, j, 0] = np.where(active, u[:, j, 0] - sx, u[:, j, 0])
            u[:, j, 1] = np.where(active, u[:, j, 1] - sy, u[:, j, 1])
        residual = np.max(b - pairwise_lhs(dp, u), axis=1)
        diverged = active & (np.max(lam, axis=1) > DIVERGENCE_LIMIT)
        ok &= ~diverged
        active &= ~diverged & ~((moved <= tol) & (residual <= tol))
    if active.any():
        residual = np.max(b - pairwise_lhs(dp, u), axis=1)
        ok &= ~(active & (residual > tol))
    return u, ok
