"""Banded factorisation with a low-rank border."""
from __future__ import annotations

import numpy as np
from scipy.linalg import LinAlgError, solve_banded

from .errors import SingularJacobian


def tridiag_to_banded(diag, off):
    """(3, n) LAPACK band storage of a symmetric tridiagonal matrix."""
    n = diag.size
    ab = np.zeros((3, n))
    ab[0, 1:] = off
    ab[1] = diag
    ab[2, :-1] = off
    return ab


def banded_solve(ab, lu, rhs):
    try:
        return solve_banded(lu, ab, rhs, check_finite=False)
    except (LinAlgError, ValueError) as exc:
        raise SingularJacobian(f"banded factorisation failed: {exc}",
                               pivot=float(np.min(np.abs(ab[lu[1]])))) from exc


def bordered_solve(ab, lu, border_cols, border_rows, rhs_top, rhs_bottom):
    """Solve ``[[A, B], [C^T, 0]] [x; y] = [rhs_top; rhs_bottom]``.

    ``A`` is given in band storage ``ab`` with ``lu = (lower, upper)``;
    ``B`` and ``C`` have shape (n, k). The k x k Schur complement
    ``C^T A^{-1} B`` is formed explicitly.
    """
    sol = banded_solve(ab, lu, np.column_stack([rhs_top, border_cols]))
    x0, z = sol[:, 0], sol[:, 1:]
    schur = border_rows.T @ z
    try:
        y = np.linalg.solve(schur, border_rows.T @ x0 - rhs_bottom)
    except LinAlgError as exc:
        raise SingularJacobian("bordered Schur complement is singular",
                               pivot=float(np.min(np.abs(np.linalg.eigvals(schur))))) from exc
    if not np.all(np.isfinite(y)) or np.linalg.cond(schur) > 1e15:
        raise SingularJacobian("bordered Schur complement is ill conditioned",
                               pivot=float(np.min(np.abs(np.linalg.eigvals(schur)))))
    return x0 - z @ y, y


def sobolev_solve(grid, rhs, sigma):
    """Apply ``(S + sigma W)^{-1}`` on the free nodes; rows of ``rhs`` are fields.

    The boundary node is held at zero. This is the Riesz map for the inner
    product ``int grad u . grad v + sigma u v`` used to precondition descent.
    ``sigma`` is a scalar per row or a nodal potential per row (shape of
    ``rhs``), in which case the zeroth-order term is ``int sigma u v``.
    """
    rhs = np.atleast_2d(rhs)
    diag, off = grid.stiffness_bands
    w = grid.weights
    out = np.zeros_like(rhs, dtype=float)
    sig = np.asarray(sigma, dtype=float)
    if sig.ndim < 2:
        sig = sig.reshape(-1, 1)
    sig = np.broadcast_to(sig, rhs.shape)
    for i, row in enumerate(rhs):
        ab = tridiag_to_banded(diag[:-1] + sig[i, :-1] * w[:-1], off[:-1])
        out[i, :-1] = banded_solve(ab, (1, 1), row[:-1])
    return out


def dual_norm(grid, vec, sigma) -> float:
    """``sqrt(v^T B^{-1} v)`` with ``B = S + sigma W``; ``vec`` is nodal, boundary ignored."""
    full = np.zeros(grid.n_points)
    full[:-1] = np.asarray(vec, dtype=float)[: grid.n_points - 1]
    z = sobolev_solve(grid, full, sigma)[0]
    return float(np.sqrt(max(np.dot(full, z), 0.0)))


def riesz(grid, vecs, sigmas):
    """Apply ``(S + sigma_c W)^{-1}`` to each component of ``vecs`` (shape (c, n)).

    Each ``sigma_c`` is a scalar or a nodal potential.
    """
    vecs = np.asarray(vecs, dtype=float)
    return np.stack([sobolev_solve(grid, v, np.reshape(s, (1, -1)))[0]
                     for v, s in zip(vecs, sigmas)])


def tangent_projection(grid, grad, normals, sigmas):
    """Sobolev gradient of ``grad`` with the span of ``normals`` removed.

    ``grad`` has shape (c, n); ``normals`` is a list of arrays of that shape.
    The projection is orthogonal in the metric ``sum_c (S + sigma_c W)``, so
    the result is a descent direction tangent to every constraint.
    """
    d = riesz(grid, grad, sigmas)
    if not normals:
        return d
    z = [riesz(grid, nv, sigmas) for nv in normals]
    gram = np.array([[np.vdot(ni, zj) for zj in z] for ni in normals])
    rhs = np.array([np.vdot(ni, d) for ni in normals])
    coef = np.linalg.lstsq(gram, rhs, rcond=1e-12)[0]
    for c, zj in zip(coef, z):
        d = d - c * zj
    return d
