"""Linear solvers for the implicit diffusion and the Neumann Poisson problems."""

from __future__ import annotations

import numpy as np
from scipy.linalg.lapack import dgtsv
from scipy.sparse.linalg import LinearOperator, cg

from .grid import Grid, neumann_laplacian

POISSON_RTOL = 1e-12


class PoissonSolveError(RuntimeError):
    """The Neumann Poisson solve did not converge."""


def solve_tridiagonal(
    lower: np.ndarray, diag: np.ndarray, upper: np.ndarray, rhs: np.ndarray
) -> np.ndarray:
    """Solve a tridiagonal system; ``rhs`` may carry extra columns (shape ``(n, k)``).

    ``lower[i]`` multiplies ``x[i-1]`` and ``upper[i]`` multiplies ``x[i+1]``,
    so ``lower[0]`` and ``upper[-1]`` are ignored.
    """
    _, _, _, x, info = dgtsv(lower[1:], diag, upper[:-1], rhs)
    if info != 0:
        raise np.linalg.LinAlgError(f"singular tridiagonal system (info={info})")
    return x


def _sweep(lower, diag, upper, rhs: np.ndarray, axis: int) -> np.ndarray:
    moved = np.moveaxis(rhs, axis, 0)
    flat = moved.reshape(moved.shape[0], -1)
    x = solve_tridiagonal(lower, diag, upper, flat).reshape(moved.shape)
    return np.moveaxis(x, 0, axis)


def solve_shifted_laplacian(
    grid: Grid, rhs: np.ndarray, coeff: float, decay: float = 0.0
) -> np.ndarray:
    """Solve ``((1 + decay) I - coeff * Lap_h) x = rhs``.

    Exact in 1D and on the radial disk.  On a rectangle the operator is
    factored as ``(I - coeff Lx)((1 + decay) I - coeff Ly)``; the splitting
    error is ``O(coeff**2)`` and both sweeps conserve the discrete integral.
    """
    if coeff < 0.0 or decay < 0.0:
        raise ValueError("coeff and decay must be nonnegative")
    if grid.ndim == 1:
        lo, di, up = grid.axis_bands(0)
        return solve_tridiagonal(-coeff * lo, (1.0 + decay) - coeff * di, -coeff * up, rhs)
    x = rhs
    for axis in range(grid.ndim):
        lo, di, up = grid.axis_bands(axis)
        shift = 1.0 + decay if axis == grid.ndim - 1 else 1.0
        x = _sweep(-coeff * lo, shift - coeff * di, -coeff * up, x, axis)
    return x


def solve_neumann_poisson(grid: Grid, rhs: np.ndarray) -> np.ndarray:
    """Solve ``Lap_h v = rhs`` with zero-flux walls and ``int v = 0``.

    ``rhs`` is projected onto zero mean first (the compatibility condition).
    On 1D grids the flux form is integrated directly, which is the bidiagonal
    factorisation of the singular tridiagonal system.  On rectangles a
    conjugate-gradient solve on the zero-mean subspace is used.
    """
    scale = float(np.linalg.norm(rhs))
    rhs = rhs - grid.mean(rhs)
    if grid.ndim == 1:
        # face flux A_{i+1/2} * (v_{i+1} - v_i)/h equals the volume-weighted source to the left
        cumulative = np.cumsum(rhs * grid.line_volumes[0])[:-1]
        area = grid.face_areas[0][1:-1]
        slope = cumulative / area
        v = np.concatenate(([0.0], np.cumsum(slope * grid.spacing[0])))
    else:
        shape = grid.shape
        size = int(np.prod(shape))

        def matvec(x: np.ndarray) -> np.ndarray:
            return -neumann_laplacian(grid, x.reshape(shape)).ravel()

        op = LinearOperator((size, size), matvec=matvec, dtype=float)
        b = -rhs.ravel()
        if not np.any(b):
            return np.zeros(shape)
        # absolute floor: a constant input projects to pure round-off
        sol, info = cg(op, b, rtol=POISSON_RTOL, atol=1e-14 * scale, maxiter=20 * size)
        if info != 0:
            raise PoissonSolveError(f"conjugate gradient did not converge (info={info})")
        v = sol.reshape(shape)
    return v - grid.mean(v)
