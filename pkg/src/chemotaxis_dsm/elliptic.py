"""Neumann elliptic solves: (-Δ + β)⁻¹, (σ - Δ)⁻¹ with variable σ, mean-zero Poisson.

All three operators are symmetric positive (semi-)definite on the cell
grid, so they are solved with preconditioned conjugate gradients applied
matrix-free through :func:`chemotaxis_dsm.grid.laplacian`.  The
preconditioner is the constant-coefficient operator ``(c - Δ)⁻¹``, which
the cosine transform diagonalises exactly on a cell-centred Neumann grid;
for the constant-coefficient problems CG therefore converges in one or
two iterations, and the residual it reports is still the true one.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import fft

from .grid import Grid, laplacian


class EllipticError(RuntimeError):
    """Solve failed; ``residual`` is the last relative residual reached."""

    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class EllipticSolveOptions:
    rel_tolerance: float = 1e-10
    max_iterations: int | None = None  # default: 10 * cells
    preconditioner: str = "auto"  # "spectral", "jacobi", or pick per solve

    def __post_init__(self):
        if not 0 < self.rel_tolerance <= 1e-2:
            raise ValueError(f"rel_tolerance must lie in (0, 1e-2], got {self.rel_tolerance}")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.preconditioner not in ("auto", "spectral", "jacobi"):
            raise ValueError(f"unknown preconditioner {self.preconditioner!r}")

    def iterations_for(self, grid: Grid) -> int:
        return self.max_iterations or 10 * grid.size


DEFAULT_OPTIONS = EllipticSolveOptions()
SPECTRAL_RATIO_LIMIT = 50.0


@lru_cache(maxsize=64)
def _neumann_symbol(grid: Grid) -> np.ndarray:
    """Eigenvalues of -Δ in the DCT-II basis, shaped like the grid."""
    symbol = np.zeros(grid.shape)
    for axis_x in range(grid.dim):
        n, h = grid.cells[axis_x], grid.spacing[axis_x]
        lam = (4.0 / h**2) * np.sin(np.pi * np.arange(n) / (2 * n)) ** 2
        shape = [1] * grid.dim
        shape[grid.dim - 1 - axis_x] = n
        symbol = symbol + lam.reshape(shape)
    symbol.setflags(write=False)
    return symbol


def spectral_inverse(grid: Grid, rhs: np.ndarray, shift: float) -> np.ndarray:
    """Exact ``(shift - Δ)⁻¹ rhs``; the zero mode is dropped when ``shift == 0``."""
    coeffs = fft.dctn(rhs, type=2, norm="ortho")
    denom = _neumann_symbol(grid) + shift
    if shift == 0.0:
        coeffs.flat[0] = 0.0
        denom = denom.copy()
        denom.flat[0] = 1.0
    return fft.idctn(coeffs / denom, type=2, norm="ortho")


def _dot(a, b) -> float:
    return float(np.dot(a.ravel(), b.ravel()))


def pcg(apply_a, rhs, precond, tol, max_iter, x0=None, project=None):
    """Preconditioned conjugate gradients; returns ``(x, relative_residual, iterations)``."""
    bnorm = np.sqrt(_dot(rhs, rhs))
    if bnorm == 0.0:
        return np.zeros_like(rhs), 0.0, 0
    x = np.zeros_like(rhs) if x0 is None else x0.copy()
    r = rhs - apply_a(x) if x0 is not None else rhs.copy()
    if project is not None:
        r = project(r)
    z = precond(r)
    p = z.copy()
    rz = _dot(r, z)
    rel = np.sqrt(_dot(r, r)) / bnorm
    it = 0
    while rel > tol and it < max_iter:
        ap = apply_a(p)
        alpha = rz / _dot(p, ap)
        x += alpha * p
        r -= alpha * ap
        if project is not None:
            r = project(r)
        it += 1
        rel = np.sqrt(_dot(r, r)) / bnorm
        if rel <= tol:
            break
        z = precond(r)
        rz_new = _dot(r, z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    # recurrence residuals drift; confirm with the true one
    true_r = rhs - apply_a(x)
    if project is not None:
        true_r = project(true_r)
    return x, float(np.sqrt(_dot(true_r, true_r)) / bnorm), it


def _finish(x, rel, tol, what):
    # the recursive residual can undershoot the true one by a few ulps of the
    # operator norm; allow a small factor before calling it a failure
    if not np.isfinite(rel) or rel > 10 * tol:
        raise EllipticError(f"{what} did not converge (relative residual {rel:.3e})", rel)
    return x


def helmholtz_solve(grid: Grid, rhs, beta: float, opts: EllipticSolveOptions = DEFAULT_OPTIONS):
    """Solve ``-Δz + βz = rhs`` with zero-flux boundaries."""
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")
    rhs = np.asarray(rhs, dtype=float)

    def apply_a(z):
        return beta * z - laplacian(grid, z)

    if opts.preconditioner != "jacobi":
        precond = lambda r: spectral_inverse(grid, r, beta)  # noqa: E731
    else:
        diag = beta + sum(2.0 / h**2 for h in grid.spacing)
        precond = lambda r: r / diag  # noqa: E731
    x, rel, _ = pcg(apply_a, rhs, precond, opts.rel_tolerance, opts.iterations_for(grid))
    return _finish(x, rel, opts.rel_tolerance, "helmholtz_solve")


def _jacobi_diagonal(grid: Grid, sigma):
    # -Δ diagonal is 2/h^2 per axis except 1/h^2 in boundary cells (mirror ghost)
    diag = np.array(sigma, dtype=float, copy=True)
    for axis_x in range(grid.dim):
        n, h = grid.cells[axis_x], grid.spacing[axis_x]
        d = np.full(n, 2.0 / h**2)
        d[0] = d[-1] = 1.0 / h**2
        shape = [1] * grid.dim
        shape[grid.dim - 1 - axis_x] = n
        diag = diag + d.reshape(shape)
    return diag


def weighted_helmholtz_solve(
    grid: Grid, sigma, rhs, opts: EllipticSolveOptions = DEFAULT_OPTIONS, x0=None
):
    """Solve ``σ p - Δp = rhs`` for a strictly positive weight field ``σ``."""
    sigma = np.asarray(sigma, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    if sigma.shape != grid.shape:
        raise ValueError("sigma has the wrong shape")
    smin = float(sigma.min())
    if not smin > 0 or not np.all(np.isfinite(sigma)):
        raise ValueError(f"sigma must be finite and strictly positive (min {smin})")

    def apply_a(p):
        return sigma * p - laplacian(grid, p)

    smax = float(sigma.max())
    kind = opts.preconditioner
    if kind == "auto":
        # the constant-shift inverse only bounds the spectrum by smax/smin
        kind = "spectral" if smax <= SPECTRAL_RATIO_LIMIT * smin else "jacobi"
    if kind == "spectral":
        shift = float(np.sqrt(smin * smax))
        precond = lambda r: spectral_inverse(grid, r, shift)  # noqa: E731
    else:
        diag = _jacobi_diagonal(grid, sigma)
        precond = lambda r: r / diag  # noqa: E731
    x, rel, _ = pcg(apply_a, rhs, precond, opts.rel_tolerance, opts.iterations_for(grid), x0=x0)
    return _finish(x, rel, opts.rel_tolerance, "weighted_helmholtz_solve")


def poisson_meanzero_solve(grid: Grid, rhs, opts: EllipticSolveOptions = DEFAULT_OPTIONS):
    """Solve ``-ΔU = rhs`` with ``<U> = 0``; ``rhs`` must have zero mean."""
    rhs = np.asarray(rhs, dtype=float)
    scale = float(np.max(np.abs(rhs))) if rhs.size else 0.0
    avg = float(rhs.mean())
    if abs(avg) > 1e-10 * scale:
        raise ValueError(f"incompatible right-hand side: mean {avg:.3e} is not zero")

    def project(z):
        return z - z.mean()

    rhs = project(rhs)

    def apply_a(z):
        return -laplacian(grid, z)

    if opts.preconditioner != "jacobi":
        precond = lambda r: spectral_inverse(grid, r, 0.0)  # noqa: E731
    else:
        diag = _jacobi_diagonal(grid, np.zeros(grid.shape))
        precond = lambda r: project(r / diag)  # noqa: E731
    x, rel, _ = pcg(apply_a, rhs, precond, opts.rel_tolerance, opts.iterations_for(grid), project=project)
    return project(_finish(x, rel, opts.rel_tolerance, "poisson_meanzero_solve"))
