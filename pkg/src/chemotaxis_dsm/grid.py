"""Cell-centred box grids, the Neumann Laplacian, quadrature and norms.

Fields are plain ``numpy`` arrays whose shape is ``grid.shape``.  In two
dimensions the array is indexed ``[j, i]`` (y slow, x fast), so that
``field.ravel()`` is the row-major ``i + nx * j`` ordering used by the
snapshot files.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

MIN_CELLS = 4


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class Grid:
    """Uniform cell-centred grid on ``[0, L_x] (x [0, L_y])``."""

    dim: int
    cells: tuple[int, ...]
    lengths: tuple[float, ...]

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise GridError(f"dim must be 1 or 2, got {self.dim}")
        if len(self.cells) != self.dim or len(self.lengths) != self.dim:
            raise GridError("need one cell count and one length per axis")
        for n in self.cells:
            if int(n) != n or n < MIN_CELLS:
                raise GridError(f"cell counts must be integers >= {MIN_CELLS}, got {n}")
        for length in self.lengths:
            if not (length > 0 and math.isfinite(length)):
                raise GridError(f"lengths must be positive, got {length}")

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(length / n for length, n in zip(self.lengths, self.cells))

    @property
    def shape(self) -> tuple[int, ...]:
        # numpy order: slowest axis first
        return tuple(reversed(self.cells))

    @property
    def size(self) -> int:
        return math.prod(self.cells)

    @property
    def cell_volume(self) -> float:
        return math.prod(self.spacing)

    @property
    def measure(self) -> float:
        return math.prod(self.lengths)

    def centers(self, axis: int = 0) -> np.ndarray:
        """1D cell-centre coordinates ``(i + 1/2) h`` along ``axis`` (0 = x)."""
        n, h = self.cells[axis], self.spacing[axis]
        return (np.arange(n) + 0.5) * h

    def mesh(self) -> tuple[np.ndarray, ...]:
        """Coordinate arrays broadcast to ``self.shape`` (x first)."""
        if self.dim == 1:
            return (self.centers(0),)
        y, x = np.meshgrid(self.centers(1), self.centers(0), indexing="ij")
        return x, y

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape)

    def full(self, value: float) -> np.ndarray:
        return np.full(self.shape, float(value))


def build_grid(dim: int, cells, lengths) -> Grid:
    return Grid(int(dim), tuple(int(n) for n in cells), tuple(float(x) for x in lengths))


def _check(grid: Grid, f: np.ndarray) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if f.shape != grid.shape:
        raise GridError(f"field shape {f.shape} does not match grid {grid.shape}")
    return f


def _axis_second_difference(f: np.ndarray, axis: int, h: float) -> np.ndarray:
    # mirror ghost cells: f[-1] = f[0], f[n] = f[n-1]  =>  zero boundary flux
    flux = np.diff(f, axis=axis) / h
    pad = [(0, 0)] * f.ndim
    pad[axis] = (1, 1)
    flux = np.pad(flux, pad)
    return np.diff(flux, axis=axis) / h


def laplacian(grid: Grid, f) -> np.ndarray:
    """Finite-volume Laplacian with homogeneous Neumann conditions."""
    f = _check(grid, f)
    out = np.zeros_like(f)
    for axis_x in range(grid.dim):
        out += _axis_second_difference(f, f.ndim - 1 - axis_x, grid.spacing[axis_x])
    return out


laplacian_apply = laplacian


def face_gradients(grid: Grid, f) -> list[np.ndarray]:
    """Interior face differences ``(f[i+1] - f[i]) / h`` per axis (x first)."""
    f = _check(grid, f)
    return [np.diff(f, axis=f.ndim - 1 - a) / grid.spacing[a] for a in range(grid.dim)]


def dirichlet_energy(grid: Grid, f) -> float:
    """Discrete ``||grad f||_2^2``: sum over interior faces of (df/h)^2 times face volume.

    Equals ``-<f, laplacian(f)>`` exactly, which is the summation-by-parts
    identity the Lyapunov bookkeeping relies on.
    """
    vol = grid.cell_volume
    return float(sum(np.sum(g * g) for g in face_gradients(grid, f)) * vol)


def integrate(grid: Grid, f) -> float:
    f = _check(grid, f)
    return float(math.fsum(f.ravel()) * grid.cell_volume)


def mean(grid: Grid, f) -> float:
    return integrate(grid, f) / grid.measure


def lp_norm(grid: Grid, f, p: float) -> float:
    f = _check(grid, f)
    if p == math.inf:
        return float(np.max(np.abs(f)))
    if not p >= 1:
        raise GridError(f"p must be >= 1 or inf, got {p}")
    a = np.abs(f)
    scale = float(a.max())
    if scale == 0.0:
        return 0.0
    # scale out the maximum so large p does not overflow
    return scale * (float(np.sum((a / scale) ** p)) * grid.cell_volume) ** (1.0 / p)
