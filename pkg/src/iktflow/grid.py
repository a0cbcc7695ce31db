"""Uniform periodic Cartesian grids and finite-difference operators.

Fields live on arrays of shape ``(nx, ny, nz)`` (scalars) or ``(3, nx, ny, nz)``
(vectors).  An axis with a single point is treated as a direction of symmetry:
every derivative along it vanishes.  This is how 2D flows are represented.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError


@dataclass(frozen=True)
class Grid:
    """Node-centred periodic grid ``x_i = origin + i * h``."""

    shape: tuple[int, int, int]
    lengths: tuple[float, float, float] = (2 * np.pi, 2 * np.pi, 2 * np.pi)
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        shape = tuple(int(n) for n in self.shape)
        if len(shape) != 3 or min(shape) < 1:
            raise ConfigurationError(f"grid shape must be three positive ints, got {self.shape}")
        for n in shape:
            if 1 < n < 5:
                raise ConfigurationError("periodic 4th-order stencils need at least 5 nodes per active axis")
        if len(self.lengths) != 3 or min(self.lengths) <= 0:
            raise ConfigurationError(f"grid lengths must be positive, got {self.lengths}")
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "lengths", tuple(float(L) for L in self.lengths))
        object.__setattr__(self, "origin", tuple(float(o) for o in self.origin))

    @classmethod
    def square(cls, n: int, length: float = 2 * np.pi) -> "Grid":
        """Planar ``n x n`` grid, flat in z."""
        return cls((n, n, 1), (length, length, length))

    @classmethod
    def cube(cls, n: int, length: float = 2 * np.pi) -> "Grid":
        return cls((n, n, n), (length, length, length))

    @property
    def spacing(self) -> np.ndarray:
        return np.array([L / n for L, n in zip(self.lengths, self.shape)])

    @property
    def active_axes(self) -> tuple[int, ...]:
        return tuple(a for a in range(3) if self.shape[a] > 1)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def cell_volume(self) -> float:
        h = self.spacing
        return float(np.prod([h[a] for a in self.active_axes])) if self.active_axes else 1.0

    def axis_coords(self, axis: int) -> np.ndarray:
        return self.origin[axis] + self.spacing[axis] * np.arange(self.shape[axis])

    def coords(self) -> np.ndarray:
        """Node positions, shape ``(3, nx, ny, nz)``."""
        return np.stack(np.meshgrid(*(self.axis_coords(a) for a in range(3)), indexing="ij"))

    def points(self) -> np.ndarray:
        """Node positions flattened to ``(size, 3)`` in C order."""
        return self.coords().reshape(3, -1).T.copy()

    def wrap(self, r: np.ndarray) -> np.ndarray:
        """Map positions back into the periodic box."""
        o = np.asarray(self.origin)
        L = np.asarray(self.lengths)
        return o + np.mod(np.asarray(r) - o, L)

    def wavenumbers(self, real: bool = True) -> list[np.ndarray]:
        """Angular wavenumbers per axis, broadcastable to the (r)fftn layout."""
        ks = []
        for a in range(3):
            n, L = self.shape[a], self.lengths[a]
            if real and a == 2:
                k = 2 * np.pi * np.fft.rfftfreq(n, d=L / n)
            else:
                k = 2 * np.pi * np.fft.fftfreq(n, d=L / n)
            shape = [1, 1, 1]
            shape[a] = k.size
            ks.append(k.reshape(shape))
        return ks


def ddx(field: np.ndarray, grid: Grid, axis: int) -> np.ndarray:
    """4th-order central first derivative along ``axis`` of a scalar field."""
    if grid.shape[axis] == 1:
        return np.zeros_like(field)
    h = grid.spacing[axis]
    return (
        -np.roll(field, -2, axis) + 8 * np.roll(field, -1, axis)
        - 8 * np.roll(field, 1, axis) + np.roll(field, 2, axis)
    ) / (12 * h)


def d2dx2(field: np.ndarray, grid: Grid, axis: int) -> np.ndarray:
    if grid.shape[axis] == 1:
        return np.zeros_like(field)
    h = grid.spacing[axis]
    return (
        -np.roll(field, -2, axis) + 16 * np.roll(field, -1, axis) - 30 * field
        + 16 * np.roll(field, 1, axis) - np.roll(field, 2, axis)
    ) / (12 * h * h)


def gradient(field: np.ndarray, grid: Grid) -> np.ndarray:
    """Gradient of a scalar field, shape ``(3, nx, ny, nz)``."""
    return np.stack([ddx(field, grid, a) for a in range(3)])


def laplacian(field: np.ndarray, grid: Grid) -> np.ndarray:
    return sum(d2dx2(field, grid, a) for a in range(3))


def vector_gradient(V: np.ndarray, grid: Grid) -> np.ndarray:
    """``G[i, j] = dV_i/dx_j``, shape ``(3, 3, nx, ny, nz)``."""
    return np.stack([gradient(V[i], grid) for i in range(3)])


def divergence(V: np.ndarray, grid: Grid) -> np.ndarray:
    return sum(ddx(V[a], grid, a) for a in range(3))


def vector_laplacian(V: np.ndarray, grid: Grid) -> np.ndarray:
    return np.stack([laplacian(V[i], grid) for i in range(3)])
