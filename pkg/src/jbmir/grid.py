"""Pixel grid geometry and the discrete differential operators.

Fields are plain ``(ny, nx)`` float arrays. Row 0 is the top of the image
(largest physical y), column 0 the left edge (smallest physical x). Vector
fields are ``(2, ny, nx)`` arrays holding the column-direction and the
row-direction components.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class GridGeometry:
    """Rectangular pixel grid housing the circular object domain.

    Parameters
    ----------
    nx, ny : int
        Number of pixel columns and rows.
    h : float
        Pixel pitch in mm.
    center : tuple of float
        Physical (x, y) of the grid center in mm.
    disk_radius : float
        Radius of the object disk in mm.
    """

    nx: int = 100
    ny: int = 100
    h: float = 0.5
    center: tuple[float, float] = (0.0, 0.0)
    disk_radius: float = 25.0

    def __post_init__(self):
        if self.nx <= 0 or self.ny <= 0:
            raise ValueError("grid dimensions must be positive")
        if self.h <= 0:
            raise ValueError("pixel pitch must be positive")
        if self.nx * self.h < 2 * self.disk_radius - 1e-12 or self.ny * self.h < 2 * self.disk_radius - 1e-12:
            raise ValueError("grid does not cover the disk")
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))

    @property
    def shape(self) -> tuple[int, int]:
        return (self.ny, self.nx)

    @property
    def pixel_area(self) -> float:
        return self.h * self.h

    def x_coords(self) -> np.ndarray:
        """Physical x of each column center, increasing left to right."""
        return self.center[0] + (np.arange(self.nx) - (self.nx - 1) / 2.0) * self.h

    def y_coords(self) -> np.ndarray:
        """Physical y of each row center, decreasing top to bottom."""
        return self.center[1] + ((self.ny - 1) / 2.0 - np.arange(self.ny)) * self.h

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(X, Y)`` pixel-center coordinates, each of shape ``(ny, nx)``."""
        return np.meshgrid(self.x_coords(), self.y_coords())

    def column_index(self, x: float) -> int:
        """Index of the column whose center is nearest to ``x``; raises if off-grid."""
        j = int(np.rint((x - self.center[0]) / self.h + (self.nx - 1) / 2.0))
        if not 0 <= j < self.nx:
            raise ValueError(f"x = {x} mm lies outside the grid")
        return j

    def check(self, f: np.ndarray, name: str = "field") -> np.ndarray:
        f = np.asarray(f, dtype=float)
        if f.shape != self.shape:
            raise ValueError(f"{name} has shape {f.shape}, grid expects {self.shape}")
        return f


def forward_gradient(f: np.ndarray, h: float) -> np.ndarray:
    """Forward-difference gradient with zero difference past the last pixel.

    Returns a ``(2, ny, nx)`` array: component 0 differences along columns
    (physical +x), component 1 along rows (top to bottom).
    """
    f = np.asarray(f, dtype=float)
    g = np.zeros((2,) + f.shape)
    g[0, :, :-1] = (f[:, 1:] - f[:, :-1]) / h
    g[1, :-1, :] = (f[1:, :] - f[:-1, :]) / h
    return g


def backward_divergence(p: np.ndarray, h: float) -> np.ndarray:
    """Backward-difference divergence, the negative adjoint of :func:`forward_gradient`."""
    p = np.asarray(p, dtype=float)
    px, py = p[0], p[1]
    d = np.zeros(px.shape)
    d[:, 0] = px[:, 0]
    d[:, 1:-1] = px[:, 1:-1] - px[:, :-2]
    d[:, -1] = -px[:, -2]
    d[0, :] += py[0, :]
    d[1:-1, :] += py[1:-1, :] - py[:-2, :]
    d[-1, :] -= py[-2, :]
    return d / h


def grad_norm_sq(f: np.ndarray, h: float) -> np.ndarray:
    """Pointwise squared magnitude of the forward-difference gradient."""
    g = forward_gradient(f, h)
    return g[0] ** 2 + g[1] ** 2


def disk_mask(g: GridGeometry) -> np.ndarray:
    """Boolean mask of pixels whose center lies within the disk."""
    X, Y = g.mesh()
    return (X - g.center[0]) ** 2 + (Y - g.center[1]) ** 2 <= g.disk_radius**2


def integrate(f: np.ndarray, h: float) -> float:
    """Pixel quadrature ``h**2 * sum(f)``."""
    return float(h * h * np.sum(f))
