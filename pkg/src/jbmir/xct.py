"""Parallel-beam Radon transform and its exact discrete adjoint.

Each line integral is approximated by bilinear samples of the image taken at
a fixed step along the ray. The whole operator is stored as one sparse
matrix, so backprojection is its transpose and the adjoint identity holds to
rounding error.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .grid import GridGeometry


@dataclass(frozen=True)
class ScanGeometry:
    """Parallel-beam acquisition: ``n_views`` normal angles in [0, 180) degrees
    and ``n_rays`` rays per view, symmetric about the rotation center.

    ``step`` is the sampling interval along each ray in mm. ``None`` means
    half the pixel pitch of the image grid.
    """

    n_views: int = 30
    n_rays: int = 100
    spacing: float = 0.5
    step: float | None = None

    def __post_init__(self):
        if self.n_views <= 0 or self.n_rays <= 0:
            raise ValueError("n_views and n_rays must be positive")
        if self.spacing <= 0 or (self.step is not None and self.step <= 0):
            raise ValueError("ray spacing and sampling step must be positive")

    @property
    def angles(self) -> np.ndarray:
        """Normal angles in radians, ``k * pi / n_views``."""
        return np.arange(self.n_views) * np.pi / self.n_views

    @property
    def offsets(self) -> np.ndarray:
        """Signed ray offsets from the rotation center in mm."""
        return (np.arange(self.n_rays) - (self.n_rays - 1) / 2.0) * self.spacing

    def sampling_step(self, grid: GridGeometry) -> float:
        return grid.h / 2.0 if self.step is None else self.step

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_views, self.n_rays)


def _bilinear_weights(grid: GridGeometry, px: np.ndarray, py: np.ndarray):
    """Row-major pixel indices and weights for bilinear sampling at (px, py).

    Neighbours that fall outside the grid are dropped, which is equivalent to
    zero padding. Returns ``(sample_index, pixel_index, weight)`` triplets.
    """
    # continuous (column, row) coordinates of the sample points
    cx = (px - grid.center[0]) / grid.h + (grid.nx - 1) / 2.0
    cy = (grid.ny - 1) / 2.0 - (py - grid.center[1]) / grid.h
    j0 = np.floor(cx).astype(np.int64)
    i0 = np.floor(cy).astype(np.int64)
    fx = cx - j0
    fy = cy - i0
    sample = np.arange(px.size)
    rows, cols, vals = [], [], []
    for di, dj, w in (
        (0, 0, (1 - fy) * (1 - fx)),
        (0, 1, (1 - fy) * fx),
        (1, 0, fy * (1 - fx)),
        (1, 1, fy * fx),
    ):
        i = i0 + di
        j = j0 + dj
        ok = (i >= 0) & (i < grid.ny) & (j >= 0) & (j < grid.nx) & (w != 0)
        rows.append(sample[ok])
        cols.append(i[ok] * grid.nx + j[ok])
        vals.append(w[ok])
    return np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)


@lru_cache(maxsize=8)
def system_matrix(scan: ScanGeometry, grid: GridGeometry) -> sp.csr_matrix:
    """Sparse ``(n_views * n_rays, ny * nx)`` projection matrix.

    Row ``k * n_rays + m`` integrates along the line
    ``x cos(theta_k) + y sin(theta_k) = s_m`` relative to the grid center.
    """
    step = scan.sampling_step(grid)
    half = 0.5 * np.hypot(grid.nx * grid.h, grid.ny * grid.h) + grid.h
    n_half = int(np.ceil(half / step))
    t = np.arange(-n_half, n_half + 1) * step

    blocks = []
    for theta in scan.angles:
        c, s = np.cos(theta), np.sin(theta)
        # sample points for all rays of this view: (n_rays, n_t)
        px = grid.center[0] + scan.offsets[:, None] * c - t[None, :] * s
        py = grid.center[1] + scan.offsets[:, None] * s + t[None, :] * c
        r, col, w = _bilinear_weights(grid, px.ravel(), py.ravel())
        ray = r // t.size
        blocks.append(
            sp.csr_matrix((w * step, (ray, col)), shape=(scan.n_rays, grid.nx * grid.ny))
        )
    A = sp.vstack(blocks, format="csr")
    A.sum_duplicates()
    return A


def radon_forward(u: np.ndarray, scan: ScanGeometry, grid: GridGeometry) -> np.ndarray:
    """Sinogram of ``u`` as an ``(n_views, n_rays)`` array."""
    u = grid.check(u, "image")
    return (system_matrix(scan, grid) @ u.ravel()).reshape(scan.shape)


def radon_adjoint(g: np.ndarray, scan: ScanGeometry, grid: GridGeometry) -> np.ndarray:
    """Exact transpose of :func:`radon_forward` mapping a sinogram to an image."""
    g = np.asarray(g, dtype=float)
    if g.shape != scan.shape:
        raise ValueError(f"sinogram has shape {g.shape}, scan expects {scan.shape}")
    return (system_matrix(scan, grid).T @ g.ravel()).reshape(grid.shape)
