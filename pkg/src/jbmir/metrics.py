"""Global SSIM and line profiles."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import GridGeometry, disk_mask


@dataclass(frozen=True)
class SsimParams:
    K1: float = 0.01
    K2: float = 0.03
    L: float | None = None
    fallback_L: float = 1.0

    def constants(self, truth: np.ndarray) -> tuple[float, float, float]:
        """``(L, C1, C2)``; ``L`` defaults to the dynamic range of ``truth``."""
        L = self.L
        if L is None:
            L = float(np.max(truth) - np.min(truth))
            if L == 0:
                L = self.fallback_L
        return L, (self.K1 * L) ** 2, (self.K2 * L) ** 2


def _region(u_rec, u_true, grid, domain):
    u_rec = grid.check(u_rec, "reconstruction")
    u_true = grid.check(u_true, "truth")
    if domain == "disk":
        m = disk_mask(grid)
        return u_rec[m], u_true[m]
    if domain == "full":
        return u_rec.ravel(), u_true.ravel()
    raise ValueError(f"unknown SSIM domain {domain!r}")


def ssim_global(u_rec: np.ndarray, u_true: np.ndarray, grid: GridGeometry,
                params: SsimParams = SsimParams(), domain: str = "disk") -> float:
    """Single-window SSIM from whole-image means, variances and covariance.

    Population moments over the disk pixels (``domain="disk"``) or the
    whole grid (``"full"``); ``L`` is taken from the truth over that region.
    """
    r, t = _region(u_rec, u_true, grid, domain)
    _, C1, C2 = params.constants(t)
    mt, mr = t.mean(), r.mean()
    vt = np.mean((t - mt) ** 2)
    vr = np.mean((r - mr) ** 2)
    cov = np.mean((t - mt) * (r - mr))
    return float((2 * mt * mr + C1) * (2 * cov + C2) / ((mt * mt + mr * mr + C1) * (vt + vr + C2)))


def ssim_report(u_rec, u_true, grid, params: SsimParams = SsimParams(), domain="disk") -> dict:
    _, t = _region(u_rec, u_true, grid, domain)
    L, C1, C2 = params.constants(t)
    return {"ssim": ssim_global(u_rec, u_true, grid, params, domain), "L": L, "C1": C1, "C2": C2,
            "domain": domain}


def line_profile(u: np.ndarray, grid: GridGeometry, column_x: float) -> np.ndarray:
    """``(ny, 2)`` array of ``(y_mm, value)`` down the column nearest ``column_x``."""
    u = grid.check(u, "image")
    j = grid.column_index(column_x)
    return np.column_stack([grid.y_coords(), u[:, j]])
