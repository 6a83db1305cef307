"""Numerical phantom pairs, rasterisation and relative Gaussian noise."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import GridGeometry, disk_mask

MODALITIES = ("xct", "dot")


@dataclass(frozen=True)
class ShapeSpec:
    """A circle or ellipse with optional per-modality values (mm^-1).

    A value of ``None`` means the shape does not exist in that modality.
    ``axes`` holds the semi-axes ``(a, b)`` of an ellipse along its rotated
    x and y directions; for circles both equal ``radius``.
    """

    kind: str
    center: tuple[float, float]
    radius: float = 0.0
    axes: tuple[float, float] | None = None
    angle_deg: float = 0.0
    xct: float | None = None
    dot: float | None = None
    label: str = ""

    def __post_init__(self):
        if self.kind not in ("circle", "ellipse"):
            raise ValueError(f"unknown shape kind {self.kind!r}")
        if self.kind == "circle" and self.radius <= 0:
            raise ValueError("circle radius must be positive")
        if self.kind == "ellipse" and (self.axes is None or min(self.axes) <= 0):
            raise ValueError("ellipse needs two positive semi-axes")
        for m in MODALITIES:
            v = getattr(self, m)
            if v is not None and v <= 0:
                raise ValueError("shape values must be positive")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if self.axes is not None:
            object.__setattr__(self, "axes", tuple(float(a) for a in self.axes))

    def contains(self, x, y):
        """Point-in-shape test, vectorised over ``x`` and ``y``."""
        dx = np.asarray(x, dtype=float) - self.center[0]
        dy = np.asarray(y, dtype=float) - self.center[1]
        if self.kind == "circle":
            return dx * dx + dy * dy <= self.radius**2
        a, b = self.axes
        th = np.deg2rad(self.angle_deg)
        xr = dx * np.cos(th) + dy * np.sin(th)
        yr = -dx * np.sin(th) + dy * np.cos(th)
        return (xr / a) ** 2 + (yr / b) ** 2 <= 1.0

    def extent(self) -> float:
        """Largest distance of the shape from the origin."""
        r = self.radius if self.kind == "circle" else max(self.axes)
        return float(np.hypot(*self.center) + r)

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "center": list(self.center), "angle_deg": self.angle_deg, "label": self.label}
        if self.kind == "circle":
            d["radius"] = self.radius
        else:
            d["axes"] = list(self.axes)
        for m in MODALITIES:
            if getattr(self, m) is not None:
                d[m] = getattr(self, m)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ShapeSpec":
        d = dict(d)
        if "axes" in d:
            d["axes"] = tuple(d["axes"])
        d["center"] = tuple(d["center"])
        return cls(**d)


@dataclass(frozen=True)
class PhantomPair:
    name: str
    shapes: tuple[ShapeSpec, ...] = field(default_factory=tuple)
    background_xct: float = 1.0
    background_dot: float = 0.01

    def shape(self, label: str) -> ShapeSpec:
        for s in self.shapes:
            if s.label == label:
                return s
        raise KeyError(label)

    def to_dict(self) -> dict:
        return {"name": self.name, "background_xct": self.background_xct,
                "background_dot": self.background_dot, "shapes": [s.to_dict() for s in self.shapes]}

    @classmethod
    def from_dict(cls, d: dict) -> "PhantomPair":
        return cls(name=d.get("name", "custom"),
                   shapes=tuple(ShapeSpec.from_dict(s) for s in d.get("shapes", [])),
                   background_xct=d.get("background_xct", 1.0),
                   background_dot=d.get("background_dot", 0.01))


def _polar(r, deg):
    t = np.deg2rad(deg)
    return (float(r * np.cos(t)), float(r * np.sin(t)))


# Positions are qualitative reconstructions of the published figures.
_RING = 13.5
_R_MAIN = 6.0
_R_MIDDLE = 5.0
_R_SMALL = 2.5
# inside the 330 degree circle, on a pixel corner so its staircase area is
# stable under grid refinement
_SMALL_CENTER = (11.5, -6.5)


def _phantom1_like(name, middle):
    return PhantomPair(name, (
        middle,
        ShapeSpec("circle", _polar(_RING, 210), _R_MAIN, xct=2.0, dot=0.03, label="left"),
        ShapeSpec("circle", _polar(_RING, 330), _R_MAIN, xct=2.0, dot=0.03, label="right"),
        ShapeSpec("circle", _polar(_RING, 90), _R_MAIN, dot=0.03, label="top"),
        ShapeSpec("circle", _SMALL_CENTER, _R_SMALL, xct=2.5, label="small"),
    ))


def builtin_phantom(name: str) -> PhantomPair:
    """``phantom1``, ``phantom2`` or ``phantom3``."""
    if name == "phantom1":
        return _phantom1_like(name, ShapeSpec("circle", (0.0, 0.0), _R_MIDDLE, xct=2.0, dot=0.03, label="middle"))
    if name == "phantom3":
        return _phantom1_like(name, ShapeSpec("ellipse", (0.0, 0.0), axes=(8.0, 4.5), xct=2.0, dot=0.03,
                                              label="middle"))
    if name == "phantom2":
        circles = tuple(
            ShapeSpec("circle", _polar(12.0, a), _R_MAIN, xct=2.0, dot=0.03, label=f"c{a}")
            for a in (45, 135, 225, 315)
        )
        return PhantomPair(name, circles + (
            ShapeSpec("circle", _polar(12.0, 315), _R_SMALL, xct=2.5, label="small"),))
    raise KeyError(f"unknown phantom {name!r}")


BUILTIN_NAMES = ("phantom1", "phantom2", "phantom3")


def rasterize(p: PhantomPair, g: GridGeometry, modality: str, mu_floor: float = 1e-6) -> np.ndarray:
    """Coefficient map: background on the disk, shapes painted in order,
    zero (XCT) or ``mu_floor`` (DOT) outside the disk."""
    if modality not in MODALITIES:
        raise ValueError(f"unknown modality {modality!r}")
    inside = disk_mask(g)
    out = np.where(inside, p.background_xct if modality == "xct" else p.background_dot,
                   0.0 if modality == "xct" else mu_floor)
    X, Y = g.mesh()
    for s in p.shapes:
        value = getattr(s, modality)
        if value is not None:
            out[s.contains(X, Y) & inside] = value
    return out


def shape_region(s: ShapeSpec, g: GridGeometry) -> np.ndarray:
    """Pixel footprint of a shape on the disk."""
    X, Y = g.mesh()
    return s.contains(X, Y) & disk_mask(g)


def standard_normal(n: int, seed: int, stream: int = 0) -> np.ndarray:
    """Standard normal draws from a Philox-4x64 stream keyed by ``(seed, stream)``
    via the Box-Muller cosine branch."""
    key = np.array([seed, stream], dtype=np.uint64)
    rng = np.random.Generator(np.random.Philox(key=key))
    u = rng.random((2, n))
    return np.sqrt(-2.0 * np.log1p(-u[0])) * np.cos(2.0 * np.pi * u[1])


def add_noise(data: np.ndarray, eta: float, seed: int, stream: int = 0) -> np.ndarray:
    """Return ``data + n`` with Gaussian ``n`` scaled so ``|n| / |data| = eta``."""
    data = np.asarray(data, dtype=float)
    if eta < 0:
        raise ValueError("noise level must be non-negative")
    if eta == 0:
        return data.copy()
    norm = np.linalg.norm(data)
    if norm == 0:
        raise ValueError("cannot add relative noise to all-zero data")
    n = standard_normal(data.size, seed, stream).reshape(data.shape)
    n *= eta * norm / np.linalg.norm(n)
    return data + n
