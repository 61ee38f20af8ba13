"""Periodic equidistant 2D grid with matrix-free central differences.

Fields live on arrays of shape ``(..., ny, nx)``; flattening the last two
axes in C order gives the global row-major, x-fastest layout used for every
state vector in the package.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Grid2D:
    """Periodic grid with ``nx * ny`` distinct points.

    The point at ``x1`` is identified with ``x0`` (likewise for ``y``), so
    ``dx = (x1 - x0) / nx``.
    """

    nx: int
    ny: int
    x0: float
    x1: float
    y0: float
    y1: float

    def __post_init__(self):
        if self.nx < 3 or self.ny < 3:
            raise ValueError(f"grid needs at least 3 points per direction, got {self.nx}x{self.ny}")
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise ValueError("domain bounds must satisfy x1 > x0 and y1 > y0")

    @property
    def dx(self) -> float:
        return (self.x1 - self.x0) / self.nx

    @property
    def dy(self) -> float:
        return (self.y1 - self.y0) / self.ny

    @property
    def size(self) -> int:
        return self.nx * self.ny

    @property
    def shape(self) -> tuple[int, int]:
        return (self.ny, self.nx)

    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(X, Y)`` point coordinates, each of shape ``(ny, nx)``."""
        x = self.x0 + self.dx * np.arange(self.nx)
        y = self.y0 + self.dy * np.arange(self.ny)
        return np.meshgrid(x, y, indexing="xy")

    def field(self, values) -> np.ndarray:
        """View flat values (..., nx*ny) as (..., ny, nx)."""
        values = np.asarray(values)
        return values.reshape(values.shape[:-1] + self.shape)

    def ddx(self, f: np.ndarray) -> np.ndarray:
        """Second-order central difference along x with periodic wrap."""
        return _central(f, -1, self.dx)

    def ddy(self, f: np.ndarray) -> np.ndarray:
        """Second-order central difference along y with periodic wrap."""
        return _central(f, -2, self.dy)

    def descriptor(self) -> dict:
        return {"nx": self.nx, "ny": self.ny, "x0": self.x0, "x1": self.x1,
                "y0": self.y0, "y1": self.y1}

    @classmethod
    def from_descriptor(cls, d: dict) -> "Grid2D":
        return cls(int(d["nx"]), int(d["ny"]), float(d["x0"]), float(d["x1"]),
                   float(d["y0"]), float(d["y1"]))


def _central(f, axis, h):
    f = np.asarray(f, dtype=float)
    out = np.empty_like(f)
    fm = np.moveaxis(f, axis, -1)
    om = np.moveaxis(out, axis, -1)
    np.subtract(fm[..., 2:], fm[..., :-2], out=om[..., 1:-1])
    om[..., 0] = fm[..., 1] - fm[..., -1]
    om[..., -1] = fm[..., 0] - fm[..., -2]
    out *= 1.0 / (2.0 * h)
    return out
