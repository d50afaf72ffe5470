"""Tensor-product grids with trapezoid weights.

Nodes are stored row-major: for a 2-D grid with axes ``(a, b)`` node
``i * len(b) + j`` is ``(a[i], b[j])``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def trapezoid_weights(axis: np.ndarray) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    if axis.size < 2:
        raise ValueError("an axis needs at least two nodes")
    dx = np.diff(axis)
    w = np.zeros_like(axis)
    w[:-1] += dx / 2
    w[1:] += dx / 2
    return w


@dataclass(frozen=True)
class Grid:
    axes: tuple[np.ndarray, ...]
    nodes: np.ndarray = field(init=False, repr=False)
    weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        axes = tuple(np.asarray(a, dtype=float) for a in self.axes)
        if not 1 <= len(axes) <= 2:
            raise ValueError("grids are limited to dimension 1 or 2")
        for a in axes:
            if a.ndim != 1 or a.size < 2 or np.any(np.diff(a) <= 0):
                raise ValueError("each axis must be strictly increasing with >= 2 nodes")
        mesh = np.meshgrid(*axes, indexing="ij")
        nodes = np.stack([m.ravel() for m in mesh], axis=-1)
        wmesh = np.meshgrid(*[trapezoid_weights(a) for a in axes], indexing="ij")
        weights = np.prod(np.stack([m.ravel() for m in wmesh], axis=-1), axis=-1)
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def uniform(cls, lo: float, hi: float, M: int, dim: int = 1) -> "Grid":
        if hi <= lo:
            raise ValueError("grid requires lo < hi")
        axis = np.linspace(lo, hi, int(M))
        return cls(tuple(axis for _ in range(dim)))

    @property
    def dim(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(a.size for a in self.axes)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def extent(self) -> float:
        """Largest coordinate magnitude on the grid."""
        return float(max(np.abs(a).max() for a in self.axes))

    def partials(self, values: np.ndarray) -> list[np.ndarray]:
        """Grid derivatives along each axis of ``values`` (leading axis = nodes).

        Central differences inside, one-sided at the boundary.
        """
        values = np.asarray(values, dtype=float)
        rest = values.shape[1:]
        arr = values.reshape(self.shape + rest)
        out = []
        for d, axis in enumerate(self.axes):
            g = np.gradient(arr, axis, axis=d, edge_order=1)
            out.append(g.reshape((self.size,) + rest))
        return out

    def describe(self) -> dict:
        return {
            "dim": self.dim,
            "lo": [float(a[0]) for a in self.axes],
            "hi": [float(a[-1]) for a in self.axes],
            "shape": list(self.shape),
        }
