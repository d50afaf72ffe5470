"""Weighted sup-norms on grids.

All suprema are taken over grid nodes. ``v = exp(eta * V)`` enters only
through :class:`WeightFunction`; the norm code never sees ``eta``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from .grid import Grid


@dataclass(frozen=True)
class WeightFunction:
    V: Callable[[np.ndarray], np.ndarray]
    grad_V: Callable[[np.ndarray], np.ndarray]
    eta: float = 1.0
    name: str = "V"

    def __post_init__(self):
        if not 0 < self.eta <= 1:
            raise ValueError("eta must lie in (0, 1]")

    def log_v(self, x) -> np.ndarray:
        return self.eta * self.V(np.asarray(x, dtype=float))

    def __call__(self, x) -> np.ndarray:
        return np.exp(self.log_v(x))

    def grad_v(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.eta * self.grad_V(x) * self(x)[..., None]

    def scaled(self, eta: float) -> "WeightFunction":
        return WeightFunction(self.V, self.grad_V, eta, self.name)

    def validate(self, grid: Grid, tol: float = 1e-5) -> None:
        """Check ``V >= 0``, the gradient against central differences, and growth at the boundary."""
        x = grid.nodes
        Vx = self.V(x)
        if np.any(Vx < 0):
            raise ValueError("V must be nonnegative (v >= 1)")
        g = self.grad_V(x)
        for i in range(grid.dim):
            h = 1e-6 * (1 + np.abs(x[:, i]))
            e = np.zeros_like(x)
            e[:, i] = h
            fd = (self.V(x + e) - self.V(x - e)) / (2 * h)
            if np.any(np.abs(fd - g[:, i]) > tol * (1 + np.abs(g[:, i]))):
                raise ValueError("grad_V disagrees with finite differences of V")
        # compact sublevel sets: V on the outer shell must exceed its value at the centre
        radius = np.abs(x).max(axis=1)
        shell = radius >= radius.max() - 1e-12
        inner = radius <= radius.min() + 1e-12
        if not Vx[shell].min() > Vx[inner].max():
            raise ValueError("V does not grow towards the grid boundary")


def quadratic_weight(coef: float = 0.1, eta: float = 1.0) -> WeightFunction:
    """``V(x) = coef * |x|^2``."""
    return WeightFunction(lambda x: coef * (x**2).sum(-1), lambda x: 2 * coef * x, eta,
                          f"{coef}*|x|^2")


def unit_weight() -> WeightFunction:
    return WeightFunction(lambda x: np.zeros(x.shape[:-1]), lambda x: np.zeros_like(x), 1.0, "0")


@dataclass
class GridFunction:
    grid: Grid
    values: np.ndarray
    derivs: Optional[list[np.ndarray]] = field(default=None)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.size,):
            raise ValueError("values must have one entry per grid node")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("grid function has non-finite entries")

    @classmethod
    def from_callable(cls, grid: Grid, f, grad_f=None) -> "GridFunction":
        vals = f(grid.nodes)
        derivs = None
        if grad_f is not None:
            g = grad_f(grid.nodes)
            derivs = [g[:, i] for i in range(grid.dim)]
        return cls(grid, vals, derivs)

    def with_grid_derivatives(self) -> "GridFunction":
        return GridFunction(self.grid, self.values, self.grid.partials(self.values))

    def __add__(self, other):
        derivs = None
        if self.derivs is not None and other.derivs is not None:
            derivs = [a + b for a, b in zip(self.derivs, other.derivs)]
        return GridFunction(self.grid, self.values + other.values, derivs)

    def __mul__(self, c: float):
        derivs = None if self.derivs is None else [c * d for d in self.derivs]
        return GridFunction(self.grid, c * self.values, derivs)

    __rmul__ = __mul__


def _weights_on(grid: Grid, v) -> np.ndarray:
    if isinstance(v, WeightFunction):
        return v(grid.nodes)
    return np.asarray(v, dtype=float)


def v_norm(f: GridFunction, v) -> float:
    vv = _weights_on(f.grid, v)
    if f.values.size == 0:
        raise ValueError("empty grid")
    return float(np.max(np.abs(f.values) / vv))


def sobolev_norm_v1(f: GridFunction, v) -> float:
    if f.derivs is None:
        raise ValueError("grid function has no derivatives; call with_grid_derivatives()")
    vv = _weights_on(f.grid, v)
    terms = [np.max(np.abs(f.values) / vv)]
    terms += [np.max(np.abs(d) / vv) for d in f.derivs]
    return float(max(terms))


def measure_v_norm(mu, v_values) -> float:
    """Dual norm of a signed measure on nodes: ``sum |mu_i| v_i``.

    Exact for measures supported on finitely many nodes; a continuum measure
    is only approximated through its discretisation.
    """
    mu = np.asarray(mu, dtype=float)
    if not np.all(np.isfinite(mu)):
        raise ValueError("measure has non-finite weights")
    return float(np.sum(np.abs(mu) * np.asarray(v_values, dtype=float)))


def operator_v_norm(matrix: np.ndarray, v_values) -> float:
    """Induced norm on the weighted sup space: ``max_i sum_j |K_ij| v_j / v_i``."""
    K = np.asarray(matrix)
    vv = np.asarray(v_values, dtype=float)
    return float(np.max((np.abs(K) @ vv) / vv))


def operator_v1_norm(matrix: np.ndarray, grid: Grid, v_values) -> float:
    """Bound on the (v,1)-operator norm of a kernel matrix.

    The worst unit-v-norm input is ``g = v * sign`` row by row, so the value
    part is :func:`operator_v_norm` and each derivative part is the same
    formula applied to the row-wise grid derivative of the matrix.
    """
    vv = np.asarray(v_values, dtype=float)
    terms = [operator_v_norm(matrix, vv)]
    terms += [operator_v_norm(d, vv) for d in grid.partials(np.asarray(matrix))]
    return float(max(terms))


class DecayFit(NamedTuple):
    b0: float
    rho0: float
    r_squared: float


def decay_rate_fit(norm_series: Sequence[tuple[float, float]]) -> DecayFit:
    """Least-squares fit ``log ||.|| = log b0 + t log rho0``."""
    data = np.asarray(norm_series, dtype=float)
    if data.ndim != 2 or data.shape[0] < 3:
        raise ValueError("decay_rate_fit needs at least three (t, norm) pairs")
    t, y = data[:, 0], data[:, 1]
    if np.any(y <= 0):
        raise ValueError("decay_rate_fit needs positive norms")
    logy = np.log(y)
    slope, intercept = np.polyfit(t, logy, 1)
    resid = logy - (intercept + slope * t)
    ss_tot = np.sum((logy - logy.mean()) ** 2)
    ss_res = np.sum(resid**2)
    r2 = 1.0 if ss_tot <= 1e-300 else 1.0 - ss_res / ss_tot
    return DecayFit(float(np.exp(intercept)), float(np.exp(slope)), float(r2))
