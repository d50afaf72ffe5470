"""Monte Carlo estimators for ``P^t f`` and ``Q^t grad f``.

``Q^t g(x) = E_x[S(t)^T g(X(t))]``; when gradient and expectation can
be exchanged, ``grad P^t f = Q^t grad f``. :func:`gradient_identity_check`
tests that identity against common-random-number finite differences.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Callable, Optional, Union

import numpy as np

from . import _mc
from .model import ModelSpec
from .simulate import trajectories

MIN_FD_STEP = 1e-8


@dataclass
class EstimatorResult:
    value: Union[float, np.ndarray]
    std_error: Union[float, np.ndarray]
    samples: int
    seed: Optional[int]
    extra: Optional[dict] = None

    def as_dict(self) -> dict:
        out = {
            "value": np.asarray(self.value).tolist(),
            "std_error": np.asarray(self.std_error).tolist(),
            "samples": self.samples,
            "seed": self.seed,
        }
        if self.extra:
            out.update(self.extra)
        return out


@dataclass(frozen=True)
class TestFunction:
    """A ``C^1`` test function with its gradient, vectorised over ``(..., l)``."""

    __test__ = False  # not a pytest class

    f: Callable[[np.ndarray], np.ndarray]
    grad_f: Callable[[np.ndarray], np.ndarray]
    growth_tag: str = "bounded"
    name: str = "f"

    def __call__(self, x):
        return self.f(np.asarray(x, dtype=float))

    def grad(self, x):
        return self.grad_f(np.asarray(x, dtype=float))


GROWTH_ORDER = {"bounded": 0, "linear": 1, "quadratic": 2}


def builtin_function(name: str) -> TestFunction:
    """Coordinate sums: ``x -> sum x_i``, ``x2 -> sum x_i^2``, ``tanh``, ``const``."""
    if name == "x":
        return TestFunction(lambda x: x.sum(-1), lambda x: np.ones_like(x), "linear", "x")
    if name == "x2":
        return TestFunction(lambda x: (x**2).sum(-1), lambda x: 2 * x, "quadratic", "x2")
    if name == "tanh":
        return TestFunction(lambda x: np.tanh(x).sum(-1), lambda x: 1 - np.tanh(x) ** 2,
                            "bounded", "tanh")
    if name == "const":
        return TestFunction(lambda x: np.ones(x.shape[:-1]), lambda x: np.zeros_like(x),
                            "bounded", "const")
    raise ValueError(f"unknown builtin function {name!r}")


def check_gradient(f: TestFunction, dim: int, points: int = 50, seed: int = 0) -> float:
    """Worst relative mismatch between ``grad_f`` and central differences of ``f``."""
    rng = np.random.default_rng(seed)
    x = 2 * rng.standard_normal((points, dim))
    g = f.grad(x)
    worst = 0.0
    for i in range(dim):
        h = 1e-6 * (1 + np.abs(x[:, i]))
        e = np.zeros_like(x)
        e[:, i] = h
        fd = (f(x + e) - f(x - e)) / (2 * h)
        worst = max(worst, float(np.max(np.abs(fd - g[:, i]) / (1 + np.abs(g[:, i])))))
    return worst


def _as_state(model: ModelSpec, x) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (model.dim_state,):
        raise ValueError(f"x must have shape ({model.dim_state},)")
    return x


def _grad_callable(g) -> Callable:
    return g.grad if isinstance(g, TestFunction) else g


def estimate_ptf(model: ModelSpec, f: TestFunction, x, t: int, N: int, seed: int) -> EstimatorResult:
    if N < 2 or t < 0:
        raise ValueError("estimate_ptf needs N >= 2 and t >= 0")
    x = _as_state(model, x)
    if t == 0:
        return EstimatorResult(float(f(x[None])[0]), 0.0, N, seed)

    def block(rng, size):
        for _, X, _ in trajectories(model, x, rng, size, t, sens=False):
            pass
        return f(X)

    samples = np.concatenate(_mc.run_blocks(N, seed, block))
    mean, se = _mc.mean_and_se(samples)
    return EstimatorResult(float(mean), float(se), N, seed)


def sensitivity_weighted(S: np.ndarray, g: np.ndarray) -> np.ndarray:
    """``S^T g`` over leading axes."""
    return np.einsum("...ji,...j->...i", S, g)


def estimate_qt_grad(model: ModelSpec, grad_f, x, t: int, N: int, seed: int) -> EstimatorResult:
    if N < 2 or t < 0:
        raise ValueError("estimate_qt_grad needs N >= 2 and t >= 0")
    x = _as_state(model, x)
    grad = _grad_callable(grad_f)
    if t == 0:
        return EstimatorResult(np.asarray(grad(x[None])[0], float),
                               np.zeros(model.dim_state), N, seed)

    def block(rng, size):
        for _, X, S in trajectories(model, x, rng, size, t):
            pass
        return sensitivity_weighted(S, grad(X))

    samples = np.concatenate(_mc.run_blocks(N, seed, block))
    mean, se = _mc.mean_and_se(samples)
    return EstimatorResult(mean, se, N, seed)


@dataclass
class GradientCheckReport:
    estimate_pathwise: list
    estimate_fd: list
    pathwise_se: list
    fd_se: list
    pooled_se: list
    fd_allowance: list
    discrepancy: list
    tolerance: list
    passed: bool
    x: list
    t: int
    N: int
    seed: int
    fd_step: list

    def as_dict(self) -> dict:
        out = asdict(self)
        out["pass"] = out.pop("passed")
        return out


def default_fd_step(x: np.ndarray) -> np.ndarray:
    return 1e-4 * (1 + np.abs(x))


def gradient_identity_check(model: ModelSpec, f: TestFunction, x, t: int, N: int,
                            fd_step=None, seed: int = 0) -> GradientCheckReport:
    """Compare ``Q^t grad f(x)`` with CRN central differences of ``P^t f``.

    Every evaluation point (``x``, ``x +- h e_i``, ``x +- 2h e_i``) is driven
    by the same noise. The pass threshold is ``3 * pooled SE`` plus the
    central-difference error estimated from the ``2h`` stencil and a
    round-off term.
    """
    x = _as_state(model, x)
    ell = model.dim_state
    h = default_fd_step(x) if fd_step is None else np.broadcast_to(np.asarray(fd_step, float), (ell,))
    if np.any(h < MIN_FD_STEP):
        raise ValueError(f"fd_step below {MIN_FD_STEP} is dominated by round-off")
    if N < 2 or t < 0:
        raise ValueError("gradient_identity_check needs N >= 2 and t >= 0")

    # stencil rows: x, then per coordinate x+h, x-h, x+2h, x-2h
    pts = [x]
    for i in range(ell):
        e = np.zeros(ell)
        e[i] = h[i]
        pts += [x + e, x - e, x + 2 * e, x - 2 * e]
    pts = np.array(pts)
    eps = np.finfo(float).eps

    def block(rng, size):
        for _, X, S in trajectories(model, pts, rng, size, t):
            pass
        fx = f(X)  # (P, size)
        pathwise = sensitivity_weighted(S[0], f.grad(X[0]))
        fd1 = np.empty((size, ell))
        fd2 = np.empty((size, ell))
        for i in range(ell):
            b = 1 + 4 * i
            fd1[:, i] = (fx[b] - fx[b + 1]) / (2 * h[i])
            fd2[:, i] = (fx[b + 2] - fx[b + 3]) / (4 * h[i])
        scale = np.abs(fx).max(axis=0)
        return pathwise, fd1, fd2, scale

    parts = _mc.run_blocks(N, seed, block)
    pathwise = np.concatenate([p[0] for p in parts])
    fd1 = np.concatenate([p[1] for p in parts])
    fd2 = np.concatenate([p[2] for p in parts])
    fscale = max(float(p[3].max()) for p in parts)

    pw_mean, pw_se = _mc.mean_and_se(pathwise)
    fd_mean, fd_se = _mc.mean_and_se(fd1)
    fd2_mean, _ = _mc.mean_and_se(fd2)
    pooled = np.sqrt(pw_se**2 + fd_se**2)
    # Richardson: D(2h) - D(h) ~ 3 C h^2
    allowance = np.abs(fd2_mean - fd_mean) / 3 + 64 * eps * fscale / h
    disc = np.abs(pw_mean - fd_mean)
    tol = 3 * pooled + allowance
    return GradientCheckReport(
        estimate_pathwise=pw_mean.tolist(), estimate_fd=fd_mean.tolist(),
        pathwise_se=pw_se.tolist(), fd_se=fd_se.tolist(), pooled_se=pooled.tolist(),
        fd_allowance=allowance.tolist(), discrepancy=disc.tolist(), tolerance=tol.tolist(),
        passed=bool(np.all(disc <= tol)), x=x.tolist(), t=t, N=N, seed=seed, fd_step=h.tolist(),
    )
