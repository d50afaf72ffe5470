"""Poisson and discounted value functions.

Grid solvers work on a :class:`~ergokit.kernelgrid.GridKernel`; the
gradient series ``sum_t Q^t grad c`` and ``sum_t alpha^t Q^t grad c`` are
estimated by Monte Carlo along the sensitivity process.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
import scipy.linalg
from scipy.interpolate import RegularGridInterpolator

from . import _mc
from .kernelgrid import GridKernel
from .model import ModelSpec
from .norms import decay_rate_fit
from .semigroup import EstimatorResult, TestFunction, sensitivity_weighted
from .simulate import _check_finite, step

LINEAR_SOLVE_MAX_NODES = 2000


class SeriesNotConvergedError(RuntimeError):
    def __init__(self, last_norm: float, term_norms: list):
        self.last_norm = last_norm
        self.term_norms = term_norms
        super().__init__(f"series terms did not fall below tolerance; last term norm {last_norm:.3e}")


class SingularSystemError(RuntimeError):
    pass


@dataclass
class ValueSolution:
    h: np.ndarray
    mean_c: float
    truncation_T: Union[int, str]
    residual_vnorm: float
    grid: object = field(repr=False)
    alpha: Optional[float] = None
    pi_h: Optional[float] = None
    term_norms: list = field(default_factory=list)

    def at(self, x) -> np.ndarray:
        """Interpolate ``h`` at off-grid points (linear)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.grid.dim == 1:
            return np.interp(x[:, 0], self.grid.axes[0], self.h)
        interp = RegularGridInterpolator(self.grid.axes, self.h.reshape(self.grid.shape))
        return interp(x)


def _cost_on(K: GridKernel, c) -> np.ndarray:
    if isinstance(c, TestFunction) or callable(c):
        return np.asarray(c(K.nodes), dtype=float)
    c = np.asarray(c, dtype=float)
    if c.shape != (K.size,):
        raise ValueError("cost vector must have one entry per node")
    return c


def _vnorm(f: np.ndarray, vv: np.ndarray) -> float:
    return float(np.max(np.abs(f) / vv))


def _resolve_mode(K: GridKernel, mode: str) -> str:
    if mode == "auto":
        return "linear-solve" if K.size <= LINEAR_SOLVE_MAX_NODES else "series"
    if mode in ("linear", "linear-solve"):
        return "linear-solve"
    if mode == "series":
        return mode
    raise ValueError(f"unknown mode {mode!r}")


def _default_horizon(P: np.ndarray, start: np.ndarray, vv: np.ndarray, tol: float,
                     scale: float = 1.0) -> int:
    """``ceil(log(tol) / log(rho0))`` from a decay fit on the first few terms."""
    norms = []
    term = start
    for t in range(8):
        n = _vnorm(term, vv) * scale**t
        if n <= 0:
            break
        norms.append((t, n))
        term = P @ term
    if len(norms) < 3:
        return 8
    rho0 = decay_rate_fit(norms).rho0
    if not 0 < rho0 < 1:
        return 10_000
    return int(min(10_000, math.ceil(math.log(tol / max(norms[0][1], tol)) / math.log(rho0)) + 8))


def _series(P: np.ndarray, start: np.ndarray, vv: np.ndarray, tol: float, T_max: int,
            alpha: float = 1.0):
    h = np.zeros_like(start)
    term = start.copy()
    norms = []
    for t in range(T_max + 1):
        h += term
        n = _vnorm(term, vv)
        norms.append(n)
        if n < tol:
            return h, t, norms
        term = alpha * (P @ term)
    raise SeriesNotConvergedError(norms[-1], norms)


def poisson_solve(K: GridKernel, c, mode: str = "auto", T_max: Optional[int] = None,
                  tol: float = 1e-10, v=None) -> ValueSolution:
    """Solve ``h - P h = c - pi(c)`` with ``pi(h) = 0``."""
    if K.stationary is None:
        raise ValueError("poisson_solve needs the stationary vector of K")
    P, pi = K.matrix, K.stationary
    vv = K.weights_for(v)
    cv = _cost_on(K, c)
    cbar = float(pi @ cv)
    ct = cv - cbar
    mode = _resolve_mode(K, mode)
    norms: list = []
    if mode == "linear-solve":
        # deflate the constant direction: (I - P + 1 pi^T) h = c - cbar forces pi(h) = 0
        A = np.eye(K.size) - P + np.outer(np.ones(K.size), pi)
        try:
            h = scipy.linalg.solve(A, ct)
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
            raise SingularSystemError(str(exc)) from exc
        if not np.all(np.isfinite(h)):
            raise SingularSystemError("linear solve produced non-finite values")
        T_used: Union[int, str] = "linear-solve"
    else:
        if T_max is None:
            T_max = _default_horizon(P, ct, vv, tol)
        h, T_used, norms = _series(P, ct, vv, tol, T_max)
    resid = _vnorm(h - P @ h - ct, vv)
    return ValueSolution(h, cbar, T_used, resid, K.grid, None, float(pi @ h), norms)


def discounted_solve(K: GridKernel, c, alpha: float, mode: str = "auto",
                     T_max: Optional[int] = None, tol: float = 1e-10, v=None) -> ValueSolution:
    """Solve ``h = c + alpha P h``; ``alpha = 0`` returns ``c``."""
    if not 0 <= alpha < 1:
        raise ValueError("alpha must lie in [0, 1)")
    P = K.matrix
    vv = K.weights_for(v)
    cv = _cost_on(K, c)
    mode = _resolve_mode(K, mode)
    norms: list = []
    if alpha == 0:
        h, T_used = cv.copy(), 0
    elif mode == "linear-solve":
        try:
            h = scipy.linalg.solve(np.eye(K.size) - alpha * P, cv)
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
            raise SingularSystemError(str(exc)) from exc
        T_used = "linear-solve"
    else:
        if T_max is None:
            T_max = _default_horizon(P, cv, vv, tol, scale=alpha)
        h, T_used, norms = _series(P, cv, vv, tol, T_max, alpha)
    resid = _vnorm(cv + alpha * (P @ h) - h, vv)
    mean_c = float(K.stationary @ cv) if K.stationary is not None else float("nan")
    return ValueSolution(h, mean_c, T_used, resid, K.grid, alpha, None, norms)


def clt_variance(K: GridKernel, sol: ValueSolution, tol: float = 1e-8) -> float:
    """``pi(h^2) - pi((P h)^2)``."""
    if K.stationary is None:
        raise ValueError("clt_variance needs the stationary vector of K")
    pi = K.stationary
    Ph = K.matrix @ sol.h
    s2 = float(pi @ sol.h**2 - pi @ Ph**2)
    if s2 < 0:
        scale = max(1.0, float(pi @ sol.h**2))
        if s2 < -tol * scale:
            raise ValueError(f"negative CLT variance {s2:.3e}; is h a Poisson solution on K?")
        warnings.warn(f"CLT variance {s2:.3e} clipped at 0", RuntimeWarning, stacklevel=2)
        s2 = 0.0
    return s2


def _gradient_series(model: ModelSpec, grad_c, x, alpha: float, T_max: int, tol: float,
                     N: int, seed: int) -> EstimatorResult:
    """Monte Carlo estimate of ``sum_t alpha^t Q^t grad c (x)``.

    All replication blocks advance in lockstep so the stopping time is a
    global decision; each block keeps its own substream.
    """
    if T_max < 1:
        raise ValueError("T_max must be >= 1")
    if N < 2:
        raise ValueError("N must be >= 2")
    grad = grad_c.grad if isinstance(grad_c, TestFunction) else grad_c
    x = np.atleast_1d(np.asarray(x, dtype=float))
    ell = model.dim_state
    work = _mc.blocks(N)
    rngs = [_mc.substream(seed, k) for k, _ in work]
    X = [np.broadcast_to(x, (size, ell)).copy() for _, size in work]
    S = [np.broadcast_to(np.eye(ell), (size, ell, ell)).copy() for _, size in work]
    g0 = np.asarray(grad(x[None, :])[0], dtype=float)
    cum = [np.broadcast_to(g0, (size, ell)).copy() for _, size in work]
    term_norms = [float(np.linalg.norm(g0))]
    magnitudes = [term_norms[0]]
    T_used = 0
    for t in range(1, T_max + 1):
        weight = alpha**t
        total = np.zeros(ell)
        mag = 0.0
        for b, (_, size) in enumerate(work):
            n = model.noise_law.sample(rngs[b], size)
            X[b], S[b] = step(model, X[b], S[b], n)
            _check_finite(X[b], t)
            term = weight * sensitivity_weighted(S[b], grad(X[b]))
            cum[b] += term
            total += term.sum(axis=0)
            mag += np.linalg.norm(term, axis=1).sum()
        term_norms.append(float(np.linalg.norm(total / N)))
        magnitudes.append(float(mag / N))
        T_used = t
        # stop on the mean per-path magnitude; the mean term itself can cross zero by chance
        if magnitudes[-1] < tol:
            break
    else:
        raise SeriesNotConvergedError(magnitudes[-1], term_norms)
    mean, se = _mc.mean_and_se(np.concatenate(cum))
    return EstimatorResult(mean, se, N, seed,
                           {"term_norms": term_norms, "term_magnitudes": magnitudes,
                            "truncation_T": T_used})


def poisson_gradient(model: ModelSpec, grad_c, x, T_max: int = 1000, tol: float = 1e-10,
                     N: int = 10_000, seed: int = 0) -> EstimatorResult:
    return _gradient_series(model, grad_c, x, 1.0, T_max, tol, N, seed)


def discounted_gradient(model: ModelSpec, grad_c, alpha: float, x, T_max: int = 1000,
                        tol: float = 1e-10, N: int = 10_000, seed: int = 0) -> EstimatorResult:
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    return _gradient_series(model, grad_c, x, alpha, T_max, tol, N, seed)
