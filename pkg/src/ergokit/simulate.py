"""Joint simulation of the chain and its sensitivity process.

``S(t) = dX(t)/dX(0)`` evolves as ``S(t+1) = A(t+1) S(t)`` with
``A(t+1) = jac(X(t), N(t+1))^T``; it is propagated in the same pass as
the state.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np
from scipy.special import logsumexp

from . import _mc
from .model import ModelSpec, matrix_norm

DIVERGENCE_THRESHOLD = 1e12


class DivergedTrajectoryError(RuntimeError):
    def __init__(self, t: int, message: str = ""):
        self.t = t
        super().__init__(message or f"trajectory diverged at t={t}")


@dataclass
class PathBundle:
    states: np.ndarray  # (T+1, l)
    sens: np.ndarray  # (T+1, l, l)
    noise: np.ndarray  # (T, m)
    seed: int
    model_id: str

    @property
    def horizon(self) -> int:
        return self.states.shape[0] - 1


@dataclass
class ExponentEstimate:
    value: float
    horizon: int
    replications: int
    std_error: float
    norm_used: str


@dataclass
class ContractionReport:
    rows: list[dict]
    k: float
    k_std_error: float
    t0: int
    reps: int
    rho_exp: float
    seed: int


def _check_finite(x: np.ndarray, t: int):
    if not np.all(np.isfinite(x)) or np.any(np.abs(x) > DIVERGENCE_THRESHOLD):
        raise DivergedTrajectoryError(t)


def step(model: ModelSpec, x: np.ndarray, S: Optional[np.ndarray], n: np.ndarray):
    """One joint update. ``x`` is ``(..., l)``, ``S`` is ``(..., l, l)`` or None."""
    if S is not None:
        A = np.swapaxes(model.jacobian(x, n), -1, -2)
        S = A @ S
    return model.map(x, n), S


def trajectories(model: ModelSpec, x0: np.ndarray, rng: np.random.Generator, size: int,
                 T: int, sens: bool = True) -> Iterator[tuple[int, np.ndarray, Optional[np.ndarray]]]:
    """Yield ``(t, X(t), S(t))`` for ``size`` paths, ``t = 0..T``.

    ``x0`` has shape ``(..., l)``; every leading index is driven by the same
    noise path (common random numbers), so ``X`` has shape
    ``(..., size, l)``. One noise draw of shape ``(size, m)`` is consumed per
    step, so stopping early never changes earlier draws.
    """
    x0 = np.asarray(x0, dtype=float)
    lead = x0.shape[:-1]
    ell = model.dim_state
    x = np.broadcast_to(x0[..., None, :], lead + (size, ell)).copy()
    S = None
    if sens:
        S = np.broadcast_to(np.eye(ell), lead + (size, ell, ell)).copy()
    yield 0, x, S
    for t in range(1, T + 1):
        n = model.noise_law.sample(rng, size)
        x, S = step(model, x, S, n)
        _check_finite(x, t)
        yield t, x, S


def simulate_path(model: ModelSpec, x0, T: int, seed: int) -> PathBundle:
    if T < 0:
        raise ValueError("T must be >= 0")
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    rng = _mc.substream(seed, 0)
    ell = model.dim_state
    states = np.empty((T + 1, ell))
    sens = np.empty((T + 1, ell, ell))
    noise = np.empty((T, model.dim_noise))
    x, S = x0.copy(), np.eye(ell)
    states[0], sens[0] = x, S
    for t in range(1, T + 1):
        n = model.noise_law.sample(rng)
        x, S = step(model, x, S, n)
        _check_finite(x, t)
        states[t], sens[t], noise[t - 1] = x, S, n
    return PathBundle(states, sens, noise, seed, model.name)


def replay_sensitivity(model: ModelSpec, bundle: PathBundle) -> np.ndarray:
    """Recompute ``S(t)`` from the recorded states and noise."""
    ell = model.dim_state
    out = [np.eye(ell)]
    for t in range(1, bundle.horizon + 1):
        A = model.jacobian(bundle.states[t - 1], bundle.noise[t - 1]).T
        out.append(A @ out[-1])
    return np.array(out)


def _log_sensitivity_norms(model: ModelSpec, x0, T: int, reps: int, seed, norm: str) -> np.ndarray:
    """``log ||S(T)||`` per replication, renormalising every step."""
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    ell = model.dim_state

    def block(rng, size):
        x = np.broadcast_to(x0, (size, ell)).copy()
        S = np.broadcast_to(np.eye(ell), (size, ell, ell)).copy()
        logscale = np.zeros(size)
        for t in range(1, T + 1):
            n = model.noise_law.sample(rng, size)
            x, S = step(model, x, S, n)
            _check_finite(x, t)
            scale = np.abs(S).max(axis=(-2, -1))
            if np.any(scale == 0):
                raise ValueError(f"sensitivity collapsed to zero at t={t}")
            S = S / scale[:, None, None]
            logscale += np.log(scale)
        return logscale + np.log(matrix_norm(S, norm))

    return np.concatenate(_mc.run_blocks(reps, seed, block))


def lyapunov_exponent(model: ModelSpec, x0, T: int, reps: int, seed: int,
                      norm: Optional[str] = None) -> ExponentEstimate:
    if T < 1 or reps < 1:
        raise ValueError("lyapunov_exponent needs T >= 1 and reps >= 1")
    norm = norm or model.matrix_norm
    samples = _log_sensitivity_norms(model, x0, T, reps, seed, norm) / T
    mean, se = _mc.mean_and_se(samples)
    return ExponentEstimate(float(mean), T, reps, float(se), norm)


def mean_exponent(model: ModelSpec, x0, T: int, p: float, reps: int, seed: int,
                  norm: Optional[str] = None) -> ExponentEstimate:
    """``(1/T) log mean ||S(T)||^p``, evaluated in the log domain."""
    if p <= 0 or T < 1 or reps < 1:
        raise ValueError("mean_exponent needs p > 0, T >= 1, reps >= 1")
    norm = norm or model.matrix_norm
    logs = p * _log_sensitivity_norms(model, x0, T, reps, seed, norm)
    log_mean = logsumexp(logs) - np.log(reps)
    value = log_mean / T
    se = 0.0
    if reps > 1:
        w = np.exp(logs - logs.max())
        # delta method on log of the mean
        se = float(w.std(ddof=1) / np.sqrt(reps) / w.mean() / T)
    return ExponentEstimate(float(value), T, reps, se, norm)


def contraction_diagnostic(model: ModelSpec, x0_set, t0: int, reps: int, v, rho_exp: float,
                           seed: int, norm: Optional[str] = None) -> ContractionReport:
    """Smallest ``k`` with ``E[v(X)] + E[||S|| v(X)] <= k v(x)^rho_exp`` on ``x0_set``."""
    if t0 < 0 or not 0 < rho_exp <= 1:
        raise ValueError("contraction_diagnostic needs t0 >= 0 and 0 < rho_exp <= 1")
    norm = norm or model.matrix_norm
    pts = np.asarray(x0_set, dtype=float).reshape(-1, model.dim_state)
    rows = []
    for idx, x in enumerate(pts):
        def block(rng, size, x=x):
            for _, X, S in trajectories(model, x, rng, size, t0):
                pass
            vX = v(X)
            return vX + matrix_norm(S, norm) * vX

        samples = np.concatenate(_mc.run_blocks(reps, (seed, idx), block))
        lhs, se = _mc.mean_and_se(samples)
        denom = float(v(x[None, :])[0]) ** rho_exp
        rows.append({
            "x0": x.tolist() if x.size > 1 else float(x[0]),
            "estimate": float(lhs),
            "std_error": float(se),
            "ratio": float(lhs) / denom,
            "ratio_std_error": float(se) / denom,
        })
    worst = max(rows, key=lambda r: r["ratio"])
    return ContractionReport(rows, worst["ratio"], worst["ratio_std_error"], t0, reps, rho_exp, seed)
