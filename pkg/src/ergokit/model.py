"""Nonlinear state-space models ``X(t+1) = a(X(t), N(t+1))``.

Maps and Jacobians are vectorised: states have shape ``(..., l)`` and
noise ``(..., m)``. The Jacobian follows the convention
``jac[..., i, j] = d a_j / d x_i``; the sensitivity recursion uses its
transpose.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np


class ContractViolation(ValueError):
    """Raised when an argument does not match the model's dimensions."""


@dataclass(frozen=True)
class NoiseLaw:
    """i.i.d. noise descriptor.

    ``kind`` is ``"gaussian"`` (standard normal), ``"uniform"`` (on
    ``[-1, 1]`` per coordinate) or ``"tabulated"`` (finite support
    ``values`` with ``probs``).
    """

    kind: str = "gaussian"
    dim: int = 1
    values: Optional[np.ndarray] = None
    probs: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in ("gaussian", "uniform", "tabulated"):
            raise ValueError(f"unknown noise law {self.kind!r}")
        if self.kind == "tabulated":
            vals = np.asarray(self.values, dtype=float).reshape(-1, self.dim)
            p = np.asarray(self.probs, dtype=float)
            if p.shape != (vals.shape[0],) or np.any(p < 0) or abs(p.sum() - 1) > 1e-12:
                raise ValueError("tabulated law needs probabilities summing to 1")
            object.__setattr__(self, "values", vals)
            object.__setattr__(self, "probs", p)

    def sample(self, rng: np.random.Generator, size: int | tuple = ()) -> np.ndarray:
        shape = (size,) if isinstance(size, int) else tuple(size)
        if self.kind == "gaussian":
            return rng.standard_normal(shape + (self.dim,))
        if self.kind == "uniform":
            return rng.uniform(-1.0, 1.0, shape + (self.dim,))
        idx = rng.choice(len(self.probs), size=shape, p=self.probs)
        return self.values[idx]


@dataclass(frozen=True)
class ModelSpec:
    name: str
    dim_state: int
    dim_noise: int
    map: Callable[[np.ndarray, np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray, np.ndarray], np.ndarray]
    noise_law: NoiseLaw
    density: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    # t -> t-step density, when known in closed form
    multistep_density: Optional[Callable[[int], Callable]] = None
    jacobian_bound: Optional[float] = None
    params: dict = field(default_factory=dict)
    matrix_norm: str = "spectral"

    def describe(self) -> dict:
        return {"name": self.name, **self.params, "matrix_norm": self.matrix_norm}


def _check(model: ModelSpec, x, n):
    x = np.asarray(x, dtype=float)
    n = np.asarray(n, dtype=float)
    if x.shape[-1:] != (model.dim_state,):
        raise ContractViolation(
            f"state has trailing dimension {x.shape[-1:]} but model expects {model.dim_state}")
    if n.shape[-1:] != (model.dim_noise,):
        raise ContractViolation(
            f"noise has trailing dimension {n.shape[-1:]} but model expects {model.dim_noise}")
    return x, n


def eval_map(model: ModelSpec, x, n) -> np.ndarray:
    x, n = _check(model, np.atleast_1d(x), np.atleast_1d(n))
    return model.map(x, n)


def eval_jacobian(model: ModelSpec, x, n) -> np.ndarray:
    x, n = _check(model, np.atleast_1d(x), np.atleast_1d(n))
    return model.jacobian(x, n)


def sample_noise(model: ModelSpec, stream: np.random.Generator, size: int | tuple = ()) -> np.ndarray:
    return model.noise_law.sample(stream, size)


def matrix_norm(S: np.ndarray, kind: str = "spectral") -> np.ndarray:
    """Norm of the trailing ``(l, l)`` matrices of ``S``."""
    if kind == "spectral":
        if S.shape[-1] == 1:
            return np.abs(S[..., 0, 0])
        return np.linalg.norm(S, ord=2, axis=(-2, -1))
    if kind == "fro":
        return np.linalg.norm(S, ord="fro", axis=(-2, -1))
    if kind == "inf":
        return np.abs(S).sum(axis=-1).max(axis=-1)
    raise ValueError(f"unknown matrix norm {kind!r}")


def fd_jacobian(model: ModelSpec, x, n) -> np.ndarray:
    """Central-difference Jacobian, step ``1e-6 * (1 + |x_i|)``."""
    x = np.asarray(x, dtype=float)
    n = np.asarray(n, dtype=float)
    ell = model.dim_state
    jac = np.empty(x.shape[:-1] + (ell, ell))
    for i in range(ell):
        h = 1e-6 * (1.0 + np.abs(x[..., i]))
        e = np.zeros_like(x)
        e[..., i] = h
        diff = model.map(x + e, n) - model.map(x - e, n)
        jac[..., i, :] = diff / (2 * h[..., None])
    return jac


def check_jacobian(model: ModelSpec, points: int = 100, seed: int = 0, scale: float = 3.0) -> float:
    """Worst ``|jac - FD| / (1 + |jac|)`` over random ``(x, n)`` (inf-norms)."""
    rng = np.random.default_rng(seed)
    x = scale * rng.standard_normal((points, model.dim_state))
    n = model.noise_law.sample(rng, points)
    jac = model.jacobian(x, n)
    fd = fd_jacobian(model, x, n)
    err = np.abs(jac - fd).max(axis=(-2, -1))
    size = np.abs(jac).max(axis=(-2, -1))
    if model.jacobian_bound is not None:
        norms = matrix_norm(jac, model.matrix_norm)
        if np.any(norms > model.jacobian_bound * (1 + 1e-12)):
            raise ContractViolation("sampled Jacobian norm exceeds jacobian_bound")
    return float(np.max(err / (1 + size)))


# --- builtin models -------------------------------------------------------

def _require_contractive(rho: float):
    if not abs(rho) < 1:
        raise ValueError(f"builtin models require |rho| < 1, got {rho}")


def _gaussian_pdf(r, sigma):
    return np.exp(-0.5 * (r / sigma) ** 2) / (np.sqrt(2 * np.pi) * sigma)


def _additive_density(drift: Callable, sigma: float, law: NoiseLaw):
    """Density of ``y = drift(x) + sigma * N`` for the given noise law."""
    if law.kind == "gaussian":
        def density(x, y):
            r = np.asarray(y, float) - drift(np.asarray(x, float))
            return np.prod(_gaussian_pdf(r, sigma), axis=-1)
        return density
    if law.kind == "uniform":
        def density(x, y):
            r = np.asarray(y, float) - drift(np.asarray(x, float))
            inside = np.abs(r) <= sigma
            return np.prod(np.where(inside, 1.0 / (2 * sigma), 0.0), axis=-1)
        return density
    return None


def _linear_gaussian_multistep(rho: float, sigma: float, mean_map: Callable):
    def for_steps(t: int):
        var = sigma**2 * (1 - rho ** (2 * t)) / (1 - rho**2)
        s = np.sqrt(var)

        def density(x, y):
            r = np.asarray(y, float) - mean_map(np.asarray(x, float), t)
            return np.prod(_gaussian_pdf(r, s), axis=-1)
        return density
    return for_steps


def ar1(rho: float, sigma: float = 1.0, noise: str = "gaussian") -> ModelSpec:
    _require_contractive(rho)
    law = NoiseLaw(noise, 1)

    def amap(x, n):
        return rho * x + sigma * n

    def jac(x, n):
        x = np.asarray(x, float)
        return np.full(x.shape[:-1] + (1, 1), float(rho))

    multistep = None
    if noise == "gaussian":
        multistep = _linear_gaussian_multistep(rho, sigma, lambda x, t: rho**t * x)
    return ModelSpec(
        name="ar1", dim_state=1, dim_noise=1, map=amap, jacobian=jac, noise_law=law,
        density=_additive_density(lambda x: rho * x, sigma, law),
        multistep_density=multistep, jacobian_bound=abs(rho),
        params={"rho": rho, "sigma": sigma, "noise": noise},
    )


def tanh1(rho: float, sigma: float = 1.0, noise: str = "gaussian") -> ModelSpec:
    _require_contractive(rho)
    law = NoiseLaw(noise, 1)

    def amap(x, n):
        return rho * np.tanh(x) + sigma * n

    def jac(x, n):
        x = np.asarray(x, float)
        return (rho * (1 - np.tanh(x) ** 2))[..., None]

    return ModelSpec(
        name="tanh1", dim_state=1, dim_noise=1, map=amap, jacobian=jac, noise_law=law,
        density=_additive_density(lambda x: rho * np.tanh(x), sigma, law),
        jacobian_bound=abs(rho),
        params={"rho": rho, "sigma": sigma, "noise": noise},
    )


def rotation(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def rotcon2(rho: float, theta: float, sigma: float = 1.0, noise: str = "gaussian") -> ModelSpec:
    _require_contractive(rho)
    law = NoiseLaw(noise, 2)
    A = rho * rotation(theta)

    def amap(x, n):
        return np.asarray(x, float) @ A.T + sigma * n

    def jac(x, n):
        # d a_j / d x_i = A[j, i]
        x = np.asarray(x, float)
        return np.broadcast_to(A.T, x.shape[:-1] + (2, 2)).copy()

    multistep = None
    if noise == "gaussian":
        def mean_map(x, t):
            return x @ np.linalg.matrix_power(A, t).T
        multistep = _linear_gaussian_multistep(rho, sigma, mean_map)
    return ModelSpec(
        name="rotcon2", dim_state=2, dim_noise=2, map=amap, jacobian=jac, noise_law=law,
        density=_additive_density(lambda x: x @ A.T, sigma, law),
        multistep_density=multistep, jacobian_bound=abs(rho),
        params={"rho": rho, "theta": theta, "sigma": sigma, "noise": noise},
    )


BUILTINS = {"ar1": ar1, "tanh1": tanh1, "rotcon2": rotcon2}


def from_config(cfg: dict) -> ModelSpec:
    """Build a builtin model from ``{"name": "ar1", "rho": 0.5, "sigma": 1.0}``."""
    cfg = dict(cfg)
    name = cfg.pop("name")
    if name not in BUILTINS:
        raise ValueError(f"unknown model {name!r}; choose from {sorted(BUILTINS)}")
    norm = cfg.pop("matrix_norm", "spectral")
    model = BUILTINS[name](**cfg)
    if norm != "spectral":
        model = ModelSpec(**{**model.__dict__, "matrix_norm": norm})
    return model
