"""Discretised transition kernels and their spectral structure.

A :class:`GridKernel` holds a matrix with entries ``p(x_i, x_j) w_j`` on a
tensor grid, standing in for ``P``. Centered, truncated and finite-rank
variants are signed and flagged as such.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
import scipy.linalg

from .bernstein import basis_matrix, bernstein_fit
from .grid import Grid
from .model import ModelSpec
from .norms import WeightFunction, operator_v1_norm, operator_v_norm


MAX_NODES = 20_000


class NoDensityError(ValueError):
    pass


class GridTooSmallError(ValueError):
    def __init__(self, leak: float, tol: float):
        self.leak = leak
        super().__init__(f"grid loses mass {leak:.3e} > {tol:.1e}; widen the grid")


class IllPosedClusterError(ValueError):
    pass


@dataclass
class GridKernel:
    grid: Grid
    matrix: np.ndarray
    row_normalized: bool = False
    stationary: Optional[np.ndarray] = None
    weight_values: Optional[np.ndarray] = None
    signed: bool = False
    density: Optional[Callable] = field(default=None, repr=False)
    leak: float = 0.0
    steps: int = 1

    @property
    def nodes(self) -> np.ndarray:
        return self.grid.nodes

    @property
    def quad_weights(self) -> np.ndarray:
        return self.grid.weights

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def weights_for(self, v=None) -> np.ndarray:
        """Node values of ``v``; falls back to the stored weight, then to ones."""
        if v is None:
            if self.weight_values is not None:
                return self.weight_values
            return np.ones(self.size)
        if isinstance(v, WeightFunction):
            return v(self.nodes)
        return np.asarray(v, dtype=float)


def stationary_vector(matrix: np.ndarray) -> np.ndarray:
    """Probability vector ``pi`` with ``pi P = pi`` for a row-stochastic ``P``."""
    M = matrix.shape[0]
    A = np.eye(M) - matrix.T
    A[-1, :] = 1.0
    b = np.zeros(M)
    b[-1] = 1.0
    lu = scipy.linalg.lu_factor(A)
    pi = scipy.linalg.lu_solve(lu, b)
    pi += scipy.linalg.lu_solve(lu, b - A @ pi)  # one step of iterative refinement
    return pi


def perron_vector(matrix: np.ndarray) -> np.ndarray:
    w, vl = scipy.linalg.eig(matrix, left=True, right=False)
    k = int(np.argmax(w.real))
    pi = np.abs(vl[:, k].real)
    return pi / pi.sum()


def _as_grid(grid_spec, dim: int) -> Grid:
    if isinstance(grid_spec, Grid):
        return grid_spec
    if isinstance(grid_spec, dict):
        return Grid.uniform(grid_spec["lo"], grid_spec["hi"], grid_spec["M"], dim)
    lo, hi, M = grid_spec
    return Grid.uniform(lo, hi, M, dim)


def discretize(model: ModelSpec, grid_spec, normalize: bool = True, steps: int = 1,
               weight: Optional[WeightFunction] = None, leak_tol: float = 1e-8) -> GridKernel:
    """Trapezoid discretisation of the ``steps``-step transition density.

    The leak test is the stationary-weighted mass lost through the grid
    boundary, ``sum_i pi_i (1 - rowsum_i)``; boundary rows of a fixed box
    always leak, the chain's typical rows must not.
    """
    if steps == 1:
        density = model.density
    elif model.multistep_density is not None:
        density = model.multistep_density(steps)
    else:
        density = None
    if density is None:
        raise NoDensityError(f"model {model.name!r} has no closed-form {steps}-step density")
    if model.dim_state > 2:
        raise ValueError("grid kernels are limited to state dimension <= 2")
    grid = _as_grid(grid_spec, model.dim_state)
    if grid.size > MAX_NODES:
        raise ValueError(f"{grid.size} nodes exceeds the dense-kernel limit {MAX_NODES}")
    x = grid.nodes
    P = density(x[:, None, :], x[None, :, :]) * grid.weights[None, :]
    rowsum = P.sum(axis=1)
    if np.any(rowsum <= 0):
        raise GridTooSmallError(1.0, leak_tol)
    Pn = P / rowsum[:, None]
    pi = stationary_vector(Pn)
    leak = float(np.sum(pi * np.clip(1.0 - rowsum, 0.0, None)))
    if leak > leak_tol:
        raise GridTooSmallError(leak, leak_tol)
    if normalize:
        matrix = Pn
    else:
        matrix = P
        pi = perron_vector(P)
    wv = weight(x) if weight is not None else None
    return GridKernel(grid, matrix, normalize, pi, wv, False, density, leak, steps)


# --- smooth cutoffs --------------------------------------------------------

@dataclass(frozen=True)
class CutoffFunction:
    """Product of 1-D cubic smoothstep profiles: 1 on ``|x_i| <= n``, 0 beyond ``n + 1``."""

    n: float

    def profile(self, r) -> np.ndarray:
        u = np.clip(np.abs(np.asarray(r, dtype=float)) - self.n, 0.0, 1.0)
        return 1.0 - (3 * u**2 - 2 * u**3)

    def profile_derivative(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        u = np.clip(np.abs(r) - self.n, 0.0, 1.0)
        return -np.sign(r) * 6 * u * (1 - u)

    def __call__(self, x) -> np.ndarray:
        return np.prod(self.profile(x), axis=-1)

    def grad(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        p = self.profile(x)
        dp = self.profile_derivative(x)
        out = np.empty_like(x)
        for i in range(x.shape[-1]):
            others = np.prod(np.delete(p, i, axis=-1), axis=-1)
            out[..., i] = dp[..., i] * others
        return out


def smooth_cutoff(n: float) -> CutoffFunction:
    if n < 0:
        raise ValueError("cutoff level must be >= 0")
    return CutoffFunction(n)


def truncate_kernel(K: GridKernel, n: float, m: float) -> GridKernel:
    """Entries ``chi_n(x_i) K_ij chi_m(x_j)``."""
    cn = smooth_cutoff(n)(K.nodes)
    cm = smooth_cutoff(m)(K.nodes)
    mat = cn[:, None] * K.matrix * cm[None, :]
    return replace(K, matrix=mat, row_normalized=False, stationary=None, signed=True)


def truncation_error(K: GridKernel, n: float, m: float, v=None) -> tuple[float, float]:
    """``(v, (v,1))`` operator norms of ``K - I_chi_n K I_chi_m``."""
    vv = K.weights_for(v)
    D = K.matrix - truncate_kernel(K, n, m).matrix
    return operator_v_norm(D, vv), operator_v1_norm(D, K.grid, vv)


# --- spectra ---------------------------------------------------------------

@dataclass
class SpectrumReport:
    eigenvalues: np.ndarray
    xi_v: float
    xi_power: float
    power_norms: dict
    agreement: float

    def as_dict(self) -> dict:
        return {
            "eigenvalues": [[float(z.real), float(z.imag)] for z in self.eigenvalues],
            "moduli": [float(abs(z)) for z in self.eigenvalues],
            "xi_v": self.xi_v,
            "xi_power": self.xi_power,
            "power_norms": {str(k): v for k, v in self.power_norms.items()},
            "agreement": self.agreement,
        }


def _matrix_of(K) -> np.ndarray:
    return K.matrix if isinstance(K, GridKernel) else np.asarray(K)


def spectrum_and_radius(K, v=None, top_k: int = 6) -> SpectrumReport:
    """Top eigenvalues by modulus and two estimates of the spectral radius.

    ``xi_power`` extrapolates ``||K^n||_v^(1/n)`` from ``n = 16, 32`` as
    ``(||K^32|| / ||K^16||)^(1/16)``, which cancels the constant prefactor.
    """
    A = _matrix_of(K)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("spectrum_and_radius needs a square matrix")
    vv = K.weights_for(v) if isinstance(K, GridKernel) else (
        np.ones(A.shape[0]) if v is None else np.asarray(v, dtype=float))
    try:
        w = np.linalg.eigvals(A)
    except np.linalg.LinAlgError as exc:
        raise RuntimeError(f"eigensolve failed: {exc}") from exc
    order = np.argsort(-np.abs(w), kind="stable")
    w = w[order]
    xi_eig = float(np.abs(w[0]))

    norms = {}
    Ap = A.copy()
    for n in (2, 4, 8, 16, 32):
        Ap = Ap @ Ap
        if n >= 8:
            norms[n] = operator_v_norm(Ap, vv)
    if norms[16] > 0 and norms[32] > 0:
        xi_pow = float((norms[32] / norms[16]) ** (1 / 16))
    else:
        xi_pow = 0.0
    agree = abs(xi_pow - xi_eig) / xi_eig if xi_eig > 0 else abs(xi_pow)
    return SpectrumReport(w[:top_k], xi_eig, xi_pow, norms, float(agree))


def spectral_projection(K, cluster_center: complex, cluster_radius: float,
                        boundary_tol: float = 1e-8) -> tuple[int, np.ndarray]:
    """Eigenprojection onto the eigenvalues inside a disk.

    Built from left and right eigenvectors of the selected eigenvalues,
    ``R (L^H R)^{-1} L^H``.
    """
    A = _matrix_of(K)
    w, vl, vr = scipy.linalg.eig(A, left=True, right=True)
    dist = np.abs(w - cluster_center)
    if np.any(np.abs(dist - cluster_radius) < boundary_tol):
        raise IllPosedClusterError("an eigenvalue lies on the cluster boundary")
    inside = dist < cluster_radius
    rank = int(inside.sum())
    if rank == 0:
        return 0, np.zeros_like(A, dtype=float)
    R = vr[:, inside]
    L = vl[:, inside]
    Pi = R @ np.linalg.solve(L.conj().T @ R, L.conj().T)
    if np.max(np.abs(Pi.imag)) < 1e-10 * max(1.0, np.max(np.abs(Pi.real))):
        Pi = Pi.real
    return rank, Pi


def center_kernel(K: GridKernel) -> GridKernel:
    """``K - 1 (x) pi``."""
    if K.stationary is None:
        raise ValueError("center_kernel needs the stationary vector")
    mat = K.matrix - np.outer(np.ones(K.size), K.stationary)
    return replace(K, matrix=mat, row_normalized=False, signed=True)


# --- finite-rank approximation --------------------------------------------

@dataclass
class FiniteRankKernel:
    left_functions: np.ndarray  # (rank, M)
    right_measures: np.ndarray  # (rank, M)

    @property
    def rank(self) -> int:
        return self.left_functions.shape[0]

    def apply(self, g: np.ndarray) -> np.ndarray:
        return self.left_functions.T @ (self.right_measures @ np.asarray(g, dtype=float))

    def dense(self) -> np.ndarray:
        return self.left_functions.T @ self.right_measures


def _tensor_basis(nodes: np.ndarray, lo: float, hi: float, m: int) -> np.ndarray:
    """Row-wise tensor product of 1-D bases over the coordinates of ``nodes``."""
    u = np.clip((nodes - lo) / (hi - lo), 0.0, 1.0)
    out = basis_matrix(u[:, 0], m)
    for d in range(1, nodes.shape[1]):
        b = basis_matrix(u[:, d], m)
        out = (out[:, :, None] * b[:, None, :]).reshape(nodes.shape[0], -1)
    return out


def finite_rank_approx(K: GridKernel, v, degree: int, box: float) -> tuple[FiniteRankKernel, float]:
    """Bernstein finite-rank approximation of the ``chi_box``-truncated kernel.

    Fits ``r_v(x, y) = r(x, y) v(y)`` on ``[-(box+1), box+1]^(2l)``, cuts it
    off smoothly in both arguments and returns the factored kernel with its
    measured (v,1)-operator distance to ``I_chi K I_chi``.
    """
    if K.density is None:
        raise NoDensityError("finite_rank_approx needs a kernel built from a density")
    if box + 1 > K.grid.extent + 1e-12:
        raise ValueError("box must lie within the grid")
    vw = v if isinstance(v, WeightFunction) else None
    vv = K.weights_for(v)
    ell = K.grid.dim
    lo, hi = -(box + 1.0), box + 1.0

    def r_v(pts):
        x, y = pts[:, :ell], pts[:, ell:]
        vy = vw(y) if vw is not None else np.exp(np.interp(y[:, 0], K.nodes[:, 0], np.log(vv)))
        return K.density(x, y) * vy

    if vw is None and ell > 1:
        raise ValueError("pass a WeightFunction for two-dimensional grids")
    fit = bernstein_fit(r_v, [(lo, hi)] * (2 * ell), degree)
    side = (degree + 1) ** ell
    C = fit.coeffs.reshape(side, side)
    chi = smooth_cutoff(box)(K.nodes)
    B = _tensor_basis(K.nodes, lo, hi, degree)
    left = (chi[:, None] * B).T
    right = (B @ C.T).T * (chi * K.quad_weights / vv)[None, :]
    T = FiniteRankKernel(left, right)
    D = truncate_kernel(K, box, box).matrix - T.dense()
    return T, operator_v1_norm(D, K.grid, vv)
