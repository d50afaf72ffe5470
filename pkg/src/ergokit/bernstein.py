"""Tensor-product Bernstein polynomials on boxes.

The degree-``m`` approximant of ``phi`` on ``[0, 1]^N`` is

    phi_m(z) = sum_j phi(j_1/m, ..., j_N/m) prod_i b_{j_i,m}(z_i),

with ``b_{j,m}(u) = C(m, j) u^j (1 - u)^(m - j)``. Boxes other than the
unit cube are handled by an affine change of variables.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.stats import qmc

MAX_DIMS = 4
MAX_COEFFS = 10**8


class BernsteinDomainError(ValueError):
    pass


def basis_matrix(u: np.ndarray, m: int) -> np.ndarray:
    """All degree-``m`` basis values at ``u``, shape ``(len(u), m + 1)``.

    Built by the triangular recurrence ``b_{j,k+1} = (1-u) b_{j,k} + u b_{j-1,k}``,
    which only forms convex combinations.
    """
    u = np.asarray(u, dtype=float).reshape(-1)
    B = np.ones((u.size, 1))
    w0 = (1 - u)[:, None]
    w1 = u[:, None]
    for k in range(1, m + 1):
        nxt = np.zeros((u.size, k + 1))
        nxt[:, :-1] += w0 * B
        nxt[:, 1:] += w1 * B
        B = nxt
    return B


def _contract(coeffs: np.ndarray, bases: Sequence[np.ndarray]) -> np.ndarray:
    out = np.tensordot(bases[0], coeffs, axes=([1], [0]))
    for B in bases[1:]:
        out = np.einsum("kj,kj...->k...", B, out)
    return out


@dataclass(frozen=True)
class BernsteinFit:
    degree: int
    dims: int
    coeffs: np.ndarray
    lo: np.ndarray
    hi: np.ndarray

    def to_unit(self, z, clip: bool = False) -> np.ndarray:
        z = np.asarray(z, dtype=float).reshape(-1, self.dims)
        u = (z - self.lo) / (self.hi - self.lo)
        if clip:
            return np.clip(u, 0.0, 1.0)
        slack = 1e-12
        if np.any(u < -slack) or np.any(u > 1 + slack):
            raise BernsteinDomainError("evaluation point outside the fitted box")
        return np.clip(u, 0.0, 1.0)

    def __call__(self, z) -> np.ndarray:
        return bernstein_eval(self, z)


def _normalize_box(box, N: Optional[int]):
    box = np.asarray(box, dtype=float)
    if box.ndim == 1:
        box = box.reshape(1, 2)
    if N is not None and box.shape[0] == 1 and N > 1:
        box = np.repeat(box, N, axis=0)
    if box.shape[1] != 2 or np.any(box[:, 1] <= box[:, 0]):
        raise ValueError("box must be a sequence of (lo, hi) pairs with lo < hi")
    return box[:, 0].copy(), box[:, 1].copy()


def lattice(lo: np.ndarray, hi: np.ndarray, m: int) -> np.ndarray:
    axes = [lo[d] + (hi[d] - lo[d]) * np.arange(m + 1) / m for d in range(lo.size)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in mesh], axis=-1)


def bernstein_fit(phi: Callable[[np.ndarray], np.ndarray], box, m: int,
                  N: Optional[int] = None) -> BernsteinFit:
    """Sample ``phi`` (vectorised over ``(K, N)`` points) on the degree-``m`` lattice."""
    lo, hi = _normalize_box(box, N)
    N = lo.size
    if m < 1:
        raise ValueError("degree must be >= 1")
    if not 1 <= N <= MAX_DIMS:
        raise ValueError(f"dimension must be between 1 and {MAX_DIMS}")
    if (m + 1) ** N > MAX_COEFFS:
        raise MemoryError(f"(m+1)^N = {(m + 1) ** N} coefficients exceeds the guard {MAX_COEFFS}")
    samples = np.asarray(phi(lattice(lo, hi, m)), dtype=float)
    if not np.all(np.isfinite(samples)):
        raise ValueError("phi returned a non-finite sample on the lattice")
    return BernsteinFit(m, N, samples.reshape((m + 1,) * N), lo, hi)


def bernstein_eval(fit: BernsteinFit, z, clip: bool = False) -> np.ndarray:
    u = fit.to_unit(z, clip=clip)
    bases = [basis_matrix(u[:, d], fit.degree) for d in range(fit.dims)]
    return _contract(fit.coeffs, bases)


def bernstein_grad(fit: BernsteinFit, z, clip: bool = False) -> np.ndarray:
    """Exact gradient from differenced coefficients, in box coordinates, shape ``(K, N)``."""
    u = fit.to_unit(z, clip=clip)
    m = fit.degree
    full = [basis_matrix(u[:, d], m) for d in range(fit.dims)]
    out = np.empty((u.shape[0], fit.dims))
    for d in range(fit.dims):
        dcoef = m * np.diff(fit.coeffs, axis=d)
        bases = list(full)
        bases[d] = basis_matrix(u[:, d], m - 1)
        out[:, d] = _contract(dcoef, bases) / (fit.hi[d] - fit.lo[d])
    return out


def probe_points(lo: np.ndarray, hi: np.ndarray, m: int, probe_count: int = 10_000,
                 max_midpoints: int = 100_000) -> np.ndarray:
    """Quasi-uniform probes plus lattice midpoints, the box centre and corners."""
    N = lo.size
    if N == 1:
        base = np.linspace(0.0, 1.0, probe_count)[:, None]
    else:
        base = qmc.Halton(d=N, scramble=False).random(probe_count)
    pts = [base]
    mids_1d = (np.arange(m) + 0.5) / m
    if m**N <= max_midpoints:
        mesh = np.meshgrid(*([mids_1d] * N), indexing="ij")
        pts.append(np.stack([g.ravel() for g in mesh], axis=-1))
    corners = np.array(np.meshgrid(*([[0.0, 1.0]] * N), indexing="ij")).reshape(N, -1).T
    pts += [np.full((1, N), 0.5), corners]
    unit = np.concatenate(pts)
    return lo + unit * (hi - lo)


def uniform_errors(phi, grad_phi, box, m: int, probe_count: int = 10_000,
                   N: Optional[int] = None) -> tuple[float, float]:
    """Sup over probes of ``|phi - phi_m|`` and ``max_i |d_i phi - d_i phi_m|``."""
    lo, hi = _normalize_box(box, N)
    probes = probe_points(lo, hi, m, probe_count)
    _check_grad(phi, grad_phi, probes[:: max(1, len(probes) // 50)], lo, hi)
    fit = bernstein_fit(phi, np.stack([lo, hi], axis=1), m)
    val_err = np.max(np.abs(phi(probes) - bernstein_eval(fit, probes)))
    g_true = np.asarray(grad_phi(probes), dtype=float).reshape(len(probes), -1)
    grad_err = np.max(np.abs(g_true - bernstein_grad(fit, probes)))
    return float(val_err), float(grad_err)


def _check_grad(phi, grad_phi, pts, lo, hi, tol: float = 1e-4):
    g = np.asarray(grad_phi(pts), dtype=float).reshape(len(pts), -1)
    for d in range(lo.size):
        h = 1e-6 * (hi[d] - lo[d])
        up, dn = pts.copy(), pts.copy()
        up[:, d] = np.minimum(pts[:, d] + h, hi[d])
        dn[:, d] = np.maximum(pts[:, d] - h, lo[d])
        fd = (phi(up) - phi(dn)) / (up[:, d] - dn[:, d])
        if np.any(np.abs(fd - g[:, d]) > tol * (1 + np.abs(g[:, d]))):
            raise ValueError("grad_phi is inconsistent with finite differences of phi")
