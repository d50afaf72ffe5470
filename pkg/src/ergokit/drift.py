"""Nonlinear generator ``H(F) = log(P e^F) - F`` and the (DV3) drift check.

(DV3) asks for ``H(V) <= -delta W + b 1_C``; convexity of ``H`` carries
the bound over to ``eta V`` with ``(delta eta, b eta)`` for any
``eta in (0, 1)``. Infeasibility is reported, never raised.
"""

from __future__ import annotations

import itertools
from dataclasses import asdict, dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.special import logsumexp

from . import _mc
from .kernelgrid import GridKernel
from .model import ModelSpec
from .norms import GridFunction, WeightFunction
from .semigroup import EstimatorResult

QUAD_NODES = 64
TAIL_RTOL = 1e-8


class GeneratorDivergenceError(ArithmeticError):
    def __init__(self, x, detail: str):
        self.x = x
        super().__init__(f"P e^F is not resolved at x={x}: {detail}")


def noise_quadrature(law, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes ``(K, m)`` and log-weights ``(K,)`` integrating against the noise law."""
    if law.kind == "gaussian":
        z, w = np.polynomial.hermite.hermgauss(n)
        nodes_1d, logw_1d = np.sqrt(2.0) * z, np.log(w) - 0.5 * np.log(np.pi)
    elif law.kind == "uniform":
        z, w = np.polynomial.legendre.leggauss(n)
        nodes_1d, logw_1d = z, np.log(w / 2.0)
    else:
        with np.errstate(divide="ignore"):
            return law.values, np.log(law.probs)
    m = law.dim
    nodes = np.array(list(itertools.product(nodes_1d, repeat=m)))
    logw = np.array([sum(c) for c in itertools.product(logw_1d, repeat=m)])
    return nodes, logw


def _log_pef_quadrature(model: ModelSpec, F: Callable, x: np.ndarray, n: int) -> np.ndarray:
    nodes, logw = noise_quadrature(model.noise_law, n)
    y = model.map(x[:, None, :], nodes[None, :, :])  # (B, K, l)
    return logsumexp(F(y) + logw[None, :], axis=1)


def nonlinear_generator(source: Union[ModelSpec, GridKernel], F, x=None, method: str = "quadrature",
                        N: Optional[int] = None, seed: Optional[int] = None):
    """Evaluate ``H(F)``.

    With a model, ``F`` is a callable on states and ``x`` an array of points;
    ``method`` is ``"quadrature"`` (returns an array) or ``"monte-carlo"``
    (returns an :class:`EstimatorResult`). With a grid kernel, ``F`` is a
    :class:`GridFunction` or callable and the result is a :class:`GridFunction`.
    """
    if isinstance(source, GridKernel):
        if source.signed:
            raise ValueError("the nonlinear generator needs a nonnegative kernel")
        Fv = F.values if isinstance(F, GridFunction) else np.asarray(F(source.nodes), float)
        logPeF = logsumexp(np.broadcast_to(Fv, source.matrix.shape), b=source.matrix, axis=1)
        return GridFunction(source.grid, logPeF - Fv)

    model = source
    x = np.asarray(x, dtype=float).reshape(-1, model.dim_state)
    Fx = F(x)
    if method == "quadrature":
        lo = _log_pef_quadrature(model, F, x, QUAD_NODES)
        if model.noise_law.kind != "tabulated":
            hi = _log_pef_quadrature(model, F, x, 2 * QUAD_NODES)
            rel = np.abs(np.expm1(lo - hi))
            bad = ~np.isfinite(rel) | (rel > TAIL_RTOL)
            if np.any(bad):
                i = int(np.argmax(bad))
                raise GeneratorDivergenceError(x[i].tolist(), f"64/128-node mismatch {rel[i]:.2e}")
        if not np.all(np.isfinite(lo)):
            i = int(np.argmax(~np.isfinite(lo)))
            raise GeneratorDivergenceError(x[i].tolist(), "non-finite integral")
        return lo - Fx
    if method == "monte-carlo":
        if N is None or seed is None or N < 2:
            raise ValueError("monte-carlo method needs N >= 2 and a seed")
        draws = model.noise_law.sample(_mc.substream(seed, 0), N)  # shared across x
        vals = F(model.map(x[:, None, :], draws[None, :, :]))  # (B, N)
        top = vals.max(axis=1, keepdims=True)
        w = np.exp(vals - top)
        mean_w = w.mean(axis=1)
        H = top[:, 0] + np.log(mean_w) - Fx
        se = w.std(axis=1, ddof=1) / np.sqrt(N) / mean_w
        return EstimatorResult(H, se, N, seed)
    raise ValueError(f"unknown method {method!r}")


def generator_apply(K: GridKernel, f: GridFunction) -> GridFunction:
    """``P f - f``."""
    if f.values.shape != (K.size,):
        raise ValueError("grid function does not match the kernel")
    return GridFunction(K.grid, K.matrix @ f.values - f.values)


@dataclass(frozen=True)
class DV3Spec:
    V: WeightFunction
    W: Callable[[np.ndarray], np.ndarray]
    delta: float
    b: float
    C_radius: float

    def __post_init__(self):
        if self.delta <= 0:
            raise ValueError("delta must be > 0")
        if self.b < 0:
            raise ValueError("b must be >= 0")
        if self.C_radius < 0:
            raise ValueError("C_radius must be >= 0")


@dataclass
class DV3Report:
    rows: list
    max_violation: float
    min_b: Optional[float]
    min_C_radius: Optional[float]
    min_b_at_min_radius: Optional[float]
    passed: bool

    def as_dict(self) -> dict:
        out = asdict(self)
        out["pass"] = out.pop("passed")
        return out


def _drift_margin(source, spec: DV3Spec, nodes: np.ndarray, eta: float) -> np.ndarray:
    """``H(eta V) + delta eta W`` on nodes."""
    def F(y):
        return eta * spec.V.log_v(y)

    if isinstance(source, GridKernel):
        H = nonlinear_generator(source, F).values
    else:
        H = nonlinear_generator(source, F, nodes)
    return H + spec.delta * eta * spec.W(nodes)


def dv3_check(source: Union[ModelSpec, GridKernel], spec: DV3Spec, nodes=None,
              etas: Sequence[float] = (1.0,), tol: float = 1e-9) -> DV3Report:
    """Evaluate the (DV3) bound on grid nodes for each scaling ``eta``.

    ``min_b`` is the smallest ``b`` that works with ``spec.C_radius``;
    ``min_C_radius`` the smallest ball radius that works with ``spec.b``.
    Both are in unscaled (``eta = 1``) units and ``None`` when infeasible.
    A violation on the outermost node shell means the grid cannot certify
    any radius.
    """
    if nodes is None:
        if not isinstance(source, GridKernel):
            raise ValueError("pass nodes when checking a model")
        nodes = source.nodes
    nodes = np.asarray(nodes, dtype=float)
    if nodes.ndim == 1:
        nodes = nodes[:, None]
    W = spec.W(nodes)
    if np.any(W < 1):
        raise ValueError("W must be >= 1 on the grid")
    radius = np.linalg.norm(nodes, axis=1)
    in_C = radius <= spec.C_radius + 1e-12
    if not np.any(in_C) and spec.C_radius > 0:
        raise ValueError("grid has no nodes inside C")
    if spec.C_radius >= radius.max():
        raise ValueError("grid must extend beyond C")
    shell = radius >= radius.max() - 1e-9

    rows = []
    for eta in etas:
        if not 0 < eta <= 1:
            raise ValueError("eta must lie in (0, 1]")
        g = _drift_margin(source, spec, nodes, eta)
        viol = g - spec.b * eta * in_C
        outside_bad = g[~in_C] > tol
        min_b = None if np.any(outside_bad) else max(0.0, float(g[in_C].max(initial=0.0)) / eta)
        must_cover = g > tol
        min_r = None
        if not np.any(must_cover & shell) and not np.any(g > spec.b * eta + tol):
            min_r = float(radius[must_cover].max(initial=0.0))
        rows.append({
            "eta": float(eta),
            "max_violation": float(max(viol.max(), 0.0)),
            "min_b": min_b,
            "min_C_radius": min_r,
            "pass": bool(viol.max() <= tol),
        })

    head = rows[0]
    min_b_at_r = None
    if head["min_C_radius"] is not None:
        g = _drift_margin(source, spec, nodes, etas[0])
        inside = radius <= head["min_C_radius"] + 1e-12
        min_b_at_r = max(0.0, float(g[inside].max(initial=0.0)) / etas[0])
    return DV3Report(
        rows=rows,
        max_violation=max(r["max_violation"] for r in rows),
        min_b=head["min_b"],
        min_C_radius=head["min_C_radius"],
        min_b_at_min_radius=min_b_at_r,
        passed=all(r["pass"] for r in rows),
    )


def dv3_calibrate(source: Union[ModelSpec, GridKernel], V: WeightFunction, W: Callable,
                  delta: float, nodes=None, etas: Sequence[float] = (1.0,),
                  tol: float = 1e-9) -> DV3Report:
    """Find the smallest certifiable ``C`` radius, then the smallest ``b`` on it.

    The returned report is the check rerun at those constants, so ``passed``
    tells whether the scaled variants in ``etas`` hold too. An infeasible
    ``delta`` gives ``None`` constants and ``passed = False``.
    """
    # a huge b isolates the radius question
    probe = dv3_check(source, DV3Spec(V, W, delta, 1e300, 0.0), nodes, (etas[0],), tol)
    if probe.min_C_radius is None:
        return DV3Report(probe.rows, probe.max_violation, None, None, None, False)
    radius = probe.min_C_radius
    b = probe.min_b_at_min_radius
    report = dv3_check(source, DV3Spec(V, W, delta, b, radius), nodes, etas, tol)
    report.min_C_radius = radius
    report.min_b = b
    return report
