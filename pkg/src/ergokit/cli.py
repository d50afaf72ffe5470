"""Command-line experiment driver.

Every experiment is described by an :class:`ExperimentConfig` (a JSON
file); command-line flags override individual keys. Outputs embed the full
config so an artifact can be replayed with ``ergokit run ARTIFACT``.

Exit codes: 0 success, 2 a numerical check failed, 1 any error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from . import bernstein, drift, kernelgrid, model as models, norms, semigroup, simulate, valuefn
from .expr import GROWTH_RANK, ExpressionError, compile_function
from .grid import Grid

EXPERIMENTS = ("gradcheck", "poisson", "discounted", "decay", "spectrum", "drift",
               "lyapunov", "contraction", "bernstein", "truncation")
STOCHASTIC = {"gradcheck", "lyapunov", "contraction"}
JSON_NATIVE = {"gradcheck", "spectrum", "drift", "bernstein"}

EXIT_OK, EXIT_ERROR, EXIT_CHECK_FAILED = 0, 1, 2


class ConfigError(ValueError):
    pass


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ModelConfig(_Strict):
    name: Literal["ar1", "tanh1", "rotcon2"] = "ar1"
    rho: float = 0.5
    sigma: float = Field(1.0, gt=0)
    theta: Optional[float] = None
    noise: Literal["gaussian", "uniform"] = "gaussian"
    matrix_norm: Literal["spectral", "fro", "inf"] = "spectral"


class WeightConfig(_Strict):
    V: str = "0.1*x^2"
    eta: float = Field(1.0, gt=0, le=1)


class GridConfig(_Strict):
    lo: float = -8.0
    hi: float = 8.0
    M: int = Field(401, ge=2)


class MCConfig(_Strict):
    N: int = Field(100_000, ge=2)
    reps: int = Field(1000, ge=1)
    T: int = Field(200, ge=1)
    seed: Optional[int] = Field(None, ge=0)


class Tolerances(_Strict):
    series: float = Field(1e-10, gt=0)
    residual: float = Field(1e-6, gt=0)
    leak: float = Field(1e-8, gt=0)
    spectrum_agreement: float = Field(0.02, gt=0)
    r_squared: float = Field(0.99, ge=0, le=1)
    drift: float = Field(1e-9, ge=0)


class Params(_Strict):
    f: str = "x2"
    cost: str = "x"
    x: list[float] = [1.0]
    t: int = Field(2, ge=0)
    alpha: float = Field(0.9, ge=0, lt=1)
    mode: Literal["auto", "linear", "series"] = "auto"
    tmax: int = Field(30, ge=2)
    W: str = "1+x^2"
    delta: float = Field(0.05, gt=0)
    b: Optional[float] = Field(None, ge=0)
    C_radius: Optional[float] = Field(None, ge=0)
    etas: list[float] = [1.0, 0.5]
    top: int = Field(6, ge=1)
    m: int = Field(10, ge=1)
    dims: int = Field(1, ge=1, le=bernstein.MAX_DIMS)
    box: list[float] = [0.0, 1.0]
    probe_count: int = Field(10_000, ge=2)
    levels: list[float] = [2.0, 3.0, 4.0, 5.0, 6.0]
    x0: list[list[float]] = [[0.0]]
    p: Optional[float] = Field(None, gt=0)
    t0: int = Field(10, ge=0)
    rho_exp: float = Field(1.0, gt=0, le=1)
    export_kernel: Optional[str] = None


class OutputConfig(_Strict):
    path: Optional[str] = None
    format: Optional[Literal["csv", "json"]] = None


class ExperimentConfig(_Strict):
    experiment: Literal[EXPERIMENTS]
    model: ModelConfig = ModelConfig()
    weight: WeightConfig = WeightConfig()
    grid: GridConfig = GridConfig()
    mc: MCConfig = MCConfig()
    tolerances: Tolerances = Tolerances()
    params: Params = Params()
    output: OutputConfig = OutputConfig()


def _format_validation(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        path = ".".join(str(p) for p in err["loc"]) or "<root>"
        lines.append(f"{path}: {err['msg']}")
    return "; ".join(lines)


def validate_config(raw: dict) -> ExperimentConfig:
    try:
        cfg = ExperimentConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(_format_validation(exc)) from None
    if cfg.experiment in STOCHASTIC and cfg.mc.seed is None:
        raise ConfigError(f"mc.seed: required for the stochastic experiment {cfg.experiment!r}")
    if cfg.model.theta is not None and cfg.model.name != "rotcon2":
        raise ConfigError("model.theta: only rotcon2 takes a rotation angle")
    return cfg


def load_raw(path: Union[str, Path]) -> dict:
    """Read a config file, or the config embedded in an emitted artifact."""
    text = Path(path).read_text()
    if text.startswith("# config: "):
        return json.loads(text.splitlines()[0][len("# config: "):])
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc.msg})") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    if "config" in data and "result" in data:
        return data["config"]
    return data


def _set(raw: dict, dotted: str, value):
    node = raw
    *head, last = dotted.split(".")
    for key in head:
        node = node.setdefault(key, {})
        if not isinstance(node, dict):
            raise ConfigError(f"{dotted}: cannot override a non-object")
    node[last] = value


def _floats(text: str) -> list[float]:
    return [float(s) for s in text.split(",") if s.strip()]


def _range(text: str, names: tuple[str, ...]) -> dict:
    parts = text.split(":")
    if len(parts) != len(names):
        raise ConfigError(f"expected {':'.join(names)}, got {text!r}")
    return {n: (int(p) if n == "M" else float(p)) for n, p in zip(names, parts)}


# --- builders --------------------------------------------------------------

def build_model(cfg: ExperimentConfig) -> models.ModelSpec:
    m = cfg.model
    kw = {"name": m.name, "rho": m.rho, "sigma": m.sigma, "noise": m.noise,
          "matrix_norm": m.matrix_norm}
    if m.name == "rotcon2":
        kw["theta"] = 0.7 if m.theta is None else m.theta
    return models.from_config(kw)


def build_weight(cfg: ExperimentConfig, dim: int) -> norms.WeightFunction:
    fn = compile_function(cfg.weight.V, dim, "V")
    return norms.WeightFunction(fn.f, fn.grad_f, cfg.weight.eta, cfg.weight.V)


def build_function(text: str, dim: int) -> semigroup.TestFunction:
    try:
        return semigroup.builtin_function(text)
    except ValueError:
        return compile_function(text, dim)


def build_grid(cfg: ExperimentConfig, dim: int) -> Grid:
    return Grid.uniform(cfg.grid.lo, cfg.grid.hi, cfg.grid.M, dim)


def _point(values: list[float], dim: int) -> np.ndarray:
    x = np.asarray(values, dtype=float)
    if x.size == 1 and dim > 1:
        x = np.full(dim, x[0])
    if x.size != dim:
        raise ConfigError(f"params.x: expected {dim} coordinates, got {x.size}")
    return x


def _kernel(cfg: ExperimentConfig, mdl, v) -> kernelgrid.GridKernel:
    return kernelgrid.discretize(mdl, build_grid(cfg, mdl.dim_state), weight=v,
                                 leak_tol=cfg.tolerances.leak)


def _growth_warning(f: semigroup.TestFunction, v: norms.WeightFunction, dim: int):
    capacity = GROWTH_RANK["bounded"]
    probe = np.zeros((1, dim)), np.full((1, dim), 1e3)
    if float(v.V(probe[1])[0]) > float(v.V(probe[0])[0]):
        capacity = GROWTH_RANK["polynomial"]
    if GROWTH_RANK.get(f.growth_tag, GROWTH_RANK["exponential"]) > capacity:
        warnings.warn(f"test function {f.name!r} ({f.growth_tag} growth) exceeds what the weight "
                      f"{v.name!r} controls; the gradient identity is not guaranteed", stacklevel=2)


def _bernstein_function(name: str, dims: int):
    """Named one-dimensional-sum test functions for the Bernstein experiment."""
    if name == "sinpi":
        return (lambda z: np.sin(np.pi * z).sum(-1), lambda z: np.pi * np.cos(np.pi * z))
    table = {"z": "z", "z2": "z^2"}
    fn = compile_function(table.get(name, name), dims)
    return fn.f, fn.grad_f


# --- experiments -----------------------------------------------------------

@dataclass
class Outcome:
    summary: dict
    rows: Optional[list[dict]] = None
    footer: dict = field(default_factory=dict)
    ok: bool = True


def _node_columns(nodes: np.ndarray) -> dict:
    if nodes.shape[1] == 1:
        return {"node": nodes[:, 0]}
    return {f"node_{i + 1}": nodes[:, i] for i in range(nodes.shape[1])}


def _rows(columns: dict) -> list[dict]:
    n = len(next(iter(columns.values())))
    return [{k: v[i] for k, v in columns.items()} for i in range(n)]


def exp_gradcheck(cfg):
    mdl = build_model(cfg)
    f = build_function(cfg.params.f, mdl.dim_state)
    _growth_warning(f, build_weight(cfg, mdl.dim_state), mdl.dim_state)
    x = _point(cfg.params.x, mdl.dim_state)
    rep = semigroup.gradient_identity_check(mdl, f, x, cfg.params.t, cfg.mc.N, seed=cfg.mc.seed)
    return Outcome(rep.as_dict(), ok=rep.passed)


def _value_outcome(K, sol, resid_vec, cfg, v):
    vv = K.weights_for(v)
    cols = _node_columns(K.nodes)
    cols["h"] = sol.h
    cols["residual"] = resid_vec
    x = _point(cfg.params.x, K.grid.dim)
    summary = {
        "mean_c": sol.mean_c,
        "truncation_T": sol.truncation_T,
        "residual_vnorm": float(np.max(np.abs(resid_vec) / vv)),
        "pi_h": sol.pi_h,
        "x": x.tolist(),
        "h_at_x": float(sol.at(x[None, :])[0]),
        "leak": K.leak,
    }
    ok = summary["residual_vnorm"] <= cfg.tolerances.residual
    return Outcome(summary, _rows(cols), summary, ok)


def exp_poisson(cfg):
    mdl = build_model(cfg)
    v = build_weight(cfg, mdl.dim_state)
    K = _kernel(cfg, mdl, v)
    c = build_function(cfg.params.cost, mdl.dim_state)
    sol = valuefn.poisson_solve(K, c, mode=cfg.params.mode, tol=cfg.tolerances.series, v=v)
    ct = c(K.nodes) - sol.mean_c
    resid = sol.h - K.matrix @ sol.h - ct
    return _value_outcome(K, sol, resid, cfg, v)


def exp_discounted(cfg):
    mdl = build_model(cfg)
    v = build_weight(cfg, mdl.dim_state)
    K = _kernel(cfg, mdl, v)
    c = build_function(cfg.params.cost, mdl.dim_state)
    a = cfg.params.alpha
    sol = valuefn.discounted_solve(K, c, a, mode=cfg.params.mode, tol=cfg.tolerances.series, v=v)
    resid = c(K.nodes) + a * (K.matrix @ sol.h) - sol.h
    out = _value_outcome(K, sol, resid, cfg, v)
    out.summary["alpha"] = a
    return out


def decay_series(K: kernelgrid.GridKernel, c_values: np.ndarray, v, tmax: int):
    """``(t, ||P~^t c||_v, ||P~^t c||_(v,1))`` for ``t = 0..tmax``."""
    Kc = kernelgrid.center_kernel(K)
    f = np.asarray(c_values, dtype=float)
    out = []
    for t in range(tmax + 1):
        gf = norms.GridFunction(K.grid, f).with_grid_derivatives()
        out.append((t, norms.v_norm(gf, v), norms.sobolev_norm_v1(gf, v)))
        f = Kc.matrix @ f
    return out


def _fit_or_none(series):
    pts = [(t, n) for t, n in series if n > 0]
    if len(pts) < 3:
        return None
    return decay_rate_fit_dict(norms.decay_rate_fit(pts))


def decay_rate_fit_dict(fit: norms.DecayFit) -> dict:
    return {"b0": fit.b0, "rho0": fit.rho0, "r_squared": fit.r_squared}


def exp_decay(cfg):
    mdl = build_model(cfg)
    v = build_weight(cfg, mdl.dim_state)
    K = _kernel(cfg, mdl, v)
    c = build_function(cfg.params.cost, mdl.dim_state)
    series = decay_series(K, c(K.nodes), v, cfg.params.tmax)
    rows = [{"t": t, "vnorm": a, "v1norm": b} for t, a, b in series]
    fit_v = _fit_or_none([(t, a) for t, a, _ in series])
    fit_v1 = _fit_or_none([(t, b) for t, _, b in series])
    ok = all(f is None or f["r_squared"] >= cfg.tolerances.r_squared for f in (fit_v, fit_v1))
    summary = {"fit_vnorm": fit_v, "fit_v1norm": fit_v1}
    return Outcome(summary, rows, summary, ok)


def exp_spectrum(cfg):
    mdl = build_model(cfg)
    v = build_weight(cfg, mdl.dim_state)
    K = _kernel(cfg, mdl, v)
    if cfg.params.export_kernel:
        np.savetxt(cfg.params.export_kernel, K.matrix, fmt="%.17g", delimiter=",")
    rep = kernelgrid.spectrum_and_radius(K, top_k=cfg.params.top)
    rep_c = kernelgrid.spectrum_and_radius(kernelgrid.center_kernel(K), top_k=cfg.params.top)
    summary = {"kernel": rep.as_dict(), "centered": rep_c.as_dict(), "leak": K.leak,
               "grid": K.grid.describe()}
    return Outcome(summary, ok=rep_c.agreement <= cfg.tolerances.spectrum_agreement)


def exp_drift(cfg):
    mdl = build_model(cfg)
    V = build_weight(cfg, mdl.dim_state)
    W = compile_function(cfg.params.W, mdl.dim_state, "W")
    nodes = build_grid(cfg, mdl.dim_state).nodes
    p, tol = cfg.params, cfg.tolerances.drift
    if p.b is None or p.C_radius is None:
        if p.b is not None or p.C_radius is not None:
            raise ConfigError("params.b and params.C_radius must be given together")
        rep = drift.dv3_calibrate(mdl, V, W, p.delta, nodes, p.etas, tol)
    else:
        spec = drift.DV3Spec(V, W, p.delta, p.b, p.C_radius)
        rep = drift.dv3_check(mdl, spec, nodes, p.etas, tol)
    return Outcome(rep.as_dict(), ok=rep.passed)


def _x0_points(cfg, dim: int) -> list[np.ndarray]:
    return [_point(p, dim) for p in cfg.params.x0]


def _x0_label(x: np.ndarray) -> str:
    return " ".join(repr(float(c)) for c in x)


def exp_lyapunov(cfg):
    mdl = build_model(cfg)
    rows = []
    for x in _x0_points(cfg, mdl.dim_state):
        if cfg.params.p is None:
            est = simulate.lyapunov_exponent(mdl, x, cfg.mc.T, cfg.mc.reps, cfg.mc.seed)
        else:
            est = simulate.mean_exponent(mdl, x, cfg.mc.T, cfg.params.p, cfg.mc.reps, cfg.mc.seed)
        rows.append({"x0": _x0_label(x), "estimate": est.value, "std_error": est.std_error,
                     "T": cfg.mc.T, "reps": cfg.mc.reps, "seed": cfg.mc.seed})
    return Outcome({"norm": mdl.matrix_norm, "p": cfg.params.p}, rows)


def exp_contraction(cfg):
    mdl = build_model(cfg)
    v = build_weight(cfg, mdl.dim_state)
    pts = np.array(_x0_points(cfg, mdl.dim_state))
    rep = simulate.contraction_diagnostic(mdl, pts, cfg.params.t0, cfg.mc.reps, v,
                                          cfg.params.rho_exp, cfg.mc.seed)
    rows = [{"x0": _x0_label(x), "estimate": r["estimate"], "std_error": r["std_error"],
             "T": rep.t0, "reps": rep.reps, "seed": rep.seed} for x, r in zip(pts, rep.rows)]
    summary = {"k": rep.k, "k_std_error": rep.k_std_error, "rho_exp": rep.rho_exp}
    return Outcome(summary, rows, summary)


def exp_bernstein(cfg):
    p = cfg.params
    if len(p.box) != 2 or p.box[1] <= p.box[0]:
        raise ConfigError("params.box: expected [lo, hi] with lo < hi")
    phi, grad = _bernstein_function(p.f, p.dims)
    box = [tuple(p.box)] * p.dims
    val, gr = bernstein.uniform_errors(phi, grad, box, p.m, p.probe_count)
    return Outcome({"sup_val_err": val, "sup_grad_err": gr, "m": p.m, "dims": p.dims})


def exp_truncation(cfg):
    mdl = build_model(cfg)
    v = build_weight(cfg, mdl.dim_state)
    K = _kernel(cfg, mdl, v)
    rows = []
    for n in cfg.params.levels:
        ev, ev1 = kernelgrid.truncation_error(K, n, n, v)
        rows.append({"n": n, "err_v": ev, "err_v1": ev1})
    return Outcome({"grid": K.grid.describe()}, rows)


RUNNERS = {
    "gradcheck": exp_gradcheck, "poisson": exp_poisson, "discounted": exp_discounted,
    "decay": exp_decay, "spectrum": exp_spectrum, "drift": exp_drift,
    "lyapunov": exp_lyapunov, "contraction": exp_contraction, "bernstein": exp_bernstein,
    "truncation": exp_truncation,
}


# --- output ----------------------------------------------------------------

def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _cell(v) -> str:
    v = _plain(v)
    if isinstance(v, float):
        return repr(v)
    if v is None:
        return ""
    if isinstance(v, (list, dict)):
        return json.dumps(v, sort_keys=True)
    return str(v)


def render(cfg: ExperimentConfig, outcome: Outcome, fmt: str) -> str:
    config = cfg.model_dump(mode="json")
    if fmt == "json":
        doc = {"config": config, "experiment": cfg.experiment, "result": _plain(outcome.summary)}
        if outcome.rows is not None:
            doc["rows"] = _plain(outcome.rows)
        return json.dumps(doc, sort_keys=True, indent=2) + "\n"
    buf = io.StringIO()
    buf.write("# config: " + json.dumps(config, sort_keys=True, separators=(",", ":")) + "\n")
    rows = outcome.rows if outcome.rows is not None else [outcome.summary]
    writer = csv.writer(buf, lineterminator="\n")
    header = list(rows[0].keys()) if rows else []
    writer.writerow(header)
    for r in rows:
        writer.writerow([_cell(r[k]) for k in header])
    for k in sorted(outcome.footer):
        buf.write(f"# {k}: {_cell(outcome.footer[k])}\n")
    return buf.getvalue()


def run_experiment(cfg: ExperimentConfig, stdout=None) -> int:
    """Run one experiment and write its artifact; returns the exit code."""
    outcome = RUNNERS[cfg.experiment](cfg)
    fmt = cfg.output.format or ("json" if cfg.experiment in JSON_NATIVE else "csv")
    text = render(cfg, outcome, fmt)
    if cfg.output.path:
        Path(cfg.output.path).write_text(text)
    else:
        (stdout or sys.stdout).write(text)
    return EXIT_OK if outcome.ok else EXIT_CHECK_FAILED


# --- argument parsing ------------------------------------------------------

# flag -> (dotted key, converter)
OVERRIDES = {
    "model": ("model.name", str), "rho": ("model.rho", float), "sigma": ("model.sigma", float),
    "theta": ("model.theta", float), "noise": ("model.noise", str),
    "matrix_norm": ("model.matrix_norm", str),
    "V": ("weight.V", str), "eta": ("weight.eta", float),
    "N": ("mc.N", int), "reps": ("mc.reps", int), "T": ("mc.T", int), "seed": ("mc.seed", int),
    "f": ("params.f", str), "cost": ("params.cost", str), "x": ("params.x", _floats),
    "t": ("params.t", int), "alpha": ("params.alpha", float), "mode": ("params.mode", str),
    "tmax": ("params.tmax", int), "W": ("params.W", str), "delta": ("params.delta", float),
    "b": ("params.b", float), "C_radius": ("params.C_radius", float),
    "etas": ("params.etas", _floats), "top": ("params.top", int), "m": ("params.m", int),
    "dims": ("params.dims", int), "probes": ("params.probe_count", int),
    "levels": ("params.levels", _floats), "p": ("params.p", float), "t0": ("params.t0", int),
    "rho_exp": ("params.rho_exp", float), "export_kernel": ("params.export_kernel", str),
    "out": ("output.path", str), "format": ("output.format", str),
}


def _add_common(p: argparse.ArgumentParser):
    g = p.add_argument_group("overrides")
    g.add_argument("--model", choices=sorted(models.BUILTINS))
    for name in ("rho", "sigma", "theta", "eta", "alpha", "delta", "b", "rho_exp", "p"):
        g.add_argument(f"--{name.replace('_', '-')}", dest=name, type=float)
    g.add_argument("--C-radius", dest="C_radius", type=float)
    g.add_argument("--noise", choices=["gaussian", "uniform"])
    g.add_argument("--matrix-norm", dest="matrix_norm", choices=["spectral", "fro", "inf"])
    g.add_argument("--grid", metavar="LO:HI:M")
    g.add_argument("--box", metavar="LO:HI")
    g.add_argument("--weight", "--V", dest="V", metavar="EXPR", help="V in v = exp(eta V)")
    g.add_argument("--W", metavar="EXPR")
    g.add_argument("--f", metavar="NAME|EXPR")
    g.add_argument("--cost", metavar="NAME|EXPR")
    g.add_argument("--x", metavar="X1[,X2]")
    g.add_argument("--x0", action="append", metavar="X1[,X2]", help="repeatable")
    g.add_argument("--etas", metavar="E1,E2,...")
    g.add_argument("--levels", metavar="N1,N2,...")
    g.add_argument("--mode", choices=["auto", "linear", "series"])
    for name in ("t", "tmax", "top", "m", "dims", "probes", "reps", "T", "seed", "t0"):
        g.add_argument(f"--{name}", type=int)
    g.add_argument("--n", "--N", dest="N", type=int, help="Monte Carlo sample size")
    g.add_argument("--export-kernel", dest="export_kernel", metavar="PATH")
    g.add_argument("--out", metavar="PATH")
    g.add_argument("--format", choices=["csv", "json"])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ergokit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run the experiment described by a config or artifact file")
    run.add_argument("config")
    _add_common(run)
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", help="JSON config; flags override its keys")
        _add_common(p)
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    raw = load_raw(args.config) if args.config else {}
    if args.command != "run":
        if raw.get("experiment", args.command) != args.command:
            raise ConfigError(f"experiment: config says {raw['experiment']!r}, "
                              f"command is {args.command!r}")
        raw["experiment"] = args.command
    for flag, (key, conv) in OVERRIDES.items():
        val = getattr(args, flag, None)
        if val is not None:
            _set(raw, key, conv(val))
    if args.grid is not None:
        for k, v in _range(args.grid, ("lo", "hi", "M")).items():
            _set(raw, f"grid.{k}", v)
    if args.box is not None:
        r = _range(args.box, ("lo", "hi"))
        _set(raw, "params.box", [r["lo"], r["hi"]])
    if args.x0:
        _set(raw, "params.x0", [_floats(s) for s in args.x0])
    return validate_config(raw)


# flags whose values may start with "-" (e.g. --grid -6:6:1201)
_DASH_VALUED = {"--grid", "--box", "--x", "--x0", "--levels", "--etas"}


def _glue_values(argv: list[str]) -> list[str]:
    out, i = [], 0
    while i < len(argv):
        if argv[i] in _DASH_VALUED and i + 1 < len(argv):
            out.append(f"{argv[i]}={argv[i + 1]}")
            i += 2
        else:
            out.append(argv[i])
            i += 1
    return out


def main(argv: Optional[list[str]] = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(_glue_values(argv))
    try:
        cfg = config_from_args(args)
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            warnings.showwarning = _show_warning
            return run_experiment(cfg)
    except (ConfigError, ExpressionError) as exc:
        print(f"ergokit: config error: {exc}", file=sys.stderr)
    except (ValueError, ArithmeticError, RuntimeError, MemoryError, OSError) as exc:
        print(f"ergokit: {type(exc).__name__}: {exc}", file=sys.stderr)
    return EXIT_ERROR


def _show_warning(message, category, filename, lineno, file=None, line=None):
    print(f"ergokit: warning: {message}", file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
