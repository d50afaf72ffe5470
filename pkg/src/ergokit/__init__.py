"""Numerical checks of ergodicity and gradient identities for Markov models.

The package simulates state-space models ``X(t+1) = a(X(t), N(t+1))``
together with their sensitivity process, estimates ``P^t f`` and
``Q^t grad f`` by Monte Carlo, discretises transition kernels on grids,
solves Poisson and discounted equations, checks Foster-Lyapunov drift and
measures weighted-norm decay.
"""

from .bernstein import bernstein_eval, bernstein_fit, bernstein_grad, uniform_errors
from .drift import DV3Spec, dv3_calibrate, dv3_check, generator_apply, nonlinear_generator
from .grid import Grid
from .kernelgrid import (
    GridKernel,
    center_kernel,
    discretize,
    finite_rank_approx,
    smooth_cutoff,
    spectral_projection,
    spectrum_and_radius,
    truncate_kernel,
    truncation_error,
)
from .model import BUILTINS, ModelSpec, ar1, from_config, rotcon2, tanh1
from .norms import (
    GridFunction,
    WeightFunction,
    decay_rate_fit,
    measure_v_norm,
    operator_v1_norm,
    operator_v_norm,
    quadratic_weight,
    sobolev_norm_v1,
    v_norm,
)
from .semigroup import (
    EstimatorResult,
    TestFunction,
    builtin_function,
    estimate_ptf,
    estimate_qt_grad,
    gradient_identity_check,
)
from .simulate import contraction_diagnostic, lyapunov_exponent, mean_exponent, simulate_path
from .valuefn import (
    clt_variance,
    discounted_gradient,
    discounted_solve,
    poisson_gradient,
    poisson_solve,
)

__version__ = "0.1.0"
