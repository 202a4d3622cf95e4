"""Single-index model landscapes and online spherical SGD beyond Gaussian data.

The package is organized around five building blocks:

- :mod:`sphindex.orthopoly`   Gegenbauer / Hermite polynomial engine (evaluation,
  derivatives, roots, Gauss-Jacobi quadrature).
- :mod:`sphindex.measures`    input distributions (Gaussian, uniform sphere,
  radial mixtures, product laws) and the one-dimensional sphere marginal.
- :mod:`sphindex.landscape`   exact population-loss profiles, information
  exponent, local-polynomial-growth certificates.
- :mod:`sphindex.dynamics`    online SGD on the sphere, hitting times, ensembles.
- :mod:`sphindex.perturb`     deviation diagnostics for non-symmetric inputs
  (loss/gradient deltas, Stein bound checks, projected Wasserstein estimate).

A configuration-driven CLI lives in :mod:`sphindex.cli`.
"""

from sphindex.orthopoly import (
    GegenbauerBasis,
    HermiteBasis,
    QuadratureRule,
    RootReport,
    eval_gegenbauer,
    eval_gegenbauer_derivative,
    eval_hermite,
    gegenbauer_roots,
    harmonic_dimension,
    quadrature,
    taylor_lower_bound_check,
    upsilon,
)
from sphindex.measures import (
    InputDistribution,
    MarginalDensity,
    ScalarLaw,
    init_tail_probability,
    marginal_density,
    sample,
)
from sphindex.links import LinkFunction
from sphindex.landscape import (
    LossProfile,
    LpgCertificate,
    beta_coefficients,
    gaussian_profile,
    information_exponent,
    lpg_certify,
    projected_gradient,
    spectral_condition_check,
)
from sphindex.dynamics import (
    EnsembleResult,
    SgdConfig,
    SgdTrajectory,
    monitor_decomposition,
    run_ensemble,
    run_trial,
    sgd_step,
    sparsity_tracker,
    step_size,
)
from sphindex.perturb import (
    PerturbationReport,
    SteinCheck,
    SteinTestFunction,
    chi,
    delta_estimates,
    projected_w1_estimate,
    stein_bound_check,
)

__version__ = "0.1.0"

__all__ = [
    "GegenbauerBasis",
    "HermiteBasis",
    "QuadratureRule",
    "RootReport",
    "eval_gegenbauer",
    "eval_gegenbauer_derivative",
    "eval_hermite",
    "gegenbauer_roots",
    "harmonic_dimension",
    "quadrature",
    "taylor_lower_bound_check",
    "upsilon",
    "InputDistribution",
    "MarginalDensity",
    "ScalarLaw",
    "init_tail_probability",
    "marginal_density",
    "sample",
    "LinkFunction",
    "LossProfile",
    "LpgCertificate",
    "beta_coefficients",
    "gaussian_profile",
    "information_exponent",
    "lpg_certify",
    "projected_gradient",
    "spectral_condition_check",
    "EnsembleResult",
    "SgdConfig",
    "SgdTrajectory",
    "monitor_decomposition",
    "run_ensemble",
    "run_trial",
    "sgd_step",
    "sparsity_tracker",
    "step_size",
    "PerturbationReport",
    "SteinCheck",
    "SteinTestFunction",
    "chi",
    "delta_estimates",
    "projected_w1_estimate",
    "stein_bound_check",
]
