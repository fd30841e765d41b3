"""Robust M-estimation of scatter matrices and their large-dimensional
deterministic equivalents.

Subpackages:

* :mod:`robust_scatter.weights` -- weight-function calculus (u, phi, g, v, psi)
  and admissibility validation.
* :mod:`robust_scatter.estimators` -- finite-sample estimators: SCM, normalized
  SCM, oracle SCM and the Maronna fixed point.
* :mod:`robust_scatter.det_equiv` -- weight-system solvers for the
  deterministic equivalent of the robust estimator.
* :mod:`robust_scatter.spectrum` -- limiting spectral densities via Stieltjes
  transforms and asymptotic moment recursions.
* :mod:`robust_scatter.simulate` -- scenario builders and seeded Monte Carlo
  experiments validating the asymptotics at finite dimensions.
* :mod:`robust_scatter.cli` -- command-line entry point.
"""

from .exceptions import AdmissibilityError, ConfigError, ConvergenceError
from .weights import HUBER, STUDENT, RegimeParams, UFunction

__version__ = "0.1.0"

__all__ = [
    "AdmissibilityError",
    "ConfigError",
    "ConvergenceError",
    "HUBER",
    "STUDENT",
    "RegimeParams",
    "UFunction",
    "__version__",
]
