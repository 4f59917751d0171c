"""Cubic natural exponential families and generalized conjugate priors."""

from .estimators import BetaConjugatePosterior, ExponentialVarianceForm
from .exceptions import (
    CubicNEFError,
    InvalidData,
    InvalidParameter,
    NonConvergence,
    NonIntegrable,
    OutOfDomain,
    SingularFit,
)
from .families import (
    CubicViaTBeta,
    CumulantModel,
    ExampleIG,
    Quadratic,
    QuadraticKind,
    catalog,
    make_model,
    parse_family,
    psi,
    variance,
)
from .numerics import Interval, Tolerance, integrate
from .posterior import DataBatch, PosteriorState, closed_form_functional, posterior_functional, update
from .priors import HyperParams, PriorKind, make_prior, normalize
from .tbeta import m_beta_set, theta_beta_set, transport_cumulant, variance_tbeta
from .theorems import CheckReport, fit_abc

__version__ = "0.1.0"

__all__ = [
    "BetaConjugatePosterior",
    "ExponentialVarianceForm",
    "CubicNEFError",
    "InvalidData",
    "InvalidParameter",
    "NonConvergence",
    "NonIntegrable",
    "OutOfDomain",
    "SingularFit",
    "CubicViaTBeta",
    "CumulantModel",
    "ExampleIG",
    "Quadratic",
    "QuadraticKind",
    "catalog",
    "make_model",
    "parse_family",
    "psi",
    "variance",
    "Interval",
    "Tolerance",
    "integrate",
    "DataBatch",
    "PosteriorState",
    "closed_form_functional",
    "posterior_functional",
    "update",
    "HyperParams",
    "PriorKind",
    "make_prior",
    "normalize",
    "m_beta_set",
    "theta_beta_set",
    "transport_cumulant",
    "variance_tbeta",
    "CheckReport",
    "fit_abc",
]
