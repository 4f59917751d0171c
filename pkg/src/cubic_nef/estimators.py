"""Estimator-style wrappers around the functional core.

Both classes follow the scikit-learn conventions: hyperparameters are set in
``__init__`` and exposed through ``get_params``, fitted state carries a
trailing underscore, and ``fit`` returns ``self``.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .families import make_model
from .posterior import (
    BayesPosterior,
    DataBatch,
    PosteriorState,
    closed_form_functional,
    posterior_functional,
    update,
)
from .priors import HyperParams
from .theorems import VarianceGrid, beta_scan, fit_abc


def _as_observations(X):
    X = check_array(X, ensure_2d=False, dtype=float, input_name="X")
    if X.ndim == 2:
        if X.shape[1] != 1:
            raise ValueError(f"expected a single feature column, got shape {X.shape}")
        X = X[:, 0]
    return X


class BetaConjugatePosterior(BaseEstimator):
    """Conjugate posterior over theta under the prior ``pi^beta_{t, m0}``.

    Parameters
    ----------
    family : str
        Family descriptor, e.g. ``"example-ig"`` or ``"gamma:p=2@0.5"``.
    beta : float
        T_beta parameter of the prior and of the observation law.
    t, m0 : float
        Prior hyperparameters; ``t > 0`` and ``1 + beta m0 > 0``.

    Attributes
    ----------
    state_ : PosteriorState
    t_, m0_ : float
        Updated hyperparameters.
    n_seen_ : int
    xbar_ : float
        Mean of all observations seen, NaN before any.
    """

    def __init__(self, family="example-ig", beta=1.0, t=2.0, m0=1.0):
        self.family = family
        self.beta = beta
        self.t = t
        self.m0 = m0

    def _initial_state(self):
        model = make_model(self.family)
        return PosteriorState(HyperParams(self.t, self.m0, self.beta), model)

    def _absorb(self, state, X):
        obs = _as_observations(X)
        batch = DataBatch.from_values(obs)
        new = update(state, batch)
        self.state_ = new
        self.t_, self.m0_ = new.hp.t, new.hp.m0
        self.n_seen_ = getattr(self, "n_seen_", 0) + batch.n
        self.total_ = getattr(self, "total_", 0.0) + batch.total
        self.xbar_ = self.total_ / self.n_seen_ if self.n_seen_ else np.nan
        return self

    def fit(self, X, y=None):
        self.n_seen_, self.total_ = 0, 0.0
        return self._absorb(self._initial_state(), X)

    def partial_fit(self, X, y=None):
        state = getattr(self, "state_", None) or self._initial_state()
        if not hasattr(self, "n_seen_"):
            self.n_seen_, self.total_ = 0, 0.0
        return self._absorb(state, X)

    def posterior_functional(self, method="closed"):
        """Posterior expectation of ``k'/(1 + beta k')`` given everything seen so far.

        ``method="closed"`` uses the linear closed form in the sample mean,
        ``method="quadrature"`` integrates the Bayes posterior from the prior.
        """
        check_is_fitted(self, "state_")
        prior = self._initial_state()
        seen = DataBatch.from_summary(self.n_seen_, self.xbar_)
        if method == "closed":
            return closed_form_functional(prior, seen)
        if method == "quadrature":
            return posterior_functional(prior, seen)
        raise ValueError("method must be 'closed' or 'quadrature'")

    def logpdf(self, theta):
        """Posterior log density of theta (the updated prior)."""
        check_is_fitted(self, "state_")
        return self.state_.prior().logpdf(theta)

    def bayes_logpdf(self, theta):
        """Posterior log density from Bayes' rule with independent normalization."""
        check_is_fitted(self, "state_")
        seen = DataBatch.from_summary(self.n_seen_, self.xbar_)
        return BayesPosterior(self._initial_state(), seen).logpdf(theta)

    def sample(self, n, seed):
        check_is_fitted(self, "state_")
        return self.state_.prior().sample(n, seed)


class ExponentialVarianceForm(RegressorMixin, BaseEstimator):
    """Fit ``ln V(m) - 3 ln(1 + beta m) = a psi(m) + b k(psi(m)) + c`` from raw variance values.

    Parameters
    ----------
    beta : float or None
        Fixed beta, or ``None`` to scan ``betas`` and keep the best fit.
    betas : array-like
        Scan grid used when ``beta`` is ``None``.
    grid_size : int
        Number of grid points used by the least-squares fit.

    Attributes
    ----------
    a_, b_, c_, beta_ : float
    residual_ : float
        Largest absolute residual of the fit.
    """

    def __init__(self, beta=None, betas=None, grid_size=64):
        self.beta = beta
        self.betas = betas
        self.grid_size = grid_size

    def fit(self, X, y):
        m = _as_observations(X)
        V = check_array(np.asarray(y, dtype=float), ensure_2d=False, input_name="y")
        order = np.argsort(m)
        grid = VarianceGrid(m[order], V[order])
        if self.beta is None:
            betas = np.round(np.arange(-2.0, 2.0001, 0.05), 10) if self.betas is None else self.betas
            fit = beta_scan(grid, betas, self.grid_size)[1]
        else:
            fit = fit_abc(grid, float(self.beta), self.grid_size)
        self.grid_ = grid
        self.a_, self.b_, self.c_ = fit.coefficients
        self.beta_ = fit.beta
        self.residual_ = fit.residual
        self.n_features_in_ = 1
        return self

    def predict(self, X):
        """Variance implied by the fitted form, on means inside the training range."""
        check_is_fitted(self, "residual_")
        m = _as_observations(X)
        th, kk, _ = self.grid_.quantities(m)
        return (1.0 + self.beta_ * m) ** 3 * np.exp(self.a_ * th + self.b_ * kk + self.c_)


__all__ = ["BetaConjugatePosterior", "ExponentialVarianceForm"]
