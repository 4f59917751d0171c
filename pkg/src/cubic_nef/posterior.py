"""Conjugate updates and posterior functionals for generalized priors.

Observations follow ``P(beta, theta, nu)(dx) = exp(lambda x - k(theta)) T_{-beta}(nu)(dx)``
with ``lambda = theta + beta k(theta)``. Under the prior
``pi^beta_{t, m0}`` the posterior after ``n`` observations with mean ``xbar``
is again of that form with ``t' = t + n - beta n xbar`` and
``m0' = (t m0 + n xbar) / t'``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.special import ndtr, ndtri

from .exceptions import InvalidData, NonConvergence, NonFinite, OutOfDomain
from .families import CumulantModel, ExampleIG, sample_family
from .numerics import integrate, rng_stream
from .priors import (
    QUAD_TOL,
    HyperParams,
    NormalizedPrior,
    PriorKind,
    location_hints,
    normalize,
    ratio_functional,
)
from .tbeta import chart_of_theta, theta_beta_set

MAX_REJECTION_ROUNDS = 64


@dataclass(frozen=True)
class DataBatch:
    """A batch of observations.

    ``observations`` may be ``None`` for a batch described only by its
    sufficient statistic ``(n, sample_mean)``; Bayes computations depend on
    the data only through that pair.
    """

    observations: Optional[tuple]
    n: int
    sample_mean: float

    @classmethod
    def from_values(cls, values: Sequence[float]):
        obs = tuple(float(v) for v in values)
        if not all(math.isfinite(v) for v in obs):
            bad = next(i for i, v in enumerate(obs) if not math.isfinite(v))
            raise InvalidData(f"observation {bad} is not finite", index=bad)
        if not obs:
            return cls((), 0, math.nan)
        return cls(obs, len(obs), math.fsum(obs) / len(obs))

    @classmethod
    def from_summary(cls, n: int, sample_mean: float):
        n = int(n)
        if n < 0:
            raise InvalidData("batch size must be non-negative")
        return cls(None, n, float(sample_mean) if n else math.nan)

    @property
    def total(self):
        return 0.0 if self.n == 0 else self.n * self.sample_mean

    def __add__(self, other: "DataBatch") -> "DataBatch":
        if self.n == 0:
            return other
        if other.n == 0:
            return self
        n = self.n + other.n
        obs = None
        if self.observations is not None and other.observations is not None:
            obs = self.observations + other.observations
        return DataBatch(obs, n, (self.total + other.total) / n)


@dataclass(frozen=True)
class PosteriorState:
    hp: HyperParams
    model: CumulantModel

    def __post_init__(self):
        self.hp.check(self.model)

    @property
    def kind(self):
        return PriorKind.GENERALIZED_NATURAL if self.hp.beta != 0 else PriorKind.STANDARD_NATURAL

    def prior(self) -> NormalizedPrior:
        return normalize(self.kind, self.hp, self.model)


def observation_valid(model: CumulantModel, beta: float, x: float) -> bool:
    """Whether ``x`` can be observed under ``P(beta, theta, model)``."""
    alpha = 1.0 - beta * x
    if not model.jorgensen.contains(alpha):
        return False
    if model.log_h is not None:
        with np.errstate(all="ignore"):
            return bool(np.isfinite(model.log_h(alpha, x)))
    if model.origin is not None and model.origin[1] == beta and model.origin[0].support is not None:
        return bool(model.origin[0].support.contains(x))
    if beta == 0 and model.support is not None:
        return bool(model.support.contains(x))
    return True


def validate_batch(model: CumulantModel, beta: float, data: DataBatch):
    if data.observations is None:
        return
    for i, x in enumerate(data.observations):
        if not observation_valid(model, beta, x):
            raise InvalidData(
                f"observation {i} (x={x!r}) is outside the support: 1 - beta*x = {1 - beta * x!r}",
                index=i,
            )


def update(state: PosteriorState, data: DataBatch) -> PosteriorState:
    """Conjugate update ``(t, m0) -> (t + n - beta n xbar, (t m0 + n xbar)/(t + n - beta n xbar))``."""
    if data.n == 0:
        return state
    validate_batch(state.model, state.hp.beta, data)
    t, m0, beta = state.hp.t, state.hp.m0, state.hp.beta
    t_new = t + data.n - beta * data.total
    if not t_new > 0:
        raise InvalidData(f"updated t = {t_new!r} is not positive")
    m_new = (t * m0 + data.total) / t_new
    return PosteriorState(HyperParams(t_new, m_new, beta), state.model)


@dataclass(frozen=True)
class BayesPosterior:
    """Posterior of theta by Bayes' rule, normalized by its own quadrature."""

    state: PosteriorState
    data: DataBatch
    log_normalizer: float = field(init=False)
    _prior: NormalizedPrior = field(init=False, repr=False)

    def __post_init__(self):
        validate_batch(self.state.model, self.state.hp.beta, self.data)
        prior = self.state.prior()
        object.__setattr__(self, "_prior", prior)
        # integrate around the prior's hint, shifted by the likelihood peak
        z_dom = prior.z_domain
        post_hint = self._hint()
        probes = post_hint[0] + post_hint[1] * np.linspace(-4, 4, 17)
        probes = probes[z_dom.contains(probes)]
        with np.errstate(all="ignore"):
            lw = self._log_weight_z(probes)
        lw = lw[np.isfinite(lw)]
        shift = float(np.max(lw)) if lw.size else 0.0

        def f(z):
            with np.errstate(over="ignore", invalid="ignore"):
                return np.exp(self._log_weight_z(z) - shift)

        try:
            res = integrate(f, z_dom, QUAD_TOL, center=post_hint[0], scale=post_hint[1])
        except (NonFinite, NonConvergence) as exc:
            raise NonConvergence(f"posterior normalization failed: {exc}") from exc
        object.__setattr__(self, "log_normalizer", shift + math.log(res.value))
        object.__setattr__(self, "_shift", shift)
        object.__setattr__(self, "_hint_cs", post_hint)

    def _hint(self):
        prior = self._prior
        if self.data.n == 0:
            return prior.center, prior.scale
        try:
            hp = update(self.state, self.data).hp
            return location_hints(prior.kind, hp, self.state.model, prior.z_domain)
        except (InvalidData, OutOfDomain, ValueError):
            return prior.center, prior.scale

    def _loglik_chart(self, cp):
        if self.data.n == 0:
            return np.zeros_like(cp.theta)
        beta = self.state.hp.beta
        lam = cp.theta + beta * cp.k
        if self.data.observations is not None:
            xs = self.data.observations
            with np.errstate(invalid="ignore", over="ignore"):
                total = np.zeros_like(cp.theta)
                for x in xs:
                    total = total + (lam * x - cp.k)
            return total
        with np.errstate(invalid="ignore", over="ignore"):
            return self.data.n * (lam * self.data.sample_mean - cp.k)

    def _log_weight_z(self, z):
        prior = self._prior
        cp = prior.chart_point(z)
        base = prior.log_weight_z(z)
        with np.errstate(invalid="ignore"):
            out = base + self._loglik_chart(cp)
        return np.where(np.isneginf(base), -np.inf, out)

    def logpdf(self, theta):
        """Normalized log density at theta; ``-inf`` outside the admissible set."""
        th = np.asarray(theta, dtype=float)
        dom = theta_beta_set(self.state.model, self.state.hp.beta)
        inside = dom.contains(th)
        out = np.full(th.shape, -np.inf)
        if np.any(inside):
            sel = th[inside] if th.ndim else th
            z = chart_of_theta(self.state.model, sel)
            prior = self._prior
            cp = prior.chart_point(z)
            with np.errstate(divide="ignore", invalid="ignore"):
                lw = prior.log_weight_z(z) - np.log(cp.jac) + self._loglik_chart(cp)
            out[inside] = lw - self.log_normalizer
        return float(out) if out.ndim == 0 else out

    def density_z(self, z):
        with np.errstate(over="ignore", invalid="ignore"):
            return np.exp(self._log_weight_z(z) - self.log_normalizer)

    def expectation(self, chart_fn):
        def f(z):
            dens = self.density_z(z)
            with np.errstate(all="ignore"):
                vals = chart_fn(self._prior.chart_point(z))
                return np.where(dens == 0, 0.0, vals * dens)

        c, s = self._hint_cs
        return integrate(f, self._prior.z_domain, QUAD_TOL, center=c, scale=s).value

    def total_mass(self):
        return self.expectation(lambda cp: np.ones_like(cp.theta))


def posterior_logdensity(state: PosteriorState, data: DataBatch, theta):
    return BayesPosterior(state, data).logpdf(theta)


def posterior_functional(state: PosteriorState, data: DataBatch) -> float:
    """Posterior expectation of ``k'(theta) / (1 + beta k'(theta))`` by quadrature."""
    return BayesPosterior(state, data).expectation(ratio_functional(state.hp.beta))


def closed_form_functional(state: PosteriorState, data: DataBatch) -> float:
    """``(t m0 + n xbar) / (t (1 + beta m0) + n)``."""
    t, m0, beta = state.hp.t, state.hp.m0, state.hp.beta
    return (t * m0 + data.total) / (t * (1.0 + beta * m0) + data.n)


def sample_observations(model: CumulantModel, beta: float, theta: float, n: int, seed: int) -> np.ndarray:
    """Draw ``n`` observations from ``P(beta, theta, model)`` with a seeded stream."""
    rng = rng_stream(seed)
    if beta == 0:
        return sample_family(model, theta, n, rng)
    if model.origin is not None and model.origin[1] == beta:
        # base law at lambda, restricted to 1 - beta x in the Jorgensen set
        base = model.origin[0]
        lam = float(chart_of_theta(model, theta))
        n = int(n)
        kept = np.empty(0)
        for _ in range(MAX_REJECTION_ROUNDS):
            if kept.size >= n:
                break
            draw = sample_family(base, lam, max(2 * (n - kept.size), 16), rng)
            kept = np.concatenate([kept, draw[model.jorgensen.contains(1.0 - beta * draw)]])
        if kept.size < n:
            raise NotImplementedError(f"rejection sampler for {model.name} accepts too rarely")
        return kept[:n]
    if isinstance(model.spec, ExampleIG) and beta == 1.0:
        # normal with mean 1 + lambda and unit variance, restricted to x < 1
        lam = float(theta + model.k(theta))
        u = rng.uniform(int(n))
        return 1.0 + lam + ndtri(u * ndtr(-lam))
    raise NotImplementedError(f"no observation sampler for {model.name} at beta={beta}")


__all__ = [
    "DataBatch",
    "PosteriorState",
    "BayesPosterior",
    "observation_valid",
    "validate_batch",
    "update",
    "posterior_logdensity",
    "posterior_functional",
    "closed_form_functional",
    "sample_observations",
]
