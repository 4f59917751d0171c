"""Standard and generalized conjugate priors.

Four kinds are supported. With ``k`` the cumulant of the family,
``psi`` its inverse mean map and ``beta`` the T_beta parameter:

=====================  ===========================================================
kind                   unnormalized log density
=====================  ===========================================================
STANDARD_NATURAL       ``t m0 theta - t k(theta)``                on Theta
STANDARD_MEAN          ``t m0 psi(m) - t k(psi(m))``              on the means
GENERALIZED_NATURAL    ``log(1 + beta k'(theta)) + t m0 theta - t k(theta)``
GENERALIZED_MEAN       ``-2 log(1 + beta m) + t m0 psi(m) - t k(psi(m))``
=====================  ===========================================================

Generalized kinds live on ``{1 + beta k'(theta) > 0}`` and ``{1 + beta m > 0}``
respectively. Normalizing constants always come from quadrature. Natural
kinds are integrated in the chart coordinate of the family (see
:mod:`cubic_nef.families`) so no cumulant inversion happens inside the
integrand.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import PchipInterpolator

from .exceptions import InvalidParameter, NonConvergence, NonFinite, NonIntegrable, OutOfDomain
from .families import ChartPoint, CumulantModel, chart_at_mean
from .numerics import Interval, Tolerance, integrate, rng_stream
from .tbeta import chart_beta_set, chart_of_theta, m_beta_set, theta_beta_set

QUAD_TOL = Tolerance(abs_tol=1e-15, rel_tol=1e-12, max_subdivisions=4000)
CDF_GRID = 2048


class PriorKind(enum.Enum):
    STANDARD_NATURAL = "standard-natural"
    STANDARD_MEAN = "standard-mean"
    GENERALIZED_NATURAL = "generalized-natural"
    GENERALIZED_MEAN = "generalized-mean"

    @property
    def is_natural(self):
        return self in (PriorKind.STANDARD_NATURAL, PriorKind.GENERALIZED_NATURAL)

    @property
    def is_standard(self):
        return self in (PriorKind.STANDARD_NATURAL, PriorKind.STANDARD_MEAN)


@dataclass(frozen=True)
class HyperParams:
    t: float
    m0: float
    beta: float = 0.0

    def __post_init__(self):
        for name in ("t", "m0", "beta"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise InvalidParameter(f"{name} must be finite, got {v}")
            object.__setattr__(self, name, v)
        if not self.t > 0:
            raise InvalidParameter(f"hyperparameter t must satisfy t > 0, got t={self.t}")

    def check(self, model: CumulantModel):
        """Raise unless ``m0`` is an admissible mean for ``model`` at this beta."""
        mb = m_beta_set(model, self.beta)
        if not mb or not mb.contains(self.m0):
            where = mb.describe() if mb else "empty"
            raise InvalidParameter(
                f"m0={self.m0} must lie in {{m in means : 1 + beta m > 0}} = {where} for {model.name}"
            )
        return self


def _check_kind(kind: PriorKind, hp: HyperParams):
    if kind.is_standard and hp.beta != 0:
        raise InvalidParameter(f"{kind.value} priors require beta = 0")


def _log1p_beta(beta, x):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.log(1.0 + beta * x)


def _log_weight_from_chart(kind, hp, cp: ChartPoint, m=None):
    """Unnormalized log density in point coordinates, from chart values."""
    t, m0, beta = hp.t, hp.m0, hp.beta
    with np.errstate(invalid="ignore", over="ignore"):
        core = t * m0 * cp.theta - t * cp.k
        if kind.is_natural:
            out = core + (_log1p_beta(beta, cp.k1) if beta != 0 else 0.0)
        else:
            out = core - (2.0 * _log1p_beta(beta, m) if beta != 0 else 0.0)
    # overflowed chart values only occur at ends where admissible priors vanish
    blown = ~(np.isfinite(cp.theta) & np.isfinite(cp.k))
    return np.where(blown, -np.inf, out)


def log_unnormalized(kind: PriorKind, hp: HyperParams, model: CumulantModel, point):
    """Unnormalized log density at ``point`` (theta for natural kinds, m for mean kinds)."""
    _check_kind(kind, hp)
    x = np.asarray(point, dtype=float)
    if kind.is_natural:
        dom = theta_beta_set(model, hp.beta)
        if not np.all(dom.contains(x)):
            raise OutOfDomain(f"theta {point!r} outside {dom.describe()}")
        cp = model.get_chart().evaluate(chart_of_theta(model, x))
        out = _log_weight_from_chart(kind, hp, cp)
    else:
        dom = m_beta_set(model, hp.beta)
        if not np.all(dom.contains(x)):
            raise OutOfDomain(f"m {point!r} outside {dom.describe()}")
        out = _log_weight_from_chart(kind, hp, chart_at_mean(model, x), x)
    return float(out) if np.ndim(out) == 0 else np.asarray(out, dtype=float)


@dataclass(frozen=True)
class NormalizedPrior:
    """A prior together with its quadrature normalizer.

    Attributes
    ----------
    domain : Interval
        Support in point coordinates (theta or m).
    z_domain : Interval
        Integration coordinate range (chart coordinate or m).
    center, scale : float
        Location and spread hints in integration coordinates.
    """

    kind: PriorKind
    hp: HyperParams
    model: CumulantModel
    log_normalizer: float
    domain: Interval
    z_domain: Interval
    center: float
    scale: float
    shift: float
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    # integration-coordinate helpers -------------------------------------

    def chart_point(self, z):
        z = np.asarray(z, dtype=float)
        if self.kind.is_natural:
            return self.model.get_chart().evaluate(z)
        return chart_at_mean(self.model, z)

    def log_weight_z(self, z):
        """Unnormalized log density in integration coordinates (includes the chart Jacobian)."""
        z = np.asarray(z, dtype=float)
        inside = self.z_domain.contains(z)
        if not np.all(inside):
            out = np.full(z.shape, -np.inf)
            if np.any(inside):
                out[inside] = self.log_weight_z(z[inside])
            return out
        cp = self.chart_point(z)
        if self.kind.is_natural:
            base = _log_weight_from_chart(self.kind, self.hp, cp)
            with np.errstate(divide="ignore", invalid="ignore"):
                return np.where(np.isneginf(base), -np.inf, base + np.log(cp.jac))
        return _log_weight_from_chart(self.kind, self.hp, cp, z)

    def point_of_z(self, z):
        z = np.asarray(z, dtype=float)
        return self.chart_point(z).theta if self.kind.is_natural else z

    def density_z(self, z):
        with np.errstate(over="ignore", invalid="ignore"):
            return np.exp(self.log_weight_z(z) - self.log_normalizer)

    # public API ----------------------------------------------------------

    def logpdf(self, point):
        """Normalized log density; ``-inf`` outside the support."""
        x = np.asarray(point, dtype=float)
        inside = self.domain.contains(x)
        out = np.full(x.shape, -np.inf)
        if np.any(inside):
            vals = log_unnormalized(self.kind, self.hp, self.model, x[inside] if x.ndim else x)
            out[inside] = np.asarray(vals) - self.log_normalizer
        return float(out) if out.ndim == 0 else out

    def pdf(self, point):
        return np.exp(self.logpdf(point))

    def expectation(self, g: Optional[Callable] = None, *, chart_fn: Optional[Callable] = None, tol=None):
        """Expectation of ``g(point)`` or of ``chart_fn(ChartPoint)`` under the prior."""
        if (g is None) == (chart_fn is None):
            raise ValueError("pass exactly one of g or chart_fn")
        tol = tol or QUAD_TOL
        def f(z):
            dens = self.density_z(z)
            with np.errstate(all="ignore"):
                if chart_fn is not None:
                    vals = chart_fn(self.chart_point(z))
                else:
                    vals = np.asarray(g(self.point_of_z(z)), dtype=float)
                # the functional may overflow where the density has underflowed
                return np.where(dens == 0, 0.0, vals * dens)

        res = integrate(f, self.z_domain, tol, center=self.center, scale=self.scale)
        return res.value

    def total_mass(self):
        return self.expectation(chart_fn=lambda cp: np.ones_like(cp.theta))

    def cdf_z(self, z):
        """Exact CDF in integration coordinates by quadrature from the lower end."""
        z = float(z)
        if z <= self.z_domain.lo:
            return 0.0
        if z >= self.z_domain.hi:
            return 1.0
        lower = Interval(self.z_domain.lo, z)
        res = integrate(self.density_z, lower, QUAD_TOL, center=self.center, scale=self.scale)
        return min(1.0, max(0.0, res.value))

    def cdf(self, point):
        """CDF in point coordinates (theta or m)."""
        if self.kind.is_natural:
            x = float(point)
            if x <= self.domain.lo:
                return 0.0
            if x >= self.domain.hi:
                return 1.0
            return self.cdf_z(float(chart_of_theta(self.model, x)))
        return self.cdf_z(point)

    def cdf_sorted(self, points):
        """Exact CDF at increasing points, by quadrature over consecutive gaps."""
        pts = np.asarray(points, dtype=float)
        z = pts if not self.kind.is_natural else chart_of_theta(self.model, pts)
        if np.any(np.diff(z) < 0):
            raise ValueError("points must be sorted")
        lo = self.z_domain.lo
        gap_tol = Tolerance(abs_tol=1e-14, rel_tol=1e-10, max_subdivisions=400)
        out = np.empty(z.shape)
        acc, prev = 0.0, lo
        first = True
        for i, zi in enumerate(z):
            if zi > prev:
                dom = Interval(prev, zi)
                kw = dict(center=self.center, scale=self.scale) if first else {}
                acc += integrate(self.density_z, dom, gap_tol, **kw).value
                prev = zi
                first = False
            out[i] = acc
        return np.clip(out, 0.0, 1.0)

    @cached_property
    def cdf_table(self):
        return _build_cdf_table(self)

    @cached_property
    def _inverse_cdf(self):
        z_grid, cdf = self.cdf_table
        # increments below 1e-15 carry no usable probability and break the slopes
        keep = [0]
        for i in range(1, cdf.size):
            if cdf[i] - cdf[keep[-1]] > 1e-15:
                keep.append(i)
        keep = np.asarray(keep)
        c, z = cdf[keep], z_grid[keep]
        return PchipInterpolator(c, z, extrapolate=False), c[0], c[-1]

    def quantile(self, q):
        """Quantiles in point coordinates from the tabulated CDF."""
        inv, lo, hi = self._inverse_cdf
        z = inv(np.clip(np.asarray(q, dtype=float), lo, hi))
        return np.asarray(self.point_of_z(z), dtype=float)

    def sample(self, n: int, seed: int) -> np.ndarray:
        """Inverse-CDF draws in point coordinates; deterministic for a given seed."""
        u = rng_stream(seed).uniform(int(n))
        return self.quantile(u)


def location_hints(kind: PriorKind, hp: HyperParams, model: CumulantModel, z_dom: Interval):
    """Location and scale hints in integration coordinates."""
    cp = chart_at_mean(model, hp.m0)
    v = float(cp.k2)
    if kind.is_natural:
        center = float(model.get_chart().u_of_mean(hp.m0))
        scale = 1.0 / math.sqrt(hp.t * v) / max(float(cp.jac), 1e-300)
    else:
        center = hp.m0
        scale = math.sqrt(v / hp.t)
    if not z_dom.contains(center):
        center = z_dom.midpoint()
    if not (math.isfinite(scale) and scale > 0):
        scale = 1.0
    for end in (z_dom.lo, z_dom.hi):
        if math.isfinite(end):
            scale = min(scale, max(abs(center - end), 1e-300))
    return center, scale


def normalize(kind: PriorKind, hp: HyperParams, model: CumulantModel) -> NormalizedPrior:
    """Attach a quadrature normalizer to the prior ``(kind, hp)`` on ``model``."""
    _check_kind(kind, hp)
    hp.check(model)
    if kind.is_natural:
        z_dom = chart_beta_set(model, hp.beta)
        dom = theta_beta_set(model, hp.beta)
    else:
        z_dom = dom = m_beta_set(model, hp.beta)
    center, scale = location_hints(kind, hp, model, z_dom)

    proto = NormalizedPrior(kind, hp, model, 0.0, dom, z_dom, center, scale, 0.0)
    probes = center + scale * np.array([-8, -4, -2, -1, -0.5, 0, 0.5, 1, 2, 4, 8], dtype=float)
    probes = probes[z_dom.contains(probes)]
    with np.errstate(all="ignore"):
        lw = proto.log_weight_z(probes)
    lw = lw[np.isfinite(lw)]
    if lw.size == 0:
        raise NonIntegrable(f"prior density vanishes near its center for {model.name}")
    shift = float(np.max(lw))

    def f(z):
        with np.errstate(over="ignore", invalid="ignore"):
            return np.exp(proto.log_weight_z(z) - shift)

    try:
        res = integrate(f, z_dom, QUAD_TOL, center=center, scale=scale)
    except (NonConvergence, NonFinite) as exc:
        raise NonIntegrable(f"normalizing integral failed for {kind.value} on {model.name}: {exc}") from exc
    if not (math.isfinite(res.value) and res.value > 0):
        raise NonIntegrable(f"normalizing integral is {res.value!r}")
    log_c = shift + math.log(res.value)
    return NormalizedPrior(kind, hp, model, log_c, dom, z_dom, center, scale, shift)


def make_prior(model: CumulantModel, t: float, m0: float, beta: float = 0.0, natural: bool = True):
    """Convenience constructor choosing the standard kind when ``beta == 0``."""
    hp = HyperParams(t, m0, beta)
    if natural:
        kind = PriorKind.STANDARD_NATURAL if beta == 0 else PriorKind.GENERALIZED_NATURAL
    else:
        kind = PriorKind.STANDARD_MEAN if beta == 0 else PriorKind.GENERALIZED_MEAN
    return normalize(kind, hp, model)


# ---------------------------------------------------------------------------
# Sampling support
# ---------------------------------------------------------------------------


def _side_grid(center, end, scale, n):
    """Grid from ``center`` toward the finite ``end``, clustered at both."""
    dist = abs(end - center)
    sign = 1.0 if end > center else -1.0
    near_c = np.geomspace(min(1e-3 * scale, 0.5 * dist), dist, n // 2, endpoint=False)
    near_e = dist - np.geomspace(1e-14 * dist, 0.5 * dist, n // 2)
    d = np.concatenate([near_c, near_e])
    d = d[(d > 0) & (d < dist)]
    return center + sign * d


def _tail_reach(prior: NormalizedPrior, direction: float):
    """Distance from the center beyond which the density is negligible."""
    s = prior.scale
    top = prior.shift
    reach = s
    for _ in range(200):
        z = prior.center + direction * reach
        if not prior.z_domain.contains(z):
            break
        with np.errstate(all="ignore"):
            lw = float(prior.log_weight_z(z))
        if not math.isfinite(lw) or lw < top - 60.0:
            return reach
        reach *= 1.5
    return reach


def _build_cdf_table(prior: NormalizedPrior):
    c, s = prior.center, prior.scale
    lo, hi = prior.z_domain.lo, prior.z_domain.hi
    n_side = CDF_GRID // 2
    parts = [np.array([c])]
    for end, direction in ((lo, -1.0), (hi, 1.0)):
        if math.isfinite(end):
            parts.append(_side_grid(c, end, s, n_side))
        else:
            reach = _tail_reach(prior, direction)
            parts.append(c + direction * np.geomspace(1e-3 * s, reach, n_side))
    z = np.unique(np.concatenate(parts))
    z = z[prior.z_domain.contains(z)]

    def f(x):
        # nodes next to an open end can round onto it
        x = np.asarray(x, dtype=float)
        inside = prior.z_domain.contains(x)
        out = np.zeros(x.shape)
        with np.errstate(over="ignore", invalid="ignore"):
            out[inside] = np.exp(prior.log_weight_z(x[inside]) - prior.shift)
        return out

    cell_tol = Tolerance(abs_tol=1e-18, rel_tol=1e-10, max_subdivisions=200)
    head = integrate(f, Interval(lo, z[0]), cell_tol).value
    cells = np.array([integrate(f, Interval(a, b), cell_tol).value for a, b in zip(z[:-1], z[1:])])
    cum = head + np.concatenate([[0.0], np.cumsum(cells)])
    total = math.exp(prior.log_normalizer - prior.shift)
    cdf = cum / total
    if math.isfinite(lo):
        z, cdf = np.concatenate([[lo], z]), np.concatenate([[0.0], cdf])
    if math.isfinite(hi):
        z, cdf = np.concatenate([z, [hi]]), np.concatenate([cdf, [1.0]])
    keep = np.concatenate([[True], np.diff(cdf) > 0])
    return z[keep], cdf[keep]


# ---------------------------------------------------------------------------
# Module-level operations
# ---------------------------------------------------------------------------


def sample(prior: NormalizedPrior, n: int, seed: int) -> np.ndarray:
    return prior.sample(n, seed)


def prior_expectation(prior: NormalizedPrior, g: Optional[Callable] = None, *, chart_fn=None) -> float:
    """Expectation of ``g`` (a function of theta or m) under ``prior``."""
    return prior.expectation(g, chart_fn=chart_fn)


def pushforward_kprime_logdensity(prior: NormalizedPrior, m):
    """Log density of the image of a natural-parameter prior under ``theta -> k'(theta)``."""
    if not prior.kind.is_natural:
        raise InvalidParameter("pushforward is defined for natural-parameter priors")
    m_arr = np.asarray(m, dtype=float)
    dom = m_beta_set(prior.model, prior.hp.beta)
    if not np.all(dom.contains(m_arr)):
        raise OutOfDomain(f"m {m!r} outside {dom.describe()}")
    cp = chart_at_mean(prior.model, m_arr)
    hp = prior.hp
    out = (
        -prior.log_normalizer
        + _log1p_beta(hp.beta, m_arr)
        - np.log(cp.k2)
        + hp.t * hp.m0 * cp.theta
        - hp.t * cp.k
    )
    return float(out) if np.ndim(out) == 0 else out


def mean_value(cp: ChartPoint):
    return cp.k1


def ratio_functional(beta: float) -> Callable:
    """Chart functional ``k'/(1 + beta k')``."""
    return lambda cp: cp.k1 / (1.0 + beta * cp.k1)


__all__ = [
    "PriorKind",
    "HyperParams",
    "NormalizedPrior",
    "log_unnormalized",
    "normalize",
    "make_prior",
    "sample",
    "prior_expectation",
    "pushforward_kprime_logdensity",
    "mean_value",
    "ratio_functional",
    "QUAD_TOL",
]
