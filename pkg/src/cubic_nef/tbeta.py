"""The T_beta action on variance functions and cumulants.

For a family F(mu) with variance function V, the image ``T_beta(F(mu))`` is
the family F(nu) with variance ``(1 + beta m)^3 V(m / (1 + beta m))``. On the
cumulant side the two families are linked by the change of parameter
``theta = lambda - beta k_mu(lambda)`` and ``k_nu(theta) = k_mu(lambda)``,
valid where ``1 - beta k_mu'(lambda) > 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .exceptions import (
    OutOfDomain,
    OutsideJorgensen,
    TransportUndefined,
    UnknownBaseDensity,
)
from .families import (
    Chart,
    ChartPoint,
    CumulantModel,
    JorgensenSet,
    make_chart_solver,
    psi,
)
from .numerics import EMPTY, Interval

INF = math.inf


@dataclass(frozen=True)
class TBetaContext:
    """A family together with beta and its restricted domains."""

    beta: float
    family: CumulantModel
    m_beta: Interval
    theta_beta: Interval


def m_beta_set(model: CumulantModel, beta: float):
    """Means ``m`` of the family with ``1 + beta m > 0``; ``EMPTY`` when there are none."""
    beta = float(beta)
    if beta == 0:
        return model.means
    half = Interval(-1.0 / beta, INF) if beta > 0 else Interval(-INF, -1.0 / beta)
    return model.means.intersect(half)


def beta_in_B(model: CumulantModel, beta: float) -> bool:
    return bool(m_beta_set(model, beta))


def theta_beta_set(model: CumulantModel, beta: float):
    """Natural parameters whose mean lies in ``m_beta_set(model, beta)``."""
    mb = m_beta_set(model, beta)
    if not mb:
        return EMPTY
    dom = model.theta_domain
    lo = dom.lo if mb.lo == model.means.lo else psi(model, mb.lo)
    hi = dom.hi if mb.hi == model.means.hi else psi(model, mb.hi)
    return Interval(lo, hi)


def chart_beta_set(model: CumulantModel, beta: float):
    """Chart coordinates corresponding to ``theta_beta_set``."""
    mb = m_beta_set(model, beta)
    if not mb:
        return EMPTY
    chart = model.get_chart()
    lo = chart.domain.lo if mb.lo == model.means.lo else float(chart.u_of_mean(mb.lo))
    hi = chart.domain.hi if mb.hi == model.means.hi else float(chart.u_of_mean(mb.hi))
    return Interval(lo, hi)


def context(model: CumulantModel, beta: float) -> TBetaContext:
    mb = m_beta_set(model, beta)
    if not mb:
        raise OutOfDomain(f"beta={beta} leaves no admissible mean for {model.name}")
    return TBetaContext(float(beta), model, mb, theta_beta_set(model, beta))


def lambda_to_theta(mu_model: CumulantModel, beta: float, lam):
    lam_arr = np.asarray(lam, dtype=float)
    if not np.all(mu_model.theta_domain.contains(lam_arr)):
        raise OutOfDomain(f"lambda {lam!r} outside {mu_model.theta_domain.describe()}")
    out = lam_arr - beta * mu_model.k(lam_arr)
    return float(out) if np.ndim(out) == 0 else out


def theta_to_lambda(nu_model: CumulantModel, beta: float, theta):
    th = np.asarray(theta, dtype=float)
    if not np.all(nu_model.theta_domain.contains(th)):
        raise OutOfDomain(f"theta {theta!r} outside {nu_model.theta_domain.describe()}")
    out = th + beta * nu_model.k(th)
    return float(out) if np.ndim(out) == 0 else out


def mean_transport(m, beta: float):
    """``m -> m / (1 + beta m)``."""
    m_arr = np.asarray(m, dtype=float)
    d = 1.0 + beta * m_arr
    if np.any(d <= 0):
        raise OutOfDomain(f"1 + beta*m must be positive (beta={beta}, m={m!r})")
    out = m_arr / d
    return float(out) if np.ndim(out) == 0 else out


def mean_transport_inverse(m, beta: float):
    """``m' -> m' / (1 - beta m')``, the inverse of :func:`mean_transport`."""
    m_arr = np.asarray(m, dtype=float)
    d = 1.0 - beta * m_arr
    if np.any(d <= 0):
        raise OutOfDomain(f"1 - beta*m' must be positive (beta={beta}, m'={m!r})")
    out = m_arr / d
    return float(out) if np.ndim(out) == 0 else out


def variance_tbeta(base_variance: Callable, beta: float, m, base_domain: Optional[Interval] = None):
    """``(1 + beta m)^3 V_base(m / (1 + beta m))``."""
    m_arr = np.asarray(m, dtype=float)
    if beta == 0:
        inner = m_arr
        scale = 1.0
    else:
        inner = mean_transport(m_arr, beta)
        scale = (1.0 + beta * m_arr) ** 3
    if base_domain is not None and not np.all(base_domain.contains(inner)):
        raise OutOfDomain(f"m/(1+beta m) = {inner!r} outside {base_domain.describe()}")
    out = scale * np.asarray(base_variance(inner), dtype=float)
    return float(out) if np.ndim(out) == 0 else out


def tbeta_measure_logdensity(model: CumulantModel, beta: float, x):
    """Log density of the generating measure of ``T_{-beta}`` of the family.

    Equals ``-log(1 - beta x) + log h(1 - beta x, x)`` where ``h(alpha, .)``
    is the density of the alpha-th convolution power.
    """
    if model.log_h is None:
        raise UnknownBaseDensity(f"{model.name} has no closed-form convolution powers")
    x_arr = np.asarray(x, dtype=float)
    alpha = 1.0 - beta * x_arr
    if not np.all(model.jorgensen.contains(alpha)):
        raise OutsideJorgensen(f"1 - beta*x = {alpha!r} not in {model.jorgensen.describe()}")
    out = -np.log(alpha) + model.log_h(alpha, x_arr)
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# Cumulant transport
# ---------------------------------------------------------------------------


def _inf_combo(a, b, beta):
    """``a - beta*b`` with the conventions of extended arithmetic; NaN if indeterminate."""
    with np.errstate(invalid="ignore"):
        return float(a - beta * b)


def _numeric_limit(fn, domain, side):
    """Limit of the increasing function ``fn`` at one end of ``domain``.

    Probes move geometrically toward the end; probing stops as soon as the
    values stop being monotone, which is where cancellation takes over.
    """
    end = domain.lo if side < 0 else domain.hi
    if math.isinf(end):
        pts = math.copysign(1.0, end) * np.geomspace(1.0, 1e200, 200)
    else:
        inner = domain.hi if side < 0 else domain.lo
        width = min(1.0, abs(inner - end)) if math.isfinite(inner) else 1.0
        pts = end - side * width * np.geomspace(0.5, 1e-15, 60)
    vals = []
    with np.errstate(all="ignore"):
        for p in pts:
            v = float(fn(p))
            if not math.isfinite(v) or (vals and (v - vals[-1]) * side < 0):
                break
            vals.append(v)
    if not vals:
        return math.nan
    last = vals[-1]
    if abs(last) > 1e6 * max(1.0, abs(vals[0])):
        return math.copysign(INF, last)
    return float(last)


def _transported_means(branch: Interval, beta: float) -> Interval:
    def image(x):
        if math.isinf(x):
            return -1.0 / beta
        d = 1.0 - beta * x
        if d == 0:
            return math.copysign(INF, x)
        return x / d

    return Interval(image(branch.lo), image(branch.hi))


def transport_cumulant(base: CumulantModel, beta: float) -> CumulantModel:
    """Cumulant model of ``T_beta(F(base))``.

    The natural parameter ``theta = lambda - beta k(lambda)`` is increasing
    exactly where ``1 - beta k'(lambda) > 0``. Since ``k'`` is increasing this
    set is a single interval, so the branch is unique.
    """
    beta = float(beta)
    if beta == 0:
        return base
    bound = Interval(-INF, 1.0 / beta) if beta > 0 else Interval(1.0 / beta, INF)
    branch = base.means.intersect(bound)
    if not branch:
        raise TransportUndefined(
            f"1 - beta*m > 0 has no solution on the means {base.means.describe()} (beta={beta})"
        )
    c0 = base.get_chart()
    (t_lo0, k_lo0), (t_hi0, k_hi0) = c0.limits

    def evaluate(u):
        cp = c0.evaluate(u)
        d = 1.0 - beta * cp.k1
        return ChartPoint(cp.theta - beta * cp.k, cp.k, cp.k1 / d, cp.k2 / d**3, cp.jac * d)

    if branch.lo == base.means.lo:
        u_lo = c0.domain.lo
        lim_lo = (_inf_combo(t_lo0, k_lo0, beta), k_lo0)
    else:
        u_lo = float(c0.u_of_mean(branch.lo))
        cp = c0.evaluate(u_lo)
        lim_lo = (float(cp.theta - beta * cp.k), float(cp.k))
    if branch.hi == base.means.hi:
        u_hi = c0.domain.hi
        lim_hi = (_inf_combo(t_hi0, k_hi0, beta), k_hi0)
    else:
        u_hi = float(c0.u_of_mean(branch.hi))
        cp = c0.evaluate(u_hi)
        lim_hi = (float(cp.theta - beta * cp.k), float(cp.k))
    u_dom = Interval(u_lo, u_hi)

    def theta_of_u(u):
        return float(evaluate(u).theta)

    if math.isnan(lim_lo[0]):
        lim_lo = (_numeric_limit(theta_of_u, u_dom, -1), lim_lo[1])
    if math.isnan(lim_hi[0]):
        lim_hi = (_numeric_limit(theta_of_u, u_dom, +1), lim_hi[1])

    chart = Chart(
        domain=u_dom,
        evaluate=evaluate,
        u_of_mean=lambda m: c0.u_of_mean(mean_transport(m, beta)),
        limits=(lim_lo, lim_hi),
    )
    theta_dom = Interval(lim_lo[0], lim_hi[0])

    solve_v = make_chart_solver(chart, theta_dom)

    def at(theta):
        return evaluate(solve_v(np.asarray(theta, dtype=float)))

    return CumulantModel(
        name=f"T[{beta!r}]({base.name})",
        theta_domain=theta_dom,
        means=_transported_means(branch, beta),
        k=lambda th: at(th).k,
        k1=lambda th: at(th).k1,
        k2=lambda th: at(th).k2,
        support=None,
        jorgensen=JorgensenSet(),
        log_h=None,
        psi_fn=lambda m: evaluate(chart.u_of_mean(m)).theta,
        chart=chart,
        sampler=None,
        k_limits=(lim_lo[1], lim_hi[1]),
        origin=(base, beta),
        spec=None,
        quadratic_base=base.quadratic_base,
        extra={"solve_chart": solve_v},
    )


def chart_of_theta(model: CumulantModel, theta):
    """Chart coordinate of ``theta`` (the identity for closed-form families)."""
    solver = model.extra.get("solve_chart")
    th = np.asarray(theta, dtype=float)
    return th if solver is None else solver(th)


__all__ = [
    "TBetaContext",
    "m_beta_set",
    "beta_in_B",
    "theta_beta_set",
    "chart_beta_set",
    "context",
    "lambda_to_theta",
    "theta_to_lambda",
    "mean_transport",
    "mean_transport_inverse",
    "variance_tbeta",
    "tbeta_measure_logdensity",
    "transport_cumulant",
    "chart_of_theta",
]
