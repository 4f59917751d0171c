"""Cumulant models for real natural exponential families.

A :class:`CumulantModel` bundles the cumulant function ``k`` of a generating
measure with its first two derivatives, the natural-parameter domain, the
domain of the means, and (when known) the log-density ``log h(alpha, x)`` of
the convolution powers of the generating measure.

Every model also carries a :class:`Chart`: a coordinate ``u`` in which the
natural parameter, the cumulant and its derivatives are all available in
closed form. For the catalog families ``u`` is the natural parameter itself;
for families obtained through the T_beta action ``u`` is the natural
parameter of the underlying quadratic base, which keeps every quantity
explicit and lets quadrature avoid inverting ``theta -> lambda`` numerically.

The six quadratic bases use unit-scale cumulants::

    gaussian            k = l^2/2                 Theta = R
    poisson             k = exp(l)                Theta = R
    gamma(p)            k = -p log(-l)            Theta = (-inf, 0)
    binomial(N)         k = N log(1 + exp(l))     Theta = R
    negative-binomial(r) k = -r log(1 - exp(l))   Theta = (-inf, 0)
    hyperbolic          k = -log cos(l)           Theta = (-pi/2, pi/2)

``example-ig`` is the shifted inverse-Gaussian family with
``k(theta) = -theta - sqrt(-2 theta)`` on ``theta < 0``, whose variance
function is ``(1 + m)^3``.
"""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple, Optional, Union

import numpy as np
from scipy import special, stats

from .exceptions import (
    InvalidParameter,
    NotInJorgensenSet,
    OutOfDomain,
    UnknownBaseDensity,
)
from .numerics import EMPTY, Interval, RngStream, Tolerance, find_root

INF = math.inf
LOG_2PI = math.log(2.0 * math.pi)


# ---------------------------------------------------------------------------
# Descriptors
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SupportDescriptor:
    """Support of a generating measure and the reference measure sigma(dx).

    ``base_measure`` is ``"lebesgue"`` (support is ``interval``) or
    ``"counting"`` (support is the lattice ``offset + step * j`` for
    ``j = 0, 1, ..., count - 1``; ``count=None`` means infinite).
    """

    base_measure: str
    interval: Optional[Interval] = None
    offset: float = 0.0
    step: float = 1.0
    count: Optional[int] = None

    def __post_init__(self):
        if self.base_measure not in ("lebesgue", "counting"):
            raise ValueError("base_measure must be 'lebesgue' or 'counting'")
        if self.base_measure == "lebesgue" and self.interval is None:
            raise ValueError("lebesgue support needs an interval")
        if self.base_measure == "counting":
            if not self.step > 0:
                raise ValueError("lattice step must be positive")
            if self.count is not None and self.count < 1:
                raise ValueError("lattice must be nonempty")

    @property
    def is_discrete(self):
        return self.base_measure == "counting"

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        if not self.is_discrete:
            return self.interval.contains(x)
        j = (x - self.offset) / self.step
        ok = (np.abs(j - np.round(j)) < 1e-9) & (np.round(j) >= 0)
        if self.count is not None:
            ok &= np.round(j) < self.count
        return bool(ok) if ok.ndim == 0 else ok

    def lattice(self, limit=None):
        """Lattice points, truncated to ``limit`` points when infinite."""
        n = self.count if self.count is not None else limit
        if n is None:
            raise ValueError("infinite lattice needs a limit")
        return self.offset + self.step * np.arange(n, dtype=float)

    def hull(self):
        if not self.is_discrete:
            return self.interval
        hi = INF if self.count is None else self.offset + self.step * (self.count - 1)
        return Interval(self.offset, hi, lo_closed=True, hi_closed=math.isfinite(hi))


@dataclass(frozen=True)
class JorgensenSet:
    """Admissible convolution powers: ``(0, inf)`` or the lattice ``{s, 2s, ...}``."""

    step: Optional[float] = None

    def contains(self, alpha):
        a = np.asarray(alpha, dtype=float)
        if self.step is None:
            out = a > 0
        else:
            j = a / self.step
            out = (a > 0) & (np.abs(j - np.round(j)) < 1e-9)
        return bool(out) if out.ndim == 0 else out

    def rescaled(self, alpha):
        """Powers gamma of the alpha-th power: ``{gamma : alpha*gamma in this set}``."""
        return self if self.step is None else JorgensenSet(self.step / alpha)

    def describe(self):
        return "(0, inf)" if self.step is None else f"{{{self.step!r} * j : j >= 1}}"


class ChartPoint(NamedTuple):
    theta: np.ndarray
    k: np.ndarray
    k1: np.ndarray
    k2: np.ndarray
    jac: np.ndarray  # d theta / d u


@dataclass(frozen=True)
class Chart:
    """Closed-form coordinates for a family.

    ``evaluate(u)`` returns a :class:`ChartPoint`; ``u_of_mean(m)`` inverts
    the mean map in chart coordinates. ``limits`` holds the limits of
    ``(theta, k)`` at the lower and upper ends of ``domain``.
    """

    domain: Interval
    evaluate: Callable[[np.ndarray], ChartPoint]
    u_of_mean: Callable[[np.ndarray], np.ndarray]
    limits: tuple


# ---------------------------------------------------------------------------
# Family specifications
# ---------------------------------------------------------------------------


class QuadraticKind(enum.Enum):
    GAUSSIAN = "gaussian"
    POISSON = "poisson"
    GAMMA = "gamma"
    BINOMIAL = "binomial"
    NEGATIVE_BINOMIAL = "negative-binomial"
    HYPERBOLIC = "hyperbolic"

    @property
    def param_name(self):
        return {
            QuadraticKind.GAMMA: "p",
            QuadraticKind.BINOMIAL: "N",
            QuadraticKind.NEGATIVE_BINOMIAL: "r",
        }.get(self)


@dataclass(frozen=True)
class Quadratic:
    kind: QuadraticKind
    param: Optional[float] = None

    def __post_init__(self):
        name = self.kind.param_name
        if name is None:
            if self.param is not None:
                raise InvalidParameter(f"{self.kind.value} takes no parameter")
            return
        value = 1.0 if self.param is None else float(self.param)
        if not value > 0 or not math.isfinite(value):
            raise InvalidParameter(f"{self.kind.value} needs {name} > 0, got {value}")
        if self.kind is QuadraticKind.BINOMIAL:
            if value != int(value):
                raise InvalidParameter("binomial needs a positive integer N")
            value = int(value)
        object.__setattr__(self, "param", value)

    def __str__(self):
        if self.kind.param_name is None:
            return self.kind.value
        p = self.param
        p = int(p) if float(p).is_integer() else p
        return f"{self.kind.value}:{self.kind.param_name}={p}"


@dataclass(frozen=True)
class CubicViaTBeta:
    """The image ``T_beta(F(base))`` of a quadratic base family."""

    base: Quadratic
    beta: float

    def __post_init__(self):
        if not math.isfinite(self.beta) or self.beta == 0:
            raise InvalidParameter("CubicViaTBeta needs a finite beta != 0")
        object.__setattr__(self, "beta", float(self.beta))

    def __str__(self):
        return f"{self.base}@{self.beta!r}"


@dataclass(frozen=True)
class ExampleIG:
    def __str__(self):
        return "example-ig"


FamilySpec = Union[Quadratic, CubicViaTBeta, ExampleIG]

_FAMILY_RE = re.compile(r"^\s*([a-z\-]+)\s*(?::\s*([A-Za-z]+)\s*=\s*([^@\s]+))?\s*(?:@\s*(\S+))?\s*$")


def parse_family(text: str) -> FamilySpec:
    """Parse descriptors like ``gaussian``, ``gamma:p=2``, ``poisson@0.5``, ``example-ig``."""
    m = _FAMILY_RE.match(text)
    if not m:
        raise InvalidParameter(f"cannot parse family descriptor {text!r}")
    name, key, value, beta = m.groups()
    if name == "example-ig":
        if key or beta:
            raise InvalidParameter("example-ig takes no parameters")
        return ExampleIG()
    try:
        kind = QuadraticKind(name)
    except ValueError:
        known = ", ".join(k.value for k in QuadraticKind)
        raise InvalidParameter(f"unknown family {name!r}; known: {known}, example-ig") from None
    param = None
    if key is not None:
        if key != kind.param_name:
            raise InvalidParameter(f"{name} has no parameter {key!r}")
        try:
            param = float(value)
        except ValueError:
            raise InvalidParameter(f"bad value {value!r} for {key}") from None
    base = Quadratic(kind, param)
    if beta is None:
        return base
    try:
        b = float(beta)
    except ValueError:
        raise InvalidParameter(f"bad beta {beta!r}") from None
    return base if b == 0 else CubicViaTBeta(base, b)


# ---------------------------------------------------------------------------
# The model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CumulantModel:
    name: str
    theta_domain: Interval
    means: Interval
    k: Callable
    k1: Callable
    k2: Callable
    support: Optional[SupportDescriptor]
    jorgensen: JorgensenSet
    log_h: Optional[Callable] = None
    psi_fn: Optional[Callable] = None
    chart: Optional[Chart] = None
    sampler: Optional[Callable] = None
    k_limits: tuple = (math.nan, math.nan)
    origin: Optional[tuple] = None  # (base model, beta) when this is T_beta(base)
    spec: Optional[object] = None
    quadratic_base: Optional[Quadratic] = None
    extra: dict = field(default_factory=dict, compare=False)

    def __repr__(self):
        return f"CumulantModel({self.name})"

    def get_chart(self) -> Chart:
        if self.chart is not None:
            return self.chart
        return identity_chart(self)


def identity_chart(model: CumulantModel) -> Chart:
    def evaluate(u):
        u = np.asarray(u, dtype=float)
        return ChartPoint(u, model.k(u), model.k1(u), model.k2(u), np.ones_like(u))

    dom = model.theta_domain
    return Chart(
        domain=dom,
        evaluate=evaluate,
        u_of_mean=lambda m: psi(model, m),
        limits=((dom.lo, model.k_limits[0]), (dom.hi, model.k_limits[1])),
    )


def _closed_chart(theta_domain, k, k1, k2, psi_fn, k_limits):
    def evaluate(u):
        u = np.asarray(u, dtype=float)
        return ChartPoint(u, k(u), k1(u), k2(u), np.ones_like(u))

    return Chart(
        theta_domain,
        evaluate,
        psi_fn,
        ((theta_domain.lo, k_limits[0]), (theta_domain.hi, k_limits[1])),
    )


def _arr(x):
    return np.asarray(x, dtype=float)


def _build(name, theta_domain, means, k, k1, k2, psi_fn, k_limits, support, jorgensen, log_h, sampler, spec, qbase):
    chart = _closed_chart(theta_domain, k, k1, k2, psi_fn, k_limits)
    return CumulantModel(
        name=name,
        theta_domain=theta_domain,
        means=means,
        k=k,
        k1=k1,
        k2=k2,
        support=support,
        jorgensen=jorgensen,
        log_h=log_h,
        psi_fn=psi_fn,
        chart=chart,
        sampler=sampler,
        k_limits=k_limits,
        spec=spec,
        quadratic_base=qbase,
    )


def _lattice_logpmf(masked_value, ok):
    return np.where(ok, masked_value, -np.inf)


def _gaussian(spec):
    def log_h(alpha, x):
        a, x = _arr(alpha), _arr(x)
        return -x * x / (2 * a) - 0.5 * (LOG_2PI + np.log(a))

    def sampler(theta, n, rng):
        return theta + rng.normal(n)

    return _build(
        "gaussian",
        Interval.real_line(),
        Interval.real_line(),
        lambda l: 0.5 * _arr(l) ** 2,
        lambda l: _arr(l) * 1.0,
        lambda l: np.ones_like(_arr(l)),
        lambda m: _arr(m) * 1.0,
        (INF, INF),
        SupportDescriptor("lebesgue", Interval.real_line()),
        JorgensenSet(),
        log_h,
        sampler,
        spec,
        spec,
    )


def _poisson(spec):
    def log_h(alpha, x):
        a, x = _arr(alpha), _arr(x)
        ok = (x >= 0) & (np.abs(x - np.round(x)) < 1e-9)
        xr = np.where(ok, np.round(x), 0.0)
        return _lattice_logpmf(special.xlogy(xr, a) - special.gammaln(xr + 1), ok)

    def sampler(theta, n, rng):
        return stats.poisson.ppf(rng.uniform(n), math.exp(theta)).astype(float)

    return _build(
        "poisson",
        Interval.real_line(),
        Interval(0.0, INF),
        lambda l: np.exp(_arr(l)),
        lambda l: np.exp(_arr(l)),
        lambda l: np.exp(_arr(l)),
        lambda m: np.log(_arr(m)),
        (0.0, INF),
        SupportDescriptor("counting", offset=0.0, step=1.0),
        JorgensenSet(),
        log_h,
        sampler,
        spec,
        spec,
    )


def _gamma(spec):
    p = spec.param

    def log_h(alpha, x):
        a, x = _arr(alpha), _arr(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = special.xlogy(a * p - 1, x) - special.gammaln(a * p)
        return np.where(x > 0, out, -np.inf)

    def sampler(theta, n, rng):
        return stats.gamma.ppf(rng.uniform(n), p, scale=-1.0 / theta)

    return _build(
        str(spec),
        Interval(-INF, 0.0),
        Interval(0.0, INF),
        lambda l: -p * np.log(-_arr(l)),
        lambda l: -p / _arr(l),
        lambda l: p / _arr(l) ** 2,
        lambda m: -p / _arr(m),
        (-INF, INF),
        SupportDescriptor("lebesgue", Interval(0.0, INF)),
        JorgensenSet(),
        log_h,
        sampler,
        spec,
        spec,
    )


def _binomial(spec):
    N = int(spec.param)

    def log_h(alpha, x):
        a, x = _arr(alpha), _arr(x)
        total = a * N
        ok = (x >= 0) & (x <= total) & (np.abs(x - np.round(x)) < 1e-9)
        ok &= np.abs(total - np.round(total)) < 1e-9
        xr = np.where(ok, np.round(x), 0.0)
        val = special.gammaln(total + 1) - special.gammaln(xr + 1) - special.gammaln(total - xr + 1)
        return _lattice_logpmf(val, ok)

    def sampler(theta, n, rng):
        return stats.binom.ppf(rng.uniform(n), N, special.expit(theta)).astype(float)

    return _build(
        str(spec),
        Interval.real_line(),
        Interval(0.0, float(N)),
        lambda l: N * np.logaddexp(0.0, _arr(l)),
        lambda l: N * special.expit(_arr(l)),
        lambda l: N * special.expit(_arr(l)) * special.expit(-_arr(l)),
        lambda m: np.log(_arr(m) / (N - _arr(m))),
        (0.0, INF),
        SupportDescriptor("counting", offset=0.0, step=1.0, count=N + 1),
        JorgensenSet(1.0),
        log_h,
        sampler,
        spec,
        spec,
    )


def _negative_binomial(spec):
    r = spec.param

    def log_h(alpha, x):
        a, x = _arr(alpha), _arr(x)
        ok = (x >= 0) & (np.abs(x - np.round(x)) < 1e-9)
        xr = np.where(ok, np.round(x), 0.0)
        val = special.gammaln(a * r + xr) - special.gammaln(a * r) - special.gammaln(xr + 1)
        return _lattice_logpmf(val, ok)

    def sampler(theta, n, rng):
        return stats.nbinom.ppf(rng.uniform(n), r, -math.expm1(theta)).astype(float)

    return _build(
        str(spec),
        Interval(-INF, 0.0),
        Interval(0.0, INF),
        lambda l: -r * np.log(-np.expm1(_arr(l))),
        lambda l: r * np.exp(_arr(l)) / -np.expm1(_arr(l)),
        lambda l: r * np.exp(_arr(l)) / np.expm1(_arr(l)) ** 2,
        lambda m: np.log(_arr(m) / (r + _arr(m))),
        (0.0, INF),
        SupportDescriptor("counting", offset=0.0, step=1.0),
        JorgensenSet(),
        log_h,
        sampler,
        spec,
        spec,
    )


def _hyperbolic(spec):
    def log_h(alpha, x):
        # density 2^(a-2) |Gamma((a + i x)/2)|^2 / (pi Gamma(a))
        a, x = _arr(alpha), _arr(x)
        lg = special.loggamma((a + 1j * x) / 2.0).real
        return (a - 2) * math.log(2.0) - math.log(math.pi) - special.gammaln(a) + 2 * lg

    half = 0.5 * math.pi
    return _build(
        "hyperbolic",
        Interval(-half, half),
        Interval.real_line(),
        lambda l: -np.log(np.cos(_arr(l))),
        lambda l: np.tan(_arr(l)),
        lambda l: 1.0 / np.cos(_arr(l)) ** 2,
        lambda m: np.arctan(_arr(m)),
        (INF, INF),
        SupportDescriptor("lebesgue", Interval.real_line()),
        JorgensenSet(),
        log_h,
        None,
        spec,
        spec,
    )


def _example_ig(spec):
    def k(th):
        th = _arr(th)
        return -th - np.sqrt(-2.0 * th)

    def k1(th):
        return -1.0 + (-2.0 * _arr(th)) ** -0.5

    def k2(th):
        return (-2.0 * _arr(th)) ** -1.5

    def psi_fn(m):
        return -0.5 / (1.0 + _arr(m)) ** 2

    def log_h(alpha, x):
        # alpha-th power: a (x+a)^(-3/2) exp(-a^2 / (2(x+a))) / sqrt(2 pi), x > -a
        a, x = _arr(alpha), _arr(x)
        y = x + a
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.log(a) - 1.5 * np.log(y) - 0.5 * LOG_2PI - a * a / (2.0 * y)
        return np.where(y > 0, out, -np.inf)

    def sampler(theta, n, rng):
        # 1 + X is inverse Gaussian with mean (-2 theta)^(-1/2) and shape 1
        mu = (-2.0 * theta) ** -0.5
        z = rng.normal(n)
        u = rng.uniform(n)
        v = z * z
        y = mu + 0.5 * mu * mu * v - 0.5 * mu * np.sqrt(4.0 * mu * v + mu * mu * v * v)
        y = np.where(u <= mu / (mu + y), y, mu * mu / y)
        return y - 1.0

    # F(example-ig) = T_1 of the gaussian family with cumulant l^2/2 + l
    return _build(
        "example-ig",
        Interval(-INF, 0.0),
        Interval(-1.0, INF),
        k,
        k1,
        k2,
        psi_fn,
        (INF, 0.0),
        SupportDescriptor("lebesgue", Interval(-1.0, INF)),
        JorgensenSet(),
        log_h,
        sampler,
        spec,
        Quadratic(QuadraticKind.GAUSSIAN),
    )


_BUILDERS = {
    QuadraticKind.GAUSSIAN: _gaussian,
    QuadraticKind.POISSON: _poisson,
    QuadraticKind.GAMMA: _gamma,
    QuadraticKind.BINOMIAL: _binomial,
    QuadraticKind.NEGATIVE_BINOMIAL: _negative_binomial,
    QuadraticKind.HYPERBOLIC: _hyperbolic,
}


def make_model(spec: Union[FamilySpec, str]) -> CumulantModel:
    """Build the cumulant model for a family specification or descriptor string."""
    if isinstance(spec, str):
        spec = parse_family(spec)
    if isinstance(spec, ExampleIG):
        return _example_ig(spec)
    if isinstance(spec, Quadratic):
        return _BUILDERS[spec.kind](spec)
    if isinstance(spec, CubicViaTBeta):
        from .tbeta import transport_cumulant

        base = make_model(spec.base)
        model = transport_cumulant(base, spec.beta)
        return replace(model, spec=spec, name=str(spec))
    raise InvalidParameter(f"unsupported family specification {spec!r}")


def catalog():
    """One representative model of each quadratic kind plus the inverse-Gaussian example."""
    specs = [
        Quadratic(QuadraticKind.GAUSSIAN),
        Quadratic(QuadraticKind.POISSON),
        Quadratic(QuadraticKind.GAMMA, 1.0),
        Quadratic(QuadraticKind.BINOMIAL, 5),
        Quadratic(QuadraticKind.NEGATIVE_BINOMIAL, 2.0),
        Quadratic(QuadraticKind.HYPERBOLIC),
    ]
    return [make_model(s) for s in specs]


# ---------------------------------------------------------------------------
# Generic operations
# ---------------------------------------------------------------------------


def mean_domain(model: CumulantModel) -> Interval:
    return model.means


def mean_domain_limits(model: CumulantModel) -> tuple:
    """Numerical limits of ``k1`` at the ends of Theta (a cross-check of ``model.means``)."""
    dom = model.theta_domain
    out = []
    for end, sign in ((dom.lo, -1.0), (dom.hi, 1.0)):
        if math.isinf(end):
            pts = sign * np.geomspace(1.0, 1e300, 60)
        else:
            scale = max(1.0, abs(end))
            pts = end - sign * scale * np.geomspace(1e-2, 1e-15, 40)
        with np.errstate(all="ignore"):
            vals = np.asarray(model.k1(pts), dtype=float)
        vals = vals[~np.isnan(vals)]
        if vals.size == 0 or np.any(np.isinf(vals)):
            out.append(sign * INF)
            continue
        # a value that keeps running away from the first probe is divergent
        last = float(vals[-1])
        diverged = abs(last) > 1e6 * max(1.0, abs(float(vals[0])))
        out.append(math.copysign(INF, last) if diverged else last)
    return tuple(out)


def _grow_bracket(f, domain, x0, factor=2.0, max_steps=200):
    """Expand from ``x0`` until the increasing function ``f`` changes sign."""
    f0 = f(x0)
    if f0 == 0:
        return x0, x0
    direction = 1.0 if f0 < 0 else -1.0
    end = domain.hi if direction > 0 else domain.lo
    step = 1.0
    x_prev = x0
    for _ in range(max_steps):
        if math.isinf(end):
            x = x0 + direction * step
        else:
            x = end - (end - x0) / (2.0 * step)
        if not domain.contains(x) or x == x_prev:
            break
        if (f(x) > 0) == (direction > 0):
            return (x_prev, x) if direction > 0 else (x, x_prev)
        x_prev = x
        step *= factor
    raise OutOfDomain("no sign change found inside the natural-parameter domain")


def make_chart_solver(chart: Chart, theta_domain: Interval) -> Callable:
    """Vectorized inverse of ``u -> theta(u)`` for an increasing chart (NaN outside)."""
    u_dom = chart.domain

    def theta_of_u(u):
        return float(chart.evaluate(u).theta)

    def solve(theta):
        th = float(theta)
        if not theta_domain.contains(th):
            return math.nan
        f = lambda u: theta_of_u(u) - th
        lo, hi = _grow_bracket(f, u_dom, u_dom.midpoint())
        if lo == hi:
            return lo
        tol = Tolerance(abs_tol=4e-16 * max(1.0, abs(th)), rel_tol=0.0)
        return find_root(f, Interval(lo, hi), tol, fprime=lambda u: float(chart.evaluate(u).jac))

    return np.vectorize(solve, otypes=[float])


def model_from_variance(
    variance_fn: Callable,
    name: str,
    means: Interval = Interval(-INF, INF),
    m_ref: float = 0.0,
    tol: Optional[Tolerance] = None,
) -> CumulantModel:
    """A cumulant model known only through its variance function.

    Uses the mean as chart coordinate: ``theta(m) = int_{m_ref}^m dx / V(x)``
    and ``k(theta(m)) = int_{m_ref}^m x / V(x) dx``, both by quadrature.
    """
    from .numerics import integrate

    tol = tol or Tolerance(abs_tol=1e-14, rel_tol=1e-13)
    inv_v = lambda x: 1.0 / np.asarray(variance_fn(x), dtype=float)
    x_over_v = lambda x: np.asarray(x, dtype=float) / np.asarray(variance_fn(x), dtype=float)

    def signed_integral(f, a, b):
        if a == b:
            return 0.0
        lo, hi = (a, b) if a < b else (b, a)
        val = integrate(f, Interval(lo, hi), tol).value
        return val if a < b else -val

    def cumulative(f, pts):
        # integrals from m_ref to each point, accumulated over the gaps between sorted points
        out = np.empty(pts.size)
        for side in (pts >= m_ref, pts < m_ref):
            idx = np.flatnonzero(side)
            if idx.size == 0:
                continue
            order = idx[np.argsort(np.abs(pts[idx] - m_ref))]
            acc, prev = 0.0, m_ref
            for i in order:
                acc += signed_integral(f, prev, pts[i])
                prev = pts[i]
                out[i] = acc
        return out

    def evaluate(m):
        m = np.asarray(m, dtype=float)
        flat = m.ravel()
        th = cumulative(inv_v, flat).reshape(m.shape)
        kk = cumulative(x_over_v, flat).reshape(m.shape)
        vv = np.asarray(variance_fn(m), dtype=float)
        return ChartPoint(th, kk, m * 1.0, vv, 1.0 / vv)

    lim_lo = (signed_integral(inv_v, m_ref, means.lo), signed_integral(x_over_v, m_ref, means.lo))
    lim_hi = (signed_integral(inv_v, m_ref, means.hi), signed_integral(x_over_v, m_ref, means.hi))
    chart = Chart(means, evaluate, lambda m: np.asarray(m, dtype=float) * 1.0, (lim_lo, lim_hi))
    theta_dom = Interval(lim_lo[0], lim_hi[0])
    solver = make_chart_solver(chart, theta_dom)
    at = lambda th: evaluate(solver(np.asarray(th, dtype=float)))
    return CumulantModel(
        name=name,
        theta_domain=theta_dom,
        means=means,
        k=lambda th: at(th).k,
        k1=lambda th: at(th).k1,
        k2=lambda th: at(th).k2,
        support=None,
        jorgensen=JorgensenSet(),
        psi_fn=lambda m: evaluate(m).theta,
        chart=chart,
        k_limits=(lim_lo[1], lim_hi[1]),
        extra={"solve_chart": solver},
    )


def psi_numeric(model: CumulantModel, m: float, tol: Optional[Tolerance] = None) -> float:
    """Invert ``k1`` by safeguarded Newton on a geometrically grown bracket."""
    tol = tol or Tolerance(abs_tol=1e-13, rel_tol=0.0)
    dom = model.theta_domain
    if dom.is_finite:
        x0 = dom.midpoint()
    elif math.isfinite(dom.hi):
        x0 = dom.hi - 1.0
    elif math.isfinite(dom.lo):
        x0 = dom.lo + 1.0
    else:
        x0 = 0.0
    f = lambda th: float(model.k1(th)) - m
    lo, hi = _grow_bracket(f, dom, x0)
    if lo == hi:
        return lo
    return find_root(f, Interval(lo, hi), tol, fprime=lambda th: float(model.k2(th)))


def psi(model: CumulantModel, m):
    """Natural parameter whose mean is ``m`` (inverse of ``k1``)."""
    m_arr = np.asarray(m, dtype=float)
    if not np.all(model.means.contains(m_arr)):
        raise OutOfDomain(f"mean {m!r} outside {model.means.describe()} for {model.name}")
    if model.psi_fn is not None:
        out = model.psi_fn(m_arr)
    else:
        out = np.vectorize(lambda v: psi_numeric(model, float(v)))(m_arr)
    return float(out) if np.ndim(out) == 0 else np.asarray(out, dtype=float)


def chart_at_mean(model: CumulantModel, m) -> ChartPoint:
    m_arr = np.asarray(m, dtype=float)
    if not np.all(model.means.contains(m_arr)):
        raise OutOfDomain(f"mean {m!r} outside {model.means.describe()} for {model.name}")
    chart = model.get_chart()
    return chart.evaluate(chart.u_of_mean(m_arr))


def variance(model: CumulantModel, m):
    """Variance function ``V(m) = k2(psi(m))``."""
    out = chart_at_mean(model, m).k2
    return float(out) if np.ndim(out) == 0 else out


def log_density(model: CumulantModel, theta, x):
    """Log density of ``P(theta, model)`` at ``x`` w.r.t. the reference measure."""
    if model.log_h is None:
        raise UnknownBaseDensity(f"{model.name} has no closed-form generating density")
    theta_arr = np.asarray(theta, dtype=float)
    if not np.all(model.theta_domain.contains(theta_arr)):
        raise OutOfDomain(f"theta {theta!r} outside {model.theta_domain.describe()}")
    x = np.asarray(x, dtype=float)
    out = model.log_h(1.0, x) + theta_arr * x - model.k(theta_arr)
    return float(out) if np.ndim(out) == 0 else out


def jorgensen_power(model: CumulantModel, alpha: float) -> CumulantModel:
    """The family generated by the ``alpha``-th convolution power."""
    alpha = float(alpha)
    if not model.jorgensen.contains(alpha):
        raise NotInJorgensenSet(f"{alpha} is not in the Jorgensen set {model.jorgensen.describe()}")
    base_chart = model.get_chart()

    def evaluate(u):
        cp = base_chart.evaluate(u)
        return ChartPoint(cp.theta, alpha * cp.k, alpha * cp.k1, alpha * cp.k2, cp.jac)

    (tlo, klo), (thi, khi) = base_chart.limits
    chart = Chart(
        base_chart.domain,
        evaluate,
        lambda m: base_chart.u_of_mean(np.asarray(m, dtype=float) / alpha),
        ((tlo, alpha * klo), (thi, alpha * khi)),
    )
    log_h = None
    if model.log_h is not None:
        log_h = lambda a, x: model.log_h(alpha * np.asarray(a, dtype=float), x)
    psi_fn = None
    if model.psi_fn is not None:
        psi_fn = lambda m: model.psi_fn(np.asarray(m, dtype=float) / alpha)
    return CumulantModel(
        name=f"{model.name}^{alpha!r}",
        theta_domain=model.theta_domain,
        means=model.means.scaled(alpha),
        k=lambda th: alpha * model.k(th),
        k1=lambda th: alpha * model.k1(th),
        k2=lambda th: alpha * model.k2(th),
        support=None,
        jorgensen=model.jorgensen.rescaled(alpha),
        log_h=log_h,
        psi_fn=psi_fn,
        chart=chart if model.chart is not None else None,
        k_limits=(alpha * model.k_limits[0], alpha * model.k_limits[1]),
        spec=None,
        quadratic_base=model.quadratic_base,
        extra=model.extra,
    )


def sample_family(model: CumulantModel, theta: float, n: int, rng: RngStream) -> np.ndarray:
    """Draw ``n`` observations from ``P(theta, model)``."""
    if model.sampler is None:
        raise NotImplementedError(f"no sampler for {model.name}")
    if not model.theta_domain.contains(theta):
        raise OutOfDomain(f"theta {theta!r} outside {model.theta_domain.describe()}")
    return np.asarray(model.sampler(float(theta), int(n), rng), dtype=float)


# exact (a', b', c') with ln V = a' psi + b' k(psi) + c' for each quadratic kind
def quadratic_exp_coefficients(spec: Quadratic) -> tuple:
    kind = spec.kind
    if kind is QuadraticKind.GAUSSIAN:
        return (0.0, 0.0, 0.0)
    if kind is QuadraticKind.POISSON:
        return (1.0, 0.0, 0.0)
    if kind is QuadraticKind.GAMMA:
        p = spec.param
        return (0.0, 2.0 / p, math.log(p))
    if kind is QuadraticKind.BINOMIAL:
        N = spec.param
        return (1.0, -2.0 / N, math.log(N))
    if kind is QuadraticKind.NEGATIVE_BINOMIAL:
        r = spec.param
        return (1.0, 2.0 / r, math.log(r))
    return (0.0, 2.0, 0.0)


def quadratic_variance(spec: Quadratic) -> Callable:
    """Closed-form variance function of a quadratic kind (independent of the cumulant code)."""
    kind, p = spec.kind, spec.param
    table = {
        QuadraticKind.GAUSSIAN: lambda m: np.ones_like(_arr(m)),
        QuadraticKind.POISSON: lambda m: _arr(m) * 1.0,
        QuadraticKind.GAMMA: lambda m: _arr(m) ** 2 / p,
        QuadraticKind.BINOMIAL: lambda m: _arr(m) - _arr(m) ** 2 / p,
        QuadraticKind.NEGATIVE_BINOMIAL: lambda m: _arr(m) + _arr(m) ** 2 / p,
        QuadraticKind.HYPERBOLIC: lambda m: 1.0 + _arr(m) ** 2,
    }
    return table[kind]


__all__ = [
    "SupportDescriptor",
    "JorgensenSet",
    "ChartPoint",
    "Chart",
    "QuadraticKind",
    "Quadratic",
    "CubicViaTBeta",
    "ExampleIG",
    "FamilySpec",
    "parse_family",
    "CumulantModel",
    "make_model",
    "catalog",
    "mean_domain",
    "mean_domain_limits",
    "psi",
    "psi_numeric",
    "chart_at_mean",
    "variance",
    "log_density",
    "jorgensen_power",
    "sample_family",
    "quadratic_exp_coefficients",
    "quadratic_variance",
    "identity_chart",
    "make_chart_solver",
    "model_from_variance",
    "EMPTY",
]
