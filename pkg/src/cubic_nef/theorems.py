"""Executable checks of the characterization of cubic families.

Each check returns a :class:`CheckReport` whose ``passed`` flag is exactly
``max_residual <= tolerance``.

The shape identities: a family is the T_beta image of a quadratic family
iff, for some ``(a, b, c)``,

    ln V(m) - 3 ln(1 + beta m) = a psi(m) + b k(psi(m)) + c,

equivalently ``k'' = (1 + beta k')^3 exp(a theta + b k + c)``, and then

    V(m) = L u^3 - (b / beta^2) u^2 + ((b - beta a) / (2 beta^2)) u,   u = 1 + beta m.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Union

import numpy as np
from scipy.interpolate import CubicSpline

from .exceptions import InvalidParameter, OutOfDomain, SingularFit
from .families import (
    CubicViaTBeta,
    CumulantModel,
    ExampleIG,
    Quadratic,
    chart_at_mean,
    make_model,
    model_from_variance,
    psi,
    quadratic_exp_coefficients,
    quadratic_variance,
)
from .numerics import Interval, geometric_grid
from .posterior import (
    BayesPosterior,
    DataBatch,
    PosteriorState,
    closed_form_functional,
    posterior_functional,
    sample_observations,
    update,
)
from .priors import (
    HyperParams,
    PriorKind,
    mean_value,
    normalize,
    pushforward_kprime_logdensity,
    ratio_functional,
)
from .tbeta import chart_of_theta, m_beta_set, mean_transport, theta_beta_set, variance_tbeta


@dataclass(frozen=True)
class CheckReport:
    name: str
    max_residual: float
    tolerance: float
    grid: str
    passed: bool
    notes: str = ""

    @classmethod
    def make(cls, name, residual, tolerance, grid, notes=""):
        residual = float(residual)
        ok = bool(residual <= tolerance) if math.isfinite(residual) else False
        return cls(name, residual, float(tolerance), grid, ok, notes)

    def as_dict(self):
        return {
            "name": self.name,
            "max_residual": self.max_residual,
            "tolerance": self.tolerance,
            "grid": self.grid,
            "pass": self.passed,
            "notes": self.notes,
        }


@dataclass(frozen=True)
class AbcFit:
    a: float
    b: float
    c: float
    residual: float
    beta: float = 0.0
    grid: str = ""

    @property
    def coefficients(self):
        return (self.a, self.b, self.c)


# ---------------------------------------------------------------------------
# Fit targets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class VarianceGrid:
    """A variance function known only by its values on an increasing mean grid.

    ``psi`` and ``k o psi`` are recovered from the cubic-spline
    antiderivatives of ``1/V`` and ``m/V``, anchored at ``m_ref``.
    """

    m: np.ndarray
    V: np.ndarray
    name: str = "variance-grid"
    m_ref: float = 0.0

    def __post_init__(self):
        m = np.asarray(self.m, dtype=float)
        V = np.asarray(self.V, dtype=float)
        if m.ndim != 1 or m.shape != V.shape or m.size < 8:
            raise InvalidParameter("variance grid needs matching 1-d arrays of at least 8 points")
        if np.any(np.diff(m) <= 0) or np.any(V <= 0):
            raise InvalidParameter("variance grid must be increasing with positive values")
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "V", V)

    @property
    def means(self):
        return Interval(self.m[0], self.m[-1], lo_closed=True, hi_closed=True)

    def quantities(self, mm):
        inv = CubicSpline(self.m, 1.0 / self.V).antiderivative()
        kv = CubicSpline(self.m, self.m / self.V).antiderivative()
        mm = np.asarray(mm, dtype=float)
        th = inv(mm) - inv(self.m_ref)
        kk = kv(mm) - kv(self.m_ref)
        vv = CubicSpline(self.m, self.V)(mm)
        return th, kk, vv


FitTarget = Union[CumulantModel, VarianceGrid, Quadratic, CubicViaTBeta, ExampleIG, str]


def _as_target(target):
    if isinstance(target, (CumulantModel, VarianceGrid)):
        return target
    return make_model(target)


def _default_beta(target) -> Optional[float]:
    spec = getattr(target, "spec", None)
    if isinstance(spec, CubicViaTBeta):
        return spec.beta
    if isinstance(spec, ExampleIG):
        return 1.0
    if isinstance(spec, Quadratic):
        return 0.0
    return None


def _window(target, beta):
    """Admissible means for ``target`` at ``beta`` (closed window for raw grids)."""
    if isinstance(target, VarianceGrid):
        dom = target.means
        if beta == 0:
            return dom
        half = Interval(-1.0 / beta, math.inf) if beta > 0 else Interval(-math.inf, -1.0 / beta)
        return dom.intersect(half)
    return m_beta_set(target, beta)


def fit_grid(target, beta, n):
    """Mean grid for fits: log-clustered toward the ends of the admissible set."""
    dom = _window(target, beta)
    if not dom:
        raise OutOfDomain(f"no admissible means at beta={beta}")
    if isinstance(target, VarianceGrid):
        pts = target.m[dom.contains(target.m)]
        # stay off the closed ends where 1 + beta m may vanish
        pts = pts[1 + beta * pts > 1e-3]
        if pts.size > n:
            pts = pts[np.linspace(0, pts.size - 1, n).astype(int)]
        return pts
    return geometric_grid(dom, n, clamp=1e-2, span=1e2)


def _mean_quantities(target, m):
    if isinstance(target, VarianceGrid):
        return target.quantities(m)
    cp = chart_at_mean(target, m)
    return cp.theta, cp.k, cp.k2


def fit_abc(target: FitTarget, beta: Optional[float] = None, grid_size: int = 64) -> AbcFit:
    """Least-squares ``(a, b, c)`` in ``ln V - 3 ln(1 + beta m) = a psi + b k(psi) + c``.

    When ``beta`` is omitted it is read from the family specification, or
    scanned over ``[-2, 2]`` when the target carries none.
    """
    target = _as_target(target)
    if beta is None:
        beta = _default_beta(target)
        if beta is None:
            return beta_scan(target, np.round(np.arange(-2.0, 2.0001, 0.05), 10), grid_size)[1]
    beta = float(beta)
    m = fit_grid(target, beta, grid_size)
    th, kk, vv = _mean_quantities(target, m)
    y = np.log(vv) - 3.0 * np.log1p(beta * m)
    X = np.column_stack([th, kk, np.ones_like(m)])
    scale = np.maximum(np.max(np.abs(X), axis=0), 1e-300)
    Xs = X / scale
    if np.linalg.matrix_rank(Xs, tol=1e-12 * np.sqrt(m.size)) < 3:
        raise SingularFit("design matrix [psi, k(psi), 1] is rank deficient on the grid")
    coef, *_ = np.linalg.lstsq(Xs, y, rcond=None)
    coef = coef / scale
    resid = float(np.max(np.abs(y - X @ coef)))
    desc = f"{m.size} means in [{m[0]:.6g}, {m[-1]:.6g}]"
    return AbcFit(float(coef[0]), float(coef[1]), float(coef[2]), resid, beta, desc)


def beta_scan(target: FitTarget, betas: Iterable[float], grid_size: int = 64):
    """Fit at every beta; return the list of fits and the best one."""
    target = _as_target(target)
    fits = []
    for b in betas:
        try:
            fits.append(fit_abc(target, float(b), grid_size))
        except (OutOfDomain, SingularFit):
            continue
    if not fits:
        raise OutOfDomain("no beta in the scan admits a fit")
    best = min(fits, key=lambda f: f.residual)
    return fits, best


def transported_coefficients(abc_prime, beta):
    """``(a, b, c) = (a', b' + beta a', c')`` for the T_beta image."""
    a, b, c = abc_prime
    return (a, b + beta * a, c)


# ---------------------------------------------------------------------------
# The shape of the variance
# ---------------------------------------------------------------------------


def check_quadratic_exp_form(spec: Union[Quadratic, str], betas: Sequence[float] = (0.5, 1.0)) -> CheckReport:
    """Fit at beta=0 against the hand-derived ``(a', b', c')`` and the transport rule on images."""
    if isinstance(spec, str):
        spec = make_model(spec).spec
    base = make_model(spec)
    exact = quadratic_exp_coefficients(spec)
    fit0 = fit_abc(base, 0.0)
    worst = max(fit0.residual, max(abs(x - y) for x, y in zip(fit0.coefficients, exact)))
    notes = [f"beta=0 fit (a,b,c)=({fit0.a:.10g}, {fit0.b:.10g}, {fit0.c:.10g})"]
    for beta in betas:
        image = make_model(CubicViaTBeta(spec, float(beta)))
        fit = fit_abc(image, float(beta))
        expected = transported_coefficients(exact, beta)
        gap = max(abs(x - y) for x, y in zip(fit.coefficients, expected))
        worst = max(worst, gap, fit.residual)
        notes.append(f"beta={beta}: gap to transport rule {gap:.3g}")
    return CheckReport.make(
        f"quadratic-exp-form[{spec}]", worst, 1e-7, f"64 means per fit; betas 0, {list(betas)}", "; ".join(notes)
    )


def monge_ampere_residual(model: CumulantModel, beta: float, fit: AbcFit, theta):
    """``|k'' - (1 + beta k')^3 exp(a theta + b k + c)| / max(1, k'')`` at theta."""
    th = np.asarray(theta, dtype=float)
    dom = theta_beta_set(model, beta)
    if not np.all(dom.contains(th)):
        raise OutOfDomain(f"theta {theta!r} outside {dom.describe()}")
    cp = model.get_chart().evaluate(chart_of_theta(model, th))
    rhs = (1.0 + beta * cp.k1) ** 3 * np.exp(fit.a * cp.theta + fit.b * cp.k + fit.c)
    out = np.abs(cp.k2 - rhs) / np.maximum(1.0, cp.k2)
    return float(out) if out.ndim == 0 else out


def check_monge_ampere(model: CumulantModel, beta: float, fit: AbcFit, n: int = 50) -> CheckReport:
    m = geometric_grid(m_beta_set(model, beta), n, clamp=1e-2, span=1e2)
    theta = psi(model, m)
    res = monge_ampere_residual(model, beta, fit, theta)
    return CheckReport.make(
        "monge-ampere",
        float(np.max(res)),
        1e-7,
        f"{n} theta points in [{theta[0]:.6g}, {theta[-1]:.6g}]",
        f"(a,b,c)=({fit.a:.6g}, {fit.b:.6g}, {fit.c:.6g})",
    )


def cubic_polynomial(beta, a, b, lead):
    """The variance polynomial determined by ``(a, b)`` and the free leading constant."""

    def V(m):
        u = 1.0 + beta * np.asarray(m, dtype=float)
        return lead * u**3 - (b / beta**2) * u**2 + ((b - beta * a) / (2.0 * beta**2)) * u

    return V


def _uniform_window(target, beta, n=33):
    if isinstance(target, VarianceGrid):
        pts = fit_grid(target, beta, 10**9)
        lo, hi = pts[0], pts[-1]
    else:
        g = geometric_grid(m_beta_set(target, beta), 64, clamp=1e-2, span=10.0)
        lo, hi = g[0], g[-1]
    return np.linspace(lo, hi, n)


def fourth_difference_ratio(target, beta, n=33):
    """``max |Delta^4 V| / max |V|`` on a uniform grid inside the admissible means."""
    m = _uniform_window(target, beta, n)
    V = _mean_quantities(target, m)[2]
    d4 = np.diff(V, 4)
    return float(np.max(np.abs(d4)) / np.max(np.abs(V))), m


def check_cubic_reconstruction(target: FitTarget, beta: float, fit: Optional[AbcFit] = None, grid_size: int = 64) -> CheckReport:
    """Match V against the polynomial fixed by ``(a, b)``; also require vanishing 4th differences."""
    target = _as_target(target)
    beta = float(beta)
    fit = fit or fit_abc(target, beta, grid_size)
    m = fit_grid(target, beta, grid_size)
    V = _mean_quantities(target, m)[2]
    if beta == 0:
        X = np.column_stack([np.ones_like(m), m, m * m])
        coef, *_ = np.linalg.lstsq(X, V, rcond=None)
        poly = X @ coef
        notes = f"degree-2 fit coefficients {np.array2string(coef, precision=6)}"
    else:
        mid = m[m.size // 2]
        partial = cubic_polynomial(beta, fit.a, fit.b, 0.0)
        lead = float((_mean_quantities(target, np.array([mid]))[2][0] - partial(mid)) / (1.0 + beta * mid) ** 3)
        poly = cubic_polynomial(beta, fit.a, fit.b, lead)(m)
        notes = f"leading constant {lead:.10g} fixed at m={mid:.6g}"
    poly_gap = float(np.max(np.abs(V - poly) / np.maximum(1.0, np.abs(V))))
    d4_ratio, um = fourth_difference_ratio(target, beta)
    d4_tol = 1e-9
    d4_excess = 0.0 if d4_ratio <= d4_tol else d4_ratio
    notes += f"; 4th-difference ratio {d4_ratio:.3g} (limit {d4_tol:g}) on {um.size} uniform means"
    return CheckReport.make(
        "cubic-reconstruction",
        max(poly_gap, d4_excess),
        1e-7,
        f"{m.size} means in [{m[0]:.6g}, {m[-1]:.6g}]",
        notes,
    )


# ---------------------------------------------------------------------------
# Prior identities
# ---------------------------------------------------------------------------


def t2_map(t, m0, fit: AbcFit):
    """``(t, m0) -> (t + b, (t m0 - a)/(t + b))``."""
    t1 = t + fit.b
    return t1, (t * m0 - fit.a) / t1


def t2_inverse(t1, m1, fit: AbcFit):
    """``(t1, m1) -> (t1 - b, (t1 m1 + a)/(t1 - b))``."""
    t = t1 - fit.b
    return t, (t1 * m1 + fit.a) / t


def check_T2_inclusion(
    model: CumulantModel,
    beta: float,
    t: float,
    m0: float,
    fit: Optional[AbcFit] = None,
    t1_offset: float = 0.0,
    n: int = 50,
) -> CheckReport:
    """Compare the image of the natural prior under ``k'`` with the mean prior at the mapped hyperparameters."""
    fit = fit or fit_abc(model, beta)
    t1, m1 = t2_map(t, m0, fit)
    t1 += t1_offset
    mb = m_beta_set(model, beta)
    t_back, m_back = t2_inverse(t1 - t1_offset, m1, fit)
    round_trip = max(abs(t_back - t), abs(m_back - m0))
    notes = [
        f"(t1, m1) = ({t1:.10g}, {m1:.10g})",
        f"inverse-map round trip {round_trip:.3g}",
        f"t1 - b > 0: {t1 - fit.b > 0}",
        f"(t1 m1 + a)/(t1 - b) in (M)_beta: {bool(mb.contains((t1 * m1 + fit.a) / (t1 - fit.b)))}",
    ]
    if not (t1 > 0 and mb.contains(m1)):
        notes.append("mapped hyperparameters are not admissible")
        return CheckReport.make("T2-inclusion", math.inf, 1e-7, "none", "; ".join(notes))
    prior = normalize(PriorKind.GENERALIZED_NATURAL if beta else PriorKind.STANDARD_NATURAL, HyperParams(t, m0, beta), model)
    target = normalize(PriorKind.GENERALIZED_MEAN if beta else PriorKind.STANDARD_MEAN, HyperParams(t1, m1, beta), model)
    m = geometric_grid(mb, n, clamp=1e-2, span=1e2)
    lhs = pushforward_kprime_logdensity(prior, m)
    rhs = target.logpdf(m)
    gap = float(np.max(np.abs(lhs - rhs)))
    return CheckReport.make(
        "T2-inclusion",
        max(gap, round_trip),
        1e-7,
        f"{n} means in [{m[0]:.6g}, {m[-1]:.6g}]",
        "; ".join(notes),
    )


def check_dy_identity(spec: Union[Quadratic, str, CumulantModel], t1: float, m1: float) -> CheckReport:
    """Expectation of ``k'`` under the standard natural prior equals ``m1``."""
    model = spec if isinstance(spec, CumulantModel) else make_model(spec)
    prior = normalize(PriorKind.STANDARD_NATURAL, HyperParams(t1, m1, 0.0), model)
    value = prior.expectation(chart_fn=mean_value)
    return CheckReport.make(
        f"dy-identity[{model.name}]",
        abs(value - m1),
        1e-6,
        f"t1={t1}, m1={m1}",
        f"E[k'] = {value:.12g}",
    )


def check_prop3(model: CumulantModel, beta: float, t: float, m0: float) -> CheckReport:
    """Expectation of ``k'/(1 + beta k')`` under the generalized prior equals ``m0/(1 + beta m0)``."""
    if beta == 0:
        rep = check_dy_identity(model, t, m0)
        return CheckReport.make("prop3", rep.max_residual, rep.tolerance, rep.grid, rep.notes)
    prior = normalize(PriorKind.GENERALIZED_NATURAL, HyperParams(t, m0, beta), model)
    value = prior.expectation(chart_fn=ratio_functional(beta))
    target = m0 / (1.0 + beta * m0)
    notes = f"quadrature {value:.12g}, closed form {target:.12g}"
    cut = _cut_notes(model, beta)
    if cut:
        notes += "; " + cut
    return CheckReport.make("prop3", abs(value - target), 1e-6, f"t={t}, m0={m0}, beta={beta}", notes)


def boundary_weight(model: CumulantModel, beta: float, t: float, m0: float) -> float:
    """Limit of ``exp(t m0 theta - t k(theta))`` at the ends of ``(Theta)_beta``.

    The prior-mean identities integrate ``d/dtheta exp(t m0 theta - t k)``; a
    nonzero limit at either end shows up as a defect in those identities.
    """
    total = 0.0
    dom = theta_beta_set(model, beta)
    mb = m_beta_set(model, beta)
    for end, mend in ((dom.lo, mb.lo), (dom.hi, mb.hi)):
        if math.isinf(end):
            continue
        if mend == model.means.lo or mend == model.means.hi:
            k_end = model.k_limits[0] if end == model.theta_domain.lo else model.k_limits[1]
        else:
            k_end = float(chart_at_mean(model, mend).k)
        if math.isfinite(k_end):
            total += math.exp(t * m0 * end - t * k_end)
    return total


def _cut_notes(model, beta):
    dom = theta_beta_set(model, beta)
    full = model.theta_domain
    parts = []
    for end, name in ((dom.lo, "lower"), (dom.hi, "upper")):
        if math.isfinite(end):
            parts.append(f"{name} end of (Theta)_beta at theta={end:.6g}")
    if not parts:
        return ""
    inner = dom.lo > full.lo or dom.hi < full.hi
    return ("(Theta)_beta is cut inside Theta: " if inner else "finite ends: ") + ", ".join(parts)


def example_ig_reference_forms(beta: float, t: float, m0: float) -> dict:
    """Closed-form candidates for the inverse-Gaussian example, for reporting only.

    With ``r = beta/(beta - 1)`` the candidates are ``(Theta)_beta = ]-r^2/2, 0[``
    and ``1/C = -(beta/t)[1 - exp(-t m0 r^2/2 + t r - t r^2/2)] - (1 + beta m0)/(t/beta - t m0 r^2/2)``.
    They are returned next to the values computed from ``1 + beta k' > 0`` and
    by quadrature; nothing else in the package uses them.
    """
    model = make_model(ExampleIG())
    dom = theta_beta_set(model, beta)
    prior = normalize(
        PriorKind.GENERALIZED_NATURAL if beta else PriorKind.STANDARD_NATURAL, HyperParams(t, m0, beta), model
    )
    out = {"theta_lo": dom.lo, "inv_normalizer": math.exp(-prior.log_normalizer)}
    if beta in (0.0, 1.0):
        out.update(ref_theta_lo=math.nan, ref_inv_normalizer=math.nan)
        return out
    r = beta / (beta - 1.0)
    out["ref_theta_lo"] = -0.5 * r * r
    with np.errstate(all="ignore"):
        out["ref_inv_normalizer"] = float(
            -beta / t * (1.0 - np.exp(-t * m0 / 2 * r * r + t * r - t / 2 * r * r))
            - (1.0 + beta * m0) / (t / beta - t * m0 / 2 * r * r)
        )
    return out


# ---------------------------------------------------------------------------
# Posterior checks
# ---------------------------------------------------------------------------


def _data_theta(model, beta, m0):
    return float(psi(model, m0))


def posterior_theta_grid(model, beta, n=100):
    return psi(model, geometric_grid(m_beta_set(model, beta), n, clamp=1e-2, span=1e2))


def check_conjugacy(model: CumulantModel, beta: float, t: float, m0: float, ns=(1, 5), seed: int = 1729) -> CheckReport:
    """Bayes posterior (own quadrature) against the updated prior, sup density gap."""
    state = PosteriorState(HyperParams(t, m0, beta), model)
    theta = posterior_theta_grid(model, beta)
    worst = 0.0
    notes = []
    for i, n in enumerate(ns):
        try:
            x = sample_observations(model, beta, _data_theta(model, beta, m0), n, seed + i)
        except NotImplementedError:
            # no sampler for this law: use fixed points inside the observation range
            x = np.resize(linearity_xbars(model, beta, m0, max(n, 2)), n)
            notes.append(f"n={n}: synthetic observations")
        data = DataBatch.from_values(x)
        bayes = BayesPosterior(state, data)
        upd = update(state, data)
        gap = float(np.max(np.abs(np.exp(bayes.logpdf(theta)) - np.exp(upd.prior().logpdf(theta)))))
        worst = max(worst, gap)
        notes.append(f"n={n}: (t',m0')=({upd.hp.t:.8g}, {upd.hp.m0:.8g}), gap {gap:.3g}")
    return CheckReport.make("conjugacy", worst, 1e-8, f"{theta.size} theta points; batches n={list(ns)}", "; ".join(notes))


def linearity_xbars(model, beta, m0, count=7):
    """Sample means spread over the observation means, centered on the prior guess."""
    mb = m_beta_set(model, beta)
    m = geometric_grid(mb, count + 2, clamp=5e-2, span=3.0)[1:-1]
    return mean_transport(m, beta) if beta != 0 else m


def check_linearity(model: CumulantModel, beta: float, t: float, m0: float, ns=(1, 2, 5), xbars=None) -> CheckReport:
    """Posterior functional against the closed form, and affinity in the sample mean."""
    state = PosteriorState(HyperParams(t, m0, beta), model)
    xbars = linearity_xbars(model, beta, m0) if xbars is None else np.asarray(xbars, dtype=float)
    worst_gap = worst_affine = worst_coef = 0.0
    for n in ns:
        vals = np.array([posterior_functional(state, DataBatch.from_summary(n, xb)) for xb in xbars])
        closed = np.array([closed_form_functional(state, DataBatch.from_summary(n, xb)) for xb in xbars])
        worst_gap = max(worst_gap, float(np.max(np.abs(vals - closed))))
        slope, intercept = np.polyfit(xbars, vals, 1)
        worst_affine = max(worst_affine, float(np.max(np.abs(vals - (slope * xbars + intercept)))))
        denom = t * (1.0 + beta * m0) + n
        worst_coef = max(worst_coef, abs(slope - n / denom), abs(intercept - t * m0 / denom))
    notes = f"closed-form gap {worst_gap:.3g}; affine deviation {worst_affine:.3g}; slope/intercept gap {worst_coef:.3g}"
    cut = _cut_notes(model, beta)
    if cut:
        notes += "; " + cut
    return CheckReport.make(
        "linearity",
        max(worst_gap, worst_affine, worst_coef),
        1e-6,
        f"n={list(ns)}; xbar in [{xbars[0]:.6g}, {xbars[-1]:.6g}] ({xbars.size} values)",
        notes,
    )


# ---------------------------------------------------------------------------
# Group law and self-consistency
# ---------------------------------------------------------------------------

GROUP_PAIRS = ((0.3, 0.4), (-0.2, 0.5), (1.0, -1.0))


def _group_grid(base_means, beta, beta2, n=200):
    lo = base_means.lo if math.isfinite(base_means.lo) else -5.0
    hi = base_means.hi if math.isfinite(base_means.hi) else 5.0
    m = np.linspace(-5.0, 5.0, n)
    ok = 1 + beta * m > 1e-6
    ok &= 1 + (beta + beta2) * m > 1e-6
    with np.errstate(all="ignore"):
        m1 = m / (1 + beta * m)
        ok &= 1 + beta2 * m1 > 1e-6
        inner = m / (1 + (beta + beta2) * m)
    ok &= base_means.contains(inner) & (inner > lo) & (inner < hi)
    return m[ok]


def check_group_law(spec: Union[Quadratic, str], pairs=GROUP_PAIRS) -> CheckReport:
    """``T_beta T_beta' = T_{beta + beta'}`` on the variance function."""
    if isinstance(spec, str):
        spec = make_model(spec).spec
    base_means = make_model(spec).means
    V = quadratic_variance(spec)
    worst = 0.0
    sizes = []
    for beta, beta2 in pairs:
        m = _group_grid(base_means, beta, beta2)
        sizes.append(m.size)
        inner = lambda x, b2=beta2: variance_tbeta(V, b2, x)
        lhs = variance_tbeta(inner, beta, m)
        rhs = variance_tbeta(V, beta + beta2, m)
        worst = max(worst, float(np.max(np.abs(lhs - rhs) / np.maximum(1.0, np.abs(rhs)))))
    return CheckReport.make(
        f"group-law[{spec}]", worst, 1e-10, f"pairs {list(pairs)}; grid sizes {sizes}", "relative to max(1, |V|)"
    )


def check_group_law_model(model: CumulantModel, pairs=GROUP_PAIRS) -> CheckReport:
    """Group law for an arbitrary family's variance function (evaluated through its chart)."""
    V = lambda m: chart_at_mean(model, m).k2
    worst = 0.0
    sizes = []
    for beta, beta2 in pairs:
        m = _group_grid(model.means, beta, beta2)
        sizes.append(m.size)
        inner = lambda x, b2=beta2: variance_tbeta(V, b2, x)
        lhs = variance_tbeta(inner, beta, m)
        rhs = variance_tbeta(V, beta + beta2, m)
        worst = max(worst, float(np.max(np.abs(lhs - rhs) / np.maximum(1.0, np.abs(rhs)))))
    return CheckReport.make(
        "group-law", worst, 1e-10, f"pairs {list(pairs)}; grid sizes {sizes}", "relative to max(1, |V|)"
    )


def impostor_variance(m):
    return 1.0 + np.asarray(m, dtype=float) ** 4


def impostor_grid(n: int = 601, half_width: float = 3.0) -> VarianceGrid:
    """Raw values of the quartic variance ``1 + m^4`` on a uniform grid."""
    m = np.linspace(-half_width, half_width, n)
    return VarianceGrid(m, impostor_variance(m), name="quartic-impostor")


def impostor_model():
    """A family with quartic variance, built from the variance function alone."""
    return model_from_variance(impostor_variance, "quartic-impostor")


__all__ = [
    "CheckReport",
    "AbcFit",
    "VarianceGrid",
    "fit_abc",
    "beta_scan",
    "fit_grid",
    "transported_coefficients",
    "check_quadratic_exp_form",
    "monge_ampere_residual",
    "check_monge_ampere",
    "cubic_polynomial",
    "fourth_difference_ratio",
    "check_cubic_reconstruction",
    "t2_map",
    "t2_inverse",
    "check_T2_inclusion",
    "check_dy_identity",
    "check_prop3",
    "example_ig_reference_forms",
    "boundary_weight",
    "check_conjugacy",
    "check_linearity",
    "linearity_xbars",
    "check_group_law",
    "check_group_law_model",
    "GROUP_PAIRS",
    "impostor_variance",
    "impostor_grid",
    "impostor_model",
]
