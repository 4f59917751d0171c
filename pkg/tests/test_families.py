import math

import numpy as np
import pytest
from scipy import integrate as sp_integrate
from scipy import special, stats

from cubic_nef.exceptions import InvalidParameter, NotInJorgensenSet, OutOfDomain, UnknownBaseDensity
from cubic_nef.families import (
    CubicViaTBeta,
    ExampleIG,
    Quadratic,
    QuadraticKind,
    catalog,
    jorgensen_power,
    log_density,
    make_model,
    mean_domain,
    mean_domain_limits,
    parse_family,
    psi,
    psi_numeric,
    quadratic_variance,
    sample_family,
    variance,
)
from cubic_nef.numerics import fd_derivative, geometric_grid, rng_stream

LOG_2PI = math.log(2 * math.pi)
INF = math.inf

FAMILIES = [
    "gaussian",
    "poisson",
    "gamma:p=1",
    "gamma:p=2.5",
    "binomial:N=5",
    "negative-binomial:r=2",
    "hyperbolic",
    "example-ig",
]


def theta_grid(model, n=20):
    return psi(model, geometric_grid(model.means, n, clamp=1e-2, span=1e2))


# ---------------------------------------------------------------------------
# descriptors
# ---------------------------------------------------------------------------


def test_parse_family_roundtrip():
    assert parse_family("gaussian") == Quadratic(QuadraticKind.GAUSSIAN)
    assert parse_family("gamma:p=2") == Quadratic(QuadraticKind.GAMMA, 2.0)
    assert parse_family("poisson@0.5") == CubicViaTBeta(Quadratic(QuadraticKind.POISSON), 0.5)
    assert parse_family("example-ig") == ExampleIG()
    assert parse_family("gaussian@0") == Quadratic(QuadraticKind.GAUSSIAN)
    for text in FAMILIES:
        assert str(parse_family(text)) == text


@pytest.mark.parametrize("bad", ["nope", "gamma:q=2", "gamma:p=-1", "binomial:N=2.5", "example-ig@1", "gaussian:p=1"])
def test_parse_family_rejects(bad):
    with pytest.raises(InvalidParameter):
        parse_family(bad)


def test_catalog_has_six_kinds():
    kinds = {m.spec.kind for m in catalog()}
    assert kinds == set(QuadraticKind)


# ---------------------------------------------------------------------------
# make_model examples
# ---------------------------------------------------------------------------


def test_example_ig_cumulant_value():
    assert make_model("example-ig").k(-0.5) == pytest.approx(-0.5, abs=1e-15)


def test_gaussian_cumulant_matches_laplace_integral():
    lam = 2.0
    ref, _ = sp_integrate.quad(lambda x: math.exp(lam * x - x * x / 2) / math.sqrt(2 * math.pi), -INF, INF)
    assert make_model("gaussian").k(lam) == pytest.approx(math.log(ref), abs=1e-10)
    assert make_model("gaussian").k(lam) == pytest.approx(2.0, abs=1e-15)


def test_poisson_cumulant_matches_laplace_sum():
    x = np.arange(0, 60)
    ref = np.sum(np.exp(-special.gammaln(x + 1)))
    assert make_model("poisson").k(0.0) == pytest.approx(math.log(ref), abs=1e-12)
    assert make_model("poisson").k(0.0) == pytest.approx(1.0, abs=1e-15)


def test_hyperbolic_cumulant_matches_laplace_integral():
    # h(1, x) = 1 / (2 cosh(pi x / 2))
    for lam in (-1.2, 0.0, 0.7):
        # e^{lam x} / (2 cosh(pi x/2)) = e^{lam x - pi|x|/2} / (1 + e^{-pi|x|})
        f = lambda x: math.exp(lam * x - math.pi * abs(x) / 2) / (1 + math.exp(-math.pi * abs(x)))
        ref, _ = sp_integrate.quad(f, -INF, INF)
        assert make_model("hyperbolic").k(lam) == pytest.approx(math.log(ref), abs=1e-9)


def test_example_ig_cumulant_matches_laplace_integral():
    # the generating measure is the shifted Levy density a (x+a)^{-3/2} e^{-a^2/(2(x+a))}/sqrt(2 pi)
    dens = lambda x: (1 + x) ** -1.5 * math.exp(-1.0 / (2 * (1 + x))) / math.sqrt(2 * math.pi)
    for th in (-2.0, -0.5, -0.05):
        ref, _ = sp_integrate.quad(lambda x: math.exp(th * x) * dens(x), -1, INF, limit=200)
        assert make_model("example-ig").k(th) == pytest.approx(math.log(ref), abs=1e-8)


def test_make_model_rejects_bad_spec():
    with pytest.raises(InvalidParameter):
        make_model(42)


# ---------------------------------------------------------------------------
# mean domain, psi, variance
# ---------------------------------------------------------------------------


@pytest.mark.parametrize(
    "text, lo, hi",
    [("gaussian", -INF, INF), ("example-ig", -1.0, INF), ("poisson", 0.0, INF), ("binomial:N=5", 0.0, 5.0)],
)
def test_mean_domain(text, lo, hi):
    dom = mean_domain(make_model(text))
    assert (dom.lo, dom.hi) == (lo, hi)


@pytest.mark.parametrize("text", FAMILIES)
def test_mean_domain_matches_limits_of_k1(text):
    model = make_model(text)
    lo, hi = mean_domain_limits(model)
    assert lo == pytest.approx(model.means.lo, abs=1e-6)
    assert hi == pytest.approx(model.means.hi, abs=1e-6)


def test_psi_examples():
    assert psi(make_model("example-ig"), 0.0) == pytest.approx(-0.5, abs=1e-15)
    assert psi(make_model("gaussian"), 3.0) == pytest.approx(3.0, abs=1e-15)
    assert psi(make_model("poisson"), 1.0) == pytest.approx(0.0, abs=1e-15)


def test_psi_out_of_domain():
    with pytest.raises(OutOfDomain):
        psi(make_model("poisson"), -1.0)
    with pytest.raises(OutOfDomain):
        variance(make_model("example-ig"), -1.0)


@pytest.mark.parametrize("text", FAMILIES)
def test_psi_round_trip(text):
    model = make_model(text)
    m = geometric_grid(model.means, 100)
    err = np.abs(model.k1(psi(model, m)) - m)
    assert np.max(err / np.maximum(1.0, np.abs(m))) <= 1e-10


@pytest.mark.parametrize("text", FAMILIES)
def test_psi_numeric_agrees_with_closed_form(text):
    model = make_model(text)
    for m in geometric_grid(model.means, 12, clamp=1e-2, span=1e2):
        assert psi_numeric(model, float(m)) == pytest.approx(psi(model, m), rel=1e-9, abs=1e-10)


def test_variance_examples():
    ig = make_model("example-ig")
    assert variance(ig, 0.0) == pytest.approx(1.0, abs=1e-14)
    assert variance(ig, 1.0) == pytest.approx(8.0, abs=1e-13)
    assert variance(make_model("gaussian"), -2.0) == 1.0


@pytest.mark.parametrize("text", FAMILIES)
def test_variance_is_inverse_of_psi_derivative(text):
    model = make_model(text)
    for m in geometric_grid(model.means, 25, clamp=5e-2, span=20.0):
        step = 1e-4 * max(abs(m), 1.0)
        if model.means.is_finite or math.isfinite(model.means.lo):
            step = min(step, 0.2 * (m - model.means.lo))
        if math.isfinite(model.means.hi):
            step = min(step, 0.2 * (model.means.hi - m))
        d = fd_derivative(lambda v: float(psi(model, v)), float(m), 1, step=step)
        assert variance(model, m) == pytest.approx(1.0 / d, rel=1e-5)


@pytest.mark.parametrize("text", FAMILIES[:-1])
def test_quadratic_variance_closed_form(text):
    model = make_model(text)
    m = geometric_grid(model.means, 100, clamp=1e-2, span=1e2)
    V = variance(model, m)
    np.testing.assert_allclose(V, quadratic_variance(model.spec)(m), rtol=1e-10)
    coef = np.polyfit(m, V, 2)
    assert np.max(np.abs(np.polyval(coef, m) - V) / np.maximum(1.0, np.abs(V))) <= 1e-9


def test_example_ig_variance_is_cubic():
    m = np.linspace(-0.9, 5, 40)
    np.testing.assert_allclose(variance(make_model("example-ig"), m), (1 + m) ** 3, rtol=1e-12)


# ---------------------------------------------------------------------------
# cumulant invariants
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("text", FAMILIES)
def test_k_strictly_convex_and_k1_increasing(text):
    model = make_model(text)
    th = theta_grid(model, 60)
    assert np.all(model.k2(th) > 0)
    assert np.all(np.diff(model.k1(th)) > 0)


@pytest.mark.parametrize("text", FAMILIES)
def test_k_derivatives_match_finite_differences(text):
    model = make_model(text)
    dom = model.theta_domain
    for th in theta_grid(model, 20):
        room = min(th - dom.lo, dom.hi - th)
        step = min(1e-3 * max(1.0, abs(th)), 1e-2 * room)
        k1 = fd_derivative(lambda x: float(model.k(x)), float(th), 1, step=step)
        k2 = fd_derivative(lambda x: float(model.k1(x)), float(th), 1, step=step)
        assert k1 == pytest.approx(float(model.k1(th)), rel=1e-5, abs=1e-8)
        assert k2 == pytest.approx(float(model.k2(th)), rel=1e-5)


@pytest.mark.parametrize("text", FAMILIES)
def test_jorgensen_set_stable_under_addition(text):
    lam = make_model(text).jorgensen
    pts = [0.3, 1.0, 2.0, 2.5, 7.0]
    for a in pts:
        for b in pts:
            if lam.contains(a) and lam.contains(b):
                assert lam.contains(a + b)


# ---------------------------------------------------------------------------
# densities
# ---------------------------------------------------------------------------


def test_log_density_examples():
    assert log_density(make_model("gaussian"), 0.0, 0.0) == pytest.approx(-0.5 * LOG_2PI, abs=1e-12)
    assert log_density(make_model("poisson"), 0.0, 0.0) == pytest.approx(-1.0, abs=1e-15)


def test_example_ig_log_density_matches_inverse_gaussian():
    # 1 + X is inverse Gaussian with mean (-2 theta)^(-1/2) and shape 1
    ig = make_model("example-ig")
    for th in (-0.5, -2.0, -0.1):
        mu = (-2 * th) ** -0.5
        for x in (-0.5, 0.0, 1.3):
            ref = stats.invgauss(mu, scale=1.0).logpdf(1 + x)
            assert log_density(ig, th, x) == pytest.approx(ref, abs=1e-12)
    # at theta=-1/2, x=0 the value is -log(2 pi)/2 - 1/2 + 1/2
    assert log_density(ig, -0.5, 0.0) == pytest.approx(-0.5 * LOG_2PI, abs=1e-12)


def _density_mass(model, th, moment=0):
    sup = model.support
    if sup.base_measure == "counting":
        m, v = float(model.k1(th)), float(model.k2(th))
        x = sup.lattice(limit=int(400 + 40 * (m + math.sqrt(v))))
        w = np.exp(log_density(model, th, x))
        return float(np.sum(w * x**moment))
    lo, hi = sup.interval.lo, sup.interval.hi
    f = lambda x: math.exp(log_density(model, th, x)) * x**moment
    val, _ = sp_integrate.quad(f, lo, hi, epsabs=1e-12, epsrel=1e-11, limit=400)
    return val


@pytest.mark.parametrize("text", FAMILIES)
def test_density_normalizes_and_has_mean_k1(text):
    model = make_model(text)
    for th in theta_grid(model, 5):
        assert _density_mass(model, th) == pytest.approx(1.0, abs=1e-7)
        assert _density_mass(model, th, 1) == pytest.approx(float(model.k1(th)), abs=1e-6, rel=1e-6)


def test_log_density_unknown_base():
    with pytest.raises(UnknownBaseDensity):
        log_density(make_model("gaussian@0.5"), -0.2, 0.0)


def test_log_density_out_of_domain():
    with pytest.raises(OutOfDomain):
        log_density(make_model("gamma:p=1"), 0.5, 1.0)


# ---------------------------------------------------------------------------
# Jorgensen powers
# ---------------------------------------------------------------------------


def test_jorgensen_power_examples():
    assert variance(jorgensen_power(make_model("gaussian"), 2.0), 0.0) == pytest.approx(2.0)
    p3 = jorgensen_power(make_model("poisson"), 3.0)
    assert (p3.means.lo, p3.means.hi) == (0.0, INF)
    g2 = jorgensen_power(make_model("gamma:p=1"), 2.0)
    th = psi(g2, 2.0)
    fd = fd_derivative(lambda x: 2.0 * float(make_model("gamma:p=1").k(x)), th, 2, step=1e-3)
    assert variance(g2, 2.0) == pytest.approx(2.0, rel=1e-12)
    assert variance(g2, 2.0) == pytest.approx(fd, rel=1e-6)


def test_jorgensen_power_scaling_law():
    base = make_model("negative-binomial:r=2")
    a = 1.7
    pw = jorgensen_power(base, a)
    m = np.array([0.3, 1.0, 4.0])
    np.testing.assert_allclose(variance(pw, m), a * variance(base, m / a), rtol=1e-12)


def test_jorgensen_power_density_matches_base_power():
    g = make_model("gamma:p=1")
    pw = jorgensen_power(g, 2.5)
    x = np.array([0.5, 1.0, 3.0])
    np.testing.assert_allclose(log_density(pw, -1.0, x), stats.gamma(2.5).logpdf(x), atol=1e-12)


def test_jorgensen_power_not_in_set():
    with pytest.raises(NotInJorgensenSet):
        jorgensen_power(make_model("binomial:N=5"), 0.5)
    with pytest.raises(NotInJorgensenSet):
        jorgensen_power(make_model("gaussian"), -1.0)


# ---------------------------------------------------------------------------
# samplers
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("text", [f for f in FAMILIES if f != "hyperbolic"])
def test_sampler_mean_and_variance(text):
    model = make_model(text)
    th = float(psi(model, geometric_grid(model.means, 5, clamp=0.1, span=3.0)[2]))
    n = 40_000
    x = sample_family(model, th, n, rng_stream(99))
    m, v = float(model.k1(th)), float(model.k2(th))
    assert abs(x.mean() - m) < 5 * math.sqrt(v / n)
    assert x.var() == pytest.approx(v, rel=0.1)


def test_example_ig_sampler_distribution():
    th = -0.3
    x = sample_family(make_model("example-ig"), th, 20_000, rng_stream(5))
    mu = (-2 * th) ** -0.5
    ks = stats.kstest(1 + x, stats.invgauss(mu, scale=1.0).cdf)
    assert ks.pvalue > 1e-3


def test_sampler_deterministic():
    model = make_model("poisson")
    a = sample_family(model, 0.3, 50, rng_stream(1))
    b = sample_family(model, 0.3, 50, rng_stream(1))
    assert np.array_equal(a, b)


def test_hyperbolic_has_no_sampler():
    with pytest.raises(NotImplementedError):
        sample_family(make_model("hyperbolic"), 0.1, 5, rng_stream(0))
