import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate as sp_integrate

from cubic_nef.exceptions import InvalidBracket, NonConvergence, NonFinite
from cubic_nef.numerics import (
    EMPTY,
    Interval,
    Tolerance,
    fd_derivative,
    find_root,
    geometric_grid,
    integrate,
    rng_stream,
)

INF = math.inf
TOL = Tolerance(1e-12, 1e-12, 2000)


# ---------------------------------------------------------------------------
# intervals and tolerances
# ---------------------------------------------------------------------------


def test_interval_rejects_bad_endpoints():
    with pytest.raises(ValueError):
        Interval(1.0, 1.0)
    with pytest.raises(ValueError):
        Interval(-INF, 0.0, lo_closed=True)
    with pytest.raises(ValueError):
        Interval(math.nan, 1.0)


def test_interval_contains_and_intersect():
    a = Interval(-1.0, INF)
    b = Interval(-INF, 1.0)
    c = a.intersect(b)
    assert (c.lo, c.hi) == (-1.0, 1.0)
    assert not c.contains(-1.0) and c.contains(0.0)
    assert Interval(0.0, 1.0).intersect(Interval(2.0, 3.0)) is EMPTY
    assert not EMPTY


def test_tolerance_invariants():
    with pytest.raises(ValueError):
        Tolerance(0.0, 0.0)
    with pytest.raises(ValueError):
        Tolerance(-1e-3, 1e-3)
    with pytest.raises(ValueError):
        Tolerance(1e-3, 1e-3, 0)


# ---------------------------------------------------------------------------
# integrate
# ---------------------------------------------------------------------------


def test_integrate_identity_on_unit_interval():
    res = integrate(lambda x: x, Interval(0.0, 1.0), TOL)
    assert res.value == pytest.approx(0.5, abs=1e-15)
    assert res.error_estimate >= 0 and res.subdivisions_used >= 1


def test_integrate_gaussian_whole_line():
    res = integrate(lambda x: np.exp(-0.5 * x * x), Interval.real_line(), TOL)
    assert res.value == pytest.approx(math.sqrt(2 * math.pi), abs=1e-10)
    assert res.value == pytest.approx(2.5066282746, abs=1e-10)


def test_integrate_exponential_half_line():
    res = integrate(lambda x: np.exp(-x), Interval(0.0, INF), TOL)
    assert res.value == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize(
    "f, dom, a, b",
    [
        (lambda x: np.exp(-np.abs(x - 3.0)), Interval.real_line(), -INF, INF),
        (lambda x: 1.0 / (1.0 + x * x), Interval(-INF, 2.0), -INF, 2.0),
        (lambda x: x ** -0.5, Interval(0.0, 1.0), 0.0, 1.0),
        (lambda x: np.log(x) ** 2, Interval(0.0, 1.0), 0.0, 1.0),
    ],
)
def test_integrate_against_scipy_quad(f, dom, a, b):
    ref, _ = sp_integrate.quad(lambda x: float(f(np.asarray(x))), a, b, epsabs=1e-13, epsrel=1e-13, limit=500)
    assert integrate(f, dom, Tolerance(1e-12, 1e-12, 4000)).value == pytest.approx(ref, rel=1e-9, abs=1e-11)


def test_integrate_peaked_integrand_with_hints():
    # a narrow bump far from the origin needs the location hint
    c, s = 50.0, 1e-3
    f = lambda x: np.exp(-0.5 * ((x - c) / s) ** 2)
    res = integrate(f, Interval.real_line(), TOL, center=c, scale=s)
    assert res.value == pytest.approx(s * math.sqrt(2 * math.pi), rel=1e-10)


def test_integrate_non_finite_raises():
    with pytest.raises(NonFinite):
        integrate(lambda x: np.where(x > 0.5, np.nan, 1.0), Interval(0.0, 1.0), TOL)


def test_integrate_divergent_raises():
    with pytest.raises(NonConvergence):
        integrate(lambda x: 1.0 / x, Interval(0.0, 1.0), Tolerance(1e-12, 1e-12, 50))


def test_integrate_scalar_callable():
    res = integrate(lambda x: math.cos(x), Interval(0.0, math.pi / 2), TOL, vectorized=False)
    assert res.value == pytest.approx(1.0, abs=1e-13)


poly = st.lists(st.floats(-5, 5, allow_nan=False), min_size=1, max_size=8)


@settings(max_examples=60, deadline=None)
@given(poly, poly, st.floats(-3, 3), st.floats(-3, 3))
def test_integrate_is_linear(p, q, a, b):
    dom = Interval(-1.0, 2.0)
    fp = lambda x: np.polyval(p, x)
    fq = lambda x: np.polyval(q, x)
    lhs = integrate(lambda x: a * fp(x) + b * fq(x), dom, TOL).value
    rhs = a * integrate(fp, dom, TOL).value + b * integrate(fq, dom, TOL).value
    assert abs(lhs - rhs) <= 10 * TOL.abs_tol + 1e-12 * max(1.0, abs(rhs))


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-10, 10, allow_nan=False), min_size=4, max_size=4), st.floats(-4, 0), st.floats(0.1, 4))
def test_integrate_cubic_exact(coef, lo, width):
    hi = lo + width
    P = np.polyint(coef)
    exact = np.polyval(P, hi) - np.polyval(P, lo)
    got = integrate(lambda x: np.polyval(coef, x), Interval(lo, hi), TOL).value
    assert got == pytest.approx(exact, abs=1e-11 * max(1.0, abs(exact)))


@settings(max_examples=30, deadline=None)
@given(st.floats(0.2, 5.0))
def test_half_line_matches_explicit_substitution(rate):
    f = lambda x: np.exp(-rate * x)
    direct = integrate(f, Interval(0.0, INF), TOL).value
    # x = u / (1 - u), dx = du / (1 - u)^2
    g = lambda u: f(u / (1.0 - u)) / (1.0 - u) ** 2
    mapped = integrate(g, Interval(0.0, 1.0), Tolerance(1e-13, 1e-12, 4000)).value
    assert direct == pytest.approx(1.0 / rate, rel=1e-10)
    assert direct == pytest.approx(mapped, rel=1e-9)


# ---------------------------------------------------------------------------
# find_root
# ---------------------------------------------------------------------------


@pytest.mark.parametrize(
    "f, lo, hi, root",
    [
        (lambda x: x - 1.0, 0.0, 2.0, 1.0),
        (lambda x: x * x - 2.0, 1.0, 2.0, 1.41421356),
        (lambda x: math.exp(x) - 1.0, -1.0, 1.0, 0.0),
    ],
)
def test_find_root_examples(f, lo, hi, root):
    x = find_root(f, Interval(lo, hi, True, True), Tolerance(1e-14, 1e-14))
    assert x == pytest.approx(root, abs=1e-8)
    assert lo <= x <= hi


def test_find_root_newton_path():
    calls = []

    def f(x):
        calls.append(x)
        return x ** 3 - 5.0

    x = find_root(f, Interval(0.0, 5.0), Tolerance(1e-14, 1e-14), fprime=lambda x: 3 * x * x)
    assert x == pytest.approx(5.0 ** (1 / 3), abs=1e-12)
    assert len(calls) < 40


def test_find_root_bad_bracket():
    with pytest.raises(InvalidBracket):
        find_root(lambda x: x * x + 1.0, Interval(-1.0, 1.0))
    with pytest.raises(InvalidBracket):
        find_root(lambda x: x, Interval(-INF, 1.0))


@settings(max_examples=50, deadline=None)
@given(st.floats(-50, 50), st.floats(0.01, 10))
def test_find_root_stays_in_bracket(r, w):
    f = lambda x: math.tanh(x - r)
    lo, hi = r - w, r + 2 * w
    x = find_root(f, Interval(lo, hi))
    assert lo <= x <= hi
    assert abs(x - r) < 1e-8


# ---------------------------------------------------------------------------
# fd_derivative
# ---------------------------------------------------------------------------


def test_fd_derivative_examples():
    sq = lambda x: x * x
    assert fd_derivative(sq, 3.0, 1) == pytest.approx(6.0, abs=1e-9)
    assert fd_derivative(sq, 3.0, 2) == pytest.approx(2.0, abs=1e-6)
    k = lambda th: -th - math.sqrt(-2.0 * th)
    assert fd_derivative(k, -0.5, 1, step=1e-3) == pytest.approx(0.0, abs=1e-9)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-10, 10, allow_nan=False), min_size=4, max_size=4), st.floats(-3, 3))
def test_fd_derivative_exact_on_cubics(coef, x):
    got = fd_derivative(lambda y: np.polyval(coef, y), x, 1, step=1e-3)
    assert got == pytest.approx(np.polyval(np.polyder(coef), x), abs=1e-9 * max(1.0, max(map(abs, coef))))


def test_fd_derivative_non_finite():
    with pytest.raises(NonFinite):
        fd_derivative(lambda x: math.log(x) if x > 0 else math.nan, 0.001, 1, step=1e-3)


# ---------------------------------------------------------------------------
# rng_stream
# ---------------------------------------------------------------------------


def test_rng_determinism_and_range():
    a = rng_stream(1729).uniform(1000)
    b = rng_stream(1729).uniform(1000)
    assert np.array_equal(a, b)
    assert np.all((a > 0) & (a < 1))


def test_rng_mean():
    u = rng_stream(12345).uniform(100_000)
    assert abs(u.mean() - 0.5) < 0.01


def test_rng_distinct_seeds():
    assert not np.array_equal(rng_stream(7).uniform(10), rng_stream(8).uniform(10))


def test_rng_frozen_values():
    # PCG64 output is fixed by the seed, so the first draws are a stable contract
    u = rng_stream(1729).uniform(3)
    ref = (np.random.PCG64(1729).random_raw(3) >> np.uint64(11)).astype(float) * 2.0**-53 + 2.0**-54
    assert np.array_equal(u, ref)


def test_rng_iter_matches_batch():
    s = rng_stream(3)
    first = [next(iter(s)) for _ in range(5)]
    assert np.array_equal(first, rng_stream(3).uniform(5))


def test_rng_seed_validation():
    with pytest.raises(ValueError):
        rng_stream(-1)
    with pytest.raises(ValueError):
        rng_stream(2**64)


def test_geometric_grid_stays_inside():
    for dom in (Interval(0.0, 1.0), Interval(-1.0, INF), Interval(-INF, 2.0), Interval.real_line()):
        g = geometric_grid(dom, 50)
        assert g.size == 50 and np.all(dom.contains(g)) and np.all(np.diff(g) > 0)
