"""Shared numerical infrastructure.

Adaptive Gauss-Kronrod quadrature with rational maps for improper
domains, a safeguarded Newton/bisection root finder, five-point finite
differences, and a seeded uniform stream built on the PCG64 generator.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.special import ndtri

from .exceptions import InvalidBracket, NonConvergence, NonFinite, OutOfDomain

__all__ = [
    "Interval",
    "EMPTY",
    "EmptyInterval",
    "Tolerance",
    "DEFAULT_TOL",
    "QuadResult",
    "integrate",
    "find_root",
    "fd_derivative",
    "RngStream",
    "rng_stream",
]

INF = math.inf


# ---------------------------------------------------------------------------
# Intervals
# ---------------------------------------------------------------------------


class EmptyInterval:
    """The empty set. A singleton, falsy, contains nothing."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __bool__(self):
        return False

    def __repr__(self):
        return "EMPTY"

    def contains(self, x):
        return np.zeros(np.shape(x), dtype=bool) if np.ndim(x) else False

    def intersect(self, other):
        return self

    def describe(self):
        return "empty"


EMPTY = EmptyInterval()


@dataclass(frozen=True)
class Interval:
    """A real interval with possibly infinite endpoints.

    Infinite endpoints are always open. Most intervals in this package are
    open domains (natural-parameter and mean domains).
    """

    lo: float
    hi: float
    lo_closed: bool = False
    hi_closed: bool = False

    def __post_init__(self):
        lo, hi = float(self.lo), float(self.hi)
        if math.isnan(lo) or math.isnan(hi):
            raise ValueError("interval endpoints must not be NaN")
        if not lo < hi:
            raise ValueError(f"interval requires lo < hi, got ({lo}, {hi})")
        if (math.isinf(lo) and self.lo_closed) or (math.isinf(hi) and self.hi_closed):
            raise ValueError("infinite endpoints must be open")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def real_line(cls):
        return cls(-INF, INF)

    @property
    def is_finite(self):
        return math.isfinite(self.lo) and math.isfinite(self.hi)

    @property
    def width(self):
        return self.hi - self.lo

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        left = x >= self.lo if self.lo_closed else x > self.lo
        right = x <= self.hi if self.hi_closed else x < self.hi
        out = left & right
        return bool(out) if out.ndim == 0 else out

    def intersect(self, other):
        if not other:
            return EMPTY
        if other.lo > self.lo or (other.lo == self.lo and not other.lo_closed):
            lo, lo_closed = other.lo, other.lo_closed
        else:
            lo, lo_closed = self.lo, self.lo_closed
        if other.hi < self.hi or (other.hi == self.hi and not other.hi_closed):
            hi, hi_closed = other.hi, other.hi_closed
        else:
            hi, hi_closed = self.hi, self.hi_closed
        if lo < hi:
            return Interval(lo, hi, lo_closed, hi_closed)
        return EMPTY

    def scaled(self, alpha):
        if alpha <= 0:
            raise ValueError("scale factor must be positive")
        return Interval(self.lo * alpha, self.hi * alpha, self.lo_closed, self.hi_closed)

    def midpoint(self):
        """A representative interior point (midpoint, or offset from a finite end)."""
        if self.is_finite:
            return 0.5 * (self.lo + self.hi)
        if math.isfinite(self.lo):
            return self.lo + max(1.0, abs(self.lo))
        if math.isfinite(self.hi):
            return self.hi - max(1.0, abs(self.hi))
        return 0.0

    def describe(self):
        left = "[" if self.lo_closed else "("
        right = "]" if self.hi_closed else ")"
        return f"{left}{_fmt(self.lo)}, {_fmt(self.hi)}{right}"

    def as_list(self):
        return [self.lo, self.hi]


def _fmt(x):
    if math.isinf(x):
        return "-inf" if x < 0 else "inf"
    return repr(float(x))


# ---------------------------------------------------------------------------
# Tolerances
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Tolerance:
    abs_tol: float = 1e-10
    rel_tol: float = 1e-10
    max_subdivisions: int = 2000

    def __post_init__(self):
        if self.abs_tol < 0 or self.rel_tol < 0:
            raise ValueError("tolerances must be non-negative")
        if self.abs_tol + self.rel_tol <= 0:
            raise ValueError("abs_tol + rel_tol must be positive")
        if int(self.max_subdivisions) < 1:
            raise ValueError("max_subdivisions must be a positive integer")


DEFAULT_TOL = Tolerance()


@dataclass(frozen=True)
class QuadResult:
    value: float
    error_estimate: float
    subdivisions_used: int


# ---------------------------------------------------------------------------
# Quadrature
# ---------------------------------------------------------------------------

# Kronrod 15-point nodes and weights; the Gauss 7-point rule is embedded
# at the odd-indexed nodes.
_XK = np.array(
    [
        0.991455371120812639206854697526329,
        0.949107912342758524526189684047851,
        0.864864423359769072789712788640926,
        0.741531185599394439863864773280788,
        0.586087235467691130294144845693013,
        0.405845151377397166906606412076961,
        0.207784955007898467600689403773245,
        0.000000000000000000000000000000000,
    ]
)
_WK = np.array(
    [
        0.022935322010529224963732008058970,
        0.063092092629978553290700663189204,
        0.104790010322250183839876322541518,
        0.140653259715525918745189590510238,
        0.169004726639267902826583426598550,
        0.190350578064785409913256402421014,
        0.204432940075298892414161999234649,
        0.209482141084727828012999174891714,
    ]
)
_WG = np.array(
    [
        0.129484966168869693270611432679082,
        0.279705391489276667901467771423780,
        0.381830050505118944950369775488975,
        0.417959183673469387755102040816327,
    ]
)
_NODES = np.concatenate([-_XK[:-1], _XK[::-1]])  # 15 nodes in [-1, 1]
_WK15 = np.concatenate([_WK[:-1], _WK[::-1]])
_WG15 = np.zeros(15)
_WG15[[1, 3, 5]] = _WG[:3]
_WG15[[13, 11, 9]] = _WG[:3]
_WG15[7] = _WG[3]


class _Piece:
    """A sub-domain together with the map from its parameter u to x."""

    __slots__ = ("kind", "a", "b", "origin", "scale")

    def __init__(self, kind, a, b, origin=0.0, scale=1.0):
        self.kind, self.a, self.b = kind, a, b
        self.origin, self.scale = origin, scale

    def map(self, u):
        if self.kind == "finite":
            return u, np.ones_like(u)
        if self.kind == "right":  # x = origin + s u/(1-u)
            w = 1.0 - u
            return self.origin + self.scale * u / w, self.scale / (w * w)
        if self.kind == "left":  # x = origin - s u/(1-u)
            w = 1.0 - u
            return self.origin - self.scale * u / w, self.scale / (w * w)
        # whole line: x = origin + s u/(1-u^2)
        w = 1.0 - u * u
        return self.origin + self.scale * u / w, self.scale * (1.0 + u * u) / (w * w)


def _gk15(f, piece, a, b):
    half = 0.5 * (b - a)
    u = 0.5 * (a + b) + half * _NODES
    with np.errstate(divide="ignore", invalid="ignore"):
        x, jac = piece.map(u)
    fx = np.asarray(f(x), dtype=float)
    if fx.shape != x.shape:
        fx = np.broadcast_to(fx, x.shape)
    if not np.all(np.isfinite(fx)):
        bad = x[~np.isfinite(fx)][0]
        raise NonFinite(f"integrand is not finite at x={bad!r}")
    # a node mapped onto an infinite end contributes nothing once f vanishes there
    with np.errstate(invalid="ignore"):
        g = np.where(fx == 0, 0.0, fx * jac)
    if not np.all(np.isfinite(g)):
        raise NonFinite(f"integrand times Jacobian is not finite on [{a!r}, {b!r}]")
    k15 = half * float(np.dot(_WK15, g))
    g7 = half * float(np.dot(_WG15, g))
    return k15, abs(k15 - g7)


def _build_pieces(domain, center, scale):
    lo, hi = domain.lo, domain.hi
    if center is None:
        if math.isfinite(lo) and math.isfinite(hi):
            return [_Piece("finite", lo, hi)]
        if math.isfinite(lo):
            return [_Piece("right", 0.0, 1.0, lo, 1.0)]
        if math.isfinite(hi):
            return [_Piece("left", 0.0, 1.0, hi, 1.0)]
        return [_Piece("line", -1.0, 1.0, 0.0, 1.0)]

    s = 1.0 if scale is None else float(scale)
    if not (s > 0 and math.isfinite(s)):
        raise ValueError("scale hint must be positive and finite")
    c = float(center)
    offsets = np.array([0.5, 1, 2, 4, 8, 16, 32], dtype=float) * s
    pts = np.concatenate([c - offsets[::-1], [c], c + offsets])
    pts = [p for p in pts if lo < p < hi]
    if not pts:
        return _build_pieces(domain, None, None)
    pieces = []
    tail = 8.0 * s
    if math.isfinite(lo):
        pieces.append(_Piece("finite", lo, pts[0]))
    else:
        pieces.append(_Piece("left", 0.0, 1.0, pts[0], tail))
    for p, q in zip(pts[:-1], pts[1:]):
        pieces.append(_Piece("finite", p, q))
    if math.isfinite(hi):
        pieces.append(_Piece("finite", pts[-1], hi))
    else:
        pieces.append(_Piece("right", 0.0, 1.0, pts[-1], tail))
    return pieces


def integrate(
    f: Callable,
    domain: Interval,
    tol: Optional[Tolerance] = None,
    *,
    center: Optional[float] = None,
    scale: Optional[float] = None,
    vectorized: bool = True,
) -> QuadResult:
    """Integrate ``f`` over ``domain`` by globally adaptive G7/K15 quadrature.

    Infinite ends are mapped onto finite parameter ranges through
    ``x = u/(1-u)`` (half lines) or ``x = u/(1-u^2)`` (the whole line).
    ``center`` and ``scale`` are optional location hints: the domain is
    pre-split at ``center +- scale * 2^j`` so that sharply peaked integrands
    are resolved from the first pass.

    ``f`` is called with numpy arrays of nodes unless ``vectorized`` is
    false. Raises :class:`NonConvergence` (carrying the partial
    :class:`QuadResult`) when the subdivision budget is exhausted and
    :class:`NonFinite` when the integrand misbehaves at a node.
    """
    tol = DEFAULT_TOL if tol is None else tol
    if not domain:
        return QuadResult(0.0, 0.0, 0)
    if not vectorized:
        scalar_f = f
        f = lambda x: np.array([scalar_f(float(v)) for v in np.ravel(x)]).reshape(np.shape(x))

    pieces = _build_pieces(domain, center, scale)
    heap = []
    total = 0.0
    total_err = 0.0
    counter = 0
    for idx, piece in enumerate(pieces):
        val, err = _gk15(f, piece, piece.a, piece.b)
        heapq.heappush(heap, (-err, counter, idx, piece.a, piece.b, val))
        counter += 1
        total += val
        total_err += err

    while True:
        if total_err <= max(tol.abs_tol, tol.rel_tol * abs(total)):
            break
        if len(heap) >= tol.max_subdivisions:
            vals = [item[5] for item in heap]
            errs = [-item[0] for item in heap]
            partial = QuadResult(math.fsum(vals), math.fsum(errs), len(heap))
            raise NonConvergence(
                f"quadrature did not converge in {tol.max_subdivisions} subdivisions "
                f"(value {partial.value!r}, error estimate {partial.error_estimate:.3e})",
                partial=partial,
            )
        neg_err, _, idx, a, b, val = heapq.heappop(heap)
        mid = 0.5 * (a + b)
        piece = pieces[idx]
        if not (a < mid < b):
            # interval collapsed to adjacent floats; keep its estimate
            heapq.heappush(heap, (0.0, counter, idx, a, b, val))
            counter += 1
            total_err += neg_err
            continue
        v1, e1 = _gk15(f, piece, a, mid)
        v2, e2 = _gk15(f, piece, mid, b)
        heapq.heappush(heap, (-e1, counter, idx, a, mid, v1))
        heapq.heappush(heap, (-e2, counter + 1, idx, mid, b, v2))
        counter += 2
        total += v1 + v2 - val
        total_err += e1 + e2 + neg_err

    value = math.fsum(item[5] for item in heap)
    error = math.fsum(-item[0] for item in heap)
    return QuadResult(value, error, len(heap))


# ---------------------------------------------------------------------------
# Root finding
# ---------------------------------------------------------------------------


def find_root(
    f: Callable[[float], float],
    bracket: Interval,
    tol: Optional[Tolerance] = None,
    fprime: Optional[Callable[[float], float]] = None,
    max_iter: int = 500,
) -> float:
    """Find a sign change of ``f`` inside a finite bracket.

    Newton steps are taken when ``fprime`` is supplied and the step lands
    strictly inside the current bracket while halving the residual;
    otherwise the bracket is bisected. Stops when ``|f(x)| <= abs_tol``,
    when the bracket is narrower than ``abs_tol``, or when it has shrunk
    to adjacent floating point numbers.
    """
    tol = DEFAULT_TOL if tol is None else tol
    lo, hi = bracket.lo, bracket.hi
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise InvalidBracket("root bracket must be finite")
    flo, fhi = float(f(lo)), float(f(hi))
    if not (math.isfinite(flo) and math.isfinite(fhi)):
        raise NonFinite("function is not finite at the bracket ends")
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if flo * fhi > 0:
        raise InvalidBracket(f"f has the same sign at both ends of [{lo}, {hi}]")

    x = 0.5 * (lo + hi)
    fx = float(f(x))
    last_abs = math.inf
    for _ in range(max_iter):
        if not math.isfinite(fx):
            raise NonFinite(f"function is not finite at x={x!r}")
        if abs(fx) <= tol.abs_tol:
            return x
        if (fx < 0) == (flo < 0):
            lo, flo = x, fx
        else:
            hi, fhi = x, fx
        if hi - lo <= tol.abs_tol:
            return 0.5 * (lo + hi)
        candidate = None
        if fprime is not None and abs(fx) < 0.5 * last_abs:
            d = float(fprime(x))
            if d != 0.0 and math.isfinite(d):
                step = x - fx / d
                if lo < step < hi:
                    candidate = step
        if candidate is None:
            candidate = 0.5 * (lo + hi)
            if not (lo < candidate < hi):
                return x
        last_abs = abs(fx)
        x = candidate
        fx = float(f(x))
    raise NonConvergence(f"root finder exhausted {max_iter} iterations")


# ---------------------------------------------------------------------------
# Finite differences
# ---------------------------------------------------------------------------


def fd_derivative(f: Callable[[float], float], x: float, order: int = 1, step: float = 1e-3) -> float:
    """Five-point central difference for the first or second derivative."""
    h = float(step)
    if h <= 0:
        raise ValueError("step must be positive")
    vals = [float(f(x + j * h)) for j in (-2, -1, 0, 1, 2)]
    if not all(math.isfinite(v) for v in vals):
        raise NonFinite(f"non-finite evaluation in the stencil around x={x!r}")
    fm2, fm1, f0, fp1, fp2 = vals
    if order == 1:
        return (fm2 - 8.0 * fm1 + 8.0 * fp1 - fp2) / (12.0 * h)
    if order == 2:
        return (-fm2 + 16.0 * fm1 - 30.0 * f0 + 16.0 * fp1 - fp2) / (12.0 * h * h)
    raise ValueError("order must be 1 or 2")


# ---------------------------------------------------------------------------
# Random stream
# ---------------------------------------------------------------------------


class RngStream:
    """Single-consumer stream of uniforms in the open interval (0, 1).

    Draws come from numpy's PCG64 bit generator: the top 53 bits of each
    64-bit output, offset by half a unit so that zero is never produced.
    PCG64 output for a given integer seed is stable across numpy releases
    and platforms.
    """

    def __init__(self, seed: int):
        seed = int(seed)
        if not 0 <= seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        self.seed = seed
        self._bits = np.random.PCG64(seed)

    def uniform(self, size=None):
        n = 1 if size is None else int(np.prod(size))
        raw = np.asarray(self._bits.random_raw(n), dtype=np.uint64)
        u = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53
        if size is None:
            return float(u[0])
        return u.reshape(size)

    def normal(self, size=None):
        return ndtri(self.uniform(size))

    def __iter__(self):
        while True:
            yield self.uniform()


def rng_stream(seed: int) -> RngStream:
    return RngStream(seed)


def check_in(domain, x, what="value"):
    """Raise :class:`OutOfDomain` unless every element of ``x`` lies in ``domain``."""
    if not np.all(domain.contains(x)):
        desc = domain.describe()
        raise OutOfDomain(f"{what} {x!r} outside {desc}")


def geometric_grid(domain: Interval, n: int, clamp: float = 1e-3, span: float = 1e3) -> np.ndarray:
    """Interior grid with logarithmic clustering toward the finite ends.

    Points stay ``clamp`` times the local scale away from each finite end;
    infinite ends are truncated ``span`` local scales out.
    """
    lo, hi = domain.lo, domain.hi
    if math.isfinite(lo) and math.isfinite(hi):
        w = hi - lo
        k = n // 2
        left = lo + w * np.geomspace(clamp, 0.5, k, endpoint=False)
        right = hi - w * np.geomspace(clamp, 0.5, n - k)[::-1]
        return np.sort(np.concatenate([left, right]))
    if math.isfinite(lo):
        s = max(1.0, abs(lo))
        return lo + s * np.geomspace(clamp, span, n)
    if math.isfinite(hi):
        s = max(1.0, abs(hi))
        return np.sort(hi - s * np.geomspace(clamp, span, n))
    k = n // 2
    pos = np.geomspace(clamp, 30.0, n - k)
    neg = -np.geomspace(clamp, 30.0, k)
    return np.sort(np.concatenate([neg, pos]))

