"""Command-line front end: ``cubic-nef verify | posterior | sample | plot-data | catalog``.

Exit codes are 0 when everything passed, 1 when a check failed and 2 for
usage, configuration or input errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.special import ndtr

from .exceptions import CubicNEFError, InvalidData, InvalidParameter
from .families import (
    CubicViaTBeta,
    ExampleIG,
    Quadratic,
    catalog,
    make_model,
    parse_family,
    psi,
    quadratic_exp_coefficients,
    variance,
)
from .posterior import (
    DataBatch,
    PosteriorState,
    closed_form_functional,
    posterior_functional,
    sample_observations,
    update,
    validate_batch,
)
from .priors import HyperParams, make_prior
from .tbeta import mean_transport
from .theorems import (
    CheckReport,
    check_conjugacy,
    check_cubic_reconstruction,
    check_dy_identity,
    check_group_law_model,
    check_linearity,
    check_monge_ampere,
    check_prop3,
    check_T2_inclusion,
    example_ig_reference_forms,
    fit_abc,
    transported_coefficients,
)

log = logging.getLogger("cubic_nef")

DEFAULT_SEED = 1729
SEED_ENV = "CUBIC_NEF_SEED"
PLOT_POINTS = 201

CHECKS = (
    "dy-identity",
    "prop3",
    "conjugacy",
    "linearity",
    "abc-fit",
    "monge-ampere",
    "cubic-reconstruction",
    "T2-inclusion",
    "group-law",
)

DEFAULTS = {
    "family": "example-ig",
    "beta": 1.0,
    "t": 2.0,
    "m0": 1.0,
    "grid_size": 64,
    "format": None,
    "tolerances": {},
}


class ConfigError(Exception):
    pass


@dataclass
class RunConfig:
    """Resolved settings for one invocation.

    Every field has a default, so ``cubic-nef verify`` runs on the
    inverse-Gaussian example with no arguments.
    """

    family: str = DEFAULTS["family"]
    beta: float = DEFAULTS["beta"]
    t: float = DEFAULTS["t"]
    m0: float = DEFAULTS["m0"]
    seed: int = DEFAULT_SEED
    grid_size: int = DEFAULTS["grid_size"]
    output_format: Optional[str] = DEFAULTS["format"]
    tolerances: dict = field(default_factory=dict)

    def validate(self):
        if not (math.isfinite(self.t) and self.t > 0):
            raise ConfigError(f"invalid config: t must satisfy t>0 (got t={self.t!r})")
        if not math.isfinite(self.beta):
            raise ConfigError(f"invalid config: beta must be finite (got {self.beta!r})")
        if not math.isfinite(self.m0):
            raise ConfigError(f"invalid config: m0 must be finite (got {self.m0!r})")
        if self.output_format not in (None, "json", "csv"):
            raise ConfigError(f"invalid config: format must be json or csv (got {self.output_format!r})")
        if not (isinstance(self.grid_size, int) and self.grid_size >= 8):
            raise ConfigError(f"invalid config: grid_size must be an integer >= 8 (got {self.grid_size!r})")
        if not (0 <= self.seed < 2**64):
            raise ConfigError(f"invalid config: seed must be an unsigned 64-bit integer (got {self.seed!r})")
        for name, tol in self.tolerances.items():
            if name not in CHECKS:
                raise ConfigError(f"invalid config: unknown check {name!r} in tolerances")
            if not (isinstance(tol, (int, float)) and tol > 0):
                raise ConfigError(f"invalid config: tolerance for {name} must be positive")
        return self

    def format_or(self, default):
        """Requested output format, or the command's own default."""
        return self.output_format or default


def _parse_seed(text, origin):
    try:
        seed = int(str(text), 0)
    except ValueError:
        raise ConfigError(f"invalid {origin}: seed {text!r} is not an integer") from None
    return seed


def resolve_config(args) -> RunConfig:
    """Merge flags, the JSON config file, the seed environment variable and defaults."""
    file_cfg = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                file_cfg = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {args.config} is not valid JSON: {exc}") from None
        if not isinstance(file_cfg, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(file_cfg) - set(DEFAULTS) - {"seed"}
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")

    def pick(key):
        flag = getattr(args, key, None)
        if flag is not None:
            return flag, True
        if key in file_cfg:
            return file_cfg[key], True
        return DEFAULTS[key], False

    family, _ = pick("family")
    beta, beta_set = pick("beta")
    t, _ = pick("t")
    m0, _ = pick("m0")
    grid_size, _ = pick("grid_size")
    fmt, _ = pick("format")
    fmt = None if fmt is None else str(fmt)
    tolerances, _ = pick("tolerances")

    if args.seed is not None:
        seed = _parse_seed(args.seed, "--seed")
    elif "seed" in file_cfg:
        seed = _parse_seed(file_cfg["seed"], "config")
    elif os.environ.get(SEED_ENV):
        seed = _parse_seed(os.environ[SEED_ENV], SEED_ENV)
    else:
        seed = DEFAULT_SEED

    try:
        beta, t, m0 = float(beta), float(t), float(m0)
    except (TypeError, ValueError):
        raise ConfigError("invalid config: beta, t and m0 must be numbers") from None
    if not isinstance(tolerances, dict):
        raise ConfigError("invalid config: tolerances must be an object")
    try:
        spec = parse_family(str(family))
    except InvalidParameter as exc:
        raise ConfigError(f"invalid config: {exc}") from None
    # a descriptor like "gaussian@0.5" fixes beta unless it was set explicitly
    if isinstance(spec, CubicViaTBeta):
        if beta_set and beta != spec.beta:
            raise ConfigError(f"invalid config: family {family} implies beta={spec.beta}, got beta={beta}")
        beta = spec.beta
    cfg = RunConfig(str(family), beta, t, m0, seed, grid_size, fmt, dict(tolerances))
    return cfg.validate()


def build_model(cfg: RunConfig):
    """Family of the observations: the named family, moved by T_beta when it is quadratic."""
    spec = parse_family(cfg.family)
    if isinstance(spec, Quadratic) and cfg.beta != 0:
        spec = CubicViaTBeta(spec, cfg.beta)
    return make_model(spec)


def base_of(model):
    """Quadratic family behind ``model`` or ``None``."""
    if model.origin is not None:
        return model.origin[0]
    if isinstance(model.spec, Quadratic):
        return model
    if model.quadratic_base is not None:
        return make_model(model.quadratic_base)
    return None


def prepare(cfg: RunConfig):
    model = build_model(cfg)
    try:
        HyperParams(cfg.t, cfg.m0, cfg.beta).check(model)
    except CubicNEFError as exc:
        raise ConfigError(f"invalid config: {exc}") from None
    return model


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------


def _json_value(v):
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else repr(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_json_value(x) for x in v]
    return v


def _csv_value(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating, int, np.integer)):
        return "%.17g" % float(v)
    return str(v)


def render(rows, fmt, columns=None) -> str:
    """JSON lines or CSV with a header row; both end every line with a newline."""
    rows = list(rows)
    if fmt == "json":
        return "".join(json.dumps({k: _json_value(v) for k, v in r.items()}) + "\n" for r in rows)
    columns = columns or (list(rows[0]) if rows else [])
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_csv_value(r[c]) for c in columns])
    return buf.getvalue()


def emit(text, out: Optional[str]):
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
        sys.stdout.flush()


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------


class _Suite:
    """Lazily evaluated checks sharing one (a, b, c) fit."""

    def __init__(self, cfg, model):
        self.cfg = cfg
        self.model = model
        self._fit = None

    def fit(self):
        if self._fit is None:
            self._fit = fit_abc(self.model, self.cfg.beta, self.cfg.grid_size)
        return self._fit

    def run(self, name) -> CheckReport:
        fn = getattr(self, "_" + name.replace("-", "_").lower())
        try:
            rep = fn()
        except (CubicNEFError, ValueError, ArithmeticError, NotImplementedError) as exc:
            rep = CheckReport.make(name, math.inf, 0.0, "none", f"{type(exc).__name__}: {exc}")
        rep = replace(rep, name=name)
        tol = self.cfg.tolerances.get(name)
        if tol is not None:
            rep = CheckReport.make(name, rep.max_residual, tol, rep.grid, rep.notes)
        return rep

    def _dy_identity(self):
        cfg = self.cfg
        base = base_of(self.model)
        if base is None:
            raise InvalidParameter(f"{self.model.name} has no quadratic base")
        scale = 1.0 + cfg.beta * cfg.m0
        t1, m1 = cfg.t * scale, cfg.m0 / scale
        rep = check_dy_identity(base, t1, m1)
        return replace(rep, notes=f"base {base.name}; {rep.notes}")

    def _prop3(self):
        cfg = self.cfg
        rep = check_prop3(self.model, cfg.beta, cfg.t, cfg.m0)
        if isinstance(self.model.spec, ExampleIG) and cfg.beta != 0:
            ref = example_ig_reference_forms(cfg.beta, cfg.t, cfg.m0)
            extra = (
                f"reference closed forms (not used): (Theta)_beta lower end {ref['ref_theta_lo']:.10g}"
                f" vs computed {ref['theta_lo']:.10g}; 1/C {ref['ref_inv_normalizer']:.10g}"
                f" vs quadrature {ref['inv_normalizer']:.10g}"
            )
            rep = replace(rep, notes=f"{rep.notes}; {extra}")
        return rep

    def _conjugacy(self):
        return check_conjugacy(self.model, self.cfg.beta, self.cfg.t, self.cfg.m0, seed=self.cfg.seed)

    def _linearity(self):
        return check_linearity(self.model, self.cfg.beta, self.cfg.t, self.cfg.m0)

    def _abc_fit(self):
        fit = self.fit()
        notes = [f"(a, b, c) = ({fit.a:.12g}, {fit.b:.12g}, {fit.c:.12g})", f"fit residual {fit.residual:.3g}"]
        resid = fit.residual
        expected = self._expected_abc()
        if expected is not None:
            gap = max(abs(x - y) for x, y in zip(fit.coefficients, expected))
            notes.append(f"transport rule ({expected[0]:.12g}, {expected[1]:.12g}, {expected[2]:.12g}), gap {gap:.3g}")
            resid = max(resid, gap)
        return CheckReport.make("abc-fit", resid, 1e-8, fit.grid, "; ".join(notes))

    def _expected_abc(self):
        model, beta = self.model, self.cfg.beta
        if isinstance(model.spec, Quadratic) and beta == 0:
            return quadratic_exp_coefficients(model.spec)
        if isinstance(model.spec, CubicViaTBeta) and model.spec.beta == beta:
            return transported_coefficients(quadratic_exp_coefficients(model.spec.base), beta)
        if isinstance(model.spec, ExampleIG) and beta == 1.0:
            return transported_coefficients(quadratic_exp_coefficients(model.quadratic_base), beta)
        return None

    def _monge_ampere(self):
        return check_monge_ampere(self.model, self.cfg.beta, self.fit())

    def _cubic_reconstruction(self):
        return check_cubic_reconstruction(self.model, self.cfg.beta, self.fit(), self.cfg.grid_size)

    def _t2_inclusion(self):
        return check_T2_inclusion(self.model, self.cfg.beta, self.cfg.t, self.cfg.m0, self.fit())

    def _group_law(self):
        return check_group_law_model(self.model)


def cmd_verify(cfg, args):
    model = prepare(cfg)
    selected = set(args.check or CHECKS)
    unknown = selected - set(CHECKS)
    if unknown:
        raise ConfigError(f"unknown check(s): {', '.join(sorted(unknown))}; known: {', '.join(CHECKS)}")
    suite = _Suite(cfg, model)
    reports = [suite.run(name) for name in CHECKS if name in selected]
    cols = ["name", "max_residual", "tolerance", "grid", "pass", "notes"]
    emit(render((r.as_dict() for r in reports), cfg.format_or("json"), cols), args.out)
    return 0 if all(r.passed for r in reports) else 1


# ---------------------------------------------------------------------------
# posterior
# ---------------------------------------------------------------------------


def read_observations(path):
    """Parse one decimal observation per line; returns values and their line numbers."""
    values, lines = [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            text = raw.strip()
            if not text:
                continue
            try:
                x = float(text)
            except ValueError:
                raise InvalidData(f"line {lineno}: cannot parse {text!r} as a number", index=lineno) from None
            if not math.isfinite(x):
                raise InvalidData(f"line {lineno}: observation {text!r} is not finite", index=lineno)
            values.append(x)
            lines.append(lineno)
    return values, lines


def cmd_posterior(cfg, args):
    model = prepare(cfg)
    if not args.data:
        raise ConfigError("posterior needs --data <path>")
    try:
        values, lines = read_observations(args.data)
    except OSError as exc:
        raise ConfigError(f"cannot read data file {args.data}: {exc.strerror}") from None
    batch = DataBatch.from_values(values)
    state = PosteriorState(HyperParams(cfg.t, cfg.m0, cfg.beta), model)
    try:
        validate_batch(model, cfg.beta, batch)
    except InvalidData as exc:
        lineno = lines[exc.index] if exc.index is not None else None
        raise InvalidData(f"line {lineno}: {exc}", index=lineno) from None
    if batch.n == 0:
        log.warning("data file %s has no observations; the prior is returned unchanged", args.data)
    new = update(state, batch)
    closed = closed_form_functional(state, batch)
    quad = posterior_functional(state, batch)
    row = {
        "family": model.name,
        "beta": cfg.beta,
        "t": cfg.t,
        "m0": cfg.m0,
        "n": batch.n,
        "xbar": batch.sample_mean,
        "t_post": new.hp.t,
        "m0_post": new.hp.m0,
        "functional_closed": closed,
        "functional_quadrature": quad,
        "gap": abs(closed - quad),
    }
    emit(render([row], cfg.format_or("json")), args.out)
    return 0


# ---------------------------------------------------------------------------
# sample
# ---------------------------------------------------------------------------


def cmd_sample(cfg, args):
    model = prepare(cfg)
    if args.n < 0:
        raise ConfigError("--n must be non-negative")
    if args.kind == "observation":
        theta = float(psi(model, cfg.m0))
        values = sample_observations(model, cfg.beta, theta, args.n, cfg.seed)
    else:
        prior = make_prior(model, cfg.t, cfg.m0, cfg.beta, natural=args.kind == "natural")
        values = prior.sample(args.n, cfg.seed)
    rows = ({"index": i, "value": v} for i, v in enumerate(values))
    emit(render(rows, cfg.format_or("json"), ["index", "value"]), args.out)
    return 0


# ---------------------------------------------------------------------------
# plot-data
# ---------------------------------------------------------------------------


def plot_rows(cfg, model, points=PLOT_POINTS):
    """Columns for plotting, on grids placed at prior quantiles."""
    natural = make_prior(model, cfg.t, cfg.m0, cfg.beta, natural=True)
    mean_prior = make_prior(model, cfg.t, cfg.m0, cfg.beta, natural=False)
    # normal-score spacing keeps the trapezoid rule accurate near sharp ends
    q = ndtr(np.linspace(-4.0, 4.0, points))
    theta = natural.quantile(q)
    m = mean_prior.quantile(q[:-1])
    m = np.unique(np.append(m, cfg.m0))
    if m.size < points:
        m = np.unique(np.append(m, mean_prior.quantile(q[-1:])))
    m = np.resize(m, points) if m.size != points else m
    V = variance(model, m)
    xbar = mean_transport(m, cfg.beta) if cfg.beta != 0 else m
    state = PosteriorState(HyperParams(cfg.t, cfg.m0, cfg.beta), model)
    func = np.array([posterior_functional(state, DataBatch.from_summary(5, x)) for x in xbar])
    cols = {
        "m": m,
        "V": V,
        "theta": theta,
        "prior_density": natural.pdf(theta),
        "mean_prior_density": mean_prior.pdf(m),
        "xbar": xbar,
        "posterior_functional": func,
    }
    names = list(cols)
    return [dict(zip(names, vals)) for vals in zip(*cols.values())], names


def cmd_plotdata(cfg, args):
    model = prepare(cfg)
    rows, names = plot_rows(cfg, model)
    emit(render(rows, cfg.format_or("csv"), names), args.out)
    return 0


# ---------------------------------------------------------------------------
# catalog
# ---------------------------------------------------------------------------


def cmd_catalog(cfg, args):
    rows = []
    for model in catalog() + [make_model(ExampleIG())]:
        spec = model.spec
        rows.append(
            {
                "name": model.name,
                "descriptor": str(spec),
                "theta_domain": model.theta_domain.describe(),
                "means": model.means.describe(),
                "support": model.support.base_measure if model.support is not None else "",
                "jorgensen": model.jorgensen.describe(),
                "has_sampler": model.sampler is not None,
            }
        )
    emit(render(rows, cfg.format_or("json")), args.out)
    return 0


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

COMMANDS = {
    "verify": cmd_verify,
    "posterior": cmd_posterior,
    "sample": cmd_sample,
    "plot-data": cmd_plotdata,
    "catalog": cmd_catalog,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--family", help="family descriptor, e.g. example-ig, gamma:p=2, poisson@0.5")
    common.add_argument("--beta", type=float, help="beta of the T_beta action and of the prior")
    common.add_argument("--t", type=float, help="prior precision t > 0")
    common.add_argument("--m0", type=float, help="prior mean parameter")
    common.add_argument("--seed", help=f"unsigned 64-bit seed (default ${SEED_ENV} or {DEFAULT_SEED})")
    common.add_argument("--format", choices=("json", "csv"), help="output format (default json; csv for plot-data)")
    common.add_argument("--out", help="write output to this file instead of stdout")

    parser = argparse.ArgumentParser(prog="cubic-nef", description="Generalized conjugate priors for cubic NEFs")
    sub = parser.add_subparsers(dest="command", required=True)
    v = sub.add_parser("verify", parents=[common], help="run the check suite")
    v.add_argument("--check", action="append", choices=CHECKS, help="run only this check (repeatable)")
    p = sub.add_parser("posterior", parents=[common], help="conjugate update on a data file")
    p.add_argument("--data", help="file with one observation per line")
    s = sub.add_parser("sample", parents=[common], help="draw from the prior")
    s.add_argument("--n", type=int, default=1000)
    s.add_argument("--kind", choices=("natural", "mean", "observation"), default="natural")
    sub.add_parser("plot-data", parents=[common], help="emit plotting columns")
    sub.add_parser("catalog", parents=[common], help="list the built-in families")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s", stream=sys.stderr)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = resolve_config(args)
        with np.errstate(all="ignore"):
            return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"cubic-nef: {exc}", file=sys.stderr)
        return 2
    except InvalidData as exc:
        print(f"cubic-nef: invalid data: {exc}", file=sys.stderr)
        return 2
    except CubicNEFError as exc:
        print(f"cubic-nef: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
