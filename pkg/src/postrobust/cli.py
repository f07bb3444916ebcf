"""Command-line front end: ``postrobust {check,sweep,lemmas}``.

Experiments are described by a plain ``key = value`` file (``#`` starts a
comment); any key can be overridden with ``--set key=value`` and the common
ones have their own flags.  Exit codes: 0 success, 2 validation failure,
3 criterion failure, 4 numerical or search-budget failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import lemmalab
from .errors import BudgetError, InvalidInputError, NumericalError, PostRobustError
from .heavytail import CoefficientPrior, LptnDensity, ScalePrior, scale_moment_check, verify_prior_bound
from .model import (
    RegressionProblem,
    augment_with_basis,
    canonical_problem,
    general_position,
    general_position_arrays,
    read_problem_csv,
    robustness_condition,
)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_CRITERION = 3
EXIT_BUDGET = 4

DEFAULTS = {
    "problem": "canonical",
    "gamma": "1",
    "coef_prior": "per_coordinate_t",
    "nu": "1",
    "scale_prior": "half_cauchy",
    "scale_params": "1",
    "rho": "0.5",
    "omegas": "2:12",
    "method": "grid",
    "seeds": "0,1",
    "n_draws": "20000",
    "resolution": "1",
    "output_dir": "postrobust-out",
    "override": "false",
    "lemma_instances": "",
    "builtin_lemmas": "true",
    "sample_budget": "100000",
    "prior_search_grid": "200000",
}

_SCALE_FAMILIES = {"half_cauchy": "half_cauchy", "halfcauchy": "half_cauchy",
                   "inverse_gamma": "inverse_gamma", "invgamma": "inverse_gamma",
                   "log_normal": "log_normal", "lognormal": "log_normal"}


class ConfigError(InvalidInputError):
    pass


def parse_config_text(text, source="<config>"):
    """Parse ``key = value`` lines; errors carry the 1-based line number."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}: line {lineno}: expected 'key = value'")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in DEFAULTS:
            raise ConfigError(f"{source}: line {lineno}: unknown key '{key}'")
        out[key] = (val, lineno)
    return out


def _floats(text, what):
    try:
        vals = [float(v) for v in text.replace(";", ",").split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"{what}: expected comma-separated numbers, got {text!r}") from None
    if not vals:
        raise ConfigError(f"{what}: no values given")
    return vals


def parse_omega_ladder(text):
    """``"2:12"`` means ``10^2 .. 10^12`` by decades; otherwise a comma list."""
    text = text.strip()
    if ":" in text:
        try:
            lo, hi = (int(v) for v in text.split(":"))
        except ValueError:
            raise ConfigError(f"omega ladder {text!r}: expected 'lo:hi' integer exponents") from None
        if hi < lo:
            raise ConfigError(f"omega ladder {text!r}: empty range")
        return tuple(10.0 ** k for k in range(lo, hi + 1))
    return tuple(_floats(text, "omega ladder"))


@dataclass
class ExperimentConfig:
    problem: RegressionProblem
    problem_source: str
    rho: float
    omegas: tuple
    method: str
    seeds: tuple
    n_draws: int
    resolution: float
    output_dir: str
    override: bool
    lemma_instances: str
    builtin_lemmas: bool
    sample_budget: int
    prior_search_grid: int
    raw: dict = field(default_factory=dict)

    def to_dict(self):
        return {k: v for k, v in self.raw.items()}


def build_config(entries, base_dir="."):
    """Turn ``{key: (value, lineno)}`` into a validated experiment."""
    raw = {k: entries.get(k, (v, None))[0] for k, v in DEFAULTS.items()}

    def where(key):
        ln = entries.get(key, (None, None))[1]
        return f"line {ln}: {key}" if ln else key

    def get(key, conv, check=None, msg="invalid value"):
        try:
            v = conv(raw[key])
        except (ValueError, InvalidInputError) as exc:
            raise ConfigError(f"{where(key)}: {exc}") from None
        if check is not None and not check(v):
            raise ConfigError(f"{where(key)}: {msg} ({raw[key]!r})")
        return v

    def boolean(s):
        s = s.lower()
        if s in ("1", "true", "yes", "on"):
            return True
        if s in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"expected a boolean, got {s!r}")

    gamma = get("gamma", float, lambda v: v > 0 and math.isfinite(v), "gamma must be positive")
    rho = get("rho", float, lambda v: v > 0 and math.isfinite(v), "rho must be positive")
    nus = get("nu", lambda s: _floats(s, "nu"))
    sp_name = raw["scale_prior"].lower()
    if sp_name not in _SCALE_FAMILIES:
        raise ConfigError(f"{where('scale_prior')}: unknown family {raw['scale_prior']!r}")
    sp_params = get("scale_params", lambda s: _floats(s, "scale_params"))
    try:
        scale_prior = ScalePrior(_SCALE_FAMILIES[sp_name], tuple(sp_params))
    except InvalidInputError as exc:
        raise ConfigError(f"{where('scale_params')}: {exc}") from None

    src = raw["problem"]
    error = LptnDensity(gamma)
    if src == "canonical":
        base = canonical_problem()
        X, a, b = base.X, base.a, base.b
    else:
        path = src if os.path.isabs(src) else os.path.join(base_dir, src)
        if not os.path.exists(path):
            raise ConfigError(f"{where('problem')}: no such file {src!r}")
        loaded = read_problem_csv(path)
        X, a, b = loaded.X, loaded.a, loaded.b
    p = X.shape[1]
    variant = raw["coef_prior"]
    try:
        if variant in ("per_coordinate_t", "per_coordinate"):
            if len(nus) == 1:
                nus = nus * p
            cp = CoefficientPrior.per_coordinate(nus)
        elif variant in ("multivariate_t", "multivariate"):
            if len(nus) != 1:
                raise InvalidInputError("multivariate t takes a single nu")
            cp = CoefficientPrior.multivariate(nus[0], p)
        else:
            raise InvalidInputError(f"unknown coefficient prior {variant!r}")
    except InvalidInputError as exc:
        key = "coef_prior" if "coefficient prior" in str(exc) else "nu"
        raise ConfigError(f"{where(key)}: {exc}") from None
    try:
        prob = RegressionProblem(X, a, b, error=error, coeff_prior=cp, scale_prior=scale_prior)
    except InvalidInputError as exc:
        raise ConfigError(f"{where('problem')}: {exc}") from None

    method = raw["method"]
    if method not in ("grid", "mcmc"):
        raise ConfigError(f"{where('method')}: expected 'grid' or 'mcmc', got {method!r}")
    omegas = get("omegas", parse_omega_ladder)
    seeds = get("seeds", lambda s: tuple(int(float(v)) for v in _floats(s, "seeds")))
    return ExperimentConfig(
        problem=prob, problem_source=src, rho=rho, omegas=omegas, method=method, seeds=seeds,
        n_draws=get("n_draws", lambda s: int(float(s)), lambda v: v >= 100, "need at least 100 draws"),
        resolution=get("resolution", float, lambda v: v > 0, "must be positive"),
        output_dir=raw["output_dir"], override=get("override", boolean),
        lemma_instances=raw["lemma_instances"], builtin_lemmas=get("builtin_lemmas", boolean),
        sample_budget=get("sample_budget", lambda s: int(float(s)), lambda v: v >= 100, "too small"),
        prior_search_grid=get("prior_search_grid", lambda s: int(float(s)), lambda v: v >= 100, "too small"),
        raw=raw,
    )


def load_config(path=None, overrides=()):
    entries, base_dir = {}, "."
    if path:
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path!r}: {exc.strerror}") from None
        entries = parse_config_text(text, path)
        base_dir = os.path.dirname(os.path.abspath(path))
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r}: expected key=value")
        key, val = (s.strip() for s in item.split("=", 1))
        if key not in DEFAULTS:
            raise ConfigError(f"override: unknown key '{key}'")
        entries[key] = (val, None)
    return build_config(entries, base_dir)


# ---------------------------------------------------------------------------
# commands


def cmd_check(cfg: ExperimentConfig):
    """Theorem hypotheses as a table of rows ``(name, passed, detail, counts)``.

    Rows with ``counts=False`` are informational (the general-position
    conditions are used inside the proof but are not theorem hypotheses).
    """
    prob = cfg.problem
    rows = []
    mc = scale_moment_check(prob.scale_prior, cfg.rho)
    rows.append(("scale moment E[1 + sigma^rho] finite", mc.finite,
                 f"{prob.scale_prior.family}{prob.scale_prior.params}, rho={cfg.rho}, "
                 f"numeric cross-check {'agrees' if mc.agree else 'DISAGREES'}", True))
    cert = verify_prior_bound(prob.coeff_prior, search_grid=cfg.prior_search_grid)
    detail = (f"M={cert.M:.6g}, nu*={cert.nu_star:.6g}" if cert.certified else cert.message or "no certificate")
    rows.append(("conditional prior bound", cert.certified, detail, True))
    cond = robustness_condition(prob)
    detail = f"|K|={cond.size_K}, |L|={cond.size_L}, p={cond.p}, margin={cond.margin}"
    if not cond.holds:
        detail += "; sweeps run only with override and are watermarked 'outside theorem'"
    rows.append(("|K| >= |L| + p", cond.holds, detail, True))
    gp = general_position(prob)
    rows.append(("general position (i)-(iii) of (x, a, b)", gp.holds, _gp_detail(gp), False))
    try:
        gpa = general_position_arrays(*augment_with_basis(prob.X, prob.a, prob.b))
        rows.append(("general position with basis rows", gpa.holds, _gp_detail(gpa), False))
    except BudgetError as exc:
        rows.append(("general position with basis rows", None, str(exc), False))
    passed = all(r[1] for r in rows if r[3])
    return passed, rows


def _gp_detail(rep):
    bad = [c for c in ("i", "ii", "iii") if getattr(rep, f"cond_{c}") is False]
    if not bad:
        return "all hold"
    return "; ".join(f"({c}) fails on rows {list(map(int, rep.witnesses[c][0]))}" for c in bad)


def format_table(rows):
    width = max(len(r[0]) for r in rows)
    lines = []
    for name, ok, detail, counts in rows:
        if counts:
            tag = "PASS" if ok else "FAIL"
        else:
            tag = "info" if ok is None else ("ok  " if ok else "note")
        note = "" if counts else " (not a hypothesis)"
        lines.append(f"{tag}  {name.ljust(width)}  {detail}{note}")
    return "\n".join(lines)


def _write(path, text):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as fh:
        fh.write(text)


def cmd_sweep(cfg: ExperimentConfig, out=None):
    from .robustness import sweep

    out = sys.stdout if out is None else out
    passed, rows = cmd_check(cfg)
    if not passed and not cfg.override:
        print(format_table(rows), file=out)
        print("hypotheses fail; pass --override to sweep anyway", file=out)
        return EXIT_CRITERION, None
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        report = sweep(cfg.problem, cfg.omegas, method=cfg.method, resolution=cfg.resolution,
                       n_draws=cfg.n_draws, seeds=cfg.seeds)
    d = report.to_dict()
    d["config"] = cfg.to_dict()
    d["convergence_criterion"] = report.convergence_criterion()
    _write(os.path.join(cfg.output_dir, "sweep.json"), json.dumps(d, indent=2, sort_keys=True))
    _write(os.path.join(cfg.output_dir, "sweep.csv"), report.to_csv())
    if report.outside_theorem:
        print(f"[{report.watermark}]", file=out)
    for om, dist in zip(report.omegas, report.pointwise_sup_dist):
        print(f"omega={om:.3g}  sup_dist={dist:.6g}", file=out)
    if report.outside_theorem:
        return EXIT_OK, report
    return (EXIT_OK if report.convergence_criterion() else EXIT_CRITERION), report


def cmd_lemmas(cfg: ExperimentConfig, out=None):
    """Covering and product-bound certificates for built-in and user instances."""
    out = sys.stdout if out is None else out
    cover = list(lemmalab.covering_suite()) if cfg.builtin_lemmas else []
    product = list(lemmalab.product_suite()) if cfg.builtin_lemmas else []
    if cfg.lemma_instances:
        for inst in lemmalab.load_instances(cfg.lemma_instances):
            (product if inst.w is not None else cover).append(inst)
    seed = cfg.seeds[0]
    certs = {"covering": [], "product": []}
    for inst in cover:
        certs["covering"].append(lemmalab.find_epsilon_omega(inst, cfg.sample_budget, seed).to_dict())
    for inst in product:
        certs["product"].append(lemmalab.find_R_delta(inst, cfg.sample_budget, seed).to_dict())
    text = json.dumps(certs, indent=2, sort_keys=True)
    _write(os.path.join(cfg.output_dir, "certificates.json"), text)
    inconclusive = 0
    for kind, lst in certs.items():
        for c in lst:
            if kind == "covering":
                summary = f"epsilon={c['epsilon']}, M={c['M']}, exact={c['exact_confirmed']}"
            else:
                summary = f"R={c['R']}, delta={c['delta']}"
            print(f"{kind:8s} {c['name'] or c['instance_hash'][:12]:24s} {c['status']:12s} "
                  f"{summary if c['found'] else ''}", file=out)
            inconclusive += not c["found"]
    return (EXIT_BUDGET if inconclusive else EXIT_OK), certs


# ---------------------------------------------------------------------------
# entry point


def build_parser():
    ap = argparse.ArgumentParser(prog="postrobust", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_ in (("check", "tabulate the theorem hypotheses"),
                        ("sweep", "run an omega sweep and write JSON and CSV reports"),
                        ("lemmas", "search covering and product-bound certificates")):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", "-c", help="key = value experiment file")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one config key (repeatable)")
        sp.add_argument("--seed", type=int, help="first seed; a second chain uses seed + 1")
        sp.add_argument("--output-dir", "-o", help="directory for report files")
        if name == "sweep":
            sp.add_argument("--omega-ladder", help="'lo:hi' decades or a comma list")
            sp.add_argument("--method", choices=("grid", "mcmc"))
            sp.add_argument("--override", action="store_true",
                            help="sweep even when a hypothesis fails")
        if name == "lemmas":
            sp.add_argument("--instances", help="JSON file of lemma instances")
            sp.add_argument("--budget", type=int, help="beta samples per check")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    overrides = list(args.set)
    if args.seed is not None:
        overrides.append(f"seeds={args.seed},{args.seed + 1}")
    if args.output_dir:
        overrides.append(f"output_dir={args.output_dir}")
    if getattr(args, "omega_ladder", None):
        overrides.append(f"omegas={args.omega_ladder}")
    if getattr(args, "method", None):
        overrides.append(f"method={args.method}")
    if getattr(args, "override", False):
        overrides.append("override=true")
    if getattr(args, "instances", None):
        overrides.append(f"lemma_instances={args.instances}")
    if getattr(args, "budget", None):
        overrides.append(f"sample_budget={args.budget}")
    try:
        cfg = load_config(args.config, overrides)
        if args.command == "check":
            passed, rows = cmd_check(cfg)
            print(format_table(rows))
            return EXIT_OK if passed else EXIT_CRITERION
        if args.command == "sweep":
            return cmd_sweep(cfg)[0]
        return cmd_lemmas(cfg)[0]
    except InvalidInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (BudgetError, NumericalError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except PostRobustError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
