"""Omega sweeps comparing the contaminated and leave-outliers-out posteriors.

Given a problem with outliers ``y_i = a_i + b_i * omega`` (``b_i != 0``), the
posterior given all rows should approach the posterior given the clean rows
K pointwise as ``omega`` grows.  A sweep measures that distance on a ladder
of ``omega`` values, together with the per-outlier likelihood ratios that
drive it and the split of the normalising integral into a near region
(every outlier residual at least half the outlier) and a far region.
"""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .diagnostics import effective_sample_size
from .errors import InvalidInputError, UnsupportedDimensionError
from .heavytail import log_tail_ratio
from .model import RegressionProblem, log_kernel, observations_at, robustness_condition
from .posterior import default_threads, grid_posterior, run_chains, split_integrals

DEFAULT_OMEGAS = tuple(10.0 ** k for k in range(2, 13))
OUTSIDE_THEOREM = "outside theorem"


def log_envelope(omega, size_K, size_L, p, gamma):
    """``log[omega^|L| (log omega)^(|L|(1+gamma)) / omega^(|K|-p+1)]`` for omega > 1."""
    omega = np.asarray(omega, dtype=float)
    if np.any(omega <= 1.0):
        raise InvalidInputError("envelope needs omega > 1")
    lo = np.log(omega)
    return size_L * lo + size_L * (1.0 + gamma) * np.log(lo) - (size_K - p + 1) * lo


def envelope_decay_threshold(size_K, size_L, p, gamma):
    """Omega beyond which the log envelope strictly decreases.

    The derivative in ``log omega`` is ``|L| - (|K|-p+1) + |L|(1+gamma)/log omega``,
    negative once ``log omega > |L|(1+gamma)/(|K|-p+1-|L|)``; requires
    ``|K| - p + 1 > |L|``.
    """
    gap = size_K - p + 1 - size_L
    if gap <= 0:
        return math.inf
    return math.exp(size_L * (1.0 + gamma) / gap)


def outlier_ratio_check(prob: RegressionProblem, omega, beta, sigma):
    """``{f((y_i - x_i'beta)/sigma)/sigma} / f(y_i)`` for each outlying row."""
    if not sigma > 0:
        raise InvalidInputError("sigma must be positive")
    beta = np.asarray(beta, dtype=float)
    L = prob.L
    y = observations_at(prob, omega)[L]
    return np.exp(log_tail_ratio(y, prob.X[L] @ beta, np.full(L.size, float(sigma)), prob.error))


def _log_ratio_sum(prob, omega, beta, sigma):
    """Sum over outliers of the log likelihood ratio at many (beta, sigma)."""
    L = prob.L
    if L.size == 0:
        return np.zeros(beta.shape[0]), np.zeros((beta.shape[0], 0))
    y = observations_at(prob, omega)[L]
    mu = beta @ prob.X[L].T
    lr = log_tail_ratio(np.broadcast_to(y, mu.shape), mu, np.broadcast_to(sigma[:, None], mu.shape), prob.error)
    lr = np.atleast_2d(lr)
    return lr.sum(axis=1), lr


def evaluation_box_log_peak(prob: RegressionProblem, beta, sigma, n_axis=None):
    """Largest clean log kernel over the box spanned by the evaluation points.

    The box is taken in ``(beta, log sigma)``.  The clean posterior is
    unbounded as ``sigma -> 0`` where a clean residual vanishes, so the
    global peak is useless as a normaliser; the peak over the evaluation
    region is finite.  For ``p = 1`` the kinks ``y_i / x_i`` inside the box
    are added to the grid so the maximum along each sigma slice is exact.
    """
    beta = np.atleast_2d(np.asarray(beta, dtype=float))
    sigma = np.asarray(sigma, dtype=float).ravel()
    p = prob.p
    if n_axis is None:
        n_axis = 201 if p == 1 else 41
    lo, hi = beta.min(axis=0), beta.max(axis=0)
    axes = [np.linspace(lo[k], hi[k], n_axis) if hi[k] > lo[k] else np.array([lo[k]]) for k in range(p)]
    if p == 1:
        K = prob.K
        x = prob.X[K, 0]
        ok = x != 0
        kinks = prob.a[K][ok] / x[ok]
        kinks = kinks[(kinks >= lo[0]) & (kinks <= hi[0])]
        axes[0] = np.union1d(axes[0], kinks)
    ls = np.log(sigma)
    lsig = np.linspace(ls.min(), ls.max(), n_axis) if ls.max() > ls.min() else ls[:1]
    best = float(np.max(np.atleast_1d(log_kernel(prob, beta, sigma, 0.0, "K"))))
    mesh = np.meshgrid(*axes, indexing="ij")
    flat = np.stack([m.ravel() for m in mesh], axis=1)
    for l in lsig:
        v = np.atleast_1d(log_kernel(prob, flat, np.full(flat.shape[0], math.exp(l)), 0.0, "K"))
        best = max(best, float(np.max(v)))
    return best


def default_eval_points(prob: RegressionProblem, reference=None):
    """Nine ``(beta, sigma)`` points around the leave-outliers-out posterior.

    Centre at the marginal medians of ``beta`` and ``log sigma``; offsets of
    two robust scales (half the 16-84% interquantile range).  For ``p = 1``
    this is the 3 x 3 product; for larger ``p`` the centre, +-2 scales along
    each of the first two coefficient axes, +-2 in ``log sigma``, and the two
    joint diagonal points.
    """
    p = prob.p
    if reference is None:
        reference = grid_posterior(prob, 0.0, "K") if p <= 2 else None
    if reference is None:
        raise InvalidInputError("default evaluation points need a reference posterior for p > 2")
    if hasattr(reference, "beta_axes"):
        med = np.array([reference.quantile_beta(0.5, k) for k in range(p)])
        sc = np.array([(reference.quantile_beta(0.84, k) - reference.quantile_beta(0.16, k)) / 2.0 for k in range(p)])
        lmed = reference.quantile_log_sigma(0.5)
        lsc = (reference.quantile_log_sigma(0.84) - reference.quantile_log_sigma(0.16)) / 2.0
    else:
        draws = np.concatenate([c.draws for c in reference]) if isinstance(reference, list) else reference.draws
        b = draws[:, :-1]
        ls = np.log(draws[:, -1])
        med = np.median(b, axis=0)
        q = np.quantile(b, [0.16, 0.84], axis=0)
        sc = (q[1] - q[0]) / 2.0
        lmed = float(np.median(ls))
        lq = np.quantile(ls, [0.16, 0.84])
        lsc = float((lq[1] - lq[0]) / 2.0)
    pts = []
    if p == 1:
        for db in (-2.0, 0.0, 2.0):
            for dl in (-2.0, 0.0, 2.0):
                pts.append((med + db * sc, math.exp(lmed + dl * lsc)))
    else:
        e = np.eye(p)
        pts.append((med, math.exp(lmed)))
        for k in range(min(p, 2)):
            for sgn in (-2.0, 2.0):
                pts.append((med + sgn * sc[k] * e[k], math.exp(lmed)))
        for sgn in (-2.0, 2.0):
            pts.append((med, math.exp(lmed + sgn * lsc)))
        diag = e[0] * sc[0] + e[1] * sc[1]
        for sgn in (-2.0, 2.0):
            pts.append((med + sgn * diag, math.exp(lmed)))
    return [(np.asarray(b, dtype=float).reshape(p), float(s)) for b, s in pts]


@dataclass
class RobustnessReport:
    omegas: np.ndarray
    pointwise_sup_dist: np.ndarray
    ratio_dist: np.ndarray
    marginal_ratio: np.ndarray
    envelope: np.ndarray
    log_envelope: np.ndarray
    condition_margin: int
    method: str
    eval_points: list
    pointwise: np.ndarray
    outside_theorem: bool = False
    control: bool = False
    dist_se: np.ndarray | None = None
    near_mass: np.ndarray | None = None
    far_mass: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def watermark(self):
        return OUTSIDE_THEOREM if self.outside_theorem else ""

    def strictly_decreasing(self):
        d = self.pointwise_sup_dist
        return bool(np.all(np.diff(d) < 0))

    def convergence_criterion(self, final_tol=0.1):
        """Distances strictly decreasing over the ladder and below ``final_tol`` at the end."""
        return self.strictly_decreasing() and bool(self.pointwise_sup_dist[-1] < final_tol)

    def to_dict(self):
        def lst(a):
            return None if a is None else [float(v) for v in np.asarray(a)]

        return {
            "method": self.method, "control": self.control, "watermark": self.watermark,
            "condition_margin": int(self.condition_margin), "omegas": lst(self.omegas),
            "pointwise_sup_dist": lst(self.pointwise_sup_dist), "dist_se": lst(self.dist_se),
            "ratio_dist": lst(self.ratio_dist), "marginal_ratio": lst(self.marginal_ratio),
            "envelope": lst(self.envelope), "log_envelope": lst(self.log_envelope),
            "near_mass": lst(self.near_mass), "far_mass": lst(self.far_mass),
            "eval_points": [{"beta": [float(v) for v in b], "sigma": float(s)} for b, s in self.eval_points],
            "pointwise": np.asarray(self.pointwise).tolist(),
            "strictly_decreasing": self.strictly_decreasing(), "meta": self.meta,
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf)
        cols = ["omega", "pointwise_sup_dist", "dist_se", "ratio_dist", "marginal_ratio",
                "log_envelope", "envelope", "near_mass", "far_mass"]
        w.writerow(cols)
        for j, om in enumerate(self.omegas):
            row = [om, self.pointwise_sup_dist[j],
                   "" if self.dist_se is None else self.dist_se[j],
                   self.ratio_dist[j], self.marginal_ratio[j], self.log_envelope[j], self.envelope[j],
                   "" if self.near_mass is None else self.near_mass[j],
                   "" if self.far_mass is None else self.far_mass[j]]
            w.writerow([repr(float(v)) if v != "" else "" for v in row])
        return buf.getvalue()


def _validate_omegas(omegas):
    om = np.asarray(omegas, dtype=float)
    if om.ndim != 1 or om.size == 0:
        raise InvalidInputError("omega ladder must be a non-empty 1-D sequence")
    if np.any(om <= 1.0) or np.any(np.diff(om) <= 0):
        raise InvalidInputError("omega ladder must be strictly increasing and > 1")
    return om


def sweep(prob: RegressionProblem, omegas=DEFAULT_OMEGAS, eval_points=None, method="grid",
          resolution=1.0, n_draws=20_000, seeds=(0, 1), control=False, n_threads=None) -> RobustnessReport:
    """Distance between ``p(. | y(omega))`` and ``p(. | y_K)`` over an omega ladder.

    At each evaluation point the distance is
    ``|p(beta, sigma | y) - p(beta, sigma | y_K)|`` divided by the peak
    clean-posterior density over the box spanned by the evaluation points
    (see ``evaluation_box_log_peak``), so tolerances are scale free.  Both densities share the factor
    ``kernel_K(beta, sigma)``; they differ by the outlier likelihood ratios
    and by the ratio of normalising constants, which the grid method gets
    by quadrature and the MCMC method by averaging the ratios over draws
    from the clean posterior.

    ``control=True`` permits an empty outlier set (the distance is then
    identically zero); otherwise an empty L is rejected.
    """
    om = _validate_omegas(omegas)
    if method not in ("grid", "mcmc"):
        raise InvalidInputError(f"unknown method {method!r}")
    if prob.L.size == 0 and not control:
        raise InvalidInputError("no outlying rows (all b_i == 0); nothing to sweep")
    if method == "grid" and prob.p > 2:
        raise UnsupportedDimensionError("grid method supports p <= 2; use method='mcmc'")
    cond = robustness_condition(prob)
    outside = not cond.holds
    if outside:
        warnings.warn(f"|K| >= |L| + p fails (margin {cond.margin}); results are {OUTSIDE_THEOREM}",
                      stacklevel=2)
    n_threads = default_threads() if n_threads is None else n_threads

    chains = None
    reference = None
    if method == "mcmc":
        chains = run_chains(prob, 0.0, "K", n_draws, seeds, n_threads)
    if eval_points is None:
        reference = grid_posterior(prob, 0.0, "K") if prob.p <= 2 else chains
        eval_points = default_eval_points(prob, reference)
    if len(eval_points) == 0:
        raise InvalidInputError("empty evaluation set")
    eb = np.stack([np.asarray(b, dtype=float).reshape(prob.p) for b, _ in eval_points])
    es = np.array([float(s) for _, s in eval_points])
    if np.any(es <= 0):
        raise InvalidInputError("evaluation sigmas must be positive")
    lk_clean = np.atleast_1d(log_kernel(prob, eb, es, 0.0, "K"))
    log_peak = evaluation_box_log_peak(prob, eb, es)
    rel_clean = np.exp(lk_clean - log_peak)

    def per_omega(omega):
        s_pts, lr_pts = _log_ratio_sum(prob, omega, eb, es)
        out = {"ratio_dist": float(np.max(np.abs(np.exp(lr_pts) - 1.0))) if lr_pts.size else 0.0}
        if method == "grid":
            si = split_integrals(prob, omega, resolution)
            lmr = si.log_marginal_ratio
            out.update(near=si.near_mass, far=si.far_mass, se=None)
        else:
            pooled, ess_tot = [], 0.0
            for c in chains:
                s_c, _ = _log_ratio_sum(prob, omega, c.beta, c.sigma)
                w = np.exp(s_c)
                pooled.append(w)
                ess_tot += effective_sample_size(w)
            w = np.concatenate(pooled)
            R = float(w.mean())
            lmr = math.log(R)
            out.update(rel_se=float(w.std(ddof=1) / math.sqrt(ess_tot)) / R)
            near_ind = _near_mask(prob, omega, np.concatenate([c.beta for c in chains]))
            out.update(near=float((w * near_ind).mean()), far=float((w * ~near_ind).mean()))
        q = np.exp(s_pts - lmr)
        d = rel_clean * np.abs(q - 1.0)
        out.update(lmr=lmr, pointwise=d)
        if method == "mcmc":
            out["se"] = float(np.max(rel_clean * q) * out["rel_se"])
        return out

    if n_threads > 1 and om.size > 1 and method == "grid":
        with ThreadPoolExecutor(max_workers=n_threads) as ex:
            results = list(ex.map(per_omega, om))
    else:
        results = [per_omega(w) for w in om]

    pointwise = np.stack([r["pointwise"] for r in results])
    size_K, size_L = prob.K.size, prob.L.size
    if size_L:
        log_env = log_envelope(om, size_K, size_L, prob.p, prob.error.gamma)
    else:
        log_env = np.full(om.size, -np.inf)
    report = RobustnessReport(
        omegas=om,
        pointwise_sup_dist=pointwise.max(axis=1),
        ratio_dist=np.array([r["ratio_dist"] for r in results]),
        marginal_ratio=np.array([r["lmr"] for r in results]),
        envelope=np.exp(log_env),
        log_envelope=log_env,
        condition_margin=cond.margin,
        method=method,
        eval_points=[(b, s) for b, s in zip(eb, es)],
        pointwise=pointwise,
        outside_theorem=outside,
        control=bool(control),
        dist_se=None if method == "grid" else np.array([r["se"] for r in results]),
        near_mass=np.array([r["near"] for r in results]),
        far_mass=np.array([r["far"] for r in results]),
        meta={"normaliser": "peak clean density over the evaluation box",
              "peak_over_points_ratio": float(np.exp(lk_clean.max() - log_peak)),
              "resolution": resolution, "n_draws": n_draws if method == "mcmc" else None,
              "seeds": list(seeds) if method == "mcmc" else None,
              "chain_acceptance": None if chains is None else [c.acceptance_rate for c in chains]},
    )
    return report


def _near_mask(prob, omega, beta):
    y = observations_at(prob, omega)
    L = prob.L
    if L.size == 0:
        return np.ones(beta.shape[0], dtype=bool)
    r = y[L][None, :] - beta @ prob.X[L].T
    return np.all(np.abs(r) >= np.abs(y[L])[None, :] / 2.0, axis=1)


def indicator_split_mass(prob: RegressionProblem, omega, method="grid", resolution=1.0,
                         n_draws=20_000, seeds=(0, 1)):
    """Near and far integrals of the outlier-normalised kernel, relative to the clean marginal.

    Their sum equals ``exp(log_marginal_ratio)``.  The grid method is exact
    to quadrature error; the MCMC method reweights draws from the clean
    posterior and cannot resolve the far region when it carries
    negligible mass.
    """
    if method == "grid":
        si = split_integrals(prob, omega, resolution)
        return si.near_mass, si.far_mass
    if method != "mcmc":
        raise InvalidInputError(f"unknown method {method!r}")
    chains = run_chains(prob, 0.0, "K", n_draws, seeds)
    beta = np.concatenate([c.beta for c in chains])
    sigma = np.concatenate([c.sigma for c in chains])
    s, _ = _log_ratio_sum(prob, omega, beta, sigma)
    w = np.exp(s)
    near = _near_mask(prob, omega, beta)
    return float((w * near).mean()), float((w * ~near).mean())


@dataclass(frozen=True)
class EnvelopeFit:
    """Smallest constant C with ``far <= C * envelope`` on the ladder so far.

    ``constants[j]`` is the running maximum of ``far/envelope`` over the
    ladder up to ``omegas[j]``; it stops growing once the envelope
    dominates the far mass.  ``stable`` asks that the running constant vary
    by at most ``factor`` over the top ``top`` omegas.
    """

    omegas: tuple
    ratios: tuple
    constants: tuple
    top: int
    factor: float
    far_decay_exponent: float
    envelope_decay_exponent: float

    @property
    def C(self):
        return self.constants[-1]

    @property
    def stable(self):
        c = np.asarray(self.constants[-self.top:])
        return bool(np.all(c > 0) and c.max() / c.min() <= self.factor)

    @property
    def bounded(self):
        r = np.asarray(self.ratios[-self.top:])
        return bool(np.all(r <= self.C * (1.0 + 1e-12)))

    def to_dict(self):
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d.update(C=self.C, stable=self.stable, bounded=self.bounded)
        return d


def fit_envelope_constant(omegas, far_mass, log_env, top=3, factor=2.0) -> EnvelopeFit:
    om = np.asarray(omegas, dtype=float)
    far = np.asarray(far_mass, dtype=float)
    le = np.asarray(log_env, dtype=float)
    with np.errstate(divide="ignore"):
        log_ratio = np.log(far) - le
    ratios = np.exp(log_ratio)
    constants = np.maximum.accumulate(ratios)
    lo = np.log(om[-top:])
    with np.errstate(divide="ignore"):
        far_slope = float(np.polyfit(lo, np.log(far[-top:]), 1)[0]) if np.all(far[-top:] > 0) else -math.inf
    env_slope = float(np.polyfit(lo, le[-top:], 1)[0])
    return EnvelopeFit(tuple(om.tolist()), tuple(ratios.tolist()), tuple(constants.tolist()), int(top),
                       float(factor), far_slope, env_slope)
