"""Normalised posterior computation.

Two independent routes: tensor-grid quadrature for ``p <= 2`` (the oracle)
and adaptive random-walk Metropolis for any ``p``.

Grid design
-----------
Each coefficient axis is a union of sinh-mapped clusters
``c + w * sinh(u)`` with ``u`` uniform.  Near a centre the spacing is
``w * du``; far away it grows geometrically, so one axis resolves both the
narrow peaks of ``f((y_i - x_i'beta)/sigma)/sigma`` at small ``sigma`` and
the far outlier region at ``beta ~ omega``.  For ``p = 1`` the centres are
the points where some residual vanishes (``y_i / x_i``) plus the prior
centre 0.  The scale axis is uniform in ``log sigma``.  Integration is the
trapezoid rule in ``(beta, log sigma)``.
"""

from __future__ import annotations

import math
import warnings
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from . import kernels
from .diagnostics import effective_sample_size, gelman_rubin
from .errors import InvalidInputError, NumericalError, UnsupportedDimensionError
from .heavytail import (
    HALF_CAUCHY,
    INVERSE_GAMMA,
    PER_COORDINATE,
    coefficient_prior_logpdf,
    scale_prior_logpdf,
)
from .model import RegressionProblem, log_f_observations, log_kernel, observations_at

SIGMA_RANGE = (1e-4, 1e4)
BOUNDARY_MASS_TOL = 1e-3
_BOUNDARY_FRACTION = 0.05


def default_threads():
    try:
        return max(1, int(os.environ.get("POSTROBUST_THREADS", "1")))
    except ValueError:
        return 1


# ---------------------------------------------------------------------------
# grid construction
# ---------------------------------------------------------------------------


def _sinh_cluster(center, width, half_range, du):
    U = math.asinh(half_range / width)
    n = max(4, int(math.ceil(U / du)))
    u = np.linspace(-U, U, 2 * n + 1)
    return center + width * np.sinh(u)


def _merge_nodes(parts, rel=1e-12):
    x = np.sort(np.concatenate(parts))
    keep = np.ones(x.size, dtype=bool)
    keep[1:] = np.diff(x) > rel * (1e-300 + np.abs(x[1:]))
    return x[keep]


def trapezoid_weights(x):
    x = np.asarray(x, dtype=float)
    w = np.zeros_like(x)
    dx = np.diff(x)
    w[:-1] += dx / 2.0
    w[1:] += dx / 2.0
    return w


def _robust_fit(prob: RegressionProblem, rows):
    """Least-squares centre and MAD residual scale on ``rows``."""
    X = prob.X[rows]
    y = prob.a[rows]
    if rows.size >= prob.p:
        beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    else:
        beta = np.zeros(prob.p)
    r = y - X @ beta
    s = 1.4826 * float(np.median(np.abs(r - np.median(r)))) if r.size else 0.0
    if not s > 0:
        s = max(float(np.std(y)) if y.size else 0.0, 1.0)
    return beta, s


@dataclass
class GridSpec:
    """Node sets and the knobs that produced them."""

    beta_axes: list
    sigma_axis: np.ndarray
    half_ranges: list
    sigma_range: tuple
    resolution: float


def _centres_p1(prob, omega, rows):
    x = prob.X[rows, 0]
    y = observations_at(prob, omega)[rows]
    ok = x != 0
    return np.unique(np.concatenate([[0.0], y[ok] / x[ok]]))


def build_grid(prob: RegressionProblem, omega, rows, resolution=1.0, half_ranges=None,
               sigma_range=SIGMA_RANGE, extra_nodes=None) -> GridSpec:
    p = prob.p
    if p > 2:
        raise UnsupportedDimensionError(f"grid quadrature supports p <= 2, got p={p}")
    k_rows = np.intersect1d(rows, prob.K)
    beta_hat, s = _robust_fit(prob, k_rows if k_rows.size else rows)
    y = observations_at(prob, omega)
    sig_lo, sig_hi = sigma_range
    axes, hrs = [], []
    if p == 1:
        centres = _centres_p1(prob, omega, rows)
        if half_ranges is None:
            half_ranges = [abs(beta_hat[0]) + 20.0 * s + 2.0 * float(np.max(np.abs(centres)))]
        du = 0.02 / resolution
        width = min(sig_lo, s)
        parts = [_sinh_cluster(c, width, half_ranges[0], du) for c in centres]
        if extra_nodes is not None and len(extra_nodes[0]):
            parts.append(np.asarray(extra_nodes[0], dtype=float))
        axes.append(_merge_nodes(parts))
        hrs = list(half_ranges)
    else:
        XtX = prob.X[k_rows].T @ prob.X[k_rows] if k_rows.size >= p else np.eye(p)
        try:
            cov = np.linalg.inv(XtX)
        except np.linalg.LinAlgError:
            cov = np.eye(p)
        ymax = float(np.max(np.abs(y[rows]))) if rows.size else 1.0
        xmin = float(np.min(np.linalg.norm(prob.X[rows], axis=1))) if rows.size else 1.0
        if half_ranges is None:
            half_ranges = [
                abs(beta_hat[k]) + 20.0 * s * math.sqrt(max(cov[k, k], 1e-12) * max(k_rows.size, 1))
                + 2.0 * ymax / max(xmin, 1e-12)
                for k in range(p)
            ]
        du = 0.2 / resolution
        for k in range(p):
            width = max(s * math.sqrt(max(cov[k, k], 1e-12)) * 0.05, 10.0 * sig_lo)
            parts = [_sinh_cluster(c, width, half_ranges[k], du) for c in {0.0, float(beta_hat[k])}]
            if extra_nodes is not None and len(extra_nodes[k]):
                parts.append(np.asarray(extra_nodes[k], dtype=float))
            axes.append(_merge_nodes(parts))
        hrs = list(half_ranges)
    dl = (0.05 if p == 1 else 0.1) / resolution
    n_sig = int(math.ceil(math.log(sig_hi / sig_lo) / dl))
    sigma_axis = np.exp(np.linspace(math.log(sig_lo), math.log(sig_hi), n_sig + 1))
    return GridSpec(axes, sigma_axis, hrs, (sig_lo, sig_hi), resolution)


def _flat_beta(spec: GridSpec):
    mesh = np.meshgrid(*spec.beta_axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def _log_kernel_on_grid(prob, omega, rows, spec: GridSpec, normalize_outliers=True):
    """Log kernel (density in beta, sigma) on the tensor grid, shape (nb1[, nb2], ns)."""
    beta = _flat_beta(spec)
    sig = spec.sigma_axis
    y = observations_at(prob, omega)
    resid = np.ascontiguousarray(y[rows][:, None] - prob.X[rows] @ beta.T)
    offset = np.zeros(rows.size)
    if normalize_outliers:
        off_all = log_f_observations(prob, omega)
        offset = np.where(prob.b[rows] != 0, off_all[rows], 0.0)
    if rows.size:
        ll = kernels.loglik_grid(resid, np.ascontiguousarray(sig), prob.error.gamma, np.ascontiguousarray(offset))
    else:
        ll = np.zeros((beta.shape[0], sig.size))
    lp = coefficient_prior_logpdf(beta[:, None, :], sig[None, :], prob.coeff_prior)
    lp = lp + scale_prior_logpdf(sig, prob.scale_prior)[None, :]
    out = ll + lp
    shape = tuple(ax.size for ax in spec.beta_axes) + (sig.size,)
    return out.reshape(shape)


def _log_cell_weights(spec: GridSpec):
    """Log trapezoid weights in (beta, log sigma) including the sigma Jacobian."""
    out = np.log(trapezoid_weights(np.log(spec.sigma_axis))) + np.log(spec.sigma_axis)
    for ax in reversed(spec.beta_axes):
        out = np.log(trapezoid_weights(ax)).reshape((-1,) + (1,) * out.ndim) + out[None, ...]
    return out


def _boundary_mass(spec: GridSpec, logmass):
    """Mass fraction sitting in the outer 5% of each axis."""
    total = logsumexp(logmass)
    fr = {}
    for k, ax in enumerate(spec.beta_axes):
        lo, hi = ax[0], ax[-1]
        span = hi - lo
        edge = (ax < lo + _BOUNDARY_FRACTION * span) | (ax > hi - _BOUNDARY_FRACTION * span)
        m = np.moveaxis(logmass, k, 0)[edge]
        fr[f"beta{k}"] = float(np.exp(logsumexp(m) - total)) if m.size else 0.0
    ls = np.log(spec.sigma_axis)
    span = ls[-1] - ls[0]
    lo_edge = ls < ls[0] + _BOUNDARY_FRACTION * span
    hi_edge = ls > ls[-1] - _BOUNDARY_FRACTION * span
    fr["sigma_lo"] = float(np.exp(logsumexp(logmass[..., lo_edge]) - total))
    fr["sigma_hi"] = float(np.exp(logsumexp(logmass[..., hi_edge]) - total))
    return fr


def _adapt(prob, omega, rows, resolution, evaluate, max_expansions=6, extra_nodes=None):
    """Build a grid, expanding ranges until boundary mass is below tolerance.

    ``evaluate(spec)`` returns the log kernel used for the mass check.
    """
    spec = build_grid(prob, omega, rows, resolution, extra_nodes=extra_nodes)
    for it in range(max_expansions + 1):
        logk = evaluate(spec)
        if not np.all(np.isfinite(logk) | (logk == -np.inf)):
            bad = np.argwhere(~np.isfinite(logk) & (logk != -np.inf))[0]
            raise NumericalError("non-finite kernel on grid", location=tuple(int(i) for i in bad))
        logmass = logk + _log_cell_weights(spec)
        bm = _boundary_mass(spec, logmass)
        beta_bad = [k for k in range(prob.p) if bm[f"beta{k}"] > BOUNDARY_MASS_TOL]
        lo_bad = bm["sigma_lo"] > BOUNDARY_MASS_TOL
        hi_bad = bm["sigma_hi"] > BOUNDARY_MASS_TOL
        if not (beta_bad or lo_bad or hi_bad):
            return spec, logk, logmass, bm
        if it == max_expansions:
            warnings.warn(f"grid boundary mass above {BOUNDARY_MASS_TOL:g} after {max_expansions} "
                          f"expansions: {bm}", RuntimeWarning, stacklevel=3)
            return spec, logk, logmass, bm
        hrs = [h * (10.0 if k in beta_bad else 1.0) for k, h in enumerate(spec.half_ranges)]
        lo, hi = spec.sigma_range
        spec = build_grid(prob, omega, rows, resolution, half_ranges=hrs,
                          sigma_range=(lo / 100.0 if lo_bad else lo, hi * 100.0 if hi_bad else hi),
                          extra_nodes=extra_nodes)


@dataclass
class PosteriorGrid:
    """Posterior density on a tensor grid, normalised to unit trapezoid mass.

    ``values`` is the density with respect to ``d(beta) d(sigma)``;
    ``log_marginal`` is the log normalising constant of the kernel used
    (outlier terms pre-normalised by ``f(y_i)`` when present).
    """

    beta_axes: list
    sigma_axis: np.ndarray
    values: np.ndarray
    log_marginal: float
    boundary_mass: dict
    omega: float
    subset: np.ndarray
    log_values: np.ndarray = field(repr=False, default=None)

    @property
    def p(self):
        return len(self.beta_axes)

    def _mass(self):
        spec = GridSpec(self.beta_axes, self.sigma_axis, [], (), 1.0)
        return np.exp(self.log_values + _log_cell_weights(spec))

    def integral(self):
        return float(self._mass().sum())

    def beta_marginal(self, k=0):
        """Marginal density of coefficient ``k`` on its axis."""
        m = self._mass()
        other = tuple(i for i in range(m.ndim) if i != k)
        return m.sum(axis=other) / trapezoid_weights(self.beta_axes[k])

    def beta_cdf(self, k=0):
        ax = self.beta_axes[k]
        dens = self.beta_marginal(k)
        cum = np.concatenate([[0.0], np.cumsum(np.diff(ax) * (dens[1:] + dens[:-1]) / 2.0)])
        cum /= cum[-1]
        return lambda x: np.interp(x, ax, cum)

    def sigma_marginal(self):
        m = self._mass()
        return m.sum(axis=tuple(range(self.p))) / (trapezoid_weights(np.log(self.sigma_axis)) * self.sigma_axis)

    def moments(self):
        """Posterior means and standard deviations of each beta_k and sigma."""
        m = self._mass()
        m = m / m.sum()
        out = {}
        for k in range(self.p):
            shape = [1] * m.ndim
            shape[k] = -1
            b = self.beta_axes[k].reshape(shape)
            mu = float((m * b).sum())
            out[f"beta{k}"] = (mu, float(math.sqrt(max((m * (b - mu) ** 2).sum(), 0.0))))
        s = self.sigma_axis.reshape((1,) * self.p + (-1,))
        mu = float((m * s).sum())
        out["sigma"] = (mu, float(math.sqrt(max((m * (s - mu) ** 2).sum(), 0.0))))
        return out

    def quantile_beta(self, q, k=0):
        ax = self.beta_axes[k]
        dens = self.beta_marginal(k)
        cum = np.concatenate([[0.0], np.cumsum(np.diff(ax) * (dens[1:] + dens[:-1]) / 2.0)])
        cum /= cum[-1]
        return float(np.interp(q, cum, ax))

    def quantile_log_sigma(self, q):
        ls = np.log(self.sigma_axis)
        dens = self.sigma_marginal() * self.sigma_axis
        cum = np.concatenate([[0.0], np.cumsum(np.diff(ls) * (dens[1:] + dens[:-1]) / 2.0)])
        cum /= cum[-1]
        return float(np.interp(q, cum, ls))

    def to_dict(self, include_values=False):
        d = {
            "p": self.p, "omega": self.omega, "subset": self.subset.tolist(),
            "log_marginal": self.log_marginal, "integral": self.integral(),
            "boundary_mass": self.boundary_mass,
            "beta_axis_sizes": [int(a.size) for a in self.beta_axes],
            "sigma_range": [float(self.sigma_axis[0]), float(self.sigma_axis[-1])],
            "n_sigma": int(self.sigma_axis.size),
            "moments": {k: {"mean": v[0], "sd": v[1]} for k, v in self.moments().items()},
        }
        if include_values:
            d["beta_axes"] = [a.tolist() for a in self.beta_axes]
            d["sigma_axis"] = self.sigma_axis.tolist()
            d["values"] = self.values.tolist()
        return d


def grid_posterior(prob: RegressionProblem, omega=0.0, subset=None, resolution=1.0) -> PosteriorGrid:
    """Normalised posterior of ``(beta, sigma)`` given the rows in ``subset``.

    Ranges start from a least-squares fit on the clean rows (plus or minus
    twenty robust residual scales, widened to contain every residual-zero
    point) and ``sigma`` in ``[1e-4, 1e4]``; both expand until the mass in
    the outer 5% of every axis is below ``1e-3``.
    """
    if prob.p > 2:
        raise UnsupportedDimensionError(f"grid quadrature supports p <= 2, got p={prob.p}")
    rows = prob.resolve_subset(subset)
    spec, logk, logmass, bm = _adapt(prob, omega, rows, resolution,
                                     lambda sp: _log_kernel_on_grid(prob, omega, rows, sp))
    logZ = float(logsumexp(logmass))
    if not math.isfinite(logZ):
        raise NumericalError("posterior kernel integrates to zero or infinity on the grid")
    logv = logk - logZ
    return PosteriorGrid(spec.beta_axes, spec.sigma_axis, np.exp(logv), logZ, bm, float(omega), rows, logv)


# ---------------------------------------------------------------------------
# contaminated vs leave-outliers-out integrals on a shared grid
# ---------------------------------------------------------------------------


@dataclass
class SplitIntegrals:
    """Integrals of the normalised-outlier kernel and the clean-row kernel.

    All on one shared grid; ``log_near``/``log_far`` split the former by
    whether every outlier residual is at least half the outlier's size.
    """

    omega: float
    log_Z_full: float
    log_Z_clean: float
    log_near: float
    log_far: float
    boundary_mass: dict
    n_nodes: int

    @property
    def log_marginal_ratio(self):
        return self.log_Z_full - self.log_Z_clean

    @property
    def near_mass(self):
        return math.exp(self.log_near - self.log_Z_clean)

    @property
    def far_mass(self):
        return math.exp(self.log_far - self.log_Z_clean)


def _indicator_boundaries(prob, omega):
    """Per-axis beta values where some outlier residual equals half the outlier (p = 1)."""
    if prob.p != 1:
        return None
    y = observations_at(prob, omega)
    nodes = []
    for i in prob.L:
        x = prob.X[i, 0]
        if x != 0:
            nodes.extend([(y[i] - abs(y[i]) / 2.0) / x, (y[i] + abs(y[i]) / 2.0) / x])
    return [np.asarray(nodes)]


def _near_indicator(prob, omega, beta):
    y = observations_at(prob, omega)
    L = prob.L
    if L.size == 0:
        return np.ones(beta.shape[0], dtype=bool)
    r = y[L][None, :] - beta @ prob.X[L].T
    return np.all(np.abs(r) >= np.abs(y[L])[None, :] / 2.0, axis=1)


def split_integrals(prob: RegressionProblem, omega, resolution=1.0) -> SplitIntegrals:
    """Integrate the full and clean kernels and split the former into near/far parts.

    Both kernels are integrated on the same nodes, so with no outliers the
    log ratio is exactly zero.  The split is done per trapezoid cell using
    the cell-centre indicator; for ``p = 1`` the indicator boundaries are
    grid nodes, so the split follows the true regions and
    ``near + far = full`` holds to rounding.
    """
    if prob.p > 2:
        raise UnsupportedDimensionError(f"grid quadrature supports p <= 2, got p={prob.p}")
    rows_all = np.arange(prob.n)
    K = prob.K
    extra = _indicator_boundaries(prob, omega)

    def evaluate(spec):
        full = _log_kernel_on_grid(prob, omega, rows_all, spec, normalize_outliers=True)
        clean = _log_kernel_on_grid(prob, omega, K, spec)
        evaluate.cache = (full, clean)
        # expansion is driven by whichever kernel has more boundary mass
        return np.logaddexp(full, clean)

    spec, _, _, bm = _adapt(prob, omega, rows_all, resolution, evaluate, extra_nodes=extra)
    full, clean = evaluate.cache
    lw = _log_cell_weights(spec)
    log_Z_full = float(logsumexp(full + lw))
    log_Z_clean = float(logsumexp(clean + lw))

    # per-cell trapezoid: integrate out sigma first, then average corners
    lws = np.log(trapezoid_weights(np.log(spec.sigma_axis))) + np.log(spec.sigma_axis)
    G = logsumexp(full + lws, axis=-1)
    if prob.p == 1:
        ax = spec.beta_axes[0]
        cell = np.logaddexp(G[:-1], G[1:]) + np.log(np.diff(ax) / 2.0)
        mids = ((ax[:-1] + ax[1:]) / 2.0)[:, None]
    else:
        a0, a1 = spec.beta_axes
        corners = np.logaddexp(np.logaddexp(G[:-1, :-1], G[1:, :-1]), np.logaddexp(G[:-1, 1:], G[1:, 1:]))
        cell = corners + np.log(np.diff(a0) / 4.0)[:, None] + np.log(np.diff(a1))[None, :]
        m0, m1 = np.meshgrid((a0[:-1] + a0[1:]) / 2.0, (a1[:-1] + a1[1:]) / 2.0, indexing="ij")
        mids = np.stack([m0.ravel(), m1.ravel()], axis=-1)
        cell = cell.ravel()
    near = _near_indicator(prob, omega, mids)
    log_near = float(logsumexp(cell[near])) if near.any() else -math.inf
    log_far = float(logsumexp(cell[~near])) if (~near).any() else -math.inf
    return SplitIntegrals(float(omega), log_Z_full, log_Z_clean, log_near, log_far, bm,
                          int(full.size))


def log_marginal_ratio(prob: RegressionProblem, omega, resolution=1.0) -> float:
    """``log int h(.; omega) - log int (clean kernel)``; zero when there are no outliers."""
    if prob.L.size == 0:
        return 0.0
    return split_integrals(prob, omega, resolution).log_marginal_ratio


# ---------------------------------------------------------------------------
# MCMC
# ---------------------------------------------------------------------------


def _prior_codes(prob: RegressionProblem):
    from scipy.special import gammaln

    cp = prob.coeff_prior
    if cp.variant == PER_COORDINATE:
        coef_kind, coef_params = kernels.COEF_PER_COORDINATE, np.asarray(cp.nu, dtype=float)
    else:
        nu, p = cp.nu[0], cp.dim
        const = gammaln((nu + p) / 2.0) - gammaln(nu / 2.0) - 0.5 * p * math.log(nu * math.pi)
        coef_kind, coef_params = kernels.COEF_MULTIVARIATE, np.array([nu, const])
    sp = prob.scale_prior
    if sp.family == HALF_CAUCHY:
        s = sp.params[0]
        scale_kind, scale_params = kernels.SCALE_HALF_CAUCHY, np.array([s, math.log(2.0 / (math.pi * s))])
    elif sp.family == INVERSE_GAMMA:
        a, b = sp.params
        scale_kind, scale_params = kernels.SCALE_INVERSE_GAMMA, np.array([a, b, a * math.log(b) - gammaln(a)])
    else:
        m, s = sp.params
        scale_kind, scale_params = kernels.SCALE_LOG_NORMAL, np.array([m, s, -math.log(s) - 0.5 * math.log(2 * math.pi)])
    return coef_kind, coef_params, scale_kind, scale_params


@dataclass
class McmcChain:
    """Post-warmup draws of ``(beta_1..beta_p, sigma)``."""

    draws: np.ndarray
    acceptance_rate: float
    ess: np.ndarray
    seed: int
    log_target: np.ndarray = field(repr=False, default=None)
    warnings: list = field(default_factory=list)
    proposal_scale: np.ndarray = field(repr=False, default=None)

    @property
    def beta(self):
        return self.draws[:, :-1]

    @property
    def sigma(self):
        return self.draws[:, -1]

    @property
    def low_ess(self):
        return any("ess" in w for w in self.warnings)

    def summary(self):
        d = self.draws
        names = [f"beta{k}" for k in range(d.shape[1] - 1)] + ["sigma"]
        return {
            "seed": self.seed, "n_draws": int(d.shape[0]), "acceptance_rate": self.acceptance_rate,
            "warnings": list(self.warnings),
            "parameters": {
                nm: {"mean": float(d[:, j].mean()), "sd": float(d[:, j].std(ddof=1)), "ess": float(self.ess[j])}
                for j, nm in enumerate(names)
            },
        }


def _start_point(prob, rows, y, log_t, rng):
    if rows.size >= prob.p:
        beta, *_ = np.linalg.lstsq(prob.X[rows], y[rows], rcond=None)
        r = y[rows] - prob.X[rows] @ beta
        s = 1.4826 * float(np.median(np.abs(r - np.median(r)))) if r.size else 1.0
    else:
        beta, s = np.zeros(prob.p), 1.0
    if not (s > 0 and math.isfinite(s)):
        s = 1.0
    x0 = np.concatenate([beta, [math.log(s)]])
    for attempt in range(1000):
        if math.isfinite(log_t(x0)):
            return x0, s
        x0 = np.concatenate([rng.normal(0.0, 10.0 ** rng.uniform(-2, 3), prob.p), [rng.uniform(-5, 5)]])
    raise NumericalError("start-point search failed after 1000 attempts")


def mcmc_posterior(prob: RegressionProblem, omega=0.0, subset=None, n_draws=20_000, seed=0,
                   n_warmup=None, target_accept=0.3, min_ess=400.0, backend=None) -> McmcChain:
    """Random-walk Metropolis on ``(beta, log sigma)``.

    Proposal scales adapt during a discarded warmup (default: as long as the
    sampling phase) and are frozen afterwards.  Deterministic given ``seed``.
    """
    if n_draws < 1000:
        raise InvalidInputError("n_draws must be >= 1000")
    impl = kernels if backend is None else kernels.get_backend(backend)
    rows = prob.resolve_subset(subset)
    y = observations_at(prob, omega)
    offset = np.where(prob.b[rows] != 0, log_f_observations(prob, omega)[rows], 0.0)
    X = np.ascontiguousarray(prob.X[rows])
    ys = np.ascontiguousarray(y[rows])
    codes = _prior_codes(prob)
    args = (X, ys, np.ascontiguousarray(offset), prob.error.gamma, codes[0],
            np.ascontiguousarray(codes[1]), codes[2], np.ascontiguousarray(codes[3]))
    rng = np.random.default_rng(seed)
    x0, s = _start_point(prob, rows, y, lambda th: impl.log_target(np.asarray(th, dtype=float), *args), rng)
    n_warmup = int(n_draws if n_warmup is None else n_warmup)
    total = n_warmup + int(n_draws)
    d = prob.p + 1
    normals = rng.standard_normal((total, d))
    log_unif = np.log1p(-rng.random(total))
    scale0 = np.concatenate([np.full(prob.p, 0.5 * s), [0.5]])
    draws, logp, acc, scale, log_lam = impl.rwm(
        x0, normals, log_unif, scale0, n_warmup, target_accept, *args)
    out = draws.copy()
    out[:, -1] = np.exp(draws[:, -1])
    ess = np.array([effective_sample_size(draws[:, j]) for j in range(d)])
    rate = acc / float(n_draws)
    warnings = []
    if not 0.1 <= rate <= 0.5:
        warnings.append(f"acceptance rate {rate:.3f} outside [0.1, 0.5]")
    if ess.min() < min_ess:
        warnings.append(f"ess {ess.min():.0f} below minimum {min_ess:.0f}")
    return McmcChain(out, rate, ess, int(seed), logp, warnings, scale * math.exp(log_lam))


def run_chains(prob, omega=0.0, subset=None, n_draws=20_000, seeds=(0, 1), n_threads=None, **kw):
    """Independent chains, one per seed, optionally in parallel threads."""
    n_threads = default_threads() if n_threads is None else n_threads
    if n_threads <= 1 or len(seeds) == 1:
        return [mcmc_posterior(prob, omega, subset, n_draws, s, **kw) for s in seeds]
    with ThreadPoolExecutor(max_workers=n_threads) as ex:
        futs = [ex.submit(mcmc_posterior, prob, omega, subset, n_draws, s, **kw) for s in seeds]
        return [f.result() for f in futs]


def gelman_rubin_chains(chains):
    """R-hat per coordinate of ``(beta, log sigma)`` across chains."""
    n = min(c.draws.shape[0] for c in chains)
    d = chains[0].draws.shape[1]
    out = []
    for j in range(d):
        arr = np.stack([c.draws[:n, j] if j < d - 1 else np.log(c.draws[:n, j]) for c in chains])
        out.append(gelman_rubin(arr))
    return np.asarray(out)


def kernel_at(prob, beta, sigma, omega=0.0, subset=None):
    """Convenience wrapper: log kernel with outlier terms pre-normalised."""
    return log_kernel(prob, beta, sigma, omega, subset, normalize_outliers=True)
