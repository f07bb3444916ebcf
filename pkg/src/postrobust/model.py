"""Regression problem with an outlier schedule ``y_i = a_i + b_i * omega``.

Observations are never stored: they are generated from ``(a, b, omega)``
so one problem serves an entire omega sweep.  Rows with ``b_i == 0`` form
the non-outlying set K, the others the outlying set L.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BudgetError, InvalidInputError
from .heavytail import (
    CoefficientPrior,
    LptnDensity,
    ScalePrior,
    _logpdf_abs,
    coefficient_prior_logpdf,
    scale_prior_logpdf,
)

GENERAL_POSITION_TOL = 1e-9
COMBINATION_BUDGET = 1_000_000


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class RegressionProblem:
    X: np.ndarray
    a: np.ndarray
    b: np.ndarray
    error: LptnDensity = field(default_factory=lambda: LptnDensity(1.0))
    coeff_prior: CoefficientPrior | None = None
    scale_prior: ScalePrior = field(default_factory=ScalePrior.half_cauchy)

    def __post_init__(self):
        X = np.array(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise InvalidInputError(f"X must be an n x p matrix with n, p >= 1, got shape {X.shape}")
        n, p = X.shape
        a = np.array(self.a, dtype=float).ravel()
        b = np.array(self.b, dtype=float).ravel()
        if a.shape != (n,) or b.shape != (n,):
            raise InvalidInputError(f"a and b must have length n={n}, got {a.shape[0]} and {b.shape[0]}")
        for name, arr in (("X", X), ("a", a), ("b", b)):
            if not np.all(np.isfinite(arr)):
                raise InvalidInputError(f"{name} contains non-finite values")
        cp = self.coeff_prior
        if cp is None:
            cp = CoefficientPrior.per_coordinate([1.0] * p)
        if cp.dim != p:
            raise InvalidInputError(f"coefficient prior has dimension {cp.dim}, design has p={p}")
        object.__setattr__(self, "X", _frozen(X))
        object.__setattr__(self, "a", _frozen(a))
        object.__setattr__(self, "b", _frozen(b))
        object.__setattr__(self, "coeff_prior", cp)

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def p(self):
        return self.X.shape[1]

    @property
    def K(self):
        return np.flatnonzero(self.b == 0)

    @property
    def L(self):
        return np.flatnonzero(self.b != 0)

    def resolve_subset(self, subset=None):
        """Index array for ``None`` (all rows), ``"K"``, ``"L"`` or explicit indices."""
        if subset is None or (isinstance(subset, str) and subset == "all"):
            return np.arange(self.n)
        if isinstance(subset, str):
            if subset == "K":
                return self.K
            if subset == "L":
                return self.L
            raise InvalidInputError(f"unknown subset {subset!r}")
        idx = np.unique(np.asarray(subset, dtype=int))
        if idx.size and (idx.min() < 0 or idx.max() >= self.n):
            raise InvalidInputError("subset indices out of range")
        return idx

    def with_b(self, b):
        return RegressionProblem(self.X, self.a, b, self.error, self.coeff_prior, self.scale_prior)

    def to_dict(self):
        return {
            "X": self.X.tolist(), "a": self.a.tolist(), "b": self.b.tolist(),
            "gamma": self.error.gamma, "coeff_prior": self.coeff_prior.to_dict(),
            "scale_prior": self.scale_prior.to_dict(),
        }


def canonical_problem() -> RegressionProblem:
    """Intercept-only reference problem: four clean rows and one outlier."""
    return RegressionProblem(
        X=np.ones((5, 1)),
        a=[-1.0, -0.5, 0.0, 0.5, 1.0],
        b=[0.0, 0.0, 0.0, 0.0, 1.0],
        error=LptnDensity(1.0),
        coeff_prior=CoefficientPrior.per_coordinate([1.0]),
        scale_prior=ScalePrior.half_cauchy(1.0),
    )


def observations_at(prob: RegressionProblem, omega: float) -> np.ndarray:
    if not (omega >= 0):
        raise InvalidInputError("omega must be >= 0")
    return prob.a + prob.b * omega


def log_f_observations(prob: RegressionProblem, omega: float) -> np.ndarray:
    """``log f(y_i(omega))`` for every row, the normaliser of outlier terms."""
    return _logpdf_abs(np.abs(observations_at(prob, omega)), prob.error.gamma)


def _prep(prob, beta, sigma):
    beta = np.asarray(beta, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if beta.ndim == 0 or beta.shape[-1] != prob.p:
        raise InvalidInputError(f"beta must have trailing dimension p={prob.p}")
    if np.any(~(sigma > 0)):
        raise InvalidInputError("sigma must be positive")
    return beta, sigma


def log_likelihood_terms(prob, beta, sigma, omega, subset=None, normalize_outliers=False):
    """Per-observation terms ``log{f((y_i - x_i'beta)/sigma)/sigma}``.

    Returns an array of shape ``broadcast(beta[..., 0], sigma) + (len(subset),)``.
    With ``normalize_outliers`` the rows in L have ``log f(y_i)`` subtracted,
    which keeps them O(1) for enormous omega.
    """
    beta, sigma = _prep(prob, beta, sigma)
    idx = prob.resolve_subset(subset)
    y = observations_at(prob, omega)[idx]
    fitted = beta @ prob.X[idx].T
    s = sigma[..., None]
    terms = _logpdf_abs(np.abs(y - fitted) / s, prob.error.gamma) - np.log(s)
    if normalize_outliers:
        off = np.where(prob.b[idx] != 0, log_f_observations(prob, omega)[idx], 0.0)
        terms = terms - off
    return terms


def log_prior(prob, beta, sigma):
    beta, sigma = _prep(prob, beta, sigma)
    return coefficient_prior_logpdf(beta, sigma, prob.coeff_prior) + scale_prior_logpdf(sigma, prob.scale_prior)


def log_kernel(prob, beta, sigma, omega=0.0, subset=None, include_prior=True, normalize_outliers=False):
    """Unnormalised log posterior ``log pi(beta, sigma) + sum_{i in subset} log f(.)/sigma``.

    ``subset="K"`` gives the leave-outliers-out kernel.  ``include_prior=False``
    drops the prior (a flat prior), which tests use to isolate likelihood terms.
    """
    beta, sigma = _prep(prob, beta, sigma)
    out = log_likelihood_terms(prob, beta, sigma, omega, subset, normalize_outliers).sum(axis=-1)
    if include_prior:
        out = out + log_prior(prob, beta, sigma)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class ConditionResult:
    holds: bool
    margin: int
    size_K: int
    size_L: int
    p: int

    def to_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def robustness_condition(prob: RegressionProblem) -> ConditionResult:
    """``|K| >= |L| + p``; the margin is ``|K| - |L| - p``."""
    k, l = prob.K.size, prob.L.size
    margin = int(k - l - prob.p)
    return ConditionResult(margin >= 0, margin, int(k), int(l), prob.p)


@dataclass(frozen=True)
class GeneralPositionReport:
    cond_i: bool
    cond_ii: bool | None
    cond_iii: bool | None
    witnesses: dict
    tol: float

    @property
    def holds(self):
        return bool(self.cond_i and self.cond_ii is not False and self.cond_iii is not False)

    def to_dict(self):
        return {"cond_i": self.cond_i, "cond_ii": self.cond_ii, "cond_iii": self.cond_iii,
                "holds": self.holds, "tol": self.tol,
                "witnesses": {k: [list(map(int, w)) for w in v] for k, v in self.witnesses.items()}}


def _singular_mask(mats, tol):
    sv = np.linalg.svd(mats, compute_uv=False)
    return ~(sv[:, -1] > tol * sv[:, 0])


def _scan(n, size, build, tol, exempt=None, max_witnesses=100):
    """Test every ``size``-subset of rows; return (holds, witnesses)."""
    witnesses = []
    holds = True
    it = itertools.combinations(range(n), size)
    while True:
        chunk = list(itertools.islice(it, 50_000))
        if not chunk:
            break
        idx = np.asarray(chunk, dtype=int)
        if exempt is not None:
            keep = ~exempt(idx)
            idx = idx[keep]
            if idx.size == 0:
                continue
        bad = _singular_mask(build(idx), tol)
        if bad.any():
            holds = False
            witnesses.extend(tuple(r) for r in idx[bad][: max(0, max_witnesses - len(witnesses))])
    return holds, witnesses


def general_position_arrays(Z, a, b, tol=GENERAL_POSITION_TOL) -> GeneralPositionReport:
    """Conditions (i)-(iii) of the covering lemma for rows ``Z`` and columns ``a``, ``b``.

    (i) every p rows of Z are invertible; (ii) every p+1 rows of ``[Z, a]``
    are invertible; (iii) every p+1 rows of ``[Z, b]`` are invertible unless
    all their ``b`` entries vanish.  A square matrix counts as invertible
    when its smallest singular value exceeds ``tol`` times its largest.
    """
    Z = np.asarray(Z, dtype=float)
    if Z.ndim == 1:
        Z = Z[:, None]
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    m, p = Z.shape
    if m >= p + 1 and math.comb(m, p + 1) > COMBINATION_BUDGET:
        raise BudgetError(f"C({m}, {p + 1}) = {math.comb(m, p + 1)} subsets exceeds budget {COMBINATION_BUDGET}")
    if math.comb(m, p) > COMBINATION_BUDGET:
        raise BudgetError(f"C({m}, {p}) subsets exceeds budget {COMBINATION_BUDGET}")
    ok_i, w_i = _scan(m, p, lambda idx: Z[idx], tol)
    witnesses = {"i": w_i, "ii": [], "iii": []}
    if m < p + 1:
        return GeneralPositionReport(ok_i, None, None, witnesses, tol)
    ok_ii, witnesses["ii"] = _scan(m, p + 1, lambda idx: np.concatenate([Z[idx], a[idx][..., None]], axis=-1), tol)
    ok_iii, witnesses["iii"] = _scan(
        m, p + 1, lambda idx: np.concatenate([Z[idx], b[idx][..., None]], axis=-1), tol,
        exempt=lambda idx: np.all(b[idx] == 0, axis=1),
    )
    return GeneralPositionReport(ok_i, ok_ii, ok_iii, witnesses, tol)


def general_position(prob: RegressionProblem, tol=GENERAL_POSITION_TOL) -> GeneralPositionReport:
    return general_position_arrays(prob.X, prob.a, prob.b, tol)


def augment_with_basis(Z, a, b):
    """Prepend the p standard basis rows with ``(a, b) = (0, 0)``.

    These rows stand for the coefficient-prior factors in the robustness
    argument (indices -1..-p); row ``k`` of the result is ``e_{k+1}``.
    """
    Z = np.asarray(Z, dtype=float)
    if Z.ndim == 1:
        Z = Z[:, None]
    p = Z.shape[1]
    return (np.vstack([np.eye(p), Z]),
            np.concatenate([np.zeros(p), np.asarray(a, dtype=float).ravel()]),
            np.concatenate([np.zeros(p), np.asarray(b, dtype=float).ravel()]))


def read_problem_csv(path, error=None, coeff_prior=None, scale_prior=None) -> RegressionProblem:
    """Load ``x1..xp, a, b`` columns (header required) into a problem.

    Errors name the offending column or the 1-based line number.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise InvalidInputError(f"{path}: empty file, header required") from None
        for col in ("a", "b"):
            if col not in header:
                raise InvalidInputError(f"{path}: missing required column '{col}'")
        xcols = sorted((h for h in header if h.startswith("x") and h[1:].isdigit()), key=lambda h: int(h[1:]))
        if not xcols:
            raise InvalidInputError(f"{path}: missing required column 'x1'")
        expected = [f"x{k}" for k in range(1, len(xcols) + 1)]
        if xcols != expected:
            missing = sorted(set(expected) - set(xcols), key=lambda h: int(h[1:]))
            raise InvalidInputError(f"{path}: missing required column '{missing[0]}'")
        pos = {h: i for i, h in enumerate(header)}
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise InvalidInputError(f"{path}: line {lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                vals = [float(row[pos[c]]) for c in xcols + ["a", "b"]]
            except ValueError as exc:
                raise InvalidInputError(f"{path}: line {lineno}: {exc}") from None
            if not all(math.isfinite(v) for v in vals):
                raise InvalidInputError(f"{path}: line {lineno}: non-finite value")
            rows.append(vals)
    if not rows:
        raise InvalidInputError(f"{path}: no data rows")
    arr = np.asarray(rows)
    p = len(xcols)
    kwargs = {}
    if error is not None:
        kwargs["error"] = error
    if scale_prior is not None:
        kwargs["scale_prior"] = scale_prior
    return RegressionProblem(arr[:, :p], arr[:, p], arr[:, p + 1], coeff_prior=coeff_prior, **kwargs)


def write_problem_csv(prob: RegressionProblem, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{k}" for k in range(1, prob.p + 1)] + ["a", "b"])
        for i in range(prob.n):
            w.writerow([repr(float(v)) for v in prob.X[i]] + [repr(float(prob.a[i])), repr(float(prob.b[i]))])
