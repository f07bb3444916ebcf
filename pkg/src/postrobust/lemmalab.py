"""Brute-force checks of the covering lemma and the product bound.

Covering lemma.  For rows ``z_i`` and shifts ``c_i(omega) = a_i + b_i omega``
a coefficient vector ``beta`` is *covered* when at most ``p`` of the
residuals ``|c_i - z_i'beta|`` are ``<= epsilon``; the lemma says that for
some ``epsilon`` every ``beta`` is covered once ``omega`` is large.

Product bound.  For ``||beta|| >= R``,
``prod_i 1/(1 + |w_i - z_i'beta|) <= (1 + delta ||beta||)^-(m - p + 1)``.

Sampled checks are falsification-style evidence.  The covering check adds
exact verdicts: an interval sweep for ``p = 1`` and, for any ``p``, the
minimax (Chebyshev) residual of every ``p + 1`` rows.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import InvalidInputError, PreconditionError
from .model import augment_with_basis, general_position_arrays

DEFAULT_SAMPLE_BUDGET = 100_000
N_RANDOM = 10_000
OMEGA_LADDER = tuple(10.0 ** k for k in range(0, 13))
EPSILON_HALVINGS = 30
PRODUCT_HALVINGS = 30
# relative slack on "<= epsilon" so that exact ties survive rounding
TIE_SLACK = 1e-12
RECHECK_SLACK = 1e-12


@dataclass(frozen=True)
class LemmaInstance:
    z: np.ndarray
    a: np.ndarray
    b: np.ndarray
    w: np.ndarray | None = None
    name: str = ""

    def __post_init__(self):
        z = np.asarray(self.z, dtype=float)
        if z.ndim == 1:
            z = z[:, None]
        if z.ndim != 2 or z.shape[0] == 0 or z.shape[1] == 0:
            raise InvalidInputError("z must be a non-empty m x p matrix")
        m = z.shape[0]
        object.__setattr__(self, "z", z)
        for nm in ("a", "b", "w"):
            v = getattr(self, nm)
            if v is None:
                if nm == "w":
                    continue
                v = np.zeros(m)
            v = np.asarray(v, dtype=float).ravel()
            if v.size != m:
                raise InvalidInputError(f"{nm} has length {v.size}, expected {m}")
            object.__setattr__(self, nm, v)
        arrays = [z, self.a, self.b] + ([self.w] if self.w is not None else [])
        if not all(np.all(np.isfinite(x)) for x in arrays):
            raise InvalidInputError("instance entries must be finite")

    @property
    def m(self):
        return self.z.shape[0]

    @property
    def p(self):
        return self.z.shape[1]

    def shifts(self, omega):
        return self.a + self.b * float(omega)

    def to_dict(self):
        d = {"name": self.name, "p": self.p, "m": self.m, "z": self.z.tolist(),
             "a": self.a.tolist(), "b": self.b.tolist()}
        if self.w is not None:
            d["w"] = self.w.tolist()
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d):
        try:
            z = np.asarray(d["z"], dtype=float)
        except KeyError:
            raise InvalidInputError("instance is missing field 'z'") from None
        inst = cls(z, d.get("a"), d.get("b"), d.get("w"), str(d.get("name", "")))
        for key, val in (("p", inst.p), ("m", inst.m)):
            if key in d and int(d[key]) != val:
                raise InvalidInputError(f"declared {key}={d[key]} but z implies {key}={val}")
        return inst

    @property
    def hash(self):
        """sha256 of the numeric content (name excluded)."""
        d = self.to_dict()
        d.pop("name")
        payload = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode()).hexdigest()


def save_instances(instances, path):
    with open(path, "w") as fh:
        json.dump([inst.to_dict() for inst in instances], fh, indent=2, sort_keys=True)


def load_instances(path):
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidInputError(f"{path}: line {exc.lineno}: {exc.msg}") from None
    if isinstance(raw, dict):
        raw = raw.get("instances", [raw])
    return [LemmaInstance.from_dict(d) for d in raw]


def augmented_instance(inst: LemmaInstance) -> LemmaInstance:
    """Prepend the ``p`` basis rows with ``(a, b) = (0, 0)``.

    This is how the robustness argument feeds the coefficient-prior factors
    into the covering lemma.
    """
    z, a, b = augment_with_basis(inst.z, inst.a, inst.b)
    w = None if inst.w is None else np.concatenate([np.zeros(inst.p), inst.w])
    return LemmaInstance(z, a, b, w, f"{inst.name}+basis" if inst.name else "augmented")


def instance_from_problem(prob, name="problem"):
    return LemmaInstance(prob.X, prob.a, prob.b, None, name)


# ---------------------------------------------------------------------------
# covering lemma


def require_covering_conditions(inst: LemmaInstance):
    if inst.m < inst.p + 1:
        raise PreconditionError(f"covering needs m >= p + 1, got m={inst.m}, p={inst.p}", "m")
    rep = general_position_arrays(inst.z, inst.a, inst.b)
    for cond in ("i", "ii", "iii"):
        ok = getattr(rep, f"cond_{cond}")
        if ok is False:
            wit = [int(v) for v in rep.witnesses[cond][0]]
            raise PreconditionError(f"condition ({cond}) fails on rows {list(wit)}", cond, list(wit))
    return rep


def close_counts(inst, beta, epsilon, omega):
    """Number of rows with ``|c_i - z_i'beta| <= epsilon`` for each row of ``beta``."""
    r = inst.shifts(omega)[None, :] - np.atleast_2d(beta) @ inst.z.T
    return np.count_nonzero(np.abs(r) <= epsilon * (1.0 + TIE_SLACK), axis=1)


def _recheck_violation(inst, beta, epsilon, omega):
    """Direct scalar re-evaluation of a candidate witness."""
    c = inst.shifts(omega)
    close = []
    for i in range(inst.m):
        r = c[i] - sum(float(inst.z[i, k]) * float(beta[k]) for k in range(inst.p))
        if abs(r) <= epsilon * (1.0 + TIE_SLACK + RECHECK_SLACK):
            close.append(i)
    return close if len(close) > inst.p else None


def _null_vector(rows):
    """Unit vector spanning the left null space of ``p + 1`` rows in R^p."""
    _, _, vt = np.linalg.svd(rows.T)
    return vt[-1]


def minimax_points(inst: LemmaInstance, omega):
    """Chebyshev fit over every ``p + 1`` rows.

    For rows ``T`` with left null vector ``lam`` the smallest achievable
    ``max_{i in T} |c_i - z_i'beta|`` is ``h = |lam'c| / ||lam||_1``,
    attained where every residual equals ``h sign(lam_i)`` up to a common
    sign.  The point does not depend on epsilon, and a violation at level
    epsilon exists iff ``min_T h_T <= epsilon``.
    """
    c = inst.shifts(omega)
    p = inst.p
    pts, levels, subsets = [], [], []
    for T in itertools.combinations(range(inst.m), p + 1):
        T = list(T)
        lam = _null_vector(inst.z[T])
        s = float(lam @ c[T])
        h = abs(s) / np.abs(lam).sum()
        target = c[T] - math.copysign(1.0, s) * h * np.sign(lam)
        beta, *_ = np.linalg.lstsq(inst.z[T], target, rcond=None)
        pts.append(beta)
        levels.append(h)
        subsets.append(tuple(T))
    return np.asarray(pts), np.asarray(levels), subsets


def critical_epsilon(inst: LemmaInstance, omega):
    """Supremum of the epsilons for which every beta is covered at ``omega``."""
    _, levels, _ = minimax_points(inst, omega)
    return float(levels.min())


def exact_covering_p1(inst: LemmaInstance, epsilon, omega):
    """Interval sweep for ``p = 1``: each close set is a closed interval.

    Returns ``(passed, witness)``; a witness is a point lying in more than
    one interval.
    """
    if inst.p != 1:
        raise InvalidInputError("interval arithmetic is only available for p = 1")
    z = inst.z[:, 0]
    c = inst.shifts(omega)
    u = c / z
    h = epsilon * (1.0 + TIE_SLACK) / np.abs(z)
    # starts sort before ends at equal coordinates: closed intervals
    events = sorted([(lo, 0) for lo in u - h] + [(hi, 1) for hi in u + h])
    depth = 0
    for x, kind in events:
        if kind == 0:
            depth += 1
            if depth > 1:
                return False, float(x)
        else:
            depth -= 1
    return True, None


@dataclass
class CoveringCheck:
    passed: bool
    epsilon: float
    omega: float
    n_samples: int
    witness: list | None = None
    close_rows: list | None = None
    exact_passed: bool | None = None
    exact_method: str | None = None
    critical_epsilon: float | None = None

    def to_dict(self):
        return asdict(self)


def _unit_directions(p, n, rng):
    if p == 1:
        return np.array([[1.0], [-1.0]])
    if p == 2:
        t = np.linspace(0.0, 2.0 * math.pi, n, endpoint=False)
        return np.stack([np.cos(t), np.sin(t)], axis=1)
    d = rng.standard_normal((n, p))
    return d / np.linalg.norm(d, axis=1, keepdims=True)


def covering_samples(inst: LemmaInstance, omega, sample_budget=DEFAULT_SAMPLE_BUDGET, seed=0):
    """Stratified beta samples for the covering check (independent of epsilon).

    Strata: the minimax points of every ``p + 1`` rows and the exact
    solutions of every ``p`` rows; a dense grid in a ball whose radius grows
    with omega; a far shell out to ``10 omega max|b|``; and ``10^4`` uniform
    random points in the ball.
    """
    rng = np.random.default_rng(seed)
    p = inst.p
    c = inst.shifts(omega)
    zmin = float(np.min(np.linalg.norm(inst.z, axis=1)))
    radius = 2.0 * (float(np.max(np.abs(c))) + 1.0) / zmin
    outer = max(10.0 * float(omega) * float(np.max(np.abs(inst.b))) / zmin, 10.0 * radius)

    parts = [minimax_points(inst, omega)[0]]
    for S in itertools.combinations(range(inst.m), p):
        parts.append(np.linalg.solve(inst.z[list(S)], c[list(S)])[None, :])
    n_random = min(N_RANDOM, sample_budget // 4)
    n_shell = sample_budget // 4
    n_grid = max(sample_budget - n_random - n_shell, 1)

    per_axis = max(int(round(n_grid ** (1.0 / p))), 2)
    ax = np.linspace(-radius, radius, per_axis)
    mesh = np.meshgrid(*([ax] * p), indexing="ij")
    grid = np.stack([g.ravel() for g in mesh], axis=1)
    parts.append(grid[np.linalg.norm(grid, axis=1) <= radius * (1 + 1e-12)])

    n_dir = 2 if p == 1 else max(int(math.sqrt(n_shell)), 8)
    dirs = _unit_directions(p, n_dir, rng)
    n_rad = max(n_shell // dirs.shape[0], 2)
    radii = np.geomspace(radius, outer, n_rad)
    parts.append((radii[:, None, None] * dirs[None, :, :]).reshape(-1, p))

    g = rng.standard_normal((n_random, p))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    rad = radius * rng.random(n_random) ** (1.0 / p)
    parts.append(g * rad[:, None])
    return np.concatenate(parts, axis=0)


def verify_covering(inst: LemmaInstance, epsilon, omega, sample_budget=DEFAULT_SAMPLE_BUDGET, seed=0,
                    check_conditions=True) -> CoveringCheck:
    """Search sampled beta for one close to more than ``p`` shifted rows.

    Passes iff no sample violates.  The exact verdict (interval sweep for
    ``p = 1``, minimax levels otherwise) is attached for comparison.
    """
    if not epsilon > 0:
        raise InvalidInputError("epsilon must be positive")
    if not omega >= 0:
        raise InvalidInputError("omega must be nonnegative")
    if check_conditions:
        require_covering_conditions(inst)
    betas = covering_samples(inst, omega, sample_budget, seed)
    counts = close_counts(inst, betas, epsilon, omega)
    passed, witness, close = True, None, None
    for j in np.flatnonzero(counts > inst.p):
        rows = _recheck_violation(inst, betas[j], epsilon, omega)
        if rows is not None:
            passed, witness, close = False, [float(v) for v in betas[j]], rows
            break
    crit = critical_epsilon(inst, omega)
    if inst.p == 1:
        exact, _ = exact_covering_p1(inst, epsilon, omega)
        method = "interval"
    else:
        exact = bool(crit > epsilon * (1.0 + TIE_SLACK))
        method = "minimax"
    return CoveringCheck(passed, float(epsilon), float(omega), int(betas.shape[0]), witness, close,
                         bool(exact), method, crit)


@dataclass
class CoveringCertificate:
    instance_hash: str
    name: str
    found: bool
    epsilon: float | None
    M: float | None
    checks: list = field(default_factory=list)
    exact_confirmed: bool | None = None
    status: str = "certificate"
    sample_budget: int = DEFAULT_SAMPLE_BUDGET
    seed: int = 0

    def to_dict(self):
        return asdict(self)


def epsilon_unit(inst: LemmaInstance):
    """Smallest row norm of z; scales the epsilon grid with the instance."""
    return float(np.min(np.linalg.norm(inst.z, axis=1)))


def find_epsilon_omega(inst: LemmaInstance, sample_budget=DEFAULT_SAMPLE_BUDGET, seed=0,
                       omega_ladder=OMEGA_LADDER, halvings=EPSILON_HALVINGS) -> CoveringCertificate:
    """Search ``epsilon = unit * 2^-k`` (largest first) and ``M`` on a ladder.

    The first pair for which the covering check passes at ``M, 2M, 10M``
    and ``100M`` is returned.  Exhausting the grid gives ``found=False``
    with status ``"inconclusive"``: a search failure, not a refutation.
    """
    require_covering_conditions(inst)
    unit = epsilon_unit(inst)
    ladder = sorted(float(w) for w in omega_ladder)
    for k in range(halvings + 1):
        eps = unit * 2.0 ** (-k)
        for M in ladder:
            checks = []
            for mult in (1.0, 2.0, 10.0, 100.0):
                chk = verify_covering(inst, eps, M * mult, sample_budget, seed, check_conditions=False)
                checks.append(chk)
                if not chk.passed:
                    break
            if all(ch.passed for ch in checks) and len(checks) == 4:
                exact = all(ch.exact_passed for ch in checks)
                return CoveringCertificate(inst.hash, inst.name, True, eps, M,
                                           [ch.to_dict() for ch in checks], exact, "certificate",
                                           int(sample_budget), int(seed))
    return CoveringCertificate(inst.hash, inst.name, False, None, None, [], None, "inconclusive",
                               int(sample_budget), int(seed))


# ---------------------------------------------------------------------------
# product bound


def require_product_conditions(inst: LemmaInstance):
    if inst.w is None:
        raise InvalidInputError("product bound needs the w vector")
    if inst.m < inst.p:
        raise PreconditionError(f"product bound needs m >= p, got m={inst.m}, p={inst.p}", "m")
    rep = general_position_arrays(inst.z, np.zeros(inst.m), np.zeros(inst.m))
    if not rep.cond_i:
        wit = [int(v) for v in rep.witnesses["i"][0]]
        raise PreconditionError(f"rows {list(wit)} of z are linearly dependent", "i", list(wit))


def product_log_gap(inst, beta, delta):
    """``sum log1p|w_i - z_i'beta| - (m-p+1) log1p(delta ||beta||)``; the bound holds iff >= 0."""
    beta = np.atleast_2d(beta)
    r = inst.w[None, :] - beta @ inst.z.T
    lhs = np.log1p(np.abs(r)).sum(axis=1)
    rhs = (inst.m - inst.p + 1) * np.log1p(delta * np.linalg.norm(beta, axis=1))
    return lhs - rhs, lhs, rhs


def _null_directions(z):
    """Unit directions orthogonal to every ``p - 1`` rows of z (both signs)."""
    m, p = z.shape
    out = []
    for S in itertools.combinations(range(m), p - 1):
        if p == 1:
            continue
        _, _, vt = np.linalg.svd(z[list(S)])
        d = vt[-1]
        out.extend([d, -d])
    return np.asarray(out).reshape(-1, p)


def product_samples(inst: LemmaInstance, R, sample_budget=DEFAULT_SAMPLE_BUDGET, seed=0):
    """Samples with ``||beta|| >= R``: radial grid times directions, plus random points.

    Directions include every null direction of ``p - 1`` rows, along which
    those residuals stay bounded, and points where a residual vanishes are
    added for each ray.
    """
    rng = np.random.default_rng(seed)
    p = inst.p
    n_random = min(N_RANDOM, sample_budget // 4)
    n_dir = 2 if p == 1 else max(int(math.sqrt(sample_budget - n_random)) // 2, 8)
    dirs = np.concatenate([_unit_directions(p, n_dir, rng), _null_directions(inst.z)])
    n_rad = max((sample_budget - n_random) // dirs.shape[0], 2)
    radii = np.geomspace(R, 1e6 * R, n_rad)
    parts = [(radii[:, None, None] * dirs[None, :, :]).reshape(-1, p)]
    # residual zero crossings along every direction
    proj = dirs @ inst.z.T
    with np.errstate(divide="ignore", invalid="ignore"):
        t = inst.w[None, :] / proj
    hit = np.isfinite(t) & (t >= R)
    if hit.any():
        parts.append(t[hit][:, None] * dirs[np.nonzero(hit)[0]])
    for S in itertools.combinations(range(inst.m), p):
        beta = np.linalg.solve(inst.z[list(S)], inst.w[list(S)])
        if np.linalg.norm(beta) >= R:
            parts.append(beta[None, :])
    g = rng.standard_normal((n_random, p))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    rad = R * np.exp(rng.random(n_random) * math.log(1e6))
    parts.append(g * rad[:, None])
    return np.concatenate(parts, axis=0)


@dataclass
class ProductCheck:
    passed: bool
    R: float
    delta: float
    n_samples: int
    witness: list | None = None
    log_gap: float | None = None

    def to_dict(self):
        return asdict(self)


def verify_product_bound(inst: LemmaInstance, R, delta, sample_budget=DEFAULT_SAMPLE_BUDGET, seed=0,
                         check_conditions=True) -> ProductCheck:
    """Check the product bound at sampled ``beta`` with ``||beta|| >= R``."""
    if not (R > 0 and delta > 0):
        raise InvalidInputError("R and delta must be positive")
    if check_conditions:
        require_product_conditions(inst)
    betas = product_samples(inst, R, sample_budget, seed)
    gap, _, rhs = product_log_gap(inst, betas, delta)
    bad = gap < -RECHECK_SLACK * np.maximum(rhs, 1.0)
    for j in np.flatnonzero(bad)[np.argsort(gap[bad])]:
        beta = betas[j]
        # direct re-evaluation of the product and the bound
        prod = 1.0
        for i in range(inst.m):
            prod *= 1.0 / (1.0 + abs(inst.w[i] - float(inst.z[i] @ beta)))
        norm = math.sqrt(sum(float(v) ** 2 for v in beta))
        lhs_log = math.log(prod) if prod > 0 else -math.inf
        bound_log = -(inst.m - inst.p + 1) * math.log1p(delta * norm)
        if norm >= R and lhs_log > bound_log:
            return ProductCheck(False, float(R), float(delta), int(betas.shape[0]),
                                [float(v) for v in beta], float(bound_log - lhs_log))
    return ProductCheck(True, float(R), float(delta), int(betas.shape[0]))


@dataclass
class ProductCertificate:
    instance_hash: str
    name: str
    found: bool
    R: float | None
    delta: float | None
    check: dict | None = None
    status: str = "certificate"
    sample_budget: int = DEFAULT_SAMPLE_BUDGET
    seed: int = 0

    def to_dict(self):
        return asdict(self)


def find_R_delta(inst: LemmaInstance, sample_budget=DEFAULT_SAMPLE_BUDGET, seed=0,
                 halvings=PRODUCT_HALVINGS) -> ProductCertificate:
    """First passing pair with ``delta = 2^-k`` descending, then ``R = 2^j`` ascending."""
    require_product_conditions(inst)
    for k in range(halvings + 1):
        delta = 2.0 ** (-k)
        for j in range(halvings + 1):
            R = 2.0 ** j
            chk = verify_product_bound(inst, R, delta, sample_budget, seed, check_conditions=False)
            if chk.passed:
                return ProductCertificate(inst.hash, inst.name, True, R, delta, chk.to_dict(), "certificate",
                                          int(sample_budget), int(seed))
    return ProductCertificate(inst.hash, inst.name, False, None, None, None, "inconclusive",
                              int(sample_budget), int(seed))


# ---------------------------------------------------------------------------
# built-in suites


def _gaussian_instance(m, p, seed, with_w=False, name=""):
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((m, p))
    a = rng.standard_normal(m)
    b = np.zeros(m)
    b[m - max(1, m // 3):] = rng.standard_normal(max(1, m // 3))
    w = rng.standard_normal(m) if with_w else None
    return LemmaInstance(z, a, b, w, name)


def covering_suite():
    """Six covering instances with ``p`` in {1, 2} and ``m <= 5``."""
    return [
        LemmaInstance([1.0, 2.0], [0.0, 1.0], [0.0, 1.0], name="p1-m2"),
        LemmaInstance([1.0, 1.0, 1.0], [-1.0, 0.0, 1.0], [0.0, 0.0, 1.0], name="p1-m3-intercept"),
        LemmaInstance(np.ones(5), [-1.0, -0.5, 0.0, 0.5, 1.0], [0, 0, 0, 0, 1.0], name="p1-m5-canonical"),
        LemmaInstance([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]], [0.0, 0.0, 1.0], [0.0, 0.0, 1.0], name="p2-m3"),
        _gaussian_instance(4, 2, seed=7, name="p2-m4-gaussian"),
        LemmaInstance(np.column_stack([np.ones(5), [-2.0, -1.0, 0.0, 1.0, 2.0]]),
                      [0.3, -0.2, 0.15, 0.4, -0.3], [0.0, 0.0, 0.0, 1.0, 3.0], name="p2-m5-line"),
    ]


def product_suite():
    """Product-bound instances, including the hand-checked one and ``m = p`` cases."""
    return [
        LemmaInstance([1.0, 2.0], None, None, [0.0, 0.0], name="p1-m2-hand"),
        LemmaInstance([1.5], None, None, [0.7], name="p1-m1"),
        LemmaInstance([1.0, -1.0, 0.5, 3.0], None, None, [0.0, 2.0, -1.0, 0.5], name="p1-m4"),
        LemmaInstance([[1.0, 0.2], [-0.3, 1.0]], None, None, [0.5, -0.5], name="p2-m2"),
        LemmaInstance([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]], None, None, [1.0, -1.0, 0.0], name="p2-m3"),
        _gaussian_instance(5, 2, seed=11, with_w=True, name="p2-m5-gaussian"),
    ]
