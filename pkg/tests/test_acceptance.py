"""Exit criteria, one test per criterion with its pinned tolerance and time limit.

Each test records a PASS/FAIL line that is repeated in the terminal summary.
"""

import math
import time
from pathlib import Path

import numpy as np
import pytest
from scipy import integrate

from postrobust import LptnDensity, RegressionProblem, lemmalab
from postrobust.cli import EXIT_CRITERION, EXIT_OK, main
from postrobust.diagnostics import ks_distance, mcse_mean, mcse_sd
from postrobust.heavytail import (
    lemma_s1_fuzz,
    lptn_cdf,
    lptn_log1p_abs_quantile,
    lptn_logpdf,
    lptn_quantile,
    lptn_sf,
    tail_ratio,
)
from postrobust.posterior import gelman_rubin_chains, grid_posterior, run_chains
from postrobust.robustness import fit_envelope_constant, outlier_ratio_check, sweep

pytestmark = pytest.mark.acceptance

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
FULL_LADDER = tuple(10.0 ** k for k in range(2, 13))


@pytest.fixture(scope="module")
def canonical_sweep(canonical):
    t0 = time.perf_counter()
    rep = sweep(canonical, FULL_LADDER, method="grid")
    return rep, time.perf_counter() - t0


def test_density_correctness(record):
    t0 = time.perf_counter()
    worst_mass, worst_trip = 0.0, 0.0
    for g in (0.5, 1.0, 2.0):
        d = LptnDensity(g)
        # adaptive quadrature of the pdf (in s = log1p|z|) over the float range plus the closed-form tail
        smax = math.log1p(1e300)
        half, _ = integrate.quad(lambda s: math.exp(lptn_logpdf(math.expm1(s), d) + s), 0, smax,
                                 epsabs=1e-14, epsrel=1e-13, limit=500)
        worst_mass = max(worst_mass, abs(2 * half + 2 * lptn_sf(1e300, d) - 1.0),
                         abs(2 * half - (lptn_cdf(1e300, d) - lptn_cdf(-1e300, d))))
        u = np.linspace(0.001, 0.999, 1000)
        q = lptn_quantile(u, d)
        fin = np.isfinite(q)
        worst_trip = max(worst_trip, float(np.max(np.abs(lptn_cdf(q[fin], d) - u[fin]))))
        # quantiles beyond float range are round-tripped in log1p|z| form
        lq = lptn_log1p_abs_quantile(u[~fin], d)
        if lq.size:
            tail = 0.5 * (1.0 + lq) ** (-g)
            back = np.where(u[~fin] >= 0.5, 1.0 - tail, tail)
            worst_trip = max(worst_trip, float(np.max(np.abs(back - u[~fin]))))
    dt = time.perf_counter() - t0
    ok = worst_mass <= 1e-8 and worst_trip <= 1e-10 and dt < 1.0
    record(1, "density correctness", ok,
           f"max |mass - 1| = {worst_mass:.2e} (tol 1e-8), max round-trip = {worst_trip:.2e} (tol 1e-10), "
           f"{dt:.2f} s (limit 1 s)")
    assert ok


def test_lemma_s1_suite(record):
    t0 = time.perf_counter()
    fuzz = lemma_s1_fuzz(100_000, seed=0)
    d = LptnDensity(1.0)
    err = [abs(tail_ratio(10.0 ** k, 3.0, 2.0, d) - 1.0) for k in range(4, 13)]
    decreasing = all(b < a for a, b in zip(err, err[1:]))
    dt = time.perf_counter() - t0
    ok = fuzz["failures"] == 0 and decreasing and err[-1] < 0.15 and dt < 10.0
    record(2, "bound suite", ok,
           f"{fuzz['failures']} violations in 1e5 tuples, |ratio - 1| decreasing={decreasing}, "
           f"at y=1e12 {err[-1]:.4f} (tol 0.15), {dt:.2f} s (limit 10 s)")
    assert ok


def test_desk_scale_robustness(record, canonical, canonical_sweep):
    rep, dt_sweep = canonical_sweep
    t0 = time.perf_counter()
    control_prob = RegressionProblem(canonical.X, canonical.a, np.zeros(canonical.n),
                                     error=canonical.error, coeff_prior=canonical.coeff_prior,
                                     scale_prior=canonical.scale_prior)
    ctrl = sweep(control_prob, FULL_LADDER, control=True)
    dt = dt_sweep + time.perf_counter() - t0
    d = rep.pointwise_sup_dist
    ok = rep.strictly_decreasing() and d[-1] < 0.1 and np.all(ctrl.pointwise_sup_dist < 1e-6) and dt < 300
    record(3, "posterior robustness sweep", ok,
           f"strictly decreasing={rep.strictly_decreasing()}, sup distance at 1e12 = {d[-1]:.4f} (tol 0.1), "
           f"control max = {ctrl.pointwise_sup_dist.max():.1e} (tol 1e-6), {dt:.1f} s (limit 300 s)")
    assert ok


def test_proof_step_checks(record, canonical, canonical_sweep):
    rep, dt_sweep = canonical_sweep
    t0 = time.perf_counter()
    # the posterior centre is the middle evaluation point (marginal medians)
    beta_c, sigma_c = rep.eval_points[len(rep.eval_points) // 2]
    ratio = outlier_ratio_check(canonical, 1e12, beta_c, sigma_c)
    ratio_err = float(np.max(np.abs(ratio - 1.0)))
    part_err = float(np.max(np.abs(rep.near_mass + rep.far_mass - np.exp(rep.marginal_ratio))))
    fit = fit_envelope_constant(rep.omegas, rep.far_mass, rep.log_envelope)
    dt = dt_sweep + time.perf_counter() - t0
    ok = ratio_err < 0.15 and part_err <= 1e-6 and fit.bounded and fit.stable and dt < 300
    c = np.asarray(fit.constants[-3:])
    record(4, "proof-step checks", ok,
           f"outlier ratio at centre |r - 1| = {ratio_err:.4f} (tol 0.15), partition error = {part_err:.1e} "
           f"(tol 1e-6), envelope constant C = {fit.C:.3g} varies x{c.max() / c.min():.3f} over top 3 "
           f"(limit x2), {dt:.1f} s (limit 300 s)")
    assert ok


def test_oracle_equivalence(record, canonical):
    t0 = time.perf_counter()
    grid = grid_posterior(canonical, 0.0, "K")
    chains = run_chains(canonical, 0.0, "K", n_draws=20_000, seeds=(0, 1))
    dt = time.perf_counter() - t0
    beta = np.concatenate([ch.beta[:, 0] for ch in chains])
    ks = ks_distance(beta, grid.beta_cdf(0))
    rhat = float(np.max(gelman_rubin_chains(chains)))
    mom = grid.moments()
    zs = []
    for j, name in ((0, "beta0"), (1, "sigma")):
        x = np.concatenate([ch.draws[:, j] for ch in chains])
        ess = sum(ch.ess[j] for ch in chains)
        zs.append(abs(x.mean() - mom[name][0]) / mcse_mean(x, ess))
        se_sd = math.sqrt(sum(mcse_sd(ch.draws[:, j]) ** 2 for ch in chains)) / len(chains)
        zs.append(abs(x.std(ddof=1) - mom[name][1]) / se_sd)
    ok = ks < 0.03 and max(zs) < 3.0 and rhat < 1.05 and dt < 120
    record(5, "MCMC vs grid", ok,
           f"KS = {ks:.4f} (tol 0.03), max moment error = {max(zs):.2f} MC se (tol 3), "
           f"R-hat = {rhat:.4f} (tol 1.05), {dt:.1f} s (limit 120 s)")
    assert ok


def test_covering_certificates(record):
    t0 = time.perf_counter()
    suite = lemmalab.covering_suite()
    certs = [lemmalab.find_epsilon_omega(inst) for inst in suite]
    dt = time.perf_counter() - t0
    found = sum(c.found for c in certs)
    p1_exact = all(c.exact_confirmed for inst, c in zip(suite, certs) if inst.p == 1)
    ok = found == len(suite) == 6 and p1_exact and dt < 300
    record(6, "covering certificates", ok,
           f"{found}/{len(suite)} found, p=1 interval confirmation={p1_exact}, {dt:.1f} s (limit 300 s)")
    assert ok


def test_product_certificates(record):
    t0 = time.perf_counter()
    suite = lemmalab.product_suite()
    certs = [lemmalab.find_R_delta(inst) for inst in suite]
    hand = lemmalab.LemmaInstance([1.0, 2.0], None, None, [0.0, 0.0])
    good = lemmalab.verify_product_bound(hand, 1.0, 1.0)
    bad = lemmalab.verify_product_bound(hand, 1.0, 10.0)
    witness_ok = False
    if not bad.passed:
        b = np.array(bad.witness)
        prod = np.prod(1.0 / (1.0 + np.abs(hand.w - hand.z @ b)))
        witness_ok = np.linalg.norm(b) >= 1.0 and prod > (1.0 + 10.0 * np.linalg.norm(b)) ** -2
    dt = time.perf_counter() - t0
    found = sum(c.found for c in certs)
    ok = found == len(suite) and good.passed and witness_ok and dt < 60
    record(7, "product-bound certificates", ok,
           f"{found}/{len(suite)} found, (R=1, delta=1) passes={good.passed}, delta=10 fails with "
           f"verified witness={witness_ok}, {dt:.1f} s (limit 60 s)")
    assert ok


def test_hypothesis_gate(record, capsys):
    t0 = time.perf_counter()
    codes = {name: main(["check", "-c", str(CONFIGS / f"{name}.cfg")])
             for name in ("canonical", "moment_fail", "condition_fail")}
    capsys.readouterr()
    dt = time.perf_counter() - t0
    expect = {"canonical": EXIT_OK, "moment_fail": EXIT_CRITERION, "condition_fail": EXIT_CRITERION}
    ok = codes == expect and dt < 10.0
    record(8, "hypothesis gate", ok, f"exit codes {codes} (expected {expect}), {dt:.2f} s (limit 10 s)")
    assert ok
