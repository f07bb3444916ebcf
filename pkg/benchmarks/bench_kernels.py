"""Time the compiled kernels against the pure-Python fallback.

Usage::

    python3 benchmarks/bench_kernels.py [--repeat 3]

Prints one line per kernel with the best wall time of each backend and the
speed-up.  Both backends receive identical inputs; their outputs are checked
to agree before timing is reported.
"""

import argparse
import time

import numpy as np

from postrobust import canonical_problem
from postrobust import _pykernels as py
from postrobust.posterior import _prior_codes

try:
    from postrobust import _ckernels as cy
except ImportError:
    cy = None


def best_time(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def cases():
    rng = np.random.default_rng(0)
    prob = canonical_problem()
    codes = _prior_codes(prob)
    X, y = prob.X[prob.K], prob.a[prob.K]
    offset = np.zeros(y.size)

    resid = rng.standard_cauchy((5, 2000))
    sigma = np.exp(np.linspace(-9, 9, 400))
    yield "loglik_grid 5x2000x400", lambda m: m.loglik_grid(resid, sigma, 1.0, np.zeros(5))

    thetas = rng.normal(size=(20_000, 2))

    def many_targets(m):
        return np.array([m.log_target(t, X, y, offset, 1.0, *codes) for t in thetas])

    yield "log_target x 20000", many_targets

    n = 20_000
    normals = rng.normal(size=(n, 2))
    log_unif = np.log(rng.random(n))

    def chain(m):
        return m.rwm(np.zeros(2), normals, log_unif, np.ones(2), 2000, 0.3, X, y, offset, 1.0, *codes)[0]

    yield "rwm 20000 iterations", chain


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if cy is None:
        print("compiled extension not built; nothing to compare")
        return 1
    print(f"{'kernel':28s} {'python [s]':>11s} {'cython [s]':>11s} {'speed-up':>9s}")
    for name, fn in cases():
        tp, op = best_time(lambda: fn(py), args.repeat)
        tc, oc = best_time(lambda: fn(cy), args.repeat)
        np.testing.assert_allclose(oc, op, rtol=1e-10, atol=1e-12)
        print(f"{name:28s} {tp:11.4f} {tc:11.4f} {tp / tc:8.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
