"""MCMC convergence diagnostics."""

import numpy as np


def autocorrelation(x):
    """Normalised autocorrelation of a 1-D series via FFT."""
    x = np.asarray(x, dtype=float)
    n = x.size
    x = x - x.mean()
    nfft = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(x, nfft)
    acov = np.fft.irfft(f * np.conjugate(f), nfft)[:n]
    if acov[0] <= 0:
        return np.ones(1)
    return acov / acov[0]


def effective_sample_size(x):
    """Geyer's initial monotone positive sequence estimator.

    Autocorrelations are summed in adjacent pairs until a pair turns
    negative; the pair sums are forced to be non-increasing.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 4 or np.ptp(x) == 0:
        return float(n)
    rho = autocorrelation(x)
    npairs = rho.size // 2
    # Gamma_m = rho_{2m} + rho_{2m+1}; tau = -1 + 2 sum_m Gamma_m
    pairs = rho[0 : 2 * npairs : 2] + rho[1 : 2 * npairs : 2]
    neg = np.flatnonzero(pairs < 0)
    if neg.size:
        pairs = pairs[: neg[0]]
    pairs = np.minimum.accumulate(pairs)
    tau = -1.0 + 2.0 * pairs.sum()
    tau = max(tau, 1.0 / np.log10(max(n, 10)))
    return float(n / tau)


def gelman_rubin(chains):
    """Potential scale reduction factor for one parameter.

    ``chains`` has shape ``(n_chains, n_draws)``.
    """
    chains = np.asarray(chains, dtype=float)
    m, n = chains.shape
    W = np.mean(np.var(chains, axis=1, ddof=1))
    means = chains.mean(axis=1)
    B = n * np.var(means, ddof=1)
    V = (n - 1.0) / n * W + B / n
    return float(np.sqrt(V / W))


def mcse_mean(x, ess=None):
    x = np.asarray(x, dtype=float)
    ess = effective_sample_size(x) if ess is None else ess
    return float(np.std(x, ddof=1) / np.sqrt(ess))


def mcse_sd(x):
    """Delta-method standard error of the sample standard deviation."""
    x = np.asarray(x, dtype=float)
    dev2 = (x - x.mean()) ** 2
    sd = np.sqrt(dev2.mean())
    se_var = mcse_mean(dev2)
    return float(se_var / (2.0 * sd)) if sd > 0 else 0.0


def ks_distance(sample, cdf_fn):
    """Kolmogorov-Smirnov distance between a sample and a distribution function."""
    x = np.sort(np.asarray(sample, dtype=float))
    n = x.size
    F = np.asarray(cdf_fn(x), dtype=float)
    hi = np.arange(1, n + 1) / n - F
    lo = F - np.arange(0, n) / n
    return float(max(hi.max(), lo.max()))
