"""Pure-Python/NumPy reference implementations of the hot kernels.

These define the semantics; ``_ckernels.pyx`` must agree with them to
rounding.  Both take only plain arrays and floats so the selector in
``kernels.py`` can swap them freely.
"""

import math

import numpy as np

# prior family codes shared with the Cython kernels
COEF_PER_COORDINATE = 0
COEF_MULTIVARIATE = 1
SCALE_HALF_CAUCHY = 0
SCALE_INVERSE_GAMMA = 1
SCALE_LOG_NORMAL = 2


def loglik_grid(resid, sigma, gamma, offset):
    """Sum of scaled log-densities over observations on a (beta, sigma) grid.

    Parameters
    ----------
    resid : ndarray, shape (nobs, nb)
        Residuals ``y_i - x_i' beta_j`` for each observation and beta node.
    sigma : ndarray, shape (ns,)
        Scale nodes.
    gamma : float
        Tail exponent of the error density.
    offset : ndarray, shape (nobs,)
        Per-observation constants subtracted from each term (used to
        pre-normalise outlier terms by ``log f(y_i)``).

    Returns
    -------
    ndarray, shape (nb, ns)
    """
    resid = np.asarray(resid, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    nobs, nb = resid.shape
    out = np.zeros((nb, sigma.size))
    inv = 1.0 / sigma
    logs = np.log(sigma)
    c = math.log(gamma / 2.0)
    for i in range(nobs):
        t = np.abs(resid[i])[:, None] * inv[None, :]
        l1 = np.log1p(t)
        out += c - l1 - (1.0 + gamma) * np.log1p(l1) - logs[None, :] - offset[i]
    return out


def log_target(theta, X, y, offset, gamma, coef_kind, coef_params, scale_kind, scale_params):
    """Log posterior kernel in ``(beta, log sigma)`` coordinates (with Jacobian)."""
    p = X.shape[1]
    u = theta[p]
    if not math.isfinite(u) or u > 700.0 or u < -700.0:
        return -math.inf
    sigma = math.exp(u)
    inv = 1.0 / sigma
    c = math.log(gamma / 2.0)
    total = 0.0
    for i in range(X.shape[0]):
        r = y[i]
        for k in range(p):
            r -= X[i, k] * theta[k]
        l1 = math.log1p(abs(r) * inv)
        total += c - l1 - (1.0 + gamma) * math.log1p(l1) - u - offset[i]
    if coef_kind == COEF_PER_COORDINATE:
        for k in range(p):
            nu = coef_params[k]
            total += math.log(nu / 2.0) - u - (1.0 + nu) * math.log1p(abs(theta[k]) * inv)
    else:
        nu = coef_params[0]
        const = coef_params[1]
        q = 0.0
        for k in range(p):
            q += (theta[k] * inv) ** 2
        total += const - p * u - 0.5 * (nu + p) * math.log1p(q / nu)
    if scale_kind == SCALE_HALF_CAUCHY:
        s = scale_params[0]
        total += scale_params[1] - math.log1p((sigma / s) ** 2)
    elif scale_kind == SCALE_INVERSE_GAMMA:
        a, b = scale_params[0], scale_params[1]
        total += scale_params[2] - (a + 1.0) * u - b * inv
    else:
        m, s = scale_params[0], scale_params[1]
        total += scale_params[2] - u - 0.5 * ((u - m) / s) ** 2
    return total + u


def rwm(x0, normals, log_unif, scale0, n_warmup, target_accept,
        X, y, offset, gamma, coef_kind, coef_params, scale_kind, scale_params):
    """Random-walk Metropolis with warmup-only adaptation.

    During the first ``n_warmup`` iterations the global log step size moves
    by Robbins-Monro steps ``(t + 1)^-0.6 (alpha - target_accept)`` and the
    per-coordinate scales track the running standard deviation of the
    chain.  Both are frozen afterwards.  ``normals`` and ``log_unif`` hold
    the pre-drawn innovations, one row per iteration.

    Returns ``(draws, logp, n_accept_post, scale, log_lambda)``.
    """
    n_total, d = normals.shape
    cur = np.array(x0, dtype=float)
    lp = log_target(cur, X, y, offset, gamma, coef_kind, coef_params, scale_kind, scale_params)
    scale = np.array(scale0, dtype=float)
    log_lam = 0.0
    mean = cur.copy()
    m2 = np.zeros(d)
    n_post = n_total - n_warmup
    draws = np.empty((n_post, d))
    logps = np.empty(n_post)
    acc_post = 0
    prop = np.empty(d)
    lam = 1.0
    for t in range(n_total):
        lam = math.exp(log_lam)
        for k in range(d):
            prop[k] = cur[k] + lam * scale[k] * normals[t, k]
        lp_prop = log_target(prop, X, y, offset, gamma, coef_kind, coef_params, scale_kind, scale_params)
        diff = lp_prop - lp
        if diff != diff:  # nan
            diff = -math.inf
        accepted = log_unif[t] < diff
        if accepted:
            cur[:] = prop
            lp = lp_prop
        if t < n_warmup:
            alpha = 1.0 if diff >= 0 else math.exp(diff)
            log_lam += (t + 1.0) ** -0.6 * (alpha - target_accept)
            cnt = t + 2.0
            for k in range(d):
                delta = cur[k] - mean[k]
                mean[k] += delta / cnt
                m2[k] += delta * (cur[k] - mean[k])
            if t >= 100:
                for k in range(d):
                    scale[k] = math.sqrt(m2[k] / (cnt - 1.0)) + 1e-10
        else:
            j = t - n_warmup
            draws[j] = cur
            logps[j] = lp
            if accepted:
                acc_post += 1
    return draws, logps, acc_post, scale, log_lam
