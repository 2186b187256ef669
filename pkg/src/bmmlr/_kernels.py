"""Compiled numerical kernels (numba).

Everything here takes an explicit ``numpy.random.Generator``; numba's
Generator bindings consume the same bit stream as numpy, so runs are
reproducible from a seed regardless of which layer draws.

The Polya-Gamma sampler is the exact alternating-series rejection
sampler for PG(1, c): a mixture proposal of a truncated exponential
(right of t = 0.64) and a truncated inverse-Gaussian (left of t),
followed by series acceptance.  No truncation approximation is
involved, so the Gibbs chain targets the exact posterior.
"""

import math

import numpy as np
from numba import njit

_TRUNC = 0.64
_PI = math.pi
_SQRT2 = math.sqrt(2.0)


_INV_SQRT_T = math.sqrt(1.0 / _TRUNC)
_HALF_PISQ = 0.5 * _PI * _PI


@njit(cache=True, fastmath=True)
def _norm_cdf(x):
    return 0.5 * math.erfc(-x / _SQRT2)


@njit(cache=True, fastmath=True)
def pg_draw(c, rng):
    """One exact draw from PG(1, c)."""
    z = 0.5 * abs(c)
    fz = _PI * _PI / 8.0 + 0.5 * z * z
    # mass of the right (truncated-exponential) proposal component
    b = _INV_SQRT_T * (_TRUNC * z - 1.0)
    a = -_INV_SQRT_T * (_TRUNC * z + 1.0)
    x0 = math.log(fz) + fz * _TRUNC
    xb = x0 - z + math.log(_norm_cdf(b))
    xa = x0 + z + math.log(_norm_cdf(a))
    p_right = 1.0 / (1.0 + (4.0 / _PI) * (math.exp(xb) + math.exp(xa)))
    while True:
        if rng.random() < p_right:
            x = _TRUNC + rng.standard_exponential() / fz
        else:
            # inverse-Gaussian(1/z, 1) truncated to (0, t]
            if z < 1.0 / _TRUNC:
                while True:
                    e1 = rng.standard_exponential()
                    e2 = rng.standard_exponential()
                    while e1 * e1 > 2.0 * e2 / _TRUNC:
                        e1 = rng.standard_exponential()
                        e2 = rng.standard_exponential()
                    x = _TRUNC / ((1.0 + _TRUNC * e1) * (1.0 + _TRUNC * e1))
                    if rng.random() <= math.exp(-0.5 * z * z * x):
                        break
            else:
                mu = 1.0 / z
                while True:
                    y = rng.standard_normal()
                    y *= y
                    muy = mu * y
                    x = mu * (1.0 + 0.5 * (muy - math.sqrt(4.0 * muy + muy * muy)))
                    if x <= 0.0 or rng.random() > mu / (mu + x):
                        x = mu * mu / max(x, 1e-300)
                    if x <= _TRUNC:
                        break
        # alternating-series accept/reject on the proposal x; both series
        # share a_n = base * (n + 1/2) * exp(-((n+1/2)^2 - 1/4) * decay),
        # only decay and the base prefactor switch at the truncation point
        if x > _TRUNC:
            decay = _HALF_PISQ * x
            base = _PI * math.exp(-0.25 * decay)
        else:
            decay = 2.0 / x
            root = 2.0 / (_PI * x)
            base = _PI * root * math.sqrt(root) * math.exp(-0.25 * decay)
        s = 0.5 * base
        y = rng.random() * s
        n = 0
        while True:
            n += 1
            npn = n + 0.5
            an = base * npn * math.exp(-(npn * npn - 0.25) * decay)
            if n % 2 == 1:
                s -= an
                if y <= s:
                    return 0.25 * x
            else:
                s += an
                if y > s:
                    break


@njit(cache=True, fastmath=True)
def pg_fill(out, c, rng):
    """Fill ``out[i] ~ PG(1, c[i])`` in index order."""
    for i in range(out.shape[0]):
        out[i] = pg_draw(c[i], rng)


# ----------------------------------------------------------------------
# small dense linear algebra (dimensions here are the coefficient-block
# sizes, typically 2-6, so simple loops beat LAPACK dispatch overhead)
# ----------------------------------------------------------------------


@njit(cache=True)
def _cholesky(a, lower):
    """In-place-free Cholesky of ``a`` into ``lower``; returns False if not SPD."""
    d = a.shape[0]
    for i in range(d):
        for j in range(d):
            lower[i, j] = 0.0
    for i in range(d):
        for j in range(i + 1):
            acc = a[i, j]
            for k in range(j):
                acc -= lower[i, k] * lower[j, k]
            if i == j:
                if acc <= 0.0 or not math.isfinite(acc):
                    return False
                lower[i, i] = math.sqrt(acc)
            else:
                lower[i, j] = acc / lower[j, j]
    return True


@njit(cache=True)
def _solve_lower(lower, b, out):
    d = b.shape[0]
    for i in range(d):
        acc = b[i]
        for k in range(i):
            acc -= lower[i, k] * out[k]
        out[i] = acc / lower[i, i]


@njit(cache=True)
def _solve_lower_t(lower, b, out):
    # solve lower.T @ out = b
    d = b.shape[0]
    for i in range(d - 1, -1, -1):
        acc = b[i]
        for k in range(i + 1, d):
            acc -= lower[k, i] * out[k]
        out[i] = acc / lower[i, i]


@njit(cache=True)
def _invert_lower(lower, out):
    d = lower.shape[0]
    for i in range(d):
        for j in range(d):
            out[i, j] = 0.0
    for j in range(d):
        out[j, j] = 1.0 / lower[j, j]
        for i in range(j + 1, d):
            acc = 0.0
            for k in range(j, i):
                acc -= lower[i, k] * out[k, j]
            out[i, j] = acc / lower[i, i]


@njit(cache=True)
def mvn_from_precision(precision, shift, rng, out):
    """Draw from N(precision^-1 @ shift, precision^-1).

    Returns True on success, False if the precision matrix fails its
    Cholesky factorization.
    """
    d = shift.shape[0]
    lower = np.empty((d, d))
    if not _cholesky(precision, lower):
        return False
    tmp = np.empty(d)
    mean = np.empty(d)
    _solve_lower(lower, shift, tmp)
    _solve_lower_t(lower, tmp, mean)
    z = np.empty(d)
    for i in range(d):
        z[i] = rng.standard_normal()
    _solve_lower_t(lower, z, tmp)
    for i in range(d):
        out[i] = mean[i] + tmp[i]
    return True


@njit(cache=True)
def invwishart_draw(df, scale, rng, out):
    """Draw from inverse-Wishart(df, scale) via the Bartlett decomposition.

    If ``scale = L L^T`` and ``A`` is the Bartlett factor of a
    Wishart(df, I) draw, then ``B = L @ inv(A).T`` gives the draw as
    ``B @ B.T``, symmetric positive definite by construction.
    Returns True on success, False if ``scale`` is not SPD.
    """
    d = scale.shape[0]
    lower = np.empty((d, d))
    if not _cholesky(scale, lower):
        return False
    bart = np.zeros((d, d))
    for i in range(d):
        bart[i, i] = math.sqrt(rng.chisquare(df - i))
        for j in range(i):
            bart[i, j] = rng.standard_normal()
    ainv = np.empty((d, d))
    _invert_lower(bart, ainv)
    # b = lower @ ainv.T
    b = np.empty((d, d))
    for i in range(d):
        for j in range(d):
            acc = 0.0
            for k in range(d):
                acc += lower[i, k] * ainv[j, k]
            b[i, j] = acc
    for i in range(d):
        for j in range(d):
            acc = 0.0
            for k in range(d):
                acc += b[i, k] * b[j, k]
            out[i, j] = acc
    # enforce exact symmetry against accumulated roundoff
    for i in range(d):
        for j in range(i):
            v = 0.5 * (out[i, j] + out[j, i])
            out[i, j] = v
            out[j, i] = v
    return True


# ----------------------------------------------------------------------
# per-iteration array helpers (loop-fused to avoid temporaries)
# ----------------------------------------------------------------------


@njit(cache=True)
def cross_lse(psi, q, out):
    """out[i] = log(1 + sum_{m != q} exp(psi[m, i])), max-subtracted."""
    qm1, n = psi.shape
    for i in range(n):
        mx = 0.0
        for m in range(qm1):
            if m != q and psi[m, i] > mx:
                mx = psi[m, i]
        acc = math.exp(-mx)
        for m in range(qm1):
            if m != q:
                acc += math.exp(psi[m, i] - mx)
        out[i] = mx + math.log(acc)


@njit(cache=True)
def linear_predictor(x_fixed, beta_q, x_random, gamma_j_q, cluster_ptr, out):
    """out = x_fixed @ beta_q + rowwise x_random . gamma_j[cluster]."""
    n = out.shape[0]
    pf = x_fixed.shape[1]
    pr = x_random.shape[1]
    for i in range(n):
        acc = 0.0
        for p in range(pf):
            acc += x_fixed[i, p] * beta_q[p]
        out[i] = acc
    if pr:
        n_clusters = cluster_ptr.shape[0] - 1
        for jj in range(n_clusters):
            for i in range(cluster_ptr[jj], cluster_ptr[jj + 1]):
                acc = 0.0
                for p in range(pr):
                    acc += x_random[i, p] * gamma_j_q[jj, p]
                out[i] += acc


@njit(cache=True)
def random_part(x_random, gamma_j_q, cluster_ptr, out):
    n_clusters = cluster_ptr.shape[0] - 1
    pr = x_random.shape[1]
    for jj in range(n_clusters):
        for i in range(cluster_ptr[jj], cluster_ptr[jj + 1]):
            acc = 0.0
            for p in range(pr):
                acc += x_random[i, p] * gamma_j_q[jj, p]
            out[i] = acc


@njit(cache=True)
def augmented_residual(kappa_num_q, omega_q, cross, offset, out):
    """out = (indicator - 1/2) + omega * (cross - offset); the Omega-weighted
    working response with the cross-category term folded in."""
    for i in range(out.shape[0]):
        out[i] = kappa_num_q[i] + omega_q[i] * (cross[i] - offset[i])


@njit(cache=True)
def tilt_and_check(psi_q, cross, out):
    """out = psi_q - cross; returns False if any value is non-finite."""
    ok = True
    for i in range(out.shape[0]):
        v = psi_q[i] - cross[i]
        out[i] = v
        if not math.isfinite(v):
            ok = False
    return ok


# ----------------------------------------------------------------------
# Gibbs full-conditional updates.  All kernels return an int status:
# 0 = ok, otherwise the 1-based index of the cluster whose posterior
# precision failed (or -1 for non-cluster blocks).
# ----------------------------------------------------------------------


@njit(cache=True)
def update_coefficient_means(gamma_j_q, sigma_q, g_prec, g_shift, rng, out):
    """Draw the coefficient-mean block: N(V (Sigma^-1 sum_j gamma_j + G g), V)
    with V = (J Sigma^-1 + G)^-1.  ``g_shift`` is the precomputed G @ g."""
    n_clusters, d = gamma_j_q.shape
    lower = np.empty((d, d))
    if not _cholesky(sigma_q, lower):
        return -1
    sig_inv = np.empty((d, d))
    linv = np.empty((d, d))
    _invert_lower(lower, linv)
    for i in range(d):
        for j in range(d):
            acc = 0.0
            for k in range(d):
                acc += linv[k, i] * linv[k, j]
            sig_inv[i, j] = acc
    prec = np.empty((d, d))
    for i in range(d):
        for j in range(d):
            prec[i, j] = n_clusters * sig_inv[i, j] + g_prec[i, j]
    shift = np.empty(d)
    for i in range(d):
        acc = g_shift[i]
        for j in range(d):
            s = 0.0
            for jj in range(n_clusters):
                s += gamma_j_q[jj, j]
            acc += sig_inv[i, j] * s
        shift[i] = acc
    if not mvn_from_precision(prec, shift, rng, out):
        return -1
    return 0


@njit(cache=True)
def update_covariance(gamma_j_q, gamma_q, prior_df, prior_scale, rng, out):
    """Draw the random-effect covariance: invW(j0 + J, S + scatter)."""
    n_clusters, d = gamma_j_q.shape
    scale = np.empty((d, d))
    for i in range(d):
        for j in range(d):
            scale[i, j] = prior_scale[i, j]
    for jj in range(n_clusters):
        for i in range(d):
            di = gamma_j_q[jj, i] - gamma_q[i]
            for j in range(d):
                scale[i, j] += di * (gamma_j_q[jj, j] - gamma_q[j])
    if not invwishart_draw(prior_df + n_clusters, scale, rng, out):
        return -1
    return 0


@njit(cache=True)
def update_cluster_coefficients(
    x_random, cluster_ptr, resid, omega_q, sigma_q, gamma_q, rng, out_gamma_j
):
    """Draw every cluster's coefficient block for one category.

    Per cluster j:  V_j = (X_j' Omega_j X_j + Sigma^-1)^-1 and mean
    V_j (X_j' r_j + Sigma^-1 gamma), where ``resid`` already carries
    Omega (kappa + cross-category offset), i.e. r = (ind - 1/2) +
    omega * offset, so no division by omega ever happens.
    """
    n_clusters = cluster_ptr.shape[0] - 1
    d = x_random.shape[1]
    lower = np.empty((d, d))
    if not _cholesky(sigma_q, lower):
        return -1
    linv = np.empty((d, d))
    _invert_lower(lower, linv)
    sig_inv = np.empty((d, d))
    for i in range(d):
        for j in range(d):
            acc = 0.0
            for k in range(d):
                acc += linv[k, i] * linv[k, j]
            sig_inv[i, j] = acc
    prior_shift = np.empty(d)
    for i in range(d):
        acc = 0.0
        for j in range(d):
            acc += sig_inv[i, j] * gamma_q[j]
        prior_shift[i] = acc
    prec = np.empty((d, d))
    shift = np.empty(d)
    draw = np.empty(d)
    for jj in range(n_clusters):
        lo = cluster_ptr[jj]
        hi = cluster_ptr[jj + 1]
        for i in range(d):
            shift[i] = prior_shift[i]
            for j in range(d):
                prec[i, j] = sig_inv[i, j]
        for row in range(lo, hi):
            w = omega_q[row]
            r = resid[row]
            for i in range(d):
                xi = x_random[row, i]
                shift[i] += xi * r
                wxi = w * xi
                for j in range(d):
                    prec[i, j] += wxi * x_random[row, j]
        if not mvn_from_precision(prec, shift, rng, draw):
            return jj + 1
        for i in range(d):
            out_gamma_j[jj, i] = draw[i]
    return 0


@njit(cache=True)
def update_fixed_coefficients(x_fixed, resid, omega_q, b_prec, b_shift, rng, out):
    """Draw the fixed-coefficient block over all subjects pooled."""
    n, d = x_fixed.shape
    prec = np.empty((d, d))
    shift = np.empty(d)
    for i in range(d):
        shift[i] = b_shift[i]
        for j in range(d):
            prec[i, j] = b_prec[i, j]
    for row in range(n):
        w = omega_q[row]
        r = resid[row]
        for i in range(d):
            xi = x_fixed[row, i]
            shift[i] += xi * r
            wxi = w * xi
            for j in range(d):
                prec[i, j] += wxi * x_fixed[row, j]
    if not mvn_from_precision(prec, shift, rng, out):
        return -1
    return 0
