# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops.

Every function here has a line-for-line twin in ``_pykernels``; the two are
checked against each other in the test-suite.  Density constants that need
special functions (digamma, lgamma of the shape) are computed by the caller
so the loops only touch libc math.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport log, log1p, sqrt

cnp.import_array()

DEF NP = 6  # mu0, ar, ma, omega, alpha, beta


def garch_filter(double[::1] r, double mu0, double ar, double ma,
                 double omega, double alpha, double beta, double h1, double r0):
    """ARMA(1,1)-GARCH(1,1) recursion; returns (cond_mean, cond_var, std_resid)."""
    cdef Py_ssize_t n = r.shape[0], t
    mean_arr = np.empty(n)
    var_arr = np.empty(n)
    eps_arr = np.empty(n)
    cdef double[::1] mu = mean_arr
    cdef double[::1] h = var_arr
    cdef double[::1] eps = eps_arr
    cdef double r_prev = r0, y_prev = 0.0, h_prev = h1, y, ht, mt
    for t in range(n):
        mt = mu0 + ar * r_prev + ma * y_prev
        if t == 0:
            ht = h1
        else:
            ht = omega + alpha * y_prev * y_prev + beta * h_prev
        y = r[t] - mt
        mu[t] = mt
        h[t] = ht
        eps[t] = y / sqrt(ht)
        r_prev = r[t]
        y_prev = y
        h_prev = ht
    return mean_arr, var_arr, eps_arr


def garch_loglik_grad(double[::1] r, double[::1] theta, double[::1] dens,
                      int h1_uncond, double h1_fixed, double r0):
    """Skew-t ARMA-GARCH log-likelihood and its gradient in natural parameters.

    theta = (mu0, ar, ma, omega, alpha, beta); dens is the constant vector
    built by ``margins._density_constants``.  Gradient order is theta
    followed by (nu, xi).
    """
    cdef double mu0 = theta[0], ar = theta[1], ma = theta[2]
    cdef double omega = theta[3], alpha = theta[4], beta = theta[5]
    cdef double nu = dens[0], xi = dens[1], m = dens[2], s = dens[3]
    cdef double logconst = dens[4], a_nu = dens[5], a_xi = dens[6]
    cdef double dm_dnu = dens[7], dm_dxi = dens[8]
    cdef double ds_dnu = dens[9], ds_dxi = dens[10]
    cdef double nu2 = nu - 2.0, half_nu1 = 0.5 * (nu + 1.0)
    cdef double dy[NP]
    cdef double dh[NP]
    cdef double dy_prev[NP]
    cdef double dh_prev[NP]
    cdef double g[8]
    cdef Py_ssize_t n = r.shape[0], t, k
    cdef double r_prev = r0, y_prev = 0.0, h_prev, y, ht, sq, e, z, scale, dscale
    cdef double w, A, psi, dw_dnu, dw_dxi, de, ll = 0.0, persist = 1.0 - alpha - beta

    for k in range(NP):
        dy_prev[k] = 0.0
        dh_prev[k] = 0.0
    for k in range(8):
        g[k] = 0.0
    h_prev = 0.0

    for t in range(n):
        if t == 0:
            dy[0] = -1.0
            dy[1] = -r_prev
            dy[2] = 0.0
            dy[3] = 0.0
            dy[4] = 0.0
            dy[5] = 0.0
            if h1_uncond:
                ht = omega / persist
                dh[0] = 0.0
                dh[1] = 0.0
                dh[2] = 0.0
                dh[3] = 1.0 / persist
                dh[4] = omega / (persist * persist)
                dh[5] = dh[4]
            else:
                ht = h1_fixed
                for k in range(NP):
                    dh[k] = 0.0
        else:
            for k in range(NP):
                dy[k] = -ma * dy_prev[k]
            dy[0] -= 1.0
            dy[1] -= r_prev
            dy[2] -= y_prev
            ht = omega + alpha * y_prev * y_prev + beta * h_prev
            for k in range(NP):
                dh[k] = 2.0 * alpha * y_prev * dy_prev[k] + beta * dh_prev[k]
            dh[3] += 1.0
            dh[4] += y_prev * y_prev
            dh[5] += h_prev
        y = r[t] - (mu0 + ar * r_prev + ma * y_prev)
        sq = sqrt(ht)
        e = y / sq
        z = m + s * e
        if z >= 0.0:
            scale = 1.0 / xi
            dscale = -1.0 / (xi * xi)
        else:
            scale = xi
            dscale = 1.0
        w = z * scale
        A = 1.0 + w * w / nu2
        ll += logconst - half_nu1 * log(A) - 0.5 * log(ht)
        psi = -(nu + 1.0) * w / (nu2 * A) * s * scale
        for k in range(NP):
            de = dy[k] / sq - 0.5 * e * dh[k] / ht
            g[k] += psi * de - 0.5 * dh[k] / ht
        dw_dnu = (dm_dnu + e * ds_dnu) * scale
        dw_dxi = (dm_dxi + e * ds_dxi) * scale + z * dscale
        g[6] += a_nu - 0.5 * log(A) - half_nu1 * (2.0 * w * dw_dnu / nu2 - w * w / (nu2 * nu2)) / A
        g[7] += a_xi - (nu + 1.0) * w * dw_dxi / (nu2 * A)

        for k in range(NP):
            dy_prev[k] = dy[k]
            dh_prev[k] = dh[k]
        r_prev = r[t]
        y_prev = y
        h_prev = ht

    grad = np.empty(8)
    for k in range(8):
        grad[k] = g[k]
    return ll, grad


def dcc_rho(double[::1] z1, double[::1] z2, double qbar, double c, double d):
    """Off-diagonal of R_t from the bivariate DCC(1,1) recursion, Q_1 = Qbar."""
    cdef Py_ssize_t n = z1.shape[0], t
    out = np.empty(n)
    cdef double[::1] rho = out
    cdef double q11 = 1.0, q22 = 1.0, q12 = qbar, w = 1.0 - c - d
    for t in range(n):
        if t > 0:
            q11 = w + c * z1[t - 1] * z1[t - 1] + d * q11
            q22 = w + c * z2[t - 1] * z2[t - 1] + d * q22
            q12 = w * qbar + c * z1[t - 1] * z2[t - 1] + d * q12
        rho[t] = q12 / sqrt(q11 * q22)
    return out


def tcopula_dcc_loglik(double[::1] x1, double[::1] x2, double[::1] z1,
                       double[::1] z2, double qbar, double c, double d,
                       double nu, double lconst):
    """Student-t copula log-likelihood with DCC(1,1) correlations.

    x are the t-quantile scores entering the density, z their unit-variance
    rescaling driving the recursion; lconst is the per-observation
    normalising constant in nu.
    """
    cdef Py_ssize_t n = x1.shape[0], t
    cdef double q11 = 1.0, q22 = 1.0, q12 = qbar, w = 1.0 - c - d
    cdef double rho, om, quad, ll = 0.0
    cdef double a = 0.5 * (nu + 2.0), b = 0.5 * (nu + 1.0)
    for t in range(n):
        if t > 0:
            q11 = w + c * z1[t - 1] * z1[t - 1] + d * q11
            q22 = w + c * z2[t - 1] * z2[t - 1] + d * q22
            q12 = w * qbar + c * z1[t - 1] * z2[t - 1] + d * q12
        rho = q12 / sqrt(q11 * q22)
        om = 1.0 - rho * rho
        quad = (x1[t] * x1[t] - 2.0 * rho * x1[t] * x2[t] + x2[t] * x2[t]) / (nu * om)
        ll += (lconst - 0.5 * log(om) - a * log1p(quad)
               + b * (log1p(x1[t] * x1[t] / nu) + log1p(x2[t] * x2[t] / nu)))
    return ll


def tcopula_dcc_loglik_grad(double[::1] x1, double[::1] x2, double[::1] z1,
                            double[::1] z2, double qbar, double c, double d,
                            double nu, double lconst):
    """As tcopula_dcc_loglik, also returning d/dc and d/dd at fixed nu."""
    cdef Py_ssize_t n = x1.shape[0], t
    cdef double q11 = 1.0, q22 = 1.0, q12 = qbar, w = 1.0 - c - d
    cdef double c11 = 0.0, c22 = 0.0, c12 = 0.0   # dQ/dc
    cdef double d11 = 0.0, d22 = 0.0, d12 = 0.0   # dQ/dd
    cdef double p11, p22, p12, a1, a2, b12
    cdef double rho, om, qd, B, sq, dl_drho, drho_c, drho_d
    cdef double ll = 0.0, gc = 0.0, gd = 0.0
    cdef double a = 0.5 * (nu + 2.0), b = 0.5 * (nu + 1.0)
    for t in range(n):
        if t > 0:
            a1 = z1[t - 1] * z1[t - 1]
            a2 = z2[t - 1] * z2[t - 1]
            b12 = z1[t - 1] * z2[t - 1]
            p11 = q11
            p22 = q22
            p12 = q12
            c11 = -1.0 + a1 + d * c11
            c22 = -1.0 + a2 + d * c22
            c12 = -qbar + b12 + d * c12
            d11 = -1.0 + p11 + d * d11
            d22 = -1.0 + p22 + d * d22
            d12 = -qbar + p12 + d * d12
            q11 = w + c * a1 + d * p11
            q22 = w + c * a2 + d * p22
            q12 = w * qbar + c * b12 + d * p12
        sq = sqrt(q11 * q22)
        rho = q12 / sq
        om = 1.0 - rho * rho
        qd = x1[t] * x1[t] - 2.0 * rho * x1[t] * x2[t] + x2[t] * x2[t]
        B = qd / (nu * om)
        ll += (lconst - 0.5 * log(om) - a * log1p(B)
               + b * (log1p(x1[t] * x1[t] / nu) + log1p(x2[t] * x2[t] / nu)))
        dl_drho = rho / om - a * (-2.0 * x1[t] * x2[t] * om + 2.0 * rho * qd) / (nu * om * om * (1.0 + B))
        drho_c = c12 / sq - 0.5 * rho * (c11 / q11 + c22 / q22)
        drho_d = d12 / sq - 0.5 * rho * (d11 / q11 + d22 / q22)
        gc += dl_drho * drho_c
        gd += dl_drho * drho_d
    return ll, gc, gd
