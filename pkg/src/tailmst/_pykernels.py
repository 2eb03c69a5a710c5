"""Pure-Python twins of the compiled kernels in ``_ckernels.pyx``.

Same signatures, same arithmetic order, so results agree to rounding.
"""
from math import log, log1p, sqrt

import numpy as np

_NP = 6


def garch_filter(r, mu0, ar, ma, omega, alpha, beta, h1, r0):
    n = len(r)
    mu = np.empty(n)
    h = np.empty(n)
    eps = np.empty(n)
    r_prev, y_prev, h_prev = r0, 0.0, h1
    for t in range(n):
        mt = mu0 + ar * r_prev + ma * y_prev
        ht = h1 if t == 0 else omega + alpha * y_prev * y_prev + beta * h_prev
        y = float(r[t]) - mt
        mu[t] = mt
        h[t] = ht
        eps[t] = y / sqrt(ht)
        r_prev, y_prev, h_prev = float(r[t]), y, ht
    return mu, h, eps


def garch_loglik_grad(r, theta, dens, h1_uncond, h1_fixed, r0):
    mu0, ar, ma, omega, alpha, beta = (float(v) for v in theta)
    nu, xi, m, s, logconst, a_nu, a_xi, dm_dnu, dm_dxi, ds_dnu, ds_dxi = (
        float(v) for v in dens
    )
    nu2 = nu - 2.0
    half_nu1 = 0.5 * (nu + 1.0)
    persist = 1.0 - alpha - beta
    dy_prev = [0.0] * _NP
    dh_prev = [0.0] * _NP
    g = [0.0] * 8
    ll = 0.0
    r_prev, y_prev, h_prev = r0, 0.0, 0.0

    for t in range(len(r)):
        if t == 0:
            dy = [-1.0, -r_prev, 0.0, 0.0, 0.0, 0.0]
            if h1_uncond:
                ht = omega / persist
                dw = omega / (persist * persist)
                dh = [0.0, 0.0, 0.0, 1.0 / persist, dw, dw]
            else:
                ht = h1_fixed
                dh = [0.0] * _NP
        else:
            dy = [-ma * v for v in dy_prev]
            dy[0] -= 1.0
            dy[1] -= r_prev
            dy[2] -= y_prev
            ht = omega + alpha * y_prev * y_prev + beta * h_prev
            dh = [2.0 * alpha * y_prev * dy_prev[k] + beta * dh_prev[k] for k in range(_NP)]
            dh[3] += 1.0
            dh[4] += y_prev * y_prev
            dh[5] += h_prev
        rt = float(r[t])
        y = rt - (mu0 + ar * r_prev + ma * y_prev)
        sq = sqrt(ht)
        e = y / sq
        z = m + s * e
        if z >= 0.0:
            scale, dscale = 1.0 / xi, -1.0 / (xi * xi)
        else:
            scale, dscale = xi, 1.0
        w = z * scale
        A = 1.0 + w * w / nu2
        ll += logconst - half_nu1 * log(A) - 0.5 * log(ht)
        psi = -(nu + 1.0) * w / (nu2 * A) * s * scale
        for k in range(_NP):
            de = dy[k] / sq - 0.5 * e * dh[k] / ht
            g[k] += psi * de - 0.5 * dh[k] / ht
        dw_dnu = (dm_dnu + e * ds_dnu) * scale
        dw_dxi = (dm_dxi + e * ds_dxi) * scale + z * dscale
        g[6] += a_nu - 0.5 * log(A) - half_nu1 * (2.0 * w * dw_dnu / nu2 - w * w / (nu2 * nu2)) / A
        g[7] += a_xi - (nu + 1.0) * w * dw_dxi / (nu2 * A)

        dy_prev, dh_prev = dy, dh
        r_prev, y_prev, h_prev = rt, y, ht

    return ll, np.array(g)


def dcc_rho(z1, z2, qbar, c, d):
    n = len(z1)
    rho = np.empty(n)
    q11, q22, q12 = 1.0, 1.0, qbar
    w = 1.0 - c - d
    for t in range(n):
        if t > 0:
            a, b = float(z1[t - 1]), float(z2[t - 1])
            q11 = w + c * a * a + d * q11
            q22 = w + c * b * b + d * q22
            q12 = w * qbar + c * a * b + d * q12
        rho[t] = q12 / sqrt(q11 * q22)
    return rho


def tcopula_dcc_loglik(x1, x2, z1, z2, qbar, c, d, nu, lconst):
    q11, q22, q12 = 1.0, 1.0, qbar
    w = 1.0 - c - d
    half_a = 0.5 * (nu + 2.0)
    half_b = 0.5 * (nu + 1.0)
    ll = 0.0
    for t in range(len(x1)):
        if t > 0:
            a, b = float(z1[t - 1]), float(z2[t - 1])
            q11 = w + c * a * a + d * q11
            q22 = w + c * b * b + d * q22
            q12 = w * qbar + c * a * b + d * q12
        rho = q12 / sqrt(q11 * q22)
        om = 1.0 - rho * rho
        u, v = float(x1[t]), float(x2[t])
        quad = (u * u - 2.0 * rho * u * v + v * v) / (nu * om)
        ll += (lconst - 0.5 * log(om) - half_a * log1p(quad)
               + half_b * (log1p(u * u / nu) + log1p(v * v / nu)))
    return ll


def tcopula_dcc_loglik_grad(x1, x2, z1, z2, qbar, c, d, nu, lconst):
    q11, q22, q12 = 1.0, 1.0, qbar
    c11 = c22 = c12 = 0.0
    d11 = d22 = d12 = 0.0
    w = 1.0 - c - d
    half_a = 0.5 * (nu + 2.0)
    half_b = 0.5 * (nu + 1.0)
    ll = gc = gd = 0.0
    for t in range(len(x1)):
        if t > 0:
            a, b = float(z1[t - 1]), float(z2[t - 1])
            a1, a2, b12 = a * a, b * b, a * b
            p11, p22, p12 = q11, q22, q12
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
        u, v = float(x1[t]), float(x2[t])
        qd = u * u - 2.0 * rho * u * v + v * v
        B = qd / (nu * om)
        ll += (lconst - 0.5 * log(om) - half_a * log1p(B)
               + half_b * (log1p(u * u / nu) + log1p(v * v / nu)))
        dl_drho = rho / om - half_a * (-2.0 * u * v * om + 2.0 * rho * qd) / (nu * om * om * (1.0 + B))
        drho_c = c12 / sq - 0.5 * rho * (c11 / q11 + c22 / q22)
        drho_d = d12 / sq - 0.5 * rho * (d11 / q11 + d22 / q22)
        gc += dl_drho * drho_c
        gd += dl_drho * drho_d
    return ll, gc, gd
