# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled pointwise kernels (single-pass versions of _kernels_py)."""

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND = "cython"


cdef _flat_input(s):
    arr = np.asarray(s, dtype=np.float64)
    return arr, np.ascontiguousarray(arr).reshape(-1)


def quartic_psi(s):
    """Value, first and second derivative of 0.25*(s^2 - 1)^2, elementwise."""
    arr, flat = _flat_input(s)
    cdef double[::1] x = flat
    cdef Py_ssize_t i, n = x.shape[0]
    psi = np.empty(n)
    dpsi = np.empty(n)
    ddpsi = np.empty(n)
    cdef double[::1] v = psi
    cdef double[::1] d = dpsi
    cdef double[::1] h = ddpsi
    cdef double si, s2, w
    for i in range(n):
        si = x[i]
        s2 = si * si
        w = s2 - 1.0
        v[i] = 0.25 * w * w
        d[i] = si * w
        h[i] = 3.0 * s2 - 1.0
    return psi.reshape(arr.shape), dpsi.reshape(arr.shape), ddpsi.reshape(arr.shape)


def poly_eval3(coeffs, s):
    """Polynomial value and first two derivatives by Horner's rule.

    ``coeffs`` are listed lowest degree first.
    """
    arr, flat = _flat_input(s)
    cdef double[::1] x = flat
    cdef double[::1] c = np.ascontiguousarray(coeffs, dtype=np.float64)
    cdef Py_ssize_t i, k, n = x.shape[0], m = c.shape[0]
    val = np.empty(n)
    der = np.empty(n)
    der2 = np.empty(n)
    cdef double[::1] v = val
    cdef double[::1] d = der
    cdef double[::1] h = der2
    cdef double si, vv, dd, hh
    for i in range(n):
        si = x[i]
        vv = 0.0
        dd = 0.0
        hh = 0.0
        for k in range(m - 1, -1, -1):
            hh = hh * si + dd
            dd = dd * si + vv
            vv = vv * si + c[k]
        v[i] = vv
        d[i] = dd
        h[i] = 2.0 * hh
    return val.reshape(arr.shape), der.reshape(arr.shape), der2.reshape(arr.shape)


def exchange_source(p, phi, sigma, mu, double chi_sigma, double chi_phi):
    """Fused p(phi) * (chi_sigma*sigma + chi_phi*(1-phi) - mu)."""
    arr, fv_arr = _flat_input(phi)
    cdef double[::1] fv = fv_arr
    cdef double[::1] pv = _flat_input(p)[1]
    cdef double[::1] sv = _flat_input(sigma)[1]
    cdef double[::1] mv = _flat_input(mu)[1]
    cdef Py_ssize_t i, n = fv.shape[0]
    out = np.empty(n)
    cdef double[::1] ov = out
    for i in range(n):
        ov[i] = pv[i] * (chi_sigma * sv[i] + chi_phi * (1.0 - fv[i]) - mv[i])
    return out.reshape(arr.shape)


def nutrient_potential(phi, sigma, double chi_sigma, double chi_phi):
    """Fused chi_sigma*sigma + chi_phi*(1-phi)."""
    arr, fv_arr = _flat_input(phi)
    cdef double[::1] fv = fv_arr
    cdef double[::1] sv = _flat_input(sigma)[1]
    cdef Py_ssize_t i, n = fv.shape[0]
    out = np.empty(n)
    cdef double[::1] ov = out
    for i in range(n):
        ov[i] = chi_sigma * sv[i] + chi_phi * (1.0 - fv[i])
    return out.reshape(arr.shape)


def weighted_sq_integral(weight, comps, double cell_volume):
    """cell_volume * sum_i weight_i * sum_c comps[c]_i^2 (a dissipation integral)."""
    cdef double[::1] wv = _flat_input(weight)[1]
    cdef Py_ssize_t i, n = wv.shape[0]
    acc_arr = np.zeros(n)
    cdef double[::1] acc = acc_arr
    cdef double[::1] gv
    for g in comps:
        gv = _flat_input(g)[1]
        for i in range(n):
            acc[i] += gv[i] * gv[i]
    cdef double total = 0.0
    for i in range(n):
        total += wv[i] * acc[i]
    return cell_volume * total


def galerkin_eval(double[:, ::1] basis, double[:, ::1] weights, double[::1] ell,
                  double[::1] a, double[::1] b, double chi_phi, double chi_sigma,
                  double p0, double[::1] dpsi_coeffs, double cell_volume,
                  double[::1] out_da, double[::1] out_db):
    """Fused modal right-hand side for polynomial psi' and constant p.

    Writes da/dt and db/dt into the out arrays and returns the instantaneous
    total dissipation (the integrand of the modal energy identity).
    """
    cdef Py_ssize_t nq = basis.shape[0]
    cdef Py_ssize_t n = basis.shape[1]
    cdef Py_ssize_t nc = dpsi_coeffs.shape[0]
    cdef cnp.ndarray scratch = np.empty((3, nq), dtype=np.float64)
    cdef double[::1] phi = scratch[0]
    cdef double[::1] sigma = scratch[1]
    cdef double[::1] diff = scratch[2]
    cdef cnp.ndarray cbuf = np.empty((2, n), dtype=np.float64)
    cdef double[::1] c_mu = cbuf[0]
    cdef double[::1] xp = cbuf[1]
    cdef Py_ssize_t i, j, k
    cdef double acc_phi, acc_sig, dpsi, mu_i, sum_dex, gb, d

    # synthesize phi and sigma on the quadrature nodes
    for i in range(nq):
        acc_phi = 0.0
        acc_sig = 0.0
        for j in range(n):
            acc_phi += basis[i, j] * a[j]
            acc_sig += basis[i, j] * b[j]
        phi[i] = acc_phi
        sigma[i] = acc_sig

    # mu coefficients: (lam-1) a + <psi'(phi), w_j> - chi_phi b
    for j in range(n):
        c_mu[j] = ell[j] * a[j] - chi_phi * b[j]
    for i in range(nq):
        dpsi = 0.0
        for k in range(nc - 1, -1, -1):
            dpsi = dpsi * phi[i] + dpsi_coeffs[k]
        diff[i] = dpsi  # reuse as psi'(phi) scratch
    for j in range(n):
        acc_phi = 0.0
        for i in range(nq):
            acc_phi += weights[j, i] * diff[i]
        c_mu[j] += acc_phi

    # diff = N - mu on the nodes
    sum_dex = 0.0
    for i in range(nq):
        mu_i = 0.0
        for j in range(n):
            mu_i += basis[i, j] * c_mu[j]
        mu_i = chi_sigma * sigma[i] + chi_phi * (1.0 - phi[i]) - mu_i
        diff[i] = mu_i
        sum_dex += mu_i * mu_i

    d = cell_volume * p0 * sum_dex
    for j in range(n):
        acc_phi = 0.0
        for i in range(nq):
            acc_phi += weights[j, i] * diff[i]
        xp[j] = p0 * acc_phi

    for j in range(n):
        gb = chi_sigma * b[j] - chi_phi * a[j]
        out_da[j] = -ell[j] * c_mu[j] + xp[j]
        out_db[j] = -ell[j] * gb - xp[j]
        d += ell[j] * (c_mu[j] * c_mu[j] + gb * gb)
    return d
