"""Pure-NumPy implementations of the pointwise hot kernels.

Mirrors the API of the compiled ``chtumor._kernels`` extension; the solver
and Galerkin right-hand sides call whichever backend ``chtumor.kernels``
selected at import time.
"""

import numpy as np

BACKEND = "numpy"


def quartic_psi(s):
    """Value, first and second derivative of 0.25*(s^2 - 1)^2, elementwise."""
    s = np.asarray(s, dtype=np.float64)
    s2 = s * s
    w = s2 - 1.0
    return 0.25 * w * w, s * w, 3.0 * s2 - 1.0


def poly_eval3(coeffs, s):
    """Polynomial value and first two derivatives by Horner's rule.

    ``coeffs`` are listed lowest degree first.
    """
    s = np.asarray(s, dtype=np.float64)
    v = np.zeros_like(s)
    d = np.zeros_like(s)
    h = np.zeros_like(s)
    for c in coeffs[::-1]:
        h = h * s + d
        d = d * s + v
        v = v * s + c
    return v, d, 2.0 * h


def exchange_source(p, phi, sigma, mu, chi_sigma, chi_phi):
    """Fused p(phi) * (chi_sigma*sigma + chi_phi*(1-phi) - mu)."""
    return p * (chi_sigma * sigma + chi_phi * (1.0 - phi) - mu)


def nutrient_potential(phi, sigma, chi_sigma, chi_phi):
    """Fused chi_sigma*sigma + chi_phi*(1-phi)."""
    return chi_sigma * sigma + chi_phi * (1.0 - phi)


def weighted_sq_integral(weight, comps, cell_volume):
    """cell_volume * sum_i weight_i * sum_c comps[c]_i^2 (a dissipation integral)."""
    acc = np.zeros_like(weight)
    for g in comps:
        acc += g * g
    return cell_volume * float(np.dot(weight.ravel(), acc.ravel()))


def galerkin_eval(basis, weights, ell, a, b, chi_phi, chi_sigma, p0,
                  dpsi_coeffs, cell_volume, out_da, out_db):
    """Fused modal right-hand side for polynomial psi' and constant p.

    Writes da/dt and db/dt into the out arrays and returns the instantaneous
    total dissipation (the integrand of the modal energy identity).
    """
    phi = basis @ a
    sigma = basis @ b
    dpsi = np.zeros_like(phi)
    for c in dpsi_coeffs[::-1]:
        dpsi = dpsi * phi + c
    c_mu = ell * a + weights @ dpsi - chi_phi * b
    mu = basis @ c_mu
    diff = chi_sigma * sigma + chi_phi * (1.0 - phi) - mu
    xp = weights @ (p0 * diff)
    gb = chi_sigma * b - chi_phi * a
    out_da[:] = -ell * c_mu + xp
    out_db[:] = -ell * gb - xp
    d = float((ell * c_mu * c_mu).sum() + (ell * gb * gb).sum())
    d += cell_volume * p0 * float((diff * diff).sum())
    return d
