"""Cramer-von Mises and Lilliefors statistics on studentized samples.

Both studentize with the sample mean and the (m-1)-denominator standard
deviation, then compare the empirical CDF of the studentized values against
the standard normal CDF.

CVM: W^2 = 1/(12m) + sum_i (ndtr(z_(i)) - (2i-1)/(2m))^2, reported with
Stephens' small-sample modification W^2 * (1 + 0.5/m); the p-value uses the
piecewise exponential fits published for the composite-normality case.

Lilliefors: D = max(D+, D-) on the same studentized values; its p-value
comes from the simulated null table (gofae.gof._tables).
"""

import numpy as np
from scipy import special

from ..exceptions import DegenerateSample

CVM_MIN_M = 8

_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def _studentize(y):
    m = len(y)
    mu = y.mean()
    cen = y - mu
    var = cen @ cen / (m - 1)
    if var < 1e-24:
        raise DegenerateSample("sample variance is numerically zero")
    s = np.sqrt(var)
    return cen / s, s


def cvm_statistic(y):
    z, _ = _studentize(np.sort(y))
    m = len(y)
    f = special.ndtr(z)
    i = np.arange(1, m + 1)
    w2 = 1.0 / (12.0 * m) + np.sum((f - (2.0 * i - 1.0) / (2.0 * m)) ** 2)
    return w2 * (1.0 + 0.5 / m)


def cvm_pvalue(wm, m):
    """Piecewise fits for the modified composite-normality CVM statistic."""
    del m  # the modification already absorbed the size dependence
    if wm < 0.0275:
        p = 1.0 - np.exp(-13.953 + 775.5 * wm - 12542.61 * wm * wm)
    elif wm < 0.051:
        p = 1.0 - np.exp(-5.903 + 179.546 * wm - 1515.29 * wm * wm)
    elif wm < 0.092:
        p = np.exp(0.886 - 31.62 * wm + 10.897 * wm * wm)
    elif wm < 1.1:
        p = np.exp(1.111 - 34.242 * wm + 12.832 * wm * wm)
    else:
        p = 7.37e-10
    return float(min(max(p, 0.0), 1.0))


def _studentize_jacobian_terms(y):
    """Common pieces for gradients through z_k = (y_k - mean) / s, ddof=1:

      dz_k/dy_j = (delta_kj - 1/m)/s - z_k z_j / ((m-1) s)

    Returns (z, s) in the original (unsorted) order.
    """
    z, s = _studentize(y)
    return z, s


def cvm_gradient(y):
    """d/dy of the modified CVM statistic, sort permutation frozen."""
    m = len(y)
    order = np.argsort(y, kind="stable")
    z_all, s = _studentize_jacobian_terms(y)
    zs = z_all[order]
    f = special.ndtr(zs)
    i = np.arange(1, m + 1)
    q = (f - (2.0 * i - 1.0) / (2.0 * m)) * _INV_SQRT_2PI * np.exp(-0.5 * zs * zs)
    q_unsorted = np.empty_like(q)
    q_unsorted[order] = q
    qsum = q.sum()
    qz = q @ zs
    grad = 2.0 * (q_unsorted - qsum / m - z_all * qz / (m - 1)) / s
    return grad * (1.0 + 0.5 / m)


def lilliefors_statistic(y):
    z, _ = _studentize(np.sort(y))
    m = len(y)
    f = special.ndtr(z)
    i = np.arange(1, m + 1)
    dplus = np.max(i / m - f)
    dminus = np.max(f - (i - 1) / m)
    return max(dplus, dminus)


def lilliefors_gradient(y):
    """Subgradient of D, concentrated at the achieving order statistic.

    D = max over k of max(k/m - F_k, F_k - (k-1)/m) with F_k = ndtr(z_(k)).
    The achieving index k* and branch are frozen (first maximum under
    stable ascending sort); the studentization is differentiated exactly.
    """
    m = len(y)
    order = np.argsort(y, kind="stable")
    z_all, s = _studentize_jacobian_terms(y)
    zs = z_all[order]
    f = special.ndtr(zs)
    i = np.arange(1, m + 1)
    dplus = i / m - f
    dminus = f - (i - 1) / m
    kp = int(np.argmax(dplus))
    km = int(np.argmax(dminus))
    if dplus[kp] >= dminus[km]:
        k_star, sign = kp, -1.0  # D = k/m - F: dD/dF = -1
    else:
        k_star, sign = km, +1.0
    phi = _INV_SQRT_2PI * np.exp(-0.5 * zs[k_star] ** 2)
    j_star = order[k_star]
    # dz_{k*}/dy_j for all j
    dz = -np.full(m, 1.0 / m)
    dz[j_star] += 1.0
    dz = dz / s - zs[k_star] * z_all / ((m - 1) * s)
    return sign * phi * dz
