"""Shapiro-Wilk and Shapiro-Francia statistics, coefficients, and gradients.

Both statistics have the form W = (a . y_sorted)^2 / sum((y - mean)^2) for a
fixed unit coefficient vector a built from the expected normal order
statistics at Blom plotting positions m_i = ndtri((i - 3/8) / (m + 1/4)).

SW uses Royston's polynomial-corrected coefficients and his normalizing
transformation for the p-value; that approximation is fitted for
12 <= m <= 2000.  SF uses the plain normalized Blom scores; its p-value
comes from the simulated null table (gofae.gof._tables), not from a
closed-form transform.
"""

from functools import lru_cache

import numpy as np
from scipy import special

from ..exceptions import DegenerateSample

SW_MIN_M = 12
SW_MAX_M = 2000

# Royston's polynomial corrections for the two outermost coefficients,
# in x = 1/sqrt(m).  Highest-order term last.
_C1 = (0.221157, -0.147981, -2.071190, 4.434685, -2.706056)
_C2 = (0.042981, -0.293762, -1.752461, 5.682633, -3.582633)


def _blom_scores(m):
    i = np.arange(1, m + 1)
    return special.ndtri((i - 0.375) / (m + 0.25))


@lru_cache(maxsize=128)
def sw_coefficients(m):
    """Royston's approximate SW coefficient vector for sample size m >= 3."""
    b = _blom_scores(m)
    c = b / np.linalg.norm(b)
    x = 1.0 / np.sqrt(m)
    xp = x ** np.arange(1, 6)
    a = np.array(c)
    a_m = c[-1] + _C1 @ xp
    if m <= 5:
        phi = (b @ b - 2.0 * b[-1] ** 2) / (1.0 - 2.0 * a_m ** 2)
        a[1:-1] = b[1:-1] / np.sqrt(phi)
        a[-1] = a_m
        a[0] = -a_m
    else:
        a_m1 = c[-2] + _C2 @ xp
        phi = (b @ b - 2.0 * b[-1] ** 2 - 2.0 * b[-2] ** 2) \
            / (1.0 - 2.0 * a_m ** 2 - 2.0 * a_m1 ** 2)
        a[2:-2] = b[2:-2] / np.sqrt(phi)
        a[-1], a[-2] = a_m, a_m1
        a[0], a[1] = -a_m, -a_m1
    a.setflags(write=False)
    return a


@lru_cache(maxsize=128)
def sf_coefficients(m):
    """Shapiro-Francia coefficients: normalized Blom scores."""
    b = _blom_scores(m)
    a = b / np.linalg.norm(b)
    a.setflags(write=False)
    return a


def _ratio_statistic(y, a):
    ys = np.sort(y)
    num = (a @ ys) ** 2
    den = np.sum((ys - ys.mean()) ** 2)
    if den < 1e-24:
        raise DegenerateSample("sample variance is numerically zero")
    return num / den


def _ratio_gradient(y, a):
    """d/dy of (a . y_sorted)^2 / sum((y - mean)^2), sort permutation frozen.

    With s = a . y_sorted and den = sum((y - mean)^2):
      dW/dy_j = (2 s a_{rank(j)} den - s^2 * 2 (y_j - mean)) / den^2
    (sum(a) = 0, so centering does not enter s).
    """
    order = np.argsort(y, kind="stable")
    ys = y[order]
    s = a @ ys
    cen = y - y.mean()
    den = cen @ cen
    if den < 1e-24:
        raise DegenerateSample("sample variance is numerically zero")
    a_unsorted = np.empty_like(a)
    a_unsorted[order] = a
    return (2.0 * s * a_unsorted * den - (s * s) * 2.0 * cen) / (den * den)


def sw_statistic(y):
    return _ratio_statistic(y, sw_coefficients(len(y)))


def sw_gradient(y):
    return _ratio_gradient(y, sw_coefficients(len(y)))


def sf_statistic(y):
    return _ratio_statistic(y, sf_coefficients(len(y)))


def sf_gradient(y):
    return _ratio_gradient(y, sf_coefficients(len(y)))


def sw_pvalue(w, m):
    """Royston's normalizing transformation: ln(1 - W) is approximately
    normal with mean and spread polynomial in ln(m); upper tail of the
    z-score is the p-value."""
    ln = np.log(m)
    mu = 0.0038915 * ln ** 3 - 0.083751 * ln ** 2 - 0.31082 * ln - 1.5861
    sigma = np.exp(0.0030302 * ln ** 2 - 0.082676 * ln - 0.4803)
    z = (np.log1p(-w) - mu) / sigma
    return float(special.ndtr(-z))
