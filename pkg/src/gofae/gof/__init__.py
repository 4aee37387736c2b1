"""Univariate composite-normality tests with sample-space gradients.

Five test kinds are exposed behind one interface: Shapiro-Wilk (sw),
Shapiro-Francia (sf), Cramer-von Mises (cvm), Lilliefors (ks), and
Epps-Pulley (ep), plus the simple-hypothesis KS uniformity test (ksunif)
used on collections of p-values.

Conventions shared by every kind:
  - evaluate() treats location and scale as estimated from the sample
    (composite null) and is a deterministic pure function of the sample.
  - sw/sf reject for SMALL statistic values; cvm/ks/ep reject for LARGE
    ones.  TestKind.direction_sign encodes the gradient-ascent direction
    that makes the sample more normal, TestKind.loss_sign the sign of the
    statistic term inside a minimized loss.
  - statistic_gradient() differentiates the statistic with respect to the
    sample, holding the sort permutation / achieving index fixed and
    differentiating the studentization exactly.  P-values are never
    differentiated.
"""

import enum
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import stats as _scipy_stats

from ..exceptions import DegenerateSample, DimensionMismatch, EmptyInput, UnsupportedSize
from . import _edf, _epps, _shapiro, _tables

__all__ = [
    "TestKind", "TestResult", "NORMALITY_KINDS", "NearSingularityWarning",
    "evaluate", "statistic_gradient", "project", "sample_unit_sphere",
    "ks_uniformity", "NEAR_SINGULAR_GRAD_NORM",
]

# statistic_gradient warns when the gradient norm exceeds this; near the
# zero-variance boundary the norm of any affine-invariant statistic's
# gradient diverges.
NEAR_SINGULAR_GRAD_NORM = 1e6


class NearSingularityWarning(UserWarning):
    """Gradient norm is large; the sample is close to the degenerate set."""


class TestKind(enum.Enum):
    SW = "sw"
    SF = "sf"
    CVM = "cvm"
    KS = "ks"
    EP = "ep"
    KSUNIF = "ksunif"

    @classmethod
    def from_string(cls, tag):
        try:
            return cls(tag.strip().lower())
        except ValueError:
            raise ValueError(f"unknown test kind {tag!r}; expected one of "
                             f"{[k.value for k in cls]}") from None

    @property
    def rejects_small(self):
        return self in (TestKind.SW, TestKind.SF)

    @property
    def direction_sign(self):
        """+1: climb the statistic toward normality (sw/sf); -1: descend."""
        return 1.0 if self.rejects_small else -1.0

    @property
    def loss_sign(self):
        """Sign of the lambda * T term inside a minimized loss."""
        return -self.direction_sign


NORMALITY_KINDS = (TestKind.SW, TestKind.SF, TestKind.CVM, TestKind.KS, TestKind.EP)


@dataclass(frozen=True)
class TestResult:
    kind: TestKind
    statistic: float
    pvalue: float
    m: int


def _as_sample(values):
    y = np.asarray(values, dtype=np.float64)
    if y.ndim != 1:
        raise ValueError(f"sample must be one-dimensional, got shape {y.shape}")
    if len(y) < 3:
        raise ValueError(f"sample needs at least 3 values, got {len(y)}")
    if not np.all(np.isfinite(y)):
        raise ValueError("sample contains non-finite values")
    return y


def _check_size(kind, m):
    if kind is TestKind.SW:
        lo, hi = _shapiro.SW_MIN_M, _shapiro.SW_MAX_M
    elif kind is TestKind.SF:
        lo, hi = _tables.supported_range("sf")
    elif kind is TestKind.KS:
        lo, hi = _tables.supported_range("ks")
    elif kind is TestKind.EP:
        lo, hi = _tables.supported_range("ep")
    else:
        lo, hi = _edf.CVM_MIN_M, None
    if m < lo or (hi is not None and m > hi):
        hi_txt = "inf" if hi is None else str(hi)
        raise UnsupportedSize(
            f"{kind.value} p-value approximation supports {lo} <= m <= {hi_txt}, got m={m}")


def evaluate(kind, sample):
    """Composite-normality statistic and p-value for one sample."""
    if kind not in NORMALITY_KINDS:
        raise ValueError(f"evaluate() expects a normality TestKind, got {kind}")
    y = _as_sample(sample)
    m = len(y)
    _check_size(kind, m)
    if kind is TestKind.SW:
        t = _shapiro.sw_statistic(y)
        p = _shapiro.sw_pvalue(t, m)
    elif kind is TestKind.SF:
        t = _shapiro.sf_statistic(y)
        p = _tables.null_cdf("sf", t, m)
    elif kind is TestKind.CVM:
        t = _edf.cvm_statistic(y)
        p = _edf.cvm_pvalue(t, m)
    elif kind is TestKind.KS:
        t = _edf.lilliefors_statistic(y)
        p = 1.0 - _tables.null_cdf("ks", t, m)
    else:
        t = _epps.ep_statistic(y)
        p = 1.0 - _tables.null_cdf("ep", t, m)
    return TestResult(kind, float(t), float(min(max(p, 0.0), 1.0)), m)


_GRADIENTS = {
    TestKind.SW: _shapiro.sw_gradient,
    TestKind.SF: _shapiro.sf_gradient,
    TestKind.CVM: _edf.cvm_gradient,
    TestKind.KS: _edf.lilliefors_gradient,
    TestKind.EP: _epps.ep_gradient,
}


def statistic_gradient(kind, sample, near_singular_norm=NEAR_SINGULAR_GRAD_NORM):
    """dT/dy_i for each sample entry, permutation/argmax frozen.

    Warns with NearSingularityWarning when the gradient norm exceeds
    near_singular_norm; that is the expected behavior as the sample
    contracts toward a constant vector.
    """
    if kind not in _GRADIENTS:
        raise ValueError(f"statistic_gradient() expects a normality TestKind, got {kind}")
    y = _as_sample(sample)
    grad = _GRADIENTS[kind](y)
    norm = float(np.linalg.norm(grad))
    if norm > near_singular_norm:
        warnings.warn(
            f"{kind.value} gradient norm {norm:.3e} exceeds {near_singular_norm:.1e}; "
            "sample is near the degenerate set", NearSingularityWarning, stacklevel=2)
    return grad


def project(latent, u):
    """One-dimensional projection latent @ u of an m x d latent batch."""
    yv = np.asarray(latent, dtype=np.float64)
    uv = np.asarray(u, dtype=np.float64)
    if yv.ndim != 2 or uv.ndim != 1 or yv.shape[1] != uv.shape[0]:
        raise DimensionMismatch(
            f"latent shape {yv.shape} does not project along u of shape {uv.shape}")
    if yv.shape[0] < 3:
        raise ValueError(f"need at least 3 rows to form a sample, got {yv.shape[0]}")
    return yv @ uv


def sample_unit_sphere(d, rng):
    """Uniform draw from the unit sphere in R^d (normalized Gaussian)."""
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    while True:
        u = rng.standard_normal(d)
        norm = np.linalg.norm(u)
        if norm > 1e-12:
            return u / norm


def ks_uniformity(pvalues):
    """Simple-hypothesis, two-sided KS test of the p-values against U(0,1)."""
    p = np.asarray(pvalues, dtype=np.float64)
    if p.ndim != 1 or len(p) < 2:
        # two is the floor so that a dataset of exactly 2m rows stays scoreable
        raise EmptyInput(f"ks_uniformity needs at least 2 p-values, got {p.shape}")
    if np.any((p < 0.0) | (p > 1.0)) or not np.all(np.isfinite(p)):
        raise ValueError("p-values must lie in [0, 1]")
    n = len(p)
    u = np.sort(p)
    i = np.arange(1, n + 1)
    d = max(np.max(i / n - u), np.max(u - (i - 1) / n))
    pval = float(_scipy_stats.kstwo.sf(d, n))
    return TestResult(TestKind.KSUNIF, float(d), float(min(max(pval, 0.0), 1.0)), n)
