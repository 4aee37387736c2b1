"""Model evaluation: reconstruction error, latent moments, a Gaussian
mutual-information lower bound through the decode/re-encode chain, and
covariance spectrum diagnostics."""

from dataclasses import dataclass

import numpy as np

from . import nn
from .exceptions import InsufficientSamples, SingularJointCovariance

MI_RIDGE_SCALE = 1e-6
DEGENERACY_RATIO = 1e-6
DEFAULT_MI_SAMPLES = 10_000


@dataclass(frozen=True)
class LatentMoments:
    mean: np.ndarray
    cov: np.ndarray
    count: int

    def __post_init__(self):
        asym = np.abs(self.cov - self.cov.T).max() if self.cov.size else 0.0
        if asym > 1e-10:
            raise ValueError(f"covariance asymmetric by {asym:.3e}")
        w = np.linalg.eigvalsh(self.cov)
        if w.min() < -1e-10:
            raise ValueError(f"covariance has eigenvalue {w.min():.3e}")


@dataclass(frozen=True)
class Spectrum:
    singular_values: np.ndarray  # descending
    condition_number: float
    degenerate: bool


def mse(params, dataset):
    """Mean over examples of the squared Euclidean reconstruction error."""
    x = np.asarray(dataset, dtype=float)
    fwd = nn.forward(params, x)
    return float(np.mean(np.sum((x - fwd.xhat) ** 2, axis=1)))


def latent_moments(params, dataset):
    """Sample mean and (n-1)-denominator covariance of the encoded dataset."""
    x = np.asarray(dataset, dtype=float)
    _, y = nn.encode(params, x)
    n, d = y.shape
    if n <= d:
        raise InsufficientSamples(f"need more than {d} samples, got {n}")
    mu = y.mean(axis=0)
    c = y - mu
    cov = (c.T @ c) / (n - 1)
    cov = (cov + cov.T) / 2.0
    return LatentMoments(mean=mu, cov=cov, count=n)


def mi_lower_bound(params, moments, sample_count=DEFAULT_MI_SAMPLES, seed=0):
    """Gaussian MI lower-bound estimate for the decode/re-encode chain, in nats.

    Draws z from N(mean, cov), maps through decoder then encoder, and
    evaluates the Gaussian mutual information of the joint sample with a
    ridge on each diagonal block. The Gaussian form is a modeling
    assumption on the re-encoded variables; by the data processing
    inequality the population quantity lower-bounds the MI through the
    decoder. Clamped at zero against estimation noise.
    """
    d = len(moments.mean)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    z = rng.multivariate_normal(moments.mean, moments.cov, size=sample_count,
                                method="eigh", check_valid="ignore")
    zt = nn.encode(params, nn.decode(params, z))[1]

    joint = np.cov(np.hstack([z, zt]), rowvar=False, ddof=1)
    # a zero-variance block still needs a positive ridge, otherwise a merely
    # constant branch (MI exactly 0) would look like a singularity
    tr_z = np.trace(joint[:d, :d]) / d
    tr_t = np.trace(joint[d:, d:]) / d
    eps_z = MI_RIDGE_SCALE * (tr_z if tr_z > 0 else 1.0)
    eps_t = MI_RIDGE_SCALE * (tr_t if tr_t > 0 else 1.0)
    joint[:d, :d] += eps_z * np.eye(d)
    joint[d:, d:] += eps_t * np.eye(d)

    sign_z, ld_z = np.linalg.slogdet(joint[:d, :d])
    sign_t, ld_t = np.linalg.slogdet(joint[d:, d:])
    sign_j, ld_j = np.linalg.slogdet(joint)
    lds = (ld_z, ld_t, ld_j)
    if sign_z <= 0 or sign_t <= 0 or sign_j <= 0 or not np.all(np.isfinite(lds)):
        raise SingularJointCovariance(
            "joint covariance not positive definite after ridge")
    return float(max(0.5 * (ld_z + ld_t - ld_j), 0.0))


def cov_spectrum(moments):
    """Singular values of the latent covariance (descending) and its
    condition number, with a degeneracy flag on a collapsed trailing end."""
    sv = np.linalg.svd(moments.cov, compute_uv=False)
    smax = sv[0] if len(sv) else 0.0
    smin = sv[-1] if len(sv) else 0.0
    cond = float(smax / max(smin, 1e-300))
    degenerate = bool(smax == 0 or smin / smax < DEGENERACY_RATIO)
    return Spectrum(singular_values=sv, condition_number=cond,
                    degenerate=degenerate)
