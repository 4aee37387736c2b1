"""Stiefel manifold primitives for the encoder's output layer.

The manifold is M = {Theta in R^{k x d} : Theta^T Theta = I_d}, k >= d.
Gradients are projected onto the tangent space

    Gamma = D - Theta (Theta^T D + D^T Theta) / 2,

the step Theta + eta * Gamma leaves the manifold, and the SVD retraction
Theta = R Lambda S^T  ->  R S^T maps it back to the nearest orthonormal
matrix in Frobenius norm.
"""

import numpy as np

from .exceptions import DimensionMismatch, RankDeficient

RANK_TOL = 1e-12


def _check_pair(theta, grad):
    if theta.ndim != 2 or theta.shape[0] < theta.shape[1]:
        raise DimensionMismatch(f"expected k x d with k >= d, got {theta.shape}")
    if grad.shape != theta.shape:
        raise DimensionMismatch(
            f"gradient shape {grad.shape} does not match basepoint {theta.shape}")


def project_tangent(theta, grad):
    """Project an ambient gradient onto the tangent space at theta."""
    theta = np.asarray(theta, dtype=np.float64)
    grad = np.asarray(grad, dtype=np.float64)
    _check_pair(theta, grad)
    sym = theta.T @ grad
    sym = (sym + sym.T) / 2.0
    return grad - theta @ sym


def retract_svd(raw):
    """Nearest orthonormal matrix to raw: R S^T from the thin SVD R Lambda S^T.

    Sign convention: the largest-magnitude entry of each left singular
    vector is forced positive before recombining, so equal inputs always
    produce bit-identical outputs regardless of LAPACK's internal choices.
    """
    raw = np.asarray(raw, dtype=np.float64)
    if raw.ndim != 2 or raw.shape[0] < raw.shape[1]:
        raise DimensionMismatch(f"expected k x d with k >= d, got {raw.shape}")
    r, lam, st = np.linalg.svd(raw, full_matrices=False)
    if lam[-1] < RANK_TOL:
        raise RankDeficient(
            f"smallest singular value {lam[-1]:.3e} below {RANK_TOL:.0e}; "
            "retraction undefined")
    pick = np.argmax(np.abs(r), axis=0)
    signs = np.sign(r[pick, np.arange(r.shape[1])])
    signs[signs == 0.0] = 1.0
    return (r * signs) @ (signs[:, None] * st)


def rsgd_step(theta, grad, stepsize, direction_sign):
    """One Riemannian SGD step: project, move by sign * stepsize, retract.

    direction_sign +1 ascends the objective whose Euclidean gradient is
    `grad` (statistics that reject for small values), -1 descends.
    """
    if stepsize <= 0.0:
        raise ValueError(f"stepsize must be positive, got {stepsize}")
    if direction_sign not in (1.0, -1.0, 1, -1):
        raise ValueError(f"direction_sign must be +1 or -1, got {direction_sign}")
    gamma = project_tangent(theta, grad)
    return retract_svd(np.asarray(theta, dtype=np.float64)
                       + float(direction_sign) * float(stepsize) * gamma)


def random_point(k, d, rng):
    """Haar-like random Stiefel point: retraction of an i.i.d. Gaussian."""
    if k < d or d < 1:
        raise DimensionMismatch(f"need k >= d >= 1, got k={k}, d={d}")
    return retract_svd(rng.standard_normal((k, d)))


def stiefel_distance(theta):
    """Frobenius norm of Theta^T Theta - I, the manifold violation."""
    theta = np.asarray(theta, dtype=np.float64)
    eye = np.eye(theta.shape[1])
    return float(np.linalg.norm(theta.T @ theta - eye))
