"""Goodness-of-fit regularized autoencoders.

Univariate normality statistics with analytic sample-space gradients (gof),
Riemannian SGD on the Stiefel manifold for the encoder's output layer
(stiefel), a small hand-differentiated MLP autoencoder (nn), the training
loop (trainer), p-value uniformity evaluation and regularization-strength
selection (hc), quantitative diagnostics (metrics), synthetic data and file
ingestion (data), and a scikit-learn style wrapper (estimator).
"""

from .estimator import GoFAE
from .gof import TestKind, TestResult

__version__ = "0.1.0"
__all__ = ["GoFAE", "TestKind", "TestResult", "__version__"]
