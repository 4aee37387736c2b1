"""Scikit-learn style wrapper around the trainer.

GoFAE follows the fit/transform convention: fit trains the autoencoder on
an array, transform encodes to the latent space, inverse_transform
decodes back, and score reports negative reconstruction error so that
larger is better.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from . import nn
from .data import standardize as _standardize
from .trainer import Architecture, TrainConfig, train


class GoFAE(TransformerMixin, BaseEstimator):
    """Autoencoder whose latent distribution is pushed toward normality.

    Parameters mirror TrainConfig; all are plain constructor attributes so
    get_params/set_params and cloning work unchanged.
    """

    def __init__(self, lam=10.0, test="sw", batch_size=64, feature_dim=32,
                 latent_dim=8, encoder_hidden=(64, 64), decoder_hidden=(64, 64),
                 activation="tanh", eta1=1e-3, eta2=1e-2, max_iters=2000,
                 seed=0, schedule="constant", momentum=0.0, recon_weight=1.0,
                 standardize=True):
        self.lam = lam
        self.test = test
        self.batch_size = batch_size
        self.feature_dim = feature_dim
        self.latent_dim = latent_dim
        self.encoder_hidden = encoder_hidden
        self.decoder_hidden = decoder_hidden
        self.activation = activation
        self.eta1 = eta1
        self.eta2 = eta2
        self.max_iters = max_iters
        self.seed = seed
        self.schedule = schedule
        self.momentum = momentum
        self.recon_weight = recon_weight
        self.standardize = standardize

    def _config(self):
        arch = Architecture(feature_dim=self.feature_dim,
                            latent_dim=self.latent_dim,
                            encoder_hidden=tuple(self.encoder_hidden),
                            decoder_hidden=tuple(self.decoder_hidden),
                            activation=self.activation)
        return TrainConfig(lam=self.lam, test=self.test,
                           batch_size=self.batch_size, eta1=self.eta1,
                           eta2=self.eta2, max_iters=self.max_iters,
                           seed=self.seed, schedule=self.schedule,
                           momentum=self.momentum,
                           recon_weight=self.recon_weight, arch=arch)

    def _prepare(self, x):
        x = check_array(x, dtype=float)
        if x.shape[1] != self.n_features_in_:
            raise ValueError(
                f"expected {self.n_features_in_} features, got {x.shape[1]}")
        return (x - self.mean_) / self.scale_

    def fit(self, x, y=None):
        x = check_array(x, dtype=float)
        self.n_features_in_ = x.shape[1]
        if self.standardize:
            xs, self.mean_, self.scale_ = _standardize(x)
        else:
            xs = x
            self.mean_ = np.zeros(x.shape[1])
            self.scale_ = np.ones(x.shape[1])
        self.params_, self.history_ = train(xs, self._config())
        return self

    def transform(self, x):
        check_is_fitted(self, "params_")
        return nn.encode(self.params_, self._prepare(x))[1]

    def inverse_transform(self, y):
        check_is_fitted(self, "params_")
        y = check_array(y, dtype=float)
        return nn.decode(self.params_, y) * self.scale_ + self.mean_

    def score(self, x, y=None):
        """Negative mean squared reconstruction error in the input space."""
        check_is_fitted(self, "params_")
        x = check_array(x, dtype=float)
        xhat = self.inverse_transform(self.transform(x))
        return -float(np.mean(np.sum((x - xhat) ** 2, axis=1)))
