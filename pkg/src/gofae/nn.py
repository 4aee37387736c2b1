"""Fully-connected autoencoder with hand-written reverse-mode gradients.

Encoder: affine feature layers with a smooth activation after every layer
(so the feature matrix V stays bounded under tanh), followed by a bias-free
linear map Y = V Theta whose matrix lives on the Stiefel manifold.
Decoder: affine layers, hidden activations, linear output.

backward() consumes a Forward cache plus upstream gradients and returns
exact gradients for every parameter block; Theta's gradient is ambient
(Euclidean), ready for stiefel.project_tangent.
"""

from dataclasses import dataclass, field

import numpy as np

from . import stiefel
from .exceptions import NonFiniteActivation, ShapeMismatch, StaleCache

ACTIVATIONS = ("tanh", "relu", "linear")


def _act(x, kind):
    if kind == "tanh":
        return np.tanh(x)
    if kind == "relu":
        return np.maximum(x, 0.0)
    return x


def _dact_from_output(a, kind):
    if kind == "tanh":
        return 1.0 - a * a
    if kind == "relu":
        return (a > 0.0).astype(np.float64)
    return np.ones_like(a)


@dataclass
class ModelParams:
    """xi: encoder affine layers, theta: Stiefel matrix, phi: decoder layers."""
    xi: list
    theta: np.ndarray
    phi: list
    activation: str = "tanh"

    @property
    def n(self):
        return self.xi[0][0].shape[0]

    @property
    def k(self):
        return self.theta.shape[0]

    @property
    def d(self):
        return self.theta.shape[1]


@dataclass
class Forward:
    """Cached activations from one forward pass, consumed by backward()."""
    params: ModelParams
    x: np.ndarray
    enc_acts: list = field(default_factory=list)   # post-activation, per xi layer
    v: np.ndarray = None
    y: np.ndarray = None
    dec_acts: list = field(default_factory=list)   # post-activation, hidden phi layers
    xhat: np.ndarray = None


@dataclass
class Grads:
    xi: list
    theta: np.ndarray
    phi: list


def _xavier(rng, fan_in, fan_out):
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


def init_params(n, k, d, encoder_hidden=(64, 64), decoder_hidden=(64, 64),
                activation="tanh", rng=None):
    """Xavier-uniform affine layers; Theta is a retracted Gaussian."""
    if activation not in ACTIVATIONS:
        raise ValueError(f"activation must be one of {ACTIVATIONS}, got {activation!r}")
    if rng is None:
        rng = np.random.default_rng()
    xi = []
    widths = [n, *encoder_hidden, k]
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        xi.append((_xavier(rng, fan_in, fan_out), np.zeros(fan_out)))
    theta = stiefel.random_point(k, d, rng)
    phi = []
    widths = [d, *decoder_hidden, n]
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        phi.append((_xavier(rng, fan_in, fan_out), np.zeros(fan_out)))
    return ModelParams(xi=xi, theta=theta, phi=phi, activation=activation)


def _check_batch(params, x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != params.n:
        raise ShapeMismatch(f"batch shape {x.shape} does not feed input dim {params.n}")
    if x.shape[0] < 1:
        raise ShapeMismatch("batch must contain at least one row")
    if not np.all(np.isfinite(x)):
        raise NonFiniteActivation("batch contains non-finite entries")
    return x


def forward(params, x):
    """Full forward pass with caches for backward()."""
    x = _check_batch(params, x)
    fwd = Forward(params=params, x=x)
    h = x
    for w, b in params.xi:
        h = _act(h @ w + b, params.activation)
        fwd.enc_acts.append(h)
    fwd.v = h
    fwd.y = h @ params.theta
    h = fwd.y
    for w, b in params.phi[:-1]:
        h = _act(h @ w + b, params.activation)
        fwd.dec_acts.append(h)
    w, b = params.phi[-1]
    fwd.xhat = h @ w + b
    if not (np.all(np.isfinite(fwd.xhat)) and np.all(np.isfinite(fwd.y))):
        raise NonFiniteActivation("forward pass produced non-finite values")
    return fwd


def encode(params, x):
    """Features V and latents Y = V Theta for a batch."""
    fwd = forward(params, x)
    return fwd.v, fwd.y


def decode(params, latents):
    """Reconstruction from latent rows."""
    h = np.asarray(latents, dtype=np.float64)
    if h.ndim != 2 or h.shape[1] != params.d:
        raise ShapeMismatch(f"latents shape {h.shape} does not match d={params.d}")
    for w, b in params.phi[:-1]:
        h = _act(h @ w + b, params.activation)
    w, b = params.phi[-1]
    out = h @ w + b
    if not np.all(np.isfinite(out)):
        raise NonFiniteActivation("decode produced non-finite values")
    return out


def backward(params, fwd, d_xhat, d_y):
    """Reverse-mode pass from upstream gradients d_xhat (on the
    reconstruction) and d_y (directly on the latents, e.g. the statistic
    term).  Contributions to Y through the decoder are accumulated
    internally, so the caller passes only the direct piece in d_y.
    """
    if fwd.params is not params:
        raise StaleCache("forward cache was built for different parameters")
    m = fwd.x.shape[0]
    d_xhat = np.zeros((m, params.n)) if d_xhat is None else np.asarray(d_xhat, dtype=np.float64)
    d_y = np.zeros((m, params.d)) if d_y is None else np.asarray(d_y, dtype=np.float64)
    if d_xhat.shape != fwd.xhat.shape or d_y.shape != fwd.y.shape:
        raise ShapeMismatch("upstream gradient shapes do not match the forward cache")

    phi_grads = [None] * len(params.phi)
    delta = d_xhat
    w_last, _ = params.phi[-1]
    h_in = fwd.dec_acts[-1] if fwd.dec_acts else fwd.y
    phi_grads[-1] = (h_in.T @ delta, delta.sum(axis=0))
    delta = delta @ w_last.T
    for li in range(len(params.phi) - 2, -1, -1):
        a = fwd.dec_acts[li]
        delta = delta * _dact_from_output(a, params.activation)
        h_in = fwd.dec_acts[li - 1] if li > 0 else fwd.y
        w, _ = params.phi[li]
        phi_grads[li] = (h_in.T @ delta, delta.sum(axis=0))
        delta = delta @ w.T

    dy_total = d_y + delta
    theta_grad = fwd.v.T @ dy_total

    xi_grads = [None] * len(params.xi)
    delta = dy_total @ params.theta.T
    for li in range(len(params.xi) - 1, -1, -1):
        a = fwd.enc_acts[li]
        delta = delta * _dact_from_output(a, params.activation)
        h_in = fwd.enc_acts[li - 1] if li > 0 else fwd.x
        w, _ = params.xi[li]
        xi_grads[li] = (h_in.T @ delta, delta.sum(axis=0))
        delta = delta @ w.T

    return Grads(xi=xi_grads, theta=theta_grad, phi=phi_grads)


def param_blocks(params):
    """Parameter arrays in the fixed serialization order:
    xi W0, xi b0, ..., theta, phi W0, phi b0, ...  Names are informative only.
    """
    blocks = []
    for li, (w, b) in enumerate(params.xi):
        blocks.append((f"xi.w{li}", w))
        blocks.append((f"xi.b{li}", b))
    blocks.append(("theta", params.theta))
    for li, (w, b) in enumerate(params.phi):
        blocks.append((f"phi.w{li}", w))
        blocks.append((f"phi.b{li}", b))
    return blocks


def replace_blocks(params, arrays):
    """Rebuild ModelParams from arrays ordered as in param_blocks()."""
    expect = param_blocks(params)
    if len(arrays) != len(expect):
        raise ShapeMismatch(f"expected {len(expect)} blocks, got {len(arrays)}")
    arrays = [np.asarray(a, dtype=np.float64) for a in arrays]
    for (name, old), new in zip(expect, arrays):
        if old.shape != new.shape:
            raise ShapeMismatch(f"block {name}: shape {new.shape} != {old.shape}")
    n_xi = len(params.xi)
    xi = [(arrays[2 * i], arrays[2 * i + 1]) for i in range(n_xi)]
    theta = arrays[2 * n_xi]
    rest = arrays[2 * n_xi + 1:]
    phi = [(rest[2 * i], rest[2 * i + 1]) for i in range(len(params.phi))]
    return ModelParams(xi=xi, theta=theta, phi=phi, activation=params.activation)
