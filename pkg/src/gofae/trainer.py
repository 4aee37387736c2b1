"""Training loop: Euclidean SGD for the feature/decoder layers, Riemannian
SGD for the Stiefel layer, driven by the combined loss

    L = recon_weight * mean_i ||x_i - xhat_i||^2  +  loss_sign * lambda * T(Y u)

where T is the configured normality statistic evaluated on a fresh random
projection of the latent batch each iteration.  The Stiefel layer receives
only the statistic's gradient (ascent for sw/sf, descent for cvm/ks/ep);
a config flag switches it to the full-loss gradient for ablation.

Randomness is derived, not stateful: every random object is drawn from
SeedSequence(entropy=seed, spawn_key=(stream, index)) with stream 0 for
parameter init, 1 for the epoch shuffle (index = epoch), and 2 for the
projection direction (index = iteration).  Resuming from a checkpoint
therefore reproduces the uninterrupted run bit for bit.
"""

import hashlib
import json
import struct
from dataclasses import dataclass, field, asdict

import numpy as np

from . import nn, stiefel
from .exceptions import ConfigError, MalformedFile, NonFiniteLoss
from .gof import TestKind, evaluate, project, sample_unit_sphere, statistic_gradient

CHECKPOINT_MAGIC = b"GOFAE"
CHECKPOINT_VERSION = 1

STREAM_INIT = 0
STREAM_SHUFFLE = 1
STREAM_PROJECTION = 2

SCHEDULES = ("constant", "c/t")


def derived_rng(seed, stream, index=0):
    """Generator for one (stream, index) slot of a seed's random tree."""
    seq = np.random.SeedSequence(entropy=seed, spawn_key=(stream, index))
    return np.random.Generator(np.random.PCG64(seq))


@dataclass
class Architecture:
    feature_dim: int = 32
    latent_dim: int = 8
    encoder_hidden: tuple = (64, 64)
    decoder_hidden: tuple = (64, 64)
    activation: str = "tanh"

    def validate(self):
        if self.latent_dim < 1 or self.feature_dim < self.latent_dim:
            raise ConfigError(
                f"need feature_dim >= latent_dim >= 1, got "
                f"feature_dim={self.feature_dim}, latent_dim={self.latent_dim}")
        if self.activation not in nn.ACTIVATIONS:
            raise ConfigError(f"activation must be one of {nn.ACTIVATIONS}")
        for name in ("encoder_hidden", "decoder_hidden"):
            widths = getattr(self, name)
            if any((not isinstance(w, (int, np.integer))) or w < 1 for w in widths):
                raise ConfigError(f"{name} must be positive integers, got {widths}")


@dataclass
class TrainConfig:
    lam: float = 10.0
    test: TestKind = TestKind.SW
    batch_size: int = 64
    eta1: float = 1e-3
    eta2: float = 1e-2
    max_iters: int = 2000
    seed: int = 0
    schedule: str = "constant"
    momentum: float = 0.0
    recon_weight: float = 1.0
    freeze_features: bool = False
    theta_recon_grad: bool = False
    checkpoint_interval: int = 0
    arch: Architecture = field(default_factory=Architecture)

    def validate(self):
        if isinstance(self.test, str):
            self.test = TestKind.from_string(self.test)
        if self.test not in (TestKind.SW, TestKind.SF, TestKind.CVM,
                             TestKind.KS, TestKind.EP):
            raise ConfigError(f"test must be a normality kind, got {self.test}")
        if self.lam < 0:
            raise ConfigError(f"lambda must be nonnegative, got {self.lam}")
        if self.eta1 <= 0 or self.eta2 <= 0:
            raise ConfigError("learning rates eta1 and eta2 must be positive")
        if self.batch_size < 3:
            raise ConfigError(f"batch_size must be >= 3, got {self.batch_size}")
        if self.max_iters < 0:
            raise ConfigError(f"max_iters must be >= 0, got {self.max_iters}")
        if self.schedule not in SCHEDULES:
            raise ConfigError(f"schedule must be one of {SCHEDULES}")
        if not 0.0 <= self.momentum < 1.0:
            raise ConfigError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.recon_weight < 0:
            raise ConfigError(f"recon_weight must be nonnegative, got {self.recon_weight}")
        if self.checkpoint_interval < 0:
            raise ConfigError("checkpoint_interval must be >= 0")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ConfigError("seed must fit in an unsigned 64-bit integer")
        self.arch.validate()
        # batch size must sit inside the test's p-value validity range;
        # evaluate() would reject it at the first iteration otherwise
        from .gof import _tables
        from .gof._shapiro import SW_MAX_M, SW_MIN_M
        from .gof._edf import CVM_MIN_M
        ranges = {
            TestKind.SW: (SW_MIN_M, SW_MAX_M),
            TestKind.CVM: (CVM_MIN_M, None),
        }
        if self.test in ranges:
            lo, hi = ranges[self.test]
        else:
            lo, hi = _tables.supported_range(self.test.value)
        if self.batch_size < lo or (hi is not None and self.batch_size > hi):
            raise ConfigError(
                f"batch_size {self.batch_size} outside the validity range of "
                f"{self.test.value} p-values [{lo}, {hi}]")
        return self


def config_dict(config):
    d = asdict(config)
    d["test"] = config.test.value
    d["arch"]["encoder_hidden"] = list(config.arch.encoder_hidden)
    d["arch"]["decoder_hidden"] = list(config.arch.decoder_hidden)
    return d


def config_hash(config):
    """sha256 of the canonical JSON rendering of the config."""
    payload = json.dumps(config_dict(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode()).hexdigest()


def trajectory_hash(config):
    """Like config_hash but ignoring fields that do not affect the
    parameter trajectory (max_iters, checkpoint_interval), so a run can be
    resumed past its original horizon."""
    d = config_dict(config)
    d.pop("max_iters")
    d.pop("checkpoint_interval")
    payload = json.dumps(d, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode()).hexdigest()


def _rates(config, t):
    if config.schedule == "constant":
        return config.eta1, config.eta2
    return config.eta1 / t, config.eta2 / t


@dataclass
class LogRow:
    iteration: int
    recon_mse: float
    stat: float
    pvalue: float
    lam: float
    eta1: float
    eta2: float


METRICS_HEADER = "iter,recon_mse,stat,pvalue,lambda,eta1,eta2"


def write_metrics_csv(path, rows, comments=()):
    with open(path, "w", encoding="utf-8") as fh:
        for line in comments:
            fh.write(f"# {line}\n")
        fh.write(METRICS_HEADER + "\n")
        for r in rows:
            fh.write(f"{r.iteration},{r.recon_mse!r},{r.stat!r},{r.pvalue!r},"
                     f"{r.lam!r},{r.eta1!r},{r.eta2!r}\n")


def minibatch_loss(params, batch, config, u):
    """Scalar loss and the statistic's TestResult for one batch."""
    fwd = nn.forward(params, batch)
    m = batch.shape[0]
    recon = float(np.sum((batch - fwd.xhat) ** 2) / m)
    res = evaluate(config.test, project(fwd.y, u))
    loss = config.recon_weight * recon + config.test.loss_sign * config.lam * res.statistic
    return loss, res


def _sgd_update(layers, grads, eta, momentum, velocity):
    new_layers, new_velocity = [], []
    for (w, b), (dw, db), (vw, vb) in zip(layers, grads, velocity):
        if momentum > 0.0:
            vw = momentum * vw + dw
            vb = momentum * vb + db
            new_layers.append((w - eta * vw, b - eta * vb))
            new_velocity.append((vw, vb))
        else:
            new_layers.append((w - eta * dw, b - eta * db))
            new_velocity.append((vw, vb))
    return new_layers, new_velocity


def _zero_velocity(layers):
    return [(np.zeros_like(w), np.zeros_like(b)) for w, b in layers]


def _diagnostics(t, batch, params, grads=None):
    diag = {
        "iteration": t,
        "batch_norm": float(np.linalg.norm(batch)),
        "param_norms": {name: float(np.linalg.norm(a))
                        for name, a in nn.param_blocks(params)},
    }
    if grads is not None:
        diag["grad_norms"] = {
            "xi": [float(np.linalg.norm(dw)) for dw, _ in grads.xi],
            "theta": float(np.linalg.norm(grads.theta)),
            "phi": [float(np.linalg.norm(dw)) for dw, _ in grads.phi],
        }
    return diag


def train_step(params, batch, config, t, velocity=None):
    """One iteration: fresh projection, loss, simultaneous updates.

    Returns (new_params, new_velocity, LogRow).  `velocity` carries the
    momentum buffers between calls; pass None for plain SGD or on the first
    call (zeros are created on demand).
    """
    m = batch.shape[0]
    u = sample_unit_sphere(params.d, derived_rng(config.seed, STREAM_PROJECTION, t))
    try:
        fwd = nn.forward(params, batch)
    except nn.NonFiniteActivation as e:
        # blow-ups mid-training are numerical aborts, not input errors
        raise NonFiniteLoss(f"forward pass diverged at iteration {t}: {e}",
                            _diagnostics(t, batch, params)) from e
    recon = float(np.sum((batch - fwd.xhat) ** 2) / m)
    y_proj = fwd.y @ u
    res = evaluate(config.test, y_proj)
    loss = config.recon_weight * recon + config.test.loss_sign * config.lam * res.statistic
    if not np.isfinite(loss):
        raise NonFiniteLoss(f"loss became non-finite at iteration {t}",
                            _diagnostics(t, batch, params))

    g = statistic_gradient(config.test, y_proj)
    d_xhat = config.recon_weight * 2.0 * (fwd.xhat - batch) / m
    d_y_stat = config.test.loss_sign * config.lam * np.outer(g, u)
    grads = nn.backward(params, fwd, d_xhat, d_y_stat)
    if not all(np.all(np.isfinite(dw)) and np.all(np.isfinite(db))
               for dw, db in grads.xi + grads.phi):
        raise NonFiniteLoss(f"gradients became non-finite at iteration {t}",
                            _diagnostics(t, batch, params, grads))

    eta1, eta2 = _rates(config, t)
    if velocity is None:
        velocity = {"xi": _zero_velocity(params.xi), "phi": _zero_velocity(params.phi)}

    if config.freeze_features:
        new_xi, new_phi = params.xi, params.phi
        new_velocity = velocity
    else:
        new_xi, vel_xi = _sgd_update(params.xi, grads.xi, eta1,
                                     config.momentum, velocity["xi"])
        new_phi, vel_phi = _sgd_update(params.phi, grads.phi, eta1,
                                       config.momentum, velocity["phi"])
        new_velocity = {"xi": vel_xi, "phi": vel_phi}

    if config.theta_recon_grad:
        theta_dir, sign = grads.theta, -1.0
    else:
        theta_dir, sign = fwd.v.T @ np.outer(g, u), config.test.direction_sign
    # eta2 = 0 is the documented ablation: leave the Stiefel layer alone
    new_theta = (params.theta if eta2 == 0.0
                 else stiefel.rsgd_step(params.theta, theta_dir, eta2, sign))

    new_params = nn.ModelParams(xi=new_xi, theta=new_theta, phi=new_phi,
                                activation=params.activation)
    row = LogRow(t, recon, res.statistic, res.pvalue, config.lam, eta1, eta2)
    return new_params, new_velocity, row


class _Welford:
    def __init__(self, count=0, mean=0.0, m2=0.0):
        self.count, self.mean, self.m2 = count, mean, m2

    def push(self, x):
        self.count += 1
        delta = x - self.mean
        self.mean += delta / self.count
        self.m2 += delta * (x - self.mean)


def _epoch_permutation(seed, epoch, n):
    return derived_rng(seed, STREAM_SHUFFLE, epoch).permutation(n)


def train(dataset_matrix, config, checkpoint_path=None, resume_from=None):
    """Full training loop over shuffled disjoint mini-batches.

    dataset_matrix: N x n array (already standardized if desired).
    checkpoint_path: where periodic/final checkpoints go (required when
    config.checkpoint_interval > 0 or a final checkpoint is wanted).
    resume_from: a checkpoint file; training continues from its iteration
    and reproduces the uninterrupted run exactly.

    Returns (params, rows) with rows the per-iteration LogRow list for the
    iterations executed in THIS call.
    """
    config.validate()
    x = np.asarray(dataset_matrix, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < config.batch_size:
        raise ConfigError(
            f"dataset shape {x.shape} cannot supply batches of {config.batch_size}")
    if not np.all(np.isfinite(x)):
        raise ConfigError("dataset contains non-finite entries")
    n = x.shape[1]
    batches_per_epoch = x.shape[0] // config.batch_size

    velocity = None
    if resume_from is not None:
        params, meta, velocity = load_checkpoint(resume_from, with_velocity=True)
        if meta["trajectory_hash"] != trajectory_hash(config):
            raise ConfigError("checkpoint was written by a different configuration")
        t_start = meta["iteration"] + 1
        stats = _Welford(meta["loss_count"], meta["loss_mean"], meta["loss_m2"])
    else:
        params = nn.init_params(
            n, config.arch.feature_dim, config.arch.latent_dim,
            config.arch.encoder_hidden, config.arch.decoder_hidden,
            config.arch.activation, derived_rng(config.seed, STREAM_INIT))
        t_start = 1
        stats = _Welford()

    rows = []
    perm_epoch, perm = -1, None
    for t in range(t_start, config.max_iters + 1):
        epoch = (t - 1) // batches_per_epoch
        if epoch != perm_epoch:
            perm = _epoch_permutation(config.seed, epoch, x.shape[0])
            perm_epoch = epoch
        b = (t - 1) % batches_per_epoch
        batch = x[perm[b * config.batch_size:(b + 1) * config.batch_size]]
        params, velocity, row = train_step(params, batch, config, t, velocity)
        stats.push(row.recon_mse + config.test.loss_sign * config.lam * row.stat)
        rows.append(row)
        if (config.checkpoint_interval > 0 and checkpoint_path is not None
                and t % config.checkpoint_interval == 0):
            save_checkpoint(checkpoint_path, params, t, config, stats, velocity)
    if checkpoint_path is not None:
        save_checkpoint(checkpoint_path, params, config.max_iters, config, stats,
                        velocity)
    return params, rows


# ---------------------------------------------------------------------------
# checkpoint serialization (versioned binary; layout documented in README)

def _meta_dict(params, t, config, stats, has_velocity):
    return {
        "activation": params.activation,
        "config_hash": config_hash(config),
        "trajectory_hash": trajectory_hash(config),
        "decoder_hidden": [int(w.shape[1]) for w, _ in params.phi[:-1]],
        "encoder_hidden": [int(w.shape[1]) for w, _ in params.xi[:-1]],
        "feature_dim": params.k,
        "has_velocity": int(has_velocity),
        "input_dim": params.n,
        "iteration": t,
        "lambda": config.lam,
        "latent_dim": params.d,
        "loss_count": stats.count,
        "loss_m2": stats.m2,
        "loss_mean": stats.mean,
        "momentum": config.momentum,
        "seed": int(config.seed),
        "test": config.test.value,
    }


def _velocity_blocks(velocity):
    blocks = []
    for group in ("xi", "phi"):
        for vw, vb in velocity[group]:
            blocks.extend([vw, vb])
    return blocks


def save_checkpoint(path, params, t, config, stats=None, velocity=None):
    """Momentum buffers are serialized only when momentum is active; they
    are part of the trajectory state, so bitwise resume needs them."""
    stats = stats or _Welford()
    save_vel = velocity is not None and config.momentum > 0.0
    meta = json.dumps(_meta_dict(params, t, config, stats, save_vel),
                      sort_keys=True, separators=(",", ":")).encode()
    blocks = [arr for _, arr in nn.param_blocks(params)]
    if save_vel:
        blocks = blocks + _velocity_blocks(velocity)
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", CHECKPOINT_VERSION))
        fh.write(struct.pack("<I", len(meta)))
        fh.write(meta)
        fh.write(struct.pack("<I", len(blocks)))
        for arr in blocks:
            a = np.ascontiguousarray(arr, dtype="<f8")
            fh.write(struct.pack("<I", a.ndim))
            fh.write(struct.pack(f"<{a.ndim}I", *a.shape))
            fh.write(a.tobytes())
        fh.write(struct.pack("<QQ", int(config.seed), t))


def load_checkpoint(path, with_velocity=False):
    """Read a checkpoint; returns (ModelParams, meta dict) or, with
    with_velocity=True, (ModelParams, meta, velocity-or-None).

    meta carries iteration, seed, config_hash, loss statistics, and the
    architecture needed to rebuild the parameter object.
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    off = 0

    def need(nbytes, what):
        nonlocal off
        if off + nbytes > len(raw):
            raise MalformedFile(f"truncated checkpoint while reading {what}",
                                byte_offset=off)
        chunk = raw[off:off + nbytes]
        off += nbytes
        return chunk

    if need(5, "magic") != CHECKPOINT_MAGIC:
        raise MalformedFile("bad magic bytes", byte_offset=0)
    version, = struct.unpack("<I", need(4, "version"))
    if version != CHECKPOINT_VERSION:
        raise MalformedFile(f"unsupported checkpoint version {version}", byte_offset=5)
    meta_len, = struct.unpack("<I", need(4, "meta length"))
    meta = json.loads(need(meta_len, "meta").decode())
    block_count, = struct.unpack("<I", need(4, "block count"))
    blocks = []
    for bi in range(block_count):
        ndim, = struct.unpack("<I", need(4, f"block {bi} ndim"))
        shape = struct.unpack(f"<{ndim}I", need(4 * ndim, f"block {bi} dims"))
        count = int(np.prod(shape)) if ndim else 1
        data = need(8 * count, f"block {bi} data")
        blocks.append(np.frombuffer(data, dtype="<f8").reshape(shape).copy())
    seed, t = struct.unpack("<QQ", need(16, "rng state"))
    if off != len(raw):
        raise MalformedFile("trailing bytes after rng state", byte_offset=off)
    if t != meta["iteration"] or seed != meta["seed"]:
        raise MalformedFile("rng state disagrees with meta", byte_offset=off - 16)

    n_enc = len(meta["encoder_hidden"]) + 1
    n_dec = len(meta["decoder_hidden"]) + 1
    n_param = 2 * n_enc + 1 + 2 * n_dec
    expect = n_param + (n_param - 1 if meta["has_velocity"] else 0)
    if len(blocks) != expect:
        raise MalformedFile(f"expected {expect} parameter blocks, got {len(blocks)}")
    xi = [(blocks[2 * i], blocks[2 * i + 1]) for i in range(n_enc)]
    theta = blocks[2 * n_enc]
    rest = blocks[2 * n_enc + 1:n_param]
    phi = [(rest[2 * i], rest[2 * i + 1]) for i in range(n_dec)]
    params = nn.ModelParams(xi=xi, theta=theta, phi=phi,
                            activation=meta["activation"])
    if not with_velocity:
        return params, meta
    velocity = None
    if meta["has_velocity"]:
        vb = blocks[n_param:]
        vel_xi = [(vb[2 * i], vb[2 * i + 1]) for i in range(n_enc)]
        vphi = vb[2 * n_enc:]
        vel_phi = [(vphi[2 * i], vphi[2 * i + 1]) for i in range(n_dec)]
        velocity = {"xi": vel_xi, "phi": vel_phi}
    return params, meta, velocity
