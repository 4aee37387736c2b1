"""Training loop: config validation, loss assembly, single steps, full runs,
checkpoint format, resume, and the qualitative convergence properties."""

import json
import struct

import numpy as np
import pytest

from gofae import nn, stiefel, trainer
from gofae.data import gen_manifold_gaussian, standardize
from gofae.exceptions import ConfigError, MalformedFile, NonFiniteLoss
from gofae.gof import (TestKind as Kind, evaluate, project,
                       sample_unit_sphere, statistic_gradient)
from gofae.trainer import (
    Architecture,
    METRICS_HEADER,
    TrainConfig,
    config_hash,
    derived_rng,
    load_checkpoint,
    minibatch_loss,
    save_checkpoint,
    train,
    train_step,
    trajectory_hash,
    write_metrics_csv,
)


def small_arch(**kw):
    base = dict(feature_dim=10, latent_dim=3, encoder_hidden=(8,),
                decoder_hidden=(8,))
    base.update(kw)
    return Architecture(**base)


def small_config(**kw):
    base = dict(lam=1.0, test="sw", batch_size=16, eta1=1e-3, eta2=1e-2,
                max_iters=30, seed=4, arch=small_arch())
    base.update(kw)
    return TrainConfig(**base)


def small_data(n=5, rows=96, seed=9):
    return np.random.default_rng(seed).standard_normal((rows, n))


def blocks_equal(a, b):
    pa = [arr for _, arr in nn.param_blocks(a)]
    pb = [arr for _, arr in nn.param_blocks(b)]
    return len(pa) == len(pb) and all(np.array_equal(x, y) for x, y in zip(pa, pb))


class TestDerivedRng:
    def test_reproducible(self):
        a = derived_rng(7, 2, 13).standard_normal(5)
        b = derived_rng(7, 2, 13).standard_normal(5)
        assert np.array_equal(a, b)

    def test_streams_and_indices_distinct(self):
        draws = {
            (s, i): tuple(derived_rng(7, s, i).standard_normal(3))
            for s in (0, 1, 2) for i in (0, 1)
        }
        assert len(set(draws.values())) == 6


class TestConfigValidation:
    def test_accepts_string_test_kind(self):
        cfg = small_config(test="cvm").validate()
        assert cfg.test is Kind.CVM

    def test_rejects_uniformity_kind(self):
        with pytest.raises(ConfigError):
            small_config(test=Kind.KSUNIF).validate()

    @pytest.mark.parametrize("kw", [
        dict(lam=-0.5),
        dict(eta1=0.0),
        dict(eta2=-1e-3),
        dict(batch_size=2),
        dict(max_iters=-1),
        dict(schedule="cosine"),
        dict(momentum=1.0),
        dict(momentum=-0.1),
        dict(recon_weight=-1.0),
        dict(checkpoint_interval=-5),
        dict(seed=2 ** 64),
    ])
    def test_rejects_bad_fields(self, kw):
        with pytest.raises(ConfigError):
            small_config(**kw).validate()

    def test_rejects_batch_outside_pvalue_range(self):
        # the ep null table stops at m = 512
        with pytest.raises(ConfigError):
            small_config(test="ep", batch_size=600).validate()

    @pytest.mark.parametrize("kw", [
        dict(feature_dim=2, latent_dim=3),
        dict(latent_dim=0),
        dict(activation="sigmoid"),
        dict(encoder_hidden=(8, 0)),
        dict(decoder_hidden=(2.5,)),
    ])
    def test_rejects_bad_architecture(self, kw):
        with pytest.raises(ConfigError):
            small_config(arch=small_arch(**kw)).validate()

    def test_schedule_rates(self):
        cfg = small_config(eta1=0.4, eta2=0.2)
        assert trainer._rates(cfg, 1) == (0.4, 0.2)
        assert trainer._rates(cfg, 17) == (0.4, 0.2)
        dec = small_config(eta1=0.4, eta2=0.2, schedule="c/t")
        assert dec.schedule in trainer.SCHEDULES
        assert trainer._rates(dec, 1) == (0.4, 0.2)
        e1, e2 = trainer._rates(dec, 10)
        assert e1 == pytest.approx(0.04) and e2 == pytest.approx(0.02)


class TestHashes:
    def test_config_hash_changes_with_any_field(self):
        a = small_config().validate()
        b = small_config(max_iters=31).validate()
        assert config_hash(a) != config_hash(b)

    def test_trajectory_hash_ignores_horizon_fields(self):
        a = small_config(max_iters=30, checkpoint_interval=0).validate()
        b = small_config(max_iters=500, checkpoint_interval=25).validate()
        assert trajectory_hash(a) == trajectory_hash(b)
        assert trajectory_hash(a) != trajectory_hash(small_config(lam=2.0).validate())


class TestMinibatchLoss:
    def setup_method(self):
        rng = np.random.default_rng(11)
        self.params = nn.init_params(5, 10, 3, (8,), (8,), "tanh", rng=rng)
        self.batch = rng.standard_normal((16, 5))
        self.u = sample_unit_sphere(3, rng)

    def test_lambda_zero_is_pure_reconstruction(self):
        cfg = small_config(lam=0.0).validate()
        loss, res = minibatch_loss(self.params, self.batch, cfg, self.u)
        fwd = nn.forward(self.params, self.batch)
        recon = float(np.mean(np.sum((self.batch - fwd.xhat) ** 2, axis=1)))
        assert loss == pytest.approx(recon, rel=1e-12)
        assert 0.0 <= res.pvalue <= 1.0

    def test_identity_autoencoder_leaves_statistic_term(self):
        d = 3
        base = nn.init_params(d, d, d, (), (), "linear", rng=np.random.default_rng(0))
        params = nn.replace_blocks(base, [np.eye(d), np.zeros(d), np.eye(d),
                                          np.eye(d), np.zeros(d)])
        batch = np.random.default_rng(12).standard_normal((20, d))
        cfg = small_config(lam=3.0).validate()
        loss, res = minibatch_loss(params, batch, cfg, self.u)
        expect = evaluate(Kind.SW, project(batch, self.u))
        assert loss == pytest.approx(-3.0 * expect.statistic, rel=1e-12)
        assert res.statistic == expect.statistic

    def test_matches_compositional_oracle(self):
        cfg = small_config(lam=10.0, recon_weight=0.7).validate()
        loss, res = minibatch_loss(self.params, self.batch, cfg, self.u)
        fwd = nn.forward(self.params, self.batch)
        recon = float(np.sum((self.batch - fwd.xhat) ** 2) / len(self.batch))
        ref = evaluate(Kind.SW, fwd.y @ self.u)
        assert loss == pytest.approx(0.7 * recon - 10.0 * ref.statistic, rel=1e-12)
        assert res.pvalue == ref.pvalue

    def test_descent_kinds_enter_with_positive_sign(self):
        cfg = small_config(lam=5.0, test="cvm").validate()
        loss, res = minibatch_loss(self.params, self.batch, cfg, self.u)
        fwd = nn.forward(self.params, self.batch)
        recon = float(np.sum((self.batch - fwd.xhat) ** 2) / len(self.batch))
        assert loss == pytest.approx(recon + 5.0 * res.statistic, rel=1e-12)


class TestTrainStep:
    def setup_method(self):
        self.cfg = small_config(lam=2.0, momentum=0.0).validate()
        rng = np.random.default_rng(13)
        self.params = nn.init_params(
            5, self.cfg.arch.feature_dim, self.cfg.arch.latent_dim,
            self.cfg.arch.encoder_hidden, self.cfg.arch.decoder_hidden,
            "tanh", rng=rng)
        self.batch = rng.standard_normal((16, 5))

    def test_matches_manual_composition(self):
        t = 3
        cfg = self.cfg
        new_params, _, row = train_step(self.params, self.batch, cfg, t)

        u = sample_unit_sphere(self.params.d,
                               derived_rng(cfg.seed, trainer.STREAM_PROJECTION, t))
        fwd = nn.forward(self.params, self.batch)
        y_proj = fwd.y @ u
        res = evaluate(cfg.test, y_proj)
        g = statistic_gradient(cfg.test, y_proj)
        m = len(self.batch)
        d_xhat = cfg.recon_weight * 2.0 * (fwd.xhat - self.batch) / m
        d_y = cfg.test.loss_sign * cfg.lam * np.outer(g, u)
        grads = nn.backward(self.params, fwd, d_xhat, d_y)

        for (w, b), (dw, db), (nw, nb) in zip(self.params.xi, grads.xi, new_params.xi):
            assert np.array_equal(nw, w - cfg.eta1 * dw)
            assert np.array_equal(nb, b - cfg.eta1 * db)
        for (w, b), (dw, db), (nw, nb) in zip(self.params.phi, grads.phi, new_params.phi):
            assert np.array_equal(nw, w - cfg.eta1 * dw)
            assert np.array_equal(nb, b - cfg.eta1 * db)
        ref_theta = stiefel.rsgd_step(self.params.theta, fwd.v.T @ np.outer(g, u),
                                      cfg.eta2, cfg.test.direction_sign)
        assert np.array_equal(new_params.theta, ref_theta)
        assert row.iteration == t and row.stat == res.statistic
        assert row.pvalue == res.pvalue and row.lam == cfg.lam

    def test_theta_stays_on_manifold(self):
        p = self.params
        for t in range(1, 6):
            p, _, _ = train_step(p, self.batch, self.cfg, t)
        gram = p.theta.T @ p.theta
        assert np.linalg.norm(gram - np.eye(p.d)) <= 1e-8

    def test_lambda_zero_eta2_zero_is_plain_autoencoder(self):
        # step-level ablation: validate() would reject eta2 = 0, train_step won't
        cfg = small_config(lam=0.0, eta2=0.0)
        cfg.test = Kind.SW
        new_params, _, _ = train_step(self.params, self.batch, cfg, 1)
        assert new_params.theta is self.params.theta
        fwd = nn.forward(self.params, self.batch)
        d_xhat = 2.0 * (fwd.xhat - self.batch) / len(self.batch)
        grads = nn.backward(self.params, fwd, d_xhat, np.zeros_like(fwd.y))
        for (w, _), (dw, _), (nw, _) in zip(self.params.xi, grads.xi, new_params.xi):
            assert np.allclose(nw, w - cfg.eta1 * dw, atol=1e-15)

    def test_freeze_features_moves_only_theta(self):
        cfg = small_config(freeze_features=True).validate()
        new_params, _, _ = train_step(self.params, self.batch, cfg, 1)
        assert new_params.xi is self.params.xi
        assert new_params.phi is self.params.phi
        assert not np.array_equal(new_params.theta, self.params.theta)

    def test_theta_recon_grad_flag_descends_full_loss(self):
        cfg = small_config(theta_recon_grad=True).validate()
        new_params, _, _ = train_step(self.params, self.batch, cfg, 2)
        u = sample_unit_sphere(self.params.d,
                               derived_rng(cfg.seed, trainer.STREAM_PROJECTION, 2))
        fwd = nn.forward(self.params, self.batch)
        y_proj = fwd.y @ u
        g = statistic_gradient(cfg.test, y_proj)
        d_xhat = 2.0 * (fwd.xhat - self.batch) / len(self.batch)
        d_y = cfg.test.loss_sign * cfg.lam * np.outer(g, u)
        grads = nn.backward(self.params, fwd, d_xhat, d_y)
        ref = stiefel.rsgd_step(self.params.theta, grads.theta, cfg.eta2, -1.0)
        assert np.array_equal(new_params.theta, ref)

    def test_momentum_accumulates_velocity(self):
        cfg = small_config(momentum=0.9).validate()
        p1, vel, _ = train_step(self.params, self.batch, cfg, 1)
        p2, vel, _ = train_step(p1, self.batch, cfg, 2, vel)
        assert any(np.linalg.norm(vw) > 0 for vw, _ in vel["xi"])
        plain = small_config(momentum=0.0).validate()
        plain1, _, _ = train_step(self.params, self.batch, plain, 1)
        plain2, _, _ = train_step(plain1, self.batch, plain, 2)
        # momentum folds the first-step gradient into the second step
        assert not blocks_equal(p2, plain2)

    def test_forward_divergence_raises_nonfinite_loss(self):
        base = nn.init_params(5, 10, 3, (8,), (8,), "linear",
                              rng=np.random.default_rng(1))
        xi = [(np.full_like(base.xi[0][0], 1e308), base.xi[0][1])] + list(base.xi[1:])
        bad = nn.ModelParams(xi=xi, theta=base.theta, phi=base.phi,
                             activation="linear")
        cfg = small_config().validate()
        with np.errstate(over="ignore", invalid="ignore"), \
                pytest.raises(NonFiniteLoss) as exc:
            train_step(bad, self.batch * 1e10, cfg, 7)
        assert "iteration 7" in str(exc.value)
        assert "param_norms" in exc.value.diagnostics
        assert exc.value.diagnostics["iteration"] == 7
        assert np.isfinite(exc.value.diagnostics["batch_norm"])

    def test_overflowing_reconstruction_raises_nonfinite_loss(self):
        # forward stays finite; squaring the residual overflows
        phi = list(self.params.phi)
        w, b = phi[-1]
        phi[-1] = (w * 1e160, b)
        bad = nn.ModelParams(xi=self.params.xi, theta=self.params.theta,
                             phi=phi, activation=self.params.activation)
        with np.errstate(over="ignore"), pytest.raises(NonFiniteLoss) as exc:
            train_step(bad, self.batch, small_config().validate(), 3)
        assert "non-finite" in str(exc.value)
        assert exc.value.diagnostics.get("iteration") == 3


class TestTrain:
    def test_zero_iterations_returns_init(self):
        cfg = small_config(max_iters=0)
        x = small_data()
        params, rows = train(x, cfg)
        ref = nn.init_params(5, cfg.arch.feature_dim, cfg.arch.latent_dim,
                             cfg.arch.encoder_hidden, cfg.arch.decoder_hidden,
                             cfg.arch.activation,
                             derived_rng(cfg.seed, trainer.STREAM_INIT))
        assert rows == []
        assert blocks_equal(params, ref)

    def test_deterministic(self):
        x = small_data()
        p1, r1 = train(x, small_config())
        p2, r2 = train(x, small_config())
        assert blocks_equal(p1, p2)
        assert r1 == r2

    def test_matches_manual_loop(self):
        cfg = small_config(max_iters=2 * (96 // 16) + 3)  # crosses an epoch boundary
        x = small_data()
        got, rows = train(x, cfg)

        params = nn.init_params(5, cfg.arch.feature_dim, cfg.arch.latent_dim,
                                cfg.arch.encoder_hidden, cfg.arch.decoder_hidden,
                                cfg.arch.activation,
                                derived_rng(cfg.seed, trainer.STREAM_INIT))
        velocity = None
        bpe = 96 // cfg.batch_size
        ref_rows = []
        for t in range(1, cfg.max_iters + 1):
            epoch = (t - 1) // bpe
            perm = derived_rng(cfg.seed, trainer.STREAM_SHUFFLE, epoch).permutation(96)
            b = (t - 1) % bpe
            batch = x[perm[b * cfg.batch_size:(b + 1) * cfg.batch_size]]
            params, velocity, row = train_step(params, batch, cfg, t, velocity)
            ref_rows.append(row)
        assert blocks_equal(got, params)
        assert rows == ref_rows

    @pytest.mark.parametrize("bad", [
        np.zeros((8, 3)),                    # fewer rows than batch_size
        np.zeros(30),                        # not a matrix
    ])
    def test_rejects_unusable_dataset(self, bad):
        with pytest.raises(ConfigError):
            train(bad, small_config())

    def test_rejects_nonfinite_dataset(self):
        x = small_data()
        x[4, 2] = np.nan
        with pytest.raises(ConfigError):
            train(x, small_config())


class TestCheckpointRoundtrip:
    def run_small(self, tmp_path, momentum=0.0, interval=0, iters=12):
        cfg = small_config(momentum=momentum, checkpoint_interval=interval,
                           max_iters=iters)
        x = small_data()
        path = tmp_path / "model.ckpt"
        params, rows = train(x, cfg, checkpoint_path=str(path))
        return cfg, x, path, params, rows

    def test_roundtrip_exact(self, tmp_path):
        cfg, x, path, params, _ = self.run_small(tmp_path)
        loaded, meta = load_checkpoint(str(path))
        assert blocks_equal(loaded, params)
        assert meta["iteration"] == cfg.max_iters
        assert meta["seed"] == cfg.seed
        assert meta["config_hash"] == config_hash(cfg)
        assert meta["trajectory_hash"] == trajectory_hash(cfg)
        assert meta["test"] == "sw"
        assert meta["has_velocity"] == 0

    def test_velocity_serialized_only_with_momentum(self, tmp_path):
        _, _, path, _, _ = self.run_small(tmp_path, momentum=0.9)
        _, meta, vel = load_checkpoint(str(path), with_velocity=True)
        assert meta["has_velocity"] == 1
        assert vel is not None and len(vel["xi"]) == 2 and len(vel["phi"]) == 2

    def test_resume_bitwise_plain(self, tmp_path):
        cfg = small_config(max_iters=24)
        x = small_data()
        full_params, full_rows = train(x, cfg)

        half = small_config(max_iters=12)
        ck = tmp_path / "half.ckpt"
        train(x, half, checkpoint_path=str(ck))
        resumed, tail_rows = train(x, cfg, resume_from=str(ck))
        assert blocks_equal(resumed, full_params)
        assert tail_rows == full_rows[12:]

    def test_resume_bitwise_with_momentum(self, tmp_path):
        cfg = small_config(max_iters=24, momentum=0.9)
        x = small_data()
        full_params, full_rows = train(x, cfg)

        half = small_config(max_iters=12, momentum=0.9)
        ck = tmp_path / "half.ckpt"
        train(x, half, checkpoint_path=str(ck))
        resumed, tail_rows = train(x, cfg, resume_from=str(ck))
        assert blocks_equal(resumed, full_params)
        assert tail_rows == full_rows[12:]

    def test_periodic_checkpoints_written(self, tmp_path):
        cfg, x, path, params, _ = self.run_small(tmp_path, interval=5, iters=11)
        # final save overwrites the periodic one; iteration must be max_iters
        _, meta = load_checkpoint(str(path))
        assert meta["iteration"] == 11

    def test_resume_rejects_other_config(self, tmp_path):
        _, x, path, _, _ = self.run_small(tmp_path)
        other = small_config(lam=99.0)
        with pytest.raises(ConfigError):
            train(x, other, resume_from=str(path))

    def test_resume_past_original_horizon_allowed(self, tmp_path):
        cfg, x, path, _, _ = self.run_small(tmp_path, iters=12)
        longer = small_config(max_iters=20)
        full_params, _ = train(x, longer)
        resumed, _ = train(x, longer, resume_from=str(path))
        assert blocks_equal(resumed, full_params)


class TestCheckpointFormat:
    def saved(self, tmp_path):
        cfg = small_config(max_iters=4)
        x = small_data()
        path = tmp_path / "fmt.ckpt"
        params, _ = train(x, cfg, checkpoint_path=str(path))
        return path, params, cfg

    def test_byte_layout(self, tmp_path):
        path, params, cfg = self.saved(tmp_path)
        raw = path.read_bytes()
        assert raw[:5] == b"GOFAE"
        version, meta_len = struct.unpack_from("<II", raw, 5)
        assert version == 1
        meta = json.loads(raw[13:13 + meta_len].decode())
        assert meta["iteration"] == 4
        off = 13 + meta_len
        block_count, = struct.unpack_from("<I", raw, off)
        assert block_count == 9  # 2*2 encoder + theta + 2*2 decoder
        seed, t = struct.unpack_from("<QQ", raw, len(raw) - 16)
        assert (seed, t) == (cfg.seed, 4)
        # first block is the first encoder weight matrix
        ndim, = struct.unpack_from("<I", raw, off + 4)
        shape = struct.unpack_from(f"<{ndim}I", raw, off + 8)
        assert ndim == 2 and shape == (5, cfg.arch.encoder_hidden[0])
        first = np.frombuffer(raw, dtype="<f8", count=int(np.prod(shape)),
                              offset=off + 8 + 4 * ndim).reshape(shape)
        assert np.array_equal(first, params.xi[0][0])

    def test_bad_magic(self, tmp_path):
        path, _, _ = self.saved(tmp_path)
        raw = bytearray(path.read_bytes())
        raw[0] = ord(b"X")
        path.write_bytes(bytes(raw))
        with pytest.raises(MalformedFile) as exc:
            load_checkpoint(str(path))
        assert exc.value.byte_offset == 0

    def test_unsupported_version(self, tmp_path):
        path, _, _ = self.saved(tmp_path)
        raw = bytearray(path.read_bytes())
        raw[5:9] = struct.pack("<I", 2)
        path.write_bytes(bytes(raw))
        with pytest.raises(MalformedFile) as exc:
            load_checkpoint(str(path))
        assert exc.value.byte_offset == 5

    def test_truncation_reports_offset(self, tmp_path):
        path, _, _ = self.saved(tmp_path)
        raw = path.read_bytes()
        path.write_bytes(raw[:20])
        with pytest.raises(MalformedFile) as exc:
            load_checkpoint(str(path))
        assert exc.value.byte_offset is not None
        assert "truncated" in str(exc.value)

    def test_trailing_bytes_rejected(self, tmp_path):
        path, _, _ = self.saved(tmp_path)
        raw = path.read_bytes()
        path.write_bytes(raw + b"\x00")
        with pytest.raises(MalformedFile) as exc:
            load_checkpoint(str(path))
        assert "trailing" in str(exc.value)
        assert exc.value.byte_offset == len(raw)

    def test_rng_state_must_match_meta(self, tmp_path):
        path, _, _ = self.saved(tmp_path)
        raw = bytearray(path.read_bytes())
        raw[-8:] = struct.pack("<Q", 999)
        path.write_bytes(bytes(raw))
        with pytest.raises(MalformedFile) as exc:
            load_checkpoint(str(path))
        assert "disagrees" in str(exc.value)
        assert exc.value.byte_offset == len(raw) - 16

    def test_block_count_guard(self, tmp_path):
        # claim velocity in meta while storing only parameter blocks
        path, _, _ = self.saved(tmp_path)
        raw = path.read_bytes()
        meta_len, = struct.unpack_from("<I", raw, 9)
        meta = json.loads(raw[13:13 + meta_len].decode())
        meta["has_velocity"] = 1
        new_meta = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode()
        patched = (raw[:9] + struct.pack("<I", len(new_meta)) + new_meta
                   + raw[13 + meta_len:])
        path.write_bytes(patched)
        with pytest.raises(MalformedFile) as exc:
            load_checkpoint(str(path))
        assert "blocks" in str(exc.value)


class TestMetricsCsv:
    def test_header_and_roundtrip(self, tmp_path):
        rows = [trainer.LogRow(1, 0.5, 0.97, 0.25, 10.0, 1e-3, 1e-2),
                trainer.LogRow(2, 1 / 3, 0.123456789012345678, 0.9, 10.0, 1e-3, 1e-2)]
        path = tmp_path / "metrics.csv"
        write_metrics_csv(str(path), rows, comments=("config abc", "run 1"))
        lines = path.read_text().splitlines()
        assert lines[0] == "# config abc"
        assert lines[1] == "# run 1"
        assert lines[2] == METRICS_HEADER
        assert METRICS_HEADER == "iter,recon_mse,stat,pvalue,lambda,eta1,eta2"
        got = lines[3].split(",")
        assert int(got[0]) == 1
        # repr round-trips doubles exactly
        back = [float(v) for v in lines[4].split(",")[1:]]
        assert back == [1 / 3, 0.123456789012345678, 0.9, 10.0, 1e-3, 1e-2]


@pytest.fixture(scope="module")
def synthetic():
    ds = gen_manifold_gaussian(2, 8, 640, 1e-3, seed=21)
    x, _, _ = standardize(ds.x)
    return x[:512], x[512:]


class TestConvergenceProperties:
    def arch(self):
        return Architecture(feature_dim=16, latent_dim=4, encoder_hidden=(16,),
                            decoder_hidden=(16,))

    def test_smoothed_loss_decreases(self, synthetic):
        xtr, _ = synthetic
        cfg = TrainConfig(lam=0.5, test="sw", batch_size=64, eta1=1e-3,
                          eta2=1e-2, max_iters=800, seed=3, arch=self.arch())
        _, rows = train(xtr, cfg)
        loss = np.array([r.recon_mse - cfg.lam * r.stat for r in rows])
        smooth = np.array([loss[max(0, i - 200):i + 1].mean()
                           for i in range(len(loss))])
        assert smooth[-1] < smooth[49]

    def test_heldout_reconstruction_curve_non_increasing(self, synthetic):
        xtr, xte = synthetic
        curve = []
        for iters in range(100, 801, 100):
            cfg = TrainConfig(lam=0.5, test="sw", batch_size=64, eta1=1e-3,
                              eta2=1e-2, max_iters=iters, seed=3, arch=self.arch())
            params, _ = train(xtr, cfg)
            fwd = nn.forward(params, xte)
            curve.append(float(np.mean(np.sum((xte - fwd.xhat) ** 2, axis=1))))
        sm = np.convolve(curve, np.ones(2) / 2, mode="valid")
        assert np.all(np.diff(sm) <= 1e-6)

    def test_higher_lambda_gives_larger_late_pvalues(self, synthetic):
        xtr, _ = synthetic
        medians = {}
        for lam in (1.0, 1000.0):
            cfg = TrainConfig(lam=lam, test="sw", batch_size=64, eta1=2e-4,
                              eta2=2e-2, max_iters=600, seed=5, arch=self.arch())
            _, rows = train(xtr, cfg)
            medians[lam] = np.median([r.pvalue for r in rows[-200:]])
        assert medians[1000.0] > medians[1.0]

    def test_pure_statistic_run_reaches_high_sw(self, synthetic):
        xtr, _ = synthetic
        cfg = TrainConfig(lam=1.0, test="sw", batch_size=64, eta1=1e-3,
                          eta2=5e-2, max_iters=800, seed=2, recon_weight=0.0,
                          freeze_features=True, arch=self.arch())
        _, rows = train(xtr, cfg)
        assert np.mean([r.stat for r in rows[-100:]]) >= 0.95
