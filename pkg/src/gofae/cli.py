"""Command line entry point.

Subcommands: gen-data, train, gof-test, hc-eval, sweep, metrics.  Exit
codes: 0 success, 1 usage error, 2 validation error (bad config, bad
file, bad dimensions), 3 numerical abort.  Errors go to stderr with the
prefix "ERROR <code>:".  Artifacts are written under --out together with
a copy of the resolved configuration; each embeds the resolved config
hash and the seed so any output names the run that produced it.
"""

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, data, hc, metrics
from .exceptions import GofaeError, NonFiniteLoss
from .gof import TestKind, evaluate
from .trainer import (Architecture, TrainConfig, config_hash, load_checkpoint,
                      train, write_metrics_csv)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_NUMERIC = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


class ConfigKeyError(GofaeError):
    pass


def _canonical(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _resolved_hash(resolved):
    return hashlib.sha256(_canonical(resolved).encode()).hexdigest()


def _check_keys(section, given, allowed):
    unknown = set(given) - set(allowed)
    if unknown:
        raise ConfigKeyError(
            f"unknown key(s) in '{section}': {sorted(unknown)}; "
            f"allowed: {sorted(allowed)}")


_MODEL_DEFAULTS = {"feature_dim": 32, "latent_dim": 8,
                   "encoder_hidden": [64, 64], "decoder_hidden": [64, 64],
                   "activation": "tanh"}
_TRAIN_DEFAULTS = {"lam": 10.0, "test": "sw", "batch_size": 64, "eta1": 1e-3,
                   "eta2": 1e-2, "max_iters": 2000, "seed": 0,
                   "schedule": "constant", "momentum": 0.0,
                   "recon_weight": 1.0, "freeze_features": False,
                   "theta_recon_grad": False, "checkpoint_interval": 0}
_GEN_KEYS = {
    "manifold_gaussian": {"intrinsic_dim", "ambient_dim", "n_samples",
                          "noise_sigma", "seed"},
    "gaussian_mixture": {"components", "dim", "n_samples", "seed"},
}


def load_run_config(path):
    """Parse and validate a JSON run config; returns the resolved dict with
    every default filled in. Unknown keys anywhere are rejected."""
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigKeyError(f"config is not valid JSON: {e}") from None
    if not isinstance(raw, dict):
        raise ConfigKeyError("config must be a JSON object")
    _check_keys("config", raw, {"data", "standardize", "model", "train", "sweep"})
    if "data" not in raw:
        raise ConfigKeyError("config needs a 'data' section")

    d = raw["data"]
    if not isinstance(d, dict):
        raise ConfigKeyError("'data' must be an object")
    if "path" in d:
        _check_keys("data", d, {"path", "format"})
        resolved_data = {"path": str(d["path"]),
                         "format": d.get("format", "auto")}
    elif "generator" in d:
        gen = d["generator"]
        if gen not in _GEN_KEYS:
            raise ConfigKeyError(
                f"unknown generator '{gen}'; allowed: {sorted(_GEN_KEYS)}")
        _check_keys("data", d, _GEN_KEYS[gen] | {"generator"})
        missing = _GEN_KEYS[gen] - set(d)
        if missing:
            raise ConfigKeyError(f"data section missing {sorted(missing)}")
        resolved_data = dict(d)
    else:
        raise ConfigKeyError("'data' needs either 'path' or 'generator'")

    model = dict(_MODEL_DEFAULTS)
    _check_keys("model", raw.get("model", {}), _MODEL_DEFAULTS)
    model.update(raw.get("model", {}))
    tr = dict(_TRAIN_DEFAULTS)
    _check_keys("train", raw.get("train", {}), _TRAIN_DEFAULTS)
    tr.update(raw.get("train", {}))

    resolved = {"data": resolved_data,
                "standardize": bool(raw.get("standardize", True)),
                "model": model, "train": tr}
    if "sweep" in raw:
        _check_keys("sweep", raw["sweep"], {"lambdas", "repetitions"})
        if "lambdas" not in raw["sweep"]:
            raise ConfigKeyError("sweep section needs 'lambdas'")
        resolved["sweep"] = {
            "lambdas": [float(l) for l in raw["sweep"]["lambdas"]],
            "repetitions": int(raw["sweep"].get("repetitions", 30))}
    return resolved


def build_train_config(resolved):
    m = resolved["model"]
    arch = Architecture(feature_dim=int(m["feature_dim"]),
                        latent_dim=int(m["latent_dim"]),
                        encoder_hidden=tuple(m["encoder_hidden"]),
                        decoder_hidden=tuple(m["decoder_hidden"]),
                        activation=m["activation"])
    t = resolved["train"]
    cfg = TrainConfig(lam=float(t["lam"]), test=t["test"],
                      batch_size=int(t["batch_size"]), eta1=float(t["eta1"]),
                      eta2=float(t["eta2"]), max_iters=int(t["max_iters"]),
                      seed=int(t["seed"]), schedule=t["schedule"],
                      momentum=float(t["momentum"]),
                      recon_weight=float(t["recon_weight"]),
                      freeze_features=bool(t["freeze_features"]),
                      theta_recon_grad=bool(t["theta_recon_grad"]),
                      checkpoint_interval=int(t["checkpoint_interval"]),
                      arch=arch)
    cfg.validate()
    return cfg


def _load_matrix(path, fmt="auto"):
    if fmt == "auto":
        fmt = "csv" if str(path).endswith(".csv") else "idx"
    if fmt == "csv":
        return data.load_csv(path)
    return data.load_idx(path)


def resolve_dataset(resolved):
    d = resolved["data"]
    if "path" in d:
        ds = _load_matrix(d["path"], d.get("format", "auto"))
    elif d["generator"] == "manifold_gaussian":
        ds = data.gen_manifold_gaussian(d["intrinsic_dim"], d["ambient_dim"],
                                        d["n_samples"], d["noise_sigma"],
                                        d["seed"])
    else:
        ds = data.gen_gaussian_mixture(d["components"], d["dim"],
                                       d["n_samples"], d["seed"])
    x = ds.x
    if resolved["standardize"]:
        x, _, _ = data.standardize(x)
    return x, ds.provenance


def _write_config_copy(out_dir, resolved, run_hash, seed):
    doc = {"config_hash": run_hash, "seed": seed, "config": resolved}
    (out_dir / "config.json").write_text(_canonical(doc) + "\n", encoding="utf-8")


def _out_dir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_gen_data(args):
    if args.generator == "manifold_gaussian":
        ds = data.gen_manifold_gaussian(args.intrinsic_dim, args.ambient_dim,
                                        args.n_samples, args.noise_sigma,
                                        args.seed)
    else:
        ds = data.gen_gaussian_mixture(args.components, args.dim,
                                       args.n_samples, args.seed)
    out = _out_dir(args)
    with open(out / "data.csv", "w", encoding="utf-8") as fh:
        for row in ds.x:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
    resolved = {"command": "gen-data", "provenance": ds.provenance}
    run_hash = _resolved_hash(resolved)
    doc = {"config_hash": run_hash, "seed": int(args.seed), **resolved}
    (out / "provenance.json").write_text(_canonical(doc) + "\n", encoding="utf-8")
    print(f"wrote {out / 'data.csv'} ({ds.x.shape[0]}x{ds.x.shape[1]})")
    return EXIT_OK


def cmd_train(args):
    resolved = load_run_config(args.config)
    cfg = build_train_config(resolved)
    x, provenance = resolve_dataset(resolved)
    run_hash = _resolved_hash(resolved)
    out = _out_dir(args)
    _write_config_copy(out, resolved, run_hash, cfg.seed)

    params, rows = train(x, cfg, checkpoint_path=out / "checkpoint.bin")
    write_metrics_csv(out / "metrics.csv", rows,
                      comments=(f"config_hash={run_hash}", f"seed={cfg.seed}"))
    summary = {"config_hash": run_hash, "train_config_hash": config_hash(cfg),
               "seed": cfg.seed, "iterations": len(rows),
               "final_recon_mse": rows[-1].recon_mse if rows else None,
               "final_stat": rows[-1].stat if rows else None,
               "data_provenance": provenance}
    (out / "run.json").write_text(_canonical(summary) + "\n", encoding="utf-8")
    print(f"trained {len(rows)} iterations, checkpoint at {out / 'checkpoint.bin'}")
    return EXIT_OK


def cmd_gof_test(args):
    kind = TestKind.from_string(args.kind)
    ds = data.load_csv(args.input)
    lines = []
    for row in ds.x:
        r = evaluate(kind, row)
        lines.append(_canonical({"kind": r.kind.value, "stat": r.statistic,
                                 "pvalue": r.pvalue, "m": r.m}))
    print("\n".join(lines))
    if args.out:
        out = _out_dir(args)
        (out / "gof_test.jsonl").write_text("\n".join(lines) + "\n",
                                            encoding="utf-8")
    return EXIT_OK


def _load_model(path):
    params, meta = load_checkpoint(path)
    return params, meta


def cmd_hc_eval(args):
    params, meta = _load_model(args.checkpoint)
    ds = _load_matrix(args.dataset)
    x = ds.x
    if args.standardize:
        x, _, _ = data.standardize(x)
    reports = []
    for i in range(args.reps):
        seed = hc.repetition_seed(args.seed, i)
        rep = hc.evaluate_hc(params, x, args.test, args.m, seed)
        reports.append({"seed": seed, "ks_unif_stat": rep.ks_unif.statistic,
                        "ks_unif_pvalue": rep.ks_unif.pvalue,
                        "pvalues": list(rep.pvalues)})
    doc = {"config_hash": meta["config_hash"], "seed": int(args.seed),
           "test": args.test, "m": args.m, "reps": args.reps,
           "mean_ks_unif": float(np.mean([r["ks_unif_pvalue"] for r in reports])),
           "data_sha256": ds.provenance.get("sha256"),
           "reports": reports}
    text = _canonical(doc)
    print(text)
    if args.out:
        out = _out_dir(args)
        (out / "hc_eval.json").write_text(text + "\n", encoding="utf-8")
    return EXIT_OK


SWEEP_HEADER = "lambda,mean_ksunif,std_ksunif,mi_lb,cond,recon_mse"


def cmd_sweep(args):
    resolved = load_run_config(args.config)
    if args.lambdas:
        lambdas = [float(l) for l in args.lambdas.split(",")]
        reps = args.reps
    elif "sweep" in resolved:
        lambdas = resolved["sweep"]["lambdas"]
        reps = resolved["sweep"]["repetitions"] if args.reps is None else args.reps
    else:
        raise UsageError("pass --lambdas or put a 'sweep' section in the config")
    if reps is None:
        reps = 30
    cfg = build_train_config(resolved)
    x, _ = resolve_dataset(resolved)
    run_hash = _resolved_hash(resolved)

    rows = hc.sweep(cfg, x, lambdas, repetitions=reps, n_jobs=args.jobs)
    out_lines = [f"# config_hash={run_hash}", f"# seed={cfg.seed}", SWEEP_HEADER]
    for r in rows:
        out_lines.append(f"{r.lam!r},{r.mean_ks_unif!r},{r.std_ks_unif!r},"
                         f"{r.mi_lb!r},{r.cond!r},{r.recon_mse!r}")
    print("\n".join(out_lines))

    choice = hc.select_lambda(rows, threshold=args.threshold)
    if isinstance(choice, hc.NoFeasibleLambda):
        verdict = {"selected_lambda": None,
                   "best_lambda": choice.best_row.lam,
                   "best_mean_ks_unif": choice.best_row.mean_ks_unif,
                   "threshold": choice.threshold}
    else:
        verdict = {"selected_lambda": choice, "threshold": args.threshold}
    print(_canonical(verdict))

    if args.out:
        out = _out_dir(args)
        _write_config_copy(out, resolved, run_hash, cfg.seed)
        (out / "sweep.csv").write_text("\n".join(out_lines) + "\n",
                                       encoding="utf-8")
        (out / "selection.json").write_text(
            _canonical({"config_hash": run_hash, "seed": cfg.seed, **verdict}) + "\n",
            encoding="utf-8")
    return EXIT_OK


def cmd_metrics(args):
    params, meta = _load_model(args.checkpoint)
    ds = _load_matrix(args.dataset)
    x = ds.x
    if args.standardize:
        x, _, _ = data.standardize(x)
    mom = metrics.latent_moments(params, x)
    spec = metrics.cov_spectrum(mom)
    doc = {"config_hash": meta["config_hash"], "seed": int(args.seed),
           "mse": metrics.mse(params, x),
           "mi_lb": metrics.mi_lower_bound(params, mom,
                                           sample_count=args.mi_samples,
                                           seed=args.seed),
           "cond": spec.condition_number,
           "degenerate": spec.degenerate,
           "singular_values": [float(s) for s in spec.singular_values],
           "data_sha256": ds.provenance.get("sha256")}
    text = _canonical(doc)
    print(text)
    if args.out:
        out = _out_dir(args)
        (out / "metrics.json").write_text(text + "\n", encoding="utf-8")
    return EXIT_OK


def build_parser():
    p = _Parser(prog="gofae",
                description="Autoencoder with goodness-of-fit latent "
                            "regularization: train, sweep, and evaluate.")
    p.add_argument("--version", action="version", version=f"gofae {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="generate a synthetic dataset",
                       parents=[], add_help=True)
    g.add_argument("--generator", required=True,
                   choices=("manifold_gaussian", "gaussian_mixture"))
    g.add_argument("--intrinsic-dim", type=int, default=2, dest="intrinsic_dim")
    g.add_argument("--ambient-dim", type=int, default=8, dest="ambient_dim")
    g.add_argument("--components", type=int, default=4)
    g.add_argument("--dim", type=int, default=8)
    g.add_argument("--n-samples", type=int, default=4096, dest="n_samples")
    g.add_argument("--noise-sigma", type=float, default=1e-3, dest="noise_sigma")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen_data)

    t = sub.add_parser("train", help="train a model from a JSON config")
    t.add_argument("--config", required=True)
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_train)

    gt = sub.add_parser("gof-test", help="run one normality test per CSV row")
    gt.add_argument("--kind", required=True,
                    choices=("sw", "sf", "cvm", "ks", "ep"))
    gt.add_argument("--input", required=True)
    gt.add_argument("--out", default=None)
    gt.set_defaults(func=cmd_gof_test)

    h = sub.add_parser("hc-eval", help="score p-value uniformity of a "
                                       "trained encoder")
    h.add_argument("--checkpoint", required=True)
    h.add_argument("--dataset", required=True)
    h.add_argument("--test", default="sw",
                   choices=("sw", "sf", "cvm", "ks", "ep"))
    h.add_argument("--m", type=int, default=64)
    h.add_argument("--reps", type=int, default=30)
    h.add_argument("--seed", type=int, default=0)
    h.add_argument("--standardize", action=argparse.BooleanOptionalAction,
                   default=True)
    h.add_argument("--out", default=None)
    h.set_defaults(func=cmd_hc_eval)

    s = sub.add_parser("sweep", help="train across regularization weights "
                                     "and select one")
    s.add_argument("--config", required=True)
    s.add_argument("--lambdas", default=None,
                   help="comma-separated list, overrides the config")
    s.add_argument("--reps", type=int, default=None)
    s.add_argument("--threshold", type=float, default=hc.DEFAULT_THRESHOLD)
    s.add_argument("--jobs", type=int, default=None,
                   help="parallel workers (default GOFAE_THREADS or 1)")
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_sweep)

    mt = sub.add_parser("metrics", help="reconstruction and latent metrics "
                                        "of a checkpoint")
    mt.add_argument("--checkpoint", required=True)
    mt.add_argument("--dataset", required=True)
    mt.add_argument("--mi-samples", type=int, default=10_000, dest="mi_samples")
    mt.add_argument("--seed", type=int, default=0)
    mt.add_argument("--standardize", action=argparse.BooleanOptionalAction,
                    default=True)
    mt.add_argument("--out", default=None)
    mt.set_defaults(func=cmd_metrics)
    return p


def dispatch(argv):
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        print(f"ERROR {EXIT_USAGE}: {e}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as e:  # --help / --version
        return int(e.code or 0)
    try:
        return args.func(args)
    except UsageError as e:
        print(f"ERROR {EXIT_USAGE}: {e}", file=sys.stderr)
        return EXIT_USAGE
    except NonFiniteLoss as e:
        print(f"ERROR {EXIT_NUMERIC}: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except (GofaeError, ValueError, FileNotFoundError) as e:
        print(f"ERROR {EXIT_VALIDATION}: {e}", file=sys.stderr)
        return EXIT_VALIDATION


def main():
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
