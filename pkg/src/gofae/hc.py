"""Mini-batch p-value uniformity scoring and regularization-weight selection.

A trained encoder is scored by partitioning a dataset into disjoint
mini-batches, projecting each encoded batch onto a fresh random direction,
and testing the resulting p-value set for uniformity.  Sweeping the
regularization weight and picking the smallest value whose mean uniformity
p-value clears a threshold gives a principled way to set it.
"""

import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import nn
from .exceptions import EmptyInput, InsufficientSamples
from .gof import TestKind, TestResult, evaluate, ks_uniformity, sample_unit_sphere
from .metrics import cov_spectrum, latent_moments, mi_lower_bound, mse
from .trainer import derived_rng, train

# rng streams 0..2 belong to training; scoring draws from its own
STREAM_SCORE = 3
STREAM_REP_SEEDS = 4

DEFAULT_THRESHOLD = 0.05


class SweepShapeWarning(UserWarning):
    """Mean uniformity p-values across the sweep are not single-peaked."""


@dataclass(frozen=True)
class HCReport:
    """Uniformity scorecard for one pass over a dataset."""

    pvalues: tuple
    ks_unif: TestResult
    test: TestKind
    m: int
    seed: int


@dataclass(frozen=True)
class SweepRow:
    lam: float
    mean_ks_unif: float
    std_ks_unif: float
    mi_lb: float
    cond: float
    recon_mse: float
    # per-repetition uniformity p-values the summary statistics come from
    ks_unif_pvalues: tuple


@dataclass(frozen=True)
class NoFeasibleLambda:
    """Returned when no sweep row clears the threshold.

    Carries the closest miss so callers can report how far the sweep was
    from feasibility.
    """

    best_row: SweepRow
    threshold: float


def evaluate_hc(params, dataset, test, m, seed):
    """Score p-value uniformity over floor(N/m) disjoint mini-batches.

    The dataset is shuffled once, split into disjoint batches of m rows
    (remainder dropped), and each batch is encoded and projected onto a
    fresh unit vector before testing.  Identical seeds give identical
    reports.
    """
    x = np.asarray(dataset, dtype=float)
    if x.ndim != 2:
        raise ValueError(f"dataset must be 2-d, got shape {x.shape}")
    n_rows = x.shape[0]
    if n_rows < 2 * m:
        raise InsufficientSamples(
            f"need at least {2 * m} rows for batches of {m}, got {n_rows}")
    if not isinstance(test, TestKind):
        test = TestKind.from_string(test)

    rng = derived_rng(seed, STREAM_SCORE, 0)
    perm = rng.permutation(n_rows)
    d = params.theta.shape[1]
    _, y_all = nn.encode(params, x[perm])

    pvalues = []
    for b in range(n_rows // m):
        y = y_all[b * m:(b + 1) * m]
        u = sample_unit_sphere(d, rng)
        pvalues.append(evaluate(test, y @ u).pvalue)
    pvalues = tuple(pvalues)
    return HCReport(pvalues=pvalues, ks_unif=ks_uniformity(pvalues),
                    test=test, m=m, seed=seed)


def repetition_seed(base_seed, index):
    """Derived seed for repetition `index`, stable across runs."""
    return int(derived_rng(base_seed, STREAM_REP_SEEDS, index).integers(0, 2 ** 63))


def _sweep_point(args):
    base_config, lam, repetitions, dataset = args
    cfg = replace(base_config, lam=float(lam))
    params, _ = train(dataset, cfg)

    ks_ps = []
    for r in range(repetitions):
        rep = evaluate_hc(params, dataset, cfg.test, cfg.batch_size,
                          repetition_seed(cfg.seed, r))
        ks_ps.append(rep.ks_unif.pvalue)
    ks_ps = np.asarray(ks_ps)

    moments = latent_moments(params, dataset)
    mi = mi_lower_bound(params, moments, seed=repetition_seed(cfg.seed, repetitions))
    spec = cov_spectrum(moments)
    return SweepRow(
        lam=float(lam),
        mean_ks_unif=float(ks_ps.mean()),
        std_ks_unif=float(ks_ps.std(ddof=1)),
        mi_lb=float(mi),
        cond=float(spec.condition_number),
        recon_mse=float(mse(params, dataset)),
        ks_unif_pvalues=tuple(float(p) for p in ks_ps),
    )


def _smoothed_is_unimodal(values):
    v = np.asarray(values, dtype=float)
    if len(v) < 3:
        return True
    sm = v.copy()
    for i in range(1, len(v) - 1):
        sm[i] = np.median(v[i - 1:i + 2])
    diffs = np.sign(np.diff(sm))
    diffs = diffs[diffs != 0]
    # at most one descent onset after the rise
    rises_after_fall = any(a < 0 < b for a, b in zip(diffs[:-1], diffs[1:]))
    return not rises_after_fall


def sweep(base_config, dataset, lambdas, repetitions=30, n_jobs=None):
    """Train one model per regularization weight and score each.

    Rows come back in the order of `lambdas`.  `n_jobs` > 1 trains the
    points in separate processes (results are merged in input order, so
    parallelism never changes the output).  Default comes from the
    GOFAE_THREADS environment variable, else 1.
    """
    if repetitions < 2:
        raise ValueError(f"repetitions must be at least 2, got {repetitions}")
    lambdas = [float(l) for l in lambdas]
    if not lambdas:
        raise EmptyInput("no regularization weights to sweep")
    if n_jobs is None:
        n_jobs = int(os.environ.get("GOFAE_THREADS", "1"))

    x = np.asarray(dataset, dtype=float)
    jobs = [(base_config, lam, repetitions, x) for lam in lambdas]
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            rows = list(pool.map(_sweep_point, jobs))
    else:
        rows = [_sweep_point(j) for j in jobs]

    if not _smoothed_is_unimodal([r.mean_ks_unif for r in rows]):
        warnings.warn(
            "mean uniformity p-values are not single-peaked across the sweep",
            SweepShapeWarning, stacklevel=2)
    return rows


def select_lambda(rows, threshold=DEFAULT_THRESHOLD):
    """Smallest weight whose mean uniformity p-value exceeds the threshold.

    Rows must be sorted ascending by weight.  When nothing qualifies,
    returns a NoFeasibleLambda signal carrying the best row instead of
    raising.
    """
    rows = list(rows)
    if not rows:
        raise EmptyInput("select_lambda needs at least one sweep row")
    lams = [r.lam for r in rows]
    if any(a >= b for a, b in zip(lams[:-1], lams[1:])):
        raise ValueError("sweep rows must be sorted ascending by lam")
    for row in rows:
        if row.mean_ks_unif > threshold:
            return row.lam
    best = max(rows, key=lambda r: r.mean_ks_unif)
    return NoFeasibleLambda(best_row=best, threshold=threshold)
