"""Generate the committed Monte Carlo null-distribution quantile tables.

Builds src/gofae/gof/_null_quantiles.npz, which stores null quantile curves
for three composite-normality statistics whose p-values this package reads
from simulation rather than from closed-form approximations:

  ks  -- Lilliefors D (studentized, (m-1)-denominator scale)
  sf  -- Shapiro-Francia W' (squared correlation with Blom scores)
  ep  -- Epps-Pulley T (weight parameter 1, 1/m-denominator scale)

For each statistic and each sample size m in its grid we simulate the null
(i.i.d. standard normals, location/scale estimated per sample), then store
empirical quantiles on a fixed probability grid.  The runtime p-value is an
interpolation of these curves (see gofae.gof._tables).

Simulation budgets: 10^6 per m for ks and sf at every grid point, and for ep
up to m = 128; the O(m^2) ep statistic gets 3*10^5 draws for m in (128, 256]
and 1.5*10^5 for m in (256, 512].  Tail quantiles below ~1/sims are order
statistics of the extreme draws and are correspondingly noisy; interior
quantiles carry Monte Carlo error of a few 1e-4 in CDF units.

Reproducibility: every (statistic, m) pair draws from
numpy SeedSequence(entropy=MASTER_ENTROPY, spawn_key=(table_index, m)),
so any single table row can be regenerated in isolation.

Run from the repository root:  python3 tools/gen_null_tables.py
Takes roughly 30-50 minutes on one core.
"""

import json
import sys
import time
from pathlib import Path

import numpy as np
from scipy import special, stats

MASTER_ENTROPY = 784906352
VERSION = 1

OUT = Path(__file__).resolve().parent.parent / "src" / "gofae" / "gof" / "_null_quantiles.npz"

KS_GRID = [4, 5, 6, 7, 8, 10, 12, 14, 16, 20, 24, 28, 32, 40, 48, 56, 64,
           80, 100, 128, 160, 200, 256, 320, 400, 512, 640, 800, 1024,
           1280, 1600, 2000]
SF_GRID = [m for m in KS_GRID if m >= 5]
EP_GRID = [m for m in KS_GRID if m <= 512]

KS_SIMS = 10 ** 6
SF_SIMS = 10 ** 6


def ep_sims(m):
    if m <= 128:
        return 10 ** 6
    if m <= 256:
        return 3 * 10 ** 5
    return 15 * 10 ** 4


def prob_grid():
    lo = np.geomspace(1e-5, 0.009, 20)
    mid = np.arange(0.01, 0.99 + 1e-12, 0.0025)
    hi = 1.0 - lo[::-1]
    return np.unique(np.concatenate([lo, mid, hi]))


def ks_batch(z):
    """Lilliefors D for each row of z (rows are raw normal draws)."""
    z = np.sort(z, axis=1)
    m = z.shape[1]
    mu = z.mean(axis=1, keepdims=True)
    sd = z.std(axis=1, ddof=1, keepdims=True)
    f = special.ndtr((z - mu) / sd)
    i = np.arange(1, m + 1)
    dplus = (i / m - f).max(axis=1)
    dminus = (f - (i - 1) / m).max(axis=1)
    return np.maximum(dplus, dminus)


def sf_batch(z):
    """Shapiro-Francia W' for each row of z."""
    z = np.sort(z, axis=1)
    m = z.shape[1]
    blom = special.ndtri((np.arange(1, m + 1) - 0.375) / (m + 0.25))
    a = blom / np.linalg.norm(blom)
    num = (z @ a) ** 2
    cen = z - z.mean(axis=1, keepdims=True)
    den = (cen * cen).sum(axis=1)
    return num / den


def ep_batch(z):
    """Epps-Pulley T for each row of z."""
    m = z.shape[1]
    mu = z.mean(axis=1, keepdims=True)
    sd = z.std(axis=1, ddof=0, keepdims=True)
    zs = (z - mu) / sd
    diff = zs[:, :, None] - zs[:, None, :]
    pair = np.exp(-0.5 * diff * diff).sum(axis=(1, 2)) / m
    single = np.exp(-0.25 * zs * zs).sum(axis=1)
    return pair - np.sqrt(2.0) * single + m / np.sqrt(3.0)


def simulate(table_index, m, sims, batch_fn, elem_budget):
    seq = np.random.SeedSequence(entropy=MASTER_ENTROPY, spawn_key=(table_index, m))
    rng = np.random.Generator(np.random.PCG64(seq))
    chunk = max(50, min(200_000, elem_budget))
    out = np.empty(sims)
    done = 0
    while done < sims:
        take = min(chunk, sims - done)
        out[done:done + take] = batch_fn(rng.standard_normal((take, m)))
        done += take
    return out


def build_table(name, table_index, grid, sims_fn, batch_fn, probs, budget_fn):
    rows = np.empty((len(grid), len(probs)))
    counts = np.empty(len(grid), dtype=np.int64)
    for j, m in enumerate(grid):
        t0 = time.time()
        sims = sims_fn(m)
        draws = simulate(table_index, m, sims, batch_fn, budget_fn(m))
        rows[j] = np.quantile(draws, probs)
        counts[j] = sims
        print(f"  {name} m={m:5d} sims={sims} [{time.time() - t0:6.1f}s]", flush=True)
    return rows, counts


def self_check(name, grid, rows, probs, batch_fn, upper_tail):
    """Calibration smoke test at m=64: p-values from the table must be uniform."""
    m = 64
    row = rows[grid.index(m)]
    seq = np.random.SeedSequence(entropy=MASTER_ENTROPY, spawn_key=(9, m))
    rng = np.random.Generator(np.random.PCG64(seq))
    t = batch_fn(rng.standard_normal((20000, m)))
    cdf = np.interp(t, row, probs)
    p = 1.0 - cdf if upper_tail else cdf
    rej = (p < 0.05).mean()
    ks = stats.kstest(p, "uniform")
    print(f"  check {name} m=64: rej@.05={rej:.4f}  KSunif p={ks.pvalue:.4g}", flush=True)
    return ks.pvalue


def main():
    probs = prob_grid()
    print(f"probability grid: {len(probs)} knots", flush=True)

    t0 = time.time()
    print("ks (Lilliefors D):", flush=True)
    ks_q, ks_n = build_table("ks", 0, KS_GRID, lambda m: KS_SIMS, ks_batch,
                             probs, lambda m: 25_000_000 // m)
    print("sf (Shapiro-Francia W'):", flush=True)
    sf_q, sf_n = build_table("sf", 1, SF_GRID, lambda m: SF_SIMS, sf_batch,
                             probs, lambda m: 25_000_000 // m)
    print("ep (Epps-Pulley T):", flush=True)
    ep_q, ep_n = build_table("ep", 2, EP_GRID, ep_sims, ep_batch,
                             probs, lambda m: 12_000_000 // (m * m))

    meta = {
        "version": VERSION,
        "master_entropy": MASTER_ENTROPY,
        "spawn_key": "(table_index, m); table_index: ks=0, sf=1, ep=2",
        "generator": "tools/gen_null_tables.py",
        "ks_sims": KS_SIMS,
        "sf_sims": SF_SIMS,
        "ep_sims": "1e6 for m<=128, 3e5 for m<=256, 1.5e5 for m<=512",
    }
    OUT.parent.mkdir(parents=True, exist_ok=True)
    np.savez_compressed(
        OUT,
        probs=probs,
        ks_m=np.asarray(KS_GRID, dtype=np.int64), ks_q=ks_q, ks_sims=ks_n,
        sf_m=np.asarray(SF_GRID, dtype=np.int64), sf_q=sf_q, sf_sims=sf_n,
        ep_m=np.asarray(EP_GRID, dtype=np.int64), ep_q=ep_q, ep_sims=ep_n,
        meta=json.dumps(meta, sort_keys=True),
    )
    print(f"wrote {OUT} ({OUT.stat().st_size / 1024:.0f} KiB) "
          f"in {(time.time() - t0) / 60:.1f} min", flush=True)

    print("self checks:", flush=True)
    ok = True
    ok &= self_check("ks", KS_GRID, ks_q, probs, ks_batch, upper_tail=True) > 0.01
    ok &= self_check("sf", SF_GRID, sf_q, probs, sf_batch, upper_tail=False) > 0.01
    ok &= self_check("ep", EP_GRID, ep_q, probs, ep_batch, upper_tail=True) > 0.01
    if not ok:
        print("SELF CHECK FAILED", flush=True)
        return 1
    print("all self checks passed", flush=True)
    return 0


if __name__ == "__main__":
    sys.exit(main())
