"""Generate committed reference fixtures for the univariate test statistics.

Every fixture value is produced by a route that does not share code with the
package implementation:

  statistic routes
    sw   scipy.stats.shapiro
    sf   squared Pearson correlation between the sorted sample and Blom scores
    cvm  scipy.stats.cramervonmises on the studentized sample, then the
         finite-sample factor (1 + 0.5/m)
    ks   scipy.stats.kstest on the studentized sample
    ep   numerical quadrature of m * int |ecf(t) - exp(-t^2/2)|^2 phi(t) dt,
         which equals the double-sum form exactly

  p-value routes
    sw   scipy.stats.shapiro
    cvm  a second transcription of the published piecewise formulas (this
         checks transcription, not distribution theory)
    sf, ks, ep
         fresh Monte Carlo tail counts under the null at the same m, using
         an entropy constant unrelated to the one behind the shipped
         quantile tables

Output: tests/fixtures/gof_reference.json.  Runtime is dominated by the
Monte Carlo tail counts; expect a few minutes.
"""

import json
import sys
import time
from pathlib import Path

import numpy as np
from scipy import stats
from scipy.integrate import quad

OUT = Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "gof_reference.json"

SAMPLE_ENTROPY = 20260819
MC_ENTROPY = 1618033988  # distinct from the quantile-table entropy
MC_SIMS = 250_000

SIZES = {
    "sw": (16, 64, 256),
    "sf": (16, 64, 256),
    "cvm": (16, 64, 256),
    "ks": (16, 64, 256),
    "ep": (16, 64, 128),
}


def blom(m):
    return stats.norm.ppf((np.arange(1, m + 1) - 0.375) / (m + 0.25))


def draw_samples(m, rng):
    return {
        "normal": rng.standard_normal(m),
        "affine_normal": 3.0 + 2.5 * rng.standard_normal(m),
        "t6": rng.standard_t(6, m),
        "uniform": rng.uniform(0.0, 1.0, m),
        "skewed": rng.chisquare(4, m),
    }


def sw_oracle(x):
    r = stats.shapiro(x)
    return float(r.statistic), float(r.pvalue)


def sf_statistic_oracle(x):
    xs = np.sort(x)
    c = np.corrcoef(xs, blom(len(x)))[0, 1]
    return float(c * c)


def cvm_statistic_oracle(x):
    m = len(x)
    z = (x - x.mean()) / x.std(ddof=1)
    w2 = stats.cramervonmises(z, "norm").statistic
    return float(w2 * (1.0 + 0.5 / m))


def cvm_pvalue_oracle(t):
    # second transcription of the modified-statistic tail formulas
    if t < 0.0275:
        p = 1.0 - np.exp(-13.953 + 775.5 * t - 12542.61 * t * t)
    elif t < 0.051:
        p = 1.0 - np.exp(-5.903 + 179.546 * t - 1515.29 * t * t)
    elif t < 0.092:
        p = np.exp(0.886 - 31.62 * t + 10.897 * t * t)
    elif t < 1.1:
        p = np.exp(1.111 - 34.242 * t + 12.832 * t * t)
    else:
        p = 7.37e-10
    return float(min(max(p, 0.0), 1.0))


def ks_statistic_oracle(x):
    z = (x - x.mean()) / x.std(ddof=1)
    return float(stats.kstest(z, "norm").statistic)


def ep_statistic_oracle(x):
    m = len(x)
    z = (x - x.mean()) / x.std(ddof=0)

    def integrand(t):
        c = np.cos(t * z).mean()
        s = np.sin(t * z).mean()
        g = np.exp(-0.5 * t * t)
        return ((c - g) ** 2 + s * s) * np.exp(-0.5 * t * t) / np.sqrt(2.0 * np.pi)

    val, _ = quad(integrand, 0.0, 12.0, limit=400)
    return float(m * 2.0 * val)


def null_stats_ks(m, n, rng):
    out = np.empty(n)
    done = 0
    grid = np.arange(1, m + 1)
    lo_c = (grid - 1) / m
    hi_c = grid / m
    while done < n:
        b = min(max(2_000_000 // m, 100), n - done)
        x = rng.standard_normal((b, m))
        z = (x - x.mean(1, keepdims=True)) / x.std(1, ddof=1, keepdims=True)
        z.sort(1)
        f = stats.norm.cdf(z)
        out[done:done + b] = np.maximum((f - lo_c).max(1), (hi_c - f).max(1))
        done += b
    return out


def null_stats_sf(m, n, rng):
    a = blom(m)
    a = a / np.linalg.norm(a)
    out = np.empty(n)
    done = 0
    while done < n:
        b = min(max(2_000_000 // m, 100), n - done)
        x = rng.standard_normal((b, m))
        x.sort(1)
        num = (x @ a) ** 2
        den = ((x - x.mean(1, keepdims=True)) ** 2).sum(1)
        out[done:done + b] = num / den
        done += b
    return out


def null_stats_ep(m, n, rng):
    out = np.empty(n)
    done = 0
    while done < n:
        b = min(max(8_000_000 // (m * m), 20), n - done)
        x = rng.standard_normal((b, m))
        z = (x - x.mean(1, keepdims=True)) / x.std(1, keepdims=True)
        d = z[:, :, None] - z[:, None, :]
        t1 = np.exp(-0.5 * d * d).sum((1, 2)) / m
        t2 = np.sqrt(2.0) * np.exp(-0.25 * z * z).sum(1)
        out[done:done + b] = t1 - t2 + m / np.sqrt(3.0)
        done += b
    return out


NULL_KERNELS = {"sf": null_stats_sf, "ks": null_stats_ks, "ep": null_stats_ep}
# sf rejects small, ks/ep reject large
TAIL = {"sf": "left", "ks": "right", "ep": "right"}


def main():
    rng = np.random.default_rng(np.random.SeedSequence(SAMPLE_ENTROPY))
    cases = []

    null_cache = {}
    for kind in ("sf", "ks", "ep"):
        for m in SIZES[kind]:
            t0 = time.time()
            mc_rng = np.random.default_rng(
                np.random.SeedSequence(MC_ENTROPY, spawn_key=(hash(kind) % 1000, m)))
            null_cache[(kind, m)] = NULL_KERNELS[kind](m, MC_SIMS, mc_rng)
            print(f"null stats {kind} m={m}: {time.time() - t0:.1f}s", flush=True)

    for kind, sizes in SIZES.items():
        for m in sizes:
            for label, x in draw_samples(m, rng).items():
                x = np.asarray(x, dtype=float)
                if kind == "sw":
                    stat, p = sw_oracle(x)
                elif kind == "sf":
                    stat = sf_statistic_oracle(x)
                    p = float((null_cache[(kind, m)] <= stat).mean())
                elif kind == "cvm":
                    stat = cvm_statistic_oracle(x)
                    p = cvm_pvalue_oracle(stat)
                elif kind == "ks":
                    stat = ks_statistic_oracle(x)
                    p = float((null_cache[(kind, m)] >= stat).mean())
                else:
                    stat = ep_statistic_oracle(x)
                    p = float((null_cache[(kind, m)] >= stat).mean())
                cases.append({
                    "kind": kind,
                    "dist": label,
                    "m": m,
                    "sample": [repr(float(v)) for v in x],
                    "statistic": stat,
                    "pvalue": p,
                })
        print(f"cases for {kind} done", flush=True)

    meta = {
        "sample_entropy": SAMPLE_ENTROPY,
        "mc_entropy": MC_ENTROPY,
        "mc_sims": MC_SIMS,
        "stat_routes": {
            "sw": "scipy.stats.shapiro",
            "sf": "corrcoef(sorted sample, Blom scores)^2",
            "cvm": "scipy.stats.cramervonmises on studentized sample, times (1+0.5/m)",
            "ks": "scipy.stats.kstest on studentized sample",
            "ep": "quadrature of the weighted ecf distance",
        },
        "p_routes": {
            "sw": "scipy.stats.shapiro",
            "sf": "Monte Carlo left-tail count, fresh entropy",
            "cvm": "second transcription of the piecewise tail formulas",
            "ks": "Monte Carlo right-tail count, fresh entropy",
            "ep": "Monte Carlo right-tail count, fresh entropy",
        },
    }
    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps({"meta": meta, "cases": cases}, indent=1))
    print(f"wrote {OUT} ({OUT.stat().st_size} bytes, {len(cases)} cases)")


if __name__ == "__main__":
    sys.exit(main())
