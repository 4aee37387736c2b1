"""Simulated null-distribution tables for SF, Lilliefors, and EP p-values.

The committed file _null_quantiles.npz (built by tools/gen_null_tables.py)
stores, per statistic, a grid of sample sizes and the null quantile curve of
the statistic at each size on a shared probability grid.

null_cdf() inverts a quantile curve by linear interpolation to get
P(T <= t | H0, m).  Off-grid sample sizes blend the CDFs of the two
bracketing grid sizes linearly in 1/sqrt(m).  Beyond the outermost knots
(CDF below 1e-5 or above 1 - 1e-5) the tail is extended log-linearly from
the last two knots and floored at 1e-12; extreme tails are approximate.
"""

import json
from functools import lru_cache
from importlib import resources

import numpy as np

from ..exceptions import UnsupportedSize

_FILE = "_null_quantiles.npz"


@lru_cache(maxsize=1)
def _load():
    ref = resources.files(__package__).joinpath(_FILE)
    with ref.open("rb") as fh:
        npz = np.load(fh)
        tables = {}
        for tag in ("ks", "sf", "ep"):
            tables[tag] = {
                "m": npz[f"{tag}_m"],
                "q": npz[f"{tag}_q"],
                "sims": npz[f"{tag}_sims"],
            }
        tables["probs"] = npz["probs"]
        tables["meta"] = json.loads(str(npz["meta"]))
    return tables


def supported_range(tag):
    t = _load()[tag]
    return int(t["m"][0]), int(t["m"][-1])


def _cdf_one(quantiles, probs, t):
    """P(T <= t) from one quantile curve, with log-linear tail extension."""
    q0, q1 = quantiles[0], quantiles[-1]
    if q0 < t < q1:
        return float(np.interp(t, quantiles, probs))
    if t <= q0:
        # extend log(cdf) linearly in t through the two lowest knots
        qa, qb = quantiles[0], quantiles[1]
        pa, pb = probs[0], probs[1]
        if qb <= qa:
            return float(pa)
        slope = (np.log(pb) - np.log(pa)) / (qb - qa)
        return float(max(np.exp(np.log(pa) + slope * (t - qa)), 1e-12))
    qa, qb = quantiles[-2], quantiles[-1]
    pa, pb = 1.0 - probs[-2], 1.0 - probs[-1]
    if qb <= qa:
        return float(1.0 - pb)
    slope = (np.log(pb) - np.log(pa)) / (qb - qa)
    return float(1.0 - max(np.exp(np.log(pa) + slope * (t - qa)), 1e-12))


def null_cdf(tag, t, m):
    """P(T <= t) under the null for statistic `tag` at sample size m."""
    table = _load()[tag]
    ms = table["m"]
    lo, hi = int(ms[0]), int(ms[-1])
    if not lo <= m <= hi:
        raise UnsupportedSize(
            f"{tag} p-values are tabulated for {lo} <= m <= {hi}, got m={m}")
    probs = _load()["probs"]
    j = int(np.searchsorted(ms, m))
    if ms[j] == m:
        return _cdf_one(table["q"][j], probs, t)
    c_lo = _cdf_one(table["q"][j - 1], probs, t)
    c_hi = _cdf_one(table["q"][j], probs, t)
    # blend in 1/sqrt(m): statistic scales drift at that rate
    x, x_lo, x_hi = m ** -0.5, float(ms[j - 1]) ** -0.5, float(ms[j]) ** -0.5
    w = (x - x_lo) / (x_hi - x_lo)
    return (1.0 - w) * c_lo + w * c_hi
