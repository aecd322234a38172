"""Summary statistics of synthesized channels.

Omnidirectional PDPs are incoherent power sums over MPCs.  Clusters are
identified by generator provenance (``Mpc.cluster_id``), never re-clustered.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .qd_channel import DIRECT, Cir

DEFAULT_FLOOR_DB = -30.0


class StatsError(ValueError):
    pass


@dataclass(frozen=True)
class Pdp:
    bin_width_ns: float
    powers: np.ndarray
    reference_power: float
    delay0_ns: float = 0.0  # absolute delay of the left edge of bin 0

    @property
    def delays_ns(self) -> np.ndarray:
        """Excess delay of each bin (left edge) relative to ``delay0_ns``."""
        return np.arange(len(self.powers)) * self.bin_width_ns

    def powers_db(self, relative_to_peak: bool = False) -> np.ndarray:
        ref = self.powers.max() if relative_to_peak else 1.0
        with np.errstate(divide="ignore"):
            return 10 * np.log10(self.powers / ref)


@dataclass(frozen=True)
class ClusterStats:
    count: int
    relative_powers_db: tuple[float, ...]


def omni_pdp(cir: Cir, bin_width_ns: float = 1.0) -> Pdp:
    if bin_width_ns <= 0:
        raise StatsError("bin_width_ns must be positive")
    if not cir.mpcs:
        raise StatsError("empty CIR")
    a = cir.arrays()
    delays = a["delay_ns"]
    p = np.abs(a["amplitude"]) ** 2
    d0 = float(delays.min())
    idx = np.floor((delays - d0) / bin_width_ns + 1e-9).astype(int)
    powers = np.bincount(idx, weights=p)
    direct = cir.direct
    ref = direct.power if direct is not None else float(p.max())
    return Pdp(bin_width_ns=float(bin_width_ns), powers=powers, reference_power=float(ref), delay0_ns=d0)


def _bins_above(pdp: Pdp, floor_db: float) -> np.ndarray:
    if floor_db >= 0:
        raise StatsError("floor_db must be negative")
    peak = pdp.powers.max()
    if peak <= 0:
        raise StatsError("PDP has no power")
    keep = pdp.powers >= peak * 10 ** (floor_db / 10)
    keep &= pdp.powers > 0
    if not keep.any():
        raise StatsError("no bin above the floor")
    return keep


def rms_delay_spread(pdp: Pdp, floor_db: float = DEFAULT_FLOOR_DB) -> float:
    keep = _bins_above(pdp, floor_db)
    p = pdp.powers[keep]
    t = pdp.delays_ns[keep]
    mean = np.sum(p * t) / p.sum()
    return float(np.sqrt(max(np.sum(p * (t - mean) ** 2) / p.sum(), 0.0)))


def max_excess_delay(pdp: Pdp, floor_db: float = DEFAULT_FLOOR_DB) -> float:
    """Latest bin above the floor, measured from the first (direct) bin."""
    keep = _bins_above(pdp, floor_db)
    return float(pdp.delays_ns[np.nonzero(keep)[0][-1]])


def cluster_powers(cir: Cir) -> dict[int, float]:
    out: dict[int, float] = {}
    for m in cir.mpcs:
        out[m.cluster_id] = out.get(m.cluster_id, 0.0) + m.power
    return out


def cluster_stats(cir: Cir, floor_db: float | None = None) -> ClusterStats:
    """Clusters (LoS included) whose power is at or above the floor relative to LoS."""
    floor_db = cir.floor_db if floor_db is None else floor_db
    powers = cluster_powers(cir)
    direct = cir.direct
    ref = direct.power if direct is not None else max(powers.values())
    rel = []
    for cid in sorted(powers):
        r = 0.0 if (direct is not None and cid == direct.cluster_id) else 10 * np.log10(powers[cid] / ref)
        # tolerance for the clipped-at-floor random clusters
        if r >= floor_db - 1e-9:
            rel.append(float(r))
    return ClusterStats(count=len(rel), relative_powers_db=tuple(rel))


def fraction_above(stats: Iterable[ClusterStats], threshold_db: float = -10.0, include_los: bool = False) -> float:
    """Pooled fraction of clusters stronger than ``threshold_db`` (LoS excluded by default)."""
    n = hit = 0
    for s in stats:
        vals = list(s.relative_powers_db)
        if not include_los and vals:
            vals.remove(0.0)
        n += len(vals)
        hit += sum(v > threshold_db for v in vals)
    return hit / n if n else float("nan")


def averaging_gain_db(m: int) -> float:
    if m < 1:
        raise StatsError("number of averages must be >= 1")
    return float(10 * np.log10(m))


def random_component_power(cir: Cir) -> float:
    return float(sum(m.power for m in cir.mpcs if m.kind == "random_subpath"))


# -- ensemble summaries and emitters -------------------------------------------


def ensemble_summary(cirs: Sequence[Cir], floor_db: float = DEFAULT_FLOOR_DB, bin_width_ns: float = 1.0) -> dict:
    ds, med, counts, stats = [], [], [], []
    for c in cirs:
        pdp = omni_pdp(c, bin_width_ns)
        ds.append(rms_delay_spread(pdp, floor_db))
        med.append(max_excess_delay(pdp, floor_db))
        s = cluster_stats(c)
        stats.append(s)
        counts.append(s.count)

    def describe(x):
        x = np.asarray(x, dtype=float)
        return {
            "mean": float(x.mean()),
            "median": float(np.median(x)),
            "p10": float(np.percentile(x, 10)),
            "p90": float(np.percentile(x, 90)),
            "max": float(x.max()),
        }

    return {
        "n": len(cirs),
        "floor_db": floor_db,
        "rms_delay_spread_ns": describe(ds),
        "max_excess_delay_ns": describe(med),
        "cluster_count": describe(counts),
        "fraction_above_minus10db": fraction_above(stats),
    }


def mean_pdp(cirs: Sequence[Cir], bin_width_ns: float = 1.0) -> Pdp:
    """Average LoS-normalized PDP over an ensemble."""
    pdps = [omni_pdp(c, bin_width_ns) for c in cirs]
    n = max(len(p.powers) for p in pdps)
    acc = np.zeros(n)
    for p in pdps:
        acc[: len(p.powers)] += p.powers / p.reference_power
    return Pdp(bin_width_ns, acc / len(pdps), 1.0)


def pdp_csv(pdp: Pdp) -> str:
    buf = io.StringIO()
    buf.write("delay_ns,power_db\n")
    pdb = pdp.powers_db()
    for t, v in zip(pdp.delays_ns, pdb):
        if np.isfinite(v):
            buf.write(f"{t!r},{v!r}\n")
    return buf.getvalue()


def empirical_cdf(values: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    x = np.sort(np.asarray(values, dtype=float))
    f = np.arange(1, len(x) + 1) / len(x)
    return x, f


def cdf_csv(values: Sequence[float]) -> str:
    x, f = empirical_cdf(values)
    buf = io.StringIO()
    buf.write("x,F\n")
    # one row per distinct value keeps integer-valued CDFs compact
    last = {}
    for xi, fi in zip(x, f):
        last[float(xi)] = float(fi)
    for xi, fi in last.items():
        buf.write(f"{xi!r},{fi!r}\n")
    return buf.getvalue()


def summary_json(summary: dict) -> str:
    return json.dumps(summary, indent=2, sort_keys=True) + "\n"
