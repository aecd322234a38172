"""Multi-beam MIMO channel matrices and capacity, with optional PRS.

Beams have a Gaussian main lobe and no sidelobes.  The amplitude pattern is
``exp(-ln2/2 * (2*dphi/hpbw)**2)`` so a path half a beamwidth off boresight is
received 3 dB down in power.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from .qd_channel import SPECULAR, Cir, fspl_amplitude

DEFAULT_HPBW_DEG = 8.7
DEFAULT_PEAK_GAIN_DBI = 26.0


class MimoError(ValueError):
    pass


@dataclass(frozen=True)
class BeamSet:
    pointing_rad: tuple[float, ...]
    hpbw_deg: float = DEFAULT_HPBW_DEG
    peak_gain_dbi: float = DEFAULT_PEAK_GAIN_DBI

    def __post_init__(self):
        if self.hpbw_deg <= 0:
            raise MimoError("hpbw_deg must be positive")
        if len(self.pointing_rad) == 0:
            raise MimoError("empty beam set")

    @property
    def count(self) -> int:
        return len(self.pointing_rad)


@dataclass(frozen=True)
class MimoChannel:
    entries: np.ndarray  # rx_beams x tx_beams
    reference_amplitude: float  # |gamma_direct|; H is divided by it

    @property
    def shape(self):
        return self.entries.shape


def _wrap(a):
    return (np.asarray(a) + np.pi) % (2 * np.pi) - np.pi


def beam_amplitude(dphi, hpbw_deg: float) -> np.ndarray:
    hp = np.deg2rad(hpbw_deg)
    return np.exp(-0.5 * np.log(2.0) * (2.0 * _wrap(dphi) / hp) ** 2)


def build_channel_matrix(cir: Cir, tx_beams: BeamSet, rx_beams: BeamSet) -> MimoChannel:
    """Narrowband beam-domain channel normalized to the direct-path amplitude."""
    if not cir.mpcs:
        raise MimoError("empty CIR")
    a = cir.arrays()
    gt = beam_amplitude(a["aod_rad"][None, :] - np.asarray(tx_beams.pointing_rad)[:, None], tx_beams.hpbw_deg)
    gr = beam_amplitude(a["aoa_rad"][None, :] - np.asarray(rx_beams.pointing_rad)[:, None], rx_beams.hpbw_deg)
    direct = cir.direct
    ref = abs(direct.amplitude) if direct is not None else float(np.abs(a["amplitude"]).max())
    h = (gr * (a["amplitude"] / ref)[None, :]) @ gt.T
    return MimoChannel(h, float(ref))


def _waterfill(gains: np.ndarray, total: float) -> np.ndarray:
    g = np.sort(gains[gains > 0])[::-1]
    if g.size == 0:
        return np.zeros_like(gains)
    for k in range(g.size, 0, -1):
        mu = (total + np.sum(1.0 / g[:k])) / k
        if mu - 1.0 / g[k - 1] >= 0:
            break
    return np.where(gains > 0, np.maximum(mu - 1.0 / np.where(gains > 0, gains, 1.0), 0.0), 0.0)


def capacity_bps_hz(h, snr_db: float, waterfilling: bool = False) -> float:
    """log2 det(I + rho/Nt H H^H); optional water-filling over eigenmodes."""
    hm = h.entries if isinstance(h, MimoChannel) else np.asarray(h, dtype=complex)
    if not np.all(np.isfinite(hm)):
        raise MimoError("non-finite channel matrix")
    if not np.isfinite(snr_db):
        raise MimoError("non-finite SNR")
    rho = 10 ** (snr_db / 10)
    nt = hm.shape[1]
    eig = np.clip(np.linalg.eigvalsh(hm @ hm.conj().T), 0.0, None)
    if waterfilling:
        g = rho / nt * eig
        p = _waterfill(g, float(nt))
        return float(np.sum(np.log2(1.0 + p * g)))
    return float(np.sum(np.log2(1.0 + rho / nt * eig)))


# -- beam pointing -------------------------------------------------------------


def _circular_mean(angles, weights):
    return float(np.angle(np.sum(weights * np.exp(1j * angles))))


def cluster_directions(cir: Cir) -> list[tuple[int, float, float, float]]:
    """(cluster_id, power, aod, aoa) per cluster, strongest first."""
    a = cir.arrays()
    p = np.abs(a["amplitude"]) ** 2
    out = []
    for cid in np.unique(a["cluster_id"]):
        sel = a["cluster_id"] == cid
        w = p[sel]
        out.append((int(cid), float(w.sum()), _circular_mean(a["aod_rad"][sel], w), _circular_mean(a["aoa_rad"][sel], w)))
    out.sort(key=lambda t: (-t[1], t[0]))
    return out


def _clear_direction(taken: Sequence[float], avoid: Sequence[float]) -> float:
    grid = np.deg2rad(np.arange(-180.0, 180.0, 0.5))
    ref = np.asarray(list(taken) + list(avoid))
    if ref.size == 0:
        return 0.0
    d = np.min(np.abs(_wrap(grid[:, None] - ref[None, :])), axis=1)
    return float(grid[int(np.argmax(d))])


def select_beams(cir: Cir, n: int, hpbw_deg: float = DEFAULT_HPBW_DEG) -> tuple[BeamSet, BeamSet]:
    """Greedy beam assignment to the strongest angularly distinct clusters.

    A cluster is accepted when its departure and arrival directions are both at
    least one beamwidth from every accepted cluster.  Beams left over point at
    the direction farthest from all paths, so they collect no power.
    """
    sep = np.deg2rad(hpbw_deg)
    tx, rx = [], []
    for _, _, aod, aoa in cluster_directions(cir):
        if len(tx) == n:
            break
        if all(abs(_wrap(aod - t)) >= sep for t in tx) and all(abs(_wrap(aoa - r)) >= sep for r in rx):
            tx.append(aod)
            rx.append(aoa)
    a = cir.arrays()
    while len(tx) < n:
        tx.append(_clear_direction(tx, a["aod_rad"]))
        rx.append(_clear_direction(rx, a["aoa_rad"]))
    return BeamSet(tuple(tx), hpbw_deg), BeamSet(tuple(rx), hpbw_deg)


def beam_capacity(cir: Cir, n: int = 4, snr_db: float = 20.0, hpbw_deg: float = DEFAULT_HPBW_DEG, waterfilling=False) -> float:
    tb, rb = select_beams(cir, n, hpbw_deg)
    return capacity_bps_hz(build_channel_matrix(cir, tb, rb), snr_db, waterfilling)


# -- passive reflecting surfaces ------------------------------------------------


def apply_prs(cir: Cir, targets="all") -> Cir:
    """Remove the interaction loss of the selected clusters.

    ``targets`` is ``"all"`` or an iterable of cluster ids.  A specular path is
    raised to the free-space amplitude of its unfolded length; a random
    cluster is scaled so its total power equals free-space power over its
    power-weighted mean path length.  Phases are kept and nothing is ever
    attenuated.
    """
    direct = cir.direct
    direct_id = direct.cluster_id if direct is not None else None
    ids = {m.cluster_id for m in cir.mpcs}
    if targets == "all":
        sel = ids - {direct_id}
    else:
        sel = set(int(t) for t in targets)
        if direct_id in sel:
            raise MimoError("PRS cannot be applied to the direct path")
        missing = sel - ids
        if missing:
            raise MimoError(f"unknown cluster ids {sorted(missing)}")

    f_hz = cir.carrier_hz
    scale: dict[int, float] = {}
    for cid in sel:
        members = [m for m in cir.mpcs if m.cluster_id == cid]
        p = np.array([m.power for m in members])
        if members[0].kind == SPECULAR:
            target = fspl_amplitude(members[0].path_length_m, f_hz) ** 2
        else:
            length = float(np.sum(p * [m.path_length_m for m in members]) / p.sum())
            target = fspl_amplitude(length, f_hz) ** 2
        scale[cid] = max(float(np.sqrt(target / p.sum())), 1.0)
    mpcs = tuple(replace(m, amplitude=m.amplitude * scale[m.cluster_id]) if m.cluster_id in scale else m for m in cir.mpcs)
    return replace(cir, mpcs=mpcs)


# -- reports --------------------------------------------------------------------


def capacity_rows_csv(rows: Iterable[tuple[int, float, bool, float]]) -> str:
    buf = io.StringIO()
    buf.write("seed,snr_db,prs_on,bps_hz\n")
    for seed, snr, prs, c in rows:
        buf.write(f"{seed},{snr!r},{int(prs)},{c!r}\n")
    return buf.getvalue()


def capacity_summary(values: Sequence[float]) -> dict:
    x = np.asarray(values, dtype=float)
    return {
        "n": int(x.size),
        "mean": float(x.mean()),
        "p5": float(np.percentile(x, 5)),
        "p95": float(np.percentile(x, 95)),
    }


def summary_json(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"
