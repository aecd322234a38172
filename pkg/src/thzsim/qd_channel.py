"""Quasi-deterministic (QD) multipath channel generator.

A channel impulse response is the union of

* deterministic components: the direct path and single-bounce specular
  reflections found with the image method on the preset's planar reflectors;
* random clusters: a Poisson number of clusters with exponential excess
  delays, exponentially decaying (in dB per ns) power with log-normal jitter,
  and uniform departure/arrival azimuths.  Each cluster is expanded into
  closely spaced subpaths (intra-cluster dispersion).

Amplitudes are linear voltage gains referenced to isotropic antennas.
Everything is reproducible from ``(preset, tx, rx, seed)``.
"""

from __future__ import annotations

import json
import math
import zlib
from dataclasses import dataclass, field, replace
from importlib import resources
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from .geometry import Plane, Point3, as_vec, azimuth, mirror_point, segment_plane_intersection

C0 = 299_792_458.0
CARRIER_HZ = 300e9
PRESET_NAMES = ("corridor", "conference_medium", "conference_large", "open_square")

DIRECT = "direct"
SPECULAR = "specular"
RANDOM_SUBPATH = "random_subpath"

# Distance from a reflector edge (m) under which a specular point counts as grazing.
EDGE_EPS = 1e-9


class ChannelError(ValueError):
    pass


def wavelength(f_hz: float = CARRIER_HZ) -> float:
    return C0 / f_hz


def fspl_amplitude(length_m: float, f_hz: float = CARRIER_HZ) -> float:
    """Free-space voltage gain lambda / (4 pi d)."""
    return wavelength(f_hz) / (4 * np.pi * length_m)


def fspl_db(length_m: float, f_hz: float = CARRIER_HZ) -> float:
    return 20 * np.log10(4 * np.pi * length_m / wavelength(f_hz))


@dataclass(frozen=True)
class Reflector:
    plane: Plane
    u_range: tuple[float, float]
    v_range: tuple[float, float]
    loss_db: float
    name: str = ""

    def __post_init__(self):
        if not (self.u_range[1] > self.u_range[0] and self.v_range[1] > self.v_range[0]):
            raise ChannelError(f"degenerate reflector extent {self.name!r}")

    def contains(self, u: float, v: float) -> bool:
        return (
            self.u_range[0] + EDGE_EPS < u < self.u_range[1] - EDGE_EPS
            and self.v_range[0] + EDGE_EPS < v < self.v_range[1] - EDGE_EPS
        )

    @classmethod
    def from_dict(cls, d: dict) -> "Reflector":
        return cls(
            plane=Plane.through(d["origin"], d["normal"]),
            u_range=tuple(d["u_range"]),
            v_range=tuple(d["v_range"]),
            loss_db=float(d["loss_db"]),
            name=d.get("name", ""),
        )

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "origin": self.plane.origin.tolist(),
            "normal": self.plane.normal.tolist(),
            "u_range": list(self.u_range),
            "v_range": list(self.v_range),
            "loss_db": self.loss_db,
        }


@dataclass(frozen=True)
class IntraCluster:
    subpath_count: int = 20
    delay_spread_ns: float = 1.0
    angle_spread_deg: float = 2.0


@dataclass(frozen=True)
class EnvironmentPreset:
    """Geometry plus stochastic cluster parameters for one environment.

    ``mean_cluster_count`` is the combined target (LoS + specular + random);
    the random-cluster Poisson rate is derived from it per Tx/Rx placement.
    Random cluster power relative to LoS is
    ``offset - decay * excess_delay + N(0, shadow_sigma)`` clipped to
    ``[floor, max_relative_power]``.
    """

    name: str
    reflectors: tuple[Reflector, ...]
    mean_cluster_count: float
    cluster_power_decay_db_per_ns: float
    cluster_power_floor_db: float = -30.0
    cluster_power_offset_db: float = 0.0
    shadow_sigma_db: float = 3.0
    max_relative_power_db: float = -1.0
    excess_delay_scale_ns: float = 10.0
    max_excess_delay_ns: float = 95.0
    intra_cluster: IntraCluster = IntraCluster()
    carrier_hz: float = CARRIER_HZ
    bounds: tuple[tuple[float, float, float], tuple[float, float, float]] = (
        (-1e3, -1e3, -1e3),
        (1e3, 1e3, 1e3),
    )
    default_tx: tuple[float, float, float] = (0.0, 0.0, 1.5)
    default_rx: tuple[float, float, float] = (10.0, 0.0, 1.5)
    notes: str = ""

    def __post_init__(self):
        if self.mean_cluster_count < 0:
            raise ChannelError("mean_cluster_count must be non-negative")
        if self.cluster_power_decay_db_per_ns <= 0:
            raise ChannelError("cluster power decay must be positive")
        if self.excess_delay_scale_ns <= 0 or self.max_excess_delay_ns <= 0:
            raise ChannelError("delay parameters must be positive")

    @classmethod
    def from_dict(cls, d: dict) -> "EnvironmentPreset":
        d = dict(d)
        d.pop("$schema", None)
        d["reflectors"] = tuple(Reflector.from_dict(r) for r in d.get("reflectors", []))
        d["intra_cluster"] = IntraCluster(**d.get("intra_cluster", {}))
        if "bounds" in d:
            d["bounds"] = tuple(tuple(b) for b in d["bounds"])
        for k in ("default_tx", "default_rx"):
            if k in d:
                d[k] = tuple(d[k])
        return cls(**d)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "reflectors": [r.to_dict() for r in self.reflectors],
            "mean_cluster_count": self.mean_cluster_count,
            "cluster_power_decay_db_per_ns": self.cluster_power_decay_db_per_ns,
            "cluster_power_floor_db": self.cluster_power_floor_db,
            "cluster_power_offset_db": self.cluster_power_offset_db,
            "shadow_sigma_db": self.shadow_sigma_db,
            "max_relative_power_db": self.max_relative_power_db,
            "excess_delay_scale_ns": self.excess_delay_scale_ns,
            "max_excess_delay_ns": self.max_excess_delay_ns,
            "intra_cluster": vars(self.intra_cluster).copy(),
            "carrier_hz": self.carrier_hz,
            "bounds": [list(b) for b in self.bounds],
            "default_tx": list(self.default_tx),
            "default_rx": list(self.default_rx),
            "notes": self.notes,
        }

    def with_overrides(self, **kw) -> "EnvironmentPreset":
        return replace(self, **kw)

    def inside(self, p) -> bool:
        a = as_vec(p)
        lo, hi = np.asarray(self.bounds[0]), np.asarray(self.bounds[1])
        return bool(np.all(a >= lo) and np.all(a <= hi))


def load_preset(name_or_path: str) -> EnvironmentPreset:
    """Load a shipped preset by name, or any preset JSON file by path."""
    if name_or_path in PRESET_NAMES:
        text = resources.files("thzsim.presets").joinpath(f"{name_or_path}.json").read_text()
    else:
        with open(name_or_path) as fh:
            text = fh.read()
    return EnvironmentPreset.from_dict(json.loads(text))


@dataclass(frozen=True)
class Mpc:
    delay_ns: float
    aod_rad: float
    aoa_rad: float
    amplitude: complex
    kind: str
    interaction_points: tuple[Point3, ...] = ()
    # provenance: 0 for the direct path, 1..n for reflectors, n+1.. for random clusters
    cluster_id: int = 0
    # free-space-equivalent unfolded length, used when removing interaction loss
    path_length_m: float = 0.0

    @property
    def power(self) -> float:
        return abs(self.amplitude) ** 2


@dataclass(frozen=True)
class ClusterDescriptor:
    cluster_id: int
    delay_ns: float
    excess_delay_ns: float
    aod_rad: float
    aoa_rad: float
    power_db: float  # relative to the LoS path
    power: float  # linear, absolute
    seed: int  # entropy for the intra-cluster expansion


@dataclass(frozen=True)
class Cir:
    mpcs: tuple[Mpc, ...]
    tx: Point3
    rx: Point3
    preset_name: str
    rng_seed: int | None
    clusters: tuple[ClusterDescriptor, ...] = ()
    floor_db: float = -30.0
    carrier_hz: float = CARRIER_HZ

    @property
    def direct(self) -> Mpc | None:
        for m in self.mpcs:
            if m.kind == DIRECT:
                return m
        return None

    def arrays(self) -> dict[str, np.ndarray]:
        return {
            "delay_ns": np.array([m.delay_ns for m in self.mpcs]),
            "aod_rad": np.array([m.aod_rad for m in self.mpcs]),
            "aoa_rad": np.array([m.aoa_rad for m in self.mpcs]),
            "amplitude": np.array([m.amplitude for m in self.mpcs], dtype=complex),
            "cluster_id": np.array([m.cluster_id for m in self.mpcs], dtype=int),
        }

    @property
    def total_power(self) -> float:
        return float(sum(m.power for m in self.mpcs))


def _check_endpoints(preset: EnvironmentPreset, tx, rx):
    t, r = as_vec(tx), as_vec(rx)
    if np.linalg.norm(t - r) == 0.0:
        raise ChannelError("tx and rx coincide")
    for p, nm in ((t, "tx"), (r, "rx")):
        if not preset.inside(p):
            raise ChannelError(f"{nm} outside environment bounds of {preset.name!r}")
    return t, r


def generate_deterministic_mpcs(preset: EnvironmentPreset, tx, rx) -> list[Mpc]:
    """Direct path plus single-bounce specular reflections (image method).

    A reflection exists when the image-to-Rx segment crosses the reflector
    strictly inside its extent; specular points on the extent edge are
    excluded.  Reflections use a real, sign-inverting coefficient of magnitude
    ``10**(-loss_db/20)``.
    """
    t, r = _check_endpoints(preset, tx, rx)
    lam = wavelength(preset.carrier_hz)
    k = 2 * np.pi / lam
    d = float(np.linalg.norm(r - t))
    out = [
        Mpc(
            delay_ns=d / C0 * 1e9,
            aod_rad=azimuth(r - t),
            aoa_rad=azimuth(t - r),
            amplitude=fspl_amplitude(d, preset.carrier_hz) * np.exp(-1j * k * d),
            kind=DIRECT,
            cluster_id=0,
            path_length_m=d,
        )
    ]
    for i, refl in enumerate(preset.reflectors, start=1):
        pl = refl.plane
        st, sr = pl.signed_distance(t), pl.signed_distance(r)
        if st <= 0 or sr <= 0:
            continue  # both antennas must face the reflecting side
        image = mirror_point(t, pl).vec
        hit = segment_plane_intersection(image, r, pl)
        if hit is None:
            continue
        _, p = hit
        rel = p - pl.origin
        if not refl.contains(float(rel @ pl.u_axis), float(rel @ pl.v_axis)):
            continue
        length = float(np.linalg.norm(r - image))
        gamma = -(10 ** (-refl.loss_db / 20)) * fspl_amplitude(length, preset.carrier_hz)
        out.append(
            Mpc(
                delay_ns=length / C0 * 1e9,
                aod_rad=azimuth(p - t),
                aoa_rad=azimuth(p - r),
                amplitude=gamma * np.exp(-1j * k * length),
                kind=SPECULAR,
                interaction_points=(Point3.of(p),),
                cluster_id=i,
                path_length_m=length,
            )
        )
    return out


def position_entropy(tx, rx) -> int:
    """Stable 32-bit hash of the antenna positions (micrometer resolution)."""
    coords = np.round(np.concatenate([as_vec(tx), as_vec(rx)]) * 1e6).astype(np.int64)
    return zlib.crc32(coords.tobytes())


def _rng_root(seed: int, tx, rx) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(seed), position_entropy(tx, rx)])


def clipped_poisson_rate(target_mean: float) -> float:
    """Rate lam with E[max(Poisson(lam), 1)] = lam + exp(-lam) == target_mean."""
    if target_mean <= 1.0:
        return 0.0
    return brentq(lambda lam: lam + math.exp(-lam) - target_mean, 0.0, target_mean + 1.0)


def random_cluster_rate(preset: EnvironmentPreset, n_deterministic: int) -> float | None:
    """Poisson rate for random clusters, or None when they are switched off."""
    if preset.mean_cluster_count <= 0:
        return None
    return clipped_poisson_rate(preset.mean_cluster_count - n_deterministic)


def _truncated_exponential(rng, scale, upper, size):
    # inverse-CDF sampling keeps one uniform draw per value
    u = rng.random(size)
    return -scale * np.log1p(-u * (1.0 - math.exp(-upper / scale)))


def sample_random_clusters(preset: EnvironmentPreset, tx, rx, seed: int) -> list[ClusterDescriptor]:
    det = generate_deterministic_mpcs(preset, tx, rx)
    return _sample_clusters(preset, det, tx, rx, seed)


def _sample_clusters(preset, det, tx, rx, seed) -> list[ClusterDescriptor]:
    lam = random_cluster_rate(preset, len(det))
    if lam is None:
        return []
    root = _rng_root(seed, tx, rx)
    rng = np.random.default_rng(root.spawn(1)[0])
    n = max(int(rng.poisson(lam)), 1)
    ic = preset.intra_cluster
    # leave room for intra-cluster spread below the excess-delay cap
    upper = max(preset.max_excess_delay_ns - 5.0 * ic.delay_spread_ns, 1e-3)
    excess = _truncated_exponential(rng, preset.excess_delay_scale_ns, upper, n)
    shadow = rng.normal(0.0, preset.shadow_sigma_db, n)
    power_db = preset.cluster_power_offset_db - preset.cluster_power_decay_db_per_ns * excess + shadow
    power_db = np.clip(power_db, preset.cluster_power_floor_db, preset.max_relative_power_db)
    aod = rng.uniform(-np.pi, np.pi, n)
    aoa = rng.uniform(-np.pi, np.pi, n)
    seeds = rng.integers(0, 2**63 - 1, n)
    los = det[0]
    base_id = len(preset.reflectors) + 1
    return [
        ClusterDescriptor(
            cluster_id=base_id + i,
            delay_ns=float(los.delay_ns + excess[i]),
            excess_delay_ns=float(excess[i]),
            aod_rad=float(aod[i]),
            aoa_rad=float(aoa[i]),
            power_db=float(power_db[i]),
            power=float(los.power * 10 ** (power_db[i] / 10)),
            seed=int(seeds[i]),
        )
        for i in range(n)
    ]


def laplacian_scale(angle_spread_deg: float) -> float:
    """Laplacian scale (rad) whose RMS spread equals ``angle_spread_deg``."""
    return np.deg2rad(angle_spread_deg) / np.sqrt(2.0)


def expand_intra_cluster(cluster: ClusterDescriptor, preset: EnvironmentPreset, direct_delay_ns=None) -> list[Mpc]:
    """Split a cluster into subpaths that share its total power.

    Subpath delay offsets are exponential with the preset delay spread and
    subpath powers decay as ``exp(-offset / spread)`` before normalization;
    angles are Laplacian around the cluster angles; phases are uniform.
    """
    ic = preset.intra_cluster
    rng = np.random.default_rng(cluster.seed)
    n = int(ic.subpath_count)
    if n < 1:
        raise ChannelError("subpath_count must be >= 1")
    if n == 1:
        offsets = np.zeros(1)
        d_aod = d_aoa = np.zeros(1)
    else:
        offsets = rng.exponential(ic.delay_spread_ns, n)
        b = laplacian_scale(ic.angle_spread_deg)
        d_aod = rng.laplace(0.0, b, n)
        d_aoa = rng.laplace(0.0, b, n)
    phases = rng.uniform(0.0, 2 * np.pi, n)
    if direct_delay_ns is not None:
        cap = direct_delay_ns + preset.max_excess_delay_ns - cluster.delay_ns
        offsets = np.minimum(offsets, max(cap, 0.0))
    weights = np.exp(-offsets / ic.delay_spread_ns) if n > 1 else np.ones(1)
    weights = weights / weights.sum()
    amps = np.sqrt(cluster.power * weights) * np.exp(1j * phases)
    aod = (cluster.aod_rad + d_aod + np.pi) % (2 * np.pi) - np.pi
    aoa = (cluster.aoa_rad + d_aoa + np.pi) % (2 * np.pi) - np.pi
    delays = cluster.delay_ns + offsets
    return [
        Mpc(
            delay_ns=float(delays[i]),
            aod_rad=float(aod[i]),
            aoa_rad=float(aoa[i]),
            amplitude=complex(amps[i]),
            kind=RANDOM_SUBPATH,
            cluster_id=cluster.cluster_id,
            path_length_m=float(delays[i] * 1e-9 * C0),
        )
        for i in range(n)
    ]


def synthesize_cir(preset: EnvironmentPreset, tx, rx, seed: int) -> Cir:
    det = generate_deterministic_mpcs(preset, tx, rx)
    clusters = _sample_clusters(preset, det, tx, rx, seed)
    mpcs = list(det)
    for cl in clusters:
        mpcs.extend(expand_intra_cluster(cl, preset, direct_delay_ns=det[0].delay_ns))
    return Cir(
        mpcs=tuple(mpcs),
        tx=Point3.of(tx),
        rx=Point3.of(rx),
        preset_name=preset.name,
        rng_seed=seed,
        clusters=tuple(clusters),
        floor_db=preset.cluster_power_floor_db,
        carrier_hz=preset.carrier_hz,
    )


def cir_ensemble(preset: EnvironmentPreset, seeds: Sequence[int], tx=None, rx=None) -> list[Cir]:
    tx = preset.default_tx if tx is None else tx
    rx = preset.default_rx if rx is None else rx
    return [synthesize_cir(preset, tx, rx, int(s)) for s in seeds]


# -- export -------------------------------------------------------------------

CIR_CSV_HEADER = ("kind", "delay_ns", "aod_rad", "aoa_rad", "re_gamma", "im_gamma")
CIR_JSON_VERSION = 1


def cir_to_csv(cir: Cir) -> str:
    lines = [",".join(CIR_CSV_HEADER)]
    for m in cir.mpcs:
        a = complex(m.amplitude)
        lines.append(f"{m.kind},{m.delay_ns!r},{m.aod_rad!r},{m.aoa_rad!r},{a.real!r},{a.imag!r}")
    return "\n".join(lines) + "\n"


def cir_to_json(cir: Cir) -> dict:
    return {
        "format": "thzsim.cir",
        "version": CIR_JSON_VERSION,
        "provenance": {
            "preset": cir.preset_name,
            "seed": cir.rng_seed,
            "tx": list(cir.tx),
            "rx": list(cir.rx),
        },
        "mpcs": [
            {
                "kind": m.kind,
                "cluster_id": m.cluster_id,
                "delay_ns": m.delay_ns,
                "aod_rad": m.aod_rad,
                "aoa_rad": m.aoa_rad,
                "re": complex(m.amplitude).real,
                "im": complex(m.amplitude).imag,
                "interaction_points": [list(p) for p in m.interaction_points],
                "path_length_m": m.path_length_m,
            }
            for m in cir.mpcs
        ],
    }


def cir_from_json(doc: dict) -> Cir:
    if doc.get("format") != "thzsim.cir" or doc.get("version") != CIR_JSON_VERSION:
        raise ChannelError("unsupported CIR document")
    prov = doc["provenance"]
    mpcs = tuple(
        Mpc(
            delay_ns=m["delay_ns"],
            aod_rad=m["aod_rad"],
            aoa_rad=m["aoa_rad"],
            amplitude=complex(m["re"], m["im"]),
            kind=m["kind"],
            interaction_points=tuple(Point3.of(p) for p in m["interaction_points"]),
            cluster_id=m["cluster_id"],
            path_length_m=m["path_length_m"],
        )
        for m in doc["mpcs"]
    )
    return Cir(mpcs, Point3.of(prov["tx"]), Point3.of(prov["rx"]), prov["preset"], prov["seed"])
