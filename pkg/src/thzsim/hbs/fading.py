"""Dynamic fading series and Doppler spectrograms from body point-cloud frames.

MoCap frames arrive at ~100 Hz while the series is sampled at 30 kHz.  Clouds
are interpolated per point, linearly in time.  Rebuilding the screen 30000
times per second is wasteful because the raster barely changes within a
millisecond, so screens are rebuilt at ``screen_rate_hz`` and carried
rigidly with the (linearly interpolated) body centroid in between.  Within a
rebuild interval the field is interpolated path by path: each diffraction
path contributes ``A(t) exp(-j k dL(t))`` with a slowly varying ``A`` and
excess length ``dL``, both interpolated linearly between the interval ends.
When the boundary-integral fallback is active its line elements are
interpolated the same way; intervals whose paths cannot be paired are
evaluated sample by sample.  With
``screen_rate_hz == fs_hz`` every sample gets its own screen.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import signal
from scipy.spatial import cKDTree

from ..geometry import as_vec
from ..qd_channel import CARRIER_HZ, wavelength
from .diffraction import boundary_elements, boundary_sum, edge_field_detail
from .po_oracle import po_field_oracle
from .screen import DEFAULT_PITCH_M, HUMAN_SHAPED, RECTANGULAR, HumanFrame, ScreenError, build_screen, rect_screen

FS_HZ = 30_000.0
DEFAULT_SCREEN_RATE_HZ = 1_000.0
STFT_WINDOW = 1024
STFT_OVERLAP = 512
EDGE = "edge"
PO = "po"
# paths further apart than this between interval ends are not paired
_PAIR_TOL_M = 0.03


@dataclass
class FadingSeries:
    """LoS-normalized complex gain on a uniform grid ``t0 + n / fs_hz``."""

    fs_hz: float
    samples: np.ndarray
    t0: float = 0.0
    lit: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=complex)
        if self.lit is None:
            self.lit = np.ones(len(self.samples), dtype=bool)
        self.lit = np.asarray(self.lit, dtype=bool)
        if self.lit.shape != self.samples.shape:
            raise ValueError("lit flags must match samples")

    @property
    def times(self) -> np.ndarray:
        return self.t0 + np.arange(len(self.samples)) / self.fs_hz

    @property
    def gain_db(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return 20 * np.log10(np.abs(self.samples))


@dataclass(frozen=True)
class Spectrogram:
    freqs_hz: np.ndarray  # ascending, -fs/2 .. fs/2
    times_s: np.ndarray
    magnitude: np.ndarray  # (n_freq, n_time)

    @property
    def power(self) -> np.ndarray:
        return self.magnitude**2

    def doppler_trace(self) -> np.ndarray:
        """Power-weighted mean frequency per time column."""
        p = self.power
        tot = p.sum(axis=0)
        return np.where(tot > 0, (self.freqs_hz[:, None] * p).sum(axis=0) / np.where(tot > 0, tot, 1.0), 0.0)

    def zero_bin_fraction(self, halfwidth_bins: int = 1) -> float:
        """Share of energy within +-halfwidth_bins of 0 Hz (the Hann main lobe by default)."""
        k0 = int(np.argmin(np.abs(self.freqs_hz)))
        p = self.power
        return float(p[max(0, k0 - halfwidth_bins) : k0 + halfwidth_bins + 1].sum() / p.sum())


@dataclass(frozen=True)
class PredictionError:
    bias: float  # mean of |pred| - |ref| over lit samples (LoS envelope units)
    rms: float
    bias_db: float  # 20 log10(mean |pred| / mean |ref|) over lit samples
    n_lit: int
    cdf_x: np.ndarray
    cdf_p: np.ndarray


# -- frame handling --------------------------------------------------------------


def _align(frames: list[HumanFrame]) -> tuple[np.ndarray, np.ndarray, bool]:
    """Stack clouds with consistent point identity; returns (times, clouds (F,N,3), resampled)."""
    if len(frames) < 2:
        raise ScreenError("need at least two frames")
    t = np.array([f.t_s for f in frames])
    if np.any(np.diff(t) <= 0):
        raise ScreenError("frame timestamps must be strictly increasing")
    ref = frames[0]
    n = len(ref.points)
    out = np.empty((len(frames), n, 3))
    resampled = False
    for k, f in enumerate(frames):
        if f.point_ids is not None and ref.point_ids is not None and len(f.points) == n and set(f.point_ids.tolist()) == set(ref.point_ids.tolist()):
            order = {pid: i for i, pid in enumerate(f.point_ids.tolist())}
            out[k] = f.points[[order[pid] for pid in ref.point_ids.tolist()]]
        elif len(f.points) == n:
            out[k] = f.points
        else:
            # pair every point of the first-frame layout with its nearest neighbour,
            # after removing the bulk motion
            prev = out[k - 1]
            shift = f.points.mean(axis=0) - prev.mean(axis=0)
            _, idx = cKDTree(f.points).query(prev + shift)
            out[k] = f.points[idx]
            resampled = True
    return t, out, resampled


def _cloud_at(t: float, times: np.ndarray, clouds: np.ndarray) -> np.ndarray:
    k = int(np.clip(np.searchsorted(times, t, side="right") - 1, 0, len(times) - 2))
    a = (t - times[k]) / (times[k + 1] - times[k])
    return (1 - a) * clouds[k] + a * clouds[k + 1]


# -- field evaluation ------------------------------------------------------------


def _make_screen(model, frame, tx, rx, pitch):
    if model == HUMAN_SHAPED:
        return build_screen(frame, tx, rx, pitch)
    if model == RECTANGULAR:
        return rect_screen(frame, tx, rx, pitch)
    raise ValueError(f"unknown screen model {model!r}")


def _lit(screen, tx, centers: np.ndarray) -> np.ndarray:
    # LoS piercing point in the plane through each center (the normal is the LoS direction)
    rel = tx[None, :] - centers
    u = rel @ screen.plane.u_axis
    v = rel @ screen.plane.v_axis
    return np.array([not screen.occupied_at(a, b) for a, b in zip(u, v)])


def _paths_state(res, d_los: float, k: float):
    """(points (M,2), excess (M,), slowly varying amplitudes (M,), LoS term)."""
    pts = np.array([p.point for p in res.paths], dtype=float).reshape(-1, 2)
    exc = np.array([p.unfolded_len_m - d_los for p in res.paths])
    amp = np.array([p.coeff for p in res.paths], dtype=complex) * np.exp(1j * k * exc)
    los = 0.0 if res.paths and res.paths[0].nu >= 0 else 1.0
    return pts, exc, amp, los


def _pair(pa: np.ndarray, pb: np.ndarray):
    if len(pa) != len(pb):
        return None
    if len(pa) == 0:
        return np.zeros(0, dtype=int)
    dist = np.linalg.norm(pa[:, None, :] - pb[None, :, :], axis=-1)
    idx = np.argmin(dist, axis=1)
    if len(set(idx.tolist())) != len(idx) or np.any(dist[np.arange(len(pa)), idx] > _PAIR_TOL_M):
        return None
    return idx


def fading_series(
    frames: list[HumanFrame],
    tx,
    rx,
    f_hz: float = CARRIER_HZ,
    model: str = HUMAN_SHAPED,
    fs_hz: float = FS_HZ,
    screen_rate_hz: float | None = DEFAULT_SCREEN_RATE_HZ,
    pitch_m: float = DEFAULT_PITCH_M,
    field_model: str = EDGE,
) -> FadingSeries:
    """Complex gain behind the moving body on a uniform ``fs_hz`` grid.

    ``field_model`` is ``"edge"`` (stationary-phase diffraction) or ``"po"``
    (physical-optics oracle, evaluated at every sample; use a low ``fs_hz``).
    """
    tx, rx = as_vec(tx), as_vec(rx)
    times, clouds, resampled = _align(frames)
    n = int(np.floor((times[-1] - times[0]) * fs_hz + 1e-9))
    if n < 1:
        raise ScreenError("frames span less than one sample")
    t = times[0] + np.arange(n) / fs_hz
    # the centroid is linear in the points, so it interpolates exactly
    cent = np.stack([np.interp(t, times, clouds.mean(axis=1)[:, i]) for i in range(3)], axis=-1)
    lam = wavelength(f_hz)
    k = 2 * np.pi / lam
    d_los = float(np.linalg.norm(rx - tx))
    rate = fs_hz if screen_rate_hz is None else min(float(screen_rate_hz), fs_hz)
    step = max(1, int(round(fs_hz / rate)))
    if field_model == PO:
        step = 1
    elif field_model != EDGE:
        raise ValueError(f"unknown field model {field_model!r}")

    out = np.empty(n, dtype=complex)
    lit = np.empty(n, dtype=bool)
    n_direct = 0
    n_fallback = 0
    for start in range(0, n, step):
        stop = min(start + step, n)
        screen = _make_screen(model, HumanFrame(t[start], _cloud_at(t[start], times, clouds)), tx, rx, pitch_m)
        lit[start:stop] = _lit(screen, tx, cent[start:stop])
        if field_model == PO:
            out[start] = po_field_oracle(screen, tx, rx, f_hz)
            continue
        res_a = edge_field_detail(screen, tx, rx, f_hz)
        if stop - start == 1:
            out[start] = res_a.gain
            n_fallback += res_a.fallback
            continue
        # rigidly carried screen at the start of the next interval
        end_c = cent[stop] if stop < n else cent[stop - 1] + (cent[stop - 1] - cent[stop - 2])
        res_b = edge_field_detail(screen.translated(end_c), tx, rx, f_hz)
        a = _paths_state(res_a, d_los, k)
        b = _paths_state(res_b, d_los, k)
        w = (np.arange(start, stop) - start)[:, None] / (stop - start)
        if res_a.fallback or res_b.fallback:
            # boundary integral elements move smoothly with the screen; interpolate them
            nsub, exc_a, dth_a = boundary_elements(screen, tx, rx, f_hz)
            _, exc_b, dth_b = boundary_elements(screen.translated(end_c), tx, rx, f_hz, nsub=nsub)
            out[start:stop] = boundary_sum((1 - w) * exc_a + w * exc_b, (1 - w) * dth_a + w * dth_b, lam)
            n_fallback += 1
            continue
        idx = None if a[3] != b[3] else _pair(a[0], b[0])
        if idx is None:
            n_direct += stop - start
            out[start] = res_a.gain
            for m in range(start + 1, stop):
                r = edge_field_detail(screen.translated(cent[m]), tx, rx, f_hz)
                out[m] = r.gain
            continue
        exc = (1 - w) * a[1][None, :] + w * b[1][idx][None, :]
        amp = (1 - w) * a[2][None, :] + w * b[2][idx][None, :]
        out[start:stop] = a[3] + np.sum(amp * np.exp(-1j * k * exc), axis=1)
    meta = {
        "model": model,
        "field_model": field_model,
        "f_hz": float(f_hz),
        "screen_rate_hz": float(fs_hz / step),
        "pitch_m": float(pitch_m),
        "resampled_point_count": bool(resampled),
        "direct_samples": int(n_direct),
        "fallback_screens": int(n_fallback),
    }
    return FadingSeries(float(fs_hz), out, float(times[0]), lit, meta)


# -- spectra and error statistics ------------------------------------------------


def doppler_spectrogram(series: FadingSeries, window: int = STFT_WINDOW, overlap: int = STFT_OVERLAP) -> Spectrogram:
    """Magnitude STFT with a Hann window, two-sided and centered on 0 Hz."""
    x = np.asarray(series.samples)
    if len(x) < window:
        raise ValueError(f"series has {len(x)} samples, fewer than the {window}-sample window")
    f, tt, z = signal.stft(
        x, fs=series.fs_hz, window="hann", nperseg=window, noverlap=overlap, return_onesided=False, boundary=None, padded=False, detrend=False
    )
    f = np.fft.fftshift(f)
    z = np.fft.fftshift(z, axes=0)
    return Spectrogram(f, series.t0 + tt, np.abs(z))


def prediction_error(pred: FadingSeries, ref: FadingSeries, lit: np.ndarray | None = None) -> PredictionError:
    """Envelope error |pred| - |ref| (LoS units) over the reference's lit samples."""
    if len(pred.samples) != len(ref.samples) or pred.fs_hz != ref.fs_hz:
        raise ValueError("series differ in length or sampling")
    mask = ref.lit if lit is None else np.asarray(lit, dtype=bool)
    if not np.any(mask):
        raise ValueError("no lit samples")
    ap = np.abs(pred.samples[mask])
    ar = np.abs(ref.samples[mask])
    e = ap - ar
    x = np.sort(e)
    p = np.arange(1, len(x) + 1) / len(x)
    return PredictionError(float(np.mean(e)), float(np.sqrt(np.mean(e**2))), float(20 * np.log10(np.mean(ap) / np.mean(ar))), int(mask.sum()), x, p)
