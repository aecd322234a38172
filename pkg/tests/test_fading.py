import numpy as np
import pytest

from thzsim.hbs.fading import FadingSeries, doppler_spectrogram, fading_series, prediction_error
from thzsim.hbs.phantoms import cylinder_phantom, rigid_frames, walk_frames
from thzsim.hbs.screen import HumanFrame, ScreenError
from thzsim.qd_channel import wavelength

TX = np.array([0.0, 0.0, 1.0])
RX = np.array([3.5, 0.0, 1.0])


def slab(width=0.5, height=1.8, x=1.75, y=0.0):
    yy, zz = np.meshgrid(np.arange(-width / 2, width / 2 + 1e-9, 0.005), np.arange(0.0, height + 1e-9, 0.005))
    return np.stack([np.full(yy.size, x), yy.ravel() + y, zz.ravel()], axis=-1)


def test_static_frames_give_constant_series_and_dc_spectrum():
    pts = cylinder_phantom((1.75, 0.45))
    s = fading_series(rigid_frames(pts, (0, 0, 0), [0.0, 0.04]), TX, RX)
    assert len(s.samples) == 1200
    assert np.ptp(np.abs(s.samples)) < 1e-12 and np.ptp(np.angle(s.samples)) < 1e-12
    sp = doppler_spectrogram(s)
    assert sp.zero_bin_fraction() >= 0.999
    assert sp.zero_bin_fraction(0) == pytest.approx(2 / 3, abs=0.01)  # Hann main lobe split 1:4:1


def test_tone_peak():
    fs = 30_000.0
    t = np.arange(6000) / fs
    sp = doppler_spectrogram(FadingSeries(fs, np.exp(2j * np.pi * 500 * t)))
    df = sp.freqs_hz[1] - sp.freqs_hz[0]
    peaks = sp.freqs_hz[np.argmax(sp.magnitude, axis=0)]
    assert np.all(np.abs(peaks - 500) <= df)
    assert df == pytest.approx(fs / 1024)


def test_frequency_axis_is_two_sided():
    sp = doppler_spectrogram(FadingSeries(30_000.0, np.ones(2048)))
    assert sp.freqs_hz[0] == pytest.approx(-15_000.0) and sp.freqs_hz[-1] < 15_000.0
    assert np.all(np.diff(sp.freqs_hz) > 0)


def test_short_series_rejected():
    with pytest.raises(ValueError):
        doppler_spectrogram(FadingSeries(30_000.0, np.ones(1000)))


def test_along_los_doppler_matches_finite_difference():
    # thin pole 0.6 m off the LoS, moving toward tx at 1 m/s
    h = 0.6
    zz = np.arange(0.0, 2.0 + 1e-9, 0.005)
    pts = np.stack([np.full(zz.size, 1.0), np.full(zz.size, h), zz], axis=-1)
    s = fading_series(rigid_frames(pts, (-1.0, 0, 0), np.linspace(0, 0.06, 7)), TX, RX)
    assert s.lit.all()
    sp = doppler_spectrogram(s)
    df = sp.freqs_hz[1] - sp.freqs_hz[0]
    k0 = int(np.argmin(np.abs(sp.freqs_hz)))

    def length(x):
        return np.hypot(x, h) + np.hypot(3.5 - x, h)

    for j, tc in enumerate(sp.times_s):
        p = sp.power[:, j].copy()
        p[k0 - 3 : k0 + 4] = 0  # drop the LoS line
        x = 1.0 - tc
        dl_dt = (length(x - 1e-6) - length(x + 1e-6)) / 2e-6
        want = -dl_dt / wavelength()
        assert abs(sp.freqs_hz[np.argmax(p)] - want) <= df


@pytest.fixture(scope="module")
def walk_across():
    frames = rigid_frames(slab(y=-0.6), (0, 1.0, 0), np.linspace(0, 1.2, 13))
    return fading_series(frames, TX, RX, fs_hz=2000.0, screen_rate_hz=250.0)


def test_walk_across_dwell(walk_across):
    s = walk_across
    assert (~s.lit).sum() / s.fs_hz == pytest.approx(0.5, abs=0.02)
    assert (s.gain_db < -6.0).sum() / s.fs_hz == pytest.approx(0.5, abs=0.03)
    assert s.times[np.argmin(s.gain_db)] == pytest.approx(0.6, abs=0.02)


def test_walk_across_doppler_sign_flip(walk_across):
    sp = doppler_spectrogram(walk_across, 64, 32)
    tr = sp.doppler_trace()
    before = tr[(sp.times_s > 0.45) & (sp.times_s < 0.57)]
    after = tr[(sp.times_s > 0.63) & (sp.times_s < 0.75)]
    assert np.all(np.sign(before) == -np.sign(after[0])) and np.all(np.sign(after) == np.sign(after[0]))


def test_interpolated_screens_track_full_rate():
    frames = walk_frames((1.75, -0.45), (0.0, 1.0), 0.02)
    a = fading_series(frames, TX, RX, screen_rate_hz=1000.0)
    b = fading_series(frames, TX, RX, fs_hz=30_000.0, screen_rate_hz=None)
    assert np.max(np.abs(a.gain_db - b.gain_db)) < 0.6


def test_non_monotone_timestamps_rejected():
    pts = cylinder_phantom((1.75, 0.5))
    with pytest.raises(ScreenError):
        fading_series([HumanFrame(0.1, pts), HumanFrame(0.0, pts)], TX, RX)
    with pytest.raises(ScreenError):
        fading_series([HumanFrame(0.0, pts)], TX, RX)


def test_changing_point_count_is_resampled_and_flagged():
    pts = cylinder_phantom((1.75, 0.5))
    frames = [HumanFrame(0.0, pts), HumanFrame(0.01, pts[:-10] + [0, 0.01, 0])]
    s = fading_series(frames, TX, RX, fs_hz=1000.0)
    assert s.meta["resampled_point_count"]


def test_prediction_error_examples():
    rng = np.random.default_rng(0)
    ref = FadingSeries(1000.0, rng.uniform(0.5, 1.5, 500) * np.exp(1j * rng.uniform(0, 6, 500)))
    e = prediction_error(ref, ref)
    assert e.bias == 0 and e.rms == 0
    up = FadingSeries(1000.0, ref.samples * 10 ** (1 / 20), lit=ref.lit)
    e = prediction_error(up, ref)
    assert e.bias_db == pytest.approx(1.0)
    assert e.bias == pytest.approx((10 ** (1 / 20) - 1) * np.mean(np.abs(ref.samples)))
    assert e.cdf_p[-1] == 1.0 and np.all(np.diff(e.cdf_x) >= 0)


def test_prediction_error_uses_lit_samples_only():
    ref = FadingSeries(1000.0, np.ones(4), lit=np.array([True, True, False, False]))
    pred = FadingSeries(1000.0, np.array([1.0, 1.0, 5.0, 5.0]))
    assert prediction_error(pred, ref).bias == 0.0 and prediction_error(pred, ref).n_lit == 2


def test_prediction_error_length_mismatch():
    with pytest.raises(ValueError):
        prediction_error(FadingSeries(1000.0, np.ones(3)), FadingSeries(1000.0, np.ones(4)))
