import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from thzsim.channel_stats import (
    Pdp,
    StatsError,
    averaging_gain_db,
    cdf_csv,
    cluster_stats,
    ensemble_summary,
    fraction_above,
    max_excess_delay,
    omni_pdp,
    rms_delay_spread,
)
from thzsim.geometry import Point3
from thzsim.qd_channel import DIRECT, SPECULAR, Cir, Mpc, load_preset, synthesize_cir


def _cir(taps):
    mpcs = tuple(
        Mpc(d, 0.0, 0.0, a, DIRECT if i == 0 else SPECULAR, cluster_id=i) for i, (d, a) in enumerate(taps)
    )
    return Cir(mpcs, Point3(0, 0, 0), Point3(1, 0, 0), "test", 0)


def test_two_equal_taps_give_5ns_spread():
    pdp = omni_pdp(_cir([(10.0, 1.0), (20.0, 1.0)]))
    assert rms_delay_spread(pdp) == pytest.approx(5.0)
    assert max_excess_delay(pdp) == pytest.approx(10.0)


def test_floor_excludes_weak_tap():
    pdp = omni_pdp(_cir([(0.0, 1.0), (50.0, 10 ** (-40 / 20))]))
    assert rms_delay_spread(pdp, -30.0) == 0.0
    assert max_excess_delay(pdp, -30.0) == 0.0
    assert max_excess_delay(pdp, -50.0) == pytest.approx(50.0)


@given(st.floats(0.01, 1.0), st.floats(1.0, 80.0))
def test_two_tap_closed_form(a2, tau):
    # sigma = tau * sqrt(p1 p2) / (p1 + p2) for taps of power p1, p2 at distance tau
    tau = float(np.round(tau))
    pdp = omni_pdp(_cir([(0.0, 1.0), (tau, a2)]))
    p2 = a2**2
    want = tau * np.sqrt(p2) / (1 + p2) if 10 * np.log10(p2) >= -30 else 0.0
    assert rms_delay_spread(pdp) == pytest.approx(want, abs=1e-9)


def test_bad_inputs():
    with pytest.raises(StatsError):
        omni_pdp(_cir([(0.0, 1.0)]), bin_width_ns=0)
    with pytest.raises(StatsError):
        rms_delay_spread(Pdp(1.0, np.array([1.0]), 1.0), floor_db=3.0)


def test_averaging_gain():
    assert averaging_gain_db(100) == 20.0
    assert averaging_gain_db(1) == 0.0
    # 40 dB single-shot range plus 20 dB gives the 60 dB dynamic range
    assert 40.0 + averaging_gain_db(100) == 60.0
    with pytest.raises(StatsError):
        averaging_gain_db(0)


def test_cluster_stats_counts_los_and_threshold():
    cir = _cir([(0.0, 1.0), (5.0, 10 ** (-5 / 20)), (9.0, 10 ** (-15 / 20)), (12.0, 10 ** (-40 / 20))])
    s = cluster_stats(cir, floor_db=-30.0)
    assert s.count == 3
    assert fraction_above([s]) == pytest.approx(0.5)
    assert fraction_above([s], include_los=True) == pytest.approx(2 / 3)


def test_cdf_is_monotone_and_ends_at_one():
    rows = [tuple(map(float, ln.split(","))) for ln in cdf_csv([3, 1, 2, 2]).splitlines()[1:]]
    assert rows == [(1.0, 0.25), (2.0, 0.75), (3.0, 1.0)]


def test_ensemble_summary_keys():
    p = load_preset("corridor")
    s = ensemble_summary([synthesize_cir(p, p.default_tx, p.default_rx, i) for i in range(20)])
    assert s["n"] == 20
    assert s["rms_delay_spread_ns"]["median"] < 10.0
    assert 0.0 <= s["fraction_above_minus10db"] <= 1.0
