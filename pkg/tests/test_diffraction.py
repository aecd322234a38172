import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from thzsim.hbs.diffraction import (
    MINIMUM,
    boundary_integral_field,
    edge_field,
    edge_field_detail,
    find_stationary_points,
    nu_min,
)
from thzsim.hbs.knife_edge import knife_edge_coeff
from thzsim.hbs.po_oracle import po_field_oracle
from thzsim.qd_channel import wavelength
from thzsim.hbs.screen import ScreenError, box_screen, ellipse_screen, empty_screen, los_plane

TX = np.array([0.0, 0.0, 1.0])
RX = np.array([3.5, 0.0, 1.0])
PLANE = los_plane(TX, RX)


def db(z):
    return 20 * np.log10(abs(z))


def test_empty_screen_is_free_space():
    r = edge_field_detail(empty_screen(PLANE), TX, RX)
    assert r.gain == 1.0 and not r.blocked and r.nu_min == -np.inf


def test_far_offset_screen_recovers_free_space():
    s = box_screen(PLANE, (3.0, 3.5), (-0.85, 0.85))
    assert abs(db(edge_field(s, TX, RX))) <= 0.05


def test_half_plane_at_grazing():
    s = box_screen(PLANE, (0.0, 3.0), (-3.0, 3.0))
    assert db(edge_field(s, TX, RX)) == pytest.approx(-6.02, abs=0.2)


@pytest.mark.parametrize("h", [-0.03, -0.01, 0.02, 0.05])
def test_half_plane_offset_matches_knife_edge(h):
    s = box_screen(PLANE, (h, h + 3.0), (-3.0, 3.0))
    d1 = d2 = 1.75
    nu = h * np.sqrt(2 * (d1 + d2) / (wavelength() * d1 * d2))
    # edge at u = h: positive h leaves the LoS clear, so nu is negative
    assert db(edge_field(s, TX, RX)) == pytest.approx(db(knife_edge_coeff(-nu)), abs=0.2)


def test_centred_rectangle_four_edge_points():
    # each side has its foot of perpendicular from the LoS inside the side
    s = box_screen(PLANE, (-0.25, 0.25), (-0.85, 0.85))
    pts = find_stationary_points(s, TX, RX)
    assert all(p.kind == MINIMUM for p in pts)
    got = sorted((round(p.point[0], 2), round(p.point[1], 2)) for p in pts)
    assert np.allclose(got, [(-0.25, 0.0), (0.0, -0.85), (0.0, 0.85), (0.25, 0.0)], atol=0.011)


def test_offset_rectangle_two_edge_points():
    # LoS clear by 0.1 m: the top and bottom sides have their minima at corners
    s = box_screen(PLANE, (0.1, 0.6), (-0.85, 0.85))
    us = sorted(p.point[0] for p in find_stationary_points(s, TX, RX))
    assert np.allclose(us, [0.1, 0.6], atol=0.011)


def test_ellipse_minima_on_minor_axis():
    s = ellipse_screen(PLANE, (0.0, 0.0), (0.25, 0.6))
    pts = find_stationary_points(s, TX, RX)
    mins = sorted((p for p in pts if p.kind == MINIMUM), key=lambda p: p.unfolded_len_m)[:2]
    for p in mins:
        assert abs(p.point[1]) < 0.03 and abs(abs(p.point[0]) - 0.25) < 0.02


def test_centred_rectangle_matches_oracle():
    s = box_screen(PLANE, (-0.25, 0.25), (-0.85, 0.85))
    r = edge_field_detail(s, TX, RX)
    assert r.blocked and r.nu_min > 1
    assert abs(db(r.gain) - db(po_field_oracle(s, TX, RX))) < 1.0


def test_boundary_integral_matches_oracle():
    s = ellipse_screen(PLANE, (0.1, 0.05), (0.15, 0.4), angle_rad=0.5)
    assert abs(db(boundary_integral_field(s, TX, RX)) - db(po_field_oracle(s, TX, RX))) < 0.3


def test_circle_about_los_falls_back():
    # every boundary point is stationary: the continuum is flagged
    s = ellipse_screen(PLANE, (0.0, 0.0), (0.2, 0.2))
    r = edge_field_detail(s, TX, RX)
    assert r.fallback


def test_plane_not_between_rejected():
    s = box_screen(los_plane(TX, RX), (0.0, 0.1), (0.0, 0.1)).translated((5.0, 0.0, 1.0))
    with pytest.raises(ScreenError):
        edge_field(s, TX, RX)


def test_nu_min_sign():
    clear = box_screen(PLANE, (0.05, 0.5), (-0.5, 0.5))
    blocked = box_screen(PLANE, (-0.05, 0.5), (-0.5, 0.5))
    assert nu_min(clear, TX, RX) < 0 < nu_min(blocked, TX, RX)


screens = st.builds(
    lambda cu, cv, a, b, ang: ellipse_screen(PLANE, (cu, cv), (a, b), angle_rad=ang),
    st.floats(-0.5, 0.5), st.floats(-0.5, 0.5), st.floats(0.08, 0.3), st.floats(0.1, 0.8), st.floats(0, np.pi),
)


@settings(max_examples=25)
@given(screens)
def test_reciprocity(s):
    a, b = abs(edge_field(s, TX, RX)), abs(edge_field(s, RX, TX))
    assert a == pytest.approx(b, rel=1e-9)


@settings(max_examples=25)
@given(screens)
def test_energy_bound(s):
    assert db(edge_field(s, TX, RX)) <= 1.5


@settings(max_examples=25)
@given(screens)
def test_path_coefficients_bounded(s):
    for p in edge_field_detail(s, TX, RX).paths:
        assert abs(p.coeff) <= 1.0 + 1e-12


def ripple_bound_db(nu):
    # |D(nu)| <= 1/(pi sqrt(2) |nu|) for nu << 0, and at most two edges face the LoS
    return 20 * np.log10(1 + 2 / (np.pi * np.sqrt(2) * abs(nu)))


@pytest.mark.parametrize("off", [0.11, 0.15, 0.25, 0.5])
def test_lit_ripple_within_analytic_bound(off):
    s = box_screen(PLANE, (off, off + 0.5), (-0.85, 0.85))
    r = edge_field_detail(s, TX, RX)
    assert r.nu_min < -5
    assert abs(db(r.gain)) <= ripple_bound_db(r.nu_min)
    assert abs(db(r.gain) - db(po_field_oracle(s, TX, RX))) <= 0.1
