import struct

import numpy as np
import pytest

from thzsim.hbs.fading import FadingSeries, Spectrogram
from thzsim.hbs.io import (
    read_fading_csv,
    read_frames_csv,
    read_ply,
    read_ply_sequence,
    write_fading_csv,
    write_frames_csv,
    write_ply,
    write_spectrogram_csv,
)
from thzsim.hbs.screen import HumanFrame, ScreenError


def test_frames_csv_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    frames = [HumanFrame(t, rng.normal(size=(5, 3)), np.arange(5)[::-1]) for t in (0.0, 0.1, 0.2)]
    write_frames_csv(tmp_path / "f.csv", frames)
    back = read_frames_csv(tmp_path / "f.csv")
    assert [f.t_s for f in back] == [0.0, 0.1, 0.2]
    for a, b in zip(frames, back):
        assert np.array_equal(a.points, b.points) and np.array_equal(a.point_ids, b.point_ids)


def test_frames_csv_bad_header(tmp_path):
    (tmp_path / "f.csv").write_text("t,id,x,y,z\n0,0,0,0,0\n")
    with pytest.raises(ScreenError):
        read_frames_csv(tmp_path / "f.csv")


def test_ply_ascii_round_trip(tmp_path):
    pts = np.random.default_rng(1).normal(size=(7, 3))
    write_ply(tmp_path / "a.ply", pts, 0.25)
    got, t = read_ply(tmp_path / "a.ply")
    assert t == 0.25 and np.array_equal(got, pts)


def _binary_ply(path, pts, order):
    head = (
        "ply\nformat binary_%s_endian 1.0\nelement vertex %d\n"
        "property float x\nproperty float y\nproperty float z\nproperty uchar red\n"
        "element face 1\nproperty list uchar int vertex_indices\nend_header\n"
    ) % ("little" if order == "<" else "big", len(pts))
    body = b"".join(struct.pack(order + "fffB", *p, 7) for p in pts)
    body += struct.pack(order + "Biii", 3, 0, 1, 2)
    path.write_bytes(head.encode() + body)


@pytest.mark.parametrize("order", ["<", ">"])
def test_ply_binary(tmp_path, order):
    pts = np.arange(12, dtype=np.float32).reshape(4, 3)
    _binary_ply(tmp_path / "b.ply", pts, order)
    got, t = read_ply(tmp_path / "b.ply")
    assert t is None and np.array_equal(got, pts)


def test_ply_sequence_uses_frame_rate(tmp_path):
    for i in range(3):
        write_ply(tmp_path / f"f{i:03d}.ply", np.full((2, 3), float(i)))
    frames = read_ply_sequence(tmp_path, frame_rate_hz=100.0)
    assert [f.t_s for f in frames] == [0.0, 0.01, 0.02]
    with pytest.raises(ScreenError):
        read_ply_sequence(tmp_path)


def test_fading_csv_round_trip(tmp_path):
    s = FadingSeries(1000.0, np.array([1.0, 0.5j, 0.25 - 0.1j]), 0.5, np.array([True, False, True]))
    write_fading_csv(tmp_path / "s.csv", s)
    assert (tmp_path / "s.csv").read_text().splitlines()[0] == "t_s,re,im,gain_db,lit_flag"
    back = read_fading_csv(tmp_path / "s.csv")
    assert np.allclose(back.samples, s.samples, rtol=1e-9) and np.array_equal(back.lit, s.lit)
    assert back.fs_hz == pytest.approx(1000.0) and back.t0 == 0.5


def test_spectrogram_csv(tmp_path):
    sp = Spectrogram(np.array([-1.0, 0.0, 1.0]), np.array([0.1, 0.2]), np.arange(6.0).reshape(3, 2))
    write_spectrogram_csv(tmp_path / "p.csv", sp)
    rows = [r.split(",") for r in (tmp_path / "p.csv").read_text().splitlines()]
    assert rows[0] == ["freq_hz\\time_s", "0.1", "0.2"]
    assert rows[2] == ["0", "2", "3"]
