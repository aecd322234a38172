"""Point-cloud input and fading/spectrogram output files.

Frames CSV
    Header ``t_s,point_id,x,y,z``; one row per point, rows of a frame share
    ``t_s``.  Frames are returned in time order.

PLY sequence
    One PLY file per frame (ASCII or binary little/big endian), read in file
    name order.  Only the ``vertex`` element's ``x``, ``y``, ``z`` properties
    are used; other elements and properties are skipped.  The frame time is
    taken from a header line ``comment t_s <seconds>`` when present, else from
    ``index / frame_rate_hz``.  Vertex order is the point identity.

Fading CSV
    ``t_s,re,im,gain_db,lit_flag``.

Spectrogram CSV
    First row ``freq_hz\\time_s`` followed by the frame times; each further
    row is a frequency followed by the STFT magnitudes.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .fading import FadingSeries, Spectrogram
from .screen import HumanFrame, ScreenError

FRAME_COLUMNS = ("t_s", "point_id", "x", "y", "z")
FADING_COLUMNS = ("t_s", "re", "im", "gain_db", "lit_flag")

_PLY_TYPES = {
    "char": "i1", "int8": "i1", "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2", "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4", "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4", "double": "f8", "float64": "f8",
}


def read_frames_csv(path) -> list[HumanFrame]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(c.strip() for c in reader.fieldnames) != FRAME_COLUMNS:
            raise ScreenError(f"frames CSV header must be {','.join(FRAME_COLUMNS)}")
        rows = [(float(r["t_s"]), int(r["point_id"]), float(r["x"]), float(r["y"]), float(r["z"])) for r in reader]
    if not rows:
        raise ScreenError("frames CSV has no rows")
    a = np.array(rows)
    frames = []
    for t in np.unique(a[:, 0]):
        sel = a[a[:, 0] == t]
        frames.append(HumanFrame(float(t), sel[:, 2:5], sel[:, 1].astype(np.int64)))
    return frames


def write_frames_csv(path, frames: list[HumanFrame]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FRAME_COLUMNS)
        for f in frames:
            ids = f.point_ids if f.point_ids is not None else np.arange(len(f.points))
            for pid, (x, y, z) in zip(ids.tolist(), f.points):
                w.writerow([repr(f.t_s), pid, repr(float(x)), repr(float(y)), repr(float(z))])


def _ply_header(fh):
    if fh.readline().strip() != b"ply":
        raise ScreenError("not a PLY file")
    fmt = None
    t_s = None
    elements = []  # (name, count, [(prop name, dtype or list spec)])
    while True:
        line = fh.readline()
        if not line:
            raise ScreenError("PLY header not terminated")
        parts = line.decode("ascii", "replace").split()
        if not parts:
            continue
        key = parts[0]
        if key == "format":
            fmt = parts[1]
        elif key == "comment" and len(parts) >= 3 and parts[1] == "t_s":
            t_s = float(parts[2])
        elif key == "element":
            elements.append((parts[1], int(parts[2]), []))
        elif key == "property":
            if parts[1] == "list":
                elements[-1][2].append((parts[4], ("list", _PLY_TYPES[parts[2]], _PLY_TYPES[parts[3]])))
            else:
                elements[-1][2].append((parts[2], _PLY_TYPES[parts[1]]))
        elif key == "end_header":
            return fmt, t_s, elements


def read_ply(path) -> tuple[np.ndarray, float | None]:
    """Vertex coordinates (N, 3) and the ``comment t_s`` time if present."""
    with open(path, "rb") as fh:
        fmt, t_s, elements = _ply_header(fh)
        body = fh.read()
    if fmt == "ascii":
        lines = iter([ln for ln in body.decode("ascii").splitlines() if ln.strip()])
        for name, count, props in elements:
            rows = []
            for _ in range(count):
                vals = next(lines).split()
                if name == "vertex":
                    names = [p[0] for p in props]
                    rows.append([float(vals[names.index(c)]) for c in ("x", "y", "z")])
            if name == "vertex":
                return np.array(rows, dtype=float).reshape(-1, 3), t_s
        raise ScreenError("PLY file has no vertex element")
    order = {"binary_little_endian": "<", "binary_big_endian": ">"}.get(fmt)
    if order is None:
        raise ScreenError(f"unsupported PLY format {fmt!r}")
    offset = 0
    for name, count, props in elements:
        if any(isinstance(p[1], tuple) for p in props):
            if name == "vertex":
                raise ScreenError("list properties on vertices are not supported")
            # variable-length rows must be walked one by one
            for _ in range(count):
                for _, spec in props:
                    if isinstance(spec, tuple):
                        n = int(np.frombuffer(body, order + spec[1], 1, offset)[0])
                        offset += np.dtype(spec[1]).itemsize + n * np.dtype(spec[2]).itemsize
                    else:
                        offset += np.dtype(spec).itemsize
            continue
        dt = np.dtype([(p[0], order + p[1]) for p in props])
        if name == "vertex":
            rec = np.frombuffer(body, dt, count, offset)
            return np.stack([rec["x"], rec["y"], rec["z"]], axis=-1).astype(float), t_s
        offset += count * dt.itemsize
    raise ScreenError("PLY file has no vertex element")


def read_ply_sequence(paths, frame_rate_hz: float | None = None) -> list[HumanFrame]:
    """Frames from PLY files (a directory or an iterable of paths), sorted by name."""
    if isinstance(paths, (str, Path)) and Path(paths).is_dir():
        files = sorted(Path(paths).glob("*.ply"))
    else:
        files = sorted(Path(p) for p in paths)
    if not files:
        raise ScreenError("no PLY files")
    frames = []
    for i, f in enumerate(files):
        pts, t = read_ply(f)
        if t is None:
            if frame_rate_hz is None:
                raise ScreenError(f"{f.name} has no 'comment t_s' and no frame rate was given")
            t = i / frame_rate_hz
        frames.append(HumanFrame(t, pts, np.arange(len(pts))))
    return frames


def write_ply(path, points: np.ndarray, t_s: float | None = None) -> None:
    """ASCII PLY with a ``comment t_s`` line."""
    pts = np.asarray(points, dtype=float)
    with open(path, "w") as fh:
        fh.write("ply\nformat ascii 1.0\n")
        if t_s is not None:
            fh.write(f"comment t_s {float(t_s)!r}\n")
        fh.write(f"element vertex {len(pts)}\nproperty double x\nproperty double y\nproperty double z\nend_header\n")
        for x, y, z in pts:
            fh.write(f"{float(x)!r} {float(y)!r} {float(z)!r}\n")


def _fmt(x: float) -> str:
    return format(float(x), ".10g")


def write_fading_csv(path_or_fh, series: FadingSeries) -> None:
    own = isinstance(path_or_fh, (str, Path))
    fh = open(path_or_fh, "w", newline="") if own else path_or_fh
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FADING_COLUMNS)
        for t, z, db, lit in zip(series.times, series.samples, series.gain_db, series.lit):
            w.writerow([_fmt(t), _fmt(z.real), _fmt(z.imag), _fmt(db), int(lit)])
    finally:
        if own:
            fh.close()


def read_fading_csv(path, fs_hz: float | None = None) -> FadingSeries:
    a = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    t = a[:, 0]
    fs = fs_hz if fs_hz is not None else (1.0 / np.median(np.diff(t)) if len(t) > 1 else 1.0)
    return FadingSeries(float(fs), a[:, 1] + 1j * a[:, 2], float(t[0]), a[:, 4].astype(bool))


def write_spectrogram_csv(path_or_fh, spec: Spectrogram) -> None:
    own = isinstance(path_or_fh, (str, Path))
    fh = open(path_or_fh, "w", newline="") if own else path_or_fh
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["freq_hz\\time_s"] + [_fmt(t) for t in spec.times_s])
        for f, row in zip(spec.freqs_hz, spec.magnitude):
            w.writerow([_fmt(f)] + [_fmt(x) for x in row])
    finally:
        if own:
            fh.close()
