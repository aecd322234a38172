"""Command-line front end: ``thzsim MODE --config cfg.json [--set k=v] [--out dir] [--jobs N]``.

Every run validates its config against the shipped JSON schema, computes all
artifacts in memory, writes them to a temporary directory next to the output
directory and moves them into place only when the run finished.  A
``manifest.json`` records the toolkit version, the config hash and the
SHA-256 of every artifact.  Nothing in the outputs depends on wall-clock time,
so identical config and seeds give byte-identical files.

Exit codes: 0 success, 2 config or input error, 3 numerical-validation failure.
"""

from __future__ import annotations

import argparse
import hashlib
import io
import json
import os
import shutil
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from . import channel_stats as cs
from . import mimo
from . import qd_channel as qd
from .geometry import GeometryError
from .hbs import fading, io as hbs_io, phantoms, validation
from .hbs.po_oracle import OracleConvergenceError
from .hbs.screen import HumanFrame, ScreenError

MODES = ("qd_gen", "qd_stats", "mimo_cap", "hbs_run", "hbs_doppler", "validate")
OUT_ENV = "THZSIM_OUT"
DEFAULT_OUT = "thzsim_out"
EXIT_OK, EXIT_CONFIG, EXIT_VALIDATION = 0, 2, 3

HBS_TX = (0.0, 0.0, 1.0)
HBS_RX = (3.5, 0.0, 1.0)
DEFAULT_SUITES = ("knife_edge", "free_space", "babinet")


class ConfigError(Exception):
    def __init__(self, message, errors=None):
        super().__init__(message)
        self.errors = errors or [{"path": "", "message": message}]


class ValidationFailure(Exception):
    pass


# -- config -------------------------------------------------------------------------


def load_schema() -> dict:
    return json.loads(resources.files("thzsim.schema").joinpath("config.schema.json").read_text())


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(cfg: dict, sets: list[str]) -> dict:
    """Apply ``dotted.key=value`` overrides; values are parsed as JSON when possible."""
    cfg = json.loads(json.dumps(cfg))
    for item in sets:
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        node = cfg
        parts = key.split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(f"--set {key}: {p!r} is not an object")
        node[parts[-1]] = _parse_value(value)
    return cfg


def validate_config(cfg: dict) -> None:
    validator = jsonschema.Draft202012Validator(load_schema())
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        raise ConfigError(
            "config does not match the schema",
            [{"path": "/".join(str(p) for p in e.absolute_path), "message": e.message} for e in errors],
        )


def config_hash(cfg: dict) -> str:
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def resolve_seeds(spec) -> list[int]:
    if isinstance(spec, dict):
        return list(range(spec["start"], spec["start"] + spec["count"]))
    return [int(s) for s in spec]


# -- parallel helpers ---------------------------------------------------------------


def _chunks(seq, n):
    k = max(1, -(-len(seq) // n))
    return [seq[i : i + k] for i in range(0, len(seq), k)]


def _pmap(fn, items, jobs):
    """Ordered map; results are merged in input order whatever the job count."""
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items))


def _ensemble_chunk(args):
    preset, seeds, tx, rx = args
    return qd.cir_ensemble(preset, seeds, tx, rx)


def _ensemble(cfg, jobs):
    try:
        preset = qd.load_preset(cfg["preset"])
    except (OSError, json.JSONDecodeError, TypeError, KeyError) as exc:
        raise ConfigError(f"cannot load preset {cfg['preset']!r}: {exc}") from exc
    tx = tuple(cfg.get("tx", preset.default_tx))
    rx = tuple(cfg.get("rx", preset.default_rx))
    seeds = resolve_seeds(cfg["seeds"])
    parts = _pmap(_ensemble_chunk, [(preset, c, tx, rx) for c in _chunks(seeds, max(jobs, 1))], jobs)
    return preset, seeds, [c for part in parts for c in part]


def _json_bytes(doc) -> bytes:
    return (json.dumps(doc, indent=2, sort_keys=True) + "\n").encode()


# -- modes ------------------------------------------------------------------------


def run_qd_gen(cfg, jobs):
    preset, seeds, cirs = _ensemble(cfg, jobs)
    out = {f"cir_{s:06d}.csv": qd.cir_to_csv(c).encode() for s, c in zip(seeds, cirs)}
    out["cirs.json"] = _json_bytes({"preset": preset.name, "cirs": [qd.cir_to_json(c) for c in cirs]})
    return out, True


def run_qd_stats(cfg, jobs):
    preset, seeds, cirs = _ensemble(cfg, jobs)
    floor = cfg.get("floor_db", cs.DEFAULT_FLOOR_DB)
    width = cfg.get("bin_width_ns", 1.0)
    pdps = [cs.omni_pdp(c, width) for c in cirs]
    stats = [cs.cluster_stats(c) for c in cirs]
    rel = [p for s in stats for p in s.relative_powers_db if p != 0.0]
    summary = cs.ensemble_summary(cirs, floor, width)
    summary["preset"] = preset.name
    summary["seeds"] = {"first": seeds[0], "last": seeds[-1], "count": len(seeds)}
    out = {
        "pdp.csv": cs.pdp_csv(cs.mean_pdp(cirs, width)).encode(),
        "cdf_rms_delay_spread_ns.csv": cs.cdf_csv([cs.rms_delay_spread(p, floor) for p in pdps]).encode(),
        "cdf_max_excess_delay_ns.csv": cs.cdf_csv([cs.max_excess_delay(p, floor) for p in pdps]).encode(),
        "cdf_cluster_count.csv": cs.cdf_csv([s.count for s in stats]).encode(),
        "cdf_cluster_power_db.csv": cs.cdf_csv(rel if rel else [float("nan")]).encode(),
        "summary.json": _json_bytes(summary),
    }
    return out, True


def _capacity_chunk(args):
    cirs, m = args
    rows = []
    for c in cirs:
        for prs in m["prs_states"]:
            h = mimo.apply_prs(c) if prs else c
            rows.append((c.rng_seed, m["snr_db"], prs, mimo.beam_capacity(h, m["n_beams"], m["snr_db"], m["hpbw_deg"], m["waterfilling"])))
    return rows


def run_mimo_cap(cfg, jobs):
    preset, seeds, cirs = _ensemble(cfg, 1)
    m = {"n_beams": 4, "snr_db": 20.0, "hpbw_deg": mimo.DEFAULT_HPBW_DEG, "prs": "both", "waterfilling": False}
    m.update(cfg.get("mimo", {}))
    m["prs_states"] = {"off": (False,), "all": (True,), "both": (False, True)}[m["prs"]]
    rows = [r for part in _pmap(_capacity_chunk, [(c, m) for c in _chunks(cirs, max(jobs, 1))], jobs) for r in part]
    summary = {"preset": preset.name, "n_beams": m["n_beams"], "snr_db": m["snr_db"], "hpbw_deg": m["hpbw_deg"]}
    for prs in m["prs_states"]:
        summary["prs_all" if prs else "no_prs"] = mimo.capacity_summary([r[3] for r in rows if r[2] == prs])
    return {"capacity.csv": mimo.capacity_rows_csv(rows).encode(), "summary.json": _json_bytes(summary)}, True


def load_frames(spec: dict) -> list[HumanFrame]:
    src = spec["source"]
    rate = spec.get("frame_rate_hz", 120.0)
    try:
        if src == "csv":
            return hbs_io.read_frames_csv(spec["path"])
        if src == "ply":
            return hbs_io.read_ply_sequence(spec["path"], spec.get("frame_rate_hz"))
    except OSError as exc:
        raise ConfigError(f"cannot read frames: {exc}") from exc
    start = tuple(spec.get("start_xy", (1.75, -1.0)))
    vel = tuple(spec.get("velocity_xy", (0.0, 1.0)))
    dur = spec.get("duration_s", 2.0)
    spacing = spec.get("spacing_m", phantoms.DEFAULT_SPACING_M)
    if src == "walker":
        return phantoms.walk_frames(start, vel, dur, rate, spacing_m=spacing)
    times = np.arange(int(np.floor(dur * rate + 1e-9)) + 1) / rate
    pts = phantoms.cylinder_phantom(start, spacing_m=spacing)
    return phantoms.rigid_frames(pts, (vel[0], vel[1], 0.0), times)


def _series(cfg):
    h = cfg.get("hbs", {})
    tx = cfg.get("tx", HBS_TX)
    rx = cfg.get("rx", HBS_RX)
    frames = load_frames(cfg["frames"])
    s = fading.fading_series(
        frames,
        tx,
        rx,
        h.get("f_hz", qd.CARRIER_HZ),
        h.get("model", "human_shaped"),
        h.get("fs_hz", fading.FS_HZ),
        h.get("screen_rate_hz", fading.DEFAULT_SCREEN_RATE_HZ),
        h.get("pitch_m", 0.01),
    )
    return s


def _series_summary(s: fading.FadingSeries) -> dict:
    db = s.gain_db
    return {
        "n_samples": len(s.samples),
        "fs_hz": s.fs_hz,
        "t0_s": s.t0,
        "lit_fraction": float(np.mean(s.lit)),
        "min_gain_db": float(np.min(db)),
        "max_gain_db": float(np.max(db)),
        "meta": s.meta,
    }


def run_hbs_run(cfg, jobs):
    s = _series(cfg)
    buf = io.StringIO()
    hbs_io.write_fading_csv(buf, s)
    return {"fading.csv": buf.getvalue().encode(), "summary.json": _json_bytes(_series_summary(s))}, True


def run_hbs_doppler(cfg, jobs):
    s = _series(cfg)
    try:
        spec = fading.doppler_spectrogram(s)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    out = {}
    buf = io.StringIO()
    hbs_io.write_fading_csv(buf, s)
    out["fading.csv"] = buf.getvalue().encode()
    buf = io.StringIO()
    hbs_io.write_spectrogram_csv(buf, spec)
    out["spectrogram.csv"] = buf.getvalue().encode()
    trace = spec.doppler_trace()
    lines = ["t_s,doppler_hz"] + [f"{t:.10g},{f:.10g}" for t, f in zip(spec.times_s, trace)]
    out["doppler_trace.csv"] = ("\n".join(lines) + "\n").encode()
    summ = _series_summary(s)
    summ["stft"] = {"window": fading.STFT_WINDOW, "overlap": fading.STFT_OVERLAP, "bin_hz": float(spec.freqs_hz[1] - spec.freqs_hz[0])}
    summ["doppler_range_hz"] = [float(trace.min()), float(trace.max())]
    out["summary.json"] = _json_bytes(summ)
    return out, True


def _agreement_chunk(args):
    cases, tx, rx, f_hz = args
    return validation.oracle_agreement(cases, tx, rx, f_hz)


def run_validate(cfg, jobs):
    v = cfg.get("validate", {})
    tol = cfg.get("tolerances", {})
    suites = v.get("suites", list(DEFAULT_SUITES))
    tx = cfg.get("tx", HBS_TX)
    rx = cfg.get("rx", HBS_RX)
    f_hz = cfg.get("hbs", {}).get("f_hz", qd.CARRIER_HZ)
    report = {}
    out = {}
    for name in suites:
        if name == "knife_edge":
            report[name] = validation.knife_edge_suite()
        elif name == "free_space":
            report[name] = validation.free_space_suite(tx, rx, f_hz)
        elif name == "babinet":
            report[name] = validation.babinet_suite(tx=tx, rx=rx, f_hz=f_hz)
        elif name == "oracle_agreement":
            cases = validation.random_silhouettes(v.get("n_silhouettes", 100), v.get("seed", 0), tx, rx)
            rows = [r for part in _pmap(_agreement_chunk, [(c, tx, rx, f_hz) for c in _chunks(cases, max(jobs, 1))], jobs) for r in part]
            summ = validation.summarize_agreement(rows)
            lit_tol = tol.get("lit_db", validation.LIT_TOL_DB)
            tr_tol = tol.get("transition_db", validation.TRANSITION_TOL_DB)
            for region, t in (("lit", lit_tol), ("transition", tr_tol)):
                summ[region]["tol_db"] = t
                summ[region]["pass"] = bool(summ[region]["max_abs_err_db"] <= t)
            summ["pass"] = summ["lit"]["pass"] and summ["transition"]["pass"]
            report[name] = summ
            lines = ["kind,nu_min,edge_db,po_db,error_db,fallback,region"]
            lines += [f"{r.kind},{r.nu_min:.10g},{r.edge_db:.10g},{r.po_db:.10g},{r.error_db:.10g},{int(r.fallback)},{r.region}" for r in rows]
            out["oracle_agreement.csv"] = ("\n".join(lines) + "\n").encode()
    ok = all(bool(r["pass"]) for r in report.values())
    report["pass"] = ok
    out["validation.json"] = _json_bytes(_plain(report))
    return out, ok


def _plain(x):
    """JSON-safe copy (numpy scalars to Python)."""
    if isinstance(x, dict):
        return {k: _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.generic):
        return x.item()
    return x


RUNNERS = {
    "qd_gen": run_qd_gen,
    "qd_stats": run_qd_stats,
    "mimo_cap": run_mimo_cap,
    "hbs_run": run_hbs_run,
    "hbs_doppler": run_hbs_doppler,
    "validate": run_validate,
}


# -- output -----------------------------------------------------------------------


def write_artifacts(out_dir: Path, artifacts: dict[str, bytes], cfg: dict) -> dict:
    """Write artifacts plus manifest via a sibling temp directory, then move them into place."""
    manifest = {
        "toolkit": "thzsim",
        "version": __version__,
        "mode": cfg["mode"],
        "config_sha256": config_hash(cfg),
        "config": cfg,
        "artifacts": {name: hashlib.sha256(data).hexdigest() for name, data in sorted(artifacts.items())},
    }
    files = dict(artifacts)
    files["manifest.json"] = _json_bytes(manifest)
    out_dir = out_dir.resolve()
    out_dir.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=f".{out_dir.name}.", dir=out_dir.parent))
    try:
        for name, data in files.items():
            (tmp / name).write_bytes(data)
        if not out_dir.exists():
            os.rename(tmp, out_dir)
        else:
            for name in files:
                os.replace(tmp / name, out_dir / name)
    finally:
        if tmp.exists():
            shutil.rmtree(tmp, ignore_errors=True)
    return manifest


def _diagnostic(kind: str, errors) -> None:
    sys.stderr.write(json.dumps({"status": kind, "errors": errors}, sort_keys=True) + "\n")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="thzsim", description="300 GHz channel and human-shadowing simulations.")
    p.add_argument("mode", nargs="?", choices=MODES, help="run mode (may instead be given in the config)")
    p.add_argument("--config", help="scenario JSON file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key (dotted path, JSON value)")
    p.add_argument("--out", help=f"output directory (default: config 'out', ${OUT_ENV}, or ./{DEFAULT_OUT})")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for seed-parallel work")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = {}
        if args.config:
            try:
                with open(args.config) as fh:
                    cfg = json.load(fh)
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"cannot read config: {exc}") from exc
            if not isinstance(cfg, dict):
                raise ConfigError("config must be a JSON object")
        cfg = apply_overrides(cfg, args.set)
        if args.mode:
            if cfg.get("mode", args.mode) != args.mode:
                raise ConfigError(f"mode {args.mode!r} conflicts with config mode {cfg['mode']!r}")
            cfg["mode"] = args.mode
        validate_config(cfg)
        if args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        out_dir = Path(args.out or cfg.pop("out", None) or os.environ.get(OUT_ENV) or DEFAULT_OUT)
        cfg.pop("out", None)
        try:
            artifacts, ok = RUNNERS[cfg["mode"]](cfg, args.jobs)
        except (ScreenError, GeometryError, qd.ChannelError, cs.StatsError, mimo.MimoError) as exc:
            raise ConfigError(str(exc)) from exc
        write_artifacts(out_dir, artifacts, cfg)
    except ConfigError as exc:
        _diagnostic("config_error", exc.errors)
        return EXIT_CONFIG
    except OracleConvergenceError as exc:
        _diagnostic("validation_failure", [{"path": "", "message": str(exc)}])
        return EXIT_VALIDATION
    if not ok:
        _diagnostic("validation_failure", [{"path": "", "message": f"see {out_dir / 'validation.json'}"}])
        return EXIT_VALIDATION
    print(json.dumps({"status": "ok", "out": str(out_dir), "artifacts": sorted(artifacts)}))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
