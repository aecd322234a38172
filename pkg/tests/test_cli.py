import hashlib
import json

import numpy as np
import pytest

from thzsim.cli import EXIT_CONFIG, EXIT_OK, EXIT_VALIDATION, load_schema, main
from thzsim.hbs.io import write_frames_csv, write_ply
from thzsim.hbs.phantoms import cylinder_phantom, rigid_frames


def digests(d):
    return {p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in sorted(d.iterdir())}


def run(tmp_path, name, *args):
    out = tmp_path / name
    return main([*args, "--out", str(out)]), out


QD = ["--set", "preset=corridor", "--set", 'seeds={"start":0,"count":40}']


def test_schema_is_valid_draft():
    import jsonschema

    jsonschema.Draft202012Validator.check_schema(load_schema())


def test_qd_stats_artifacts_and_manifest(tmp_path):
    rc, out = run(tmp_path, "a", "qd_stats", *QD)
    assert rc == EXIT_OK
    names = {p.name for p in out.iterdir()}
    assert {"pdp.csv", "summary.json", "manifest.json", "cdf_rms_delay_spread_ns.csv"} <= names
    man = json.loads((out / "manifest.json").read_text())
    for name, sha in man["artifacts"].items():
        assert hashlib.sha256((out / name).read_bytes()).hexdigest() == sha
    assert man["config"]["preset"] == "corridor" and "out" not in man["config"]


@pytest.mark.parametrize(
    "mode,args",
    [
        ("qd_gen", ["--set", "preset=conference_medium", "--set", "seeds=[3,4]"]),
        ("qd_stats", QD),
        ("mimo_cap", ["--set", "preset=open_square", "--set", 'seeds={"start":0,"count":10}']),
        ("hbs_run", ["--set", 'frames={"source":"cylinder","duration_s":0.02,"start_xy":[1.75,-0.4]}']),
    ],
)
def test_rerun_is_byte_identical(tmp_path, mode, args):
    rc1, o1 = run(tmp_path, "one", mode, *args)
    rc2, o2 = run(tmp_path, "two", mode, *args, "--jobs", "2")
    assert rc1 == rc2 == EXIT_OK
    assert digests(o1) == digests(o2)


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"mode": "qd_stats", "preset": "open_square", "seeds": [1, 2, 3]}))
    rc, out = run(tmp_path, "o", "--config", str(cfg), "--set", "floor_db=-25")
    assert rc == EXIT_OK
    assert json.loads((out / "manifest.json").read_text())["config"]["floor_db"] == -25


def test_unknown_key_rejected(tmp_path, capsys):
    rc, out = run(tmp_path, "o", "qd_stats", *QD, "--set", "colour=1")
    assert rc == EXIT_CONFIG and not out.exists()
    diag = json.loads(capsys.readouterr().err)
    assert diag["status"] == "config_error" and "colour" in diag["errors"][0]["message"]


def test_missing_required_field(tmp_path):
    rc, out = run(tmp_path, "o", "mimo_cap", "--set", "preset=corridor")
    assert rc == EXIT_CONFIG and not out.exists()


def test_mode_conflict(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"mode": "qd_gen", "preset": "corridor", "seeds": [1]}))
    assert run(tmp_path, "o", "qd_stats", "--config", str(cfg))[0] == EXIT_CONFIG


def test_bad_geometry_is_config_error(tmp_path):
    rc, out = run(tmp_path, "o", "qd_gen", *QD, "--set", "tx=[1e6,0,0]")
    assert rc == EXIT_CONFIG and not out.exists()


def test_validate_passes(tmp_path):
    rc, out = run(tmp_path, "o", "validate")
    assert rc == EXIT_OK
    assert json.loads((out / "validation.json").read_text())["pass"] is True


def test_validation_failure_exit_code(tmp_path):
    rc, out = run(
        tmp_path, "o", "validate",
        "--set", 'validate={"suites":["oracle_agreement"],"n_silhouettes":3,"seed":1}',
        "--set", 'tolerances={"lit_db":1e-6,"transition_db":1e-6}',
    )
    assert rc == EXIT_VALIDATION
    assert (out / "oracle_agreement.csv").exists()


def test_hbs_from_csv_and_ply(tmp_path):
    frames = rigid_frames(cylinder_phantom((1.75, -0.4), spacing_m=0.02), (0, 1.0, 0), [0.0, 0.01, 0.02])
    write_frames_csv(tmp_path / "f.csv", frames)
    plydir = tmp_path / "ply"
    plydir.mkdir()
    for i, f in enumerate(frames):
        write_ply(plydir / f"f{i:02d}.ply", f.points, f.t_s)
    rc1, o1 = run(tmp_path, "csv", "hbs_run", "--set", f'frames={{"source":"csv","path":"{tmp_path / "f.csv"}"}}')
    rc2, o2 = run(tmp_path, "ply", "hbs_run", "--set", f'frames={{"source":"ply","path":"{plydir}"}}')
    assert rc1 == rc2 == EXIT_OK
    assert (o1 / "fading.csv").read_bytes() == (o2 / "fading.csv").read_bytes()
    head = (o1 / "fading.csv").read_text().splitlines()
    assert head[0] == "t_s,re,im,gain_db,lit_flag" and len(head) == 601


def test_missing_frames_file(tmp_path):
    rc, _ = run(tmp_path, "o", "hbs_run", "--set", 'frames={"source":"csv","path":"/nonexistent.csv"}')
    assert rc == EXIT_CONFIG


def test_hbs_doppler_outputs(tmp_path):
    rc, out = run(tmp_path, "o", "hbs_doppler", "--set", 'frames={"source":"cylinder","duration_s":0.05,"start_xy":[1.75,-0.5]}')
    assert rc == EXIT_OK
    rows = (out / "spectrogram.csv").read_text().splitlines()
    assert rows[0].startswith("freq_hz\\time_s,") and len(rows) == 1025


def test_out_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("THZSIM_OUT", str(tmp_path / "env"))
    assert main(["qd_gen", "--set", "preset=corridor", "--set", "seeds=[1]"]) == EXIT_OK
    assert (tmp_path / "env" / "cir_000001.csv").exists()


def test_rerun_into_existing_directory_replaces_files(tmp_path):
    rc, out = run(tmp_path, "o", "qd_gen", *QD)
    before = digests(out)
    rc, out = run(tmp_path, "o", "qd_gen", *QD)
    assert rc == EXIT_OK and digests(out) == before
    assert not [p for p in tmp_path.iterdir() if p.name.startswith(".o.")]
