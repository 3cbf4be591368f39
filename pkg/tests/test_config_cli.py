import os

import pytest

from flowseg.cli import main
from flowseg.config import (ConfigError, build_config, config_lines,
                            load_config, parse_assignments)


def test_build_config_defaults():
    cfg = build_config()
    assert cfg.flow_plane.n == 20
    assert cfg.track_plane.m_grid == 3
    assert cfg.maintenance_period == 1000


def test_build_config_overrides():
    cfg = build_config({"flow_plane.n": "40",
                        "track_plane.h0_deg": "0.05",
                        "engine.maintenance_period": "500"})
    assert cfg.flow_plane.n == 40
    assert cfg.track_plane.h0_deg == 0.05
    assert cfg.maintenance_period == 500


def test_build_config_rejects_bad_keys():
    with pytest.raises(ConfigError):
        build_config({"n": "40"})                     # no section
    with pytest.raises(ConfigError):
        build_config({"flow_plane.bogus": "1"})
    with pytest.raises(ConfigError):
        build_config({"rocket.n": "1"})
    with pytest.raises(ConfigError):
        build_config({"flow_plane.n": "twenty"})
    with pytest.raises(ConfigError):
        build_config({"flow_plane.n": "1"})           # fails validation


def test_parse_assignments():
    assert parse_assignments(["a.b=1", " c.d = 2 "]) == {"a.b": "1", "c.d": "2"}
    with pytest.raises(ConfigError):
        parse_assignments(["oops"])


def test_load_config_round_trips(tmp_path):
    cfg = build_config({"flow_plane.v_ref": "80.0",
                        "track_plane.evolve_threshold": "7"})
    path = tmp_path / "run.cfg"
    path.write_text("# comment line\n" + "\n".join(config_lines(cfg)) + "\n")
    loaded = load_config(str(path))
    assert loaded == cfg
    overridden = load_config(str(path), ["flow_plane.v_ref=120"])
    assert overridden.flow_plane.v_ref == 120.0


def run_cli(*argv):
    return main(list(argv))


@pytest.fixture(scope="module")
def synth_files(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    events = str(root / "events.txt")
    gt = str(root / "gt.txt")
    code = run_cli(
        "synth", "--out", events, "--gt", gt,
        "--object", "shape=hexagon,width=50,cx=60,cy=90,vu=57,vv=8",
        "--duration", "1.0", "--noise-rate", "300", "--burst-size", "2",
        "--seed", "23")
    assert code == 0
    return root, events, gt


def test_cli_run_eval_render_bench(tmp_path, synth_files, capsys):
    _, events, gt = synth_files
    labeled = str(tmp_path / "labeled.txt")
    manifest = str(tmp_path / "manifest.txt")
    assert run_cli("run", events, "--out", labeled,
                   "--manifest", manifest,
                   "--set", "flow_plane.p_stable=250") == 0
    assert os.path.exists(labeled)
    assert "config.flow_plane.p_stable=250" in open(manifest).read()

    assert run_cli("eval", "--labeled", labeled, "--gt", gt) == 0
    out = capsys.readouterr().out
    assert "labeled_coverage=" in out
    assert "magnitude" in out

    frames = str(tmp_path / "frames")
    assert run_cli("render", "--labeled", labeled, "--out-dir", frames,
                   "--mode", "flow") == 0
    assert any(name.endswith(".ppm") for name in os.listdir(frames))

    assert run_cli("bench", events) == 0
    assert "rate=" in capsys.readouterr().out


def test_cli_lk(tmp_path, synth_files):
    _, events, _ = synth_files
    out = str(tmp_path / "lk.txt")
    assert run_cli("lk", events, "--out", out) == 0
    assert os.path.exists(out)


def test_cli_render_empty_is_ok(tmp_path, capsys):
    empty = tmp_path / "empty.txt"
    empty.write_text("# t u v s segment v_u v_v\n")
    frames = str(tmp_path / "frames")
    assert run_cli("render", "--labeled", str(empty),
                   "--out-dir", frames) == 0
    assert "wrote 0 frames" in capsys.readouterr().out


def test_cli_error_codes(tmp_path):
    assert run_cli("synth", "--definitely-not-a-flag") == 1
    assert run_cli() == 1
    assert run_cli("run", str(tmp_path / "missing.txt"),
                   "--out", str(tmp_path / "x.txt")) == 2
    bad = tmp_path / "bad.txt"
    bad.write_text("not an event line\n")
    assert run_cli("run", str(bad), "--out", str(tmp_path / "y.txt")) == 2
    events = tmp_path / "tiny.txt"
    events.write_text("geometry 240 180\n100 5 5 1\n")
    assert run_cli("run", str(events), "--out", str(tmp_path / "z.txt"),
                   "--set", "flow_plane.n=0") == 2


def test_cli_object_spec_errors(tmp_path):
    out = str(tmp_path / "events.txt")
    assert run_cli("synth", "--out", out, "--object", "shape=triangle,width=5",
                   "--duration", "0.5") == 2
    assert run_cli("synth", "--out", out, "--object", "shape=circle",
                   "--duration", "0.5") == 2
    assert run_cli("synth", "--out", out,
                   "--object", "shape=circle,radius=5,warp=9",
                   "--duration", "0.5") == 2
