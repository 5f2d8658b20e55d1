import csv
import json
import re

import numpy as np
import pytest

from beliefmap.cli import EXIT_DATA, EXIT_OK, EXIT_USAGE, main
from beliefmap.engine import Trajectory
from beliefmap.mapper import build_graph, fr_layout, write_json
from beliefmap.records import trajectory_meta, write_trajectories

from conftest import GOLDEN

SMALL = """\
dims = 2
half_extent = 10.0
cells_per_axis = 20
label_seed = 0
steps = 500
record_every = 10
master_seed = 7

[[groups]]
name = "nomad"
count = 8
sih = 0.0

[[groups]]
name = "flock"
count = 8
sih = 2.0

[[groups]]
name = "stampede"
count = 8
sih = "inf"
"""

GROUPS = ("nomad", "flock", "stampede")


@pytest.fixture
def small_config(tmp_path):
    path = tmp_path / "small.toml"
    path.write_text(SMALL)
    return path


@pytest.fixture
def small_run(tmp_path, small_config):
    out = tmp_path / "sim"
    assert main(["simulate", str(small_config), "--out", str(out)]) == EXIT_OK
    return out


def files(run_dir):
    return [str(run_dir / f"trajectories_{g}.csv") for g in GROUPS]


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# ---------------------------------------------------------------- simulate


def test_simulate_writes_files_and_manifest(small_run):
    manifest = json.loads((small_run / "manifest.json").read_text())
    expected = sorted(["config.toml"] + [f"trajectories_{g}.csv" for g in GROUPS])
    assert manifest["artifacts"] == expected
    for name in expected:
        assert (small_run / name).is_file()
    assert re.fullmatch(r"[0-9a-f]{16}", manifest["run_id"])
    assert manifest["config_digest"].startswith(manifest["run_id"])


def test_simulate_is_reproducible(tmp_path, small_config, small_run):
    again = tmp_path / "again"
    assert main(["simulate", str(small_config), "--out", str(again), "--workers", "3"]) == EXIT_OK
    for name in json.loads((small_run / "manifest.json").read_text())["artifacts"] + ["manifest.json"]:
        assert (small_run / name).read_bytes() == (again / name).read_bytes()


def test_simulate_reports_bad_key(tmp_path, capsys):
    path = tmp_path / "bad.toml"
    path.write_text(SMALL.replace("steps = 500", "steps = 0"))
    assert main(["simulate", str(path), "--out", str(tmp_path / "o")]) == EXIT_USAGE
    assert "steps" in capsys.readouterr().err
    path.write_text(SMALL + "\ncolour = 1\n")
    assert main(["simulate", str(path), "--out", str(tmp_path / "o")]) == EXIT_USAGE
    assert "colour" in capsys.readouterr().err


def test_usage_errors_exit_one(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["simulate"])
    assert exc.value.code == EXIT_USAGE
    with pytest.raises(SystemExit) as exc:
        main(["render", "x.json", "--style", "sparkle", "--out", str(tmp_path / "o.svg")])
    assert exc.value.code == EXIT_USAGE


# ---------------------------------------------------------------- analyze


def test_analyze_outputs(tmp_path, small_run):
    out = tmp_path / "an"
    assert main(["analyze", *files(small_run), "--out", str(out), "--matrix"]) == EXIT_OK
    rows = read_rows(out / "profile.csv")
    assert len(rows) == 24
    assert {r["phase"] for r in rows} <= {"Nomadic", "Flocking", "Stampede"}
    summary = read_rows(out / "phase_summary.csv")
    assert [r["group"] for r in summary] == list(GROUPS)
    assert all(sum(int(r[p]) for p in ("Nomadic", "Flocking", "Stampede")) == 8 for r in summary)
    m = np.array([[float(v) for v in r[1:]] for r in csv.reader(open(out / "matrix.csv"))][1:])
    assert np.array_equal(m, m.T) and not np.diag(m).any()


def one_agent_file(path, aid, positions, stride=10):
    positions = np.asarray(positions, dtype=float)
    t = Trajectory(aid, "g", 0.0, np.arange(len(positions), dtype=np.int64) * stride, positions,
                   ["a"] * len(positions))
    meta = {"run_id": "r", "config_digest": "d", "group": "g", "dims": positions.shape[1],
            "half_extent": 10.0, "cells_per_axis": 20, "label_seed": 0, "dt": 0.1, "record_every": stride}
    write_trajectories(path, [t], meta)
    return str(path)


def test_analyze_identical_files(tmp_path):
    pos = [[0.0, 0.0], [1.0, 0.5], [2.0, 1.0]]
    a = one_agent_file(tmp_path / "a.csv", 0, pos)
    b = one_agent_file(tmp_path / "b.csv", 1, pos)
    out = tmp_path / "an"
    assert main(["analyze", a, b, "--out", str(out), "--thresholds", "1,2"]) == EXIT_OK
    assert [float(r["mean_dtw"]) for r in read_rows(out / "profile.csv")] == [0.0, 0.0]


def test_analyze_data_errors(tmp_path, capsys):
    a = one_agent_file(tmp_path / "a.csv", 0, np.zeros((10, 2)))
    b = one_agent_file(tmp_path / "b.csv", 1, np.zeros((3, 2)))
    c = one_agent_file(tmp_path / "c.csv", 2, np.zeros((3, 3)))
    out = str(tmp_path / "an")
    assert main(["analyze", a, b, "--out", out, "--window", "2", "--thresholds", "1,2"]) == EXIT_DATA
    assert "band" in capsys.readouterr().err
    assert main(["analyze", a, c, "--out", out]) == EXIT_DATA
    assert main(["analyze", a, "--out", out]) == EXIT_DATA
    assert main(["analyze", a, b, "--out", out]) == EXIT_DATA  # auto needs three agents
    assert main(["analyze", a, b, "--out", out, "--thresholds", "5"]) == EXIT_USAGE
    assert main(["analyze", str(tmp_path / "missing.csv"), "--out", out]) == EXIT_DATA


@pytest.mark.slow
def test_analyze_reference_run_separates_groups(tmp_path, reference_run, reference_config):
    paths = []
    for g, trajs in reference_run.items():
        p = tmp_path / f"trajectories_{g}.csv"
        write_trajectories(p, trajs, trajectory_meta(reference_config, g))
        paths.append(str(p))
    out = tmp_path / "an"
    assert main(["analyze", *paths, "--out", str(out), "--workers", "4"]) == EXIT_OK
    summary = {r["group"]: r for r in read_rows(out / "phase_summary.csv")}
    expected = {"nomad": "Nomadic", "flock": "Flocking", "stampede": "Stampede"}
    for g, phase in expected.items():
        assert int(summary[g][phase]) == 100


# ---------------------------------------------------------------- map


def test_map_three_groups(tmp_path, small_run):
    out = tmp_path / "map"
    assert main(["map", *files(small_run), "--out", str(out)]) == EXIT_OK
    overlay = json.loads((out / "overlay.json").read_text())
    assert overlay["base_group"] == "nomad"
    assert overlay["groups"] == ["flock", "stampede"]
    for g in GROUPS:
        assert (out / f"graph_{g}.graphml").is_file()
    again = tmp_path / "map2"
    assert main(["map", *files(small_run), "--out", str(again)]) == EXIT_OK
    for name in ("overlay.graphml", "graph_flock.graphml", "overlay.svg"):
        assert (out / name).read_bytes() == (again / name).read_bytes()


def test_map_nomad_only(tmp_path, small_run):
    out = tmp_path / "map"
    assert main(["map", str(small_run / "trajectories_nomad.csv"), "--out", str(out)]) == EXIT_OK
    overlay = json.loads((out / "overlay.json").read_text())
    assert overlay["groups"] == []
    assert sorted(p.name for p in out.glob("graph_*.graphml")) == ["graph_nomad.graphml"]


def test_map_errors(tmp_path, small_run):
    out = str(tmp_path / "map")
    assert main(["map", str(small_run / "trajectories_flock.csv"), "--out", out]) == EXIT_DATA
    assert main(["map", *files(small_run), "--out", out, "--cooling", "2"]) == EXIT_USAGE


# ---------------------------------------------------------------- render


def test_render_two_node_graph(tmp_path):
    t = Trajectory(0, "g", 0.0, np.arange(3, dtype=np.int64), np.zeros((3, 2)), ["A", "B", "B"])
    g = build_graph([t])
    g.layout = fr_layout(g)
    write_json(tmp_path / "g.json", g.to_dict())
    out = tmp_path / "g.svg"
    assert main(["render", str(tmp_path / "g.json"), "--style", "graph", "--out", str(out)]) == EXIT_OK
    svg = out.read_text()
    assert svg.count("<circle") == 2
    assert svg.count("<path") == 1


def test_render_overlay_legend(tmp_path, small_run):
    mp = tmp_path / "map"
    assert main(["map", *files(small_run), "--out", str(mp)]) == EXIT_OK
    out = tmp_path / "o.svg"
    assert main(["render", str(mp / "overlay.json"), "--style", "overlay", "--out", str(out)]) == EXIT_OK
    legend = out.read_text().split('<g id="legend">')[1].split("</g>")[0]
    assert re.findall(r">(\w+)</text>", legend) == ["nomad", "flock", "stampede"]
    assert main(["render", str(mp / "overlay.json"), "--style", "graph", "--out", str(out)]) == EXIT_DATA


def test_render_heatmap_golden(tmp_path, small_run):
    out = tmp_path / "h.svg"
    assert main(["render", *files(small_run), "--style", "heatmap", "--step", "0", "--out", str(out)]) == EXIT_OK
    assert out.read_bytes() == (GOLDEN / "heatmap_step0.svg").read_bytes()


def test_render_errors(tmp_path, small_run):
    out = str(tmp_path / "x.svg")
    assert main(["render", str(tmp_path / "nope.json"), "--style", "graph", "--out", out]) == EXIT_DATA
    assert main(["render", *files(small_run), "--style", "heatmap", "--step", "5", "--out", out]) == EXIT_DATA
