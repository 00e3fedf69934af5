from __future__ import annotations

import csv
import io
import json
import math
import os
import subprocess
import sys

import numpy as np
import pytest

from spherical_mds.cli import main
from spherical_mds.embedder import LayoutConfig, sgd_layout
from spherical_mds.geometry import SPHERICAL
from spherical_mds.graph_io import apsp, generate, serialize_matrix_market
from spherical_mds.harness import (
    COMPARE_COLUMNS,
    GraphSource,
    compare,
    dilation_sweep,
    sample_experiment,
    sweep_factors,
    synthetic_cities,
)
from spherical_mds.metrics import evaluate


def read_csv(path: str) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture
def cube_mtx(tmp_path):
    p = tmp_path / "cube.mtx"
    p.write_text(serialize_matrix_market(generate("cube")))
    return str(p)


def test_layout_writes_four_files(cube_mtx, tmp_path, capsys):
    out = tmp_path / "out"
    code = main(["layout", "--input", cube_mtx, "--geometry", "spherical", "--dilation", "heuristic",
                 "--svg", "ortho", "--out", str(out)])
    assert code == 0
    assert sorted(os.listdir(out)) == ["layout.json", "layout.svg", "report.csv", "trace.csv"]
    payload = json.loads((out / "layout.json").read_text())
    assert payload["geometry"] == SPHERICAL and len(payload["coords"]) == 8
    assert payload["dilation_factor"] == pytest.approx(math.pi / 3)
    report = read_csv(str(out / "report.csv"))
    assert report[0]["graph"] == "cube" and report[0]["n"] == "8"
    trace = read_csv(str(out / "trace.csv"))
    assert len(trace) >= 1
    assert "n=8" in capsys.readouterr().out


def test_subdivided_icosahedron_size(tmp_path, capsys):
    code = main(["layout", "--generate", "icosahedron", "--subdivide", "4", "--max-epochs", "5",
                 "--out", str(tmp_path)])
    assert code == 0
    # one round adds a vertex per edge: 12 + 30 * (2**4 - 1)
    assert "n=462" in capsys.readouterr().out
    assert len(json.loads((tmp_path / "layout.json").read_text())["coords"]) == 462


def test_missing_file_names_path(tmp_path, capsys):
    missing = str(tmp_path / "nope.mtx")
    code = main(["layout", "--input", missing, "--out", str(tmp_path)])
    assert code == 2
    assert missing in capsys.readouterr().err


@pytest.mark.parametrize("argv", [
    [],
    ["layout"],
    ["layout", "--generate", "cube", "--geometry", "flat"],
    ["layout", "--generate", "cube", "--dilation", "factor=-1"],
    ["frobnicate"],
    ["compare"],
])
def test_usage_errors_exit_one(argv, tmp_path, capsys):
    if argv and argv[0] == "layout" and len(argv) == 1:
        argv = argv + ["--out", str(tmp_path)]
    assert main(argv) == 1


def test_parse_error_exits_two(tmp_path, capsys):
    bad = tmp_path / "bad.mtx"
    bad.write_text("%%MatrixMarket matrix coordinate pattern symmetric\n3 3 1\n1 x\n")
    assert main(["layout", "--input", str(bad), "--out", str(tmp_path)]) == 2
    assert "line" in capsys.readouterr().err


def test_disconnected_exits_two(tmp_path, capsys):
    g = tmp_path / "two.txt"
    g.write_text("0 1\n2 3\n")
    assert main(["layout", "--input", str(g), "--out", str(tmp_path)]) == 2
    assert "disconnected" in capsys.readouterr().err


def test_stereographic_antipode_exits_three(tmp_path, capsys):
    assert main(["layout", "--generate", "cube", "--seed", "2", "--out", str(tmp_path)]) == 0
    phi, lam = json.loads((tmp_path / "layout.json").read_text())["coords"][0]
    # center the projection on the antipode of vertex 0
    center = f"{-phi!r},{lam + math.pi!r}"
    code = main(["layout", "--generate", "cube", "--seed", "2", "--svg", "stereo", f"--center={center}",
                 "--out", str(tmp_path)])
    assert code == 3
    assert "antipode" in capsys.readouterr().err


def test_layout_json_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert main(["layout", "--generate", "dodecahedron", "--seed", "7", "--svg", "equal-earth",
                     "--out", str(d)]) == 0
    assert (a / "layout.json").read_bytes() == (b / "layout.json").read_bytes()
    # elapsed time is the one column allowed to differ
    ta, tb = read_csv(str(a / "trace.csv")), read_csv(str(b / "trace.csv"))
    assert [(r["epoch"], r["stress"]) for r in ta] == [(r["epoch"], r["stress"]) for r in tb]
    assert (a / "layout.svg").read_bytes() == (b / "layout.svg").read_bytes()


def test_compare_rows_and_error_rows(tmp_path, capsys):
    code = main(["compare", "--generate", "cube", "--generate", "octahedron", "--input",
                 str(tmp_path / "missing.mtx"), "--repeats", "2", "--out", str(tmp_path)])
    assert code == 0
    rows = read_csv(str(tmp_path / "compare.csv"))
    assert tuple(rows[0].keys()) == COMPARE_COLUMNS
    assert len(rows) == 9
    bad = [r for r in rows if r["error"]]
    assert len(bad) == 3 and all(r["graph"] == "missing" for r in bad)
    good = [r for r in rows if not r["error"]]
    assert {(r["graph"], r["geometry"]) for r in good} == {
        (g, k) for g in ("cube", "octahedron") for k in ("euclidean", "spherical", "hyperbolic")}


def test_compare_repeat_one_matches_layout(tmp_path, capsys):
    dm = apsp(generate("cube"))
    cfg = LayoutConfig(seed=3)
    rows = compare([GraphSource(spec="cube")], cfg, repeats=1, geometries=[SPHERICAL])
    emb, trace = sgd_layout(dm, cfg)
    assert float(rows[0]["mean_distortion"]) == evaluate(emb, trace, dm).distortion
    assert main(["layout", "--generate", "cube", "--seed", "3", "--out", str(tmp_path)]) == 0
    payload = json.loads((tmp_path / "layout.json").read_text())
    assert payload["distortion"] == rows[0]["mean_distortion"]


def test_sweep_single_heuristic_factor_matches_layout():
    dm = apsp(generate("dodecahedron"))
    h = math.pi / dm.max()
    rows = dilation_sweep(dm, [h], LayoutConfig(seed=0))
    assert len(rows) == 1 and rows[0]["heuristic"] == 1
    emb, trace = sgd_layout(dm, LayoutConfig(seed=0, dilation_mode="heuristic"))
    assert rows[0]["mean_distortion"] == pytest.approx(evaluate(emb, trace, dm).distortion, rel=1e-12)


def test_sweep_marks_heuristic_and_large_factor_is_worse():
    dm = apsp(generate("dodecahedron"))
    h = math.pi / dm.max()
    rows = dilation_sweep(dm, [4.0 * h], LayoutConfig(seed=0))
    assert [r["heuristic"] for r in rows] == [1, 0]
    # diameter scaled to 4 pi cannot be realized
    assert rows[1]["mean_distortion"] > rows[0]["mean_distortion"]
    f = sweep_factors(dm, 20)
    assert len(f) == 20 and f[0] == pytest.approx(0.25 * h) and f[-1] == pytest.approx(4 * h)
    with pytest.raises(ValueError):
        dilation_sweep(dm, [0.0], LayoutConfig())


def test_sweep_cli(tmp_path, capsys):
    assert main(["dilation-sweep", "--generate", "cube", "--points", "4", "--out", str(tmp_path)]) == 0
    rows = read_csv(str(tmp_path / "dilation_sweep.csv"))
    # four sweep points plus the heuristic factor
    assert len(rows) == 5 and sum(int(r["heuristic"]) for r in rows) == 1
    assert main(["dilation-sweep", "--generate", "cube", "--points", "3", "--out", str(tmp_path)]) == 0
    rows = read_csv(str(tmp_path / "dilation_sweep.csv"))
    # an odd sweep already contains the heuristic factor
    assert len(rows) == 3 and rows[1]["heuristic"] == "1"


def test_sample_experiment_table(tmp_path, capsys):
    assert main(["sample-experiment", "--n-points", "12", "--repeats", "2", "--out", str(tmp_path)]) == 0
    rows = read_csv(str(tmp_path / "sample_experiment.csv"))
    assert len(rows) == 9
    assert {(r["source"], r["embedding"]) for r in rows} == {
        (a, b) for a in ("euclidean", "spherical", "hyperbolic") for b in ("euclidean", "spherical", "hyperbolic")}
    assert main(["sample-experiment", "--n-points", "2"]) == 1


def test_sample_experiment_deterministic():
    a = sample_experiment(10, repeats=2, seed=4)
    b = sample_experiment(10, repeats=2, seed=4)
    assert a == b


def write_table(path, labels, d):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([""] + labels)
    for lab, row in zip(labels, d):
        w.writerow([lab] + [repr(float(x)) for x in row])
    path.write_text(buf.getvalue())


def test_cities_three_equidistant_points(tmp_path, capsys):
    # three equatorial points 120 degrees apart on a 6371 km globe
    s = 6371.0 * 2 * math.pi / 3
    d = np.full((3, 3), s)
    np.fill_diagonal(d, 0.0)
    table = tmp_path / "tri.csv"
    write_table(table, ["a", "b", "c"], d)
    assert main(["cities", "--distances", str(table), "--out", str(tmp_path)]) == 0
    payload = json.loads((tmp_path / "layout.json").read_text())
    assert payload["distortion"] < 1e-3
    # total scale maps the 6371 km globe onto the unit sphere
    assert payload["dilation_factor"] == pytest.approx(1 / 6371.0, rel=1e-2)
    assert payload["labels"] == ["a", "b", "c"]
    assert (tmp_path / "cities_0.svg").exists() and (tmp_path / "cities_1.svg").exists()


def test_cities_asymmetric_table_names_pair(tmp_path, capsys):
    d = np.array([[0, 1, 2], [1, 0, 3], [2, 3.5, 0.0]])
    table = tmp_path / "bad.csv"
    write_table(table, ["x", "y", "z"], d)
    assert main(["cities", "--distances", str(table), "--out", str(tmp_path)]) == 2
    err = capsys.readouterr().err
    assert "y" in err and "z" in err


def test_cities_synthetic(tmp_path, capsys):
    assert main(["cities", "--synthetic", "12", "--out", str(tmp_path)]) == 0
    payload = json.loads((tmp_path / "layout.json").read_text())
    assert payload["distortion"] < 0.05 and len(payload["coords"]) == 12
    dm, coords = synthetic_cities(12)
    assert dm.labels[0] == "city00" and coords.shape == (12, 2)


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "spherical_mds.cli", "layout", "--generate", "octahedron",
                           "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert "n=6" in proc.stdout
