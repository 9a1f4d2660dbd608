import csv
import json
import xml.etree.ElementTree as ET
from pathlib import Path

import numpy as np
import pytest

from effwave.cli import main
from effwave.config import parse_config
from effwave.harness import convergence_sweep
from effwave.report import ERRORS_HEADER, MASS_HEADER, emit_plot_data, svg_line_plot, write_report

GOLDEN = Path(__file__).parent / "golden"
FREE = {"scenario": "free", "sigma": {"named": "constant", "params": {"value": 1}},
        "c": {"named": "constant", "params": {"value": 0}},
        "numerics": {"T": 0.1, "dt": 1e-2, "epsilons": [0.5, 0.25, 0.125], "points_per_cell": 16,
                     "n_theta": 9, "n_bands": 2, "K": 4, "n_samples": 2}}
NOISY = {**FREE, "scenario": "noisy", "c": {"named": "cosine", "params": {"amplitude": 2}},
         "noise": {"kind": "multiplicative", "g": {"named": "cosine", "params": {"mean": 0.5, "amplitude": 1}}},
         "numerics": {**FREE["numerics"], "replicas": 12, "chunk": 4, "K": 16}}


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def write_cfg(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return p


def test_empty_sweep(tmp_path):
    paths = write_report(None, tmp_path)
    assert read_csv(paths["errors.csv"]) == [ERRORS_HEADER]
    assert read_csv(paths["mass.csv"]) == [MASS_HEADER]
    assert read_csv(paths["bands.csv"]) == [["theta"]]
    manifest = json.loads(paths["manifest.json"].read_text())
    assert set(manifest) == {"config_hash", "seed", "tool_version", "started_at", "wall_seconds"}


def test_unwritable_directory(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError, match=str(blocker)):
        write_report(None, blocker / "sub")


def test_report_files_deterministic(tmp_path):
    cfg = parse_config(NOISY)
    a = write_report(convergence_sweep(cfg), tmp_path / "a", cfg=cfg)
    b = write_report(convergence_sweep(cfg), tmp_path / "b", cfg=cfg)
    for name in ("report.json", "errors.csv", "bands.csv", "mass.csv"):
        assert a[name].read_bytes() == b[name].read_bytes()
    rows = read_csv(a["errors.csv"])
    assert rows[0] == ERRORS_HEADER and len(rows) == 1 + 3 * 2
    assert len(read_csv(a["bands.csv"])) == 1 + 9
    assert read_csv(a["bands.csv"])[0] == ["theta", "lambda_1", "lambda_2"]


def test_free_band_golden(tmp_path):
    assert main(["bands", "--config", str(write_cfg(tmp_path, FREE)), "--out", str(tmp_path), "--quiet"]) == 0
    rows = read_csv(tmp_path / "bands.csv")
    assert rows == read_csv(GOLDEN / "free_bands.csv")
    theta = np.array([float(r[0]) for r in rows[1:]])
    lam1 = np.array([float(r[1]) for r in rows[1:]])
    assert np.allclose(lam1, 4 * np.pi**2 * theta**2, atol=1e-10)
    root = ET.parse(tmp_path / "bands.svg").getroot()
    lines = [el for el in root.iter() if el.tag.endswith("polyline")]
    pts = [tuple(map(float, p.split(","))) for p in lines[0].get("points").split()]
    assert len(pts) == 9
    ys = [p[1] for p in pts]           # SVG y grows downward: minimum of the band is the largest y
    assert int(np.argmax(ys)) == 4 and ys[0] == pytest.approx(ys[-1])


def test_free_errors_golden(tmp_path):
    assert main(["converge", "--config", str(write_cfg(tmp_path, FREE)), "--out", str(tmp_path), "--quiet"]) == 0
    got = read_csv(tmp_path / "errors.csv")
    ref = read_csv(GOLDEN / "free_errors.csv")
    assert got[0] == ref[0] and len(got) == len(ref)
    for g, r in zip(got[1:], ref[1:]):
        assert g[:3] == r[:3]
        assert abs(float(g[3]) - float(r[3])) < 1e-20


def test_error_plot_markers(tmp_path):
    cfg = parse_config(NOISY)
    rep = convergence_sweep(cfg)
    files = emit_plot_data(rep, tmp_path, notice=lambda m: None)
    names = {p.name for p in files}
    assert {"bands.svg", "errors.svg", "mass.svg"} <= names
    root = ET.parse(tmp_path / "errors.svg").getroot()
    assert len([el for el in root.iter() if el.tag.endswith("circle")]) == 3
    for p in files:
        ET.parse(p)


def test_plot_skips_missing_series(tmp_path):
    notices = []
    assert emit_plot_data(None, tmp_path, notice=notices.append) == []
    assert notices
    svg = svg_line_plot([{"x": [1, 2], "y": [float("nan"), 1.0]}], "t", "x", "y", logy=True)
    ET.fromstring(svg)


def test_cli_errors(tmp_path, capsys):
    bad = write_cfg(tmp_path, {**FREE, "numerics": {"epsilons": [0.3]}})
    assert main(["bands", "--config", str(bad)]) == 2
    assert "epsilon" in capsys.readouterr().err
    assert main(["bands", "--config", str(tmp_path / "missing.json")]) == 2
    degenerate = write_cfg(tmp_path, {**FREE, "band": {"n": 2, "theta_candidates": [0.0]}}, "d.json")
    assert main(["critical", "--config", str(degenerate), "--out", str(tmp_path), "--quiet"]) == 3


def test_cli_all_and_stage(tmp_path):
    cfg = write_cfg(tmp_path, FREE)
    out = tmp_path / "o"
    assert main(["all", "--config", str(cfg), "--out", str(out), "--stage", "effective", "--quiet"]) == 0
    assert {p.name for p in out.iterdir()} >= {"bands.csv", "critical.json", "correctors.json", "effective.json"}
    assert not (out / "errors.csv").exists()
    eff = json.loads((out / "effective.json").read_text())
    assert eff["sigma_star"] == pytest.approx(1.0, rel=1e-10)
    corr = json.loads((out / "correctors.json").read_text())
    assert corr["sigma_star_formula"] == pytest.approx(1.0, rel=1e-10)
    out2 = tmp_path / "o2"
    assert main(["bands", "--stage", "correctors", "--config", str(cfg), "--out", str(out2), "--quiet"]) == 0
    assert (out2 / "correctors.json").exists() and not (out2 / "bands.csv").exists()


def test_cli_simulations(tmp_path):
    cfg = write_cfg(tmp_path, NOISY)
    for cmd, name in (("simulate-eps", "eps"), ("simulate-homog", "homog")):
        assert main([cmd, "--config", str(cfg), "--out", str(tmp_path), "--quiet", "--seed", "5"]) == 0
        rows = read_csv(tmp_path / f"trajectory_{name}.csv")
        assert rows[0] == ["t", "x", "re", "im"]
        mass = read_csv(tmp_path / f"mass_{name}.csv")
        assert mass[0] == MASS_HEADER and len(mass) == 1 + 11


def test_cli_thread_count_irrelevant(tmp_path):
    cfg = write_cfg(tmp_path, NOISY)
    outs = []
    for threads in (1, 4):
        out = tmp_path / f"t{threads}"
        assert main(["converge", "--config", str(cfg), "--out", str(out), "--threads", str(threads),
                     "--quiet"]) == 0
        outs.append((out / "errors.csv").read_bytes())
    assert outs[0] == outs[1]


def test_seed_flag_changes_results(tmp_path):
    cfg = write_cfg(tmp_path, NOISY)
    res = []
    for seed in ("1", "2"):
        out = tmp_path / seed
        main(["converge", "--config", str(cfg), "--out", str(out), "--seed", seed, "--quiet"])
        res.append((out / "errors.csv").read_bytes())
        assert json.loads((out / "manifest.json").read_text())["seed"] == int(seed)
    assert res[0] != res[1]
