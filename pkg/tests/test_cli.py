"""Command-line interface: subcommands, exit codes, file schemas, determinism."""

import numpy as np
import pytest

from polyshape.cli import load_config, main

CONFIG = """
[domain]
outer = disk
radius = 1.0
polygon = 0.3 0.3; -0.3 0.3; -0.3 -0.3; 0.3 -0.3

[contrast]
kind = finite
k = 2.0

[current]
modes = 1:cos

[mesh]
hmax = 0.05
grading = 0.5
levels = 5

[perturbation]
preset = vertex-motion
vertex = 0
direction = 1.0 1.0

[output]
seed = 0
"""


@pytest.fixture()
def config_file(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text(CONFIG)
    return str(path)


class TestConfig:
    def test_defaults(self):
        cfg = load_config(None)
        assert cfg.outer.kind == "disk"
        assert len(cfg.polygon_vertices) == 4

    def test_parse(self, config_file):
        cfg = load_config(config_file)
        assert cfg.hmax == 0.05
        assert cfg.contrast.k == 2.0
        assert cfg.currents == [(1, "cos")]

    def test_polygon_file(self, tmp_path):
        pts = tmp_path / "poly.txt"
        pts.write_text("0.2 0.2\n-0.2 0.2\n-0.2 -0.2\n0.2 -0.2\n")
        cfg_path = tmp_path / "c.cfg"
        cfg_path.write_text(f"[domain]\npolygon_file = {pts}\n")
        cfg = load_config(str(cfg_path))
        assert cfg.polygon_vertices == [(0.2, 0.2), (-0.2, 0.2), (-0.2, -0.2), (0.2, -0.2)]


class TestExitCodes:
    def test_no_command_usage_error(self, capsys):
        assert main([]) == 2

    def test_unknown_command_usage_error(self):
        assert main(["frobnicate"]) == 2

    def test_missing_config_exit_2_no_outputs(self, tmp_path, capsys):
        out = tmp_path / "out"
        code = main(["verify", "--config", str(tmp_path / "nope.cfg"),
                     "--out", str(out)])
        assert code == 2
        assert not out.exists()

    def test_gamma_success(self, capsys):
        code = main(["gamma", "--alpha", "1.5707963267948966", "--k", "2"])
        assert code == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0] == "alpha,k,gamma0,gamma1,gamma2,residual1,residual2"
        row = lines[1].split(",")
        assert float(row[3]) == pytest.approx(2 / np.pi * np.arccos(1 / 6), abs=1e-9)
        assert float(row[5]) < 1e-11


class TestForwardExport:
    def test_outputs_and_schemas(self, config_file, tmp_path, capsys):
        out = tmp_path / "fw"
        code = main(["forward", "--config", config_file, "--out", str(out), "--svg"])
        assert code == 0
        field = (out / "field_1cos.csv").read_text().splitlines()
        assert field[0] == "node_index,x,y,region,value"
        trace = (out / "trace_1cos.csv").read_text().splitlines()
        assert trace[0] == "arc_length,value"
        mesh_file = (out / "mesh.txt").read_text().splitlines()
        assert mesh_file[0] == "polyshape-mesh v1"
        svg = (out / "trace_1cos.svg").read_text()
        assert svg.startswith("<svg") and "polyline" in svg

    def test_corner_fit_csv(self, config_file, tmp_path, capsys):
        out = tmp_path / "cf"
        cfg2 = (out.parent / "run7.cfg")
        cfg2.write_text(CONFIG.replace("hmax = 0.05", "hmax = 0.03").replace(
            "levels = 5", "levels = 8"))
        code = main(["corner-fit", "--config", str(cfg2), "--out", str(out)])
        assert code == 0
        rows = (out / "corner_fit.csv").read_text().splitlines()
        assert rows[0] == "vertex,beta1,gamma1_fit,gamma1_exact,spread"
        assert len(rows) == 5


class TestVerifyDeterminism:
    def test_reports_byte_identical(self, config_file, tmp_path):
        cfgtext = CONFIG + "\n[experiment]\nchecks = exponents,matrix,determinism\n"
        cfg = tmp_path / "v.cfg"
        cfg.write_text(cfgtext)
        reports = []
        for d in ("r1", "r2"):
            out = tmp_path / d
            code = main(["verify", "--config", str(cfg), "--out", str(out),
                         "--seed", "0"])
            assert code == 0
            reports.append((out / "report.txt").read_bytes())
        assert reports[0] == reports[1]
