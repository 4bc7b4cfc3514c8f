import json
import math
import subprocess
import sys

import numpy as np
import pytest

from neckglue.cli import main, parse_config

FLAGSHIP = {
    "n": 3,
    "points": [[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]],
    "rotations": [
        [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        [[1.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, 1.0, 0.0]],
    ],
    "A0": [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
    "epsilon": 1e-4,
    "rho_star": 0.45,
}


def write_config(tmp_path, doc, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


class TestParseConfig:
    def test_flagship_fixture_in_repo(self):
        import pathlib

        fixture = pathlib.Path(__file__).resolve().parents[1] / "configs" / "flagship.json"
        config, options = parse_config(str(fixture))
        assert config.n == 3 and config.k == 2
        assert options.get("sh_degree") == 8

    def test_flat_rotations_accepted(self, tmp_path):
        doc = dict(FLAGSHIP)
        doc["rotations"] = [np.eye(3).ravel().tolist(),
                            np.asarray(FLAGSHIP["rotations"][1]).ravel().tolist()]
        config, _ = parse_config(write_config(tmp_path, doc))
        assert config.k == 2

    def test_malformed_json_line_anchored(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{\n  "n": 3,\n  "points": [[1, 0, 0],,]\n}\n')
        with pytest.raises(ValueError, match=r"line 3 column"):
            parse_config(str(path))

    def test_non_orthogonal_rotation_reports_defect(self, tmp_path):
        doc = dict(FLAGSHIP)
        doc["rotations"] = [np.eye(3).tolist(), (1.001 * np.eye(3)).tolist()]
        with pytest.raises(ValueError, match="orthogonality defect"):
            parse_config(write_config(tmp_path, doc))

    def test_duplicate_points_named(self, tmp_path):
        doc = dict(FLAGSHIP)
        doc["points"] = [[1.0, 0, 0], [1.0, 0, 0]]
        with pytest.raises(ValueError, match=r"points\[0\] and points\[1\]"):
            parse_config(write_config(tmp_path, doc))

    def test_wrong_matrix_shape(self, tmp_path):
        doc = dict(FLAGSHIP)
        doc["A0"] = [[1.0, 0.0], [0.0, 1.0]]
        with pytest.raises(ValueError):
            parse_config(write_config(tmp_path, doc))

    def test_missing_key(self, tmp_path):
        doc = {k: v for k, v in FLAGSHIP.items() if k != "epsilon"}
        with pytest.raises(ValueError, match="epsilon"):
            parse_config(write_config(tmp_path, doc))


class TestCommands:
    def test_validate_flagship_passes(self, tmp_path, capsys):
        code = main(["validate", write_config(tmp_path, FLAGSHIP)])
        out = capsys.readouterr().out
        assert code == 0
        assert "all checks passed" in out
        assert "alpha = [4.0, 12.0]" in out

    def test_validate_h3_failure_exit_one(self, tmp_path, capsys):
        doc = dict(FLAGSHIP)
        doc["A0"] = (-np.eye(3)).tolist()
        code = main(["validate", write_config(tmp_path, doc)])
        assert code == 1
        assert "FAIL" in capsys.readouterr().out

    def test_input_error_exit_two(self, tmp_path, capsys):
        path = tmp_path / "broken.json"
        path.write_text("{nope")
        assert main(["validate", str(path)]) == 2
        assert "error:" in capsys.readouterr().err

    def test_missing_file_exit_two(self):
        assert main(["validate", "/nonexistent/cfg.json"]) == 2

    def test_spectrum_flagship_roots(self, tmp_path, capsys):
        report = tmp_path / "spectrum_report.json"
        code = main(["--report", str(report), "spectrum", "--n", "3", "--k", "1"])
        assert code == 0
        doc = json.loads(report.read_text())
        sec = doc["sections"]["spectrum"]
        assert sec["exact_mu"] == ["5/2", "-5/2"]
        assert sec["exact_nu"] == ["1/2", "-1/2"]
        assert sec["coexact"] == ["3/2", "-3/2"]

    def test_dtn_command(self, capsys):
        assert main(["dtn", "--degree", "6"]) == 0

    def test_interaction_command(self, tmp_path):
        assert main(["interaction", write_config(tmp_path, FLAGSHIP)]) == 0

    def test_neck_command_with_export(self, tmp_path):
        out = tmp_path / "neck.ply"
        code = main(["neck", "--n", "3", "--beta", "1.0", "--eps", "0.001",
                     "--export", str(out)])
        assert code == 0
        assert out.exists()
        assert out.read_text().startswith("ply")

    def test_report_determinism(self, tmp_path):
        # identical config + seed => byte-identical reports minus timings
        cfg = write_config(tmp_path, FLAGSHIP)
        docs = []
        for name in ("a.json", "b.json"):
            report = tmp_path / name
            code = main(["--report", str(report), "--seed", "7", "interaction", cfg])
            assert code == 0
            doc = json.loads(report.read_text())
            doc.pop("timings", None)
            docs.append(json.dumps(doc, sort_keys=True))
        assert docs[0] == docs[1]

    def test_threads_env_honored(self, tmp_path, monkeypatch):
        monkeypatch.setenv("NECKGLUE_THREADS", "1")
        monkeypatch.delenv("OMP_NUM_THREADS", raising=False)
        from neckglue.cli import _configure_threads
        import os

        _configure_threads()
        assert os.environ["OMP_NUM_THREADS"] == "1"


class TestGlueCommand:
    def test_glue_flagship_end_to_end(self, tmp_path):
        doc = dict(FLAGSHIP)
        doc["options"] = {"neck_s_nodes": 24, "neck_angle_nodes": [13, 24],
                         "outer_spacing": 0.3, "sh_degree": 6}
        cfg = write_config(tmp_path, doc)
        report_path = tmp_path / "glue.json"
        export_path = tmp_path / "surface.ply"
        code = main(["--report", str(report_path), "glue", cfg,
                     "--export", str(export_path)])
        assert code == 0
        assert export_path.exists()
        assert (tmp_path / "surface.csv").exists()
        doc = json.loads(report_path.read_text())
        assert "boundary_gap" in doc["sections"]
        assert "matching_step" in doc["sections"]
        gap = doc["sections"]["boundary_gap"][0]["position_gap_sup"]
        assert 0 < gap < 1e-2

    def test_glue_gate_on_failed_hypotheses(self, tmp_path):
        doc = dict(FLAGSHIP)
        doc["A0"] = (-np.eye(3)).tolist()  # H3 fails
        code = main(["glue", write_config(tmp_path, doc)])
        assert code == 1


class TestConsoleEntryPoint:
    def test_installed_script(self):
        proc = subprocess.run(
            [sys.executable, "-m", "neckglue.cli", "dtn", "--degree", "4"],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0
        assert "all checks passed" in proc.stdout
