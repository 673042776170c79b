import subprocess
import sys

import pytest

from contend.cli import main


class TestCli:
    def test_run_writes_trace(self, tmp_path, monkeypatch, capsys):
        monkeypatch.setenv("CONTEND_OUTPUT_DIR", str(tmp_path))
        assert main(["run", "--scenario", "matrix_m", "--horizon", "10", "--seed", "7"]) == 0
        out = tmp_path / "matrix_m_trace.csv"
        assert out.exists()
        assert len(out.read_text().splitlines()) == 1 + 50

    def test_run_document(self, tmp_path):
        out = tmp_path / "t.json"
        assert main(["run", "--scenario", "hmmer_mcf", "--out", str(out), "--format", "document"]) == 0
        assert out.read_text().startswith("{")

    def test_compare_beats_static(self, capsys):
        assert main(["compare", "--scenario", "hmmer_mcf"]) == 0
        text = capsys.readouterr().out
        totals = {line.split()[0]: float(line.split()[1]) for line in text.splitlines()
                  if line.split() and line.split()[0] in ("auction", "static")}
        assert totals["auction"] > totals["static"]
        assert "improvement over static (gain points): 0.1624" in text

    def test_budget_sweep_table(self, capsys):
        assert main(["compare", "--scenario", "hmmer_mcf", "--budget-sweep"]) == 0
        assert "budget  throughput" in capsys.readouterr().out

    def test_verify_two_bidders(self, capsys):
        assert main(["verify", "--n", "2", "--m", "1", "--strict"]) == 0
        assert capsys.readouterr().out.count("PASS") == 2

    def test_verify_strict_reports_failure(self, capsys):
        code = main(["verify", "--n", "5", "--m", "2", "--strict"])
        out = capsys.readouterr().out
        assert ("FAIL" in out) == (code == 1)

    def test_oracle(self, capsys):
        assert main(["oracle", "--scenario", "matrix_m"]) == 0
        out = capsys.readouterr().out
        assert "App3: R1" in out and "total 7.5" in out

    def test_missing_scenario(self, capsys):
        assert main(["run", "--scenario", "nowhere.json"]) == 2
        assert "scenario not found" in capsys.readouterr().err

    def test_unknown_flag(self):
        with pytest.raises(SystemExit) as info:
            main(["run", "--scenario", "matrix_m", "--colour"])
        assert info.value.code == 2

    def test_invalid_scenario_exits_one(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text("{}")
        assert main(["oracle", "--scenario", str(path)]) == 1
        assert "error" in capsys.readouterr().err

    def test_module_entry_point(self):
        done = subprocess.run([sys.executable, "-m", "contend", "oracle", "--scenario", "hmmer_mcf"],
                              capture_output=True, text=True)
        assert done.returncode == 0
        assert "total 2.35" in done.stdout
