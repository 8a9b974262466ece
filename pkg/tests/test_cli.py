# Standard Library
from fractions import Fraction
from pathlib import Path
from typing import Dict

# Third Party Library
import pytest

# First Party Library
from kisskit.cli import ExitCode
from kisskit.cli import build_config
from kisskit.cli import build_parser
from kisskit.cli import main
from kisskit.cli import pin_value
from kisskit.config import PRESET_DIR
from kisskit.sdp import delsarte_lp_bound


def _result_line(capsys) -> str:
    lines = [line for line in capsys.readouterr().out.splitlines() if line.startswith("RESULT ")]
    assert len(lines) == 1
    return lines[0]


def _result_fields(line: str) -> Dict[str, str]:
    return dict(part.split("=", 1) for part in line.split()[1:])


class TestConfig:
    def test_defaults(self):
        config = build_config(build_parser().parse_args(["d4check"]), environ={})
        assert config.cos_theta == Fraction(1, 2)
        assert config.d2 == config.d1
        assert config.delta == 4
        assert config.stem == "n4_c1over2_l2_d4_4_4"

    def test_odd_degree_rounds_delta_up(self):
        config = build_config(build_parser().parse_args(["zonal", "--d1", "3", "--level", "1"]), environ={})
        assert (config.d2, config.delta) == (3, 4)

    def test_precedence(self, tmp_path: Path):
        path = tmp_path / "run.conf"
        path.write_text("# local run\nn = 8\nthreads = 2\nmax-iterations = 50\nd1 = 6\n")
        args = build_parser().parse_args(["solve", "--config", str(path), "--threads", "5"])
        config = build_config(args, environ={"KISSKIT_THREADS": "3"})
        assert config.n == 8
        assert config.threads == 5
        assert config.max_iterations == 50
        args = build_parser().parse_args(["solve", "--config", str(path)])
        assert build_config(args, environ={"KISSKIT_THREADS": "3"}).threads == 3

    @pytest.mark.parametrize("preset", sorted(p.name for p in PRESET_DIR.glob("*.conf")))
    def test_presets_are_valid(self, preset):
        args = build_parser().parse_args(["assemble", "--config", str(PRESET_DIR / preset)])
        config = build_config(args, environ={})
        assert config.spec.delta >= config.spec.d2

    @pytest.mark.parametrize(
        "argv",
        [
            pytest.param(["d4check", "--n", "3"], id="dimension"),
            pytest.param(["d4check", "--cos-theta", "0.5x"], id="cos-theta"),
            pytest.param(["d4check", "--level", "1", "--d1", "6", "--d2", "4"], id="degrees"),
            pytest.param(["d4check", "--pin-margin", "0"], id="pin-margin"),
            pytest.param(["d4check", "--config", "/nonexistent/kisskit.conf"], id="missing-file"),
        ],
    )
    def test_rejected(self, capsys, argv):
        assert main(argv) == ExitCode.CONFIG
        assert "error=config" in _result_line(capsys)

    def test_unknown_key_in_file(self, tmp_path: Path, capsys):
        path = tmp_path / "bad.conf"
        path.write_text("n = 4\ncolour = blue\n")
        assert main(["d4check", "--config", str(path)]) == ExitCode.CONFIG

    def test_bad_thread_variable(self, monkeypatch, capsys):
        monkeypatch.setenv("KISSKIT_THREADS", "many")
        assert main(["d4check"]) == ExitCode.CONFIG


def test_pin_value():
    assert pin_value(Fraction(24), Fraction(1, 1000)) == Fraction(3003, 125)
    assert pin_value(Fraction(240), Fraction(1, 1000)) == Fraction(1201, 5)


class TestD4Check:
    def test_root_system(self, capsys):
        assert main(["d4check"]) == ExitCode.OK
        line = _result_line(capsys)
        assert "passed=true" in line
        assert "count=24" in line
        assert "gram={-1,-1/2,0,1/2}" in line
        assert "max_inner=1/2" in line

    def test_smaller_angle(self, capsys):
        assert main(["d4check", "--cos-theta", "1/3"]) == ExitCode.CHECK
        assert "passed=false" in _result_line(capsys)

    def test_vectors_file(self, tmp_path: Path, capsys):
        path = tmp_path / "square.txt"
        path.write_text("# four points of a square\n1 0\n0 1\n-1, 0\n0 -1\n")
        assert main(["d4check", "--vectors", str(path), "--cos-theta", "0"]) == ExitCode.OK
        assert "count=4" in _result_line(capsys)

    def test_mixed_norms(self, tmp_path: Path, capsys):
        path = tmp_path / "mixed.txt"
        path.write_text("1 1 0 0\n1 1 1 1\n")
        assert main(["d4check", "--vectors", str(path)]) == ExitCode.CHECK

    def test_unreadable_vectors(self, tmp_path: Path, capsys):
        path = tmp_path / "words.txt"
        path.write_text("one two\n")
        assert main(["d4check", "--vectors", str(path)]) == ExitCode.CONFIG


def test_zonal_command_is_idempotent(tmp_path: Path, capsys):
    argv = ["zonal", "--n", "4", "--d1", "2", "--cache-dir", str(tmp_path)]
    assert main(argv) == ExitCode.OK
    first = _result_line(capsys)
    assert "signatures=4" in first
    assert "regenerated=4" in first
    assert main(argv) == ExitCode.OK
    assert "regenerated=0" in _result_line(capsys)


def test_assemble_writes_both_formats(tmp_path: Path, capsys):
    argv = ["assemble", "--n", "4", "--level", "1", "--d1", "4", "--cache-dir", str(tmp_path / "cache")]
    assert main(argv + ["--output-dir", str(tmp_path), "--sdpa"]) == ExitCode.OK
    assert "constraints=" in _result_line(capsys)
    assert (tmp_path / "n4_c1over2_l1_d4_4_4.kproblem").exists()
    assert (tmp_path / "n4_c1over2_l1_d4_4_4.dat-s").exists()


@pytest.mark.slow
class TestBound:
    def test_dimension_eight(self, tmp_path: Path, capsys):
        argv = ["--n", "8", "--level", "1", "--d1", "6", "--precision", "128", "--tolerance", "1e-20"]
        argv += ["--cache-dir", str(tmp_path / "cache"), "--output-dir", str(tmp_path)]
        assert main(["bound"] + argv) == ExitCode.OK
        line = _result_line(capsys)
        assert "floor=240" in line

        certificate = tmp_path / "n8_c1over2_l1_d6_6_6.cert"
        assert certificate.exists()
        assert main(["verify", "--certificate", str(certificate)] + argv) == ExitCode.OK
        assert "passed=true" in _result_line(capsys)
        assert (tmp_path / "n8_c1over2_l1_d6_6_6.report").read_text().splitlines()[-1] == "PASS certificate"

    def test_dimension_four(self, tmp_path: Path, capsys):
        argv = ["bound", "--config", str(PRESET_DIR / "kissing_dim4_level1_d10.conf")]
        argv += ["--cache-dir", str(tmp_path / "cache"), "--output-dir", str(tmp_path)]
        assert main(argv) == ExitCode.OK
        assert "floor=25" in _result_line(capsys)

    @pytest.mark.parametrize(
        "case",
        [
            pytest.param(dict(preset="kissing_dim4_level2.conf", degree=4), id="kernel-degree-4"),
            pytest.param(dict(preset="kissing_dim4_level2_d6.conf", degree=6), id="kernel-degree-6"),
        ],
    )
    def test_dimension_four_level_two(self, tmp_path: Path, capsys, case):
        argv = ["bound", "--config", str(PRESET_DIR / case["preset"])]
        argv += ["--cache-dir", str(tmp_path / "cache"), "--output-dir", str(tmp_path)]
        assert main(argv) == ExitCode.OK
        bound = Fraction(_result_fields(_result_line(capsys))["bound"])
        assert 24 <= bound
        assert float(bound) <= delsarte_lp_bound(4, Fraction(1, 2), case["degree"]) * 1.002
