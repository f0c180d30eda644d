import json

import pytest

from layerforge import cli


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr().out
    return code, out


class TestLocate:
    def test_json_payload(self, capsys):
        code, out = run(capsys, "locate", "--problem", "cubic")
        assert code == 0
        payload = json.loads(out)
        assert payload["schema_version"] == 1
        assert payload["t0"] == pytest.approx(0.5, abs=1e-10)
        assert payload["C_I"] == pytest.approx(1.0 / 12.0, abs=1e-9)

    def test_byte_identical_reruns(self, capsys):
        _, first = run(capsys, "locate", "--problem", "cubic")
        _, second = run(capsys, "locate", "--problem", "cubic")
        assert first == second


class TestUsageErrors:
    def test_nonpositive_epsilon(self, capsys):
        code = cli.main(["phi", "--problem", "cubic", "--eps", "0"])
        err = capsys.readouterr().err
        assert code == 2
        assert "--eps" in err

    def test_odd_mesh(self, capsys):
        code = cli.main(["solve", "--problem", "cubic", "--n", "33"])
        assert code == 2
        assert "--n" in capsys.readouterr().err

    def test_unknown_subcommand(self):
        with pytest.raises(SystemExit) as exc:
            cli.main(["frobnicate"])
        assert exc.value.code == 2

    def test_unknown_problem_is_reported(self, capsys):
        code = cli.main(["check", "--problem", "no-such"])
        assert code == 1
        assert "no-such" in capsys.readouterr().err


class TestReports:
    def test_check_passes_on_builtin(self, capsys):
        code, out = run(capsys, "check", "--problem", "cubic")
        assert code == 0
        payload = json.loads(out)
        assert payload["all_passed"] is True
        assert payload["checks"]["A5"]["passed"] is None

    def test_check_fails_on_bad_problem(self, capsys, tmp_path):
        bad = dict(name="bad", b="u*(u-(0.75-0.5*x))*(u-1)",
                   phi0="0.75-0.5*x", phi1="0", phi2="1",
                   g0=0.0, g1=0.5, epsilon=0.01)
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(bad))
        code, out = run(capsys, "check", "--problem", str(path))
        assert code == 1
        assert json.loads(out)["checks"]["A6"]["passed"] is False

    def test_dump_kink_csv(self, capsys):
        code, out = run(capsys, "dump-kink", "--problem", "cubic")
        assert code == 0
        lines = out.strip().splitlines()
        assert lines[0] == "xi,V0,chi"
        assert len(lines) > 2000

    def test_expand_csv_written_to_file(self, capsys, tmp_path):
        path = tmp_path / "expand.csv"
        code, _ = run(capsys, "expand", "--problem", "cubic",
                      "--points", "11", "--out", str(path))
        assert code == 0
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "x,u_as,beta,U_trunc"
        assert len(lines) == 12

    def test_compare_report(self, capsys):
        code, out = run(capsys, "compare", "--problem", "cubic",
                        "--n", "256")
        assert code == 0
        payload = json.loads(out)
        assert payload["iterations"] <= 8
        assert payload["distance_max"] < 1e-3

    def test_monotone_report(self, capsys):
        code, out = run(capsys, "monotone", "--problem", "cubic")
        assert code == 0
        assert json.loads(out)["passed"] is True

    def test_dump_corrections_json(self, capsys):
        code, out = run(capsys, "dump-corrections", "--problem", "cubic",
                        "--format", "json")
        assert code == 0
        payload = json.loads(out)
        assert set(payload["phi"]) == {"v1", "v2", "vstar", "z"}
        assert payload["columns"] == ["term", "branch", "xi", "value"]

    def test_decay_report(self, capsys):
        code, out = run(capsys, "decay", "--problem", "cubic")
        assert code == 0
        payload = json.loads(out)
        assert payload["passed"] is True
        assert set(payload["rates"]) == {"chi", "v1", "v2", "vstar", "z"}
