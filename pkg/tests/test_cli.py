import json
import math
import subprocess
import sys
from pathlib import Path

import pytest
from click.testing import CliRunner

from statfrob.cli import cli, learn_report, parse_spec, render, run_check, spec_from_dict
from statfrob.errors import ParseError, ValidationError

ROOT = Path(__file__).resolve().parents[1]
SPECS = ROOT / "specs"
GOLDEN = ROOT / "tests" / "golden"

sys.path.insert(0, str(ROOT / "scripts"))
from regen_golden import CASES  # noqa: E402

BERNOULLI = {"omega_size": 2, "stats": [[0, 1]], "beta": [0]}


def invoke(*args):
    return CliRunner().invoke(cli, [str(a) for a in args])


def write_spec(tmp_path, data, name="spec.json"):
    path = tmp_path / name
    path.write_text(data if isinstance(data, str) else json.dumps(data), encoding="utf-8")
    return path


class TestSpecParsing:
    def test_minimal_bernoulli(self):
        spec = spec_from_dict(BERNOULLI)
        assert spec.family().n == 1 and spec.target is None

    @pytest.mark.parametrize("patch,key", [
        ({"beta": [0, 1]}, "beta"),
        ({"target": [1.0, 0.0]}, "target"),
        ({"target": [0.5, 0.4]}, "target"),
        ({"stats": [[1, 1]]}, "stats"),
        ({"stats": [[0, 1, 2]]}, "stats"),
        ({"omega_size": 1}, "omega_size"),
        ({"labels": ["a"]}, "labels"),
        ({"extra": 1}, "extra"),
        ({"beta": [True]}, "beta"),
    ])
    def test_validation_names_key(self, patch, key):
        with pytest.raises(ValidationError) as info:
            spec_from_dict({**BERNOULLI, **patch})
        assert info.value.key == key
        assert str(info.value).startswith(f"{key}:")

    def test_missing_key(self):
        with pytest.raises(ValidationError) as info:
            spec_from_dict({"omega_size": 2, "stats": [[0, 1]]})
        assert info.value.key == "beta"

    def test_parse_error_has_position(self, tmp_path):
        path = write_spec(tmp_path, '{\n  "omega_size": 2,\n  "stats": [[0, 1]],\n  "beta": [0,]\n}')
        with pytest.raises(ParseError) as info:
            parse_spec(path)
        assert info.value.line == 4
        assert "line 4" in str(info.value)

    def test_not_utf8(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_bytes(b'{"omega_size": 2, "labels": ["\xff"]}')
        with pytest.raises(ParseError):
            parse_spec(path)


class TestReports:
    def test_bernoulli_check_passes_with_skip(self):
        report = run_check(parse_spec(SPECS / "bernoulli.json"))
        assert report["overall"] == "pass"
        flat0 = next(c for c in report["checks"] if c["name"] == "flatness[alpha=0]")
        assert flat0["status"] == "skipped"
        assert flat0["note"] == "skipped: n=1 (trivially flat)"

    def test_check_order(self):
        names = [c["name"] for c in run_check(parse_spec(SPECS / "bernoulli.json"))["checks"]]
        assert names[:4] == ["metric_positivity", "score_centering", "associativity", "wdvv"]
        assert names.index("potential_third_derivative") < names.index("metric_compatibility[alpha=-1]")
        assert names.index("metric_compatibility[alpha=1]") < names.index("flatness[alpha=-1]")
        assert names[-2:] == ["gws_order2_equals_metric", "gws_order3_equals_skewness"]

    def test_categorical_nonflat_control_passes(self):
        report = run_check(parse_spec(SPECS / "categorical3.json"))
        flat0 = next(c for c in report["checks"] if c["name"] == "flatness[alpha=0]")
        assert flat0["status"] == "pass" and flat0["residual"] > 1e-3
        assert flat0["note"] == "expected non-flat"

    def test_categorical_overall_verdict_follows_wdvv(self):
        report = run_check(parse_spec(SPECS / "categorical3.json"))
        failing = [c["name"] for c in report["checks"] if c["status"] == "fail"]
        assert failing == ["wdvv"]
        assert report["overall"] == "fail"

    def test_zeroed_skewness_fails_flatness(self):
        report = run_check(parse_spec(SPECS / "categorical3.json"), zero_skewness=True)
        flat = {c["name"]: c for c in report["checks"] if c["name"].startswith("flatness")}
        assert all(c["status"] == "fail" for c in flat.values())
        assert flat["flatness[alpha=0]"]["note"] == "t artificially zeroed: expected flat"
        assert report["overall"] == "fail"
        assert invoke("check", SPECS / "categorical3.json", "--zero-skewness").exit_code == 1

    def test_render_is_sorted_and_round_trips(self):
        report = {"b": [0.1, 1 / 3], "a": math.nan}
        text = render(report)
        assert text.index('"a"') < text.index('"b"')
        assert json.loads(text)["b"][1] == 1 / 3
        assert json.loads(text)["a"] is None

    def test_conventions_header(self):
        report = run_check(parse_spec(SPECS / "bernoulli.json"))
        assert "bregman_kl" in report["conventions"] and "alpha_pencil" in report["conventions"]


class TestCommands:
    def test_check_exit_codes(self, tmp_path):
        assert invoke("check", SPECS / "bernoulli.json").exit_code == 0
        assert invoke("check", SPECS / "categorical3.json").exit_code == 1
        bad = write_spec(tmp_path, {**BERNOULLI, "beta": [0, 1]})
        result = invoke("check", bad)
        assert result.exit_code == 2 and "beta" in result.output
        assert invoke("check", write_spec(tmp_path, "{", "broken.json")).exit_code == 2
        assert invoke("check", tmp_path / "missing.json").exit_code == 2

    def test_rank_deficient_rejected_before_checks(self, tmp_path):
        spec = write_spec(tmp_path, {"omega_size": 3, "stats": [[0, 1, 2], [0, 2, 4]], "beta": [0, 0]})
        result = invoke("check", spec)
        assert result.exit_code == 2
        assert "stats" in result.output and "checks" not in result.output

    def test_learn_requires_target(self):
        spec = SPECS / "categorical3.json"
        data = json.loads(spec.read_text())
        data.pop("target")
        with pytest.raises(ValidationError):
            learn_report(spec_from_dict(data), "newton", 1e-12, 50, 1.0, 1e-6)

    def test_learn_report(self):
        result = invoke("learn", SPECS / "bernoulli.json", "--method", "newton")
        assert result.exit_code == 0
        report = json.loads(result.output)
        assert report["beta_final"][0] == pytest.approx(math.log(7 / 3), abs=1e-9)
        assert report["intersections"]["count"] >= 1

    def test_learn_truncated_run_fails(self):
        result = invoke("learn", SPECS / "bernoulli.json", "--max-iter", "1", "--tol", "1e-14")
        assert result.exit_code == 1

    def test_ngrad(self):
        result = invoke("learn", SPECS / "categorical3.json", "--method", "ngrad", "--step", "0.5",
                        "--max-iter", "200")
        assert result.exit_code == 0
        assert json.loads(result.output)["method"] == "natural_gradient"

    def test_gws_order_range(self):
        assert invoke("gws", SPECS / "bernoulli.json", "--order", "7").exit_code == 2
        report = json.loads(invoke("gws", SPECS / "bernoulli.json", "--order", "4").output)
        # p = 1/4: p(1-p)(1 - 6p(1-p))
        assert report["y"][0][0][0][0] == pytest.approx(0.1875 * (1 - 6 * 0.1875), abs=1e-15)

    def test_geodesic(self):
        result = invoke("geodesic", SPECS / "categorical3.json", "--to", "1,0.5", "--kind", "e", "--steps", "5")
        assert result.exit_code == 0
        report = json.loads(result.output)
        assert report["points"][-1] == [1.0, 0.5]
        assert report["geodesic_residual"] < 1e-10

    def test_geodesic_bad_endpoint(self):
        assert invoke("geodesic", SPECS / "categorical3.json", "--to", "1").exit_code == 2
        assert invoke("geodesic", SPECS / "categorical3.json", "--to", "a,b").exit_code == 2

    def test_check_sweep(self):
        result = invoke("check", SPECS / "bernoulli.json", "--sweep", "5", "--seed", "3")
        sweep = json.loads(result.output)["sweep"]
        assert sweep["count"] == 5 and sweep["seed"] == 3
        by_name = {c["name"]: c for c in sweep["checks"]}
        assert by_name["flatness[alpha=1]"]["failures"] == 0


@pytest.mark.parametrize("name,argv", CASES, ids=[c[0] for c in CASES])
def test_golden(name, argv):
    result = invoke(argv[0], ROOT / argv[1], *argv[2:])
    assert result.output == (GOLDEN / name).read_text(encoding="utf-8")


def test_byte_identical_across_processes():
    cmd = [sys.executable, "-m", "statfrob", "check", str(SPECS / "categorical3.json")]
    first = subprocess.run(cmd, capture_output=True, check=False)
    second = subprocess.run(cmd, capture_output=True, check=False)
    assert first.returncode == second.returncode == 1
    assert first.stdout == second.stdout and first.stdout
