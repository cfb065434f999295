import json
import os

from maslovbox.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_check_builtin_passes(capsys):
    code, out, _ = run(capsys, "check", "--problem", "robin_constant")
    assert code == 0
    data = json.loads(out)
    assert data["assumptions"]["hyperbolic_minus"] is True
    assert data["assumptions"]["im_phi_sign"] is True
    assert data["gamma_estimate"] < 0


def _bad_limit_problem(tmp_path):
    """Tabulated whole-line problem whose limits violate the spectral gap."""
    xs = [-2.0, -1.0, 1.0, 2.0]
    spec = {
        "n": 1,
        "delta": 2.0,
        "domain": {"kind": "whole"},
        "coefficients": {
            "kind": "table",
            "x": xs,
            "V": [[[1.0]]] * 4,
            "f1": [[[1.0]]] * 4,
            "f2": [[[2.0]]] * 4,
            "decay_scale": 1.0,
        },
        "limits": {
            "Vminus": [[1.0]], "f1minus": [[1.0]], "f2minus": [[2.0]],
            "Vplus": [[1.0]], "f1plus": [[1.0]], "f2plus": [[2.0]],
        },
    }
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(spec))
    return str(path)


def test_check_flags_assumption_violation(capsys, tmp_path):
    code, out, _ = run(capsys, "check", "--problem", _bad_limit_problem(tmp_path),
                       "--lambda-hi", "1.0")
    assert code == 2
    data = json.loads(out)
    assert data["assumptions"]["hyperbolic_minus"] is False


def test_count_reports_n(capsys):
    code, out, _ = run(capsys, "count", "--problem", "robin_constant",
                       "--lambda", "0.0")
    assert code == 0
    data = json.loads(out)
    assert data["N"] == 1
    assert data["morse"] == 1
    assert "left" in data["shelves"]


def test_count_with_oracle_agrees(capsys):
    code, out, _ = run(capsys, "count", "--problem", "robin_constant",
                       "--lambda", "0.0", "--oracle")
    assert code == 0
    data = json.loads(out)
    assert data["oracle_count"] == data["N"] == 1


def test_unknown_problem_is_config_error(capsys):
    code, _, err = run(capsys, "check", "--problem", "no_such_problem")
    assert code == 3
    assert "config error" in err


def test_malformed_json_is_config_error(capsys, tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not valid json")
    code, _, err = run(capsys, "check", "--problem", str(path))
    assert code == 3
    assert "config error" in err


def test_oracle_custom_phi_unsupported(capsys):
    code, _, err = run(capsys, "oracle", "--problem", "custom_phi")
    assert code == 5
    assert "linear" in err


def test_count_oracle_flag_custom_phi_unsupported(capsys):
    code, _, err = run(capsys, "count", "--problem", "custom_phi", "--oracle")
    assert code == 5


def test_box_consistent(capsys):
    code, out, _ = run(capsys, "box", "--problem", "robin_constant")
    assert code == 0
    data = json.loads(out)
    assert data["box_sum"] == 0
    assert set(data["shelves"]) == {"top", "right", "bottom", "left"}


def test_oracle_audit_csv(capsys, tmp_path):
    audit = tmp_path / "audit.csv"
    code, out, _ = run(capsys, "oracle", "--problem", "robin_constant",
                       "--steps", "100", "--audit", str(audit))
    assert code == 0
    data = json.loads(out)
    assert data["count"] == 1
    assert data["method"] == "fd-scan"
    lines = audit.read_text().strip().splitlines()
    assert lines[0] == "lambda,sign,log10_abs_det"
    assert len(lines) == 102


def test_curves_writes_csv_and_png(capsys, tmp_path):
    out_csv = tmp_path / "curves.csv"
    code, out, _ = run(capsys, "curves", "--problem", "constant",
                       "--grid", "5", "--refine", "0", "--out", str(out_csv))
    assert code == 0
    data = json.loads(out)
    assert os.path.exists(data["csv"])
    assert os.path.exists(data["png"])
    assert data["png"].endswith(".png")
    header = out_csv.read_text().strip().splitlines()[0]
    assert header == "lambda,strand_index,x_star"
