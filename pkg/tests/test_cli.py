import json
from pathlib import Path

import pytest

from charpde.cli import main
from charpde.specfile import load_spec, spec_from_dict, spec_to_dict
from charpde.verify import check_match, get_oracle

SPECS = Path(__file__).resolve().parent.parent / "specs"
ALL_SPECS = sorted(p.name for p in SPECS.glob("*.json"))


def write(tmp_path, doc, name="problem.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def eq4_doc():
    return json.loads((SPECS / "eq4.json").read_text())


def test_solve_writes_csv_and_report(tmp_path, capsys):
    out = tmp_path / "eq4.csv"
    assert main(["solve", str(SPECS / "eq4.json"), "-o", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "x,t,u,status"
    assert len(lines) == 1 + 41 * 41
    assert all(line.endswith(",ok") for line in lines[1:])
    report = json.loads(out.with_suffix(".json").read_text())
    assert report["grid"]["status_counts"]["ok"] == 1681
    assert report["residual"]["max_abs"] < 1e-2
    assert "timing_s" not in report
    assert "wrote" in capsys.readouterr().out


def test_unknown_family_names_the_field(tmp_path, capsys):
    doc = eq4_doc()
    doc["family"] = "quadratic"
    assert main(["solve", write(tmp_path, doc)]) == 1
    assert "family" in capsys.readouterr().err


@pytest.mark.parametrize(
    "section, key, value, field",
    [
        ("coefficients", "c", "x", "coefficients.c"),
        ("grid", "nx", 1, "grid"),
        ("coefficients", "a", "x +", "a"),
        ("data", "phi", "u", "phi"),
        ("domain", "t_max", -1.0, "domain"),
    ],
)
def test_invalid_problem_files(tmp_path, capsys, section, key, value, field):
    doc = eq4_doc()
    doc[section][key] = value
    assert main(["solve", write(tmp_path, doc)]) == 1
    assert field in capsys.readouterr().err


def test_missing_file(capsys):
    assert main(["solve", "no/such/file.json"]) == 1
    assert "cannot read" in capsys.readouterr().err


def test_too_many_failed_nodes(tmp_path, capsys):
    out = tmp_path / "singular.csv"
    assert main(["solve", str(SPECS / "eq7_singular.json"), "-o", str(out)]) == 2
    assert "blow_up" in out.read_text()
    assert "failed" in capsys.readouterr().err


def test_reduce_reports_the_constant(tmp_path, capsys):
    out = tmp_path / "eq20_reduce.json"
    assert main(["reduce", str(SPECS / "eq20.json"), "-o", str(out)]) == 0
    summary = json.loads(out.read_text())
    assert summary["C"] == pytest.approx(1.0, abs=1e-8)
    assert summary["delta_C"] <= 1e-8 and summary["consistent"]
    assert main(["reduce", str(SPECS / "abel.json")]) == 0


def test_reduce_flags_inconsistent_data(capsys):
    assert main(["reduce", str(SPECS / "abel_perturbed.json")]) == 3
    err = capsys.readouterr().err
    assert "inconsistent" in err and "C = " in err
    assert main(["solve", str(SPECS / "abel_perturbed.json")]) == 3


def test_reduce_rejects_first_order(capsys):
    assert main(["reduce", str(SPECS / "eq4.json")]) == 1


def test_verify_against_oracle(capsys):
    assert main(["verify", str(SPECS / "eq11.json")]) == 0
    out = capsys.readouterr().out
    assert "PASS oracle eq11" in out and "FAIL" not in out


def test_verify_rejects_mismatched_oracle(capsys):
    assert main(["verify", str(SPECS / "eq11.json"), "--oracle", "eq4"]) == 1
    assert "mismatch" in capsys.readouterr().err
    assert main(["verify", str(SPECS / "eq11.json"), "--oracle", "nope"]) == 1


def test_verify_failing_check_exits_4(tmp_path, capsys):
    doc = eq4_doc()
    doc["verify"]["error_tol"] = 1e-14
    assert main(["verify", write(tmp_path, doc)]) == 4
    assert "FAIL oracle eq4" in capsys.readouterr().out


def test_convergence_command(tmp_path, capsys):
    out = tmp_path / "conv.json"
    assert main(["convergence", str(SPECS / "eq4.json"), "-o", str(out)]) == 0
    study = json.loads(out.read_text())
    assert 1.7 <= study["slope"] <= 2.3
    assert "PASS slope" in capsys.readouterr().out


@pytest.mark.parametrize("name", ["eq4.json", "abel.json"])
def test_outputs_do_not_depend_on_thread_count(tmp_path, name):
    texts = []
    for threads in (1, 2):
        out = tmp_path / f"run{threads}" / "out.csv"
        out.parent.mkdir()
        assert main(["solve", str(SPECS / name), "-o", str(out), "--threads", str(threads)]) == 0
        texts.append((out.read_bytes(), out.with_suffix(".json").read_bytes()))
    assert texts[0] == texts[1]


@pytest.mark.parametrize("name", ALL_SPECS)
def test_problem_files_round_trip(name):
    spec, settings = load_spec(SPECS / name)
    again, settings_again = spec_from_dict(json.loads(json.dumps(spec_to_dict(spec, settings))))
    assert again == spec and settings_again == settings
    if settings.oracle is not None:
        check_match(spec, get_oracle(settings.oracle))
