import json

import pytest

from loopdress.cli import main, read_csv

SPEC = {
    "name": "kdv",
    "hierarchy": {"kind": "kdv"},
    "chain": [{"type": "kdv", "xi": 0.5, "k": 1.0}],
    "grid": {"x": [-4, 4], "t": [-0.2, 0.2], "hx": 0.05, "ht": 0.05},
    "outputs": {"fields": ["q"], "checks": [
        {"kind": "closed-form", "form": "kdv-soliton", "params": {"xi": 0.5, "k": 1.0}, "tol": 1e-10},
        {"kind": "reality"}]},
}


@pytest.fixture
def spec_file(tmp_path):
    p = tmp_path / "kdv.json"
    p.write_text(json.dumps(SPEC, indent=1))
    return p


def test_generate_then_verify(spec_file, tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["generate", str(spec_file), "-o", str(out)]) == 0
    man = json.loads((out / "manifest.json").read_text())
    assert set(man["files"]) == {"q"}
    capsys.readouterr()
    assert main(["verify", str(out / "manifest.json")]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["passed"] and any(c["name"] == "artifact:q" for c in rep["checks"])


def test_generate_is_deterministic(spec_file, tmp_path):
    for d in ("a", "b"):
        assert main(["generate", str(spec_file), "-o", str(tmp_path / d)]) == 0
    assert (tmp_path / "a" / "q.csv").read_bytes() == (tmp_path / "b" / "q.csv").read_bytes()


def test_tampered_csv_fails(spec_file, tmp_path):
    out = tmp_path / "run"
    main(["generate", str(spec_file), "-o", str(out)])
    p = out / "q.csv"
    lines = p.read_text().splitlines()
    x, t, re_, im = lines[5].split(",")
    lines[5] = ",".join([x, t, repr(float(re_) + 1e-6), im])
    p.write_text("\n".join(lines) + "\n")
    assert main(["verify", str(out / "manifest.json"), "-o", str(tmp_path / "r.json")]) == 1


def test_missing_csv(spec_file, tmp_path):
    out = tmp_path / "run"
    main(["generate", str(spec_file), "-o", str(out)])
    (out / "q.csv").unlink()
    assert main(["verify", str(out / "manifest.json")]) == 2


def test_usage_errors(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"name": "x",\n "grid": }')
    assert main(["verify", str(bad)]) == 2
    assert "line 2" in capsys.readouterr().err
    assert main(["paper-example", "no-such-example"]) == 2
    assert main(["verify", str(tmp_path / "absent.json")]) == 2
    assert main(["--grid-scale", "0", "verify", str(bad)]) == 2
    with pytest.raises(SystemExit) as e:
        main(["frobnicate"])
    assert e.value.code == 2


def test_failing_check_exits_one(tmp_path):
    d = json.loads(json.dumps(SPEC))
    d["outputs"]["checks"][0]["params"]["k"] = 1.1
    p = tmp_path / "wrong.json"
    p.write_text(json.dumps(d))
    assert main(["verify", str(p)]) == 1


def test_grid_scale(spec_file, tmp_path):
    out = tmp_path / "coarse"
    assert main(["--grid-scale", "2", "--threads", "1", "generate", str(spec_file), "-o", str(out)]) == 0
    man = json.loads((out / "manifest.json").read_text())
    assert man["grid"]["hx"] == pytest.approx(0.1)
    assert read_csv(out / "q.csv", (5, 81)).shape == (5, 81)


@pytest.mark.parametrize("name", ["kdv-sech2", "bianchi-sge", "gd-phi-table"])
def test_paper_example(name, tmp_path):
    assert main(["paper-example", name, "-o", str(tmp_path / name)]) == 0
    assert json.loads((tmp_path / name / "report.json").read_text())["passed"]
