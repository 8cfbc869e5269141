import json
from pathlib import Path

import pytest

from lemniscates.cli import main

SCENES = Path(__file__).resolve().parent.parent / "scenes"


def scene(name):
    return str(SCENES / f"{name}.json")


def test_approx_disk_passes(tmp_path, capsys):
    out = tmp_path / "report.json"
    svg = tmp_path / "ls.svg"
    code = main(["approx", "--scene", scene("disk"), "--m", "64", "--level", "0.02",
                 "--out-json", str(out), "--out-svg", str(svg)])
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["passed"] and doc["homeo"]["isomorphic"]
    assert doc["config"]["m"] == 64
    assert "timestamp" not in doc
    assert svg.read_text().count("<path") >= 2


def test_approx_check_failure_exit_code(tmp_path):
    code = main(["approx", "--scene", scene("disk"), "--m", "64", "--level", "0.3",
                 "--out-json", str(tmp_path / "r.json")])
    assert code == 1


def test_malformed_scene_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"curves": [], "poles": []}')
    assert main(["approx", "--scene", str(bad)]) == 2
    assert "invalid input" in capsys.readouterr().err
    assert main(["approx", "--scene", str(tmp_path / "missing.json")]) == 2


def test_argparse_errors_exit_two():
    with pytest.raises(SystemExit) as exc:
        main(["approx"])
    assert exc.value.code == 2


def test_runge_taylor_rows(tmp_path):
    csv_path = tmp_path / "runge.csv"
    code = main(["runge", "--r", "z", "--R", "1.5", "--rho", "1.2", "--n-list", "1,2,4",
                 "--out-csv", str(csv_path), "--out-json", str(tmp_path / "runge.json")])
    assert code == 0
    rows = csv_path.read_text().splitlines()
    assert rows[0] == "n,dn-1,sup_error,bound_paper,ratio"
    for line in rows[1:]:
        n, _, err, bound, _ = line.split(",")
        assert float(err) == pytest.approx(2.0 ** -int(n), rel=1e-10)
        assert float(err) <= float(bound)
    doc = json.loads((tmp_path / "runge.json").read_text())
    assert doc["bound_holds"] is True


def test_runge_bad_radii():
    assert main(["runge", "--R", "1.2", "--rho", "1.5"]) == 2


def test_julia_builtin(tmp_path):
    ppm = tmp_path / "z8.ppm"
    code = main(["julia", "--builtin", "z", "--power", "8", "--grid", "128", "--out-ppm", str(ppm),
                 "--out-json", str(tmp_path / "j.json")])
    assert code == 0
    assert ppm.read_bytes().startswith(b"P6\n128 128\n255\n")


def test_julia_power_one_does_not_converge(tmp_path):
    code = main(["julia", "--scene", scene("julia_two_circles"), "--m", "16", "--power", "1",
                 "--grid", "64", "--out-json", str(tmp_path / "j.json")])
    assert code == 3


def test_julia_needs_scene():
    assert main(["julia"]) == 2


def test_probe(monkeypatch, capsys):
    import io

    monkeypatch.setattr("sys.stdin", io.StringIO("0.5 0\n\n0 0.25\n"))
    assert main(["probe", "--scene", scene("disk"), "--m", "16"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 2
    u, um, g = (float(v) for v in lines[0].split())
    assert u == pytest.approx(0.6931471805599453, abs=1e-8)
    assert abs(um - u) < 1e-4
    assert g == pytest.approx(2.0, abs=1e-6)


def test_probe_bad_line(monkeypatch):
    import io

    monkeypatch.setattr("sys.stdin", io.StringIO("0.5\n"))
    assert main(["probe", "--scene", scene("disk")]) == 2


@pytest.mark.parametrize("argv", [
    ["approx", "--scene", "{disk}", "--m", "32", "--level", "0.03"],
    ["runge", "--r", "z", "--n-list", "1,2"],
])
def test_reports_are_byte_identical(tmp_path, argv):
    argv = [a.replace("{disk}", scene("disk")) for a in argv]
    out = tmp_path / "r.json"
    assert main(argv + ["--out-json", str(out)]) in (0, 1)
    first = out.read_bytes()
    out.unlink()
    assert main(argv + ["--out-json", str(out)]) in (0, 1)
    assert out.read_bytes() == first


def test_julia_ppm_independent_of_threads(tmp_path):
    base = ["julia", "--builtin", "z", "--power", "8", "--grid", "96"]
    main(base + ["--threads", "1", "--out-ppm", str(tmp_path / "a.ppm"), "--out-json", str(tmp_path / "a.json")])
    main(base + ["--threads", "2", "--out-ppm", str(tmp_path / "b.ppm"), "--out-json", str(tmp_path / "b.json")])
    assert (tmp_path / "a.ppm").read_bytes() == (tmp_path / "b.ppm").read_bytes()


def test_stamp_adds_timestamp(tmp_path):
    out = tmp_path / "r.json"
    main(["runge", "--r", "z", "--n-list", "1", "--stamp", "--out-json", str(out)])
    assert "timestamp" in json.loads(out.read_text())
