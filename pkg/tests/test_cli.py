import json
import os
from pathlib import Path

import pytest

from hostcap.cli import main
from hostcap.io import ingest_heatmap, ingest_region, read_csv

GOLDEN = Path(__file__).parent / "golden"
HELP_COMMANDS = [
    [],
    ["validate"],
    ["powerflow"],
    ["scan", "pq"],
    ["scan", "vi"],
    ["region", "explore"],
    ["region", "correct"],
    ["region", "interpolate"],
    ["ess", "min"],
    ["ess", "cost"],
    ["ess", "sweep"],
    ["selftest"],
]


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def heavy_grid(tmp_path):
    doc = {
        "s_base_mva": 10.0,
        "v_base_kv": 10.0,
        "buses": [
            {"id": "a", "slack": True},
            {"id": "b", "poc": True, "load_p_mw": 30.0},
        ],
        "lines": [{"from": "a", "to": "b", "r_pu": 0.05, "x_pu": 0.05}],
    }
    path = tmp_path / "heavy.json"
    path.write_text(json.dumps(doc))
    return path


@pytest.fixture(scope="module")
def explored(tmp_path_factory):
    out = tmp_path_factory.mktemp("explore")
    assert main(["region", "explore", "--grid", "ninebus", "--axes", "bus7:P,bus8:P", "--directions", "16", "--correct", "--out-dir", str(out)]) == 0
    return out


@pytest.mark.parametrize("cmd", HELP_COMMANDS, ids=lambda c: "-".join(c) or "top")
def test_help_golden(cmd, capsys, monkeypatch):
    monkeypatch.setenv("COLUMNS", "100")
    with pytest.raises(SystemExit) as exc:
        main([*cmd, "--help"])
    assert exc.value.code == 0
    text = capsys.readouterr().out
    golden = GOLDEN / f"help_{'_'.join(cmd) or 'top'}.txt"
    if os.environ.get("HOSTCAP_UPDATE_GOLDEN"):
        golden.write_text(text)
    assert text == golden.read_text()


def test_version(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0 and capsys.readouterr().out.startswith("hostcap ")


def test_unknown_flag_is_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["validate", "--grid", "ninebus", "--frobnicate"])
    assert exc.value.code == 2
    assert "usage:" in capsys.readouterr().err


def test_validate_bundled(capsys):
    code, out, _ = run(capsys, "validate", "--grid", "ninebus")
    assert code == 0 and "9 buses" in out


def test_missing_grid_file_exit_5(capsys, tmp_path):
    code, _, err = run(capsys, "validate", "--grid", str(tmp_path / "none.json"))
    assert code == 5 and "IOFailure" in err


def test_parse_error_exit_3(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"buses": []}')
    code, _, err = run(capsys, "validate", "--grid", str(bad))
    assert code == 3 and "ParseError" in err


def test_powerflow_prints_table(capsys):
    code, out, _ = run(capsys, "powerflow", "--grid", "ninebus", "--set", "bus7:P=1.5")
    assert code == 0 and "bus7" in out


def test_powerflow_not_a_poc(capsys):
    code, _, err = run(capsys, "powerflow", "--grid", "ninebus", "--set", "bus3:P=1")
    assert code == 3 and "NotAPoc" in err


def test_explore_writes_files(explored):
    assert sorted(p.name for p in explored.iterdir()) == ["corrected.json", "corrected_vertices.csv", "region.json", "vertices.csv"]
    region = ingest_region(explored / "region.json")
    corrected = ingest_region(explored / "corrected.json")
    assert region.provenance == "linearized" and corrected.provenance == "corrected"
    assert corrected.area < region.area


def test_explore_without_correct(tmp_path, capsys):
    code, _, _ = run(capsys, "region", "explore", "--grid", "ninebus", "--axes", "bus7:P,bus8:P", "--directions", "8", "--out-dir", str(tmp_path))
    assert code == 0 and sorted(p.name for p in tmp_path.iterdir()) == ["region.json", "vertices.csv"]


def test_infeasible_origin_exit_3(tmp_path, capsys):
    code, _, err = run(capsys, "region", "explore", "--grid", str(heavy_grid(tmp_path)), "--axes", "b:P,b:Q", "--out-dir", str(tmp_path / "o"))
    assert code == 3 and "InfeasibleStart" in err


def test_bad_direction_count_exit_3(tmp_path, capsys):
    code, _, err = run(capsys, "region", "explore", "--grid", "ninebus", "--axes", "bus7:P,bus8:P", "--directions", "5", "--out-dir", str(tmp_path))
    assert code == 3 and "max_directions" in err


def test_correct_round_trip(explored, tmp_path, capsys):
    code, _, _ = run(capsys, "region", "correct", "--grid", "ninebus", "--region", str(explored / "region.json"), "--out", str(tmp_path / "c.json"))
    assert code == 0
    a = ingest_region(tmp_path / "c.json")
    b = ingest_region(explored / "corrected.json")
    assert a.vertices.shape == b.vertices.shape


def test_interpolate(explored, tmp_path, capsys):
    code, out, _ = run(
        capsys, "region", "interpolate", "--grid", "ninebus", "--region", str(explored / "region.json"),
        "--anchors", "8", "--total", "40", "--out-dir", str(tmp_path),
    )
    assert code == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["anchor_count"] + report["interp_count"] + report["fallback_count"] == 40
    _, rows = read_csv(tmp_path / "points.csv")
    assert len(rows) == 40


def test_interpolate_bad_anchor_count(explored, tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["region", "interpolate", "--grid", "ninebus", "--region", str(explored / "region.json"), "--anchors", "6", "--out-dir", str(tmp_path)])
    assert exc.value.code == 2


def test_ess_min_and_cost(explored, capsys):
    region = str(explored / "region.json")
    code, out, _ = run(capsys, "ess", "min", "--region", region, "--point", "0,0")
    assert code == 0 and json.loads(out)["feasible_without_ess"] is True
    code, out, _ = run(capsys, "ess", "cost", "--region", region, "--point=-4,45", "--beta", "300", "--gamma", "650")
    res = json.loads(out)
    assert code == 0 and res["objective"] > 0 and not res["feasible_without_ess"]


def test_ess_pf_miss_exit_3(explored, capsys):
    code, _, err = run(capsys, "ess", "min", "--region", str(explored / "region.json"), "--point", "50,0", "--pf-angle", "89")
    assert code in (0, 3)
    if code == 3:
        assert "LineMissesRegion" in err


def test_ess_sweep_dims(explored, tmp_path, capsys):
    out = tmp_path / "h.csv"
    code, _, _ = run(capsys, "ess", "sweep", "--region", str(explored / "region.json"), "--x=-5:5:11", "--y=-50:50:7", "--mode", "cost", "--out", str(out))
    assert code == 0
    x, y, vals, _ = ingest_heatmap(out)
    assert vals.shape == (7, 11) and (vals == 0).any()


def test_selftest_checks(tmp_path, capsys):
    code, _, _ = run(capsys, "selftest", "--seed", "1", "--grids", "3", "--samples", "30", "--directions", "8", "--out-dir", str(tmp_path))
    assert code == 0
    checks = json.loads((tmp_path / "checks.json").read_text())
    assert checks["powerflow_residual_le_1e-8"] is True
    assert checks["zero_cost_equals_membership"] is True

