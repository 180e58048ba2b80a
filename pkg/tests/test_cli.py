import json
import subprocess
import sys

import pytest

from kahlerlab import catalog
from kahlerlab.cli import EXIT_CONFIG, EXIT_GATE, EXIT_NUMERICAL, EXIT_OK, build_parser, main
from kahlerlab.serialization import load, read_table


def reports(out):
    return {p.name: p.read_bytes() for p in sorted((out / "reports").iterdir())}


def test_empty_selection_passes(tmp_path, capsys):
    assert main(["verify", "--out", str(tmp_path)]) == EXIT_OK
    assert "0/0 gates passed" in capsys.readouterr().out
    assert json.loads((tmp_path / "summary.json").read_text())["reports"] == []


def test_ricci_suite_is_byte_identical_across_runs(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert main(["verify", "--suite", "ricci", "--backend", "torus2", "--seed", "42", "--out", str(out)]) == EXIT_OK
    ra, rb = reports(a), reports(b)
    assert ra and ra == rb
    assert (a / "summary.json").read_bytes() == (b / "summary.json").read_bytes()
    assert set(ra) == {f"{i.id}-seed42.json" for i in catalog.resolve(["ricci"], "torus2")}


def test_report_contents(tmp_path):
    main(["verify", "--suite", "symplectic_pairing", "--seed", "3", "--out", str(tmp_path)])
    rep = json.loads((tmp_path / "reports" / "symplectic_pairing-seed3.json").read_text())
    assert rep["id"] == "symplectic_pairing" and rep["seed"] == 3 and rep["passed"]
    assert "runtime" not in rep


def test_unknown_suite_suggests(capsys):
    assert main(["verify", "--suite", "ricc"]) == EXIT_CONFIG
    assert "did you mean 'ricci'" in capsys.readouterr().err


def test_comma_separated_and_seed_range(capsys):
    code = main(["verify", "--suite", "symplectic_pairing,pair_symplectic_form", "--seed", "1", "--seeds", "2",
                 "--resolution", "16"])
    assert code == EXIT_OK
    assert "4/4 gates passed" in capsys.readouterr().out


def test_impossible_tolerance_fails_gate(capsys):
    code = main(["verify", "--suite", "ricci_form_routes", "--resolution", "16", "--tol", "1e-300"])
    assert code == EXIT_GATE
    assert capsys.readouterr().out.startswith("FAIL ricci_form_routes")


@pytest.mark.parametrize("argv", [
    ["verify", "--backend", "torus4", "--resolution", "99"],
    ["flow", "--backend", "torus2"],
    ["flow", "--h0", "0.3*Q20", "--L", "8"],
    ["verify", "--config", "/nonexistent/scenario.toml"],
    ["wp", "--backend", "sphere", "--scenes", "1"],
])
def test_configuration_errors(argv):
    assert main(argv) == EXIT_CONFIG


def test_loss_of_positivity_is_numerical_failure(capsys):
    assert main(["flow", "--L", "8", "--h0", "5*Y20", "--steps", "3"]) == EXIT_NUMERICAL
    assert "numerical failure" in capsys.readouterr().err


def test_flow_writes_trace_and_snapshot(tmp_path):
    main(["flow", "--type", "kr", "--L", "8", "--steps", "5", "--h0", "0.1*Y20", "--out", str(tmp_path)])
    cols, rows = read_table(tmp_path / "kr_flow_trace.csv")
    assert cols == ["t", "F", "H", "theta_sup", "dt"]
    assert len(rows) == 6
    assert "h_final" in load(tmp_path / "kr_flow_final.kml")


def test_geodesic_outputs(tmp_path):
    code = main(["geodesic", "--L", "8", "--h1", "0.05*Y20", "--slices", "6", "--out", str(tmp_path)])
    assert code == EXIT_OK
    cols, rows = read_table(tmp_path / "geodesic.csv")
    assert cols == ["t", "F", "speed_sq"] and len(rows) == 7


def test_wp_scan(tmp_path):
    assert main(["wp", "--scenes", "3", "--resolution", "16", "--out", str(tmp_path)]) == EXIT_OK
    cols, rows = read_table(tmp_path / "wp_scan.csv")
    assert cols == ["seed", "wp", "oracle", "residual"] and len(rows) == 3


def test_list_json(capsys):
    assert main(["list", "--json"]) == EXIT_OK
    entries = json.loads(capsys.readouterr().out)
    assert [e["id"] for e in entries] == [e["id"] for e in catalog.list_suites()]
    assert all(e["anchor"] for e in entries)


def test_help_documents_expression_grammar():
    text = build_parser().format_help()
    assert "Y20" in text and "sup norm" in text


def test_console_entry_point_runs():
    proc = subprocess.run([sys.executable, "-m", "kahlerlab.cli", "list"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "weil_petersson_form" in proc.stdout
