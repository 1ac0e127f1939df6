import csv
import io
import json

import pytest

from evenjacobi.cli import EXIT_CONFIG, EXIT_GATE, EXIT_PASS, build_parser, main
from evenjacobi.exppoly import orbit_sum
from evenjacobi.root_system import build_root_system


def run(argv, capsys):
    code = main(argv)
    return code, capsys.readouterr()


def test_info_tables(capsys):
    code, out = run(["info", "--system", "A1", "-m", "2"], capsys)
    info = json.loads(out.out)
    assert code == EXIT_PASS and info["positive_roots"][0]["rho_alpha"] == "1"
    code, out = run(["info", "--system", "B2", "-m", "2", "4"], capsys)
    info = json.loads(out.out)
    assert code == EXIT_PASS and all(r["rho_alpha_ge_half_m"] for r in info["positive_roots"])


def test_odd_multiplicity_rejected(capsys):
    code, out = run(["info", "--system", "A1", "-m", "3"], capsys)
    assert code == EXIT_CONFIG and "even" in out.err


@pytest.mark.parametrize("system,mults,level,rows", [("A1", ["2"], "4", 5), ("A2", ["2"], "3", 16)])
def test_jacobi_csv(system, mults, level, rows, capsys):
    code, out = run(["jacobi", "--system", system, "-m", *mults, "--level", level], capsys)
    table = list(csv.DictReader(io.StringIO(out.out)))
    assert code == EXIT_PASS and len(table) == rows
    assert all(r["F_at_identity"] == "1" and r["norm_sq_gram"] == r["norm_sq_closed"] for r in table)


def test_jacobi_empty_range(capsys):
    code, out = run(["jacobi", "--system", "A1", "-m", "2", "--level", "-1"], capsys)
    assert code == EXIT_PASS and out.out.strip() == "mu_coords,c_munu,norm_sq_gram,norm_sq_closed,d,d_quot,F_at_identity"


def test_config_file_and_flag_override(tmp_path, capsys):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"system": "A1", "multiplicities": [4], "level": 2}))
    code, out = run(["jacobi", "--config", str(cfg)], capsys)
    assert code == EXIT_PASS and len(out.out.strip().splitlines()) == 4
    code, out = run(["jacobi", "--config", str(cfg), "--level", "1"], capsys)
    assert len(out.out.strip().splitlines()) == 3
    cfg.write_text(json.dumps({"bogus": 1}))
    assert main(["jacobi", "--config", str(cfg)]) == EXIT_CONFIG


def test_transform_and_synthesize_files(tmp_path, capsys):
    rs = build_root_system("A1", 2)
    poly = tmp_path / "f.json"
    poly.write_text(json.dumps((orbit_sum(rs, (2,)) * orbit_sum(rs, (1,))).to_json_obj()))
    coeffs, grid = tmp_path / "c.csv", tmp_path / "g.csv"
    assert main(["transform", "--system", "A1", "-m", "2", "-i", str(poly), "-o", str(coeffs)]) == EXIT_PASS
    rows = list(csv.DictReader(open(coeffs)))
    assert {r["mu_coords"]: r["value"] for r in rows} == {"1": "0/1", "3": "2/1"}
    assert main(["synthesize", "--system", "A1", "-m", "2", "-i", str(coeffs), "--grid", "64", "-o",
                 str(grid)]) == EXIT_PASS
    assert main(["transform", "--system", "A1", "-m", "2", "-i", str(grid), "--level", "4"]) == EXIT_PASS
    assert main(["transform", "--system", "A1", "-m", "2", "-i", str(grid), "--level", "40"]) == EXIT_GATE
    capsys.readouterr()


def test_pw_check_verdict_is_deterministic(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    argv = ["pw-check", "--system", "A1", "-m", "2", "--epsilon", "0.3", "--seed", "1"]
    assert main(argv + ["-o", str(a)]) == EXIT_PASS
    assert main(argv + ["-o", str(b)]) == EXIT_PASS
    assert a.read_bytes() == b.read_bytes()
    verdict = json.loads(a.read_text())
    assert verdict["passed"] and verdict["runs"][0]["support"]["passed"]
    assert verdict["tol"] == 1e-06 and "gates" in verdict


def test_pw_rejects_large_R(capsys):
    code, out = run(["pw-check", "--system", "A1", "-m", "2", "--R", "2.0"], capsys)
    assert code == EXIT_CONFIG and "not small" in out.err


def test_wave_rank_one_emits_snapshots(tmp_path, capsys):
    code, out = run(["wave", "--system", "A1", "-m", "2", "--epsilon", "0.2", "--emit", str(tmp_path)], capsys)
    verdict = json.loads(out.out)
    assert code == EXIT_PASS
    assert verdict["finite_speed"] == "pass" and verdict["huygens"] == "n-a"
    assert sorted(p.name for p in tmp_path.iterdir()) == ["wave_tau0.csv", "wave_tau1.csv", "wave_tau2.csv"]


def test_wave_even_rank_huygens_not_asserted(capsys):
    code, out = run(["wave", "--system", "A1xA1", "-m", "2", "--assert-huygens"], capsys)
    assert code == EXIT_CONFIG
    assert json.loads(out.out)["huygens"].startswith("n-a")


def test_help_documents_csv_columns():
    text = build_parser().format_help()
    assert "norm_sq_closed" in text and "Exit codes" in text
