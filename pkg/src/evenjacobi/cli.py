"""Batch command-line front end.

Exit codes: 0 pass, 1 invariant failure, 2 configuration error, 3 numerical gate failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from .exppoly import ExpPoly
from .root_system import KINDS, RootSystemData, RootSystemError, build_root_system

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG, EXIT_GATE = 0, 1, 2, 3

CSV_HELP = """\
CSV outputs
  jacobi (--table summary): mu_coords, c_munu ("nu:p/q;..."), norm_sq_gram, norm_sq_closed,
                            d, d_quot, F_at_identity   (rationals as p/q)
  jacobi (--table coeffs):  mu_coords, nu_coords, c_munu_num, c_munu_den, norm_sq
  transform:                mu_coords, value (p/q when exact) or value_re, value_im
  synthesize, pw-check, wave fields:
                            s1..sn (fractional Gamma coordinates), H1..Hn (orthonormal
                            coordinates), value; first line "# {json header}"
Coordinates of weights are the integers mu_a = <mu, a>/<a, a> at the simple roots.

Exit codes: 0 pass, 1 invariant failure, 2 configuration error, 3 numerical gate failure.
"""


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# configuration


DEFAULTS = {
    "system": "A1",
    "multiplicities": [2],
    "level": 4,
    "table": "summary",
    "R": None,
    "epsilon": [0.3],
    "taus": [0.3, 0.5, 0.7],
    "grid": None,
    "tol": None,
    "profile": None,
    "seed": 0,
    "out": None,
    "emit": None,
    "input": None,
    "assert_huygens": False,
}


def _load_config(args: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS)
    if args.config:
        try:
            with open(args.config) as fh:
                cfg.update(json.load(fh))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
    for key in DEFAULTS:
        val = getattr(args, key, None)
        if val is not None and val is not False:
            cfg[key] = val
    unknown = set(cfg) - set(DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return cfg


def _system(cfg) -> RootSystemData:
    try:
        mults = cfg["multiplicities"]
        return build_root_system(cfg["system"], [int(m) for m in (mults if isinstance(mults, list) else [mults])])
    except RootSystemError as exc:
        raise ConfigError(str(exc)) from exc


def _radius(cfg, rs: RootSystemData) -> float:
    """R from the config (absolute), defaulting to 0.9 of the maximal admissible radius."""
    rmax = rs.max_small_radius
    R = cfg["R"] if cfg["R"] is not None else 0.9 * rmax
    if not 0 < R <= rmax:
        raise ConfigError(f"R = {R} is not small: B_R must lie in {{|a(H)| <= pi/2}}, maximal R = {rmax:.12f}")
    return float(R)


def _fixed(obj):
    """Floats rounded to 10 significant digits so that verdicts are byte-stable."""
    if isinstance(obj, bool) or obj is None or isinstance(obj, (int, str)):
        return obj
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return float(f"{x:.10g}") if math.isfinite(x) else str(x)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, Fraction):
        return f"{obj.numerator}/{obj.denominator}"
    if isinstance(obj, dict):
        return {str(k): _fixed(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_fixed(v) for v in obj]
    return str(obj)


def _emit_json(obj, path=None) -> None:
    text = json.dumps(_fixed(obj), sort_keys=True, indent=2) + "\n"
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _write_rows(rows: list[dict], path, columns: list[str]) -> None:
    fh = open(path, "w", newline="") if path else sys.stdout
    try:
        wr = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        wr.writeheader()
        for r in rows:
            wr.writerow(r)
    finally:
        if path:
            fh.close()


# ---------------------------------------------------------------------------
# commands


def cmd_info(cfg) -> int:
    rs = _system(cfg)
    info = rs.describe()
    _emit_json(info, cfg["out"])
    return EXIT_PASS if info["rho_alpha_bound_holds"] else EXIT_FAIL


def cmd_jacobi(cfg) -> int:
    from .jacobi import jacobi_summary, jacobi_table

    rs = _system(cfg)
    level = int(cfg["level"])
    if cfg["table"] == "coeffs":
        rows = jacobi_table(rs, level) if level >= 0 else []
        _write_rows(rows, cfg["out"], ["mu_coords", "nu_coords", "c_munu_num", "c_munu_den", "norm_sq"])
        return EXIT_PASS
    rows = jacobi_summary(rs, level) if level >= 0 else []
    _write_rows(rows, cfg["out"], ["mu_coords", "c_munu", "norm_sq_gram", "norm_sq_closed", "d", "d_quot",
                                   "F_at_identity"])
    ok = all(r["norm_sq_gram"] == r["norm_sq_closed"] and r["d"] == r["d_quot"] and r["F_at_identity"] == "1"
             for r in rows)
    return EXIT_PASS if ok else EXIT_FAIL


def read_grid_csv(rs: RootSystemData, path):
    """Inverse of GridFunction.to_csv for full tensor grids."""
    from .transform_pw import GridFunction

    with open(path) as fh:
        lines = fh.read().splitlines()
    header = json.loads(lines[0][1:]) if lines and lines[0].startswith("#") else {}
    body = [ln for ln in lines if not ln.startswith("#")]
    rows = list(csv.DictReader(body))
    n = rs.rank
    s = np.array([[float(r[f"s{j + 1}"]) for j in range(n)] for r in rows])
    vals = np.array([float(r["value"]) if "value" in r else complex(float(r["value_re"]), float(r["value_im"]))
                     for r in rows])
    axes = [np.unique(np.round(s[:, j], 10)) for j in range(n)]
    idx = tuple(np.searchsorted(axes[j], np.round(s[:, j], 10)) for j in range(n))
    values = np.zeros([len(a) for a in axes], dtype=vals.dtype)
    values[idx] = vals
    return GridFunction(rs, axes, values, bool(header.get("w_invariant", True)), header)


def cmd_transform(cfg) -> int:
    from .transform_pw import GateFailure, transform_exact, transform_numeric

    rs = _system(cfg)
    src = cfg["input"]
    if not src:
        raise ConfigError("transform needs --input (ExpPoly JSON or grid CSV)")
    try:
        if str(src).endswith(".json"):
            poly = ExpPoly.from_json_obj(rs, json.loads(Path(src).read_text()))
            c = transform_exact(poly, symmetrize=False)
            rows = [{"mu_coords": " ".join(map(str, w)), "value": f"{v.numerator}/{v.denominator}"}
                    for w, v in zip(c.weights.tolist(), c.values)]
            _write_rows(rows, cfg["out"], ["mu_coords", "value"])
            return EXIT_PASS
        g = read_grid_csv(rs, src)
        c = transform_numeric(g, int(cfg["level"]), gate_tol=cfg["tol"] or 1e-10)
    except GateFailure as exc:
        print(f"gate failure: {exc}", file=sys.stderr)
        return EXIT_GATE
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    rows = [{"mu_coords": " ".join(map(str, w)), "value_re": f"{v.real:.12e}", "value_im": f"{v.imag:.12e}"}
            for w, v in zip(c.weights.tolist(), c.values)]
    _write_rows(rows, cfg["out"], ["mu_coords", "value_re", "value_im"])
    return EXIT_PASS


def cmd_synthesize(cfg) -> int:
    from .transform_pw import GateFailure, SpectralCoeffs, cell_axes, synthesize

    rs = _system(cfg)
    src = cfg["input"]
    if not src:
        raise ConfigError("synthesize needs --input (coefficient CSV as written by transform)")
    with open(src) as fh:
        rows = list(csv.DictReader(fh))
    ws = np.array([[int(x) for x in r["mu_coords"].split()] for r in rows], dtype=int).reshape(-1, rs.rank)
    if rows and "value" in rows[0]:
        vals = np.array([float(Fraction(r["value"])) for r in rows], dtype=complex)
    else:
        vals = np.array([complex(float(r["value_re"]), float(r["value_im"])) for r in rows])
    level = int(ws.max()) if len(ws) else 0
    c = SpectralCoeffs(rs, ws, vals, level)
    try:
        g = synthesize(c, cell_axes(rs, int(cfg["grid"] or 64)), cfg["tol"])
    except GateFailure as exc:
        print(f"gate failure: {exc}", file=sys.stderr)
        return EXIT_GATE
    g.to_csv(cfg["out"] or "/dev/stdout", {"system": rs.kind, "grid": [len(a) for a in g.axes],
                                           "multiplicities": list(rs.multiplicities)})
    return EXIT_PASS


def cmd_pw(cfg) -> int:
    from .transform_pw import GateFailure, cell_axes, invwithD_check, pw_from_bump, pw_synthesize_and_support

    rs = _system(cfg)
    R = _radius(cfg, rs)
    tol = cfg["tol"] or 1e-6
    profile = cfg["profile"] or "sharp:16"
    N = int(cfg["grid"] or (512 if rs.rank == 1 else 128))
    axes = cell_axes(rs, N)
    verdict = {"system": rs.kind, "multiplicities": list(rs.multiplicities), "R": R, "tol": tol,
               "profile": profile, "grid": N, "gates": {"quadrature": 1e-8, "truncation": 1e-8}, "runs": []}
    ok = True
    try:
        for frac in cfg["epsilon"]:
            eps = float(frac) * R
            pw = pw_from_bump(rs, eps, profile)
            rep = pw_synthesize_and_support(pw, axes, tol)
            field_ = rep.pop("field")
            run = {"epsilon": eps, "epsilon_over_R": float(frac), "support": rep}
            if rs.is_product_of_rank_one:
                run["invwithD"] = invwithD_check(pw, axes, radius=rep["spectral_radius"], tol=tol)
                ok &= bool(run["invwithD"]["passed"])
            ok &= bool(rep["passed"])
            if cfg["emit"]:
                Path(cfg["emit"]).mkdir(parents=True, exist_ok=True)
                field_.to_csv(Path(cfg["emit"]) / f"pw_eps{frac}.csv",
                              {"system": rs.kind, "R": R, "epsilon": eps, "tol": tol, "grid": N})
            verdict["runs"].append(run)
    except GateFailure as exc:
        verdict["gate_failure"] = str(exc)
        _emit_json(verdict, cfg["out"])
        return EXIT_GATE
    verdict["passed"] = ok
    _emit_json(verdict, cfg["out"])
    return EXIT_PASS if ok else EXIT_FAIL


def cmd_wave(cfg) -> int:
    from .transform_pw import GateFailure, cell_axes, pw_from_bump
    from .wave import (check_finite_speed, check_huygens_shell, cross_check_uodd, half_cell_axes, solve_wave)

    rs = _system(cfg)
    R = _radius(cfg, rs)
    n = rs.rank
    eps_list = cfg["epsilon"]
    frac = float(eps_list[0] if isinstance(eps_list, list) else eps_list)
    eps = frac * R
    tol = cfg["tol"] or 1e-5
    huygens_applies = n % 2 == 1 and n >= 3
    if cfg["assert_huygens"] and not huygens_applies:
        why = "n even" if n % 2 == 0 else "n = 1"
        _emit_json({"system": rs.kind, "huygens": f"n-a: {why}: not asserted"}, cfg["out"])
        return EXIT_CONFIG
    profile = cfg["profile"] or "sharp:32"
    N = int(cfg["grid"] or (1024 if n == 1 else 128))
    axes = half_cell_axes(rs, N) if rs.is_product_of_rank_one else cell_axes(rs, N)
    taus = [float(t) * (R - eps) for t in cfg["taus"]]
    verdict = {"system": rs.kind, "multiplicities": list(rs.multiplicities), "R": R, "epsilon": eps,
               "taus": taus, "tol": tol, "profile": profile, "grid": N, "gates": {"truncation": 1e-8}}
    try:
        pw = pw_from_bump(rs, eps, profile)
        wf = solve_wave(pw, R, taus, axes)
    except GateFailure as exc:
        verdict["gate_failure"] = str(exc)
        _emit_json(verdict, cfg["out"])
        return EXIT_GATE
    fs = check_finite_speed(wf, tol)
    verdict["finite_speed"] = "pass" if fs["passed"] else "fail"
    verdict["finite_speed_report"] = fs
    verdict["energy_drift"] = wf.energy_drift()
    verdict["spectral_radius"] = wf.spectral_radius
    ok = fs["passed"] and verdict["energy_drift"] <= 1e-10
    if huygens_applies:
        hs = check_huygens_shell(wf, tol)
        verdict["huygens"] = "pass" if hs["passed"] else "fail"
        verdict["huygens_report"] = hs
        ok &= hs["passed"]
    else:
        verdict["huygens"] = "n-a"
    if n == 3:
        reps = [cross_check_uodd(wf, t) for t in taus if t > 0]
        verdict["uodd_discrepancy"] = max(r["l2_discrepancy"] for r in reps)
        verdict["calibrated_constant"] = reps[-1]["calibrated_constant"]
        verdict["sphere_prefactor"] = reps[-1]["sphere_prefactor"]
        verdict["uodd_reports"] = reps
        ok &= all(r["passed"] for r in reps)
    if cfg["emit"]:
        Path(cfg["emit"]).mkdir(parents=True, exist_ok=True)
        for j, (t, g) in enumerate(wf.u.items()):
            g.to_csv(Path(cfg["emit"]) / f"wave_tau{j}.csv",
                     {"system": rs.kind, "R": R, "epsilon": eps, "tau": t, "tol": tol, "grid": N})
    verdict["passed"] = bool(ok)
    _emit_json(verdict, cfg["out"])
    return EXIT_PASS if ok else EXIT_FAIL


COMMANDS = {"info": cmd_info, "jacobi": cmd_jacobi, "transform": cmd_transform, "synthesize": cmd_synthesize,
            "pw-check": cmd_pw, "wave": cmd_wave}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="evenjacobi", description="Jacobi polynomials on tori with even multiplicities: "
                                "exact tables, transforms, support and wave experiments.",
                                epilog=CSV_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON file with any of the flag names as keys")
        sp.add_argument("--system", choices=KINDS)
        sp.add_argument("--multiplicities", "-m", type=int, nargs="+", help="one even integer per root orbit")
        sp.add_argument("--out", "-o", help="output file (default stdout)")
        sp.add_argument("--seed", type=int)

    sp = sub.add_parser("info", help="roots, rho, rho_a table, |W| and the rho_a >= m_a/2 verdict")
    common(sp)
    sp = sub.add_parser("jacobi", help="CSV of Jacobi polynomial data up to a level",
                        epilog=CSV_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    common(sp)
    sp.add_argument("--level", type=int)
    sp.add_argument("--table", choices=["summary", "coeffs"])
    sp = sub.add_parser("transform", help="Jacobi transform of an ExpPoly JSON (exact) or a grid CSV (quadrature)",
                        epilog=CSV_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    common(sp)
    sp.add_argument("--input", "-i")
    sp.add_argument("--level", type=int)
    sp.add_argument("--tol", type=float, help="quadrature gate")
    sp = sub.add_parser("synthesize", help="evaluate a coefficient CSV on a fundamental-cell grid",
                        epilog=CSV_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    common(sp)
    sp.add_argument("--input", "-i")
    sp.add_argument("--grid", type=int)
    sp.add_argument("--tol", type=float, help="truncation gate (omit to skip)")
    sp = sub.add_parser("pw-check", help="support theorem experiment for bump-generated data",
                        epilog=CSV_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    common(sp)
    sp.add_argument("--R", type=float, help="type radius (default 0.9 of the maximal admissible radius)")
    sp.add_argument("--epsilon", type=float, nargs="+", help="bump radii as fractions of R")
    sp.add_argument("--grid", type=int)
    sp.add_argument("--tol", type=float)
    sp.add_argument("--profile", help='bump profile: "standard" or "sharp:a"')
    sp.add_argument("--emit", help="directory for field CSVs")
    sp = sub.add_parser("wave", help="modified wave equation: finite speed, Huygens, Kirchhoff cross-check",
                        epilog=CSV_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    common(sp)
    sp.add_argument("--R", type=float)
    sp.add_argument("--epsilon", type=float, nargs="+", help="datum radius as a fraction of R")
    sp.add_argument("--taus", type=float, nargs="+", help="times as fractions of R - epsilon")
    sp.add_argument("--grid", type=int)
    sp.add_argument("--tol", type=float)
    sp.add_argument("--profile")
    sp.add_argument("--emit", help="directory for per-snapshot CSVs")
    sp.add_argument("--assert-huygens", action="store_true", dest="assert_huygens")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load_config(args)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
