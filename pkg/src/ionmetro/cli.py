"""Command-line front end.

Every subcommand reads an optional TOML config (``--config``) whose sections
are overridden by explicit flags, writes plot-ready CSV/JSON files into the
output directory (``--out``, then ``[output] dir``, then the
``IONMETRO_OUTPUT_DIR`` environment variable, then the working directory)
and prints a JSON summary.  Failures print a JSON error object on stderr and
exit with the error's code (2 config, 3 truncation, 4 fit, 5 integrator,
6 Fisher domain, 1 other).
"""

import argparse
import hashlib
import json
import math
import os
import sys

import numpy as np
import tomli

from . import __version__, distributions, gates
from .errors import ConfigError, IonMetroError
from .export import (plain, read_fringe_csv, read_rabi_csv, write_csv, write_curve_csv,
                     write_fringe_csv, write_json, write_sensitivity_csv)
from .fitting import (calibrate_beamsplitter, fit_fock_populations, fit_fock_populations_offres,
                      fit_fringe, rabi_design_matrix, su2_contrast)
from .fock import (Truncation, fidelity, fock_marginal, fock_state, make_vacuum, number_stats,
                   product_state, reduced_purity)
from .interferometer import (CIRCUIT_KINDS, CircuitProgram, FringeModel, Readout,
                             nbar_to_size, sweep_fringe)
from .metrology import cr_bound, db_vs_sql, max_sensitivity, model_for_mean_n, sql
from .sideband import SidebandConfig, offres_response

ENV_OUT = "IONMETRO_OUTPUT_DIR"
SECTIONS = ("circuit", "readout", "grid", "sampling", "truncation", "output", "sideband")


# ---------------------------------------------------------------- config

def load_config(path):
    if path is None:
        return {}
    try:
        with open(path, "rb") as fh:
            data = tomli.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"config {path} is not valid TOML: {exc}") from None
    unknown = set(data) - set(SECTIONS)
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    return data


def _set(cfg, section, key, value):
    if value is not None:
        cfg.setdefault(section, {})[key] = value


def _get(cfg, section, key, default=None):
    return cfg.get(section, {}).get(key, default)


def _float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}") from None


def _out_dir(args, cfg):
    return args.out or _get(cfg, "output", "dir") or os.environ.get(ENV_OUT) or "."


def _path(args, cfg, name):
    prefix = _get(cfg, "output", "prefix", "")
    return os.path.join(_out_dir(args, cfg), f"{prefix}{name}")


def _hashable(cfg, command, args):
    cfg = {k: v for k, v in cfg.items() if k != "output"}
    return {"command": command, "config": cfg, "paper_literal": bool(args.paper_literal)}


def program_from_config(cfg):
    c = cfg.get("circuit", {})
    kind = c.get("kind")
    if kind not in CIRCUIT_KINDS:
        raise ConfigError(f"[circuit] kind must be one of {CIRCUIT_KINDS}, got {kind!r}")
    given = [k for k in ("alpha0", "r0", "nbar") if k in c]
    if len(given) != 1:
        raise ConfigError("[circuit] needs exactly one of alpha0, r0 or nbar")
    if "nbar" in c:
        size = nbar_to_size(kind, float(c["nbar"]))
    else:
        key = given[0]
        if (key == "alpha0") != (kind == "su2"):
            raise ConfigError(f"[circuit] {key} does not apply to kind {kind}")
        size = float(c[key])
    r = cfg.get("readout", {})
    readout = Readout(r.get("mode", "a"), r.get("kind", "red"), float(r.get("beta", math.pi / 2)))
    t = cfg.get("truncation")
    trunc = None
    if t:
        trunc = Truncation(int(t["n_max_a"]), int(t["n_max_b"]), float(t.get("leak_tol", 1e-9)))
    return CircuitProgram(kind, size, readout, float(c.get("phi_offset", 0.0)),
                          float(c.get("v_offset", 0.0)), trunc)


def phi_grid_from_config(cfg):
    g = cfg.get("grid", {})
    if "phi" in g:
        grid = np.asarray(g["phi"], dtype=float)
    else:
        points = int(g.get("points", 41))
        grid = np.linspace(float(g.get("phi_start", 0.0)), float(g.get("phi_stop", 2 * math.pi)),
                           points) if points > 0 else np.array([])
    if grid.size == 0:
        raise ConfigError("phase grid is empty")
    return grid


def sideband_from_config(cfg):
    s = cfg.get("sideband", {})
    try:
        return SidebandConfig(float(s["eta_a"]), float(s.get("eta_b", s["eta_a"])),
                              float(s["omega_carrier"]), float(s.get("delta_1", 0.0)),
                              float(s.get("delta_2", 0.0)))
    except KeyError as exc:
        raise ConfigError(f"[sideband] missing key {exc.args[0]!r}") from None


# ---------------------------------------------------------------- commands

def cmd_fringe(args, cfg):
    _set(cfg, "circuit", "kind", args.kind)
    if args.size is not None:
        key = "alpha0" if _get(cfg, "circuit", "kind") == "su2" else "r0"
        for k in ("alpha0", "r0", "nbar"):
            cfg.get("circuit", {}).pop(k, None)
        _set(cfg, "circuit", key, args.size)
    if args.nbar is not None:
        for k in ("alpha0", "r0"):
            cfg.get("circuit", {}).pop(k, None)
        _set(cfg, "circuit", "nbar", args.nbar)
    _set(cfg, "readout", "beta", args.beta)
    _set(cfg, "grid", "points", args.points)
    _set(cfg, "sampling", "shots", args.shots)
    _set(cfg, "sampling", "seed", args.seed)
    program = program_from_config(cfg)
    grid = phi_grid_from_config(cfg)
    shots = _get(cfg, "sampling", "shots")
    seed = _get(cfg, "sampling", "seed")
    ds = sweep_fringe(program, grid, shots, seed)
    h = _hashable(cfg, "fringe", args)
    files = [write_fringe_csv(_path(args, cfg, "fringe.csv"), ds, h)]
    if program.readout.kind == "red":
        model = FringeModel.from_program(program, args.paper_literal)
        name = f"{program.kind}_analytic" + ("_literal" if args.paper_literal else "")
        files.append(write_curve_csv(_path(args, cfg, "fringe_model.csv"), grid,
                                     model.p_down(grid), name, h, "phi_rad"))
    return {"files": files, "points": len(grid), "kind": program.kind, "size": program.size,
            "shots": shots, "seed": seed}


def cmd_sensitivity(args, cfg):
    kinds = args.kinds.split(",") if args.kinds else list(CIRCUIT_KINDS)
    for k in kinds:
        if k not in CIRCUIT_KINDS:
            raise ConfigError(f"unknown kind {k!r}")
    nbars = _float_list(args.nbar) if args.nbar else [0.5, 1.0, 2.0, 3.0]
    cfg["sensitivity"] = {"kinds": kinds, "nbar": nbars, "beta": args.beta}
    reports = []
    for kind in kinds:
        for n in nbars:
            model = model_for_mean_n(kind, n, args.beta or math.pi / 2, args.paper_literal)
            reports.append(max_sensitivity(model, optimize_beta=args.beta is None))
    h = _hashable(cfg, "sensitivity", args)
    files = [write_sensitivity_csv(_path(args, cfg, "sensitivity.csv"), reports, h),
             write_json(_path(args, cfg, "sensitivity.json"),
                        [r.to_dict() for r in reports], h)]
    return {"files": files, "rows": len(reports)}


def cmd_verify_tms(args, cfg):
    nbar = args.nbar
    if not nbar > 0:
        raise ConfigError("--nbar must be positive")
    cfg["verify"] = {"nbar": nbar}
    r = math.asinh(math.sqrt(nbar))
    # the beamsplitter output is a pair of squeezed vacua, whose tails are
    # heavier than the thermal marginals
    n_max = max(Truncation.for_nbar(nbar, nbar, fam).n_max_a for fam in ("thermal", "squeezed"))
    tr = Truncation(n_max, n_max)
    tms = gates.two_mode_squeeze(make_vacuum(tr), r)
    pa, pb = fock_marginal(tms, "a"), fock_marginal(tms, "b")
    geo = distributions.thermal(nbar, tr.n_max_a)
    na, nb = number_stats(tms, "mode_a").mean, number_stats(tms, "mode_b").mean
    split = gates.beamsplitter(tms, gates.FIFTY_FIFTY, 0.0)
    target = product_state(tr, gates.squeezed_vacuum_amplitudes(r, tr.n_max_a, 0.0),
                           gates.squeezed_vacuum_amplitudes(r, tr.n_max_b, math.pi))
    fid = fidelity(split, target)
    purity = reduced_purity(split, "a")
    qa, qb = fock_marginal(split, "a"), fock_marginal(split, "b")
    r_a = math.asinh(math.sqrt(number_stats(split, "mode_a").mean))
    r_b = math.asinh(math.sqrt(number_stats(split, "mode_b").mean))
    sq = distributions.squeezed(nbar, tr.n_max_a)
    checks = {
        "marginal_nbar": abs(na - nbar) <= 1e-6 and abs(nb - nbar) <= 1e-6,
        "marginal_geometric": float(np.max(np.abs(pa - geo))) <= 1e-6,
        "separable_fidelity": fid > 1 - 1e-6,
        "reduced_purity": purity > 1 - 1e-6,
        "squeeze_parameter": abs(r_a - r) <= 1e-6 and abs(r_b - r) <= 1e-6,
    }
    h = _hashable(cfg, "verify-tms", args)
    n = np.arange(tr.n_max_a + 1)
    files = [
        write_csv(_path(args, cfg, "verify_tms_marginals.csv"), ["n", "p_a", "p_b", "p_thermal"],
                  zip(n, pa, pb, geo), h),
        write_csv(_path(args, cfg, "verify_tms_post_bs.csv"), ["n", "p_a", "p_b", "p_squeezed"],
                  zip(n, qa, qb, sq), h),
    ]
    summary = {"nbar_target": nbar, "r": r, "nbar_a": na, "nbar_b": nb,
               "fidelity_product_squeezed": fid, "reduced_purity_a": purity,
               "r_post_bs_a": r_a, "r_post_bs_b": r_b, "n_max": tr.n_max_a,
               "norm_leak": split.norm_leak, "checks": checks, "passed": all(checks.values())}
    files.append(write_json(_path(args, cfg, "verify_tms.json"), summary, h))
    summary["files"] = files
    return summary


def cmd_fit_fringe(args, cfg):
    ds = read_fringe_csv(args.input)
    _set(cfg, "circuit", "kind", args.kind)
    _set(cfg, "readout", "beta", args.beta)
    kind = _get(cfg, "circuit", "kind")
    beta = _get(cfg, "readout", "beta")
    if kind is None or beta is None:
        raise ConfigError("fit-fringe needs the fringe kind and readout beta")
    with open(args.input, "rb") as fh:
        cfg["input_sha256"] = hashlib.sha256(fh.read()).hexdigest()
    res = fit_fringe(ds, kind, float(beta), args.paper_literal)
    model = FringeModel(kind, res.params["size"], float(beta), res.params["phi_offset"],
                        res.params["v_offset"], args.paper_literal)
    h = _hashable(cfg, "fit-fringe", args)
    files = [write_json(_path(args, cfg, "fit_fringe.json"), res.to_dict(), h),
             write_curve_csv(_path(args, cfg, "fit_fringe_curve.csv"), ds.phi,
                             model.p_down(ds.phi), f"{kind}_fit", h, "phi_rad")]
    return {"files": files, "params": res.params, "converged": res.converged}


def cmd_fit_fock(args, cfg):
    times, y, shots = read_rabi_csv(args.input)
    with open(args.input, "rb") as fh:
        cfg["input_sha256"] = hashlib.sha256(fh.read()).hexdigest()
    cfg["fit_fock"] = {"n_max": args.n_max, "offres": args.offres, "strategy": args.strategy,
                       "spectator": args.spectator, "kind": args.kind}
    if args.offres:
        sb = sideband_from_config(cfg)
        res = fit_fock_populations_offres(times, y, sb, args.n_max, args.kind, args.spectator,
                                          args.strategy, shots=shots)
        tr = Truncation(args.n_max, args.n_max if args.spectator == "diagonal" else 1)
        states = [fock_state(tr, n, n if args.spectator == "diagonal" else 0)
                  for n in range(args.n_max + 1)]
        fitted = offres_response(tr, sb, states, times, args.kind) @ res.populations()
        name = "offres_fit"
    else:
        if args.omega_sb is not None:
            omega_sb = args.omega_sb
        else:
            sb = sideband_from_config(cfg)
            omega_sb = sb.eta_a * sb.omega_carrier
        res = fit_fock_populations(times, y, args.n_max, omega_sb, args.kind, shots)
        fitted = rabi_design_matrix(times, args.n_max, omega_sb, args.kind) @ res.populations()
        name = "resonant_fit"
    h = _hashable(cfg, "fit-fock", args)
    files = [write_json(_path(args, cfg, "fit_fock.json"), res.to_dict(), h),
             write_curve_csv(_path(args, cfg, "fit_fock_curve.csv"), times, fitted, name, h)]
    return {"files": files, "populations": res.populations().tolist(),
            "residual_rms": res.residual_rms}


def cmd_calibrate_bs(args, cfg):
    cfg["calibrate"] = {"alpha0": args.alpha0, "gain": args.gain, "start": args.amp_start,
                        "stop": args.amp_stop, "points": args.amp_points}
    if args.amp_points < 3:
        raise ConfigError("--amp-points must be >= 3")
    grid = np.linspace(args.amp_start, args.amp_stop, args.amp_points)
    amp = calibrate_beamsplitter(su2_contrast(args.alpha0, args.gain), grid)
    mix = args.gain * amp
    tr = Truncation.for_nbar(args.alpha0 ** 2, args.alpha0 ** 2, "poisson")
    start = gates.displacement(make_vacuum(tr), args.alpha0, "a")
    swapped = gates.beamsplitter(gates.beamsplitter(start, mix, 0.0), mix, 0.0)
    target = product_state(tr, [1.0], gates.coherent_amplitudes(args.alpha0, tr.n_max_b))
    summary = {"amplitude": amp, "mix": mix, "mix_error_vs_50_50": mix - gates.FIFTY_FIFTY,
               "swap_residual_mode_a": number_stats(swapped, "mode_a").mean,
               "swap_fidelity": fidelity(swapped, target)}
    h = _hashable(cfg, "calibrate-bs", args)
    summary["files"] = [write_json(_path(args, cfg, "calibrate_bs.json"), dict(summary), h)]
    return summary


def cmd_bounds(args, cfg):
    kinds = [args.kind] if args.kind else list(CIRCUIT_KINDS)
    if args.kind and args.kind not in CIRCUIT_KINDS:
        raise ConfigError(f"unknown kind {args.kind!r}")
    if args.nbar:
        nbars = _float_list(args.nbar)
    else:
        nbars = list(np.linspace(args.nbar_start, args.nbar_stop, args.nbar_points))
    if not nbars:
        raise ConfigError("mean-number grid is empty")
    cfg["bounds"] = {"kinds": kinds, "nbar": [float(n) for n in nbars]}
    rows = []
    for kind in kinds:
        for n in nbars:
            b = cr_bound(kind, n)
            rows.append((kind, float(n), b, sql(n), db_vs_sql(b, n)))
    h = _hashable(cfg, "bounds", args)
    path = write_csv(_path(args, cfg, "bounds.csv"),
                     ["kind", "mean_n", "cr_bound", "sql", "db_vs_sql"], rows, h)
    table = [dict(zip(["kind", "mean_n", "cr_bound", "sql", "db_vs_sql"], r)) for r in rows]
    return {"files": [path], "table": table}


# ---------------------------------------------------------------- parser

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML experiment config")
    common.add_argument("--out", help=f"output directory (default: ${ENV_OUT} or .)")
    common.add_argument("--paper-literal", action="store_true",
                        help="use the literal cos-kernel readout series and the +cos Rabi form")

    p = argparse.ArgumentParser(prog="ionmetro", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=f"ionmetro {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fringe", parents=[common], help="simulate an interferometer fringe")
    f.add_argument("--kind", choices=CIRCUIT_KINDS)
    f.add_argument("--size", type=float, help="alpha0 (su2) or r0 (su11_*)")
    f.add_argument("--nbar", type=float, help="mean occupation entering readout at phi=0")
    f.add_argument("--beta", type=float, help="red-sideband pulse area")
    f.add_argument("--points", type=int)
    f.add_argument("--shots", type=int)
    f.add_argument("--seed", type=int)
    f.set_defaults(func=cmd_fringe)

    s = sub.add_parser("sensitivity", parents=[common], help="sensitivity vs mean phonon number")
    s.add_argument("--kinds", help="comma-separated circuit kinds")
    s.add_argument("--nbar", help="comma-separated probe mean phonon numbers")
    s.add_argument("--beta", type=float, help="fixed readout pulse area (default: optimised)")
    s.set_defaults(func=cmd_sensitivity)

    v = sub.add_parser("verify-tms", parents=[common], help="two-mode squeezing checks")
    v.add_argument("--nbar", type=float, default=3.04)
    v.set_defaults(func=cmd_verify_tms)

    ff = sub.add_parser("fit-fringe", parents=[common], help="fit a fringe CSV")
    ff.add_argument("--input", required=True)
    ff.add_argument("--kind", choices=CIRCUIT_KINDS)
    ff.add_argument("--beta", type=float)
    ff.set_defaults(func=cmd_fit_fringe)

    fk = sub.add_parser("fit-fock", parents=[common], help="fit Fock populations to Rabi data")
    fk.add_argument("--input", required=True)
    fk.add_argument("--n-max", type=int, required=True)
    fk.add_argument("--omega-sb", type=float, help="sideband Rabi rate (rad/s)")
    fk.add_argument("--kind", choices=("red", "blue"), default="blue")
    fk.add_argument("--offres", action="store_true", help="two-mode off-resonant forward model")
    fk.add_argument("--strategy", choices=("joint", "sweep"), default="joint")
    fk.add_argument("--spectator", choices=("diagonal", "vacuum"), default="diagonal")
    fk.set_defaults(func=cmd_fit_fock)

    c = sub.add_parser("calibrate-bs", parents=[common], help="50/50 beamsplitter calibration")
    c.add_argument("--alpha0", type=float, default=1.0)
    c.add_argument("--gain", type=float, default=1.0, help="mixing angle per unit amplitude")
    c.add_argument("--amp-start", type=float, default=0.1)
    c.add_argument("--amp-stop", type=float, default=1.5)
    c.add_argument("--amp-points", type=int, default=15)
    c.set_defaults(func=cmd_calibrate_bs)

    b = sub.add_parser("bounds", parents=[common], help="tabulate closed-form phase bounds")
    b.add_argument("--kind")
    b.add_argument("--nbar", help="comma-separated mean phonon numbers")
    b.add_argument("--nbar-start", type=float, default=0.5)
    b.add_argument("--nbar-stop", type=float, default=5.0)
    b.add_argument("--nbar-points", type=int, default=10)
    b.set_defaults(func=cmd_bounds)
    return p


def _emit_error(exc, code):
    payload = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)
    return code


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        result = args.func(args, cfg)
    except IonMetroError as exc:
        return _emit_error(exc, exc.exit_code)
    except (OSError, ValueError) as exc:
        code = 2 if isinstance(exc, ValueError) else 1
        return _emit_error(exc, code)
    print(json.dumps(plain(result), indent=2, sort_keys=True))
    return 1 if result.get("passed") is False else 0


if __name__ == "__main__":
    sys.exit(main())
