"""Command-line front end.

Every subcommand writes its table (CSV or JSON) into the output directory
and prints the written paths. Exit status: 0 on success, 2 on invalid
input, 3 on numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import warnings
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import bifurcation as bif
from . import continuation as cont
from . import harmonics as hm
from . import radial as rad
from . import spectrum as spc
from .errors import ConfigurationError, LaneEmdenError, NotFoundError, NumericalError
from .io import (
    OUTPUT_ENV,
    RunConfig,
    package_version,
    parse_range,
    read_config_file,
    write_csv,
    write_json,
)

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3

# flag name -> RunConfig field; None means the flag is command-specific
_FLAGS = {
    "a": float, "b": float, "N": int, "m": int, "p": float, "K": int, "L": int,
    "jmax": int, "samples": int, "branch_K": int, "p_max": float, "norm_max": float,
    "max_steps": int, "stride": int, "boundary_tol": float, "eigen_tol": float,
    "degeneracy_tol": float, "cone_tol": float, "newton_tol": float, "jobs": int,
}


def _add_common(sp):
    for name, kind in _FLAGS.items():
        flag = "--" + name.replace("_", "-")
        sp.add_argument(flag, dest=name, type=kind, default=None)
    sp.add_argument("--prange", dest="p_range", default=None, help="p interval lo:hi")
    sp.add_argument("--nrange", dest="n_range", default=None, help="n interval lo:hi (inclusive)")
    sp.add_argument("--out", dest="output_dir", default=None, help=f"output directory (default ${OUTPUT_ENV} or .)")
    sp.add_argument("--format", dest="format", choices=("csv", "json"), default=None)
    sp.add_argument("--config", dest="config_file", default=None, help="key = value settings file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="laneemden", description="Lane-Emden annulus lab")
    parser.add_argument("--version", action="version", version=f"%(prog)s {package_version()}")
    sub = parser.add_subparsers(dest="command", required=True)
    specs = {
        "radial": "radial solution with m nodal zones at p",
        "spectrum": "weighted radial eigenvalues over a p grid",
        "morse": "Morse indices and degeneracy at p",
        "degeneracies": "all p in a range where nu_i + lambda_j vanishes",
        "bifurcations": "bifurcation points p_n for n in a range",
        "cone-index": "cone index over a p grid and n range",
        "branch": "continue a planar branch from a bifurcation point",
        "harmonics": "multiplicity and parity tables, Gegenbauer values",
    }
    for name, text in specs.items():
        sp = sub.add_parser(name, help=text)
        _add_common(sp)
        if name == "branch":
            sp.add_argument("--from", dest="origin", required=True, help="bifurcation point JSON")
        if name == "harmonics":
            sp.add_argument("--n", dest="sym_n", type=int, default=None, help="symmetry order for N_j(X^n)")
            sp.add_argument("--gegenbauer", default=None, help="i,ell,k,omega")
    return parser


def resolve_config(args) -> RunConfig:
    """Flags override the config file, which overrides defaults."""
    settings = {}
    env_dir = os.environ.get(OUTPUT_ENV)
    if env_dir:
        settings["output_dir"] = env_dir
    if args.config_file:
        settings.update(read_config_file(args.config_file))
    for name in list(_FLAGS) + ["output_dir", "format"]:
        value = getattr(args, name, None)
        if value is not None:
            settings[name] = value
    if args.p_range is not None:
        settings["p_range"] = parse_range(args.p_range, float)
    if args.n_range is not None:
        settings["n_range"] = parse_range(args.n_range, int)
    return RunConfig(**settings).validate()


def _annulus(cfg):
    return rad.Annulus(cfg.a, cfg.b, cfg.N)


def _report(cfg, command, body):
    out = {"command": command, "version": package_version(), "config": cfg.to_dict()}
    out.update(body)
    return out


def _table(cfg, stem, header, rows, extra=None):
    out = Path(cfg.output_dir)
    if cfg.format == "csv":
        return [write_csv(out / f"{stem}.csv", header, rows)]
    body = {"columns": list(header), "rows": [list(r) for r in rows]}
    body.update(extra or {})
    return [write_json(out / f"{stem}.json", _report(cfg, stem, body))]


def _p_grid(cfg):
    if cfg.p is not None:
        return [cfg.p]
    lo, hi = cfg.p_range
    return (1.0 + np.geomspace(lo - 1.0, hi - 1.0, cfg.samples)).tolist()


def cmd_radial(cfg, args):
    if cfg.p is None:
        raise ConfigurationError("radial needs --p")
    prof = rad.solve_radial(_annulus(cfg), cfg.p, cfg.m, cfg.K, boundary_tol=cfg.boundary_tol)
    grad, pot = rad.energy_terms(prof)
    summary = {
        "slope": prof.slope, "level": prof.level, "sup_norm": prof.sup_norm,
        "energy": rad.energy(prof), "grad_squared": grad, "potential": pot,
        "nodal_zones": rad.nodal_zones(prof), "zeros": list(prof.zeros),
    }
    rows = zip(prof.grid, prof.values, prof.derivs)
    paths = _table(cfg, "radial", ("r", "u", "du"), rows, {"summary": summary})
    if cfg.format == "csv":
        paths.append(write_json(Path(cfg.output_dir) / "radial.json", _report(cfg, "radial", {"summary": summary})))
    return paths


def cmd_spectrum(cfg, args):
    ann = _annulus(cfg)
    q = cfg.m + 2
    rows = []
    for p in _p_grid(cfg):
        s = spc.spectrum_at(ann, float(p), cfg.m, cfg.K, q)
        rows.append([p] + list(s.eigenvalues[:q]))
    header = ["p"] + [f"nu_{i + 1}" for i in range(q)]
    return _table(cfg, "spectrum", header, rows)


def cmd_morse(cfg, args):
    if cfg.p is None:
        raise ConfigurationError("morse needs --p")
    n_values = list(range(max(1, cfg.n_range[0]), cfg.n_range[1] + 1))
    s = spc.spectrum_at(_annulus(cfg), cfg.p, cfg.m, cfg.K, cfg.m + 2)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", spc.DegeneracyWarning)
        rep = spc.morse_report(s, n_values, cfg.N, cfg.degeneracy_tol)
    body = {"report": asdict(rep),
            "warnings": [str(w.message) for w in caught]}
    out = Path(cfg.output_dir)
    if cfg.format == "csv":
        rows = [["full", "", rep.morse_full]] + [["sym", n, rep.morse_sym[n]] for n in n_values]
        return [write_csv(out / "morse.csv", ("space", "n", "morse_index"), rows),
                write_json(out / "morse.json", _report(cfg, "morse", body))]
    return [write_json(out / "morse.json", _report(cfg, "morse", body))]


def cmd_degeneracies(cfg, args):
    found = bif.degeneracy_scan(_annulus(cfg), cfg.m, cfg.p_range, cfg.jmax, cfg.K)
    rows = [(d.i, d.j, d.p, d.multiplicity) for d in found]
    return _table(cfg, "degeneracies", ("i", "j", "p", "multiplicity"), rows)


def cmd_bifurcations(cfg, args):
    ann = _annulus(cfg)
    n_values = range(cfg.n_range[0], cfg.n_range[1] + 1)
    res = bif.sweep(ann, cfg.m, n_values, cfg.p_range, cfg.K, jobs=cfg.jobs)
    out = Path(cfg.output_dir)
    paths = []
    rows = []
    for pt in res.points:
        rows.append((pt.n, pt.pn, pt.change_full, pt.change_sym, pt.cone_jump[0], pt.cone_jump[1]))
        try:
            parity = bif.parity_report(pt).to_dict()
        except LaneEmdenError as exc:
            parity = {"error": str(exc)}
        body = {"point": pt.to_dict(), "parity": parity}
        paths.append(write_json(out / f"point_n{pt.n}.json", _report(cfg, "bifurcations", body)))
    header = ("n", "p_n", "changeFull", "changeSym", "coneJump_minus", "coneJump_plus")
    summary = {
        "n_bar": res.n_bar, "increasing": res.increasing,
        "failures": {str(k): v for k, v in res.failures.items()},
    }
    paths = _table(cfg, "bifurcations", header, rows, summary) + paths
    paths.append(write_json(out / "bifurcations_summary.json", _report(cfg, "bifurcations", summary)))
    return paths


def cmd_cone_index(cfg, args):
    ann = _annulus(cfg)
    n_values = list(range(max(1, cfg.n_range[0]), cfg.n_range[1] + 1))
    rows = []
    for p in _p_grid(cfg):
        s = spc.spectrum_at(ann, float(p), cfg.m, cfg.K, cfg.m + 2)
        for n in n_values:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", spc.DegeneracyWarning)
                try:
                    idx = spc.cone_index(s, n, cfg.N, cfg.degeneracy_tol)
                except LaneEmdenError:
                    idx = None
            rows.append((p, n, idx))
    return _table(cfg, "cone_index", ("p", "n", "cone_index"), rows)


def cmd_branch(cfg, args):
    with open(args.origin, encoding="utf-8") as fh:
        data = json.load(fh)
    point = bif.BifurcationPoint.from_dict(data.get("point", data))
    bc = cont.BranchConfig(K=cfg.branch_K, L=cfg.L, p_max=cfg.p_max, norm_max=cfg.norm_max,
                           max_steps=cfg.max_steps, newton_tol=cfg.newton_tol, cone_tol=cfg.cone_tol)
    br = cont.continue_branch(point, bc)
    rows = [
        (s_len, st.p, st.sup_norm, st.mode_amplitude, st.in_cone, e, z)
        for s_len, st, e, z in zip(br.arclength, br.states, br.energies, br.nodal_zones)
    ]
    header = ("arclength", "p", "sup_norm", "modeAmplitude", "inCone", "energy", "nodalZonesOfMeanProfile")
    stem = f"branch_n{point.n}"
    snapshots = [
        {"index": i, "p": st.p, "level": st.level, "L": st.disc.L, "residual_norm": st.residual_norm,
         "v": st.v}
        for i, st in enumerate(br.states) if i % cfg.stride == 0 or i == len(br.states) - 1
    ]
    summary = {
        "termination": br.termination.value, "reason": br.reason, "p_h": br.p_h,
        "states": len(br.states), "nodal_change": br.nodal_change,
        "refinements": br.refinements, "origin": point.to_dict(),
    }
    out = Path(cfg.output_dir)
    paths = _table(cfg, stem, header, rows, summary)
    paths.append(write_json(out / f"{stem}_summary.json", _report(cfg, "branch", summary)))
    paths.append(write_json(out / f"{stem}_snapshots.json", _report(cfg, "branch", {"snapshots": snapshots})))
    return paths


def cmd_harmonics(cfg, args):
    N = cfg.N
    header = ["j", "lambda_j", "N_j"]
    if args.sym_n is not None:
        header += ["N_j_Xn", "parity_N_j", "parity_N_j_Xn"]
    rows = []
    for j in range(cfg.jmax + 1):
        row = [j, hm.lb_eigenvalue(j, N), hm.mult_full(j, N)]
        if args.sym_n is not None:
            if j <= args.sym_n:
                s = hm.mult_sym(j, args.sym_n, N)
                row += [s, row[2] % 2, s % 2]
            else:
                row += [None, row[2] % 2, None]
        rows.append(row)
    extra = {}
    if args.gegenbauer:
        try:
            i, ell, k, omega = args.gegenbauer.split(",")
            extra["gegenbauer"] = {"i": int(i), "ell": int(ell), "k": float(k), "omega": float(omega),
                                   "value": hm.gegenbauer(int(i), int(ell), float(k), float(omega))}
        except ValueError as exc:
            raise ConfigurationError(f"--gegenbauer expects i,ell,k,omega: {exc}") from None
    paths = _table(cfg, "harmonics", header, rows, extra)
    if extra and cfg.format == "csv":
        paths.append(write_json(Path(cfg.output_dir) / "harmonics.json", _report(cfg, "harmonics", extra)))
    return paths


COMMANDS = {
    "radial": cmd_radial,
    "spectrum": cmd_spectrum,
    "morse": cmd_morse,
    "degeneracies": cmd_degeneracies,
    "bifurcations": cmd_bifurcations,
    "cone-index": cmd_cone_index,
    "branch": cmd_branch,
    "harmonics": cmd_harmonics,
}


def run(command: str, cfg: RunConfig, args=None) -> list:
    """Run one subcommand with a resolved configuration; returns written paths."""
    if command not in COMMANDS:
        raise ConfigurationError(f"unknown command {command!r}")
    return COMMANDS[command](cfg, args if args is not None else argparse.Namespace(sym_n=None, gegenbauer=None))


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        paths = run(args.command, cfg, args)
    except (NumericalError, NotFoundError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (LaneEmdenError, ValueError, OSError, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    for p in paths:
        print(p)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
