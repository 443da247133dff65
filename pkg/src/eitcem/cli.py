"""Command-line front end.

Usage::

    eitcem mesh  [--config run.toml] [--out DIR]
    eitcem solve [--config run.toml] [--out DIR] [--beta B|shunt]
    eitcem sweep z [--config run.toml] [--out DIR] [--threads N]
    eitcem sweep h [--config run.toml] [--out DIR] [--beta B|shunt] [--levels 1..5]

Exit codes: 0 success, 2 configuration error, 3 numerical error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from .assembly import ConductivityField, ElectrodeLayout, assemble_cem, assemble_shunt
from .errors import ConfigurationError, DomainError, EitError, NumericalError, StructuralError
from .experiments import SweepConfig, currents, graded_mesh, sweep_h, sweep_z
from .report import emit_report
from .solver import RTOL, electrode_currents, solve
from .mesh import write_mesh

log = logging.getLogger("eitcem")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3

SCHEMA = {
    "geometry": {"n_sides", "n_electrodes", "level", "boundary_rounds"},
    "model": {"model", "beta", "sigma", "current"},
    "sweep": {"betas", "beta", "levels", "reference_depth", "fit_start", "fit_stop",
              "kappa", "threads"},
    "output": {"dir"},
}


def load_config(path) -> dict:
    """Read a TOML run configuration, rejecting unknown sections and keys."""
    if path is None:
        return {}
    try:
        with open(path, "rb") as f:
            doc = tomllib.load(f)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    check_config(doc)
    return doc


def check_config(doc: dict) -> None:
    for section, body in doc.items():
        if section not in SCHEMA:
            raise ConfigurationError(f"unknown config section [{section}]")
        if not isinstance(body, dict):
            raise ConfigurationError(f"[{section}] must be a table")
        unknown = set(body) - SCHEMA[section]
        if unknown:
            raise ConfigurationError(f"unknown key(s) in [{section}]: {', '.join(sorted(unknown))}")


def _parse_beta(value):
    if value is None:
        return None
    if isinstance(value, str) and value.strip().lower() == "shunt":
        return "shunt"
    try:
        beta = float(value)
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"beta must be a positive number or 'shunt', got {value!r}") from exc
    if not beta > 0 or not np.isfinite(beta):
        raise DomainError(f"beta must be positive, got {beta!r}")
    return beta


def _parse_levels(text: str) -> tuple:
    try:
        lo, hi = (int(x) for x in text.split(".."))
    except ValueError as exc:
        raise ConfigurationError(f"--levels expects 'a..b', got {text!r}") from exc
    if hi < lo:
        raise ConfigurationError("--levels upper bound is below the lower bound")
    return tuple(range(lo, hi + 1))


def _sigma(value):
    if value is None or value == "identity":
        return ((1.0, 0.0), (0.0, 1.0))
    arr = np.asarray(value, dtype=float)
    if arr.shape == (2,):
        arr = np.diag(arr)
    if arr.shape != (2, 2):
        raise ConfigurationError("sigma must be 'identity', [s1, s2] or a 2x2 matrix")
    if not np.allclose(arr, arr.T) or np.any(np.linalg.eigvalsh(arr) <= 0):
        raise DomainError("sigma must be symmetric positive definite")
    return tuple(map(tuple, arr.tolist()))


def _current(value):
    if value is None:
        return ("cos", 1)
    if isinstance(value, str):
        kind, _, freq = value.partition(":")
        try:
            return (kind, int(freq or 1))
        except ValueError as exc:
            raise ConfigurationError(f"bad current pattern {value!r}") from exc
    return [float(v) for v in value]


def build_sweep_config(doc: dict, args) -> SweepConfig:
    geo, model, sweep = doc.get("geometry", {}), doc.get("model", {}), doc.get("sweep", {})
    kw = {}
    for key, name in (("n_sides", "n_sides"), ("n_electrodes", "n_electrodes"),
                      ("level", "base_level"), ("boundary_rounds", "boundary_rounds")):
        if key in geo:
            kw[name] = int(geo[key])
    kw["sigma"] = _sigma(model.get("sigma"))
    kw["current"] = _current(model.get("current"))
    if "betas" in sweep:
        kw["betas"] = tuple(float(b) for b in sweep["betas"])
    if "levels" in sweep:
        kw["h_levels"] = tuple(int(v) for v in sweep["levels"])
    if getattr(args, "levels", None):
        kw["h_levels"] = _parse_levels(args.levels)
    if "reference_depth" in sweep:
        kw["reference_depth"] = int(sweep["reference_depth"])
    elif "h_levels" in kw:
        kw["reference_depth"] = max(kw["h_levels"]) + 2
    if "fit_start" in sweep or "fit_stop" in sweep:
        kw["fit_window"] = (sweep.get("fit_start"), sweep.get("fit_stop"))
    kw["record_kappa"] = bool(sweep.get("kappa", False))
    kw["threads"] = int(args.threads if getattr(args, "threads", None) else sweep.get("threads", 1))
    cfg = SweepConfig(**kw)
    cfg.validate()
    return cfg


def _out_dir(doc, args) -> Path:
    out = args.out or doc.get("output", {}).get("dir") or "out"
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_provenance(out: Path, name: str, payload: dict) -> None:
    payload = {"version": __version__, "solver_rtol": RTOL, **payload}
    (out / f"{name}.provenance.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True, default=str) + "\n")


def cmd_mesh(doc, args) -> int:
    cfg = build_sweep_config(doc, args)
    mesh = graded_mesh(cfg)
    out = _out_dir(doc, args)
    write_mesh(mesh, out / "mesh.txt")
    print(f"{mesh.n_vertices} {mesh.n_triangles} {len(mesh.boundary_edges)}")
    try:
        h_int = f"{mesh.mesh_size('interior'):.6g}"
    except ValueError:
        h_int = "n/a"
    print(f"h interior {h_int} boundary {mesh.mesh_size('boundary'):.6g}")
    _write_provenance(out, "mesh", {"command": "mesh", "config": cfg.echo()})
    return EXIT_OK


def cmd_solve(doc, args) -> int:
    cfg = build_sweep_config(doc, args)
    model_doc = doc.get("model", {})
    model = str(model_doc.get("model", "cem")).lower()
    beta = _parse_beta(args.beta) if args.beta is not None else _parse_beta(model_doc.get("beta", 1.0))
    if beta == "shunt":
        model = "shunt"
    if model not in ("cem", "shunt"):
        raise ConfigurationError(f"model must be 'cem' or 'shunt', got {model!r}")
    if model == "shunt" and ("beta" in model_doc or args.beta not in (None, "shunt")):
        log.warning("shunt model ignores the contact impedance beta")

    mesh = graded_mesh(cfg)
    sigma = ConductivityField.uniform(mesh, cfg.sigma_tensor())
    I = currents(cfg)
    if model == "shunt":
        system = assemble_shunt(mesh, sigma, cfg.n_electrodes)
    else:
        system = assemble_cem(mesh, sigma, ElectrodeLayout.constant(cfg.n_electrodes, beta))
    sol = solve(system, I)

    out = _out_dir(doc, args)
    with open(out / "u.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(("vertex", "x", "y", "value"))
        for i, ((x, y), v) in enumerate(zip(mesh.vertices, sol.nodal)):
            w.writerow((i, format(x, ".17g"), format(y, ".17g"), format(v, ".17g")))
    with open(out / "voltages.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(("electrode", "voltage"))
        for m, U in enumerate(sol.voltages, start=1):
            w.writerow((m, format(U, ".17g")))
    if model == "cem":
        rec = electrode_currents(sol, mesh, system.layout)
        print("recovered currents: " + " ".join(format(v, ".12g") for v in rec))
    print("voltages: " + " ".join(format(v, ".12g") for v in sol.voltages))
    _write_provenance(out, "solve", {"command": "solve", "model": model,
                                     "beta": None if model == "shunt" else beta,
                                     "config": cfg.echo(), "residual": sol.residual})
    return EXIT_OK


def cmd_sweep(doc, args) -> int:
    cfg = build_sweep_config(doc, args)
    out = _out_dir(doc, args)
    if args.kind == "z":
        report = sweep_z(cfg)
        stem = "sweep_z"
    else:
        sweep_doc = doc.get("sweep", {})
        raw = args.beta if args.beta is not None else sweep_doc.get("beta", 1.0)
        beta = _parse_beta(raw)
        report = sweep_h(cfg, beta)
        stem = f"sweep_h_{beta}"
    for fmt in ("csv", "svg", "json"):
        emit_report(report, out, fmt, stem=stem)
    for name in report.columns:
        s = report.slope(name)
        print(f"{name}: " + ("insufficient data" if s is None else f"slope {s:.4f}"))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="eitcem", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML run configuration")
    common.add_argument("--out", help="output directory")
    common.add_argument("--threads", type=int, help="parallel grid points")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("mesh", parents=[common], help="build and write the mesh")
    ps = sub.add_parser("solve", parents=[common], help="solve one forward problem")
    ps.add_argument("--beta", help="contact impedance, or 'shunt'")
    pw = sub.add_parser("sweep", parents=[common], help="run a z- or h-sweep")
    pw.add_argument("kind", choices=("z", "h"))
    pw.add_argument("--beta", help="contact impedance for the h-sweep, or 'shunt'")
    pw.add_argument("--levels", help="refinement levels a..b for the h-sweep")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    commands = {"mesh": cmd_mesh, "solve": cmd_solve, "sweep": cmd_sweep}
    try:
        doc = load_config(args.config)
        return commands[args.command](doc, args)
    except (ConfigurationError, DomainError, StructuralError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, ArithmeticError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except EitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
