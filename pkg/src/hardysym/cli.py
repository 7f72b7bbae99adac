"""Command-line front end: ``hardysym <verb> --config run.json [--out dir] [--jobs n]``.

Every verb writes ``<verb>.json`` (and CSV dumps where fields are produced)
into the output directory and echoes the JSON on stdout.  Results are
deterministic for a fixed config; wall-clock data lives under the ``meta``
key only.

Exit codes: 0 success, 1 parameter or input error, 2 convergence failure,
3 spectral failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .config import SCHEMA, load_config
from .errors import ConvergenceError, HardySymError, SpectralError, StalenessError
from .grids import BiradialGrid, SplitDims, load_field, save_field
from .morse import morse_index, two_grid_morse_index
from .operators import asymptotic_exponents, hardy_sobolev_quotient
from .solve import Solution, orbit_fit, solve, symmetry_breaking_criterion
from .sphere import (
    SphereProblem,
    conformal_laplacian_check,
    constant_solution,
    extrapolated_spectrum,
    shoot_nodal_solution,
    sphere_mass,
    stereographic_transport,
    transported_mass,
)
from .symmetry import integrability_check, is_cauchy, scaled_thresholds, symmetry_verdict, w_sign_range

log = logging.getLogger("hardysym")

EXIT_OK, EXIT_INPUT, EXIT_CONVERGENCE, EXIT_SPECTRAL = 0, 1, 2, 3
VERBS = ("minimize", "morse", "verdict", "break-check", "sphere", "transport", "exponents", "report")

FORMULA_NOTE = (
    "Two closed forms circulate for the radial ratio Q(a)/S: the linear factor 1 - 4a/(N-2)^2 "
    "and its (N-1)/N power. Each row gives both and names the one closer to the computed value; "
    "the computed value is authoritative."
)


def sobolev_constant(N: int) -> float:
    """Sharp Sobolev constant S_N = pi N (N-2) (Gamma(N/2) / Gamma(N))^(2/N)."""
    return math.pi * N * (N - 2) * (math.gamma(N / 2) / math.gamma(N)) ** (2.0 / N)


def _jsonable(x):
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not serializable: {type(x).__name__}")


def dump_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, default=_jsonable)


def _write(out: Path, verb: str, result: dict, meta: dict) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{verb.replace('-', '_')}.json"
    path.write_text(dump_json({"result": result, "meta": meta}) + "\n")
    return path


def _map(fn, items, jobs: int):
    if jobs > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


# --- verbs -------------------------------------------------------------------------


def cmd_minimize(cfg, out: Path, jobs: int = 1) -> dict:
    specs = [p.to_spec() for p in cfg.problems()]
    sols = _map(solve, specs, jobs)
    runs = []
    for i, sol in enumerate(sols):
        save_field(sol.field, out / f"field_{i}.csv")
        rec = sol.to_dict()
        rec["Q_over_S"] = sol.Q / sobolev_constant(sol.spec.N)
        rec["field_csv"] = f"field_{i}.csv"
        runs.append(rec)
    return {"runs": runs}


def _fixture_solution(spec, path) -> Solution:
    f = load_field(path, spec.grid())
    if not np.any(f.values):
        return Solution(spec, f, 0.0, 0.0)
    return Solution(spec, f, hardy_sobolev_quotient(f, spec.a, spec.m), orbit_fit(f, spec.a, spec.m).residual)


def cmd_morse(cfg, out: Path, jobs: int = 1) -> dict:
    spec = cfg.problem.to_spec()
    if cfg.field:
        report = morse_index(_fixture_solution(spec, cfg.field), cfg.morse_class, cfg.mode_cutoff, jobs)
    else:
        report = two_grid_morse_index(spec, cfg.morse_class, cfg.mode_cutoff, jobs)
    return report.to_dict()


def cmd_verdict(cfg, out: Path, jobs: int = 1) -> dict:
    spec = cfg.problem.to_spec()
    sol = solve(spec)
    report = morse_index(sol, "biradial")
    th = scaled_thresholds(spec.n)
    if cfg.defect_tol is not None:
        th["defect"] = cfg.defect_tol
    if cfg.w_tol is not None:
        th["w_rel"] = cfg.w_tol
    verdict = symmetry_verdict(sol, report, th)
    w_min, w_max = w_sign_range(sol.scaled_field())
    g = sol.field.grid
    radii = [R for R in (10.0, 100.0, 1000.0) if R <= g.rho_max]
    partials = integrability_check(sol, radii)
    save_field(sol.field, out / "field.csv")
    return {
        "Q": sol.Q,
        "verdict": verdict.to_dict(),
        "morse": report.to_dict(),
        "w_range": [w_min, w_max],
        "integrability": {"radii": radii, "partials": partials, "cauchy": is_cauchy(partials)},
    }


def cmd_break_check(cfg, out: Path, jobs: int = 1) -> dict:
    return asdict(symmetry_breaking_criterion(cfg.N, cfg.a, cfg.m, cfg.k))


def cmd_sphere(cfg, out: Path, jobs: int = 1) -> dict:
    prob = SphereProblem(cfg.N, cfg.k, cfg.n)

    def run(nodes):
        return shoot_nodal_solution(prob, nodes, cfg.max_nodes, cfg.scan_points)

    sols = _map(run, list(cfg.nodes), jobs)
    const = constant_solution(prob)
    rows = []
    for sol in sols:
        save_field(sol.field, out / f"sphere_nodes_{sol.nodes}.csv")
        rec = sol.to_dict()
        rec["spectrum"] = extrapolated_spectrum(sol)
        rows.append(rec)
    return {"constant": {"c": const.s, "mass": const.mass, "index": const.index,
                         "spectrum": extrapolated_spectrum(const)},
            "solutions": rows}


def cmd_transport(cfg, out: Path, jobs: int = 1) -> dict:
    from .symmetry import radiality_defect

    prob = SphereProblem(cfg.N, cfg.k, cfg.sphere_n)
    sol = constant_solution(prob) if cfg.nodes == 0 else shoot_nodal_solution(prob, cfg.nodes)
    target = BiradialGrid(SplitDims(cfg.N, cfg.k), cfg.r_min, cfg.r_max, cfg.plane_n)
    u = stereographic_transport(sol.field, "to_plane", target)
    save_field(u, out / "transported.csv")
    plane = transported_mass(sol.field, cfg.plane_n, cfg.r_min, cfg.r_max)
    sphere = sphere_mass(sol.field)
    return {
        "nodes": sol.nodes,
        "sphere_mass": sphere,
        "plane_mass": plane,
        "mass_defect": abs(plane - sphere) / sphere,
        "conformal_residual": conformal_laplacian_check(sol.field, u),
        "radiality_defect": radiality_defect(u),
    }


def cmd_exponents(cfg, out: Path, jobs: int = 1) -> dict:
    e = asymptotic_exponents(cfg.a, cfg.N, cfg.ell)
    return {"gamma": e.gamma, "delta": e.delta, "mu": e.mu}


def _collect(inputs) -> list[tuple[str, dict]]:
    docs = []
    for item in inputs:
        p = Path(item)
        files = sorted(p.glob("*.json")) if p.is_dir() else [p]
        for f in files:
            if not f.exists():
                raise HardySymError(f"input not found: {f}")
            doc = json.loads(f.read_text())
            if isinstance(doc, dict) and "result" in doc:
                docs.append((f.name, doc["result"]))
    if not docs:
        raise HardySymError(f"no result files found in {list(inputs)}")
    return docs


def comparison_row(N: int, a: float, Q: float, cls: str = "radial", n: int | None = None) -> dict:
    S = sobolev_constant(N)
    factor = 1.0 - 4.0 * a / (N - 2) ** 2
    row = {
        "N": N, "a": a, "class": cls, "n": n, "Q": Q, "Q_over_S": Q / S,
        "factor_linear": factor,
        "factor_power": factor ** ((N - 1) / N),
        "rel_gap_linear": Q / S / factor - 1.0,
        "rel_gap_power": Q / S / factor ** ((N - 1) / N) - 1.0,
    }
    closer = "power" if abs(row["rel_gap_power"]) < abs(row["rel_gap_linear"]) else "linear"
    row["closer"] = "both" if a == 0 else closer
    return row


def cmd_report(cfg, out: Path, jobs: int = 1) -> dict:
    rows = []
    for name, res in _collect(cfg.inputs):
        for run in res.get("runs", []):
            spec = run["spec"]
            if spec.get("m", 0) == 0:
                row = comparison_row(spec["N"], spec["a"], run["Q"], spec["cls"], spec["n"])
                row["source"] = name
                rows.append(row)
    rows.sort(key=lambda r: (r["N"], r["class"], -r["a"], r["n"] or 0, r["source"]))
    out.mkdir(parents=True, exist_ok=True)
    if rows:
        cols = list(rows[0])
        with open(out / "report.csv", "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=cols)
            w.writeheader()
            for r in rows:
                w.writerow({c: (repr(v) if isinstance(v, float) else v) for c, v in r.items()})
    return {"best_constants": rows, "note": FORMULA_NOTE}


COMMANDS = {
    "minimize": cmd_minimize,
    "morse": cmd_morse,
    "verdict": cmd_verdict,
    "break-check": cmd_break_check,
    "sphere": cmd_sphere,
    "transport": cmd_transport,
    "exponents": cmd_exponents,
    "report": cmd_report,
}


def exit_code(exc: BaseException) -> int:
    if isinstance(exc, SpectralError):
        return EXIT_SPECTRAL
    if isinstance(exc, (ConvergenceError, StalenessError)):
        return EXIT_CONVERGENCE
    return EXIT_INPUT


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hardysym", description="Hardy-Sobolev biradial symmetry solver")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="verb", required=True)
    for verb in VERBS:
        p = sub.add_parser(verb)
        p.add_argument("--config", required=True, help=f"JSON config with \"schema\": \"{SCHEMA}\"")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--jobs", type=int, default=1, help="parallel workers for independent entries")
    return ap


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("HSL_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    out = Path(args.out)
    start = time.time()
    try:
        if args.jobs < 1:
            raise HardySymError(f"--jobs must be >= 1, got {args.jobs}")
        cfg = load_config(args.verb, args.config)
        out.mkdir(parents=True, exist_ok=True)
        result = COMMANDS[args.verb](cfg, out, args.jobs)
    except (HardySymError, OSError, ValueError, KeyError) as exc:
        code = exit_code(exc)
        print(f"hardysym {args.verb}: {exc}", file=sys.stderr)
        return code
    meta = {"verb": args.verb, "version": __version__, "started": start, "seconds": time.time() - start}
    path = _write(out, args.verb, result, meta)
    print(dump_json(result))
    log.info("wrote %s", path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
