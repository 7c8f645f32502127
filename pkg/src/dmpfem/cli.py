"""Command line front end: config-driven sweeps, condition certification, meshes.

Verbs::

    dmpfem run CONFIG
    dmpfem certify (--mesh PATH | --family F --nx N) --problem NAME [--param k=v ...]
    dmpfem mesh gen FAMILY --nx N [-o PATH] [--vtk PATH]
    dmpfem mesh validate PATH

Exit codes: 0 success/pass, 1 condition failure, 2 usage or config error,
3 numerical failure.

The ``run`` config is an INI file::

    [problem]
    name = ex5.1
    bnorm = 10

    [mesh]
    family = acute8          ; acute8 | right | holed | cube
    sizes = 3200 9800        ; element counts (or: nx = 20 35)
    domain = 0 16 0 16       ; defaults to the problem's domain

    [sweep]
    bnorm = 1 2 4 8          ; any problem parameter

    [checks]
    thm41 = yes
    edge2d = yes
    zmatrix = yes
    rowsums = yes
    mmatrix = yes
    size_cap = 3000
    b_reading = euclidean    ; euclidean | component

    [output]
    report = results.csv
    vtk = u_{N}_{bnorm}.vtk  ; fields: {N} {nx} {cell} and sweep parameters
    geometry = geom_{N}.csv
    thm41 = thm41_{N}.csv
    edge2d = edge_{N}.csv
    matrix = A_{N}.txt

    [solver]
    rtol = 1e-10

Relative output paths are resolved against the config file's directory.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import itertools
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import mesh as meshmod
from .assembly import SolverError, assemble, average_diffusion, local_matrices, solve, write_triplets
from .conditions import HessianRecoveryError, check_edge_condition_2d, check_thm41, h_bound_readings
from .dmp_verify import (M_MATRIX_CAP, DmpReport, check_m_matrix, check_row_sums, check_z_matrix,
                         extremum_report)
from .geometry import DegenerateElementError, NotSPDError, element_geometry, metric_quantities
from .problem import coefficient_bounds, problem_from_config

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3
NUMERIC_ERRORS = (SolverError, NotSPDError, DegenerateElementError, FloatingPointError,
                  HessianRecoveryError, np.linalg.LinAlgError)

REPORT_COLUMNS = ["cell", "N", "nx", "h", "b_inf", "b_inf_component", "c_inf", "max_metric_angle",
                  "thm41", "edge2d", "z", "rowsum", "mmatrix", "minus_umin", "undershoot",
                  "overshoot", "residual", "error"]


class ConfigError(ValueError):
    """Bad configuration; the message carries the section and key."""


# family -> (element count for grid parameter n, builder(n, domain))
FAMILIES = {
    "acute8": (lambda n: 8 * n * n, lambda n, dom: meshmod.generate_acute8_split(n, n, dom)),
    "right": (lambda n: 2 * n * n, lambda n, dom: meshmod.generate_right_split(n, n, dom)),
    "holed": (lambda n: 2 * (n * n - (n // 9) ** 2) if n % 9 == 0 else -1,
              lambda n, dom: meshmod.generate_holed_domain(n)),
    "cube": (lambda n: 6 * n ** 3, lambda n, dom: meshmod.generate_cube_split(
        n, dom if dom is not None and len(dom) == 6 else (0.0, 1.0, 0.0, 1.0, 0.0, 1.0))),
}


def grid_for_count(family, N):
    """Grid parameter n with exactly N elements for a family, or ConfigError."""
    count = FAMILIES[family][0]
    n = 1
    while count(n) < N or count(n) < 0:
        n += 1
        if n > 100000:
            break
    if count(n) != N:
        raise ConfigError(f"[mesh] sizes: no {family} mesh has exactly {N} elements")
    return n


def build_mesh(family, n, domain=None):
    if family not in FAMILIES:
        raise ConfigError(f"[mesh] family: unknown family {family!r}; choose from {sorted(FAMILIES)}")
    if family in ("acute8", "right") and domain is None:
        domain = (0.0, 1.0, 0.0, 1.0)
    return FAMILIES[family][1](n, domain)


# ---------------------------------------------------------------- config


@dataclass
class ExperimentConfig:
    problem: dict
    family: str
    grids: list
    domain: tuple = None
    sweep: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    rtol: float = 1e-10
    base: Path = Path(".")

    def cells(self):
        """(cell index, grid parameter, parameter overrides) in config order."""
        keys = list(self.sweep)
        combos = list(itertools.product(*(self.sweep[k] for k in keys))) or [()]
        k = 0
        for n in self.grids:
            for combo in combos:
                yield k, n, dict(zip(keys, combo))
                k += 1


def _floats(section, key, raw):
    try:
        return [float(t) for t in raw.replace(",", " ").split()]
    except ValueError:
        raise ConfigError(f"[{section}] {key}: expected numbers, got {raw!r}") from None


def _bool(section, key, raw):
    v = raw.strip().lower()
    if v in ("1", "yes", "true", "on"):
        return True
    if v in ("0", "no", "false", "off", ""):
        return False
    raise ConfigError(f"[{section}] {key}: expected yes/no, got {raw!r}")


def load_config(path):
    """Parse an experiment config file into :class:`ExperimentConfig`."""
    path = Path(path)
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return config_from_parser(cp, base=path.parent)


def config_from_parser(cp, base=Path(".")):
    known = {"problem", "mesh", "sweep", "checks", "output", "solver"}
    for s in cp.sections():
        if s not in known:
            raise ConfigError(f"[{s}]: unknown section")
    if not cp.has_section("problem") or "name" not in cp["problem"]:
        raise ConfigError("[problem] name: missing")
    problem = dict(cp["problem"])

    if not cp.has_section("mesh"):
        raise ConfigError("[mesh]: missing section")
    m = cp["mesh"]
    family = m.get("family", "acute8").strip()
    if family not in FAMILIES:
        raise ConfigError(f"[mesh] family: unknown family {family!r}; choose from {sorted(FAMILIES)}")
    if "sizes" in m and "nx" in m:
        raise ConfigError("[mesh] sizes/nx: give one of them, not both")
    if "sizes" in m:
        grids = [grid_for_count(family, int(v)) for v in _floats("mesh", "sizes", m["sizes"])]
    elif "nx" in m:
        grids = [int(v) for v in _floats("mesh", "nx", m["nx"])]
    else:
        raise ConfigError("[mesh] sizes: missing (or nx)")
    if any(n < 1 for n in grids):
        raise ConfigError("[mesh] nx: grid sizes must be positive")
    domain = tuple(_floats("mesh", "domain", m["domain"])) if "domain" in m else None

    sweep = {}
    if cp.has_section("sweep"):
        for k, v in cp["sweep"].items():
            sweep[k] = _floats("sweep", k, v)

    checks = {"thm41": True, "edge2d": True, "zmatrix": True, "rowsums": True,
              "mmatrix": True, "size_cap": M_MATRIX_CAP, "b_reading": "euclidean"}
    if cp.has_section("checks"):
        for k, v in cp["checks"].items():
            if k == "size_cap":
                checks[k] = int(_floats("checks", k, v)[0])
            elif k == "b_reading":
                if v.strip() not in ("euclidean", "component"):
                    raise ConfigError(f"[checks] b_reading: expected euclidean or component, got {v!r}")
                checks[k] = v.strip()
            elif k in checks:
                checks[k] = _bool("checks", k, v)
            else:
                raise ConfigError(f"[checks] {k}: unknown key")

    outputs = {}
    if cp.has_section("output"):
        for k, v in cp["output"].items():
            if k not in ("report", "vtk", "geometry", "thm41", "edge2d", "matrix"):
                raise ConfigError(f"[output] {k}: unknown key")
            if v.strip():
                outputs[k] = v.strip()
    rtol = 1e-10
    if cp.has_section("solver"):
        for k, v in cp["solver"].items():
            if k != "rtol":
                raise ConfigError(f"[solver] {k}: unknown key")
            rtol = _floats("solver", k, v)[0]

    cfg = ExperimentConfig(problem, family, grids, domain, sweep, checks, outputs, rtol, Path(base))
    probe = {"N": 0, "nx": 0, "cell": 0, **{k: 0 for k in sweep}}
    for k, v in outputs.items():
        try:
            v.format(**({} if k == "report" else probe))
        except (KeyError, IndexError, ValueError) as exc:
            raise ConfigError(f"[output] {k}: bad placeholder in {v!r} ({exc})") from None
    # build one problem up front so bad names/parameters fail as config errors
    for _, _, params in itertools.islice(cfg.cells(), 1):
        _make_problem(cfg.problem, params)
    return cfg


def _make_problem(section, overrides):
    spec = dict(section)
    spec.update({k: repr(float(v)) for k, v in overrides.items()})
    try:
        return problem_from_config(spec)
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"[problem] {spec.get('name')}: {exc}") from None


# ---------------------------------------------------------------- cells


def geometry_rows(mesh, dk):
    """Per-element geometry table: volume, heights, Euclidean and metric angles."""
    geom = element_geometry(mesh)
    mg = metric_quantities(geom, dk)
    ang = geom.angles()
    mang = mg.angles()
    m = mesh.dim + 1
    iu = np.triu_indices(m, 1)
    head = (["element", "volume"] + [f"h_{i}" for i in range(m)]
            + ["max_angle", "max_metric_angle", "lam_min", "lam_max"])
    rows = []
    for k in range(mesh.n_elements):
        rows.append([k, repr(float(geom.volume[k]))] + [repr(float(v)) for v in geom.heights[k]]
                    + [repr(float(ang[k][iu].max())), repr(float(mang[k][iu].max())),
                       repr(float(mg.lam_min[k])), repr(float(mg.lam_max[k]))])
    return head, rows


def _write_rows(path, head, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(head)
        w.writerows(rows)


def _fmt(v):
    if isinstance(v, bool):
        return "pass" if v else "fail"
    if isinstance(v, float):
        return repr(float(v))
    return "" if v is None else str(v)


def run_cell(problem, mesh, checks, rtol=1e-10):
    """Certify, assemble, solve and verify one (mesh, problem) pair.

    Returns ``(row, artifacts)`` where ``row`` maps :data:`REPORT_COLUMNS` to
    values and ``artifacts`` holds the intermediate objects.
    """
    geom = element_geometry(mesh)
    dk = average_diffusion(problem, mesh)
    bounds = coefficient_bounds(problem, mesh, dk=dk)
    mg = metric_quantities(geom, dk)
    stats = meshmod.statistics(mesh)
    row = {c: None for c in REPORT_COLUMNS}
    row.update(N=mesh.n_elements, h=float(stats.h), b_inf=float(bounds.b_norm_max),
               b_inf_component=float(bounds.b_comp_max), c_inf=float(bounds.c_max),
               max_metric_angle=float(mg.max_angle()))
    art = {"geometry": geom, "dk": dk, "bounds": bounds}
    reading = checks.get("b_reading", "euclidean")
    if checks.get("thm41", True):
        art["thm41"] = check_thm41(mesh, problem, geom, dk, bounds, reading)
        row["thm41"] = art["thm41"].passed
    if checks.get("edge2d", True) and mesh.dim == 2:
        art["edge2d"] = check_edge_condition_2d(mesh, problem, geom, dk, bounds, reading)
        row["edge2d"] = art["edge2d"].passed
    local = local_matrices(problem, mesh, geom, dk)
    system = assemble(problem, mesh, geom, dk, local)
    art["system"] = system
    rep = DmpReport()
    if checks.get("zmatrix", True):
        rep.z_matrix = check_z_matrix(system)
        row["z"] = rep.z_matrix.passed
    if checks.get("rowsums", True):
        rep.row_sums_nonneg = check_row_sums(system, problem, mesh)
        row["rowsum"] = rep.row_sums_nonneg.passed
    if checks.get("mmatrix", True):
        rep.m_matrix = check_m_matrix(system, checks.get("size_cap", M_MATRIX_CAP))
        row["mmatrix"] = rep.m_matrix.status
    u, res = solve(system, return_residual=True, rtol=rtol)
    extremum_report(u, problem, mesh, res, rep)
    art["u"], art["dmp"] = u, rep
    row.update(minus_umin=rep.minus_umin, undershoot=rep.undershoot, overshoot=rep.overshoot,
               residual=rep.residual)
    return row, art


def run(cfg, out=sys.stdout):
    """Execute every sweep cell; returns the exit code."""
    def target(key, fields):
        if key not in cfg.outputs:
            return None
        path = cfg.base / cfg.outputs[key].format(**fields)
        path.parent.mkdir(parents=True, exist_ok=True)
        return path

    rows, internal = [], 0
    meshes = {}
    for cell, n, params in cfg.cells():
        problem = _make_problem(cfg.problem, params)
        domain = cfg.domain if cfg.domain is not None else problem.domain
        row = {c: None for c in REPORT_COLUMNS}
        try:
            if n not in meshes:
                meshes[n] = build_mesh(cfg.family, n, domain)
            mesh = meshes[n]
            fields = {"N": mesh.n_elements, "nx": n, "cell": cell, **{k: _short(v) for k, v in params.items()}}
            row, art = run_cell(problem, mesh, cfg.checks, cfg.rtol)
            if (p := target("vtk", fields)) is not None:
                meshmod.write_vtk(mesh, art["u"], p)
            if (p := target("geometry", fields)) is not None:
                _write_rows(p, *geometry_rows(mesh, art["dk"]))
            if (p := target("thm41", fields)) is not None and "thm41" in art:
                art["thm41"].to_csv(p)
            if (p := target("edge2d", fields)) is not None and "edge2d" in art:
                art["edge2d"].to_csv(p)
            if (p := target("matrix", fields)) is not None:
                write_triplets(art["system"], p)
        except NUMERIC_ERRORS as exc:
            internal += 1
            row["error"] = f"{type(exc).__name__}: {exc}".replace("\n", " ")
        row["cell"], row["nx"] = cell, n
        if row["N"] is None:
            row["N"] = FAMILIES[cfg.family][0](n)
        rows.append(row)
        print(_cell_line(row, params), file=out)
    if (p := target("report", {})) is not None:
        _write_rows(p, REPORT_COLUMNS,
                    [[_fmt(r[c]) for c in REPORT_COLUMNS] for r in rows])
    return EXIT_NUMERIC if internal else EXIT_OK


def _short(v):
    return int(v) if float(v).is_integer() else v


def _cell_line(row, params):
    p = "".join(f" {k}={_short(v)}" for k, v in params.items())
    if row.get("error"):
        return f"cell {row['cell']} N={row['N']}{p}: ERROR {row['error']}"
    return (f"cell {row['cell']} N={row['N']}{p}: h={row['h']:.4g} "
            f"max_metric_angle={row['max_metric_angle'] / math.pi:.4f}pi "
            f"thm41={_fmt(row['thm41'])} edge2d={_fmt(row['edge2d'])} z={_fmt(row['z'])} "
            f"rowsum={_fmt(row['rowsum'])} mmatrix={_fmt(row['mmatrix'])} "
            f"-umin={row['minus_umin']:.3e} overshoot={row['overshoot']:.3e}")


# ---------------------------------------------------------------- argparse


def _parse_params(items):
    out = {}
    for item in items or []:
        if "=" not in item:
            raise ConfigError(f"--param {item!r}: expected key=value")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _mesh_from_args(args, problem=None):
    if args.mesh:
        return meshmod.read_mesh(args.mesh)
    if not args.family or not args.nx:
        raise ConfigError("give --mesh PATH or --family and --nx")
    domain = tuple(args.domain) if args.domain else (problem.domain if problem is not None else None)
    if args.family in ("acute8", "right"):
        ny = args.ny or args.nx
        dom = domain if domain is not None else (0.0, 1.0, 0.0, 1.0)
        gen = meshmod.generate_acute8_split if args.family == "acute8" else meshmod.generate_right_split
        return gen(args.nx, ny, dom)
    return build_mesh(args.family, args.nx, domain)


def cmd_run(args, out):
    cfg = load_config(args.config)
    return run(cfg, out)


def cmd_certify(args, out):
    problem = problem_from_config({"name": args.problem, **_parse_params(args.param)})
    mesh = _mesh_from_args(args, problem)
    if args.mesh:
        check = meshmod.validate(mesh)
        if not check.ok:
            print(str(check), file=sys.stderr)
            return EXIT_USAGE
    geom = element_geometry(mesh)
    dk = average_diffusion(problem, mesh)
    bounds = coefficient_bounds(problem, mesh, dk=dk)
    wanted = ["thm41", "edge2d"] if args.condition == "all" else [args.condition]
    if "edge2d" in wanted and mesh.dim != 2:
        if args.condition == "edge2d":
            raise ConfigError("--condition edge2d needs a 2D mesh")
        wanted.remove("edge2d")
    print(f"mesh: {mesh.n_vertices} vertices, {mesh.n_elements} elements, "
          f"h = {meshmod.statistics(mesh).h:.6g}", file=out)
    ok = True
    csv_base = Path(args.csv) if args.csv else None
    for name in wanted:
        if name == "thm41":
            rep = check_thm41(mesh, problem, geom, dk, bounds, args.b_reading)
        else:
            rep = check_edge_condition_2d(mesh, problem, geom, dk, bounds, args.b_reading)
            if not rep.forms_agree:
                print("edge2d: WARNING cotangent and arccotangent forms disagree", file=out)
        print(rep.summary(), file=out)
        ok &= rep.passed
        if csv_base is not None:
            p = csv_base if len(wanted) == 1 else csv_base.with_name(f"{csv_base.stem}_{name}{csv_base.suffix}")
            rep.to_csv(p)
    for k, v in h_bound_readings(problem, mesh, bounds).items():
        print(f"h_bound[{k}] = {v:.6g}", file=out)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_mesh_gen(args, out):
    mesh = _mesh_from_args(args)
    st = meshmod.statistics(mesh)
    print(f"{args.family}: {mesh.n_vertices} vertices ({mesh.n_interior} interior), "
          f"{mesh.n_elements} elements, h = {st.h:.6g}", file=out)
    if mesh.dim == 2:
        print(f"angles: min {st.min_angle / math.pi:.4f}pi, max {st.max_angle / math.pi:.4f}pi", file=out)
    if args.output:
        meshmod.write_mesh(mesh, args.output)
    if args.vtk:
        meshmod.write_vtk(mesh, np.zeros(mesh.n_vertices), args.vtk, name="zero")
    return EXIT_OK


def cmd_mesh_validate(args, out):
    mesh = meshmod.read_mesh(args.path)
    rep = meshmod.validate(mesh)
    print(str(rep), file=out)
    return EXIT_OK if rep.ok else EXIT_FAIL


def build_parser():
    p = argparse.ArgumentParser(prog="dmpfem", description="Linear FEM with discrete maximum principle checks")
    sub = p.add_subparsers(dest="verb", required=True)

    r = sub.add_parser("run", help="run a config-driven sweep")
    r.add_argument("config")
    r.set_defaults(func=cmd_run)

    def mesh_source(q, require_family=False):
        if not require_family:
            q.add_argument("--mesh", help="mesh file in the ASCII format")
        q.add_argument("--nx", type=int)
        q.add_argument("--ny", type=int)
        q.add_argument("--domain", type=float, nargs="+", help="x0 x1 y0 y1 [z0 z1]")

    c = sub.add_parser("certify", help="check the sufficient mesh conditions")
    mesh_source(c)
    c.add_argument("--family", choices=sorted(FAMILIES))
    c.add_argument("--problem", required=True, help="ex5.1 ... ex5.4 or constant")
    c.add_argument("--param", action="append", help="problem parameter key=value (repeatable)")
    c.add_argument("--condition", choices=["thm41", "edge2d", "all"], default="thm41")
    c.add_argument("--b-reading", choices=["euclidean", "component"], default="euclidean")
    c.add_argument("--csv", help="write per-pair / per-edge margins here")
    c.set_defaults(func=cmd_certify)

    m = sub.add_parser("mesh", help="mesh utilities")
    msub = m.add_subparsers(dest="mesh_verb", required=True)
    g = msub.add_parser("gen", help="generate a structured mesh")
    g.add_argument("family", choices=sorted(FAMILIES))
    mesh_source(g, require_family=True)
    g.add_argument("-o", "--output")
    g.add_argument("--vtk")
    g.set_defaults(func=cmd_mesh_gen, mesh=None)
    v = msub.add_parser("validate", help="validate a mesh file")
    v.add_argument("path")
    v.set_defaults(func=cmd_mesh_validate)
    return p


def main(argv=None, out=None):
    out = out if out is not None else sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        return args.func(args, out)
    except (ConfigError, meshmod.MeshFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NUMERIC_ERRORS as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
