"""Experiment driver: single solves, the mesh-independence sweep with
EOC columns, the diagnostics suite and field export.

Subcommands: solve, sweep, check, export.  Exit codes: 0 success,
1 convergence/check failure, 2 usage error.
"""

import argparse
import csv
import datetime
import json
import math
import sys
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .assembly import SPACE_W, FEMatrices, NodalFunction, build_matrices, vector_norm
from .diagnostics import (
    CheckReport,
    check_contraction,
    check_derivative_monotonicity,
    check_lipschitz_scaling,
    check_newton_differentiability,
    check_pointwise_convexity,
    registered_checks,
)
from .mesh import Mesh, build_friedrichs_keller
from .newton import NewtonConfig, NewtonReport, run
from .operators import apply_P, extend_interior

# The reference configuration of the mesh-independence study.  These
# constants live here and nowhere else.
PAPER_PRESET = {
    "alpha": 1e-5,
    "tol": 1e-7,
    "y_d": "affine:0,-1,-1",  # y_D(x1, x2) = -x1 - x2
    "psi": "const:-5",
    "y0_policy": "interpolate_yD",
    "selector_policy": "strict_only",
    "sizes": [16, 32, 64, 128, 256],
    "large_size": 512,
    "max_iter": 50,
}


class UsageError(Exception):
    pass


def parse_field(spec: str):
    """Named scalar fields: 'const:c' or 'affine:a,b,c' for a + b*x1 + c*x2."""
    kind, _, arg = spec.partition(":")
    if kind == "const":
        try:
            c = float(arg)
        except ValueError as exc:
            raise UsageError(f"bad constant field {spec!r}") from exc
        return lambda x1, x2: np.full_like(x1, c)
    if kind == "affine":
        try:
            a, b, c = (float(s) for s in arg.split(","))
        except ValueError as exc:
            raise UsageError(f"bad affine field {spec!r}, expected affine:a,b,c") from exc
        return lambda x1, x2: a + b * x1 + c * x2
    raise UsageError(f"unknown field kind {spec!r}; use const:c or affine:a,b,c")


def compute_eoc(history: list[np.ndarray], norm_kind: str, mats: FEMatrices):
    """Experimental order of convergence at the last iterate:
    log of the ratio of the last two consecutive-difference norms divided
    by the log of the previous ratio.  Returns None when undefined."""
    if len(history) < 4:
        raise ValueError("EOC needs at least 4 iterates")
    tail = history[-4:]
    diffs = [
        vector_norm(tail[k + 1] - tail[k], norm_kind, mats.K, mats.M)
        for k in range(3)
    ]
    if any(d == 0.0 for d in diffs):
        return None
    denom = math.log(diffs[1] / diffs[0])
    if denom == 0.0:
        return None
    return math.log(diffs[2] / diffs[1]) / denom


@dataclass
class SweepRow:
    h: float
    iterations: int
    final_residue: float
    eoc_l2_y: float | None
    eoc_h1_ytilde: float | None
    eoc_h10_u: float | None
    status: str


@dataclass
class SweepResult:
    rows: list[SweepRow]
    provenance: dict = field(default_factory=dict)


def _fmt(x) -> str:
    return "" if x is None else repr(float(x))


def run_single(config: NewtonConfig, y_d_spec: str, psi_spec: str, n: int):
    mesh = build_friedrichs_keller(n)
    mats = build_matrices(mesh)
    report = run(config, parse_field(y_d_spec), parse_field(psi_spec), mesh, mats)
    return mesh, mats, report


def run_sweep(
    alpha: float,
    tol: float,
    y_d_spec: str,
    psi_spec: str,
    sizes,
    max_iter: int = 50,
    selector_policy: str = "strict_only",
    out_csv: str | None = None,
) -> SweepResult:
    if not sizes:
        raise UsageError("sweep needs at least one mesh size")
    runs = []
    for n in sorted(sizes):
        config = NewtonConfig(
            alpha=alpha, tol=tol, max_iter=max_iter, selector_policy=selector_policy
        )
        runs.append(run_single(config, y_d_spec, psi_spec, n))
    # EOCs are evaluated at the largest iteration index reached in every
    # run of the sweep, so the difference quotients compare like with like
    common = min(report.iterations for _, _, report in runs)
    rows = []
    for mesh, mats, report in runs:
        history = report.history[: common + 1]
        ys = [rec.y for rec in history]
        yts = [rec.ytilde for rec in history]
        us = [extend_interior(rec.u, mats) for rec in history]
        has_eoc = len(history) >= 4
        rows.append(
            SweepRow(
                h=mesh.h,
                iterations=report.iterations,
                final_residue=report.residuals[-1],
                eoc_l2_y=compute_eoc(ys, "L2", mats) if has_eoc else None,
                eoc_h1_ytilde=compute_eoc(yts, "H1", mats) if has_eoc else None,
                eoc_h10_u=compute_eoc(us, "H1_semi", mats) if has_eoc else None,
                status=report.status,
            )
        )
    rows.sort(key=lambda r: -r.h)
    result = SweepResult(
        rows=rows,
        provenance={
            "alpha": alpha,
            "tol": tol,
            "y_d": y_d_spec,
            "psi": psi_spec,
            "sizes": sorted(sizes),
            "selector_policy": selector_policy,
            "version": __version__,
            "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
            "u_eoc_norm": "H1_seminorm",
        },
    )
    if out_csv is not None:
        write_sweep_csv(result, out_csv)
    return result


def write_sweep_csv(result: SweepResult, path: str):
    """Six fixed columns; a status column is appended only when some run
    failed to converge, keeping the green-path header exact."""
    header = ["h", "iterations", "final_residue", "eoc_l2_y", "eoc_h1_ytilde", "eoc_h10_u"]
    any_failed = any(r.status != "converged" for r in result.rows)
    if any_failed:
        header = header + ["status"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for r in result.rows:
            row = [
                repr(r.h),
                str(r.iterations),
                repr(r.final_residue),
                _fmt(r.eoc_l2_y),
                _fmt(r.eoc_h1_ytilde),
                _fmt(r.eoc_h10_u),
            ]
            if any_failed:
                row.append(r.status)
            writer.writerow(row)


def export_fields(report: NewtonReport, mesh: Mesh, path: str, y_d: np.ndarray):
    """Write the desired state, final state, control and multiplier as
    point scalars of a legacy ASCII VTK unstructured grid."""
    mats_interior = np.flatnonzero(~mesh.boundary_mask)
    u_full = np.zeros(mesh.num_nodes)
    u_full[mats_interior] = report.u
    lam_full = np.zeros(mesh.num_nodes)
    lam_full[mats_interior] = report.lam
    fields = {
        "y_D": y_d,
        "y_tilde": report.ytilde,
        "u": u_full,
        "lambda": lam_full,
    }
    write_vtk(mesh, fields, path)


def write_vtk(mesh: Mesh, fields: dict, path: str):
    nt = mesh.num_triangles
    lines = [
        "# vtk DataFile Version 3.0",
        "obstaclecontrol fields",
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {mesh.num_nodes} double",
    ]
    for x, y in mesh.nodes:
        lines.append(f"{float(x)!r} {float(y)!r} 0.0")
    lines.append(f"CELLS {nt} {4 * nt}")
    for a, b, c in mesh.triangles:
        lines.append(f"3 {a} {b} {c}")
    lines.append(f"CELL_TYPES {nt}")
    lines.extend(["5"] * nt)
    lines.append(f"POINT_DATA {mesh.num_nodes}")
    for name, values in fields.items():
        lines.append(f"SCALARS {name} double 1")
        lines.append("LOOKUP_TABLE default")
        lines.extend(repr(float(v)) for v in values)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_vtk(path: str):
    """Parse files produced by write_vtk (round-trip checks and tests)."""
    with open(path) as fh:
        tokens = fh.read().split("\n")
    it = iter(tokens)
    points = None
    cells = None
    fields = {}
    line = next(it)
    while True:
        try:
            if line.startswith("POINTS"):
                count = int(line.split()[1])
                points = np.array(
                    [[float(t) for t in next(it).split()] for _ in range(count)]
                )
                line = next(it)
            elif line.startswith("CELLS"):
                count = int(line.split()[1])
                cells = np.array(
                    [[int(t) for t in next(it).split()[1:]] for _ in range(count)]
                )
                line = next(it)
            elif line.startswith("SCALARS"):
                name = line.split()[1]
                next(it)  # LOOKUP_TABLE
                vals = []
                for line in it:
                    if not line or not line[0].isdigit() and line[0] != "-":
                        break
                    vals.append(float(line))
                else:
                    line = ""
                fields[name] = np.array(vals)
            else:
                line = next(it)
        except StopIteration:
            break
    return points, cells, fields


def run_checks(names, seed: int, out_path: str | None, trials: int | None = None) -> int:
    registry = registered_checks()
    unknown = [n for n in names if n not in registry]
    if unknown:
        raise UsageError(
            f"unknown check(s) {unknown}; registered: {sorted(registry)}"
        )
    if trials is not None and trials < 1:
        raise UsageError("trials must be at least 1")
    reports = []
    for name in names:
        reports.append(_run_named_check(name, seed, trials))
    payload = {"seed": seed, "checks": [r.as_dict() for r in reports]}
    text = json.dumps(payload, indent=2, sort_keys=True)
    if out_path is not None:
        with open(out_path, "w") as fh:
            fh.write(text + "\n")
    for r in reports:
        print(f"{r.name}: {'PASS' if r.passed else 'FAIL'} "
              f"(max violation {r.max_violation:.3e}, tol {r.tolerance:.3e})")
    return 0 if all(r.passed for r in reports) else 1


def _run_named_check(name: str, seed: int, trials: int | None) -> CheckReport:
    kwargs = {} if trials is None else {"trials": trials}
    if name == "convexity":
        mesh = build_friedrichs_keller(16)
        return check_pointwise_convexity(mesh, build_matrices(mesh), seed=seed, **kwargs)
    if name == "monotonicity":
        mesh = build_friedrichs_keller(8)
        return check_derivative_monotonicity(mesh, build_matrices(mesh), seed=seed, **kwargs)
    if name == "contraction":
        mesh = build_friedrichs_keller(8)
        return check_contraction(
            mesh, build_matrices(mesh), seed=seed, alpha=PAPER_PRESET["alpha"], **kwargs
        )
    if name == "newton_diff":
        return check_newton_differentiability(*paper_converged_zeta(16), seed=seed)
    if name == "lipschitz":
        return check_lipschitz_scaling(seed=seed, **kwargs)
    raise UsageError(f"unknown check {name!r}")


def paper_converged_zeta(n: int):
    """Mesh, matrices, converged adjoint field and obstacle of the
    reference configuration; base point for the semismoothness check."""
    p = PAPER_PRESET
    config = NewtonConfig(alpha=p["alpha"], tol=p["tol"], max_iter=p["max_iter"])
    mesh, mats, report = run_single(config, p["y_d"], p["psi"], n)
    y_d = parse_field(p["y_d"])
    yd_vals = NodalFunction(
        y_d(mesh.nodes[:, 0], mesh.nodes[:, 1]), SPACE_W, mesh
    )
    zeta = (apply_P(yd_vals.values, mats) - apply_P(report.y, mats)) / p["alpha"]
    psi = NodalFunction(
        parse_field(p["psi"])(mesh.nodes[:, 0], mesh.nodes[:, 1]), SPACE_W, mesh
    )
    return mesh, mats, NodalFunction(zeta, SPACE_W, mesh), psi


def _load_config(args) -> dict:
    cfg = {}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            cfg = json.load(fh)
    if getattr(args, "preset", None) == "paper":
        merged = dict(PAPER_PRESET)
        merged.update(cfg)
        cfg = merged
    for key, attr in [
        ("alpha", "alpha"), ("tol", "tol"), ("max_iter", "max_iter"),
        ("selector_policy", "selector"), ("y_d", "y_d"), ("psi", "psi"),
    ]:
        val = getattr(args, attr, None)
        if val is not None:
            cfg[key] = val
    return cfg


def _require(cfg: dict, key: str):
    if key not in cfg:
        raise UsageError(f"missing configuration value {key!r} (use --preset paper or flags)")
    return cfg[key]


def _cmd_solve(args) -> int:
    cfg = _load_config(args)
    n = args.n if args.n is not None else cfg.get("n", 16)
    config = NewtonConfig(
        alpha=_require(cfg, "alpha"),
        tol=_require(cfg, "tol"),
        max_iter=cfg.get("max_iter", 50),
        selector_policy=cfg.get("selector_policy", "strict_only"),
    )
    mesh, mats, report = run_single(config, _require(cfg, "y_d"), _require(cfg, "psi"), n)
    print(f"n={n} h={mesh.h} status={report.status} iterations={report.iterations} "
          f"final_residue={report.residuals[-1]:.4e}")
    if args.out:
        y_d = parse_field(cfg["y_d"])(mesh.nodes[:, 0], mesh.nodes[:, 1])
        export_fields(report, mesh, args.out, y_d)
        print(f"fields written to {args.out}")
    return 0 if report.status == "converged" else 1


def _cmd_sweep(args) -> int:
    cfg = _load_config(args)
    sizes = (
        [int(s) for s in args.sizes.split(",")] if args.sizes else list(_require(cfg, "sizes"))
    )
    if args.large:
        sizes.append(cfg.get("large_size", 512))
    result = run_sweep(
        alpha=_require(cfg, "alpha"),
        tol=_require(cfg, "tol"),
        y_d_spec=_require(cfg, "y_d"),
        psi_spec=_require(cfg, "psi"),
        sizes=sizes,
        max_iter=cfg.get("max_iter", 50),
        selector_policy=cfg.get("selector_policy", "strict_only"),
        out_csv=args.out,
    )
    print("h,iterations,final_residue,eoc_l2_y,eoc_h1_ytilde,eoc_h10_u")
    for r in result.rows:
        print(
            f"{r.h!r},{r.iterations},{r.final_residue!r},"
            f"{_fmt(r.eoc_l2_y)},{_fmt(r.eoc_h1_ytilde)},{_fmt(r.eoc_h10_u)}"
        )
    failed = any(r.status != "converged" for r in result.rows)
    if failed:
        print("warning: some runs hit the iteration cap", file=sys.stderr)
    return 1 if failed else 0


def _cmd_check(args) -> int:
    names = args.names.split(",") if args.names else sorted(registered_checks())
    return run_checks(names, seed=args.seed, out_path=args.out, trials=args.trials)


def _cmd_export(args) -> int:
    cfg = _load_config(args)
    n = args.n if args.n is not None else cfg.get("n", 64)
    config = NewtonConfig(
        alpha=_require(cfg, "alpha"),
        tol=_require(cfg, "tol"),
        max_iter=cfg.get("max_iter", 50),
        selector_policy=cfg.get("selector_policy", "strict_only"),
    )
    mesh, mats, report = run_single(config, _require(cfg, "y_d"), _require(cfg, "psi"), n)
    y_d = parse_field(cfg["y_d"])(mesh.nodes[:, 0], mesh.nodes[:, 1])
    export_fields(report, mesh, args.out, y_d)
    print(f"fields written to {args.out}")
    return 0 if report.status == "converged" else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="obstaclecontrol",
        description="Semismooth Newton solver for obstacle-constrained optimal control",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON configuration file")
        p.add_argument("--preset", choices=["paper"], help="named configuration preset")
        p.add_argument("--n", type=int, help="subdivisions per side")
        p.add_argument("--alpha", type=float)
        p.add_argument("--tol", type=float)
        p.add_argument("--max-iter", dest="max_iter", type=int)
        p.add_argument(
            "--selector", choices=["strict_only", "strict_plus_biactive"]
        )
        p.add_argument("--y-d", dest="y_d", help="field spec, e.g. affine:0,-1,-1")
        p.add_argument("--psi", help="field spec, e.g. const:-5")

    p_solve = sub.add_parser("solve", help="single Newton run")
    common(p_solve)
    p_solve.add_argument("--out", help="optional VTK output path")
    p_solve.set_defaults(func=_cmd_solve)

    p_sweep = sub.add_parser("sweep", help="mesh-independence study with EOC columns")
    common(p_sweep)
    p_sweep.add_argument("--sizes", help="comma-separated mesh sizes")
    p_sweep.add_argument("--large", action="store_true", help="append the 512 mesh")
    p_sweep.add_argument("--out", help="CSV output path")
    p_sweep.set_defaults(func=_cmd_sweep)

    p_check = sub.add_parser("check", help="run diagnostics checks")
    p_check.add_argument("--names", help="comma-separated check names (default: all)")
    p_check.add_argument("--seed", type=int, default=42)
    p_check.add_argument("--trials", type=int)
    p_check.add_argument("--out", help="JSON report path")
    p_check.set_defaults(func=_cmd_check)

    p_export = sub.add_parser("export", help="solve and export fields to VTK")
    common(p_export)
    p_export.add_argument("--out", required=True, help="VTK output path")
    p_export.set_defaults(func=_cmd_export)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
