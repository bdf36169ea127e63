"""Command-line entry point of the Heisenberg harmonic-analysis toolkit.

Every command writes its data under the output directory (CSV tables, JSON
reports, binary sampled functions) and prints the written paths. Logs go to
stderr. Exit codes: 0 success, 1 numerical/domain failure or failed
acceptance, 2 usage or configuration error.
"""

import argparse
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from app.config import ExperimentConfig, settings
from src.analysis.commutator_lab import (
    commutator_apply,
    far_field_annuli,
    fit_theta,
    h1b_growth,
    lb_growth,
    make_atom,
    weak11_experiment,
    weak_l1_report,
)
from src.analysis.dyadic import build_dyadic_system, max_dyadic_depth
from src.analysis.oscillation_bmo import (
    ap_constant,
    bmo_norm,
    bmo_norm_weighted,
    ef_sets,
    median,
    oscillation_norm_proxy,
)
from src.analysis.sampled import SYMBOLS, Ball, BallFamily, SampledFunction, Weight, symbol_function
from src.analysis.sector import (
    export_sector_spec,
    find_direction_point,
    load_sector_spec,
    lower_bound_verify,
    scaled_sector,
    volume_regularity,
)
from src.core.errors import HarmonicAnalysisError
from src.core.models import Calibration, ExperimentReport, SectorSpec
from src.core.points import GroupMode, GroupPoint
from src.groups.group_core import quasi_triangle_constant
from src.kernels.heat_kernel import heat_eval
from src.kernels.kernel_table import BaseKernel, build_kernel
from src.kernels.riesz_kernel import (
    analytic_constant,
    calibrate_constant,
    default_calibration_sample,
    nonvanishing_report,
    phase_of,
    riesz_formula_eval,
    riesz_subordination_eval,
    zero_scan,
)
from src.utils.report_io import canonical_json, read_csv, read_json, write_csv, write_json

logger = logging.getLogger(__name__)

COMMAND_OBJECTS = {
    "kernel eval": "Riesz kernel K_j on a point list",
    "kernel calibrate": "Normalising constant of the fixed-phase kernel formula",
    "kernel zero-scan": "Zero set of the phase function A_n(i phi) and near-zero cells of K_j on the unit sphere",
    "kernel cross-check": "Fixed-phase formula against heat-kernel subordination",
    "heat eval": "Heat kernel p_h on a point list",
    "heat verify": "Heat kernel scaling and unit mass",
    "sector build": "Direction point, aperture and radii of a twisted truncated sector",
    "sector verify-lower-bound": "Kernel lower bound with constant sign on a sector",
    "sector volume": "Regularity of sector volume inside large balls",
    "bmo norm": "BMO norm over a ball family",
    "bmo median": "Median value of a function on a ball",
    "bmo wlambda": "Local mean oscillation over a dyadic system",
    "bmo ef-sets": "Sets E and F with sign-coherent oscillation and kernel",
    "bmo ap-constant": "Muckenhoupt A_p constant of a power weight",
    "comm apply": "Commutator [b, R_j] applied to a test function",
    "comm weak11": "Weak (1,1) behaviour of [b, R_j] on approximate identities",
    "comm llogl": "L log L distribution inequality for [b, R_j]",
    "comm h1b": "Atomic criterion for H^1 to L^1 boundedness of [b, R_j]",
    "comm lb": "Necessity criterion for L^1 to weak L^1 boundedness of [b, R_j]",
    "suite acceptance": "Acceptance battery",
}


@dataclass
class CommandResult:
    """What a handler produced: report payload, optional tables and side files."""
    payload: Dict[str, Any]
    calibration_id: Optional[str] = None
    tables: Dict[str, Tuple[List[str], List[List[Any]]]] = field(default_factory=dict)
    exit_code: int = 0


# Argument helpers ------------------------------------------------------------------

def _floats(text: str) -> List[float]:
    try:
        return [float(v) for v in text.replace(";", ",").split(",") if v.strip()]
    except ValueError as e:
        raise ValueError(f"Cannot parse number list '{text}'") from e


def _point(text: str, cfg: ExperimentConfig) -> np.ndarray:
    coords = np.array(_floats(text))
    dim = cfg.grid.dim
    if coords.size != dim:
        raise ValueError(f"Point '{text}' has {coords.size} coordinates, {cfg.mode.value} n={cfg.n} needs {dim}")
    return coords


def _coordinate_columns(cfg: ExperimentConfig) -> List[str]:
    xs = [f"x{i + 1}" for i in range(cfg.n)]
    if cfg.mode == GroupMode.ABELIAN:
        return xs
    return xs + [f"y{i + 1}" for i in range(cfg.n)] + ["t"]


def _csv_rows(path: Path, cfg: ExperimentConfig) -> List[List[float]]:
    columns = _coordinate_columns(cfg)
    rows = []
    for record in read_csv(path):
        if all(c in record for c in columns):
            values = [record[c] for c in columns]
        else:
            values = [v for k, v in record.items() if k is not None and v not in (None, "")]
            values += record.get(None) or []
        rows.append(values)
    return rows


def _load_points(args: argparse.Namespace, cfg: ExperimentConfig) -> np.ndarray:
    """Points from --points (JSON list of rows or CSV) followed by every --point flag.

    A CSV whose header names the coordinates (x1, y1, t, ...) contributes only those
    columns, so a kernel_eval.csv can be fed back. Any other row must have exactly as
    many entries as the group has coordinates.
    """
    dim = cfg.grid.dim
    rows: List[List[float]] = []
    if args.points:
        path = Path(args.points)
        raw = read_json(path) if path.suffix == ".json" else _csv_rows(path, cfg)
        for i, r in enumerate(raw):
            if not isinstance(r, (list, tuple)) or len(r) != dim:
                width = len(r) if isinstance(r, (list, tuple)) else 1
                raise ValueError(
                    f"Row {i} of {path.name} has {width} entries, {cfg.mode.value} n={cfg.n} needs {dim}"
                )
            try:
                rows.append([float(v) for v in r])
            except (TypeError, ValueError) as e:
                raise ValueError(f"Row {i} of {path.name} is not numeric: {r}") from e
    rows += [list(_point(p, cfg)) for p in (args.point or [])]
    return np.array(rows, dtype=float).reshape(-1, dim)


def _load_calibration(args: argparse.Namespace) -> Optional[Calibration]:
    path = getattr(args, "calibration", None)
    return Calibration.model_validate(read_json(path)) if path else None


def _kernel(args: argparse.Namespace, cfg: ExperimentConfig) -> BaseKernel:
    return build_kernel(cfg.mode.value, cfg.n, cfg.vector_field(), _load_calibration(args), cfg.quadrature)


def _sector_spec(args: argparse.Namespace, cfg: ExperimentConfig, kernel: BaseKernel) -> SectorSpec:
    if getattr(args, "spec", None):
        spec = load_sector_spec(args.spec)
        if spec.j != kernel.j.label or spec.n != cfg.n:
            raise ValueError(f"Sector spec is for {spec.j} on n={spec.n}, the run uses {kernel.j.label} on n={cfg.n}")
        return spec
    quasi = quasi_triangle_constant(GroupMode.HEISENBERG.value, cfg.n, settings.quasi_triangle_samples, cfg.seed)
    return find_direction_point(kernel, sphere_grid=args.sphere_grid, seed=cfg.seed, quasi_constant=quasi)


def _workers(args: argparse.Namespace) -> int:
    return args.threads or settings.threads


def _symbol(args: argparse.Namespace, cfg: ExperimentConfig) -> SampledFunction:
    if getattr(args, "function", None):
        b = SampledFunction.load(args.function)
        if b.grid != cfg.grid:
            raise ValueError("Loaded function lives on another grid than the configured one")
        return b
    return symbol_function(cfg.grid, args.symbol)


def _ball(args: argparse.Namespace, cfg: ExperimentConfig) -> Ball:
    center = _point(args.center, cfg) if args.center else np.zeros(cfg.grid.dim)
    return Ball(center, args.radius)


def _input_function(args: argparse.Namespace, cfg: ExperimentConfig, ball: Ball) -> SampledFunction:
    if args.input == "atom":
        return make_atom(cfg.grid, ball, "two-block").function
    if args.input == "radial-atom":
        return make_atom(cfg.grid, ball, "radial").function
    if args.input == "indicator":
        return SampledFunction(cfg.grid, cfg.grid.ball_mask(ball.center, ball.radius).astype(float))
    raise ValueError(f"Unknown input: {args.input}. Supported: atom, radial-atom, indicator")


def _pv_cut(args: argparse.Namespace, cfg: ExperimentConfig) -> float:
    return args.pv_cut if args.pv_cut is not None else 2.0 * cfg.grid.koranyi_resolution


def _require_heisenberg(cfg: ExperimentConfig, what: str) -> None:
    if cfg.mode != GroupMode.HEISENBERG:
        raise ValueError(f"{what} is only defined on the Heisenberg group")


# Handlers ------------------------------------------------------------------------

def kernel_eval(args: argparse.Namespace, cfg: ExperimentConfig) -> CommandResult:
    kernel = _kernel(args, cfg)
    points = _load_points(args, cfg)
    if args.path == "formula":
        _require_heisenberg(cfg, "The formula path")
        n = cfg.n
        header = [f"x{i + 1}" for i in range(n)] + [f"y{i + 1}" for i in range(n)]
        header += ["t", "phi", "raw_real", "raw_imag", "calibrated"]
        calibration = getattr(kernel, "calibration", None)
        rows = []
        for p in points:
            g = GroupPoint(p, n=n)
            value = riesz_formula_eval(kernel.j, g, cfg.quadrature, calibration)
            rows.append(list(p) + [phase_of(g).phi, value.raw_real, value.raw_imag, value.calibrated])
    else:
        header, rows = kernel.export_rows(points)
    return CommandResult(
        payload={"points": len(rows), "path": args.path, "table": "kernel_eval.csv"},
        calibration_id=kernel.calibration_id,
        tables={"kernel_eval.csv": (header, rows)},
    )


def kernel_calibrate(args: argparse.Namespace, cfg: ExperimentConfig) -> CommandResult:
    _require_heisenberg(cfg, "Calibration")
    j = cfg.vector_field()
    sample = default_calibration_sample(cfg.n, count=args.count, seed=cfg.seed + 7)
    calibration = calibrate_constant(
        j, sample, cfg.quadrature, gate=settings.calibration_residual_gate, workers=_workers(args)
    )
    path = write_json(Path(cfg.output_dir) / f"calibration_{j.label}_n{cfg.n}.json", calibration.model_dump(mode="json"))
    return CommandResult(
        payload={
            "calibration": calibration.model_dump(mode="json"),
            "analytic_constant": analytic_constant(cfg.n),
            "file": path.name,
        },
        calibration_id=calibration.calibration_id,
    )


def kernel_zero_scan(args: argparse.Namespace, cfg: ExperimentConfig) -> CommandResult:
    _require_heisenberg(cfg, "The zero scan")
    scan = zero_scan(cfg.n, args.grid, cfg.quadrature)
    report = nonvanishing_report(cfg.vector_field(), args.sphere_grid, cfg.quadrature, args.threshold, scan.zeros)
    return CommandResult(payload={"zero_scan": scan.model_dump(mode="json"), "nonvanishing": report.model_dump(mode="json")})


def kernel_cross_check(args: argparse.Namespace, cfg: ExperimentConfig) -> CommandResult:
    _require_heisenberg(cfg, "The two-path cross-check")
    kernel = _kernel(args, cfg)
    j = kernel.j
    sample = default_calibration_sample(cfg.n, count=args.count, seed=cfg.seed + 1000)
    n = cfg.n
    header = [f"x{i + 1}" for i in range(n)] + [f"y{i + 1}" for i in range(n)] + ["t", "formula", "subordination", "rel_diff"]
    rows = []
    for g in sample:
        formula = float(kernel.values(g.coords[None, :])[0])
        sub = riesz_subordination_eval(j, g, cfg.quadrature)
        rows.append(list(g.coords) + [formula, sub, abs(formula - sub) / abs(sub)])
    worst = max((r[-1] for r in rows), default=0.0)
    return CommandResult(
        payload={"points": len(rows), "max_rel_diff": worst, "table": "kernel_cross_check.csv"},
        calibration_id=kernel.calibration_id,
        tables={"kernel_cross_check.csv": (header, rows)},
    )


def heat_eval_command(args: argparse.Namespace, cfg: ExperimentConfig) -> CommandResult:
    points = _load_points(args, cfg)
    header = [f"c{i + 1}" for i in range(cfg.grid.dim)] + ["h", "value", "error", "tail_bound", "reliable"]
    rows = []
    for p in points:
        value = heat_eval(GroupPoint(p, n=cfg.n, mode=cfg.mode), args.h, cfg.quadrature)
        rows.append(list(p) + [args.h, value.value, value.error, value.tail_bound, value.reliable])
    return CommandResult(payload={"points": len(rows), "h": args.h, "table": "heat_eval.csv"}, tables={"heat_eval.csv": (header, rows)})


def heat_verify(args: argparse.Namespace, cfg: ExperimentConfig) -> CommandResult:
    from app.acceptance import AcceptanceBattery

    _require_heisenberg(cfg, "Heat verification")
    passed, message, details = AcceptanceBattery(cfg, quick=args.quick).check_heat_scaling()
    return CommandResult(payload={"passed": passed, "message": message, **details}, exit_code=0 if passed else 1)


def sector_build(args: argparse.Namespace, cfg: ExperimentConfig) -> CommandResult:
    _require_heisenberg(cfg, "Sectors")
    kernel = _kernel(args, cfg)
    spec = _sector_spec(args, cfg, kernel)
    path = export_sector_spec(spec, Path(cfg.output_dir) / f"sector_{spec.j}_n{spec.n}.json")
    return CommandResult(payload={"spec": spec.model_dump(mode="json"), "file": path.name}, calibration_id=kernel.calibration_id)


def sector_verify(args: argparse.Namespace, cfg: ExperimentConfig) -> CommandResult:
    _require_heisenberg(cfg, "Sectors")
    kernel = _kernel(args, cfg)
    spec = _sector_spec(args, cfg, kernel)
    region = scaled_sector(spec, GroupPoint.identity(cfg.n), args.scale)
    report = lower_bound_verify(kernel, region, args.pairs, cfg.seed, strict=args.strict)
    return CommandResult(
        payload={"spec": spec.model_dump(mode="json"), "lower_bound": report.model_dump(mode="json")},
        calibration_id=kernel.calibration_id,
    )


def sector_volume(args: argparse.Namespace, cfg: ExperimentConfig) -> CommandResult:
    _require_heisenberg(cfg, "Sectors")
    kernel = _kernel(args, cfg)
    spec = _sector_spec(args, cfg, kernel)
    region = scaled_sector(spec, GroupPoint.identity(cfg.n))
    radii = _floats(args.radii) if args.radii else [spec.r_o * f for f in (3.0, 10.0, 30.0, 100.0)]
    report = volume_regularity(region, radii, args.samples, cfg.seed)
    rows = [[r.radius, r.ratio, r.std_error, r.hits] for r in report.rows]
    return CommandResult(
        payload={"spec": spec.model_dump(mode="json"), "volume": report.model_dump(mode="json")},
        calibration_id=kernel.calibration_id,
        tables={"sector_volume.csv": (["radius", "ratio", "std_error", "hits"], rows)},
    )


def bmo_norm_command(args: argparse.Namespace, cfg: ExperimentConfig) -> CommandResult:
    b = _symbol(args, cfg)
    family = BallFamily(cfg.grid, stride=args.stride)
    if args.weight_exponent is not None:
        result = bmo_norm_weighted(b, Weight.power(cfg.grid, args.weight_exponent), family)
    else:
        result = bmo_norm(b, family)
    return CommandResult(payload={"symbol": args.symbol, "norm": result.model_dump(mode="json")})


def bmo_median(args: argparse.Namespace, cfg: ExperimentConfig) -> CommandResult:
    b = _symbol(args, cfg)
    ball = _ball(args, cfg)
    return CommandResult(payload={"symbol": args.symbol, "ball": ball.describe(), "median": median(b, ball)})


def bmo_wlambda(args: argparse.Namespace, cfg: ExperimentConfig) -> CommandResult:
    b = _symbol(args, cfg)
    system = build_dyadic_system(cfg.grid, max_dyadic_depth(cfg.grid) if args.depth is None else args.depth)
    result = oscillation_norm_proxy(b, system, args.lam)
    return CommandResult(payload={
        "symbol": args.symbol,
        "proxy": result.model_dump(mode="json"),
        "constants": system.constants,
        "level_constants": system.level_constants,
    })


def bmo_ef_sets(args: argparse.Namespace, cfg: ExperimentConfig) -> CommandResult:
    _require_heisenberg(cfg, "E x F sets")
    kernel = _kernel(args, cfg)
    b = _symbol(args, cfg)
    spec = _sector_spec(args, cfg, kernel)
    system = build_dyadic_system(cfg.grid, max_dyadic_depth(cfg.grid) if args.depth is None else args.depth)
    if not 0 <= args.level <= system.depth:
        raise ValueError(f"Level must be in 0..{system.depth}, got {args.level}")
    cubes = system.cubes(args.level)
    if not 0 <= args.cube < len(cubes):
        raise ValueError(f"Cube index must be in 0..{len(cubes) - 1}, got {args.cube}")
    cert = ef_sets(kernel, b, cubes[args.cube], spec, args.k0, args.samples, cfg.seed)
    return CommandResult(payload={"symbol": args.symbol, "report": cert.report.model_dump(mode="json")}, calibration_id=kernel.calibration_id)


def bmo_ap_constant(args: argparse.Namespace, cfg: ExperimentConfig) -> CommandResult:
    weight = Weight.power(cfg.grid, args.exponent)
    family = BallFamily(cfg.grid, stride=args.stride)
    value = ap_constant(weight, args.p, family)
    return CommandResult(payload={"exponent": args.exponent, "p": args.p, "ap_constant": value, "family": family.describe()})


def comm_apply(args: argparse.Namespace, cfg: ExperimentConfig) -> CommandResult:
    kernel = _kernel(args, cfg)
    b = _symbol(args, cfg)
    ball = _ball(args, cfg)
    f = _input_function(args, cfg, ball)
    u = commutator_apply(kernel, b, f, _pv_cut(args, cfg), _workers(args))
    bin_path, _ = u.save(Path(cfg.output_dir) / "commutator")
    annuli = far_field_annuli(u, ball.center, ball.radius)
    return CommandResult(
        payload={
            "symbol": args.symbol,
            "input": args.input,
            "ball": ball.describe(),
            "l2_norm": u.lp_norm(2.0),
            "sup": float(np.max(np.abs(u.flat))),
            "annuli": annuli,
            "function": bin_path.name,
        },
        calibration_id=kernel.calibration_id,
        tables={"commutator_annuli.csv": (["level", "inner", "outer", "cells", "sum"], [list(r.values()) for r in annuli])},
    )


def comm_weak11(args: argparse.Namespace, cfg: ExperimentConfig) -> CommandResult:
    kernel = _kernel(args, cfg)
    b = _symbol(args, cfg)
    grid = cfg.grid
    center = _point(args.center, cfg) if args.center else np.zeros(grid.dim)
    g_prime = grid.centers()[grid.nearest_cells(center[None, :])[0]]
    target = _point(args.target, cfg) if args.target else None
    eps = _floats(args.eps) if args.eps else [4.0 * grid.koranyi_resolution, 2.0 * grid.koranyi_resolution, grid.koranyi_resolution]
    report = weak11_experiment(kernel, b, g_prime, eps, target=target, samples=args.samples, seed=cfg.seed)
    return CommandResult(payload={"symbol": args.symbol, "report": report.model_dump(mode="json")}, calibration_id=kernel.calibration_id)


def comm_llogl(args: argparse.Namespace, cfg: ExperimentConfig) -> CommandResult:
    kernel = _kernel(args, cfg)
    b = _symbol(args, cfg)
    ball = _ball(args, cfg)
    f = _input_function(args, cfg, ball)
    thresholds = _floats(args.thresholds) if args.thresholds else list(np.logspace(-1.0, 1.0, 6))
    pv = _pv_cut(args, cfg)
    u = commutator_apply(kernel, b, f, pv, _workers(args))
    distribution = weak_l1_report(u, thresholds, f)
    fit = fit_theta(kernel, b, [f], pv, thresholds, _workers(args))
    rows = [[r.threshold, r.measure, r.llogl] for r in distribution.rows]
    return CommandResult(
        payload={"symbol": args.symbol, "distribution": distribution.model_dump(mode="json"), "theta": fit.model_dump(mode="json")},
        calibration_id=kernel.calibration_id,
        tables={"comm_llogl.csv": (["threshold", "measure", "llogl"], rows)},
    )


def comm_h1b(args: argparse.Namespace, cfg: ExperimentConfig) -> CommandResult:
    kernel = _kernel(args, cfg)
    b = _symbol(args, cfg)
    ball = _ball(args, cfg)
    atom = make_atom(cfg.grid, ball, args.pattern)
    g_tilde = _point(args.base, cfg) if args.base else atom.center
    radii = _floats(args.radii) if args.radii else [ball.radius * f for f in (16.0, 32.0, 64.0, 128.0)]
    report = h1b_growth(kernel, b, atom, g_tilde, radii, args.r_o, seed=cfg.seed)
    return CommandResult(payload={"symbol": args.symbol, "growth": report.model_dump(mode="json")}, calibration_id=kernel.calibration_id)


def comm_lb(args: argparse.Namespace, cfg: ExperimentConfig) -> CommandResult:
    _require_heisenberg(cfg, "The (lb) growth driver")
    kernel = _kernel(args, cfg)
    b = _symbol(args, cfg)
    ball = _ball(args, cfg)
    spec = _sector_spec(args, cfg, kernel)
    g_tilde = _point(args.base, cfg) if args.base else ball.center
    base = spec.r_o * ball.radius
    N_list = _floats(args.N) if args.N else [base * f for f in (4.0, 8.0, 16.0, 32.0)]
    report = lb_growth(kernel, b, ball, spec, g_tilde, N_list, args.samples, cfg.seed)
    return CommandResult(
        payload={"symbol": args.symbol, "spec": spec.model_dump(mode="json"), "growth": report.model_dump(mode="json")},
        calibration_id=kernel.calibration_id,
    )


def suite_acceptance(args: argparse.Namespace, cfg: ExperimentConfig) -> CommandResult:
    from app.acceptance import run_acceptance

    ledger = run_acceptance(cfg, quick=args.quick)
    return CommandResult(payload=ledger.summary(), exit_code=0 if ledger.all_passed else 1)


# Parser ------------------------------------------------------------------------------

def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="Experiment config JSON")
    parser.add_argument("--mode", choices=[m.value for m in GroupMode])
    parser.add_argument("--n", type=int)
    parser.add_argument("--j", help="Vector field label (X1, Y1, ...)")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--output-dir")
    parser.add_argument("--grid-cells", type=int, help="Cells per axis of a symmetric grid")
    parser.add_argument("--grid-half-width", type=float, default=1.0)
    parser.add_argument("--threads", type=int)
    parser.add_argument("--log-level", choices=["DEBUG", "INFO", "WARNING", "ERROR"])


def _analysis(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--symbol", choices=SYMBOLS, default="log")
    parser.add_argument("--function", help="Stem of a saved sampled function used instead of --symbol")


def _ball_args(parser: argparse.ArgumentParser, radius: float = 0.35) -> None:
    parser.add_argument("--center", help="Comma-separated ball centre")
    parser.add_argument("--radius", type=float, default=radius)


def _sector_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--spec", help="Sector spec JSON; built from the kernel when omitted")
    parser.add_argument("--sphere-grid", type=int, default=64)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="heisenberg", description=__doc__.splitlines()[0])
    groups = parser.add_subparsers(dest="group", required=True)

    def add(group_parsers, group: str, name: str, handler: Callable, help_text: str) -> argparse.ArgumentParser:
        sub = group_parsers.add_parser(name, help=help_text)
        _common(sub)
        sub.set_defaults(handler=handler, experiment=f"{group} {name}")
        return sub

    kernel = groups.add_parser("kernel", help="Riesz kernel evaluation and calibration").add_subparsers(dest="command", required=True)
    p = add(kernel, "kernel", "eval", kernel_eval, "Kernel values on a point list")
    p.add_argument("--points", help="CSV (coordinate columns) or JSON list of points")
    p.add_argument("--point", action="append", help="Comma-separated point; repeatable")
    p.add_argument("--path", choices=["table", "formula"], default="table")
    p.add_argument("--calibration", help="Calibration JSON")
    p = add(kernel, "kernel", "calibrate", kernel_calibrate, "Fit the kernel constant")
    p.add_argument("--count", type=int, default=8)
    p = add(kernel, "kernel", "zero-scan", kernel_zero_scan, "Zeros of the phase function")
    p.add_argument("--grid", type=int, default=256)
    p.add_argument("--sphere-grid", type=int, default=64)
    p.add_argument("--threshold", type=float, default=1e-6)
    p = add(kernel, "kernel", "cross-check", kernel_cross_check, "Formula vs subordination table")
    p.add_argument("--count", type=int, default=20)
    p.add_argument("--calibration", help="Calibration JSON")

    heat = groups.add_parser("heat", help="Heat kernel").add_subparsers(dest="command", required=True)
    p = add(heat, "heat", "eval", heat_eval_command, "Heat kernel values on a point list")
    p.add_argument("--points")
    p.add_argument("--point", action="append")
    p.add_argument("--h", type=float, default=1.0)
    p = add(heat, "heat", "verify", heat_verify, "Scaling and normalisation suite")
    p.add_argument("--quick", action="store_true")

    sector = groups.add_parser("sector", help="Twisted truncated sectors").add_subparsers(dest="command", required=True)
    p = add(sector, "sector", "build", sector_build, "Find a direction point and aperture")
    _sector_args(p)
    p.add_argument("--calibration")
    p = add(sector, "sector", "verify-lower-bound", sector_verify, "Sampled kernel lower bound")
    _sector_args(p)
    p.add_argument("--calibration")
    p.add_argument("--pairs", type=int, default=10_000)
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--strict", action="store_true")
    p = add(sector, "sector", "volume", sector_volume, "Volume ratios in large balls")
    _sector_args(p)
    p.add_argument("--calibration")
    p.add_argument("--radii")
    p.add_argument("--samples", type=int, default=200_000)

    bmo = groups.add_parser("bmo", help="Oscillation functionals").add_subparsers(dest="command", required=True)
    p = add(bmo, "bmo", "norm", bmo_norm_command, "BMO norm over a ball family")
    _analysis(p)
    p.add_argument("--stride", type=int, default=4)
    p.add_argument("--weight-exponent", type=float)
    p = add(bmo, "bmo", "median", bmo_median, "Median on a ball")
    _analysis(p)
    _ball_args(p)
    p = add(bmo, "bmo", "wlambda", bmo_wlambda, "Local mean oscillation over dyadic cubes")
    _analysis(p)
    p.add_argument("--lam", type=float)
    p.add_argument("--depth", type=int, help="Dyadic depth (default: the deepest the grid splits)")
    p = add(bmo, "bmo", "ef-sets", bmo_ef_sets, "E x F certificate on a dyadic cube")
    _analysis(p)
    _sector_args(p)
    p.add_argument("--calibration")
    p.add_argument("--depth", type=int, help="Dyadic depth (default: the deepest the grid splits)")
    p.add_argument("--level", type=int, default=1)
    p.add_argument("--cube", type=int, default=0)
    p.add_argument("--k0", type=float)
    p.add_argument("--samples", type=int, default=20_000)
    p = add(bmo, "bmo", "ap-constant", bmo_ap_constant, "A_p constant of |g|^a")
    p.add_argument("--exponent", type=float, default=0.0)
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--stride", type=int, default=4)

    comm = groups.add_parser("comm", help="Commutator experiments").add_subparsers(dest="command", required=True)
    for name, handler, help_text in (
        ("apply", comm_apply, "Apply [b, R_j] to a test function"),
        ("llogl", comm_llogl, "Distribution function against L log L"),
    ):
        p = add(comm, "comm", name, handler, help_text)
        _analysis(p)
        _ball_args(p)
        p.add_argument("--calibration")
        p.add_argument("--input", choices=["atom", "radial-atom", "indicator"], default="atom")
        p.add_argument("--pv-cut", type=float)
        if name == "llogl":
            p.add_argument("--thresholds")
    p = add(comm, "comm", "weak11", comm_weak11, "Approximate-identity experiment")
    _analysis(p)
    p.add_argument("--calibration")
    p.add_argument("--center", help="Point g' (snapped to the nearest cell centre)")
    p.add_argument("--target")
    p.add_argument("--eps")
    p.add_argument("--samples", type=int, default=4096)
    p = add(comm, "comm", "h1b", comm_h1b, "Atomic criterion growth")
    _analysis(p)
    _ball_args(p)
    p.add_argument("--calibration")
    p.add_argument("--pattern", choices=["two-block", "radial"], default="two-block")
    p.add_argument("--base")
    p.add_argument("--radii")
    p.add_argument("--r-o", type=float, default=2.0)
    p = add(comm, "comm", "lb", comm_lb, "Necessity criterion growth")
    _analysis(p)
    _ball_args(p, radius=0.1)
    _sector_args(p)
    p.add_argument("--calibration")
    p.add_argument("--base")
    p.add_argument("--N")
    p.add_argument("--samples", type=int, default=2000)

    suite = groups.add_parser("suite", help="Batteries").add_subparsers(dest="command", required=True)
    p = add(suite, "suite", "acceptance", suite_acceptance, "Run the acceptance battery")
    p.add_argument("--quick", action="store_true")

    config = groups.add_parser("config", help="Configuration").add_subparsers(dest="command", required=True)
    p = add(config, "config", "show", None, "Print the merged configuration")
    return parser


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    """Flags over config file over settings defaults."""
    base = ExperimentConfig.load(args.config) if args.config else ExperimentConfig.from_settings(settings)
    overrides: Dict[str, Any] = {
        "mode": args.mode,
        "n": args.n,
        "j": args.j,
        "seed": args.seed,
        "output_dir": args.output_dir,
    }
    if args.grid_cells is not None:
        from src.analysis.sampled import GridSpec

        mode = args.mode or base.mode
        n = args.n or base.n
        overrides["grid"] = GridSpec.cube(mode, n, args.grid_half_width, args.grid_cells).model_dump(mode="json")
    return base.merged(overrides)


def _write_outputs(args: argparse.Namespace, cfg: ExperimentConfig, result: CommandResult) -> List[Path]:
    out = Path(cfg.output_dir)
    paths = [write_csv(out / name, header, rows) for name, (header, rows) in result.tables.items()]
    report = ExperimentReport(
        experiment=args.experiment,
        paper_ref=COMMAND_OBJECTS[args.experiment],
        config_hash=cfg.config_hash,
        calibration_id=result.calibration_id,
        seed=cfg.seed,
        payload={"config": cfg.model_dump(mode="json", exclude={"output_dir"}), **result.payload},
    )
    paths.append(write_json(out / f"{args.experiment.replace(' ', '_').replace('-', '_')}.json", report))
    return paths


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    logging.basicConfig(
        level=args.log_level or settings.log_level,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        stream=sys.stderr,
    )
    try:
        cfg = resolve_config(args)
        if args.handler is None:
            print(canonical_json({
                "config": cfg.model_dump(mode="json"),
                "config_hash": cfg.config_hash,
                "settings": settings.model_dump(mode="json"),
            }))
            return 0
        result = args.handler(args, cfg)
        for path in _write_outputs(args, cfg, result):
            print(path)
        return result.exit_code
    except HarmonicAnalysisError as e:
        logger.error(f"{args.experiment} failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
