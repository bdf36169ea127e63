"""Acceptance battery: property checks of every layer at desk scale.

Each check returns ``(passed, message, details)`` and is run through a
:class:`~src.utils.run_status.CheckLedger`. ``quick`` shrinks sample counts
so the battery fits in a test run; the full sizes are the documented ones.
"""

import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, List, Tuple

import numpy as np

from app.config import ExperimentConfig, settings
from src.analysis.commutator_lab import (
    commutator_apply,
    fit_theta,
    h1b_growth,
    hilbert_fft_oracle,
    lb_growth,
    make_atom,
    riesz_apply,
    weak11_experiment,
)
from src.analysis.dyadic import build_dyadic_system, max_dyadic_depth
from src.analysis.oscillation_bmo import (
    bmo_norm,
    ef_sets,
    local_mean_oscillation,
    median,
    oscillation_norm_proxy,
)
from src.analysis.sampled import Ball, BallFamily, GridSpec, SampledFunction, symbol_function
from src.analysis.sector import find_direction_point, lower_bound_verify, scaled_sector, volume_regularity
from src.core.group_factory import GroupFactory
from src.core.models import SectorSpec
from src.core.points import GroupMode, GroupPoint, VectorFieldId
from src.groups.sphere import KoranyiSphereGrid
from src.kernels.heat_kernel import heat_eval
from src.kernels.kernel_table import AbelianKernel, CalibratedKernel
from src.kernels.riesz_kernel import (
    abelian_riesz_closed_form,
    calibrate_constant,
    contour_A,
    contour_B,
    contour_oracle,
    default_calibration_sample,
    nonvanishing_report,
    riesz_formula_eval,
    riesz_subordination_eval,
    zero_scan,
)
from src.utils.quadrature import gauss_legendre_panels
from src.utils.run_status import CheckLedger

logger = logging.getLogger(__name__)

CheckOutcome = Tuple[bool, str, Dict[str, Any]]


@dataclass(frozen=True)
class AcceptanceScale:
    """Sample sizes of one battery run."""
    group_instances: int
    heat_pairs: int
    formula_points: int
    subordination_points: int
    held_out: int
    pair_count: int
    volume_samples: int
    median_regions: int
    ef_cubes: int
    grid_cells: int
    dyadic_cells: int


FULL = AcceptanceScale(1000, 1000, 200, 10, 200, 10_000, 200_000, 1000, 20, 16, 64)
QUICK = AcceptanceScale(1000, 20, 20, 3, 12, 2000, 20_000, 100, 4, 12, 16)


def _rel(a: np.ndarray, b: np.ndarray) -> float:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b) / np.maximum(np.abs(b), 1e-300)))


def _scaled(a: np.ndarray, b: np.ndarray) -> float:
    """Largest |a - b| in units of max |b|; kernels vanish on parts of every sample."""
    a, b = np.asarray(a), np.asarray(b)
    return float(np.max(np.abs(a - b)) / np.max(np.abs(b)))


class AcceptanceBattery:
    """The acceptance checks for one experiment config.

    Expensive shared objects (calibration, sector spec) are built once and
    reused by the later checks.
    """

    def __init__(self, config: ExperimentConfig, quick: bool = False):
        self.config = config
        self.scale = QUICK if quick else FULL
        self.cfg = config.quadrature
        self.seed = config.seed
        self.n = config.n
        self.j = VectorFieldId.parse(config.j if config.mode == GroupMode.HEISENBERG else "X1", config.n)
        self.group = GroupFactory.create_group(GroupMode.HEISENBERG.value, config.n)
        self._kernel = None
        self._spec = None

    @property
    def kernel(self) -> CalibratedKernel:
        if self._kernel is None:
            self._kernel = CalibratedKernel(self.n, self.j, cfg=self.cfg)
        return self._kernel

    @property
    def spec(self) -> SectorSpec:
        if self._spec is None:
            self._spec = find_direction_point(
                self.kernel, sphere_grid=64, seed=self.seed, quasi_constant=None,
            )
        return self._spec

    def check_group_axioms(self) -> CheckOutcome:
        rng = np.random.default_rng(self.seed)
        worst = 0.0
        for n in (1, 2):
            group = GroupFactory.create_group(GroupMode.HEISENBERG.value, n)
            a, b, c = (rng.standard_normal((self.scale.group_instances, group.dim)) for _ in range(3))
            lam = np.exp(rng.uniform(-2.0, 2.0, size=self.scale.group_instances))
            comp = group.compose_arrays
            errors = [
                np.max(np.abs(comp(comp(a, b), c) - comp(a, comp(b, c)))),
                np.max(np.abs(comp(a, group.inverse_arrays(a)))),
                np.max(np.abs(group.dilate_arrays(lam, comp(a, b))
                              - comp(group.dilate_arrays(lam, a), group.dilate_arrays(lam, b))) / (1.0 + lam[:, None] ** 2)),
                _rel(group.norm_arrays(group.dilate_arrays(lam, a)), lam * group.norm_arrays(a)),
                _rel(group.norm_arrays(group.inverse_arrays(a)), group.norm_arrays(a)),
            ]
            worst = max(worst, float(max(errors)))
        return worst < 1e-12, f"largest axiom defect {worst:.2e}", {"max_error": worst}

    def check_heat_scaling(self) -> CheckOutcome:
        rng = np.random.default_rng(self.seed + 1)
        group = self.group
        worst = 0.0
        for _ in range(self.scale.heat_pairs):
            g = GroupPoint(rng.uniform(-1.0, 1.0, size=group.dim), n=self.n)
            h = float(rng.uniform(0.3, 2.0))
            r = float(rng.uniform(0.5, 2.0))
            base = heat_eval(g, h, self.cfg).value
            scaled = heat_eval(group.dilate(r, g), r * r * h, self.cfg).value
            worst = max(worst, abs(scaled * r ** group.Q - base) / abs(base))

        sphere = KoranyiSphereGrid.build(group, 48, 1 if self.n == 1 else 64, seed=self.seed)
        rho, w = gauss_legendre_panels(0.0, 8.0, 8, order=16)
        pts = group.dilate_arrays(rho[None, :], sphere.points[:, None, :]).reshape(-1, group.dim)
        values = np.array([heat_eval(GroupPoint(p, n=self.n), 1.0, self.cfg).value for p in pts])
        radial = values.reshape(sphere.size, rho.size) @ (w * rho ** (group.Q - 1))
        total = float(np.sum(sphere.weights * radial))
        ok = worst < 1e-6 and abs(total - 1.0) < 0.02
        return ok, f"scaling defect {worst:.2e}, integral of p_1 = {total:.5f}", {
            "max_scaling_error": worst, "normalisation": total,
        }

    def check_riesz_homogeneity(self) -> CheckOutcome:
        rng = np.random.default_rng(self.seed + 2)
        group = self.group
        pts = rng.uniform(-1.0, 1.0, size=(self.scale.group_instances, group.dim))
        r = np.exp(rng.uniform(-1.5, 1.5, size=pts.shape[0]))
        table = _scaled(self.kernel.values(group.dilate_arrays(r, pts)) * r ** group.Q, self.kernel.values(pts))

        pairs = [(GroupPoint(p, n=self.n), float(s)) for p, s in zip(pts, r)]
        base = [riesz_formula_eval(self.j, g, self.cfg).raw for g, _ in pairs[: self.scale.formula_points]]
        moved = [riesz_formula_eval(self.j, group.dilate(s, g), self.cfg).raw * s ** group.Q
                 for g, s in pairs[: self.scale.formula_points]]
        formula = _scaled(moved, base)
        base = [riesz_subordination_eval(self.j, g, self.cfg) for g, _ in pairs[: self.scale.subordination_points]]
        moved = [riesz_subordination_eval(self.j, group.dilate(s, g), self.cfg) * s ** group.Q
                 for g, s in pairs[: self.scale.subordination_points]]
        sub = _scaled(moved, base)
        worst = max(table, formula, sub)
        return worst < 1e-5, f"homogeneity defect {worst:.2e}", {
            "table": table, "formula": formula, "subordination": sub,
        }

    def check_euclidean_oracle(self) -> CheckOutcome:
        rng = np.random.default_rng(self.seed + 3)
        worst = 0.0
        for n in (1, 2, 3):
            j = VectorFieldId(1, n, GroupMode.ABELIAN)
            for _ in range(5):
                x = rng.uniform(-1.5, 1.5, size=n)
                x[0] += 0.5 * np.sign(x[0] or 1.0)
                sub = riesz_subordination_eval(j, GroupPoint(x, n=n, mode=GroupMode.ABELIAN), self.cfg)
                exact = float(abelian_riesz_closed_form(j, x[None, :])[0])
                worst = max(worst, abs(sub - exact) / abs(exact))
        return worst < 1e-8, f"abelian subordination vs closed form {worst:.2e}", {"max_error": worst}

    def check_two_path(self) -> CheckOutcome:
        calibration = calibrate_constant(
            self.j, default_calibration_sample(self.n, seed=self.seed + 7), self.cfg,
            gate=settings.calibration_residual_gate, workers=settings.threads,
        )
        held = default_calibration_sample(self.n, count=self.scale.held_out, seed=self.seed + 1000)
        formula = np.array([calibration.constant * riesz_formula_eval(self.j, g, self.cfg).raw for g in held])
        sub = np.array([riesz_subordination_eval(self.j, g, self.cfg) for g in held])
        agreement = float(np.max(np.abs(formula.real - sub)) / np.max(np.abs(sub)))
        imaginary = float(np.max(np.abs(formula.imag) / np.maximum(np.abs(formula), 1e-300)))
        ok = agreement < 1e-3 and imaginary < 1e-6
        return ok, f"held-out agreement {agreement:.2e}, imaginary part {imaginary:.2e}", {
            "calibration_id": calibration.calibration_id,
            "constant": calibration.constant_real,
            "residual": calibration.residual,
            "agreement": agreement,
            "imaginary": imaginary,
        }

    def check_phase_anchors(self) -> CheckOutcome:
        b0 = abs(contour_B(self.n, 0j, self.cfg).value)
        a0 = contour_A(self.n, 0j, self.cfg).value.real
        oracle_gap = abs(a0 - contour_oracle("A", self.n).real) + abs(contour_oracle("B", self.n))
        coarse, fine = zero_scan(self.n, 64, self.cfg), zero_scan(self.n, 128, self.cfg)
        moved = (
            max((abs(a - b) for a, b in zip(coarse.zeros, fine.zeros)), default=0.0)
            if len(coarse.zeros) == len(fine.zeros) else math.inf
        )
        fractions = [nonvanishing_report(self.j, k, self.cfg, zeros=fine.zeros).near_zero_fraction for k in (32, 64, 128)]
        decreasing = all(b <= a for a, b in zip(fractions, fractions[1:]))
        ok = b0 < 1e-12 and a0 > 0 and oracle_gap < 1e-8 and moved < 1e-6 and decreasing
        return ok, f"B(0)={b0:.1e}, A(0)={a0:.6g}, oracle gap {oracle_gap:.1e}, zeros moved {moved:.1e}, fractions {fractions}", {
            "B0": b0, "A0": a0, "oracle_gap": oracle_gap, "zeros": fine.zeros, "zero_shift": moved, "near_zero_fractions": fractions,
        }

    def check_sector(self) -> CheckOutcome:
        spec = self.spec
        region = scaled_sector(spec, GroupPoint.identity(self.n))
        report = lower_bound_verify(self.kernel, region, self.scale.pair_count, self.seed)
        radii = [spec.r_o * f for f in (3.0, 10.0, 30.0, 100.0)]
        volume = volume_regularity(region, radii, self.scale.volume_samples, self.seed)
        bound_ok = (
            report.c_est_forward >= 0.4 * abs(spec.kernel_at_direction)
            and report.c_est_backward >= 0.4 * abs(spec.kernel_at_reflection)
        )
        ok = report.sign_constant and bound_ok and volume.band_ratio < 10.0
        return ok, f"C_est={report.c_est:.4g}, signs constant={report.sign_constant}, band {volume.band_ratio:.3f}", {
            "spec": spec.model_dump(mode="json"),
            "lower_bound": report.model_dump(mode="json"),
            "volume": volume.model_dump(mode="json"),
        }

    def check_dyadic_bmo(self) -> CheckOutcome:
        grid = GridSpec.cube(GroupMode.HEISENBERG, 1, 1.0, self.scale.dyadic_cells)
        depth = max_dyadic_depth(grid)
        system = build_dyadic_system(grid, depth)
        partition = nested = True
        for level, cubes in enumerate(system.levels):
            cover = np.zeros(grid.size, dtype=int)
            for cube in cubes:
                mask = cube.mask(grid)
                cover += mask
                parent = system.parent_of(cube)
                if parent is not None and np.any(mask & ~parent.mask(grid)):
                    nested = False
            partition = partition and bool(np.all(cover == 1))
        certified = all(system.certify(c) for cubes in system.levels for c in cubes)
        finer = build_dyadic_system(GridSpec.cube(GroupMode.HEISENBERG, 1, 1.0, 2 * self.scale.dyadic_cells), depth)
        stable = all(math.isclose(finer.constants[k], v, rel_tol=1e-9) for k, v in system.constants.items())

        b = symbol_function(grid, "log")
        rng = np.random.default_rng(self.seed + 8)
        median_ok = True
        for _ in range(self.scale.median_regions):
            mask = rng.uniform(size=grid.size) < rng.uniform(0.01, 0.5)
            if not np.any(mask):
                continue
            m = median(b, mask)
            vals = b.flat[mask]
            median_ok = median_ok and np.count_nonzero(vals <= m) >= 0.5 * vals.size and np.count_nonzero(vals >= m) >= 0.5 * vals.size
        cube = system.cubes(depth)[0]
        lams = [0.05, 0.1, 0.2, 0.4]
        ws = [local_mean_oscillation(b, cube.mask(grid), lam) for lam in lams]
        monotone = all(y <= x for x, y in zip(ws, ws[1:]))

        const = SampledFunction.constant(grid, 3.0)
        family = BallFamily(grid, stride=4)
        const_zero = (
            bmo_norm(const, family).value == 0.0
            and oscillation_norm_proxy(const, system).value == 0.0
        )

        centers = np.array([[0.0, 0.0, 0.0], [0.25, 0.0, 0.0], [0.0, 0.25, 0.0], [0.0, 0.0, 0.25]])
        refinements = []
        for cells in (32, 40, 48):
            fine = GridSpec.cube(GroupMode.HEISENBERG, 1, 1.0, cells)
            fine_family = BallFamily(fine, radii=[0.75, 1.0], centers=centers)
            refinements.append(bmo_norm(symbol_function(fine, "log"), fine_family).value)
        spread = (max(refinements) - min(refinements)) / max(refinements)

        # Boxes delta_R of the unit box: the BMO norm is dilation invariant, sup |b| is not.
        domains = []
        for half_width in (1.0, 4.0, 16.0, 64.0):
            box = GridSpec.cube(GroupMode.HEISENBERG, 1, half_width, 16)
            b_box = symbol_function(box, "log")
            box_family = BallFamily(box, stride=4, radii=[half_width * r for r in (0.3, 0.45, 0.7)])
            domains.append({
                "half_width": half_width,
                "bmo": bmo_norm(b_box, box_family).value,
                "sup_abs": float(np.max(np.abs(b_box.flat))),
                "sup": float(np.max(b_box.flat)),
            })
        norms = [d["bmo"] for d in domains]
        bounded = max(norms) - min(norms) <= 1e-6 * max(norms)
        diverging = all(
            b2["sup"] - b1["sup"] >= 0.99 * math.log(4.0) and b2["sup_abs"] > b1["sup_abs"]
            for b1, b2 in zip(domains, domains[1:])
        )

        ok = (
            partition and nested and certified and stable and median_ok and monotone and const_zero
            and spread < 0.05 and bounded and diverging
        )
        return ok, (
            f"depth {depth}: partition={partition}, certified={certified}, constants stable={stable}, "
            f"medians={median_ok}, BMO refinement spread {spread:.3f}, "
            f"sup |b| {domains[0]['sup_abs']:.3g} -> {domains[-1]['sup_abs']:.3g} at BMO {norms[0]:.4g}"
        ), {
            "depth": depth,
            "constants": system.constants,
            "level_constants": system.level_constants,
            "refined_constants": finer.constants,
            "w_lambda": dict(zip([str(x) for x in lams], ws)),
            "log_bmo": refinements,
            "growing_domains": domains,
        }

    def check_ef_sets(self) -> CheckOutcome:
        # H^n with n >= 2 has 2n + 1 axes; four cells each keep one full split affordable.
        cells = self.scale.dyadic_cells if self.n == 1 else 4
        grid = GridSpec.cube(GroupMode.HEISENBERG, self.n, 1.0, cells)
        depth = max_dyadic_depth(grid)
        system = build_dyadic_system(grid, depth)
        b = symbol_function(grid, "log")
        rng = np.random.default_rng(self.seed + 9)
        cubes = [c for level in range(max(1, depth - 1), depth + 1) for c in system.cubes(level)]
        picks = rng.choice(len(cubes), size=min(self.scale.ef_cubes, len(cubes)), replace=False)
        reports = []
        for k, idx in enumerate(sorted(picks)):
            reports.append(ef_sets(self.kernel, b, cubes[idx], self.spec, samples=5000, seed=self.seed + k).report)
        holds = bool(reports) and all(r.properties_hold for r in reports)
        return holds, f"{sum(r.properties_hold for r in reports)}/{len(reports)} cubes certified on H^{self.n}", {
            "grid": list(grid.shape),
            "depth": depth,
            "product_constants": [r.product_constant for r in reports],
        }

    def check_commutator(self) -> CheckOutcome:
        details: Dict[str, Any] = {}
        cells = self.scale.grid_cells
        grid = GridSpec.cube(GroupMode.HEISENBERG, 1, 1.0, cells)
        kernel = CalibratedKernel(1, VectorFieldId(1, 1), cfg=self.cfg)
        pv = 2.0 * grid.koranyi_resolution
        atom = make_atom(grid, Ball(np.array([0.3, 0.0, 0.0]), 0.35))
        constant = SampledFunction.constant(grid, 2.5)
        vanish = float(np.max(np.abs(commutator_apply(kernel, constant, atom.function, pv).flat)))
        details["constant_commutator"] = vanish

        line = GridSpec(mode=GroupMode.ABELIAN, n=1, lower=(-10.0,), upper=(10.0,), shape=(4096,))
        bump = SampledFunction.from_callable(line, lambda p: np.exp(-p[:, 0] ** 2))
        ours = riesz_apply(AbelianKernel(1, VectorFieldId(1, 1, GroupMode.ABELIAN)), bump, 4.0 * line.spacing[0]).flat
        oracle = hilbert_fft_oracle(bump).flat
        hilbert = float(np.linalg.norm(ours - oracle) / np.linalg.norm(oracle))
        details["hilbert_l2"] = hilbert

        b = symbol_function(grid, "log")
        thresholds = list(np.logspace(-1.0, 1.0, 6))
        centers = [np.array([0.3, 0.0, 0.0]), np.array([-0.3, 0.2, 0.0]), np.array([0.0, -0.3, 0.0])]
        families = {
            "indicators": [SampledFunction(grid, grid.ball_mask(c, 0.35).astype(float)) for c in centers],
            "atoms": [make_atom(grid, Ball(c, 0.35), "radial").function for c in centers],
            "bumps": [
                SampledFunction.from_callable(grid, lambda p, c=c: np.exp(-8.0 * grid.group.distance_arrays(p, c[None, :]) ** 2)
                                              * (grid.group.distance_arrays(p, c[None, :]) < 0.4))
                for c in centers
            ],
        }
        thetas = {name: fit_theta(kernel, b, fam, pv, thresholds, settings.threads).theta_lsq for name, fam in families.items()}
        mean_theta = float(np.mean(list(thetas.values())))
        theta_ok = mean_theta > 0 and all(abs(t - mean_theta) <= 0.25 * mean_theta for t in thetas.values())
        details["theta"] = thetas

        g_tilde = atom.center
        radii = [atom.radius * f for f in (16.0, 32.0, 64.0, 128.0)]
        h1b_const = h1b_growth(kernel, constant, atom, g_tilde, radii, 2.0).values
        h1b = h1b_growth(kernel, b, atom, g_tilde, radii, 2.0)
        h1b_ok = max(h1b_const) == 0.0 and h1b.slope > 0 and h1b.r_squared > 0.99
        details["h1b"] = h1b.model_dump(mode="json")

        spec = self.spec if (self.n == 1 and self.j.label == "X1") else find_direction_point(kernel, seed=self.seed)
        small = Ball(np.array([0.3, 0.0, 0.0]), 0.1)
        base = spec.r_o * small.radius
        lb = lb_growth(kernel, b, small, spec, small.center, [base * f for f in (4.0, 8.0, 16.0, 32.0)], seed=self.seed)
        lb_ok = lb.slope > 0 and lb.r_squared > 0.99
        details["lb"] = lb.model_dump(mode="json")

        wide = GridSpec.cube(GroupMode.HEISENBERG, 1, 2.0, 32, t_cells=64)
        smooth = symbol_function(wide, "smooth")
        g_prime = wide.centers()[wide.nearest_cells(np.array([[0.0625, 0.0625, 0.0625]]))[0]]
        eps = [0.5, 0.25, 0.125]
        weak = weak11_experiment(kernel, smooth, g_prime, eps, target=np.array([1.9, 0.3, 0.1]), seed=self.seed)
        errs = np.maximum(np.asarray(weak.errors), 1e-300)
        order = float(np.polyfit(np.log(eps), np.log(errs), 1)[0])
        weak_ok = order >= 0.8
        details["weak11_order"] = order

        ok = vanish <= 1e-10 and hilbert < 0.02 and theta_ok and h1b_ok and lb_ok and weak_ok
        return ok, (
            f"[c,R]={vanish:.1e}, Hilbert {hilbert:.3%}, theta {thetas}, "
            f"h1b slope {h1b.slope:.3g}, lb slope {lb.slope:.3g}, weak order {order:.2f}"
        ), details

    def checks(self) -> List[Tuple[str, Any]]:
        return [
            ("group axioms", self.check_group_axioms),
            ("heat scaling and normalisation", self.check_heat_scaling),
            ("riesz homogeneity", self.check_riesz_homogeneity),
            ("euclidean oracle", self.check_euclidean_oracle),
            ("two-path consistency", self.check_two_path),
            ("phase anchors and zero scan", self.check_phase_anchors),
            ("sector certificate", self.check_sector),
            ("dyadic and BMO suite", self.check_dyadic_bmo),
            ("E x F certificate", self.check_ef_sets),
            ("commutator suite", self.check_commutator),
        ]

    def run(self) -> CheckLedger:
        ledger = CheckLedger()
        for name, check in self.checks():
            ledger.run(name, check)
        logger.info(f"Acceptance battery finished: {ledger.counts()}")
        return ledger


def run_acceptance(config: ExperimentConfig, quick: bool = False) -> CheckLedger:
    return AcceptanceBattery(config, quick).run()
