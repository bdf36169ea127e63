"""Core data models for the Heisenberg harmonic-analysis toolkit."""

import hashlib
import json
import math
from typing import Any, Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, computed_field, field_validator


class QuadratureConfig(BaseModel):
    """Settings shared by every one-dimensional integral in the toolkit.

    Attributes:
        truncation: Half-length Lambda of the lambda-integrals [-Lambda, Lambda]
        node_budget: Subinterval limit handed to the adaptive quadrature
        abs_tol: Absolute tolerance of each quadrature
        rel_tol: Relative tolerance of each quadrature
        guard_radius: |lambda| below which coth and sinh use Taylor values
        max_attempts: Attempts with a doubled node budget before giving up
        subordination_span: Half-width U (in log h) of the subordination integral
        table_nodes: Nodes of the phase tables used for bulk kernel evaluation
    """

    model_config = ConfigDict(
        frozen=True,
        json_schema_extra={
            "example": {
                "truncation": 40.0,
                "node_budget": 200,
                "abs_tol": 1e-13,
                "rel_tol": 1e-10,
            }
        },
    )

    truncation: float = Field(default=40.0, gt=0, description="Truncation length Lambda")
    node_budget: int = Field(default=200, ge=10, description="Adaptive subinterval limit")
    abs_tol: float = Field(default=1e-13, gt=0, description="Absolute tolerance")
    rel_tol: float = Field(default=1e-10, gt=0, description="Relative tolerance")
    guard_radius: float = Field(default=1e-6, gt=0, description="Removable-singularity guard")
    max_attempts: int = Field(default=3, ge=1, le=8, description="Escalation attempts")
    subordination_span: float = Field(default=30.0, gt=0, description="Half-width in log h")
    table_nodes: int = Field(default=257, ge=33, description="Phase-table nodes")


class GroupMetricInfo(BaseModel):
    """Metric data of a group instance.

    Attributes:
        n: Dimension parameter
        Q: Homogeneous dimension (2n+2 on H^n, n on R^n)
        quasi_triangle_constant: Empirical constant of the quasi-triangle inequality
    """

    model_config = ConfigDict(frozen=True)

    n: int = Field(..., ge=1)
    Q: int = Field(..., ge=1)
    quasi_triangle_constant: float = Field(..., ge=1.0)


class HeatValue(BaseModel):
    """A heat-kernel value with its quadrature diagnostics.

    Attributes:
        value: p_h(g)
        error: Quadrature error estimate plus truncation tail bound
        tail_bound: Analytic bound of the discarded |lambda| > Lambda tail
        imag_residual: Integral of the odd imaginary part, zero in exact arithmetic
        reliable: False when the error misses the tolerance or the value is not positive
    """

    value: float
    error: float = Field(..., ge=0)
    tail_bound: float = Field(default=0.0, ge=0)
    imag_residual: float = 0.0
    reliable: bool = True


class PhaseAngle(BaseModel):
    """The phase phi = arg(|z|^2 + i t) in [-pi/2, pi/2]."""

    model_config = ConfigDict(frozen=True)

    phi: float = Field(..., ge=-math.pi / 2 - 1e-15, le=math.pi / 2 + 1e-15)


class ContourValue(BaseModel):
    """Value of one of the contour integrals A_n(w), B_n(w).

    Attributes:
        real: Real part
        imag: Imaginary part
        error: Combined quadrature error estimate
        branch_continuous: True iff the square-root argument never turned by pi/2
            or more between adjacent monitoring nodes
    """

    real: float
    imag: float
    error: float = Field(default=0.0, ge=0)
    branch_continuous: bool = True

    @property
    def value(self) -> complex:
        return complex(self.real, self.imag)


class RieszKernelValue(BaseModel):
    """Formula-path kernel value.

    Attributes:
        j: Field label (X1, Y1, ...)
        raw_real: Real part of d_K^{-Q-1} F_j (or H_j)
        raw_imag: Imaginary part of the same
        calibrated: Re(c* raw) when a calibration was supplied
        calibration_id: Identifier of the calibration used
    """

    j: str
    raw_real: float
    raw_imag: float
    calibrated: Optional[float] = None
    calibration_id: Optional[str] = None

    @property
    def raw(self) -> complex:
        return complex(self.raw_real, self.raw_imag)


class Calibration(BaseModel):
    """Immutable record of the fitted kernel constant c*.

    Attributes:
        n: Group dimension
        j: Field label
        constant_real: Re c*
        constant_imag: Im c*
        residual: Relative least-squares residual of the fit
        sample_size: Number of fitting points
        method: "fitted" (least squares against subordination) or "analytic"
    """

    model_config = ConfigDict(frozen=True)

    n: int = Field(..., ge=1)
    j: str
    constant_real: float
    constant_imag: float = 0.0
    residual: float = Field(default=0.0, ge=0)
    sample_size: int = Field(default=0, ge=0)
    method: str = "fitted"

    @property
    def constant(self) -> complex:
        return complex(self.constant_real, self.constant_imag)

    @computed_field
    @property
    def calibration_id(self) -> str:
        payload = f"{self.n}|{self.j}|{self.constant_real!r}|{self.constant_imag!r}|{self.method}"
        return f"{self.method}-{self.j}-" + hashlib.sha256(payload.encode()).hexdigest()[:12]


class ZeroScanReport(BaseModel):
    """Zero set of phi -> A_n(i phi) on [-pi/2, pi/2]."""

    n: int
    grid: int
    zeros: List[float] = Field(default_factory=list)
    scan_max: float
    threshold: float
    branch_continuous: bool = True


class NonvanishingReport(BaseModel):
    """Near-zero statistics of the calibrated kernel on the unit Korányi sphere.

    Attributes:
        j: Field label
        grid: Cells per sphere axis
        threshold: Relative threshold for "near zero"
        near_zero_fraction: Fraction of cells meeting the zero set
        near_zero_cells: Cell centres (phi, theta) of the flagged cells
        locus_counts: Flagged cells per locus (phase_zero, coordinate_zero, twisted_curve, unexplained)
    """

    j: str
    grid: int
    threshold: float
    near_zero_fraction: float
    near_zero_cells: List[Tuple[float, float]] = Field(default_factory=list)
    locus_counts: Dict[str, int] = Field(default_factory=dict)
    zeros: List[float] = Field(default_factory=list)


class SectorSpec(BaseModel):
    """Constructive data of a twisted truncated sector.

    Attributes:
        j: Field label the sector is built for
        n: Group dimension
        direction: Coordinates of the direction point g~ (d_K(g~) = 1)
        epsilon: Aperture of the generating ball B(g~, epsilon)
        r_o: Inner radius 2^gamma > 1/epsilon
        alpha: Sampled min of d_K over B(g~, epsilon)
        beta: Sampled max of d_K over B(g~, epsilon)
        kernel_at_direction: K_j(g~^{-1})
        kernel_at_reflection: K_j(g~), which governs the reversed pair order
        direction_maximum: Sphere-grid max of |K_j(sigma^{-1})| alone, the one-sided
            optimum the two-sided choice of g~ is measured against
        ball_margin: min |K_j| / |K_j(g~^{-1})| over the 4 C epsilon ball sample
        quasi_constant: Quasi-triangle constant used for the safety ball
        calibration_id: Identifier of the kernel calibration
    """

    model_config = ConfigDict(frozen=True)

    j: str
    n: int = Field(..., ge=1)
    direction: Tuple[float, ...]
    epsilon: float = Field(..., gt=0, lt=1)
    r_o: float = Field(..., gt=0)
    alpha: float = Field(..., gt=0, le=1)
    beta: float = Field(..., ge=1)
    kernel_at_direction: float
    kernel_at_reflection: float = 0.0
    direction_maximum: float = Field(default=0.0, ge=0)
    ball_margin: float = Field(default=0.5, ge=0)
    quasi_constant: float = Field(default=1.0, ge=1.0)
    calibration_id: str = ""

    @field_validator("r_o")
    @classmethod
    def _inner_radius_exceeds_aperture(cls, v: float, info) -> float:
        eps = info.data.get("epsilon")
        if eps is not None and v * eps <= 1.0:
            raise ValueError(f"r_o must exceed 1/epsilon = {1.0 / eps}, got {v}")
        return v


class LowerBoundReport(BaseModel):
    """Sampled check of |K_j(g1,g2)| d_K(g1,g2)^Q >= C with constant sign."""

    pair_count: int
    c_est: float
    c_est_forward: float
    c_est_backward: float
    sign_forward: int
    sign_backward: int
    sign_constant: bool
    predicted: float = Field(..., description="Half of |K_j(g~^{-1})|")
    predicted_backward: float = Field(default=0.0, description="Half of |K_j(g~)|")


class VolumeRow(BaseModel):
    radius: float
    ratio: float
    std_error: float
    hits: int


class VolumeReport(BaseModel):
    """Monte-Carlo ratios |B(g,R) n G| / R^Q."""

    rows: List[VolumeRow]
    unit_ball_volume: float
    analytic_lower_band: float
    band_ratio: float


class NormResult(BaseModel):
    """A supremum over a ball family, with its family and maximiser."""

    value: float
    family: Dict[str, Any]
    argmax_center: Optional[Tuple[float, ...]] = None
    argmax_radius: Optional[float] = None
    balls_evaluated: int = 0


class EFReport(BaseModel):
    """Certificate of the E x F construction inside one dyadic cube.

    Attributes:
        w: Local mean oscillation w_lambda(b; S)
        median_far: Median of b over F_{k0}
        measure_S: |S|
        measure_E: |E|
        measure_F: |F|
        product_constant: |E||F| / (|S|^2 k0^Q), property (1)
        min_difference: min over E x F of |b(g)-b(g')|, property (2) needs >= w
        difference_sign: Common sign of b(g)-b(g') on E x F (0 if degenerate)
        kernel_sign: Common sign of K_j(g,g') on E x F (0 if mixed or degenerate)
        kernel_lower: min |K_j(g,g')| d_K(g,g')^Q over E x F, property (4)
        properties_hold: Properties (2)-(4) all verified at sample resolution
    """

    w: float
    median_far: float
    measure_S: float
    measure_E: float
    measure_F: float
    product_constant: float
    min_difference: float
    difference_sign: int
    kernel_sign: int
    kernel_lower: float
    properties_hold: bool
    k0: float


class DistributionRow(BaseModel):
    threshold: float
    measure: float
    llogl: Optional[float] = None


class DistributionReport(BaseModel):
    """Superlevel-set measures of a sampled function over a threshold ladder."""

    rows: List[DistributionRow]

    @property
    def measures(self) -> List[float]:
        return [r.measure for r in self.rows]


class ThetaFit(BaseModel):
    """Fitted constant of the L log L distribution inequality."""

    theta_lsq: float
    theta_sup: float
    residual: float
    points: int


class GrowthReport(BaseModel):
    """Values of a log-divergent functional along a radius ladder and its log fit."""

    radii: List[float]
    values: List[float]
    slope: float
    intercept: float
    r_squared: float
    second_factor: float = Field(..., description="The non-divergent factor of the product")


class Weak11Report(BaseModel):
    """Pointwise convergence of [b,R_j](f_eps) and the superlevel comparison."""

    epsilons: List[float]
    errors: List[float]
    target: Tuple[float, ...]
    limit_value: float
    thresholds: List[float]
    measures: List[float]
    weak_constant: float


class TwoWeightReport(BaseModel):
    """Both sides of the weighted commutator lower bound on one ball family.

    Attributes:
        p: Lebesgue exponent
        left: ||b||_{BMO_nu} with nu = (mu / lambda)^{1/p}
        right: Largest ||[b, R_j] chi_B||_{L^p(lambda)} / ||chi_B||_{L^p(mu)} over tested balls
        ratio: left / right
        balls_tested: Number of indicator test functions
    """

    p: float
    left: float
    right: float
    ratio: float
    balls_tested: int


class ExperimentReport(BaseModel):
    """Envelope written by every CLI command.

    Attributes:
        experiment: Command that produced the report
        paper_ref: The mathematical object the experiment realises
        config_hash: SHA-256 of the canonical experiment config
        calibration_id: Kernel calibration used, if any
        seed: Random seed
        payload: Experiment-specific data
    """

    experiment: str
    paper_ref: str
    config_hash: str
    calibration_id: Optional[str] = None
    seed: int
    payload: Dict[str, Any] = Field(default_factory=dict)

    def canonical_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, indent=2, ensure_ascii=False)
