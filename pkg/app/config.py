"""Application configuration management."""

from pathlib import Path
from typing import Any, Dict, Union

from pydantic import AliasChoices, BaseModel, ConfigDict, Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from src.analysis.sampled import GridSpec
from src.core.models import QuadratureConfig
from src.core.points import GroupMode, VectorFieldId
from src.utils.parallel import default_workers
from src.utils.report_io import canonical_json, content_hash


class Settings(BaseSettings):
    """Application settings loaded from environment variables.

    These settings are automatically loaded from the .env file or environment variables.

    Attributes:
        log_level: Logging level (DEBUG, INFO, WARNING, ERROR)
        threads: Worker threads for per-point evaluations (env HEISENBERG_THREADS)
        output_dir: Where CLI reports are written
        default_seed: Seed used when a command gets no --seed
        default_mode: Group mode used when a command gets no --mode
        default_n: Group dimension used when a command gets no --n
        quad_abs_tol: Absolute quadrature tolerance
        quad_rel_tol: Relative quadrature tolerance
        quad_limit: Adaptive subinterval limit
        quad_max_attempts: Escalation attempts of a quadrature or calibration
        calibration_residual_gate: Largest accepted relative calibration residual
        quasi_triangle_samples: Random triples for the quasi-triangle constant
        run_integration_tests: Whether to run integration tests
    """

    model_config = SettingsConfigDict(
        env_file='.env',
        env_file_encoding='utf-8',
        case_sensitive=False,
        extra='ignore',
        populate_by_name=True,
    )

    log_level: str = "INFO"
    threads: int = Field(
        default_factory=default_workers,
        ge=1,
        validation_alias=AliasChoices("heisenberg_threads", "threads"),
    )
    output_dir: str = "results"

    # Experiment defaults
    default_seed: int = 0
    default_mode: GroupMode = GroupMode.HEISENBERG
    default_n: int = Field(default=1, ge=1)

    # Quadrature defaults
    quad_abs_tol: float = Field(default=1e-13, gt=0)
    quad_rel_tol: float = Field(default=1e-10, gt=0)
    quad_limit: int = Field(default=200, ge=10)
    quad_max_attempts: int = Field(default=3, ge=1, le=8)
    calibration_residual_gate: float = Field(default=1e-4, gt=0)
    quasi_triangle_samples: int = Field(default=200_000, ge=1000)

    # Testing
    run_integration_tests: bool = False

    @field_validator("log_level")
    @classmethod
    def _check_level(cls, value: str) -> str:
        value = value.upper()
        if value not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
            raise ValueError(f"Unsupported log level: {value}. Supported: DEBUG, INFO, WARNING, ERROR, CRITICAL")
        return value

    def quadrature(self) -> QuadratureConfig:
        return QuadratureConfig(
            abs_tol=self.quad_abs_tol,
            rel_tol=self.quad_rel_tol,
            node_budget=self.quad_limit,
            max_attempts=self.quad_max_attempts,
        )


class ExperimentConfig(BaseModel):
    """Everything a CLI run depends on, hashed into every report.

    Precedence is flags > config file > Settings defaults; ``output_dir`` is
    not part of the hash so moving the output does not change reports.

    Attributes:
        mode: Group mode
        n: Group dimension
        j: Field label (X1, Y1, ...)
        quadrature: Quadrature settings
        grid: Sampling grid of the analysis commands
        seed: Random seed
        output_dir: Report directory
    """

    model_config = ConfigDict(frozen=True)

    mode: GroupMode = GroupMode.HEISENBERG
    n: int = Field(default=1, ge=1)
    j: str = "X1"
    quadrature: QuadratureConfig = Field(default_factory=QuadratureConfig)
    grid: GridSpec = Field(default_factory=GridSpec)
    seed: int = 0
    output_dir: str = "results"

    @field_validator("j")
    @classmethod
    def _normalise_label(cls, value: str) -> str:
        return value.strip().upper()

    @classmethod
    def from_settings(cls, settings: "Settings") -> "ExperimentConfig":
        mode, n = settings.default_mode, settings.default_n
        return cls(
            mode=mode,
            n=n,
            quadrature=settings.quadrature(),
            grid=GridSpec.cube(mode, n, 1.0, 16),
            seed=settings.default_seed,
            output_dir=settings.output_dir,
        )

    @classmethod
    def load(cls, path: Union[str, Path]) -> "ExperimentConfig":
        return cls.model_validate_json(Path(path).read_text(encoding="utf-8"))

    def dump(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(canonical_json(self.model_dump(mode="json")) + "\n", encoding="utf-8")
        return path

    def merged(self, overrides: Dict[str, Any]) -> "ExperimentConfig":
        """A validated copy with the non-None overrides applied.

        Changing mode or n without a grid rebuilds the default grid for the new group.
        """
        updates = {k: v for k, v in overrides.items() if v is not None}
        data = self.model_dump(mode="json")
        data.update(updates)
        if ("mode" in updates or "n" in updates) and "grid" not in updates:
            grid = GridSpec.cube(data["mode"], data["n"], 1.0, 16)
            data["grid"] = grid.model_dump(mode="json")
        return ExperimentConfig.model_validate(data)

    def vector_field(self) -> VectorFieldId:
        return VectorFieldId.parse(self.j, self.n, self.mode)

    @property
    def config_hash(self) -> str:
        return content_hash(self.model_dump(mode="json", exclude={"output_dir"}))


# Global settings instance
settings = Settings()
