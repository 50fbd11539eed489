from pathlib import Path
from typing import Any

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Toolkit settings and configuration.

    Attributes:
        debug: Debug mode flag (forces DEBUG logging)
        app_name: Name of the application
        project_path: Base path of the project
        log_level: Default loguru level for the command-line sink
        workers: Threads used for per-graph dataset operations
        symmetry_tol: Max absolute asymmetry accepted by the eigensolver
        jacobi_tol: Relative off-diagonal Frobenius norm that ends the Jacobi sweeps
        jacobi_max_sweeps: Sweep cap before the eigensolver reports non-convergence
        density_threshold: Mean density the suggest-r heuristic must exceed
        cls_short_pe_value: Reserved shortest-path encoding value of CLS edges
        default_q: Default number of spectral coordinates
        default_patience: Default plateau patience in epochs
        default_initial_lr: Default initial learning rate
        default_stop_lr: Learning rate under which training stops
        default_max_minutes: Default wall-clock cap per training run
    """

    debug: bool = Field(default=False, description="Debug mode flag")
    app_name: str = Field(default="HopRewire", description="Name of the application")
    project_path: Path = Field(
        default=Path(__file__).parent.parent, description="Base path of the project"
    )
    log_level: str = Field(default="INFO", description="Default log level of the CLI sink")
    workers: int = Field(default=1, ge=1, description="Threads for per-graph operations")

    symmetry_tol: float = Field(default=1e-12, gt=0, description="Eigensolver symmetry check")
    jacobi_tol: float = Field(default=1e-12, gt=0, description="Jacobi convergence threshold")
    jacobi_max_sweeps: int = Field(default=100, ge=1, description="Jacobi sweep cap")

    density_threshold: float = Field(
        default=0.5, ge=0, le=1, description="Density that suggest-r must exceed"
    )
    cls_short_pe_value: int = Field(
        default=0, description="Shortest-path PE value reserved for CLS edges"
    )
    default_q: int = Field(default=8, ge=1, description="Default spectral PE size")

    default_patience: int = Field(default=10, ge=1, description="Plateau patience (epochs)")
    default_initial_lr: float = Field(default=1e-3, gt=0, description="Initial learning rate")
    default_stop_lr: float = Field(default=1e-6, gt=0, description="Stop learning rate")
    default_max_minutes: float = Field(
        default=15.0, gt=0, description="Wall-clock cap per training run"
    )

    model_config = SettingsConfigDict(
        env_file=".env", env_file_encoding="utf-8", case_sensitive=False, env_prefix="hoprewire_"
    )

    def model_dump(self, **kwargs: Any) -> dict[str, Any]:
        """Override model_dump to render paths as strings."""
        dumped = super().model_dump(**kwargs)
        dumped["project_path"] = str(dumped["project_path"])
        return dumped


settings = Settings()

if __name__ == "__main__":
    print(settings.model_dump())
