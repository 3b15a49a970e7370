"""Application settings module using Pydantic and EnvYAML.

Loads configuration from a YAML file with environment variable support. Every
section is optional; a missing config file means all defaults.
"""

import logging
import logging.config
import os
from functools import cache
from pathlib import Path

import yaml
from envyaml import EnvYAML
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from grasp_proposals.core.exceptions import SceneFileError
from grasp_proposals.core.models import PlannerConfig
from grasp_proposals.core.reachability import ArmModel, BaseAlignmentParams
from grasp_proposals.core.registration import RegistrationParams
from grasp_proposals.core.supervisor import SupervisorPolicy

logger = logging.getLogger(__name__)


class RegistrationConfig(RegistrationParams):
    """Registration settings plus where the model library lives."""

    model_config = ConfigDict(extra="forbid", protected_namespaces=())

    model_dir: str | None = Field(default=None, description="Directory with one model cloud per class label")


class ReachabilityConfig(BaseModel):
    """Reachability map precomputation settings."""

    model_config = ConfigDict(extra="forbid")

    arm: ArmModel = Field(default_factory=ArmModel, description="Simplified arm kinematics")
    resolution: float = Field(default=0.05, gt=0.0, description="Voxel edge length (m)")
    direction_bins: int = Field(default=26, description="Approach-direction bins (6, 14 or 26)")
    samples: int = Field(default=1_000_000, ge=10_000, description="Monte-Carlo joint samples")
    seed: int = Field(default=0, description="Sampling seed")
    base_alignment: BaseAlignmentParams = Field(default_factory=BaseAlignmentParams, description="Base candidates")


class ExecutionConfig(BaseModel):
    """Application execution settings."""

    model_config = ConfigDict(extra="forbid")

    reports_dir: str = Field(default="reports", description="Directory for saving reports")
    logs_dir: str = Field(default="logs", description="Directory for saving logs")


class LoggingConfig(BaseModel):
    """Logging configuration settings."""

    model_config = ConfigDict(extra="forbid")

    config_file: str = Field(default="logging_config.yaml", description="Logging configuration file path")


class AppConfig(BaseModel):
    """Main application configuration."""

    model_config = ConfigDict(extra="forbid")

    planner: PlannerConfig = Field(default_factory=PlannerConfig, description="Planner settings")
    registration: RegistrationConfig = Field(default_factory=RegistrationConfig, description="Registration settings")
    reachability: ReachabilityConfig = Field(default_factory=ReachabilityConfig, description="Reachability settings")
    supervisor: SupervisorPolicy = Field(default_factory=SupervisorPolicy, description="Retry / handover policy")
    execution: ExecutionConfig = Field(default_factory=ExecutionConfig, description="Execution settings")
    logging: LoggingConfig = Field(default_factory=LoggingConfig, description="Logging settings")


def _resolve(path_value: str) -> Path:
    # If path has no directory part, assume it's in current working directory
    if os.path.basename(path_value) == path_value:
        return Path.cwd() / path_value
    return Path(path_value)


def load_config(path: str | Path | None) -> AppConfig:
    """Read ``path`` (``${VAR}`` interpolated); None or a missing default file gives the defaults."""
    if path is None:
        return AppConfig()
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"Config file not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            sections = yaml.safe_load(f) or {}
        if not isinstance(sections, dict):
            raise SceneFileError(f"{path}: expected a mapping at the top level")
        # EnvYAML also exposes the process environment; keep only the file's own sections
        expanded = EnvYAML(str(path), strict=False) if sections else {}
        return AppConfig.model_validate({key: expanded[key] for key in sections})
    except ValidationError as e:
        first = e.errors()[0]
        location = ".".join(str(part) for part in first["loc"])
        raise SceneFileError(f"{path}: {location}: {first['msg']}") from e
    except yaml.YAMLError as e:
        raise SceneFileError(f"{path}: invalid YAML: {e}") from e


@cache
def get_config() -> AppConfig:
    app_config_path = _resolve(os.environ.get("APP_CONFIG", "config.yaml"))
    if not app_config_path.exists():
        return AppConfig()
    return load_config(app_config_path)


def setup_logging(config: AppConfig | None = None) -> None:
    """Setup logging configuration from YAML file."""
    config = config or get_config()
    logging_config_path = Path(config.logging.config_file)
    if not logging_config_path.exists():
        logging.basicConfig(level=logging.INFO, format="%(asctime)s - %(name)s - %(levelname)s - %(message)s")
        return

    with open(logging_config_path, "r", encoding="utf-8") as f:
        logging_config = yaml.safe_load(f)

    logs_dir = Path(config.execution.logs_dir)
    logs_dir.mkdir(parents=True, exist_ok=True)

    logging.config.dictConfig(logging_config)
