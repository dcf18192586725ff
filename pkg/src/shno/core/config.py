"""Process-level settings (``SHNO_*`` environment variables and ``.env``)."""

import logging
from pathlib import Path
from typing import Literal

from pydantic import Field, field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

logger = logging.getLogger(__name__)

LogLevel = Literal["DEBUG", "INFO", "WARNING", "ERROR"]


def find_dotenv(start: Path | None = None) -> Path | None:
    """Nearest ``.env`` in *start* (default: cwd) or one of its ancestors."""
    here = (start or Path.cwd()).resolve()
    return next((d / ".env" for d in (here, *here.parents) if (d / ".env").is_file()), None)


class Settings(BaseSettings):
    """How a process runs, never what it computes.

    Experiment parameters live in the run config file; nothing here changes
    the bytes of an artifact.
    """

    model_config = SettingsConfigDict(
        env_prefix="SHNO_",
        env_file=find_dotenv() or ".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    log_level: LogLevel = Field(default="INFO", description="Root logging level")
    log_file: Path | None = Field(default=None, description="Also log to this file")

    enable_tracing: bool = Field(default=False, description="Write span events to a JSONL run log")
    trace_file: Path | None = Field(
        default=None,
        description="Run log path; <output_dir>/run_log.jsonl when unset",
    )

    enable_parallel_generation: bool = Field(
        default=False,
        description="Integrate dataset members in worker processes",
    )
    max_workers: int = Field(default=4, gt=0, description="Worker processes for parallel generation")

    work_dir: Path = Field(default=Path("."), description="Base for relative paths in run configs")

    @field_validator("log_level", mode="before")
    @classmethod
    def _upper_level(cls, value: object) -> object:
        return value.upper() if isinstance(value, str) else value

    @model_validator(mode="after")
    def _prepare_log_dir(self) -> "Settings":
        if self.log_file is not None:
            self.log_file.parent.mkdir(parents=True, exist_ok=True)
        return self

    def resolve(self, path: Path) -> Path:
        """``path`` anchored at ``work_dir`` unless already absolute."""
        return path if path.is_absolute() else self.work_dir / path

    def generation_workers(self, configured: int) -> int:
        """``dataset.max_workers``, raised to ``max_workers`` when parallel generation is on."""
        return max(configured, self.max_workers) if self.enable_parallel_generation else configured
