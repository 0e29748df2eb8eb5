from typing import Optional

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Application settings for simulation runs and verification suites"""

    # Environment-specific settings
    APP_NAME: str = Field(default="urnlab", description="Service name used in logs, metrics and traces")
    ENV_STATE: str = Field(default="dev", description="Deployment environment label")

    # Logging / telemetry
    LOG_LEVEL: str = Field(default="INFO", description="Root logging level")
    LOG_FILE: Optional[str] = Field(default=None, description="Optional file receiving a copy of every log record")
    OTLP_GRPC_ENDPOINT: Optional[str] = Field(default=None, description="OTLP/gRPC collector; tracing stays local when unset")

    # Execution
    URNLAB_THREADS: Optional[int] = Field(default=None, description="Worker count used when --threads is not given")
    STREAM_BLOCK_SIZE: int = Field(default=4096, description="Draws generated per refill of each random substream")

    # Statistics / verification defaults
    SIGMA_FLOOR: float = Field(default=1e-6, description="Replications whose limiting variance is below this are excluded")
    PROXY_MULTIPLIER: int = Field(default=16, description="Z-infinity proxy is read at multiplier x horizon")
    GUARD_EPSILON: float = Field(default=0.1, description="Epsilon used by the per-step increment guard")
    REPLICATION_CAP: int = Field(default=1_000_000, description="Upper bound for planned replication counts")
    SWEEP_CAP: int = Field(default=256, description="Maximum number of Cartesian sweep points")
    ACCEPTANCE_FILE: str = Field(default="acceptance.yaml", description="Pre-registered verification thresholds")

    @field_validator("URNLAB_THREADS", mode="before")
    @classmethod
    def empty_threads_as_unset(cls, v):
        if v in ("", None):
            return None
        return v

    @field_validator("URNLAB_THREADS")
    @classmethod
    def positive_threads(cls, v: Optional[int]) -> Optional[int]:
        if v is not None and v < 1:
            raise ValueError("URNLAB_THREADS must be >= 1")
        return v

    @field_validator("STREAM_BLOCK_SIZE", "PROXY_MULTIPLIER", "REPLICATION_CAP", "SWEEP_CAP")
    @classmethod
    def positive_ints(cls, v: int) -> int:
        if v < 1:
            raise ValueError("must be >= 1")
        return v

    @field_validator("SIGMA_FLOOR")
    @classmethod
    def positive_floor(cls, v: float) -> float:
        if v <= 0:
            raise ValueError("SIGMA_FLOOR must be > 0")
        return v

    @field_validator("GUARD_EPSILON")
    @classmethod
    def epsilon_in_unit_interval(cls, v: float) -> float:
        if not 0 < v < 1:
            raise ValueError("GUARD_EPSILON must lie in (0, 1)")
        return v

    model_config = SettingsConfigDict(
        env_file=".env",
        extra="ignore"
    )


# Global settings instance
settings = Settings()
