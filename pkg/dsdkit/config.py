"""
Configuration management using Pydantic Settings
Loads from DSD_* environment variables and .env file
"""
from functools import lru_cache
from typing import List, Literal

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from dsdkit import __version__


class Settings(BaseSettings):
    """Toolkit settings with validation"""

    model_config = SettingsConfigDict(
        env_prefix="DSD_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore"
    )

    toolkit_version: str = __version__

    # Integration
    segments: int = Field(default=16000, ge=1, description="Euler segments per decomposed interval")
    slack: Literal["uniform", "proportional"] = "uniform"
    chunk_segments: int = Field(default=65536, ge=1, description="Segments evaluated per vectorized block")
    reference_multiplier: int = Field(default=64, ge=1, description="Fine-step reference N as a multiple of N")

    # Decomposition
    mode: Literal["chain", "endpoint"] = "chain"
    stage_breaks: List[int] = Field(default=[2000, 2005, 2010, 2015, 2020])
    chain_workers: int = Field(default=4, ge=1, description="Threads used to evaluate year pairs")

    # Metrics
    negative_drivers: Literal["all", "intensity-factor"] = "all"

    # Output
    output_format: Literal["csv", "json"] = "csv"
    significant_digits: int = Field(default=6, ge=1, le=17)

    # Fixtures
    seed_fixtures: bool = Field(default=False, description="Enable bundled synthetic fixtures")

    # Monitoring
    log_level: Literal["DEBUG", "INFO", "WARNING", "ERROR"] = "WARNING"
    log_json: bool = True

    @field_validator("stage_breaks")
    @classmethod
    def breaks_sorted(cls, value: List[int]) -> List[int]:
        if sorted(value) != value:
            raise ValueError("stage_breaks must be sorted ascending")
        return value

    def get_integration_config(self) -> dict:
        """Get integration configuration summary"""
        return {
            "segments": self.segments,
            "slack": self.slack,
            "mode": self.mode,
            "chunk_segments": self.chunk_segments,
        }


@lru_cache()
def get_settings() -> Settings:
    """Get cached settings instance"""
    return Settings()
