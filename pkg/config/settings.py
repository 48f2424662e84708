from functools import lru_cache
from pathlib import Path

from pydantic import Field
from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    output_dir: Path = Field(
        default=Path("runs"),
        alias="SUPERPIPE_OUTPUT_DIR",
        description="Directorio de artefactos cuando ni el flag ni el archivo de experimento lo fijan",
    )
    default_experiment: Path = Field(
        default=Path("config/experiments/default.yaml"),
        alias="DEFAULT_EXPERIMENT",
        description="Archivo de experimento usado cuando la CLI no recibe uno",
    )
    sweep_workers: int = Field(
        default=4,
        alias="SWEEP_WORKERS",
        ge=1,
        description="Hilos para evaluar puntos del grid (k, k') en paralelo",
    )
    logs_dir: Path = Field(
        default=Path("logs"),
        alias="LOGS_DIR",
        description="Directorio para almacenar logs",
    )
    enable_structured_logging: bool = Field(
        default=True,
        alias="ENABLE_STRUCTURED_LOGGING",
        description="Usar formato JSON para logs estructurados",
    )
    log_level: str = Field(
        default="INFO",
        alias="LOG_LEVEL",
        description="Nivel de logging (DEBUG, INFO, WARNING, ERROR, CRITICAL)",
    )

    model_config = {"env_file": ".env", "env_file_encoding": "utf-8", "extra": "ignore"}


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    return Settings()
