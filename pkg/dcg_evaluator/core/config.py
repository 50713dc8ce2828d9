"""
Налаштування чисельних допусків та лімітів
"""

from pydantic import BaseModel, Field


class Settings(BaseModel):
    """Допуски та ліміти, спільні для всіх модулів"""

    model_config = {"frozen": True}

    # Атоми ближчі за цей поріг зливаються
    merge_tolerance: float = Field(default=1e-12, ge=0.0)
    # Ваги з |Σw - 1| у цих межах мовчки перенормовуються
    renormalization_tolerance: float = Field(default=1e-9, ge=0.0)
    # Абсолютний допуск чисельного інтегрування на одну клітинку
    integration_tolerance: float = Field(default=1e-10, gt=0.0)
    atom_cap: int = Field(default=2 ** 24, ge=1)
    path_cap: int = Field(default=10 ** 6, ge=1)
    threads: int = Field(default=1, ge=1)


DEFAULT_SETTINGS = Settings()
