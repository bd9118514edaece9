from typing import List

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, NoDecode
from typing_extensions import Annotated

from .common import split_list


class EvaluationSettings(BaseSettings):
    bins: int = Field(20, ge=2)
    max_lag: int = Field(7, ge=1)
    coverage_thresholds: Annotated[List[float], NoDecode] = [10.0]
    ridge: float = Field(1e-6, ge=0)

    @field_validator("coverage_thresholds", mode="before")
    @classmethod
    def _split(cls, value):
        return split_list(value)
