from typing import List

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, NoDecode
from typing_extensions import Annotated

from profiles.tree import LEVELS
from .common import split_list


class PipelineSettings(BaseSettings):
    bin_width_ms: int = Field(100, gt=0)
    window_durations_s: Annotated[List[float], NoDecode] = [60.0]
    stride_s: float = Field(10.0, gt=0)
    levels: Annotated[List[int], NoDecode] = list(LEVELS)

    @field_validator("window_durations_s", "levels", mode="before")
    @classmethod
    def _split(cls, value):
        return split_list(value)

    @field_validator("levels")
    @classmethod
    def _known_levels(cls, value):
        for level in value:
            if level not in LEVELS:
                raise ValueError(f"prefix depth {level} is not one of {LEVELS}")
        return value
