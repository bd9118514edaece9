from typing import List, Optional

from pydantic import field_validator
from pydantic_settings import BaseSettings, NoDecode
from typing_extensions import Annotated

from traces.parsers import TraceFormat
from traces.records import IngestConfig
from .common import split_list


class IngestSettings(BaseSettings):
    internal_prefix: Annotated[List[str], NoDecode] = []
    drop_non_crossing: bool = True
    trace_format: Optional[str] = None

    @field_validator("internal_prefix", mode="before")
    @classmethod
    def _split_prefixes(cls, value):
        return split_list(value)

    @field_validator("trace_format")
    @classmethod
    def _known_format(cls, value):
        if value is None:
            return None
        value = value.upper()
        if value not in TraceFormat.__members__:
            raise ValueError(f"unknown trace format {value!r} (expected one of {', '.join(TraceFormat.__members__)})")
        return value

    def ingest_config(self):
        return IngestConfig.from_strings(self.internal_prefix, self.drop_non_crossing)
