"""
Conjunctive filter expressions over indexed profile attributes.

Grammar: `pred (&& pred)*` with `pred := attr op value`,
`op` one of `< <= = == >= >` (also `≤ ≥`). `direction` takes UP or DOWN
and only equality.
"""
from dataclasses import dataclass, field
from typing import List, Optional, Tuple
import math
import re

from django.db.models import Q

from netreplica.exceptions import QueryError
from profiles.metrics import METRIC_FIELDS
from traces.records import Direction

QUERY_ATTRIBUTES = METRIC_FIELDS + ("window_duration_s", "direction")
INTEGER_ATTRIBUTES = ("host_count", "flow_count", "toggle_count")
ORDER_ATTRIBUTES = QUERY_ATTRIBUTES + ("id",)

OPERATORS = {
    "<": "lt",
    "<=": "lte",
    "≤": "lte",
    "=": "exact",
    "==": "exact",
    ">=": "gte",
    "≥": "gte",
    ">": "gt",
}

_PREDICATE = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*(<=|>=|==|≤|≥|<|>|=)\s*(\S+)\s*$")


@dataclass(frozen=True)
class Predicate:
    attribute: str
    lookup: str
    value: object

    def as_q(self):
        if self.attribute in INTEGER_ATTRIBUTES and not float(self.value).is_integer():
            return self._fractional_integer_q()
        value = int(self.value) if self.attribute in INTEGER_ATTRIBUTES else self.value
        return Q(**{f"{self.attribute}__{self.lookup}": value})

    def _fractional_integer_q(self):
        # Integer columns would truncate a fractional bound
        if self.lookup in ("lt", "lte"):
            return Q(**{f"{self.attribute}__lte": math.floor(self.value)})
        if self.lookup in ("gt", "gte"):
            return Q(**{f"{self.attribute}__gte": math.ceil(self.value)})
        return Q(pk__in=[])


@dataclass
class ProfileQuery:
    predicates: List[Predicate] = field(default_factory=list)
    limit: Optional[int] = None
    order_by: Optional[Tuple[str, bool]] = None

    @classmethod
    def parse(cls, expression="", limit=None, order_by=None):
        """
        Build a query from CLI-style arguments.

        Args:
            expression: filter such as "pmr95>=1 && mean_throughput_bps>1e6"; empty matches all
            limit: maximum number of results
            order_by: "attr", "attr:asc" or "attr:desc"

        Raises:
            QueryError: unknown attribute, bad operator or value, bad limit
        """
        if limit is not None and int(limit) < 0:
            raise QueryError(f"limit must be >= 0, got {limit}")
        return cls(
            predicates=parse_filter(expression),
            limit=int(limit) if limit is not None else None,
            order_by=parse_order_by(order_by),
        )

    def as_q(self):
        q = Q()
        for predicate in self.predicates:
            q &= predicate.as_q()
        return q

    def ordering(self):
        if self.order_by is None or self.order_by[0] == "id":
            descending = bool(self.order_by and self.order_by[1])
            return ["-profile_id" if descending else "profile_id"]
        attribute, descending = self.order_by
        return [f"-{attribute}" if descending else attribute, "profile_id"]


def parse_filter(expression):
    predicates = []
    if expression is None or not expression.strip():
        return predicates
    for index, part in enumerate(expression.split("&&"), start=1):
        match = _PREDICATE.match(part)
        if not match:
            raise QueryError(f"cannot parse predicate {index}: {part.strip()!r}")
        attribute, op, raw = match.groups()
        if attribute not in QUERY_ATTRIBUTES:
            raise QueryError(f"unknown attribute {attribute!r}; expected one of {', '.join(QUERY_ATTRIBUTES)}")
        predicates.append(Predicate(attribute, OPERATORS[op], _parse_value(attribute, OPERATORS[op], raw)))
    return predicates


def _parse_value(attribute, lookup, raw):
    if attribute == "direction":
        if lookup != "exact":
            raise QueryError("direction supports only = and ==")
        try:
            return Direction(raw.upper()).value
        except ValueError:
            raise QueryError(f"direction must be UP or DOWN, got {raw!r}")
    try:
        value = float(raw)
    except ValueError:
        raise QueryError(f"{attribute}: {raw!r} is not a number")
    if not math.isfinite(value):
        raise QueryError(f"{attribute}: value must be finite")
    return value


def parse_order_by(order_by):
    if not order_by:
        return None
    attribute, _, direction = str(order_by).partition(":")
    direction = (direction or "asc").lower()
    if attribute not in ORDER_ATTRIBUTES:
        raise QueryError(f"cannot order by unknown attribute {attribute!r}")
    if direction not in ("asc", "desc"):
        raise QueryError(f"order direction must be asc or desc, got {direction!r}")
    return attribute, direction == "desc"
