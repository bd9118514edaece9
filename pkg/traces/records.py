from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import List, Optional
import hashlib
import ipaddress

from netreplica.exceptions import ConfigError


class Protocol(str, Enum):
    TCP = "TCP"
    UDP = "UDP"
    OTHER = "OTHER"

    @classmethod
    def from_token(cls, token):
        """Accept names (tcp/udp/other) or IP protocol numbers (6/17)."""
        value = str(token).strip().upper()
        if value in ("TCP", "6"):
            return cls.TCP
        if value in ("UDP", "17"):
            return cls.UDP
        if value in ("OTHER", "") or value.isdigit():
            return cls.OTHER
        raise ValueError(f"unknown protocol {token!r}")


class Direction(str, Enum):
    UP = "UP"
    DOWN = "DOWN"

    @property
    def opposite(self):
        return Direction.DOWN if self is Direction.UP else Direction.UP


@dataclass(frozen=True, slots=True)
class PacketRecord:
    """One captured packet. `ip_version` is 0 for non-IP frames."""

    timestamp: float
    src_addr: str
    dst_addr: str
    src_port: int
    dst_port: int
    protocol: Protocol
    wire_bytes: int
    ip_version: int = 4

    def __post_init__(self):
        if self.wire_bytes < 0:
            raise ValueError("wire_bytes must be >= 0")
        if self.protocol is Protocol.OTHER and (self.src_port or self.dst_port):
            object.__setattr__(self, "src_port", 0)
            object.__setattr__(self, "dst_port", 0)


@lru_cache(maxsize=65536)
def flow_key(protocol, addr_a, port_a, addr_b, port_b):
    """
    Order-independent 64-bit hash of a 5-tuple.

    Both directions of a flow map to the same key: the two endpoints are
    sorted before hashing.
    """
    ends = sorted([(addr_a, int(port_a)), (addr_b, int(port_b))])
    token = f"{Protocol(protocol).value}|{ends[0][0]}|{ends[0][1]}|{ends[1][0]}|{ends[1][1]}"
    return int.from_bytes(hashlib.blake2b(token.encode(), digest_size=8).digest(), "big")


@dataclass(frozen=True, slots=True)
class GroupPacket:
    timestamp: float
    direction: Direction
    wire_bytes: int
    flow_key: int
    remote_addr: str
    local_port: int
    remote_port: int
    protocol: Protocol


@dataclass
class HostGroup:
    """Bidirectional packets of one internal host, ordered by timestamp."""

    host: str
    packets: List[GroupPacket] = field(default_factory=list)

    @property
    def total_bytes(self):
        return sum(p.wire_bytes for p in self.packets)

    def bytes_in(self, direction):
        return sum(p.wire_bytes for p in self.packets if p.direction is direction)

    def flow_keys(self):
        return {p.flow_key for p in self.packets}


@dataclass
class IngestConfig:
    internal_prefixes: List[ipaddress.IPv4Network]
    drop_non_crossing: bool = True

    def __post_init__(self):
        if not self.internal_prefixes:
            raise ConfigError("at least one prefix is required", field="internal_prefix")
        networks = []
        for prefix in self.internal_prefixes:
            try:
                network = ipaddress.ip_network(str(prefix), strict=False)
            except ValueError as exc:
                raise ConfigError(str(exc), field="internal_prefix") from exc
            if network.version != 4:
                raise ConfigError(f"{prefix} is not an IPv4 prefix", field="internal_prefix")
            networks.append(network)
        self.internal_prefixes = networks
        self._membership = {}

    @classmethod
    def from_strings(cls, prefixes, drop_non_crossing=True):
        return cls(internal_prefixes=list(prefixes), drop_non_crossing=drop_non_crossing)

    def is_internal(self, addr) -> Optional[bool]:
        """True/False for IPv4 addresses, None for anything else."""
        cached = self._membership.get(addr)
        if cached is not None or addr in self._membership:
            return cached
        try:
            ip = ipaddress.ip_address(addr)
        except ValueError:
            result = None
        else:
            result = None if ip.version != 4 else any(ip in net for net in self.internal_prefixes)
        self._membership[addr] = result
        return result
