from dataclasses import dataclass, field
import ipaddress
import logging

from .records import Direction, GroupPacket, HostGroup, PacketRecord, flow_key

logger = logging.getLogger("traces")

DROP_BOTH_INTERNAL = "both_internal"
DROP_BOTH_EXTERNAL = "both_external"
DROP_NON_IPV4 = "non_ipv4"


@dataclass
class DecomposeStats:
    """Packet and byte accounting for one decomposition."""

    input_packets: int = 0
    input_bytes: int = 0
    retained_packets: int = 0
    retained_bytes: int = 0
    dropped_packets: dict = field(default_factory=dict)
    dropped_bytes: dict = field(default_factory=dict)

    def drop(self, reason, wire_bytes):
        self.dropped_packets[reason] = self.dropped_packets.get(reason, 0) + 1
        self.dropped_bytes[reason] = self.dropped_bytes.get(reason, 0) + wire_bytes

    @property
    def total_dropped_packets(self):
        return sum(self.dropped_packets.values())

    @property
    def total_dropped_bytes(self):
        return sum(self.dropped_bytes.values())

    def as_dict(self):
        return {
            "input_packets": self.input_packets,
            "input_bytes": self.input_bytes,
            "retained_packets": self.retained_packets,
            "retained_bytes": self.retained_bytes,
            "dropped_packets": dict(sorted(self.dropped_packets.items())),
            "dropped_bytes": dict(sorted(self.dropped_bytes.items())),
        }


def decompose(records, cfg):
    """
    Split packets into per-internal-host bidirectional groups.

    internal src -> external dst is UP in the src group; external src ->
    internal dst is DOWN in the dst group. Packets that never cross the
    gateway (both ends internal or both external) are dropped when
    cfg.drop_non_crossing is set; with it cleared, both-internal packets
    are kept as UP in the source host's group. Non-IPv4 packets are always
    dropped.

    Args:
        records: time-ordered PacketRecords
        cfg: IngestConfig

    Returns:
        tuple: (dict host -> HostGroup ordered by address, DecomposeStats)
    """
    groups = {}
    stats = DecomposeStats()

    for record in records:
        stats.input_packets += 1
        stats.input_bytes += record.wire_bytes

        src_internal = cfg.is_internal(record.src_addr) if record.ip_version == 4 else None
        dst_internal = cfg.is_internal(record.dst_addr) if record.ip_version == 4 else None
        if src_internal is None or dst_internal is None:
            stats.drop(DROP_NON_IPV4, record.wire_bytes)
            continue

        if src_internal and not dst_internal:
            host, direction = record.src_addr, Direction.UP
        elif dst_internal and not src_internal:
            host, direction = record.dst_addr, Direction.DOWN
        elif src_internal and not cfg.drop_non_crossing:
            host, direction = record.src_addr, Direction.UP
        else:
            stats.drop(DROP_BOTH_INTERNAL if src_internal else DROP_BOTH_EXTERNAL, record.wire_bytes)
            continue

        if direction is Direction.UP:
            remote, local_port, remote_port = record.dst_addr, record.src_port, record.dst_port
        else:
            remote, local_port, remote_port = record.src_addr, record.dst_port, record.src_port

        group = groups.get(host)
        if group is None:
            group = groups[host] = HostGroup(host=host)
        group.packets.append(
            GroupPacket(
                timestamp=record.timestamp,
                direction=direction,
                wire_bytes=record.wire_bytes,
                flow_key=flow_key(
                    record.protocol, record.src_addr, record.src_port, record.dst_addr, record.dst_port
                ),
                remote_addr=remote,
                local_port=local_port,
                remote_port=remote_port,
                protocol=record.protocol,
            )
        )
        stats.retained_packets += 1
        stats.retained_bytes += record.wire_bytes

    for group in groups.values():
        group.packets.sort(key=lambda p: p.timestamp)

    ordered = {host: groups[host] for host in sorted(groups, key=lambda h: int(ipaddress.IPv4Address(h)))}
    logger.info(
        f"Decomposed {stats.input_packets} packets into {len(ordered)} hosts, "
        f"dropped {stats.total_dropped_packets} ({stats.as_dict()['dropped_packets']})"
    )
    return ordered, stats


def flatten(groups):
    """Rebuild time-ordered PacketRecords from host groups."""
    records = []
    for host, group in groups.items():
        for packet in group.packets:
            if packet.direction is Direction.UP:
                src, dst, sport, dport = host, packet.remote_addr, packet.local_port, packet.remote_port
            else:
                src, dst, sport, dport = packet.remote_addr, host, packet.remote_port, packet.local_port
            records.append(
                PacketRecord(packet.timestamp, src, dst, sport, dport, packet.protocol, packet.wire_bytes, 4)
            )
    records.sort(key=lambda r: r.timestamp)
    return records
