from dataclasses import dataclass, field
import ipaddress
import logging

import numpy as np

from netreplica.exceptions import SeriesMismatchError
from traces.records import Direction
from .series import ActivityIndex, ByteSeries

logger = logging.getLogger("profiles")

LEVELS = (32, 24, 16, 8, 0)


@dataclass(eq=False)
class PrefixNode:
    """
    One prefix of the aggregation tree.

    Non-leaf series are the elementwise sums of their children; activity
    indexes hold (bin, host) and (bin, flow) entries per direction.
    """

    prefix: ipaddress.IPv4Network
    up: ByteSeries
    down: ByteSeries
    active_hosts: set = field(default_factory=set)
    flow_keys: set = field(default_factory=set)
    children: dict = field(default_factory=dict)
    host_activity: dict = field(default_factory=dict)
    flow_activity: dict = field(default_factory=dict)

    @property
    def depth(self):
        return self.prefix.prefixlen

    @property
    def is_leaf(self):
        return not self.children

    def series(self, direction):
        return self.up if direction is Direction.UP else self.down

    def walk(self, levels=LEVELS):
        """Nodes whose depth is in `levels`, parents before children, children by octet."""
        if self.depth in levels:
            yield self
        for key in sorted(self.children):
            yield from self.children[key].walk(levels)

    def find(self, prefix):
        """Node for an exact prefix (e.g. "10.0.1.0/24"), or None."""
        target = ipaddress.ip_network(str(prefix), strict=False)
        node = self
        while node is not None:
            if node.prefix == target:
                return node
            if target.prefixlen <= node.depth:
                return None
            octet = int(target.network_address) >> (24 - node.depth) & 0xFF
            node = node.children.get(octet)
        return None


def _child_octet(host_int, parent_depth):
    return (host_int >> (24 - parent_depth)) & 0xFF


def _leaf(host, host_series):
    addr = int(ipaddress.IPv4Address(host))
    host_activity = {}
    for direction in (Direction.UP, Direction.DOWN):
        bins = np.flatnonzero(host_series.series(direction).bins)
        host_activity[direction] = ActivityIndex(bins, np.full(bins.size, addr, dtype=np.uint64))
    active = {host} if (host_series.up.total_bytes or host_series.down.total_bytes) else set()
    return PrefixNode(
        prefix=ipaddress.ip_network(f"{host}/32"),
        up=host_series.up,
        down=host_series.down,
        active_hosts=active,
        flow_keys=set(host_series.flow_keys),
        host_activity=host_activity,
        flow_activity={
            d: host_series.flow_activity.get(d, ActivityIndex()) for d in (Direction.UP, Direction.DOWN)
        },
    )


def _aggregate(prefix, children, template):
    up = np.zeros(len(template), dtype=np.int64)
    down = np.zeros(len(template), dtype=np.int64)
    for child in children.values():
        up += child.up.bins
        down += child.down.bins
    return PrefixNode(
        prefix=prefix,
        up=ByteSeries(template.bin_width_ms, template.start_time, up),
        down=ByteSeries(template.bin_width_ms, template.start_time, down),
        active_hosts=set().union(*(c.active_hosts for c in children.values())),
        flow_keys=set().union(*(c.flow_keys for c in children.values())),
        children=children,
        host_activity={
            d: ActivityIndex.merge([c.host_activity[d] for c in children.values()])
            for d in (Direction.UP, Direction.DOWN)
        },
        flow_activity={
            d: ActivityIndex.merge([c.flow_activity[d] for c in children.values()])
            for d in (Direction.UP, Direction.DOWN)
        },
    )


def build_prefix_tree(series_by_host):
    """
    Aggregate host series into a /32 -> /24 -> /16 -> /8 -> root tree.

    Args:
        series_by_host: dict host -> HostSeries, all sharing bin width, start and length

    Returns:
        PrefixNode: the 0.0.0.0/0 root

    Raises:
        SeriesMismatchError: series not aligned
    """
    hosts = sorted(series_by_host, key=lambda h: int(ipaddress.IPv4Address(h)))
    if not hosts:
        raise SeriesMismatchError("no host series to aggregate")

    template = series_by_host[hosts[0]].up
    for host in hosts:
        hs = series_by_host[host]
        if not (hs.up.aligned_with(template) and hs.down.aligned_with(template)):
            raise SeriesMismatchError(
                f"series of {host} not aligned: {len(hs.up)}/{len(hs.down)} bins "
                f"@{hs.up.bin_width_ms} ms vs {len(template)} @{template.bin_width_ms} ms"
            )

    level_nodes = {int(ipaddress.IPv4Address(h)): _leaf(h, series_by_host[h]) for h in hosts}
    for depth in LEVELS[1:]:
        grouped = {}
        for addr, node in level_nodes.items():
            parent_addr = addr & (0xFFFFFFFF << (32 - depth)) & 0xFFFFFFFF
            octet = _child_octet(addr, depth)
            grouped.setdefault(parent_addr, {})[octet] = node
        level_nodes = {
            parent_addr: _aggregate(
                ipaddress.ip_network((parent_addr, depth)), children, template
            )
            for parent_addr, children in grouped.items()
        }

    root = level_nodes[0]
    logger.info(
        f"Built prefix tree over {len(hosts)} hosts, {len(template)} bins "
        f"@{template.bin_width_ms} ms, {root.up.total_bytes + root.down.total_bytes} bytes"
    )
    return root
