import logging

import numpy as np

logger = logging.getLogger("simulator")

NS_PER_MS = 1_000_000
MIN_PACKET_BYTES = 64


def bin_packet_sizes(total, mtu, min_packet=MIN_PACKET_BYTES):
    """
    Split one bin's bytes into packet sizes summing to `total`.

    MTU-sized packets first; a remainder under min_packet is topped up
    from the preceding packet so both stay within [min_packet, mtu].
    """
    if total <= 0:
        return []
    full, remainder = divmod(int(total), int(mtu))
    sizes = [int(mtu)] * full
    if remainder:
        if remainder < min_packet and sizes:
            sizes[-1] -= min_packet - remainder
            remainder = min_packet
        sizes.append(remainder)
    return sizes


def replay_schedule(ctp, mtu):
    """
    Emission times and sizes replaying a profile's bins.

    Each bin's packets are paced uniformly from the start of the bin,
    packet i of n leaving at bin_start + i * bin / n.

    Returns:
        tuple: (offsets_ns, sizes) int64 arrays relative to the profile start
    """
    bin_ns = int(ctp.bin_width_ms) * NS_PER_MS
    offsets, sizes = [], []
    for index, total in enumerate(ctp.bins.tolist()):
        packets = bin_packet_sizes(total, mtu)
        start = index * bin_ns
        n = len(packets)
        offsets.extend(start + i * bin_ns // n for i in range(n))
        sizes.extend(packets)
    return np.asarray(offsets, dtype=np.int64), np.asarray(sizes, dtype=np.int64)


class CrossTrafficSource:
    """
    Open-loop cross traffic looping a profile's schedule until `end_ns`.

    Packets are spread over max(1, flow_count) synthetic flows numbered
    from 1, drawn from the simulation's generator.
    """

    def __init__(self, ctp, mtu, end_ns, rng):
        self.offsets, self.sizes = replay_schedule(ctp, mtu)
        self.period_ns = int(ctp.bin_width_ms) * NS_PER_MS * len(ctp.bins)
        self.end_ns = end_ns
        flows = max(1, int(ctp.metrics.flow_count))
        self.flows = rng.integers(1, flows + 1, size=len(self.sizes)) if len(self.sizes) else np.empty(0, dtype=np.int64)
        self.index = 0
        self.loop_start = 0
        self.scheduled_bytes = int(self.sizes.sum()) if len(self.sizes) else 0

    def peek(self):
        """Time of the next emission, or None when exhausted."""
        if not len(self.sizes) or self.period_ns <= 0:
            return None
        when = self.loop_start + int(self.offsets[self.index])
        return when if when < self.end_ns else None

    def pop(self):
        """(time_ns, size, flow) of the next emission."""
        when = self.loop_start + int(self.offsets[self.index])
        emission = (when, int(self.sizes[self.index]), int(self.flows[self.index]))
        self.index += 1
        if self.index == len(self.sizes):
            self.index = 0
            self.loop_start += self.period_ns
        return emission
