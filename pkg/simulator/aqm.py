"""
Queueing disciplines for the bottleneck.

Every policy exposes enqueue(packet, now) -> bool (False when the packet
was dropped on arrival), dequeue(now) -> packet or None, len() and
iteration over the queued packets. Packets dropped at dequeue time are
reported through the `on_drop(packet, now)` callback given at construction.
"""
from collections import deque
import itertools
import math

from .config import AQM

CODEL_TARGET_NS = 5_000_000
CODEL_INTERVAL_NS = 100_000_000
FQ_BUCKETS = 1024
ETHERNET_HEADER_BYTES = 14


class Packet:
    __slots__ = ("flow", "size", "seq", "sent_ns", "enqueued_ns", "is_app", "retransmit")

    def __init__(self, flow, size, seq=-1, sent_ns=0, is_app=False, retransmit=False):
        self.flow = flow
        self.size = size
        self.seq = seq
        self.sent_ns = sent_ns
        self.enqueued_ns = 0
        self.is_app = is_app
        self.retransmit = retransmit


def flow_bucket(flow, buckets=FQ_BUCKETS):
    """Multiplicative (Fibonacci) hash of a flow key onto `buckets` slots."""
    return ((flow * 0x9E3779B1) & 0xFFFFFFFF) * buckets >> 32


def _ignore_drop(packet, now):
    pass


class PFIFO:
    """Tail drop once `capacity` packets are queued."""

    def __init__(self, capacity, on_drop=_ignore_drop):
        self.capacity = capacity
        self.on_drop = on_drop
        self.packets = deque()

    def __len__(self):
        return len(self.packets)

    def __iter__(self):
        return iter(self.packets)

    def enqueue(self, packet, now):
        if len(self.packets) >= self.capacity:
            return False
        packet.enqueued_ns = now
        self.packets.append(packet)
        return True

    def dequeue(self, now):
        return self.packets.popleft() if self.packets else None


class CoDelQueue:
    """
    Controlled-delay queue.

    Packets whose sojourn time stays above `target` for a full `interval`
    start a dropping state in which the next drop is scheduled
    interval / sqrt(count) after the previous one.
    """

    def __init__(self, mtu, on_drop=_ignore_drop, capacity=None, target_ns=CODEL_TARGET_NS, interval_ns=CODEL_INTERVAL_NS):
        self.mtu = mtu
        self.on_drop = on_drop
        self.capacity = capacity
        self.target_ns = target_ns
        self.interval_ns = interval_ns
        self.packets = deque()
        self.backlog_bytes = 0
        self.first_above_ns = 0
        self.drop_next_ns = 0
        self.count = 0
        self.last_count = 0
        self.dropping = False

    def __len__(self):
        return len(self.packets)

    def __iter__(self):
        return iter(self.packets)

    def enqueue(self, packet, now):
        if self.capacity is not None and len(self.packets) >= self.capacity:
            return False
        packet.enqueued_ns = now
        self.packets.append(packet)
        self.backlog_bytes += packet.size
        return True

    def pop_head(self):
        packet = self.packets.popleft()
        self.backlog_bytes -= packet.size
        return packet

    def _control_law(self, t):
        return t + int(self.interval_ns / math.sqrt(self.count))

    def _do_dequeue(self, now):
        if not self.packets:
            self.first_above_ns = 0
            return None, False
        packet = self.pop_head()
        ok_to_drop = False
        if now - packet.enqueued_ns < self.target_ns or self.backlog_bytes <= self.mtu:
            self.first_above_ns = 0
        elif self.first_above_ns == 0:
            self.first_above_ns = now + self.interval_ns
        elif now >= self.first_above_ns:
            ok_to_drop = True
        return packet, ok_to_drop

    def dequeue(self, now):
        packet, ok_to_drop = self._do_dequeue(now)
        if packet is None:
            self.dropping = False
            return None
        if self.dropping:
            if not ok_to_drop:
                self.dropping = False
            while self.dropping and now >= self.drop_next_ns:
                self.on_drop(packet, now)
                self.count += 1
                packet, ok_to_drop = self._do_dequeue(now)
                if packet is None or not ok_to_drop:
                    self.dropping = False
                else:
                    self.drop_next_ns = self._control_law(self.drop_next_ns)
        elif ok_to_drop:
            self.on_drop(packet, now)
            packet, _ = self._do_dequeue(now)
            self.dropping = True
            delta = self.count - self.last_count
            if delta > 1 and now - self.drop_next_ns < 16 * self.interval_ns:
                self.count = delta
            else:
                self.count = 1
            self.drop_next_ns = self._control_law(now)
            self.last_count = self.count
        return packet


class _FlowQueue(CoDelQueue):
    def __init__(self, mtu, on_drop):
        super().__init__(mtu, on_drop)
        self.deficit = 0
        self.listed = False


class FQCoDel:
    """
    Flow-queuing CoDel: per-bucket CoDel served by deficit round robin.

    New flows are served ahead of old ones. When the shared limit is
    exceeded the head packet of the largest bucket is dropped.
    """

    def __init__(self, capacity, mtu, on_drop=_ignore_drop, buckets=FQ_BUCKETS):
        self.capacity = capacity
        self.quantum = mtu + ETHERNET_HEADER_BYTES
        self.on_drop = on_drop
        self.buckets = [_FlowQueue(mtu, on_drop) for _ in range(buckets)]
        self.new_flows = deque()
        self.old_flows = deque()
        self.length = 0

    def __len__(self):
        return self.length

    def __iter__(self):
        return itertools.chain.from_iterable(self.buckets)

    def enqueue(self, packet, now):
        queue = self.buckets[flow_bucket(packet.flow, len(self.buckets))]
        queue.enqueue(packet, now)
        self.length += 1
        if not queue.listed:
            queue.listed = True
            queue.deficit = self.quantum
            self.new_flows.append(queue)
        if self.length > self.capacity:
            fattest = max(self.buckets, key=lambda q: q.backlog_bytes)
            victim = fattest.pop_head()
            self.length -= 1
            if victim is packet:
                return False
            self.on_drop(victim, now)
        return True

    def dequeue(self, now):
        while True:
            if self.new_flows:
                flows = self.new_flows
            elif self.old_flows:
                flows = self.old_flows
            else:
                return None
            queue = flows[0]
            if queue.deficit <= 0:
                queue.deficit += self.quantum
                flows.popleft()
                self.old_flows.append(queue)
                continue
            before = len(queue)
            packet = queue.dequeue(now)
            self.length -= before - len(queue)
            if packet is None:
                flows.popleft()
                if flows is self.new_flows and self.old_flows:
                    self.old_flows.append(queue)
                else:
                    queue.listed = False
                continue
            queue.deficit -= packet.size
            return packet


def make_queue(aqm, capacity, mtu, on_drop=_ignore_drop):
    if aqm is AQM.PFIFO:
        return PFIFO(capacity, on_drop)
    if aqm is AQM.CODEL:
        return CoDelQueue(mtu, on_drop, capacity=capacity)
    return FQCoDel(capacity, mtu, on_drop)
