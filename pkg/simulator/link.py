import math


class TokenBucket:
    """
    Byte token bucket refilled at rate_bps, capped at burst_bytes.

    A packet may leave once the bucket holds at least `threshold` bytes
    (one MTU), so departures never exceed rate * t + burst over any
    interval t.
    """

    __slots__ = ("bytes_per_ns", "burst", "threshold", "tokens", "updated_ns")

    def __init__(self, rate_bps, burst_bytes, threshold_bytes):
        self.bytes_per_ns = rate_bps / 8e9
        self.burst = float(burst_bytes)
        self.threshold = float(threshold_bytes)
        self.tokens = float(burst_bytes)
        self.updated_ns = 0

    def refill(self, now):
        if now > self.updated_ns:
            self.tokens = min(self.burst, self.tokens + (now - self.updated_ns) * self.bytes_per_ns)
            self.updated_ns = now

    def ready_at(self, now):
        """Earliest time >= now at which the bucket reaches the threshold."""
        self.refill(now)
        missing = self.threshold - self.tokens
        if missing <= 0:
            return now
        return now + math.ceil(missing / self.bytes_per_ns)

    def consume(self, size):
        self.tokens -= size


class Link:
    """A shaped egress: token bucket in front of a queueing discipline."""

    def __init__(self, name, rate_bps, burst_bytes, mtu, queue):
        self.name = name
        self.bucket = TokenBucket(rate_bps, burst_bytes, mtu)
        self.queue = queue
        self.service_pending = False

    def __len__(self):
        return len(self.queue)
