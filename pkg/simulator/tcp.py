"""Reno-style AIMD sender state for the bulk application flow."""

MIN_RTO_NS = 200_000_000
INITIAL_RTO_NS = 3_000_000_000
MAX_RTO_NS = 60_000_000_000
DUPACK_THRESHOLD = 3


class BulkSender:
    """
    Window and loss-recovery state of an always-backlogged sender.

    Sequence numbers count packets. Slow start grows cwnd by one packet per
    acknowledged packet until ssthresh; congestion avoidance adds one
    packet per window. Three duplicate ACKs halve the window once per
    recovery episode (NewReno partial-ACK retransmission); a timeout
    collapses cwnd to one packet and resends from the first unacknowledged
    packet.
    """

    def __init__(self, initial_cwnd, initial_ssthresh):
        self.cwnd = float(initial_cwnd)
        self.ssthresh = float(initial_ssthresh)
        self.next_seq = 0
        self.high_seq = 0
        self.snd_una = 0
        self.dupacks = 0
        self.in_recovery = False
        self.recover = -1
        self.srtt_ns = None
        self.rttvar_ns = None
        self.rto_ns = INITIAL_RTO_NS
        self.rto_deadline = None
        self.timeouts = 0
        self.fast_retransmits = 0

    @property
    def outstanding(self):
        return self.next_seq - self.snd_una

    def can_send(self):
        return self.outstanding < self.cwnd

    def is_retransmission(self, seq):
        return seq < self.high_seq

    def sent(self, seq):
        if seq >= self.high_seq:
            self.high_seq = seq + 1

    def rtt_sample(self, rtt_ns):
        if self.srtt_ns is None:
            self.srtt_ns = float(rtt_ns)
            self.rttvar_ns = rtt_ns / 2.0
        else:
            self.rttvar_ns = 0.75 * self.rttvar_ns + 0.25 * abs(self.srtt_ns - rtt_ns)
            self.srtt_ns = 0.875 * self.srtt_ns + 0.125 * rtt_ns
        self.rto_ns = max(MIN_RTO_NS, int(self.srtt_ns + 4 * self.rttvar_ns))

    def on_ack(self, ack):
        """
        Process a cumulative ACK (next expected sequence number).

        Returns:
            tuple: (sequence to retransmit or None, whether new data was acknowledged)
        """
        if ack > self.snd_una:
            acked = ack - self.snd_una
            self.snd_una = ack
            if self.next_seq < ack:
                self.next_seq = ack
            if self.in_recovery:
                if ack > self.recover:
                    self.in_recovery = False
                    self.cwnd = self.ssthresh
                    self.dupacks = 0
                    return None, True
                self.cwnd = max(self.cwnd - acked + 1, 1.0)
                return ack, True
            self.dupacks = 0
            if self.cwnd < self.ssthresh:
                self.cwnd += acked
            else:
                self.cwnd += acked / self.cwnd
            return None, True

        if ack == self.snd_una and self.outstanding > 0:
            self.dupacks += 1
            if self.in_recovery:
                self.cwnd += 1
            elif self.dupacks == DUPACK_THRESHOLD and self.snd_una > self.recover:
                self.ssthresh = max(self.cwnd / 2, 2.0)
                self.cwnd = self.ssthresh + DUPACK_THRESHOLD
                self.recover = self.high_seq - 1
                self.in_recovery = True
                self.fast_retransmits += 1
                return self.snd_una, False
        return None, False

    def on_timeout(self):
        self.ssthresh = max(self.cwnd / 2, 2.0)
        self.cwnd = 1.0
        self.in_recovery = False
        self.dupacks = 0
        self.recover = self.high_seq - 1
        self.next_seq = self.snd_una
        self.rto_ns = min(self.rto_ns * 2, MAX_RTO_NS)
        self.timeouts += 1
