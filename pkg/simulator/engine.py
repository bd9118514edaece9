import heapq
import logging
import time

import numpy as np

from .aqm import PFIFO, Packet, make_queue
from .config import Scenario
from .link import Link
from .schedule import CrossTrafficSource
from .tcp import BulkSender
from .telemetry import TelemetryRecorder

logger = logging.getLogger("simulator")

HEADER_BYTES = 40
ACK_BYTES = 40
APP_FLOW = 0

START, SERVICE, ACK, TIMEOUT, UPLINK_ARRIVE, UPLINK_SERVICE = range(6)


class Simulation:
    """
    One bottleneck, one closed-loop bulk flow, optional open-loop cross traffic.

    Data and cross-traffic packets share the downlink shaper and queue;
    the receiver's cumulative ACKs return over the uplink, which is only
    shaped when the bottleneck asks for it. Time is integer nanoseconds
    and every random draw comes from one generator seeded by the app flow.
    """

    def __init__(self, scenario):
        self.scenario = scenario
        bottleneck, app = scenario.bottleneck, scenario.app
        self.rng = np.random.default_rng(app.seed)
        self.end_ns = app.duration_ns
        self.half_down_ns = bottleneck.latency_ns // 2
        self.half_up_ns = bottleneck.latency_ns - self.half_down_ns
        self.mtu = bottleneck.mtu_bytes
        self.payload_bytes = bottleneck.mtu_bytes - HEADER_BYTES
        self.recorder = TelemetryRecorder(self.end_ns, scenario.telemetry_bin_ms)

        queue = make_queue(bottleneck.aqm, bottleneck.queue_capacity_pkts, self.mtu, self._dropped_downlink)
        self.downlink = Link("downlink", bottleneck.shaping_rate_bps, bottleneck.token_bucket_burst_bytes, self.mtu, queue)
        self.uplink = None
        if bottleneck.shape_uplink:
            ack_queue = PFIFO(bottleneck.queue_capacity_pkts, self._dropped_uplink)
            self.uplink = Link("uplink", bottleneck.shaping_rate_bps, bottleneck.token_bucket_burst_bytes, self.mtu, ack_queue)
        self.ack_drops = 0

        self.sender = BulkSender(app.initial_cwnd_pkts, app.init_ssthresh_pkts)
        self.timer_pending = False
        self.expected = 0
        self.out_of_order = set()

        self.cross = None
        ctp = scenario.ctp
        if ctp is not None and int(ctp.bins.sum()) > 0:
            self.cross = CrossTrafficSource(ctp, self.mtu, self.end_ns, self.rng)

        self.events = []
        self.sequence = 0
        jitter_ns = int(round(app.start_jitter_ms * 1_000_000))
        start_ns = int(self.rng.integers(0, jitter_ns + 1)) if jitter_ns > 0 else 0
        self.schedule(start_ns, START)

    def schedule(self, when, kind, data=None):
        self.sequence += 1
        heapq.heappush(self.events, (when, self.sequence, kind, data))

    # downlink

    def _dropped_downlink(self, packet, now):
        self.recorder.dropped(packet, now)

    def _dropped_uplink(self, packet, now):
        self.ack_drops += 1

    def _arrive_downlink(self, packet, now):
        self.recorder.injected(packet)
        queue = self.downlink.queue
        if not queue.enqueue(packet, now):
            self.recorder.dropped(packet, now)
            return
        self.recorder.queue_changed(now, len(queue))
        self._kick(self.downlink, now, SERVICE)

    def _kick(self, link, now, kind):
        if not link.service_pending and len(link.queue):
            link.service_pending = True
            self.schedule(link.bucket.ready_at(now), kind)

    def _serve(self, link, now, kind):
        link.service_pending = False
        ready = link.bucket.ready_at(now)
        if ready > now:
            link.service_pending = True
            self.schedule(ready, kind)
            return
        packet = link.queue.dequeue(now)
        if link is self.downlink:
            self.recorder.queue_changed(now, len(link.queue))
        if packet is not None:
            link.bucket.consume(packet.size)
            if link is self.downlink:
                self._arrive_receiver(packet, now + self.half_down_ns)
            else:
                self.schedule(now + self.half_up_ns, ACK, packet)
        self._kick(link, now, kind)

    # receiver

    def _arrive_receiver(self, packet, when):
        if when >= self.end_ns:
            self.recorder.stranded(packet)
            return
        if not packet.is_app:
            self.recorder.delivered(packet, when, 0)
            return
        seq = packet.seq
        fresh = seq >= self.expected and seq not in self.out_of_order
        self.recorder.delivered(packet, when, self.payload_bytes if fresh else 0)
        if seq == self.expected:
            self.expected += 1
            while self.expected in self.out_of_order:
                self.out_of_order.remove(self.expected)
                self.expected += 1
        elif seq > self.expected:
            self.out_of_order.add(seq)
        ack = Packet(APP_FLOW, ACK_BYTES, seq=self.expected, sent_ns=packet.sent_ns, is_app=True, retransmit=packet.retransmit)
        if self.uplink is not None:
            self.schedule(when, UPLINK_ARRIVE, ack)
        else:
            self.schedule(when + self.half_up_ns, ACK, ack)

    def _arrive_uplink(self, ack, now):
        if self.uplink.queue.enqueue(ack, now):
            self._kick(self.uplink, now, UPLINK_SERVICE)
        else:
            self.ack_drops += 1

    # sender

    def _transmit(self, seq, now):
        sender = self.sender
        packet = Packet(APP_FLOW, self.mtu, seq=seq, sent_ns=now, is_app=True, retransmit=sender.is_retransmission(seq))
        sender.sent(seq)
        self._arrive_downlink(packet, now)

    def _send(self, now):
        sender = self.sender
        while sender.can_send():
            self._transmit(sender.next_seq, now)
            sender.next_seq += 1
        self._arm_timer(now, restart=False)

    def _arm_timer(self, now, restart):
        sender = self.sender
        if sender.outstanding <= 0:
            sender.rto_deadline = None
            return
        if restart or sender.rto_deadline is None:
            sender.rto_deadline = now + sender.rto_ns
        if not self.timer_pending:
            self.timer_pending = True
            self.schedule(sender.rto_deadline, TIMEOUT)

    def _on_ack(self, ack, now):
        sender = self.sender
        if not ack.retransmit:
            rtt_ns = now - ack.sent_ns
            self.recorder.rtt_sample(now, rtt_ns)
            sender.rtt_sample(rtt_ns)
        retransmit, progressed = sender.on_ack(ack.seq)
        if retransmit is not None:
            self._transmit(retransmit, now)
        if progressed:
            self._arm_timer(now, restart=True)
        self._send(now)

    def _on_timeout(self, now):
        self.timer_pending = False
        sender = self.sender
        deadline = sender.rto_deadline
        if deadline is None:
            return
        if now < deadline:
            self.timer_pending = True
            self.schedule(deadline, TIMEOUT)
            return
        sender.on_timeout()
        sender.rto_deadline = None
        self._send(now)

    def run(self):
        events = self.events
        cross = self.cross
        next_cross = cross.peek() if cross is not None else None
        end_ns = self.end_ns
        while True:
            next_event = events[0][0] if events else None
            if next_cross is not None and (next_event is None or next_cross <= next_event):
                when, size, flow = cross.pop()
                self._arrive_downlink(Packet(flow, size), when)
                next_cross = cross.peek()
                continue
            if next_event is None or next_event >= end_ns:
                break
            now, _, kind, data = heapq.heappop(events)
            if kind == SERVICE:
                self._serve(self.downlink, now, SERVICE)
            elif kind == ACK:
                self._on_ack(data, now)
            elif kind == UPLINK_ARRIVE:
                self._arrive_uplink(data, now)
            elif kind == UPLINK_SERVICE:
                self._serve(self.uplink, now, UPLINK_SERVICE)
            elif kind == TIMEOUT:
                self._on_timeout(now)
            elif kind == START:
                self._send(now)
        for packet in self.downlink.queue:
            self.recorder.stranded(packet)
        return self.recorder.finish(self.scenario.echo())


def run_scenario(scenario):
    """
    Run one scenario to completion.

    Returns:
        SimTrace: telemetry at scenario.telemetry_bin_ms granularity
    """
    started = time.perf_counter()
    simulation = Simulation(scenario)
    trace = simulation.run()
    sender = simulation.sender
    logger.debug(
        f"Simulated {scenario.app.duration_s} s at {scenario.bottleneck.shaping_rate_bps:.0f} bps "
        f"({scenario.bottleneck.aqm.value}) in {time.perf_counter() - started:.2f} s: "
        f"{sender.fast_retransmits} fast retransmits, {sender.timeouts} timeouts"
    )
    return trace


def simulate(bottleneck, app, ctp=None, telemetry_bin_ms=100):
    return run_scenario(Scenario(bottleneck, app, ctp, telemetry_bin_ms))
