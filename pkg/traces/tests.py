from pathlib import Path
import struct
import tempfile

from django.test import SimpleTestCase
from hypothesis import given, settings, strategies as st

from netreplica.exceptions import ArtifactIOError, ConfigError, TraceParseError
from .decompose import DROP_BOTH_EXTERNAL, DROP_BOTH_INTERNAL, DROP_NON_IPV4, decompose, flatten
from .parsers import TraceFormat, parse_trace
from .records import Direction, IngestConfig, PacketRecord, Protocol, flow_key
from .synthetic import build_frame, generate_trace, write_packet_csv, write_pcap, write_pcapng


def record(ts, src, dst, size, sport=40000, dport=443, protocol=Protocol.TCP, version=4):
    return PacketRecord(ts, src, dst, sport, dport, protocol, size, version)


class WorkDirMixin:
    def setUp(self):
        super().setUp()
        self._tmp = tempfile.TemporaryDirectory()
        self.work = Path(self._tmp.name)

    def tearDown(self):
        self._tmp.cleanup()
        super().tearDown()


class ParseTraceTests(WorkDirMixin, SimpleTestCase):
    packets = [
        record(1.0, "10.0.0.5", "1.2.3.4", 60),
        record(1.25, "1.2.3.4", "10.0.0.5", 1500, sport=443, dport=40000),
        record(2.5, "10.0.0.5", "8.8.8.8", 80, dport=53, protocol=Protocol.UDP),
    ]

    def test_pcap_three_packets(self):
        path = write_pcap(self.work / "three.pcap", self.packets)
        records = parse_trace(path, TraceFormat.PCAP)
        self.assertEqual(len(records), 3)
        self.assertEqual([r.timestamp for r in records], [1.0, 1.25, 2.5])
        self.assertEqual([r.wire_bytes for r in records], [60, 1500, 80])
        self.assertEqual(records[2].protocol, Protocol.UDP)
        self.assertEqual((records[1].src_port, records[1].dst_port), (443, 40000))

    def test_pcap_nanosecond_big_endian(self):
        path = write_pcap(self.work / "ns.pcap", self.packets, nanosecond=True, byteorder=">")
        records = parse_trace(path)
        self.assertEqual([r.src_addr for r in records], [p.src_addr for p in self.packets])
        self.assertAlmostEqual(records[1].timestamp, 1.25, places=9)

    def test_empty_capture(self):
        path = write_pcap(self.work / "empty.pcap", [])
        self.assertEqual(parse_trace(path), [])

    def test_truncated_final_record_reports_offset(self):
        path = write_pcap(self.work / "cut.pcap", self.packets)
        data = path.read_bytes()
        last_offset = 24 + sum(16 + len(build_frame(p)) for p in self.packets[:2])
        path.write_bytes(data[:-5])
        with self.assertRaises(TraceParseError) as ctx:
            parse_trace(path)
        self.assertEqual(ctx.exception.offset, last_offset)
        self.assertIn(f"byte offset {last_offset}", str(ctx.exception))

    def test_truncated_record_header(self):
        path = write_pcap(self.work / "hdr.pcap", self.packets[:1])
        path.write_bytes(path.read_bytes() + b"\x00" * 7)
        with self.assertRaises(TraceParseError) as ctx:
            parse_trace(path)
        self.assertEqual(ctx.exception.offset, 24 + 16 + len(build_frame(self.packets[0])))

    def test_bad_magic(self):
        path = self.work / "junk.pcap"
        path.write_bytes(b"\x00" * 40)
        with self.assertRaises(TraceParseError) as ctx:
            parse_trace(path)
        self.assertEqual(ctx.exception.offset, 0)

    def test_pcapng_keeps_original_length(self):
        path = write_pcapng(self.work / "three.pcapng", self.packets)
        records = parse_trace(path)
        self.assertEqual([r.timestamp for r in records], [1.0, 1.25, 2.5])
        self.assertEqual([r.wire_bytes for r in records], [60, 1500, 80])
        self.assertEqual([r.src_addr for r in records], [p.src_addr for p in self.packets])
        self.assertEqual(records[2].protocol, Protocol.UDP)
        self.assertEqual((records[1].src_port, records[1].dst_port), (443, 40000))

    def test_pcapng_snaplen_truncation(self):
        path = write_pcapng(self.work / "snap.pcapng", self.packets, snaplen=34)
        records = parse_trace(path)
        self.assertEqual([r.wire_bytes for r in records], [60, 1500, 80])
        self.assertEqual(len(path.read_bytes()), 28 + 20 + 3 * (32 + 36))

    def test_pcapng_truncated_block_reports_offset(self):
        path = write_pcapng(self.work / "cut.pcapng", self.packets)
        data = path.read_bytes()
        (last_length,) = struct.unpack("<I", data[-4:])
        last_offset = len(data) - last_length
        path.write_bytes(data[:-5])
        with self.assertRaises(TraceParseError) as ctx:
            parse_trace(path)
        self.assertEqual(ctx.exception.offset, last_offset)
        self.assertIn(f"byte offset {last_offset}", str(ctx.exception))

    def test_missing_file(self):
        with self.assertRaises(ArtifactIOError):
            parse_trace(self.work / "absent.pcap")

    def test_non_ip_frame_kept_as_other(self):
        frames = [b"\xff" * 6 + b"\x02" * 6 + b"\x08\x06" + b"\x00" * 28]
        path = write_pcap(self.work / "arp.pcap", self.packets[:1], frames=frames)
        (arp,) = parse_trace(path)
        self.assertEqual(arp.protocol, Protocol.OTHER)
        self.assertEqual(arp.ip_version, 0)
        self.assertEqual(arp.wire_bytes, 60)

    def test_packet_csv(self):
        path = write_packet_csv(self.work / "trace.csv", self.packets)
        records = parse_trace(path)
        self.assertEqual(records, self.packets)

    def test_packet_csv_bad_line(self):
        path = self.work / "bad.csv"
        path.write_text("1.0,10.0.0.5,1.2.3.4,1,2,tcp,100\n1.1,10.0.0.5,1.2.3.4,1,2,tcp\n")
        with self.assertRaises(TraceParseError) as ctx:
            parse_trace(path)
        self.assertEqual(ctx.exception.line, 2)

    def test_format_from_suffix(self):
        self.assertIs(TraceFormat.from_path("a.csv"), TraceFormat.PACKET_CSV)
        self.assertIs(TraceFormat.from_path("a.pcapng"), TraceFormat.PCAPNG)
        self.assertIs(TraceFormat.from_path("a.pcap"), TraceFormat.PCAP)


class DecomposeTests(SimpleTestCase):
    def setUp(self):
        self.cfg = IngestConfig.from_strings(["10.0.0.0/8"])

    def test_single_host_directions(self):
        records = [
            record(0.0, "10.0.0.5", "1.2.3.4", 100),
            record(0.1, "1.2.3.4", "10.0.0.5", 1500, sport=443, dport=40000),
            record(0.2, "10.0.0.5", "1.2.3.4", 100),
            record(0.3, "1.2.3.4", "10.0.0.5", 1500, sport=443, dport=40000),
        ]
        groups, stats = decompose(records, self.cfg)
        self.assertEqual(list(groups), ["10.0.0.5"])
        directions = [p.direction for p in groups["10.0.0.5"].packets]
        self.assertEqual(directions, [Direction.UP, Direction.DOWN, Direction.UP, Direction.DOWN])
        self.assertEqual(len(groups["10.0.0.5"].flow_keys()), 1)
        self.assertEqual(stats.total_dropped_packets, 0)

    def test_both_internal_dropped(self):
        groups, stats = decompose([record(0.0, "10.0.0.5", "10.0.0.6", 100)], self.cfg)
        self.assertEqual(groups, {})
        self.assertEqual(stats.dropped_packets, {DROP_BOTH_INTERNAL: 1})

    def test_both_internal_kept_when_allowed(self):
        cfg = IngestConfig.from_strings(["10.0.0.0/8"], drop_non_crossing=False)
        groups, _ = decompose([record(0.0, "10.0.0.5", "10.0.0.6", 100)], cfg)
        self.assertEqual(groups["10.0.0.5"].packets[0].direction, Direction.UP)

    def test_both_external_and_ipv6_dropped(self):
        records = [
            record(0.0, "1.1.1.1", "2.2.2.2", 10),
            record(0.1, "2001:db8::1", "2001:db8::2", 20, version=6),
        ]
        _, stats = decompose(records, self.cfg)
        self.assertEqual(stats.dropped_packets, {DROP_BOTH_EXTERNAL: 1, DROP_NON_IPV4: 1})
        self.assertEqual(stats.total_dropped_bytes, 30)

    def test_two_hosts_two_keys(self):
        records = [
            record(0.0, "10.0.0.9", "1.2.3.4", 10),
            record(0.1, "1.2.3.4", "10.0.0.5", 10),
        ]
        groups, _ = decompose(records, self.cfg)
        self.assertEqual(list(groups), ["10.0.0.5", "10.0.0.9"])

    def test_empty_prefix_list_rejected(self):
        with self.assertRaises(ConfigError) as ctx:
            IngestConfig.from_strings([])
        self.assertEqual(ctx.exception.field, "internal_prefix")

    def test_flow_key_is_order_independent(self):
        self.assertEqual(
            flow_key(Protocol.TCP, "10.0.0.5", 40000, "1.2.3.4", 443),
            flow_key(Protocol.TCP, "1.2.3.4", 443, "10.0.0.5", 40000),
        )
        self.assertNotEqual(
            flow_key(Protocol.TCP, "10.0.0.5", 40000, "1.2.3.4", 443),
            flow_key(Protocol.UDP, "10.0.0.5", 40000, "1.2.3.4", 443),
        )

    @settings(max_examples=30, deadline=None)
    @given(
        seed=st.integers(0, 2**16),
        packets=st.integers(0, 400),
        lateral=st.floats(0.0, 0.5),
    )
    def test_conservation_and_idempotence(self, seed, packets, lateral):
        records = generate_trace(packets=packets, seed=seed, non_crossing_fraction=lateral)
        records.append(record(11.0, "3.3.3.3", "4.4.4.4", 77))
        cfg = IngestConfig.from_strings(["10.0.0.0/16"])

        groups, stats = decompose(records, cfg)
        retained = sum(g.total_bytes for g in groups.values())
        self.assertEqual(retained + stats.total_dropped_bytes, sum(r.wire_bytes for r in records))
        self.assertEqual(
            sum(len(g.packets) for g in groups.values()) + stats.total_dropped_packets, len(records)
        )
        for host, group in groups.items():
            self.assertTrue(all(a.timestamp <= b.timestamp for a, b in zip(group.packets, group.packets[1:])))
            self.assertTrue(cfg.is_internal(host))

        again, again_stats = decompose(flatten(groups), cfg)
        self.assertEqual(again, groups)
        self.assertEqual(again_stats.total_dropped_packets, 0)
