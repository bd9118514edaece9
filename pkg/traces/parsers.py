"""
Capture readers producing PacketRecords in capture order.

Supported inputs: classic libpcap (micro/nanosecond magic, both byte
orders), pcapng enhanced, simple and obsolete packet blocks, and the plain PACKET_CSV format
`timestamp,src,dst,sport,dport,proto,bytes`.
"""
from enum import Enum
from pathlib import Path
import csv
import ipaddress
import logging
import socket
import struct

import dpkt

from netreplica.exceptions import ArtifactIOError, TraceParseError
from .records import PacketRecord, Protocol

logger = logging.getLogger("traces")

PCAP_GLOBAL_HEADER = 24
PCAP_RECORD_HEADER = 16
MAX_CAPLEN = 262144

# magic -> (byte order, timestamp fraction divisor)
PCAP_MAGICS = {
    b"\xd4\xc3\xb2\xa1": ("<", 1e6),
    b"\xa1\xb2\xc3\xd4": (">", 1e6),
    b"\x4d\x3c\xb2\xa1": ("<", 1e9),
    b"\xa1\xb2\x3c\x4d": (">", 1e9),
}
PCAPNG_MAGIC = b"\x0a\x0d\x0d\x0a"
PCAPNG_BYTE_ORDERS = {b"\x4d\x3c\x2b\x1a": "<", b"\x1a\x2b\x3c\x4d": ">"}
PCAPNG_MIN_BLOCK = 12
PCAPNG_BT_SHB = 0x0A0D0D0A
PCAPNG_BT_IDB = 1
PCAPNG_BT_PB = 2
PCAPNG_BT_SPB = 3
PCAPNG_BT_EPB = 6
# block type -> dpkt.pcapng class name; the little-endian variant adds "LE"
PCAPNG_BLOCK_CLASSES = {
    PCAPNG_BT_SHB: "SectionHeaderBlock",
    PCAPNG_BT_IDB: "InterfaceDescriptionBlock",
    PCAPNG_BT_PB: "PacketBlock",
    PCAPNG_BT_EPB: "EnhancedPacketBlock",
}

LINKTYPE_ETHERNET = 1
LINKTYPE_RAW = (101, 228, 12)
LINKTYPE_LINUX_SLL = 113

CSV_COLUMNS = ("timestamp", "src", "dst", "sport", "dport", "proto", "bytes")


class TraceFormat(str, Enum):
    PCAP = "PCAP"
    PCAPNG = "PCAPNG"
    PACKET_CSV = "PACKET_CSV"

    @classmethod
    def from_path(cls, path):
        suffix = Path(path).suffix.lower()
        if suffix == ".csv":
            return cls.PACKET_CSV
        if suffix == ".pcapng":
            return cls.PCAPNG
        return cls.PCAP


def parse_trace(path, format=None):
    """
    Parse a capture file into PacketRecords.

    Args:
        path: capture file path
        format: TraceFormat (or its name); guessed from the suffix when None

    Returns:
        list: PacketRecords in capture order

    Raises:
        TraceParseError: malformed file (byte offset or line number attached)
        ArtifactIOError: file missing or unreadable
    """
    path = Path(path)
    trace_format = TraceFormat(format.upper()) if isinstance(format, str) else format
    trace_format = trace_format or TraceFormat.from_path(path)

    if not path.is_file():
        raise ArtifactIOError(f"trace file not found: {path}")

    if trace_format is TraceFormat.PACKET_CSV:
        records = _parse_packet_csv(path)
    elif trace_format is TraceFormat.PCAPNG:
        records = _parse_pcapng(path)
    else:
        records = _parse_pcap(path)

    _warn_if_unordered(path, records)
    logger.info(f"Parsed {len(records)} packets from {path.name} ({trace_format.value})")
    return records


def _warn_if_unordered(path, records):
    regressions = sum(1 for a, b in zip(records, records[1:]) if b.timestamp < a.timestamp)
    if regressions:
        logger.warning(f"{path.name}: {regressions} timestamp regressions kept in capture order")


def _parse_packet_csv(path):
    records = []
    with open(path, newline="") as handle:
        for line_no, row in enumerate(csv.reader(handle), start=1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if row[0].strip().startswith("#"):
                continue
            if line_no == 1 and row[0].strip().lower() == "timestamp":
                continue
            if len(row) != len(CSV_COLUMNS):
                raise TraceParseError(
                    f"expected {len(CSV_COLUMNS)} columns, found {len(row)}", line=line_no
                )
            try:
                records.append(_csv_record(row))
            except ValueError as exc:
                raise TraceParseError(str(exc), line=line_no) from exc
    return records


def _csv_record(row):
    timestamp, src, dst, sport, dport, proto, wire = (cell.strip() for cell in row)
    src_ip = ipaddress.ip_address(src)
    dst_ip = ipaddress.ip_address(dst)
    if src_ip.version != dst_ip.version:
        raise ValueError("mixed address families")
    wire_bytes = int(wire)
    if wire_bytes < 0:
        raise ValueError("bytes must be >= 0")
    protocol = Protocol.from_token(proto)
    src_port, dst_port = int(sport or 0), int(dport or 0)
    for port in (src_port, dst_port):
        if not 0 <= port <= 65535:
            raise ValueError(f"port {port} out of range")
    return PacketRecord(
        timestamp=float(timestamp),
        src_addr=str(src_ip),
        dst_addr=str(dst_ip),
        src_port=src_port,
        dst_port=dst_port,
        protocol=protocol,
        wire_bytes=wire_bytes,
        ip_version=src_ip.version,
    )


def _parse_pcap(path):
    data = path.read_bytes()
    if len(data) < PCAP_GLOBAL_HEADER:
        raise TraceParseError("truncated pcap global header", offset=0)

    magic = data[:4]
    if magic == PCAPNG_MAGIC:
        return _parse_pcapng(path)
    if magic not in PCAP_MAGICS:
        raise TraceParseError(f"unknown pcap magic 0x{magic.hex()}", offset=0)

    order, ts_divisor = PCAP_MAGICS[magic]
    linktype = struct.unpack(order + "I", data[20:24])[0] & 0x0FFFFFFF
    record_header = struct.Struct(order + "IIII")

    records = []
    offset = PCAP_GLOBAL_HEADER
    while offset < len(data):
        if len(data) - offset < PCAP_RECORD_HEADER:
            raise TraceParseError("truncated packet record header", offset=offset)
        ts_sec, ts_frac, incl_len, orig_len = record_header.unpack_from(data, offset)
        if incl_len > MAX_CAPLEN:
            raise TraceParseError(f"captured length {incl_len} exceeds {MAX_CAPLEN}", offset=offset)
        body_start = offset + PCAP_RECORD_HEADER
        if body_start + incl_len > len(data):
            raise TraceParseError("truncated packet record", offset=offset)
        frame = data[body_start : body_start + incl_len]
        records.append(decode_frame(ts_sec + ts_frac / ts_divisor, frame, orig_len, linktype))
        offset = body_start + incl_len
    return records


def _parse_pcapng(path):
    """
    Walk pcapng blocks, decoding each with dpkt's block classes.

    Enhanced, simple and obsolete packet blocks report the packet's original
    length as wire_bytes, so snaplen-limited captures keep their full size.
    Simple packet blocks carry no timestamp and take the previous packet's.
    """
    data = path.read_bytes()
    if not data:
        raise TraceParseError("empty pcapng file", offset=0)
    records = []
    interfaces = []
    order = None
    offset = 0
    while offset < len(data):
        if len(data) - offset < PCAPNG_MIN_BLOCK:
            raise TraceParseError("truncated pcapng block header", offset=offset)
        if data[offset : offset + 4] == PCAPNG_MAGIC:
            bom = data[offset + 8 : offset + 12]
            if bom not in PCAPNG_BYTE_ORDERS:
                raise TraceParseError(f"unknown pcapng byte order 0x{bom.hex()}", offset=offset)
            order = PCAPNG_BYTE_ORDERS[bom]
            interfaces = []
        elif order is None:
            raise TraceParseError("pcapng file does not start with a section header", offset=offset)

        block_type, block_len = struct.unpack_from(order + "II", data, offset)
        if block_len < PCAPNG_MIN_BLOCK or block_len % 4:
            raise TraceParseError(f"bad pcapng block length {block_len}", offset=offset)
        if offset + block_len > len(data):
            raise TraceParseError("truncated pcapng block", offset=offset)
        block = data[offset : offset + block_len]
        try:
            if block_type == PCAPNG_BT_SHB:
                shb = _pcapng_block(block_type, block, order)
                if shb.v_major != 1:
                    raise TraceParseError(f"unsupported pcapng version {shb.v_major}.{shb.v_minor}", offset=offset)
            elif block_type == PCAPNG_BT_IDB:
                interfaces.append(_PcapngInterface.from_block(_pcapng_block(block_type, block, order), order))
            elif block_type in (PCAPNG_BT_EPB, PCAPNG_BT_PB):
                packet = _pcapng_block(block_type, block, order)
                interface = _interface(interfaces, packet.iface_id, offset)
                timestamp = interface.timestamp(packet.ts_high, packet.ts_low)
                records.append(decode_frame(timestamp, packet.pkt_data, packet.pkt_len, interface.linktype))
            elif block_type == PCAPNG_BT_SPB:
                interface = _interface(interfaces, 0, offset)
                (pkt_len,) = struct.unpack_from(order + "I", block, 8)
                captured = min(pkt_len, interface.snaplen or pkt_len, block_len - 16)
                frame = block[12 : 12 + captured]
                timestamp = records[-1].timestamp if records else 0.0
                records.append(decode_frame(timestamp, frame, pkt_len, interface.linktype))
        except (dpkt.UnpackError, ValueError, struct.error) as exc:
            raise TraceParseError(f"malformed pcapng block ({exc})", offset=offset) from exc
        offset += block_len
    return records


def _pcapng_block(block_type, block, order):
    name = PCAPNG_BLOCK_CLASSES[block_type] + ("LE" if order == "<" else "")
    return getattr(dpkt.pcapng, name)(block)


class _PcapngInterface:
    """Link type, snaplen and clock of one pcapng interface description."""

    def __init__(self, linktype, snaplen, divisor, ts_offset):
        self.linktype = linktype
        self.snaplen = snaplen
        self.divisor = divisor
        self.ts_offset = ts_offset

    @classmethod
    def from_block(cls, idb, order):
        divisor, ts_offset = 1e6, 0
        for opt in idb.opts:
            if opt.code == dpkt.pcapng.PCAPNG_OPT_IF_TSRESOL:
                resolution = opt.data[0]
                exponent = resolution & 0x7F
                divisor = float(2**exponent if resolution & 0x80 else 10**exponent)
            elif opt.code == dpkt.pcapng.PCAPNG_OPT_IF_TSOFFSET:
                (ts_offset,) = struct.unpack(order + "q", opt.data[:8])
        return cls(idb.linktype, idb.snaplen, divisor, ts_offset)

    def timestamp(self, high, low):
        return self.ts_offset + ((high << 32) | low) / self.divisor


def _interface(interfaces, index, offset):
    if index >= len(interfaces):
        raise TraceParseError(f"packet refers to undeclared interface {index}", offset=offset)
    return interfaces[index]


def decode_frame(timestamp, frame, wire_bytes, linktype=LINKTYPE_ETHERNET):
    """
    Dissect one link-layer frame into a PacketRecord.

    Frames that cannot be dissected are kept as protocol OTHER with
    ip_version 0, so their bytes remain visible to decomposition stats.
    """
    try:
        network = _network_layer(frame, linktype)
    except (dpkt.UnpackError, struct.error, ValueError):
        network = None

    if isinstance(network, dpkt.ip.IP):
        src, dst = socket.inet_ntoa(network.src), socket.inet_ntoa(network.dst)
        protocol, sport, dport = _transport(network.p, network.data)
        return PacketRecord(timestamp, src, dst, sport, dport, protocol, wire_bytes, 4)
    if isinstance(network, dpkt.ip6.IP6):
        src = socket.inet_ntop(socket.AF_INET6, network.src)
        dst = socket.inet_ntop(socket.AF_INET6, network.dst)
        protocol, sport, dport = _transport(network.nxt, network.data)
        return PacketRecord(timestamp, src, dst, sport, dport, protocol, wire_bytes, 6)
    return PacketRecord(timestamp, "0.0.0.0", "0.0.0.0", 0, 0, Protocol.OTHER, wire_bytes, 0)


def _network_layer(frame, linktype):
    if linktype == LINKTYPE_ETHERNET:
        return dpkt.ethernet.Ethernet(frame).data
    if linktype == LINKTYPE_LINUX_SLL:
        return dpkt.sll.SLL(frame).data
    if linktype in LINKTYPE_RAW and frame:
        version = frame[0] >> 4
        if version == 4:
            return dpkt.ip.IP(frame)
        if version == 6:
            return dpkt.ip6.IP6(frame)
    return None


def _transport(proto_number, payload):
    if proto_number == dpkt.ip.IP_PROTO_TCP:
        protocol = Protocol.TCP
    elif proto_number == dpkt.ip.IP_PROTO_UDP:
        protocol = Protocol.UDP
    else:
        return Protocol.OTHER, 0, 0

    if isinstance(payload, (dpkt.tcp.TCP, dpkt.udp.UDP)):
        return protocol, payload.sport, payload.dport
    raw = bytes(payload)
    if len(raw) >= 4:
        sport, dport = struct.unpack("!HH", raw[:4])
        return protocol, sport, dport
    return protocol, 0, 0
