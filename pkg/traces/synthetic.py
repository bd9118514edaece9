"""Deterministic synthetic traces for tests, demos and benchmarks."""
from pathlib import Path
import csv
import socket
import struct

import dpkt
import numpy as np

from .records import PacketRecord, Protocol


def write_packet_csv(path, records, header=True):
    """Write records in PACKET_CSV format."""
    path = Path(path)
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        if header:
            writer.writerow(["timestamp", "src", "dst", "sport", "dport", "proto", "bytes"])
        for r in records:
            writer.writerow(
                [repr(r.timestamp), r.src_addr, r.dst_addr, r.src_port, r.dst_port, r.protocol.value, r.wire_bytes]
            )
    return path


def build_frame(record):
    """Ethernet/IPv4/TCP-or-UDP headers for a record; payload is not materialized."""
    if record.protocol is Protocol.TCP:
        transport = dpkt.tcp.TCP(sport=record.src_port, dport=record.dst_port)
        proto = dpkt.ip.IP_PROTO_TCP
    elif record.protocol is Protocol.UDP:
        transport = dpkt.udp.UDP(sport=record.src_port, dport=record.dst_port, ulen=8)
        proto = dpkt.ip.IP_PROTO_UDP
    else:
        transport = b""
        proto = 1
    ip = dpkt.ip.IP(
        src=socket.inet_aton(record.src_addr),
        dst=socket.inet_aton(record.dst_addr),
        p=proto,
        len=20 + len(bytes(transport)),
        data=transport,
    )
    eth = dpkt.ethernet.Ethernet(
        src=b"\x02\x00\x00\x00\x00\x01",
        dst=b"\x02\x00\x00\x00\x00\x02",
        type=dpkt.ethernet.ETH_TYPE_IP,
        data=ip,
    )
    return bytes(eth)


def write_pcap(path, records, nanosecond=False, byteorder="<", frames=None):
    """
    Write a classic libpcap file.

    orig_len carries record.wire_bytes while only the headers are captured,
    the way a snaplen-limited capture stores large frames.
    """
    path = Path(path)
    magic = 0xA1B23C4D if nanosecond else 0xA1B2C3D4
    divisor = 10**9 if nanosecond else 10**6
    with open(path, "wb") as handle:
        handle.write(struct.pack(byteorder + "IHHiIII", magic, 2, 4, 0, 0, 65535, 1))
        for index, record in enumerate(records):
            frame = frames[index] if frames is not None else build_frame(record)
            seconds = int(record.timestamp)
            fraction = int(round((record.timestamp - seconds) * divisor))
            if fraction >= divisor:
                seconds, fraction = seconds + 1, fraction - divisor
            handle.write(struct.pack(byteorder + "IIII", seconds, fraction, len(frame), record.wire_bytes))
            handle.write(frame)
    return path


def _pcapng_block(block_type, body):
    body += b"\0" * (-len(body) % 4)
    length = len(body) + 12
    return struct.pack("<II", block_type, length) + body + struct.pack("<I", length)


def write_pcapng(path, records, snaplen=65535, frames=None):
    """
    Write a little-endian pcapng file: one section, one Ethernet interface
    with microsecond timestamps and an enhanced packet block per record.

    Frames are cut to `snaplen`; each block's original length carries
    record.wire_bytes.
    """
    path = Path(path)
    with open(path, "wb") as handle:
        handle.write(_pcapng_block(0x0A0D0D0A, struct.pack("<IHHq", 0x1A2B3C4D, 1, 0, -1)))
        handle.write(_pcapng_block(1, struct.pack("<HHI", 1, 0, snaplen)))
        for index, record in enumerate(records):
            frame = (frames[index] if frames is not None else build_frame(record))[:snaplen]
            ticks = int(round(record.timestamp * 1e6))
            header = struct.pack("<IIIII", 0, ticks >> 32, ticks & 0xFFFFFFFF, len(frame), record.wire_bytes)
            handle.write(_pcapng_block(6, header + frame))
    return path


def generate_trace(
    internal_hosts=("10.0.1.2", "10.0.1.3", "10.0.2.7"),
    external_hosts=("93.184.216.34", "151.101.1.69", "142.250.72.14"),
    duration_s=10.0,
    packets=1000,
    seed=0,
    start_time=1_700_000_000.0,
    down_fraction=0.7,
    non_crossing_fraction=0.0,
):
    """
    Random but reproducible gateway traffic between internal and external hosts.

    Args:
        internal_hosts: addresses inside the internal prefix
        external_hosts: remote addresses
        duration_s: trace span
        packets: number of packets
        seed: generator seed
        start_time: epoch of the first possible packet
        down_fraction: share of packets flowing toward internal hosts
        non_crossing_fraction: share of internal-to-internal packets

    Returns:
        list: time-ordered PacketRecords
    """
    rng = np.random.default_rng(seed)
    offsets = np.sort(rng.uniform(0.0, duration_s, size=packets))
    sizes = rng.choice([64, 576, 1200, 1500], size=packets, p=[0.3, 0.1, 0.1, 0.5])
    locals_ = rng.integers(0, len(internal_hosts), size=packets)
    remotes = rng.integers(0, len(external_hosts), size=packets)
    ports = rng.integers(1024, 65535, size=packets)
    downs = rng.random(size=packets) < down_fraction
    lateral = rng.random(size=packets) < non_crossing_fraction
    udp = rng.random(size=packets) < 0.2

    records = []
    for i in range(packets):
        local = internal_hosts[locals_[i]]
        if lateral[i]:
            remote = internal_hosts[(locals_[i] + 1) % len(internal_hosts)]
        else:
            remote = external_hosts[remotes[i]]
        service = 443 if not udp[i] else 53
        protocol = Protocol.UDP if udp[i] else Protocol.TCP
        if downs[i]:
            src, dst, sport, dport = remote, local, service, int(ports[i])
        else:
            src, dst, sport, dport = local, remote, int(ports[i]), service
        records.append(
            PacketRecord(
                timestamp=start_time + float(offsets[i]),
                src_addr=src,
                dst_addr=dst,
                src_port=sport,
                dst_port=dport,
                protocol=protocol,
                wire_bytes=int(sizes[i]),
            )
        )
    return records
