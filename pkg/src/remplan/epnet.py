"""Loopback master/worker protocol: framing, worker daemon, deploy, calibrate.

Wire format, one frame per logical message over a TCP connection:

    [length: 4-byte big-endian, bytes after this field]
    [type:   1 byte]
    [hdr_len: 1 byte][header: hdr_len bytes, UTF-8 JSON or reason text]
    repeated: [sec_len: 4-byte big-endian][section: sec_len bytes]

The minimal frame (no header, no sections) is 6 bytes.  Frames larger than
64 MiB are rejected on both sides.  Package sections (program, modules,
data objects, outputs) travel zlib-compressed.

The worker daemon answers metadata queries, acknowledges a deployment as
soon as the package validates, runs each data object through a
deterministic toy transform (with configurable per-object busy time), and
ships the outputs to the receiver address named in the package metadata.
"""

from __future__ import annotations

import enum
import hashlib
import json
import logging
import os
import socket
import socketserver
import statistics
import struct
import threading
import time
import warnings
import zlib
from dataclasses import dataclass, field, replace
from typing import BinaryIO, Optional, Sequence

from .model import Calibration, DynamicContext, NodeKind, NodeProfile, Plan, Scenario
from .sim import deploy_order

log = logging.getLogger("remplan.epnet")

FRAME_CAP = 64 * 1024 * 1024
DEFAULT_ACK_TIMEOUT_S = 10.0
ACK_TIMEOUT_ENV = "REMPLAN_ACK_TIMEOUT"

_LEN = struct.Struct(">I")


class FrameType(enum.IntEnum):
    SDM_QUERY = 0x01
    SDM_RESPONSE = 0x02
    EP_DEPLOY = 0x03
    EP_ACK = 0x04
    EP_OUTPUT = 0x05
    ERROR = 0x7F


class FrameError(Exception):
    """Malformed, truncated or oversized frame."""


class NetworkError(Exception):
    """Connection-level failure while talking to a daemon."""


@dataclass(frozen=True)
class Frame:
    type: FrameType
    header: bytes = b""
    sections: tuple[bytes, ...] = ()


def encode_frame(f: Frame) -> bytes:
    """Serialize a frame; raises FrameError on cap or header-size breach."""
    if len(f.header) > 255:
        raise FrameError(f"header is {len(f.header)} bytes, limit is 255")
    body = bytes([int(f.type), len(f.header)]) + f.header
    for sec in f.sections:
        body += _LEN.pack(len(sec)) + sec
    if len(body) > FRAME_CAP:
        raise FrameError(f"frame payload {len(body)} exceeds cap {FRAME_CAP}")
    return _LEN.pack(len(body)) + body


def decode_frame(data: bytes) -> Frame:
    """Parse one frame from the start of data; trailing bytes are ignored."""
    if len(data) < 4:
        raise FrameError("truncated frame: missing length field")
    (length,) = _LEN.unpack_from(data, 0)
    if length > FRAME_CAP:
        raise FrameError(f"declared payload {length} exceeds cap {FRAME_CAP}")
    if length < 2:
        raise FrameError(f"declared payload {length} too small for type and header length")
    if len(data) < 4 + length:
        raise FrameError(f"truncated frame: declared {length} payload bytes, "
                         f"got {len(data) - 4}")
    payload = data[4:4 + length]
    type_byte = payload[0]
    try:
        ftype = FrameType(type_byte)
    except ValueError:
        raise FrameError(f"unknown frame type byte 0x{type_byte:02x}") from None
    hdr_len = payload[1]
    if 2 + hdr_len > length:
        raise FrameError(f"header length {hdr_len} overruns payload of {length} bytes")
    header = payload[2:2 + hdr_len]
    sections = []
    pos = 2 + hdr_len
    while pos < length:
        if pos + 4 > length:
            raise FrameError("trailing bytes too short for a section length")
        (sec_len,) = _LEN.unpack_from(payload, pos)
        pos += 4
        if pos + sec_len > length:
            raise FrameError(f"section of {sec_len} bytes overruns payload")
        sections.append(payload[pos:pos + sec_len])
        pos += sec_len
    return Frame(type=ftype, header=header, sections=tuple(sections))


def read_frame(stream: BinaryIO) -> Frame:
    """Read exactly one frame from a blocking binary stream."""
    head = _read_exact(stream, 4, "length field")
    (length,) = _LEN.unpack(head)
    if length > FRAME_CAP:
        raise FrameError(f"declared payload {length} exceeds cap {FRAME_CAP}")
    payload = _read_exact(stream, length, "payload")
    return decode_frame(head + payload)


def _read_exact(stream: BinaryIO, n: int, what: str) -> bytes:
    chunks = []
    remaining = n
    while remaining:
        chunk = stream.read(remaining)
        if not chunk:
            raise FrameError(f"connection closed while reading {what} "
                             f"({n - remaining} of {n} bytes arrived)")
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


# --- service metadata ---

@dataclass(frozen=True)
class Sdm:
    """A node's advertised static specs and sampled runtime state."""

    node_id: str
    kind: str
    cpu_benchmark: float
    cores_available: int
    ram_total: int
    disk_read: float
    disk_write: float
    cpu_usage: float
    ram_used: int
    sampled_at: float
    executor: str = "toy1"

    def to_json(self) -> bytes:
        return json.dumps(self.__dict__, sort_keys=True).encode("utf-8")

    @classmethod
    def from_json(cls, raw: bytes) -> "Sdm":
        try:
            d = json.loads(raw.decode("utf-8"))
            return cls(**d)
        except (ValueError, TypeError) as e:
            raise FrameError(f"bad Sdm payload: {e}") from e

    @classmethod
    def of(cls, profile: NodeProfile, context: DynamicContext,
           executor: str = "toy1") -> "Sdm":
        return cls(node_id=profile.node_id, kind=profile.kind.value,
                   cpu_benchmark=profile.cpu_benchmark,
                   cores_available=profile.cores_available,
                   ram_total=profile.ram_total, disk_read=profile.disk_read,
                   disk_write=profile.disk_write, cpu_usage=context.cpu_usage,
                   ram_used=context.ram_used, sampled_at=context.sampled_at,
                   executor=executor)


# --- packages ---

@dataclass(frozen=True)
class PackageMeta:
    """Routing metadata carried in an EP_DEPLOY header."""

    receiver: str
    entry: str
    objects: int

    def to_json(self) -> bytes:
        return json.dumps({"receiver": self.receiver, "entry": self.entry,
                           "objects": self.objects},
                          separators=(",", ":")).encode("utf-8")

    @classmethod
    def from_json(cls, raw: bytes) -> "PackageMeta":
        try:
            d = json.loads(raw.decode("utf-8"))
            return cls(receiver=d["receiver"], entry=d["entry"],
                       objects=int(d["objects"]))
        except (ValueError, KeyError, TypeError) as e:
            raise FrameError(f"bad package metadata: {e}") from e


@dataclass(frozen=True)
class EpPackage:
    """One deployable unit: program, modules and this worker's data share."""

    meta: PackageMeta
    alg: bytes
    mdl: bytes
    objects: tuple[bytes, ...]

    def encode(self) -> Frame:
        if self.meta.objects != len(self.objects):
            raise FrameError(f"metadata says {self.meta.objects} objects, "
                             f"package holds {len(self.objects)}")
        sections = [zlib.compress(self.alg, 1), zlib.compress(self.mdl, 1)]
        sections += [zlib.compress(obj, 1) for obj in self.objects]
        return Frame(FrameType.EP_DEPLOY, header=self.meta.to_json(),
                     sections=tuple(sections))

    @classmethod
    def decode(cls, frame: Frame) -> "EpPackage":
        if frame.type is not FrameType.EP_DEPLOY:
            raise FrameError(f"expected EP_DEPLOY, got {frame.type.name}")
        meta = PackageMeta.from_json(frame.header)
        if len(frame.sections) < 2:
            raise FrameError("deploy frame must carry program and module sections")
        try:
            decoded = [zlib.decompress(sec) for sec in frame.sections]
        except zlib.error as e:
            raise FrameError(f"corrupt package section: {e}") from e
        alg, mdl, *objects = decoded
        if meta.objects != len(objects):
            raise FrameError(f"metadata says {meta.objects} objects, "
                             f"frame carries {len(objects)} data sections")
        return cls(meta=meta, alg=alg, mdl=mdl, objects=tuple(objects))


def toy_transform(data: bytes) -> bytes:
    """The deterministic executor output for one data object.

    Tag, input length and SHA-256 of the input, so any observer can
    recompute the expected output without running the executor.
    """
    digest = hashlib.sha256(data).hexdigest()
    return f"toy1:{len(data)}:{digest}".encode("ascii")


@dataclass(frozen=True)
class ExecutorConfig:
    """How the toy executor behaves: parallelism and per-object busy time."""

    cores: int = 1
    busy_work_s: float = 0.0
    entry: str = "toy1"


def execute_package(pkg: EpPackage, config: ExecutorConfig) -> list[bytes]:
    """Run every object through the toy transform, in order."""
    if pkg.meta.entry != config.entry:
        raise ValueError(f"executor serves entry {config.entry!r}, "
                         f"package asks for {pkg.meta.entry!r}")
    outputs = []
    for obj in pkg.objects:
        if config.busy_work_s > 0:
            time.sleep(config.busy_work_s)
        outputs.append(toy_transform(obj))
    return outputs


# --- worker daemon ---

@dataclass
class WorkerConfig:
    node_id: str = "worker"
    bind_host: str = "127.0.0.1"
    bind_port: int = 0
    executor: ExecutorConfig = field(default_factory=ExecutorConfig)
    profile: Optional[NodeProfile] = None
    context: Optional[DynamicContext] = None


class _WorkerHandler(socketserver.StreamRequestHandler):
    def handle(self):
        daemon: WorkerDaemon = self.server.daemon  # type: ignore[attr-defined]
        try:
            frame = read_frame(self.rfile)
        except FrameError as e:
            self._reply_error(str(e))
            return
        if frame.type is FrameType.SDM_QUERY:
            sdm = daemon.current_sdm()
            self._reply(Frame(FrameType.SDM_RESPONSE, sections=(sdm.to_json(),)))
        elif frame.type is FrameType.EP_DEPLOY:
            self._handle_deploy(daemon, frame)
        else:
            self._reply_error(f"unexpected frame type {frame.type.name}")

    def _handle_deploy(self, daemon: "WorkerDaemon", frame: Frame) -> None:
        try:
            pkg = EpPackage.decode(frame)
            if pkg.meta.entry != daemon.config.executor.entry:
                raise FrameError(f"unsupported entry {pkg.meta.entry!r}")
        except FrameError as e:
            self._reply_error(str(e))
            return
        ack_header = json.dumps({"worker": daemon.config.node_id,
                                 "objects": pkg.meta.objects},
                                separators=(",", ":")).encode("utf-8")
        self._reply(Frame(FrameType.EP_ACK, header=ack_header))

        with daemon.execution_slots:
            outputs = execute_package(pkg, daemon.config.executor)
        out_header = json.dumps({"worker": daemon.config.node_id,
                                 "objects": len(outputs)},
                                separators=(",", ":")).encode("utf-8")
        out_frame = Frame(FrameType.EP_OUTPUT, header=out_header,
                          sections=tuple(zlib.compress(o, 1) for o in outputs))
        try:
            host, port = parse_address(pkg.meta.receiver)
            with socket.create_connection((host, port), timeout=10.0) as conn:
                conn.sendall(encode_frame(out_frame))
        except OSError as e:
            # deployer may still be listening on the deploy connection
            delivered = self._reply_error(f"receiver {pkg.meta.receiver} unreachable: {e}")
            if not delivered:
                log.warning("worker %s: receiver %s unreachable and deployer gone: %s",
                            daemon.config.node_id, pkg.meta.receiver, e)

    def _reply(self, frame: Frame) -> bool:
        try:
            self.wfile.write(encode_frame(frame))
            self.wfile.flush()
            return True
        except OSError:
            return False

    def _reply_error(self, reason: str) -> bool:
        return self._reply(Frame(FrameType.ERROR,
                                 header=reason.encode("utf-8")[:255]))


class _Server(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True


class WorkerDaemon:
    """A running worker: background accept loop plus bounded executor slots."""

    def __init__(self, config: WorkerConfig):
        self.config = config
        self.execution_slots = threading.BoundedSemaphore(max(1, config.executor.cores))
        self._server = _Server((config.bind_host, config.bind_port), _WorkerHandler)
        self._server.daemon = self  # type: ignore[attr-defined]
        self._thread = threading.Thread(target=self._server.serve_forever,
                                        name=f"worker-{config.node_id}", daemon=True)

    @property
    def address(self) -> str:
        host, port = self._server.server_address[:2]
        return f"{host}:{port}"

    def start(self) -> "WorkerDaemon":
        self._thread.start()
        return self

    def serve_forever(self) -> None:
        self._server.serve_forever()

    def shutdown(self) -> None:
        self._server.shutdown()
        self._server.server_close()

    def current_sdm(self) -> Sdm:
        cfg = self.config
        profile = cfg.profile or NodeProfile(
            node_id=cfg.node_id, kind=NodeKind.EDGE_HOST, cpu_benchmark=1.0,
            cores_available=cfg.executor.cores, ram_total=1 << 30,
            disk_read=1e8, disk_write=1e8)
        context = cfg.context or DynamicContext(
            node_id=cfg.node_id, cpu_usage=0.0, ram_used=0, sampled_at=time.time())
        return Sdm.of(profile, context, executor=cfg.executor.entry)


def serve_worker(config: WorkerConfig) -> WorkerDaemon:
    """Bind and start a worker daemon; the caller owns shutdown()."""
    return WorkerDaemon(config).start()


# --- master side ---

class OutputCollector:
    """Receiver endpoint accumulating EP_OUTPUT frames from workers."""

    def __init__(self, bind_host: str = "127.0.0.1", bind_port: int = 0):
        collector = self

        class Handler(socketserver.StreamRequestHandler):
            def handle(self):
                try:
                    frame = read_frame(self.rfile)
                except FrameError as e:
                    log.warning("collector: dropped bad frame: %s", e)
                    return
                if frame.type is not FrameType.EP_OUTPUT:
                    log.warning("collector: unexpected %s frame", frame.type.name)
                    return
                try:
                    head = json.loads(frame.header.decode("utf-8"))
                    worker = str(head["worker"])
                    outputs = [zlib.decompress(sec) for sec in frame.sections]
                except (ValueError, KeyError, zlib.error) as e:
                    log.warning("collector: undecodable output frame: %s", e)
                    return
                now = time.monotonic()
                with collector._lock:
                    collector.outputs.setdefault(worker, []).extend(outputs)
                    collector.arrival_log.append((worker, now))
                    collector._arrived.set()

        self.outputs: dict[str, list[bytes]] = {}
        self.arrival_log: list[tuple[str, float]] = []
        self._lock = threading.Lock()
        self._arrived = threading.Event()
        self._server = _Server((bind_host, bind_port), Handler)
        self._thread = threading.Thread(target=self._server.serve_forever,
                                        name="output-collector", daemon=True)
        self._thread.start()

    @property
    def address(self) -> str:
        host, port = self._server.server_address[:2]
        return f"{host}:{port}"

    def total_outputs(self) -> int:
        with self._lock:
            return sum(len(v) for v in self.outputs.values())

    def wait_for(self, count: int, timeout: float = 30.0) -> bool:
        """Block until at least count outputs arrived, or the timeout."""
        deadline = time.monotonic() + timeout
        while self.total_outputs() < count:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                return False
            self._arrived.clear()
            if self.total_outputs() >= count:
                return True
            self._arrived.wait(remaining)
        return True

    def close(self) -> None:
        self._server.shutdown()
        self._server.server_close()


@dataclass(frozen=True)
class PackageSource:
    """The material deployed to workers: program, modules, data objects."""

    alg: bytes
    mdl: bytes
    objects: tuple[bytes, ...]


@dataclass(frozen=True)
class DeployEntry:
    """Per-worker delivery record; timestamps are time.monotonic seconds."""

    node_id: str
    wp: int
    pack_start: float
    pack_end: float
    send_end: float
    ack_at: float
    ok: bool
    error: str = ""


def make_objects(count: int, size: int, seed: int = 0) -> tuple[bytes, ...]:
    """Deterministic pseudo-random data objects for tests and demos."""
    import random
    rng = random.Random(seed)
    return tuple(rng.randbytes(size) for _ in range(count))


def partition_objects(objects: Sequence[bytes], plan: Plan) -> dict[str, tuple[bytes, ...]]:
    """Slice the object list contiguously, in the plan's deploy order."""
    total = sum(plan.assignments.values())
    if total != len(objects):
        raise ValueError(f"plan covers {total} objects, got {len(objects)}")
    shares: dict[str, tuple[bytes, ...]] = {}
    pos = 0
    for nid in deploy_order(plan):
        wp = plan.assignments[nid]
        shares[nid] = tuple(objects[pos:pos + wp])
        pos += wp
    return shares


def ack_timeout() -> float:
    raw = os.environ.get(ACK_TIMEOUT_ENV)
    if raw:
        try:
            return float(raw)
        except ValueError:
            log.warning("ignoring bad %s value %r", ACK_TIMEOUT_ENV, raw)
    return DEFAULT_ACK_TIMEOUT_S


def parse_address(addr: str) -> tuple[str, int]:
    host, sep, port = addr.rpartition(":")
    if not sep or not host:
        raise ValueError(f"address {addr!r} is not host:port")
    return host, int(port)


def deploy(plan: Plan, s: Scenario, source: PackageSource,
           receiver_address: Optional[str] = None,
           timeout: Optional[float] = None) -> list[DeployEntry]:
    """Send every active worker its package and collect acknowledgements.

    Worker daemon addresses come from the scenario's addresses map; the
    receiver address (where workers ship outputs) defaults to the address
    of the request's receiver node.  One worker failing to accept its
    package does not stop the others.
    """
    if timeout is None:
        timeout = ack_timeout()
    if receiver_address is None:
        receiver_address = s.addresses.get(s.request.receiver)
        if receiver_address is None:
            raise ValueError(f"no address for receiver node {s.request.receiver!r}")
    shares = partition_objects(source.objects, plan)
    entries: list[DeployEntry] = []
    for nid in deploy_order(plan):
        addr = s.addresses.get(nid)
        if addr is None:
            entries.append(DeployEntry(nid, plan.assignments[nid], 0.0, 0.0, 0.0, 0.0,
                                       ok=False, error=f"no address for node {nid!r}"))
            continue
        entries.append(_deploy_one(nid, plan.assignments[nid], addr, receiver_address,
                                   source, shares[nid], timeout))
    return entries


def _deploy_one(nid: str, wp: int, addr: str, receiver_address: str,
                source: PackageSource, share: tuple[bytes, ...],
                timeout: float) -> DeployEntry:
    pack_start = time.monotonic()
    meta = PackageMeta(receiver=receiver_address, entry="toy1", objects=len(share))
    pkg = EpPackage(meta=meta, alg=source.alg, mdl=source.mdl, objects=share)
    try:
        wire = encode_frame(pkg.encode())
    except FrameError as e:
        now = time.monotonic()
        return DeployEntry(nid, wp, pack_start, now, now, now, ok=False, error=str(e))
    pack_end = time.monotonic()
    try:
        host, port = parse_address(addr)
        with socket.create_connection((host, port), timeout=timeout) as conn:
            conn.settimeout(timeout)
            conn.sendall(wire)
            send_end = time.monotonic()
            with conn.makefile("rb") as rf:
                reply = read_frame(rf)
        if reply.type is FrameType.ERROR:
            reason = reply.header.decode("utf-8", "replace")
            return DeployEntry(nid, wp, pack_start, pack_end, send_end,
                               time.monotonic(), ok=False,
                               error=f"worker rejected package: {reason}")
        if reply.type is not FrameType.EP_ACK:
            return DeployEntry(nid, wp, pack_start, pack_end, send_end,
                               time.monotonic(), ok=False,
                               error=f"expected EP_ACK, got {reply.type.name}")
        return DeployEntry(nid, wp, pack_start, pack_end, send_end,
                           time.monotonic(), ok=True)
    except (OSError, FrameError, ValueError) as e:
        now = time.monotonic()
        return DeployEntry(nid, wp, pack_start, pack_end, now, now,
                           ok=False, error=str(e))


def query_sdm(addr: str, timeout: float = 5.0) -> Sdm:
    """Ask a daemon for its current service metadata."""
    try:
        host, port = parse_address(addr)
        with socket.create_connection((host, port), timeout=timeout) as conn:
            conn.settimeout(timeout)
            conn.sendall(encode_frame(Frame(FrameType.SDM_QUERY)))
            with conn.makefile("rb") as rf:
                reply = read_frame(rf)
    except (OSError, ValueError) as e:
        raise NetworkError(f"cannot query {addr}: {e}") from e
    if reply.type is not FrameType.SDM_RESPONSE or not reply.sections:
        raise FrameError(f"expected SDM_RESPONSE with one section, got {reply.type.name}")
    return Sdm.from_json(reply.sections[0])


# --- calibration ---

def calibrate_local(executor: ExecutorConfig, sample: PackageSource,
                    repeats: int = 3, jitter_bound: float = 0.5,
                    daemon_address: Optional[str] = None) -> Calibration:
    """Measure the per-stage timespans by running the trial in-process.

    Pack/unpack stages are the compression steps the wire format applies;
    the process stage is one object through the executor.  Runs `repeats`
    trials and keeps the per-field median.  Consecutive trials disagreeing
    by more than jitter_bound (relative) raise a warning, not an error.
    If daemon_address is given the daemon is pinged first so a dead local
    worker fails fast.
    """
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    if not sample.objects:
        raise ValueError("sample package needs at least one data object")
    if daemon_address is not None:
        query_sdm(daemon_address)

    trials = [_one_trial(executor, sample) for _ in range(repeats)]
    for a, b in zip(trials, trials[1:]):
        for fname in ("t_pk_mdl", "t_pk_alg", "t_pk_d", "t_upk_mdl", "t_upk_alg",
                      "t_upk_d", "t_proc1", "t_pk_o1", "t_upk_o1"):
            va, vb = getattr(a, fname), getattr(b, fname)
            if abs(va - vb) > jitter_bound * max(va, vb):
                warnings.warn(f"calibration jitter on {fname}: "
                              f"{va:.3e} vs {vb:.3e} exceeds {jitter_bound:.0%}",
                              RuntimeWarning, stacklevel=2)
    med = {f: statistics.median(getattr(t, f) for t in trials)
           for f in ("t_upk_mdl", "t_upk_alg", "t_pk_mdl", "t_pk_alg", "t_pk_d",
                     "t_upk_d", "t_pk_o1", "t_proc1", "t_upk_o1")}
    return replace(trials[0], **med)


def _one_trial(executor: ExecutorConfig, sample: PackageSource) -> Calibration:
    obj = sample.objects[0]

    t_pk_mdl, packed_mdl = _timed(zlib.compress, sample.mdl, 1)
    t_pk_alg, packed_alg = _timed(zlib.compress, sample.alg, 1)
    t_pk_d, packed_obj = _timed(zlib.compress, obj, 1)
    t_upk_mdl, _ = _timed(zlib.decompress, packed_mdl)
    t_upk_alg, _ = _timed(zlib.decompress, packed_alg)
    t_upk_d, _ = _timed(zlib.decompress, packed_obj)

    one = EpPackage(meta=PackageMeta(receiver="127.0.0.1:0", entry=executor.entry,
                                     objects=1),
                    alg=sample.alg, mdl=sample.mdl, objects=(obj,))
    t_proc1, outputs = _timed(execute_package, one, executor)
    output = outputs[0]
    t_pk_o1, packed_out = _timed(zlib.compress, output, 1)
    t_upk_o1, _ = _timed(zlib.decompress, packed_out)

    return Calibration(
        t_upk_mdl=t_upk_mdl, t_upk_alg=t_upk_alg, t_pk_mdl=t_pk_mdl,
        t_pk_alg=t_pk_alg, t_pk_d=t_pk_d, t_upk_d=t_upk_d, t_pk_o1=t_pk_o1,
        t_proc1=t_proc1, t_upk_o1=t_upk_o1,
        out_bytes_per_object=len(output),
    )


def _timed(fn, *args):
    start = time.perf_counter()
    result = fn(*args)
    elapsed = time.perf_counter() - start
    # clock resolution floor keeps every calibration field positive
    return max(elapsed, 1e-9), result
