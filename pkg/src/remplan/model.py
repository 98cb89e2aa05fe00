"""Domain types shared by the cost model, planner, simulator and wire protocol.

Everything here is a plain immutable value.  Constructors accept whatever they
are given; `validate_scenario` is the single place where invariants are
enforced, and it reports violations as data instead of raising.

Unit conventions: sizes are exact integer bytes, times are float seconds,
throughputs are bytes per second.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field


class NodeKind(enum.Enum):
    EDGE_HOST = "edge_host"
    MIST = "mist"
    FOG = "fog"
    CLOUD = "cloud"


class ResourceKind(enum.Enum):
    """What a single scoring weight applies to.

    ram_free is (ram_total - ram_used) expressed in gigabytes so it lives on
    roughly the same scale as the benchmark score; cpu_idle_fraction is
    1 - cpu_usage.  All four are "bigger means faster".
    """

    CPU_BENCHMARK = "cpu_benchmark"
    CORES_AVAILABLE = "cores_available"
    RAM_FREE = "ram_free"
    CPU_IDLE_FRACTION = "cpu_idle_fraction"


@dataclass(frozen=True)
class NodeProfile:
    """Static hardware description of one participant node."""

    node_id: str
    kind: NodeKind
    cpu_benchmark: float
    cores_available: int
    ram_total: int
    disk_read: float
    disk_write: float


@dataclass(frozen=True)
class DynamicContext:
    """Runtime resource state of one node, sampled at a point in time."""

    node_id: str
    cpu_usage: float
    ram_used: int
    sampled_at: float


@dataclass(frozen=True)
class LinkPath:
    """A usable network path between two nodes.

    Paths are symmetric: a LinkPath(src=A, dst=B) also serves traffic from B
    to A.  `hops` lists intermediate node ids for routed paths; the path's
    per_byte_time and fixed_latency must then equal the sums over its hop
    segments, which must themselves exist as direct links.
    """

    src: str
    dst: str
    per_byte_time: float
    fixed_latency: float
    hops: tuple[str, ...] = ()

    def endpoints(self) -> frozenset[str]:
        return frozenset((self.src, self.dst))


@dataclass(frozen=True)
class ResourceWeights:
    """Ordered (resource kind, weight) pairs used by the scoring average."""

    entries: tuple[tuple[ResourceKind, float], ...]

    def total_weight(self) -> float:
        return sum(w for _, w in self.entries)


@dataclass(frozen=True)
class Calibration:
    """Timespans measured by running one process locally, plus output size.

    The nine time fields are per-trial seconds: module/algorithm pack and
    unpack costs, per-object pack/unpack costs, per-object processing time
    and per-object output pack/unpack times.  out_bytes_per_object is the
    measured size of one object's output.
    """

    t_upk_mdl: float
    t_upk_alg: float
    t_pk_mdl: float
    t_pk_alg: float
    t_pk_d: float
    t_upk_d: float
    t_pk_o1: float
    t_proc1: float
    t_upk_o1: float
    out_bytes_per_object: int


@dataclass(frozen=True)
class RequestSpec:
    """Byte sizes and object count of one batch-processing request."""

    byte_alg: int
    byte_mdl: int
    byte_desc: int
    byte_d: int
    num_objects: int
    receiver: str
    requester: str


@dataclass(frozen=True)
class CostBreakdown:
    """The seven stage estimates for one worker at a given object count."""

    pack: float
    request_send: float
    unpack: float
    process: float
    output_pack: float
    output_send: float
    output_unpack: float
    total: float

    def parts(self) -> tuple[float, ...]:
        return (self.pack, self.request_send, self.unpack, self.process,
                self.output_pack, self.output_send, self.output_unpack)


@dataclass(frozen=True)
class TraceStep:
    """One planner iteration: which worker got object number step_index."""

    step_index: int
    chosen: str
    estimates: tuple[tuple[str, float], ...]


@dataclass(frozen=True)
class Plan:
    """Result of an assignment: object counts, estimates and audit trace."""

    assignments: dict[str, int]
    estimates: dict[str, float]
    trace: tuple[TraceStep, ...]
    predicted_makespan: float
    excluded: frozenset[str]


@dataclass(frozen=True)
class Scenario:
    """One complete planning problem: nodes, links, request and calibration."""

    nodes: tuple[NodeProfile, ...]
    contexts: tuple[DynamicContext, ...]
    links: tuple[LinkPath, ...]
    request: RequestSpec
    calibration: Calibration
    weights: ResourceWeights
    delegator: str
    description: str = ""
    addresses: dict[str, str] = field(default_factory=dict)

    def node_ids(self) -> list[str]:
        return [n.node_id for n in self.nodes]

    def profile(self, node_id: str) -> NodeProfile:
        for n in self.nodes:
            if n.node_id == node_id:
                return n
        raise KeyError(node_id)

    def context(self, node_id: str) -> DynamicContext:
        for c in self.contexts:
            if c.node_id == node_id:
                return c
        raise KeyError(node_id)

    def find_path(self, a: str, b: str) -> LinkPath | None:
        """Return the link usable between a and b, in either direction."""
        if a == b:
            return None
        want = frozenset((a, b))
        for link in self.links:
            if link.endpoints() == want:
                return link
        return None


def _positive(value, name: str, out: list[str]) -> None:
    if not value > 0:
        out.append(f"{name} must be > 0, got {value!r}")


def validate_scenario(s: Scenario) -> list[str]:
    """Check every invariant and reference; return human-readable violations.

    An empty list means the scenario is usable by the planner and simulator.
    Violations are data, not exceptions, so callers can report all of them
    at once.
    """
    out: list[str] = []
    ids = s.node_ids()
    seen: set[str] = set()
    for nid in ids:
        if nid in seen:
            out.append(f"duplicate node_id {nid!r}")
        seen.add(nid)

    for n in s.nodes:
        _positive(n.cpu_benchmark, f"node {n.node_id}: cpu_benchmark", out)
        if n.cores_available < 1:
            out.append(f"node {n.node_id}: cores_available must be >= 1, got {n.cores_available}")
        _positive(n.ram_total, f"node {n.node_id}: ram_total", out)
        _positive(n.disk_read, f"node {n.node_id}: disk_read", out)
        _positive(n.disk_write, f"node {n.node_id}: disk_write", out)

    ctx_ids = set()
    for c in s.contexts:
        if c.node_id not in seen:
            out.append(f"context references unknown node {c.node_id!r}")
            continue
        ctx_ids.add(c.node_id)
        if not 0.0 <= c.cpu_usage <= 1.0:
            out.append(f"context {c.node_id}: cpu_usage must be within [0,1], got {c.cpu_usage!r}")
        ram_total = s.profile(c.node_id).ram_total
        if c.ram_used < 0 or c.ram_used > ram_total:
            out.append(f"context {c.node_id}: ram_used {c.ram_used!r} outside [0, ram_total={ram_total}]")
    for nid in ids:
        if nid not in ctx_ids:
            out.append(f"node {nid} has no DynamicContext")

    for link in s.links:
        label = f"link {link.src}-{link.dst}"
        for end in (link.src, link.dst):
            if end not in seen:
                out.append(f"{label}: unknown endpoint {end!r}")
        if link.src == link.dst:
            out.append(f"{label}: endpoints must differ")
        _positive(link.per_byte_time, f"{label}: per_byte_time", out)
        if link.fixed_latency < 0:
            out.append(f"{label}: fixed_latency must be >= 0, got {link.fixed_latency!r}")
        if link.hops:
            out.extend(_check_hops(s, link))

    if not any(w > 0 for _, w in s.weights.entries):
        out.append("weights: at least one weight must be > 0")
    for kind, w in s.weights.entries:
        if w < 0:
            out.append(f"weights: {kind.value} weight must be >= 0, got {w!r}")

    r = s.request
    for fname in ("byte_alg", "byte_mdl", "byte_desc", "byte_d"):
        if getattr(r, fname) < 0:
            out.append(f"request: {fname} must be >= 0, got {getattr(r, fname)!r}")
    if r.num_objects < 1:
        out.append(f"request: num_objects must be >= 1, got {r.num_objects!r}")
    for role, nid in (("receiver", r.receiver), ("requester", r.requester)):
        if nid not in seen:
            out.append(f"request: {role} {nid!r} is not a known node")

    c = s.calibration
    for fname in ("t_upk_mdl", "t_upk_alg", "t_pk_mdl", "t_pk_alg", "t_pk_d",
                  "t_upk_d", "t_pk_o1", "t_proc1", "t_upk_o1", "out_bytes_per_object"):
        _positive(getattr(c, fname), f"calibration: {fname}", out)

    if s.delegator not in seen:
        out.append(f"delegator {s.delegator!r} is not a known node")
    else:
        for nid in ids:
            if nid != s.delegator and s.find_path(s.delegator, nid) is None:
                out.append(f"no path between delegator {s.delegator} and worker {nid}")
        if r.receiver in seen:
            for nid in ids:
                if nid != r.receiver and s.find_path(nid, r.receiver) is None:
                    out.append(f"no path between worker {nid} and receiver {r.receiver}")

    for nid, addr in sorted(s.addresses.items()):
        if nid not in seen:
            out.append(f"addresses: unknown node {nid!r}")
        if ":" not in addr:
            out.append(f"addresses: {nid} value {addr!r} is not host:port")

    return out


def _check_hops(s: Scenario, link: LinkPath) -> list[str]:
    """Verify a routed path is the sum of direct links along its hops."""
    out: list[str] = []
    label = f"link {link.src}-{link.dst}"
    stops = (link.src, *link.hops, link.dst)
    per_byte = 0.0
    latency = 0.0
    for a, b in zip(stops, stops[1:]):
        seg = None
        want = frozenset((a, b))
        for cand in s.links:
            if not cand.hops and cand.endpoints() == want:
                seg = cand
                break
        if seg is None:
            out.append(f"{label}: no direct link for hop segment {a}-{b}")
            return out
        per_byte += seg.per_byte_time
        latency += seg.fixed_latency
    rel = 1e-9
    if abs(per_byte - link.per_byte_time) > rel * max(per_byte, link.per_byte_time):
        out.append(f"{label}: per_byte_time {link.per_byte_time!r} does not equal "
                   f"hop-segment sum {per_byte!r}")
    if abs(latency - link.fixed_latency) > rel * max(latency, link.fixed_latency, 1e-30):
        out.append(f"{label}: fixed_latency {link.fixed_latency!r} does not equal "
                   f"hop-segment sum {latency!r}")
    return out
