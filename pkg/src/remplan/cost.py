"""Estimated stage times for migrating work to a candidate worker.

The estimate for worker i at object count wp is the sum of seven stages:
pack, request send, unpack, process, output pack, output send and the
receiver-side output unpack.  Stages measured only on the delegator are
rescaled to a worker by a capability ratio:

    t_i = t_local * (local capability / worker capability)

where the capability is disk read/write throughput for (un)packing stages
and the weighted resource score for processing.  The printed-rate reading
of those stages (reciprocal local time times the worker/local ratio) is
kept available behind the ``literal_rates`` flag for comparison; it is not
dimensionally a time and is never used by the planner.

All functions are pure; every stage is affine in wp for a fixed worker.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .model import (
    Calibration,
    CostBreakdown,
    DynamicContext,
    LinkPath,
    NodeProfile,
    RequestSpec,
    ResourceKind,
    ResourceWeights,
    Scenario,
)


@dataclass(frozen=True)
class WorkerView:
    """One candidate worker with the link context the delegator sees.

    path_from_delegator is None exactly when the worker is the delegator's
    own executor (is_delegator_local); path_to_receiver is None exactly when
    the worker is colocated with the output receiver.
    """

    profile: NodeProfile
    context: DynamicContext
    path_from_delegator: Optional[LinkPath]
    path_to_receiver: Optional[LinkPath]
    is_delegator_local: bool


def rw_average(read: float, write: float) -> float:
    """Mean of disk read and write throughput, bytes per second."""
    if read <= 0 or write <= 0:
        raise ValueError(f"disk throughputs must be > 0, got read={read!r} write={write!r}")
    return (read + write) / 2.0


def pack_time(c: Calibration, wp: int) -> float:
    """Seconds to pack modules, program and wp data objects."""
    _check_wp(wp)
    return c.t_pk_mdl + c.t_pk_alg + c.t_pk_d * wp


def request_transmit_time(w: WorkerView, r: RequestSpec, wp: int) -> float:
    """Seconds to push the request package over the worker's uplink.

    Zero for the delegator's own executor.  Metadata bytes are deliberately
    not counted; they are negligible next to the module payload.
    """
    _check_wp(wp)
    if w.is_delegator_local or w.path_from_delegator is None:
        return 0.0
    path = w.path_from_delegator
    payload = r.byte_mdl + r.byte_alg + r.byte_d * wp
    return path.per_byte_time * payload + path.fixed_latency


def local_unpack_time(c: Calibration, wp: int) -> float:
    """Seconds for the delegator itself to unpack a package of wp objects."""
    _check_wp(wp)
    return c.t_upk_mdl + c.t_upk_alg + c.t_upk_d * wp


def worker_unpack_time(c: Calibration, wp: int, rw_local: float, rw_i: float,
                       literal: bool = False) -> float:
    """Unpack estimate for a remote worker, scaled by disk throughput."""
    _check_rw(rw_local, rw_i)
    base = local_unpack_time(c, wp)
    if literal:
        return (1.0 / base) * (rw_i / rw_local)
    return base * (rw_local / rw_i)


def resource_score(profile: NodeProfile, context: DynamicContext,
                   weights: ResourceWeights) -> float:
    """Weighted mean of a node's resource values.

    The value per kind: benchmark score as-is, available core count, free
    RAM in gigabytes, idle CPU fraction.  Scaling every weight by the same
    constant leaves the score unchanged.
    """
    total_w = weights.total_weight()
    if total_w <= 0:
        raise ValueError("resource weights must include at least one positive weight")
    acc = 0.0
    for kind, w in weights.entries:
        acc += _resource_value(kind, profile, context) * w
    return acc / total_w


def _resource_value(kind: ResourceKind, profile: NodeProfile,
                    context: DynamicContext) -> float:
    if kind is ResourceKind.CPU_BENCHMARK:
        return profile.cpu_benchmark
    if kind is ResourceKind.CORES_AVAILABLE:
        return float(profile.cores_available)
    if kind is ResourceKind.RAM_FREE:
        return (profile.ram_total - context.ram_used) / 1e9
    if kind is ResourceKind.CPU_IDLE_FRACTION:
        return 1.0 - context.cpu_usage
    raise ValueError(f"unknown resource kind {kind!r}")


def worker_process_time(c: Calibration, wp: int, score_local: float,
                        score_i: float, literal: bool = False) -> float:
    """Processing estimate for wp objects on a worker, scaled by score."""
    _check_wp(wp)
    if score_local <= 0 or score_i <= 0:
        raise ValueError(f"resource scores must be > 0, got {score_local!r}, {score_i!r}")
    if literal:
        # printed-rate reading; the wp factors cancel, undefined at wp=0
        if wp == 0:
            return 0.0
        return (wp / (c.t_proc1 * wp)) * (score_i / score_local)
    return c.t_proc1 * wp * (score_local / score_i)


def output_pack_time(c: Calibration, wp: int, rw_local: float, rw_i: float,
                     literal: bool = False) -> float:
    """Seconds for the worker to archive its wp outputs."""
    _check_wp(wp)
    _check_rw(rw_local, rw_i)
    if literal:
        if wp == 0:
            return 0.0
        return (1.0 / (c.t_pk_o1 * wp)) * (rw_i / rw_local)
    return c.t_pk_o1 * wp * (rw_local / rw_i)


def output_transmit_time(w: WorkerView, c: Calibration, wp: int) -> float:
    """Seconds to ship the output archive to the receiver; 0 if colocated."""
    _check_wp(wp)
    if w.path_to_receiver is None:
        return 0.0
    path = w.path_to_receiver
    return path.per_byte_time * c.out_bytes_per_object * wp + path.fixed_latency


def receiver_unpack_time(c: Calibration, wp: int, rw_local: float,
                         rw_scale: float, literal: bool = False) -> float:
    """Seconds for the receiver to unpack wp outputs.

    rw_scale is the receiver's disk throughput under the default reading
    (the unpack happens on the receiver's disk); the literal-rate variant
    follows the printed form, where the worker's throughput appears instead.
    """
    _check_wp(wp)
    _check_rw(rw_local, rw_scale)
    if literal:
        if wp == 0:
            return 0.0
        return (1.0 / (c.t_upk_o1 * wp)) * (rw_scale / rw_local)
    return c.t_upk_o1 * wp * (rw_local / rw_scale)


def get_time(w: WorkerView, c: Calibration, r: RequestSpec,
             weights: ResourceWeights, delegator_view: WorkerView,
             receiver_view: WorkerView, wp: int,
             literal_rates: bool = False) -> CostBreakdown:
    """Full seven-stage estimate for handing wp objects to this worker.

    The delegator's own executor skips the send stage and uses the local
    calibration unscaled; every other worker is scaled by its disk and
    score ratios.  Output send and receiver unpack always apply (the
    receiver may be a third node), except that a worker colocated with the
    receiver pays no output transmission.
    """
    rw_local = rw_average(delegator_view.profile.disk_read, delegator_view.profile.disk_write)
    rw_i = rw_average(w.profile.disk_read, w.profile.disk_write)
    rw_recv = rw_average(receiver_view.profile.disk_read, receiver_view.profile.disk_write)

    pack = pack_time(c, wp)
    send = request_transmit_time(w, r, wp)
    if w.is_delegator_local:
        unpack = local_unpack_time(c, wp)
        process = c.t_proc1 * wp
        out_pack = c.t_pk_o1 * wp
    else:
        score_local = resource_score(delegator_view.profile, delegator_view.context, weights)
        score_i = resource_score(w.profile, w.context, weights)
        unpack = worker_unpack_time(c, wp, rw_local, rw_i, literal=literal_rates)
        process = worker_process_time(c, wp, score_local, score_i, literal=literal_rates)
        out_pack = output_pack_time(c, wp, rw_local, rw_i, literal=literal_rates)
    out_send = output_transmit_time(w, c, wp)
    out_unpack = receiver_unpack_time(
        c, wp, rw_local, rw_i if literal_rates else rw_recv, literal=literal_rates)

    parts = (pack, send, unpack, process, out_pack, out_send, out_unpack)
    return CostBreakdown(*parts, total=sum(parts))


def build_worker_views(s: Scenario) -> dict[str, WorkerView]:
    """Bind every scenario node to the link context used by the estimator."""
    views: dict[str, WorkerView] = {}
    for n in s.nodes:
        nid = n.node_id
        views[nid] = WorkerView(
            profile=n,
            context=s.context(nid),
            path_from_delegator=s.find_path(s.delegator, nid),
            path_to_receiver=s.find_path(nid, s.request.receiver),
            is_delegator_local=(nid == s.delegator),
        )
    return views


class ScenarioCosts:
    """Convenience wrapper pricing any node of one scenario by id."""

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.views = build_worker_views(scenario)
        self._delegator = self.views[scenario.delegator]
        self._receiver = self.views[scenario.request.receiver]

    def breakdown(self, node_id: str, wp: int,
                  literal_rates: bool = False) -> CostBreakdown:
        return get_time(self.views[node_id], self.scenario.calibration,
                        self.scenario.request, self.scenario.weights,
                        self._delegator, self._receiver, wp,
                        literal_rates=literal_rates)


def _check_wp(wp: int) -> None:
    if wp < 0:
        raise ValueError(f"object count must be >= 0, got {wp!r}")


def _check_rw(*values: float) -> None:
    for v in values:
        if v <= 0:
            raise ValueError(f"disk throughput must be > 0, got {v!r}")
