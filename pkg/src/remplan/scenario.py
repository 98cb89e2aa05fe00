"""Scenario file parsing, rendering, report emission and parameter sweeps.

Scenario files are strict JSON documents with an explicit schema_version.
Unknown keys are errors rather than warnings so that a typo in a fixture
cannot silently change an experiment.  All sizes in files are integer
bytes, all times are float seconds and all throughputs are bytes/second;
megabyte-per-second figures from vendor datasheets must be converted by
the author at 1 MB = 10^6 bytes.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import replace
from typing import Any, Sequence

from .model import (
    Calibration,
    DynamicContext,
    LinkPath,
    NodeKind,
    NodeProfile,
    RequestSpec,
    ResourceKind,
    ResourceWeights,
    Scenario,
    validate_scenario,
)
from .sim import SimReport, compare, default_cases

SCHEMA_VERSION = 1


class ScenarioError(Exception):
    """A scenario file could not be parsed or failed validation."""


def load_scenario(path: str) -> Scenario:
    """Read, parse and validate one scenario file."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise ScenarioError(f"cannot read {path}: {e}") from e
    return parse_scenario(text, source=path)


def parse_scenario(text: str, source: str = "<string>") -> Scenario:
    """Parse scenario JSON text; raise ScenarioError on any defect."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ScenarioError(f"{source}:{e.lineno}:{e.colno}: {e.msg}") from e
    if not isinstance(doc, dict):
        raise ScenarioError(f"{source}: top level must be a JSON object")

    top = _fields(doc, "scenario", source,
                  required=("schema_version", "delegator", "nodes", "contexts",
                            "links", "request", "calibration", "weights"),
                  optional=("description", "addresses"))
    version = top["schema_version"]
    if version != SCHEMA_VERSION:
        raise ScenarioError(f"{source}: unsupported schema_version {version!r} "
                            f"(this build reads {SCHEMA_VERSION})")

    nodes = tuple(_parse_node(item, i, source) for i, item in
                  enumerate(_as_list(top["nodes"], "nodes", source)))
    contexts = tuple(_parse_context(item, i, source) for i, item in
                     enumerate(_as_list(top["contexts"], "contexts", source)))
    links = tuple(_parse_link(item, i, source) for i, item in
                  enumerate(_as_list(top["links"], "links", source)))
    request = _parse_request(top["request"], source)
    calibration = _parse_calibration(top["calibration"], source)
    weights = _parse_weights(top["weights"], source)

    addresses = {}
    for nid, addr in _as_dict(top.get("addresses", {}), "addresses", source).items():
        if not isinstance(addr, str):
            raise ScenarioError(f"{source}: addresses[{nid!r}] must be a string")
        addresses[nid] = addr

    s = Scenario(
        nodes=nodes, contexts=contexts, links=links, request=request,
        calibration=calibration, weights=weights,
        delegator=_as_str(top["delegator"], "delegator", source),
        description=_as_str(top.get("description", ""), "description", source),
        addresses=addresses,
    )
    violations = validate_scenario(s)
    if violations:
        listing = "\n  ".join(violations)
        raise ScenarioError(f"{source}: invalid scenario:\n  {listing}")
    return s


def render_scenario(s: Scenario) -> str:
    """Serialize a Scenario back to its file form."""
    doc: dict[str, Any] = {"schema_version": SCHEMA_VERSION}
    if s.description:
        doc["description"] = s.description
    doc["delegator"] = s.delegator
    doc["nodes"] = [{
        "node_id": n.node_id, "kind": n.kind.value,
        "cpu_benchmark": n.cpu_benchmark, "cores_available": n.cores_available,
        "ram_total": n.ram_total, "disk_read": n.disk_read, "disk_write": n.disk_write,
    } for n in s.nodes]
    doc["contexts"] = [{
        "node_id": c.node_id, "cpu_usage": c.cpu_usage,
        "ram_used": c.ram_used, "sampled_at": c.sampled_at,
    } for c in s.contexts]
    doc["links"] = [{
        "from": l.src, "to": l.dst, "per_byte_time": l.per_byte_time,
        "fixed_latency": l.fixed_latency, "hops": list(l.hops),
    } for l in s.links]
    doc["request"] = {
        "byte_alg": s.request.byte_alg, "byte_mdl": s.request.byte_mdl,
        "byte_desc": s.request.byte_desc, "byte_d": s.request.byte_d,
        "num_objects": s.request.num_objects,
        "receiver": s.request.receiver, "requester": s.request.requester,
    }
    doc["calibration"] = {
        "t_upk_mdl": s.calibration.t_upk_mdl, "t_upk_alg": s.calibration.t_upk_alg,
        "t_pk_mdl": s.calibration.t_pk_mdl, "t_pk_alg": s.calibration.t_pk_alg,
        "t_pk_d": s.calibration.t_pk_d, "t_upk_d": s.calibration.t_upk_d,
        "t_pk_o1": s.calibration.t_pk_o1, "t_proc1": s.calibration.t_proc1,
        "t_upk_o1": s.calibration.t_upk_o1,
        "out_bytes_per_object": s.calibration.out_bytes_per_object,
    }
    doc["weights"] = [{"kind": k.value, "weight": w} for k, w in s.weights.entries]
    if s.addresses:
        doc["addresses"] = dict(sorted(s.addresses.items()))
    return json.dumps(doc, indent=2) + "\n"


def save_scenario(s: Scenario, path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(render_scenario(s))


def emit_report(reports: Sequence[SimReport], fmt: str = "csv") -> bytes:
    """Render simulation reports as CSV or an aligned text table.

    The deploy_s column is the time at which the last package has been
    unpacked on its worker; proc_resp_s is the rest of the makespan.
    Output is byte-stable for identical inputs.
    """
    if not reports:
        raise ValueError("no reports to emit")
    rows = [("case_label", "deploy_s", "proc_resp_s", "makespan_s", "excluded_nodes")]
    for rep in reports:
        deploy = max(t.finish_at - t.proc_resp_span for t in rep.per_worker.values())
        rows.append((
            rep.case_label,
            f"{deploy:.6f}",
            f"{rep.makespan - deploy:.6f}",
            f"{rep.makespan:.6f}",
            ";".join(sorted(rep.excluded)),
        ))
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerows(rows)
        return buf.getvalue().encode("utf-8")
    if fmt == "table":
        widths = [max(len(row[i]) for row in rows) for i in range(len(rows[0]))]
        lines = []
        for row in rows:
            lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
        return ("\n".join(lines) + "\n").encode("utf-8")
    raise ValueError(f"unknown report format {fmt!r}")


def sweep(s: Scenario, axis: str, values: Sequence[int],
          cases: Sequence[str] | None = None,
          parallel_uplink: bool = False) -> list[tuple[int, list[SimReport]]]:
    """Re-run the comparison at several object counts or object sizes.

    axis is "num_objects" or "object_bytes"; the base scenario is never
    mutated.  Returns (value, reports) pairs in the order given.
    """
    if axis not in ("num_objects", "object_bytes"):
        raise ValueError(f"unknown sweep axis {axis!r}")
    if not values:
        raise ValueError("sweep needs at least one value")
    out = []
    for v in values:
        if not isinstance(v, int) or isinstance(v, bool) or v <= 0:
            raise ValueError(f"sweep values must be positive integers, got {v!r}")
        if axis == "num_objects":
            req = replace(s.request, num_objects=v)
        else:
            req = replace(s.request, byte_d=v)
        s2 = replace(s, request=req)
        out.append((v, compare(s2, cases or default_cases(s2),
                               parallel_uplink=parallel_uplink)))
    return out


def _fields(obj: Any, what: str, source: str, required: tuple[str, ...],
            optional: tuple[str, ...] = ()) -> dict[str, Any]:
    d = _as_dict(obj, what, source)
    for key in d:
        if key not in required and key not in optional:
            raise ScenarioError(f"{source}: unknown key {key!r} in {what}")
    for key in required:
        if key not in d:
            raise ScenarioError(f"{source}: {what} is missing required key {key!r}")
    return d


def _as_dict(obj: Any, what: str, source: str) -> dict:
    if not isinstance(obj, dict):
        raise ScenarioError(f"{source}: {what} must be a JSON object")
    return obj


def _as_list(obj: Any, what: str, source: str) -> list:
    if not isinstance(obj, list):
        raise ScenarioError(f"{source}: {what} must be a JSON array")
    return obj


def _as_str(obj: Any, what: str, source: str) -> str:
    if not isinstance(obj, str):
        raise ScenarioError(f"{source}: {what} must be a string")
    return obj


def _as_int(obj: Any, what: str, source: str) -> int:
    if not isinstance(obj, int) or isinstance(obj, bool):
        raise ScenarioError(f"{source}: {what} must be an integer, got {obj!r}")
    return obj


def _as_float(obj: Any, what: str, source: str) -> float:
    if isinstance(obj, bool) or not isinstance(obj, (int, float)):
        raise ScenarioError(f"{source}: {what} must be a number, got {obj!r}")
    return float(obj)


def _parse_node(item: Any, i: int, source: str) -> NodeProfile:
    d = _fields(item, f"nodes[{i}]", source,
                required=("node_id", "kind", "cpu_benchmark", "cores_available",
                          "ram_total", "disk_read", "disk_write"))
    kind_raw = _as_str(d["kind"], f"nodes[{i}].kind", source)
    try:
        kind = NodeKind(kind_raw)
    except ValueError:
        valid = ", ".join(k.value for k in NodeKind)
        raise ScenarioError(f"{source}: nodes[{i}].kind {kind_raw!r} is not one of: {valid}") from None
    return NodeProfile(
        node_id=_as_str(d["node_id"], f"nodes[{i}].node_id", source),
        kind=kind,
        cpu_benchmark=_as_float(d["cpu_benchmark"], f"nodes[{i}].cpu_benchmark", source),
        cores_available=_as_int(d["cores_available"], f"nodes[{i}].cores_available", source),
        ram_total=_as_int(d["ram_total"], f"nodes[{i}].ram_total", source),
        disk_read=_as_float(d["disk_read"], f"nodes[{i}].disk_read", source),
        disk_write=_as_float(d["disk_write"], f"nodes[{i}].disk_write", source),
    )


def _parse_context(item: Any, i: int, source: str) -> DynamicContext:
    d = _fields(item, f"contexts[{i}]", source,
                required=("node_id", "cpu_usage", "ram_used", "sampled_at"))
    return DynamicContext(
        node_id=_as_str(d["node_id"], f"contexts[{i}].node_id", source),
        cpu_usage=_as_float(d["cpu_usage"], f"contexts[{i}].cpu_usage", source),
        ram_used=_as_int(d["ram_used"], f"contexts[{i}].ram_used", source),
        sampled_at=_as_float(d["sampled_at"], f"contexts[{i}].sampled_at", source),
    )


def _parse_link(item: Any, i: int, source: str) -> LinkPath:
    d = _fields(item, f"links[{i}]", source,
                required=("from", "to", "per_byte_time", "fixed_latency"),
                optional=("hops",))
    hops = _as_list(d.get("hops", []), f"links[{i}].hops", source)
    return LinkPath(
        src=_as_str(d["from"], f"links[{i}].from", source),
        dst=_as_str(d["to"], f"links[{i}].to", source),
        per_byte_time=_as_float(d["per_byte_time"], f"links[{i}].per_byte_time", source),
        fixed_latency=_as_float(d["fixed_latency"], f"links[{i}].fixed_latency", source),
        hops=tuple(_as_str(h, f"links[{i}].hops[{j}]", source) for j, h in enumerate(hops)),
    )


def _parse_request(item: Any, source: str) -> RequestSpec:
    d = _fields(item, "request", source,
                required=("byte_alg", "byte_mdl", "byte_desc", "byte_d",
                          "num_objects", "receiver", "requester"))
    return RequestSpec(
        byte_alg=_as_int(d["byte_alg"], "request.byte_alg", source),
        byte_mdl=_as_int(d["byte_mdl"], "request.byte_mdl", source),
        byte_desc=_as_int(d["byte_desc"], "request.byte_desc", source),
        byte_d=_as_int(d["byte_d"], "request.byte_d", source),
        num_objects=_as_int(d["num_objects"], "request.num_objects", source),
        receiver=_as_str(d["receiver"], "request.receiver", source),
        requester=_as_str(d["requester"], "request.requester", source),
    )


def _parse_calibration(item: Any, source: str) -> Calibration:
    time_fields = ("t_upk_mdl", "t_upk_alg", "t_pk_mdl", "t_pk_alg", "t_pk_d",
                   "t_upk_d", "t_pk_o1", "t_proc1", "t_upk_o1")
    d = _fields(item, "calibration", source,
                required=time_fields + ("out_bytes_per_object",))
    kwargs = {f: _as_float(d[f], f"calibration.{f}", source) for f in time_fields}
    kwargs["out_bytes_per_object"] = _as_int(
        d["out_bytes_per_object"], "calibration.out_bytes_per_object", source)
    return Calibration(**kwargs)


def _parse_weights(item: Any, source: str) -> ResourceWeights:
    entries = []
    for i, w in enumerate(_as_list(item, "weights", source)):
        d = _fields(w, f"weights[{i}]", source, required=("kind", "weight"))
        kind_raw = _as_str(d["kind"], f"weights[{i}].kind", source)
        try:
            kind = ResourceKind(kind_raw)
        except ValueError:
            valid = ", ".join(k.value for k in ResourceKind)
            raise ScenarioError(
                f"{source}: weights[{i}].kind {kind_raw!r} is not one of: {valid}") from None
        entries.append((kind, _as_float(d["weight"], f"weights[{i}].weight", source)))
    return ResourceWeights(entries=tuple(entries))
