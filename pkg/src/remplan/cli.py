"""Command line front door: plan, simulate, compare, sweep and the
loopback deployment commands (serve-worker, deploy, calibrate).

Exit codes: 0 success, 2 bad input (unparseable arguments, unreadable or
invalid scenario), 3 network failure while talking to daemons.  Stdout of
the planning/reporting commands is deterministic for fixed inputs; wall
clock readings only ever go to stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import asdict

from . import epnet
from .assign import apply_policy, parse_case
from .model import Scenario
from .scenario import ScenarioError, emit_report, load_scenario, sweep
from .sim import compare, default_cases, simulate


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="remplan",
        description="Partition a batch-processing request across edge, fog, "
                    "mist and cloud workers; simulate, compare and deploy plans.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="run the greedy planner and print the plan")
    p.add_argument("--scenario", required=True, help="scenario file path")
    p.add_argument("--case", default="REM",
                   help="case label to plan (default: REM)")
    p.add_argument("--verbose", action="store_true",
                   help="also print the per-object assignment trace")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("simulate", help="simulate one case on the timeline")
    p.add_argument("--scenario", required=True)
    p.add_argument("--case", default="REM")
    p.add_argument("--parallel-uplink", action="store_true",
                   help="let every transmission start at time zero")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", help="simulate several cases and emit a report")
    p.add_argument("--scenario", required=True)
    p.add_argument("--cases", default="",
                   help="comma-separated case labels (default: every node, "
                        "the even split, and REM)")
    p.add_argument("--format", choices=("csv", "table"), default="csv")
    p.add_argument("--out", help="write the report here instead of stdout")
    p.add_argument("--plot-dir", help="also render a comparison figure into this directory")
    p.add_argument("--parallel-uplink", action="store_true")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("sweep", help="re-run the comparison across a parameter range")
    p.add_argument("--scenario", required=True)
    p.add_argument("--axis", choices=("num_objects", "object_bytes"), required=True)
    p.add_argument("--values", required=True,
                   help="comma-separated positive integers, e.g. 25,50,75,100")
    p.add_argument("--cases", default="")
    p.add_argument("--format", choices=("csv", "table"), default="csv")
    p.add_argument("--out")
    p.add_argument("--plot-dir", help="also render a sweep figure into this directory")
    p.add_argument("--parallel-uplink", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("serve-worker", help="run a worker daemon in the foreground")
    p.add_argument("--bind", default="127.0.0.1:0", help="host:port (port 0 = ephemeral)")
    p.add_argument("--node-id", default="worker")
    p.add_argument("--cores", type=int, default=1)
    p.add_argument("--busy-work-s", type=float, default=0.0,
                   help="seconds of busy time per data object")
    p.set_defaults(func=cmd_serve_worker)

    p = sub.add_parser("deploy", help="deploy a plan to live worker daemons")
    p.add_argument("--scenario", required=True,
                   help="scenario with an addresses map for its nodes")
    p.add_argument("--case", default="REM")
    p.add_argument("--object-bytes", type=int, default=65536,
                   help="size of each synthetic data object (default 64 KiB)")
    p.add_argument("--seed", type=int, default=0,
                   help="seed for the synthetic package payloads")
    p.add_argument("--wait-s", type=float, default=30.0,
                   help="how long to wait for outputs to arrive")
    p.set_defaults(func=cmd_deploy)

    p = sub.add_parser("calibrate", help="measure local stage times for the cost model")
    p.add_argument("--busy-work-s", type=float, default=0.02)
    p.add_argument("--cores", type=int, default=1)
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--object-bytes", type=int, default=262144)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--daemon", help="host:port of a local worker daemon to ping first")
    p.set_defaults(func=cmd_calibrate)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (epnet.NetworkError, epnet.FrameError) as e:
        print(f"network error: {e}", file=sys.stderr)
        return 3
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


def _load(path: str) -> Scenario:
    return load_scenario(path)


def _case_list(raw: str, s: Scenario) -> list[str]:
    if not raw:
        return default_cases(s)
    return [c.strip() for c in raw.split(",") if c.strip()]


def cmd_plan(args) -> int:
    s = _load(args.scenario)
    plan = apply_policy(s, parse_case(s, args.case))
    print(f"case {args.case} over {','.join(plan.assignments)}")
    print("node  objects  estimate_s")
    for nid, wp in plan.assignments.items():
        print(f"{nid:<5} {wp:>7}  {plan.estimates[nid]:.6f}")
    print(f"predicted_makespan_s {plan.predicted_makespan:.6f}")
    print(f"excluded {';'.join(sorted(plan.excluded)) or '-'}")
    if args.verbose:
        for step in plan.trace:
            vec = " ".join(f"{nid}={wt:.6f}" for nid, wt in step.estimates)
            print(f"step {step.step_index:>3} -> {step.chosen}  [{vec}]")
    return 0


def cmd_simulate(args) -> int:
    s = _load(args.scenario)
    plan = apply_policy(s, parse_case(s, args.case))
    rep = simulate(s, plan, case_label=args.case,
                   parallel_uplink=args.parallel_uplink)
    print(f"case {args.case}")
    print("worker  objects  deploy_s  proc_resp_s  finish_at_s")
    for nid, t in rep.per_worker.items():
        print(f"{nid:<7} {plan.assignments[nid]:>7}  {t.deploy_span:>8.6f}  "
              f"{t.proc_resp_span:>11.6f}  {t.finish_at:>11.6f}")
    print(f"makespan_s {rep.makespan:.6f}")
    print(f"excluded {';'.join(sorted(rep.excluded)) or '-'}")
    return 0


def _write_report(data: bytes, out_path: str | None) -> None:
    if out_path:
        with open(out_path, "wb") as f:
            f.write(data)
    else:
        sys.stdout.buffer.write(data)
        sys.stdout.flush()


def cmd_compare(args) -> int:
    s = _load(args.scenario)
    cases = _case_list(args.cases, s)
    reports = compare(s, cases, parallel_uplink=args.parallel_uplink)
    _write_report(emit_report(reports, fmt=args.format), args.out)
    if args.plot_dir:
        from . import figures
        import os
        os.makedirs(args.plot_dir, exist_ok=True)
        path = figures.save_comparison_figure(
            reports, os.path.join(args.plot_dir, "comparison.png"))
        print(f"figure written to {path}", file=sys.stderr)
    return 0


def cmd_sweep(args) -> int:
    s = _load(args.scenario)
    try:
        values = [int(v) for v in args.values.split(",") if v.strip()]
    except ValueError:
        raise ValueError(f"--values must be comma-separated integers, got {args.values!r}")
    cases = _case_list(args.cases, s)
    results = sweep(s, args.axis, values, cases=cases,
                    parallel_uplink=args.parallel_uplink)

    if args.format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow((args.axis, "case_label", "deploy_s", "proc_resp_s",
                         "makespan_s", "excluded_nodes"))
        for value, reports in results:
            body = emit_report(reports, fmt="csv").decode("utf-8").splitlines()[1:]
            for line in body:
                writer.writerow([str(value)] + next(csv.reader([line])))
        _write_report(buf.getvalue().encode("utf-8"), args.out)
    else:
        chunks = []
        for value, reports in results:
            chunks.append(f"{args.axis} = {value}\n".encode("utf-8"))
            chunks.append(emit_report(reports, fmt="table"))
        _write_report(b"\n".join(chunks), args.out)

    if args.plot_dir:
        from . import figures
        import os
        os.makedirs(args.plot_dir, exist_ok=True)
        path = figures.save_sweep_figure(
            results, args.axis, os.path.join(args.plot_dir, f"sweep_{args.axis}.png"))
        print(f"figure written to {path}", file=sys.stderr)
    return 0


def cmd_serve_worker(args) -> int:
    host, port = epnet.parse_address(args.bind)
    config = epnet.WorkerConfig(
        node_id=args.node_id, bind_host=host, bind_port=port,
        executor=epnet.ExecutorConfig(cores=args.cores, busy_work_s=args.busy_work_s))
    daemon = epnet.WorkerDaemon(config)
    print(f"worker {args.node_id} listening on {daemon.address}", file=sys.stderr)
    try:
        daemon.serve_forever()
    except KeyboardInterrupt:
        daemon.shutdown()
    return 0


def cmd_deploy(args) -> int:
    s = _load(args.scenario)
    plan = apply_policy(s, parse_case(s, args.case))
    nd = s.request.num_objects
    source = epnet.PackageSource(
        alg=b"entry toy1: checksum-and-tag transform\n",
        mdl=epnet.make_objects(1, max(1, s.request.byte_mdl // 256), seed=args.seed)[0],
        objects=epnet.make_objects(nd, args.object_bytes, seed=args.seed + 1))

    collector = epnet.OutputCollector()
    try:
        entries = epnet.deploy(plan, s, source, receiver_address=collector.address)
        failed = [e for e in entries if not e.ok]
        for e in entries:
            status = "ack" if e.ok else f"FAILED ({e.error})"
            print(f"{e.node_id}: {e.wp} objects, {status}")
            print(f"  pack {e.pack_end - e.pack_start:.4f}s "
                  f"send {e.send_end - e.pack_end:.4f}s "
                  f"ack_after {e.ack_at - e.send_end:.4f}s", file=sys.stderr)
        expected = sum(e.wp for e in entries if e.ok)
        if expected and not collector.wait_for(expected, timeout=args.wait_s):
            print(f"network error: only {collector.total_outputs()} of {expected} "
                  f"outputs arrived within {args.wait_s}s", file=sys.stderr)
            return 3
        mismatched = _verify_outputs(collector, plan, source)
        print(f"outputs received {collector.total_outputs()} of {expected}, "
              f"checksum mismatches {mismatched}")
        if failed or mismatched:
            return 3
        return 0
    finally:
        collector.close()


def _verify_outputs(collector: epnet.OutputCollector, plan, source) -> int:
    shares = epnet.partition_objects(source.objects, plan)
    mismatched = 0
    for nid, outs in sorted(collector.outputs.items()):
        want = [epnet.toy_transform(obj) for obj in shares.get(nid, ())]
        if sorted(outs) != sorted(want):
            mismatched += 1
    return mismatched


def cmd_calibrate(args) -> int:
    executor = epnet.ExecutorConfig(cores=args.cores, busy_work_s=args.busy_work_s)
    sample = epnet.PackageSource(
        alg=b"entry toy1: checksum-and-tag transform\n",
        mdl=epnet.make_objects(1, 65536, seed=args.seed)[0],
        objects=epnet.make_objects(1, args.object_bytes, seed=args.seed + 1))
    cal = epnet.calibrate_local(executor, sample, repeats=args.repeats,
                                daemon_address=args.daemon)
    print(json.dumps(asdict(cal), indent=2, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
