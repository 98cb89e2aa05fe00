"""Scenario file round-trips, strict parse errors, report emission, sweeps."""

import json
import random

import pytest

from remplan.scenario import (ScenarioError, emit_report, load_scenario,
                              parse_scenario, render_scenario, sweep)
from remplan.sim import compare

from scenario_gen import LAB, random_scenario


def bundled():
    return load_scenario(LAB)


def mutated_doc(**top_level):
    doc = json.loads(render_scenario(bundled()))
    doc.update(top_level)
    return json.dumps(doc)


def test_bundled_fixture_values():
    s = bundled()
    assert s.delegator == "T"
    assert [p.node_id for p in s.nodes] == ["T", "M", "F", "E", "C"]
    by_id = {p.node_id: p for p in s.nodes}
    assert (by_id["T"].disk_read, by_id["T"].disk_write) == (547e6, 220e6)
    assert (by_id["M"].disk_read, by_id["M"].disk_write) == (237e6, 121e6)
    assert (by_id["F"].disk_read, by_id["F"].disk_write) == (566e6, 566e6)
    assert (by_id["E"].disk_read, by_id["E"].disk_write) == (105e6, 105e6)
    assert (by_id["C"].disk_read, by_id["C"].disk_write) == (61e6, 61e6)
    assert s.request.byte_alg == 1203
    assert s.request.byte_mdl == 14_100_000
    assert s.request.byte_desc == 226
    assert s.request.byte_d == 3_000_000
    assert s.request.num_objects == 25
    assert len(s.links) == 6


def test_render_parse_round_trip_bundled():
    s = bundled()
    assert parse_scenario(render_scenario(s), "mem") == s


def test_render_parse_round_trip_random():
    rng = random.Random(31)
    for _ in range(25):
        s = random_scenario(rng)
        assert parse_scenario(render_scenario(s), "mem") == s


def test_render_is_stable():
    s = bundled()
    assert render_scenario(s) == render_scenario(s)
    assert render_scenario(s).endswith("\n")


def test_parse_error_carries_position():
    with pytest.raises(ScenarioError, match=r"bad\.scenario:1:1"):
        parse_scenario("", "bad.scenario")
    with pytest.raises(ScenarioError, match=r"bad\.scenario:2:"):
        parse_scenario('{"schema_version": 1,\n  oops}', "bad.scenario")


def test_unknown_top_level_key_is_an_error():
    with pytest.raises(ScenarioError, match="bogus"):
        parse_scenario(mutated_doc(bogus=3), "mem")


def test_unknown_nested_key_is_an_error():
    doc = json.loads(render_scenario(bundled()))
    doc["nodes"][0]["speed_rating"] = 9000
    with pytest.raises(ScenarioError, match="speed_rating"):
        parse_scenario(json.dumps(doc), "mem")


def test_wrong_schema_version():
    with pytest.raises(ScenarioError, match="schema_version"):
        parse_scenario(mutated_doc(schema_version=2), "mem")


def test_bad_node_kind_message():
    doc = json.loads(render_scenario(bundled()))
    doc["nodes"][0]["kind"] = "mainframe"
    with pytest.raises(ScenarioError, match="is not one of"):
        parse_scenario(json.dumps(doc), "mem")


def test_validation_failures_are_scenario_errors():
    doc = json.loads(render_scenario(bundled()))
    doc["request"]["receiver"] = "Z"
    with pytest.raises(ScenarioError, match="receiver"):
        parse_scenario(json.dumps(doc), "mem")


def test_missing_required_key():
    doc = json.loads(render_scenario(bundled()))
    del doc["calibration"]["t_proc1"]
    with pytest.raises(ScenarioError, match="t_proc1"):
        parse_scenario(json.dumps(doc), "mem")


def test_bool_rejected_where_int_expected():
    doc = json.loads(render_scenario(bundled()))
    doc["request"]["num_objects"] = True
    with pytest.raises(ScenarioError, match="num_objects"):
        parse_scenario(json.dumps(doc), "mem")


def test_csv_report_golden():
    s = bundled()
    got = emit_report(compare(s, ["T", "REM"]))
    lines = got.decode("utf-8").splitlines()
    assert lines[0] == "case_label,deploy_s,proc_resp_s,makespan_s,excluded_nodes"
    assert lines[1] == "T,3.870000,16.250000,20.120000,"
    assert lines[2] == "REM,14.774653,1.987698,16.762351,C"


def test_csv_report_is_byte_stable():
    s = bundled()
    reports = compare(s, ["T", "M", "REM"])
    assert emit_report(reports) == emit_report(compare(s, ["T", "M", "REM"]))


def test_table_report_shape():
    s = bundled()
    text = emit_report(compare(s, ["T", "REM"]), fmt="table").decode("utf-8")
    lines = text.splitlines()
    assert lines[0].startswith("case_label")
    assert len(lines) == 3
    assert all(line == line.rstrip() for line in lines)


def test_emit_report_rejects_bad_input():
    with pytest.raises(ValueError, match="no reports"):
        emit_report([])
    with pytest.raises(ValueError, match="format"):
        emit_report(compare(bundled(), ["T"]), fmt="yaml")


def test_sweep_leaves_base_scenario_alone():
    s = bundled()
    results = sweep(s, "num_objects", [10, 25], cases=["T", "REM"])
    assert s.request.num_objects == 25
    assert [v for v, _ in results] == [10, 25]
    # the 25-object leg must equal a plain comparison at the base request
    direct = compare(s, ["T", "REM"])
    assert results[1][1] == direct


def test_sweep_object_bytes_axis():
    s = bundled()
    results = sweep(s, "object_bytes", [1_000_000], cases=["REM"])
    (value, reports), = results
    assert value == 1_000_000
    assert reports[0].makespan < compare(s, ["REM"])[0].makespan


def test_sweep_rejects_bad_arguments():
    s = bundled()
    with pytest.raises(ValueError, match="axis"):
        sweep(s, "payload", [1])
    with pytest.raises(ValueError):
        sweep(s, "num_objects", [])
    with pytest.raises(ValueError, match="positive integers"):
        sweep(s, "num_objects", [0])
    with pytest.raises(ValueError, match="positive integers"):
        sweep(s, "num_objects", [True])
