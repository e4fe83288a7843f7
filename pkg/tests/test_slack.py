import pytest

from helpers import chain_design, const_cell, design, library
from preslack.arrival import DelayModel, propagate_at
from preslack.corners import LR
from preslack.graph import prepare_graph
from preslack.physical import PORT
from preslack.sdc import SdcConstraints
from preslack.slack import (
    EndpointResult,
    SlackReport,
    analyze,
    classify_endpoints,
    clock_path,
    compute_tns_wns,
    crpr_correct,
    estimate_rat,
    find_critical_paths,
    generate_report,
    parse_report,
)

DFF = const_cell("DFF", ["D"], output="Q", late=0.3, early=0.2, clock="CK")


def _setup(d, libs, sdc):
    g = prepare_graph(d, libs)
    return g, propagate_at(g, libs, sdc)


def _register_design(shared: bool, logic_delay: float = 2.0, self_loop: bool = False):
    """clk -> b0 -> (b1 -> r1/CK, b2 -> r2/CK); r1/Q -> logic -> r2/D (or r1/D)."""
    libs = library(
        DFF,
        const_cell("CKB0", ["A"], late=0.6, early=0.4),
        const_cell("CKB1", ["A"], late=0.3, early=0.1),
        const_cell("CKB2", ["A"], late=0.3, early=0.1),
        const_cell("LOGIC", ["A"], late=logic_delay, early=logic_delay / 2),
    )
    comps = [("r1", "DFF", (0, 0)), ("r2", "DFF", (0, 0)), ("g", "LOGIC", (0, 0))]
    comps += [("b1", "CKB1", (0, 0)), ("b2", "CKB2", (0, 0))]
    nets = {
        "q1": [("r1", "Q"), ("g", "A")],
        "d": [("g", "Y"), ("r1" if self_loop else "r2", "D")],
        "c1": [("b1", "Y"), ("r1", "CK")],
        "c2": [("b2", "Y"), ("r2", "CK")],
        "i": [(PORT, "in"), ("r2" if self_loop else "r1", "D")],
    }
    if shared:
        comps.append(("b0", "CKB0", (0, 0)))
        nets["clk"] = [(PORT, "clk"), ("b0", "A")]
        nets["c0"] = [("b0", "Y"), ("b1", "A"), ("b2", "A")]
    else:
        nets["clk"] = [(PORT, "clk"), ("b1", "A"), ("b2", "A")]
    d = design([("clk", "input", (0, 0)), ("in", "input", (0, 0))], comps, nets)
    return d, libs


def test_po_rat():
    d, libs = chain_design(1)
    sdc = SdcConstraints(10.0, "in", clock_uncertainty=0.5, output_delays={"out": 2.0})
    g, t = _setup(d, libs, sdc)
    assert estimate_rat(g, t, sdc) == {g.ids["out"]: 7.5}


def test_po_rat_defaults():
    d, libs = chain_design(1)
    sdc = SdcConstraints(10.0, "in")
    g, t = _setup(d, libs, sdc)
    assert estimate_rat(g, t, sdc)[g.ids["out"]] == 10.0


def test_register_rat():
    libs = library(DFF, const_cell("CKB", ["A"], late=1.0, early=0.8))
    d = design(
        [("clk", "input", (0, 0)), ("in", "input", (0, 0))],
        [("r", "DFF", (0, 0)), ("b", "CKB", (0, 0))],
        {"clk": [(PORT, "clk"), ("b", "A")], "ck": [("b", "Y"), ("r", "CK")], "i": [(PORT, "in"), ("r", "D")]},
    )
    sdc = SdcConstraints(10.0, "clk", clock_uncertainty=0.25)
    g, t = _setup(d, libs, sdc)
    assert t.at[g.ids["r/CK"]][0] == pytest.approx(0.8)
    rats = estimate_rat(g, t, sdc)
    assert rats[g.ids["r/D"]] == pytest.approx(10.55)


def test_unconstrained_endpoint_is_excluded():
    libs = library(const_cell("INV", ["A"]))
    d = design([("in", "input", (0, 0))], [("u", "INV", (0, 0))], {"a": [(PORT, "in"), ("u", "A")]})
    sdc = SdcConstraints(1.0, "in")
    g, t = _setup(d, libs, sdc)
    assert classify_endpoints(g) == {g.ids["u/Y"]: "unconstrained"}
    report = analyze(g, t, sdc)
    assert report.endpoints == [] and report.unconstrained == ["u/Y"]
    assert (report.tns, report.wns) == (0.0, 0.0)


def test_no_violations_no_paths():
    d, libs = chain_design(2, 0.5)
    sdc = SdcConstraints(10.0, "in")
    g, t = _setup(d, libs, sdc)
    assert find_critical_paths(g, t, estimate_rat(g, t, sdc)) == []


def test_single_violating_path_is_traced_in_full():
    d, libs = chain_design(1, 2.0)
    sdc = SdcConstraints(1.0, "in")
    g, t = _setup(d, libs, sdc)
    rats = estimate_rat(g, t, sdc)
    assert rats[g.ids["out"]] - t.at[g.ids["out"]][LR] == pytest.approx(-1.0)
    [(end, path)] = find_critical_paths(g, t, rats)
    assert [g.nodes[v].name for v in path] == ["in", "u0/A", "u0/Y", "out"]


def test_diamond_follows_later_branch():
    libs = library(
        const_cell("SLOW", ["A"], late=3.0), const_cell("FAST", ["A"], late=2.0), const_cell("AND2", ["A", "B"], late=0.1)
    )
    d = design(
        [("i", "input", (0, 0)), ("o", "output", (0, 0))],
        [("f", "FAST", (0, 0)), ("s", "SLOW", (0, 0)), ("g", "AND2", (0, 0))],
        {
            "i": [(PORT, "i"), ("f", "A"), ("s", "A")],
            "x": [("f", "Y"), ("g", "A")],
            "y": [("s", "Y"), ("g", "B")],
            "o": [("g", "Y"), (PORT, "o")],
        },
    )
    sdc = SdcConstraints(1.0, "i")
    g, t = _setup(d, libs, sdc)
    [(_, path)] = find_critical_paths(g, t, estimate_rat(g, t, sdc), model=DelayModel(g, libs))
    assert [g.nodes[v].name for v in path] == ["i", "s/A", "s/Y", "g/B", "g/Y", "o"]


def test_tie_goes_to_lowest_id():
    libs = library(const_cell("BUF", ["A"], late=1.0), const_cell("AND2", ["A", "B"], late=0.1))
    d = design(
        [("i", "input", (0, 0)), ("o", "output", (0, 0))],
        [("p", "BUF", (0, 0)), ("q", "BUF", (0, 0)), ("g", "AND2", (0, 0))],
        {
            "i": [(PORT, "i"), ("p", "A"), ("q", "A")],
            "x": [("q", "Y"), ("g", "A")],
            "y": [("p", "Y"), ("g", "B")],
            "o": [("g", "Y"), (PORT, "o")],
        },
    )
    sdc = SdcConstraints(0.5, "i")
    g, t = _setup(d, libs, sdc)
    [(_, path)] = find_critical_paths(g, t, estimate_rat(g, t, sdc))
    ga, gb = g.ids["g/A"], g.ids["g/B"]
    assert min(ga, gb) in path and max(ga, gb) not in path


def test_clock_path_status():
    d, libs = _register_design(shared=True)
    g, _ = _setup(d, libs, SdcConstraints(1.0, "clk"))
    cp = clock_path(g, g.ids["r1/CK"], g.ids["clk"])
    assert cp.status == "source"
    assert [g.nodes[v].name for v in cp.pins] == ["clk", "b0/A", "b0/Y", "b1/A", "b1/Y", "r1/CK"]
    assert clock_path(g, g.ids["r1/CK"], None).status == "unreachable"


def _crp(d, libs, period):
    sdc = SdcConstraints(period, "clk")
    g, t = _setup(d, libs, sdc)
    report = analyze(g, t, sdc)
    return g, t, {r.name: r for r in report.endpoints}


def test_shared_clock_buffer_crp():
    g, t, res = _crp(*_register_design(shared=True), period=1.0)
    r = res["r2/D"]
    assert t.at[g.ids["b0/Y"]][LR] - t.at[g.ids["b0/Y"]][0] == pytest.approx(0.2)
    assert r.crp == pytest.approx(0.2)
    assert r.startpoint_name == "r1/Q"
    assert r.slack_corrected == pytest.approx(r.slack + 0.2)


def test_disjoint_clock_branches_crp_zero():
    _, _, res = _crp(*_register_design(shared=False), period=1.0)
    assert res["r2/D"].slack < 0
    assert res["r2/D"].crp == 0.0


def test_self_loop_crp_is_whole_clock_path():
    g, t, res = _crp(*_register_design(shared=True, self_loop=True), period=1.0)
    ck = g.ids["r1/CK"]
    assert res["r1/D"].crp == pytest.approx(t.at[ck][LR] - t.at[ck][0])
    assert res["r1/D"].crp == pytest.approx(0.4)


def test_po_capture_path_is_clock_source():
    libs = library(DFF, const_cell("CKB", ["A"], late=0.5, early=0.3), const_cell("G", ["A"], late=2.0))
    d = design(
        [("clk", "input", (0, 0)), ("in", "input", (0, 0)), ("o", "output", (0, 0))],
        [("r", "DFF", (0, 0)), ("b", "CKB", (0, 0)), ("g", "G", (0, 0))],
        {
            "clk": [(PORT, "clk"), ("b", "A")],
            "ck": [("b", "Y"), ("r", "CK")],
            "i": [(PORT, "in"), ("r", "D")],
            "q": [("r", "Q"), ("g", "A")],
            "o": [("g", "Y"), (PORT, "o")],
        },
    )
    sdc = SdcConstraints(1.0, "clk")
    g, t = _setup(d, libs, sdc)
    rats = estimate_rat(g, t, sdc)
    crit = find_critical_paths(g, t, rats)
    out = crpr_correct(g, t, crit, sdc)
    assert out[g.ids["o"]] == (0.0, g.ids["r/Q"])


def test_crp_unreachable_clock_warns():
    d, libs = _register_design(shared=True)
    sdc = SdcConstraints(1.0, "in")  # clock declared on the wrong port
    g, t = _setup(d, libs, sdc)
    warnings = []
    crit = find_critical_paths(g, t, estimate_rat(g, t, sdc))
    out = crpr_correct(g, t, crit, sdc, warnings=warnings)
    assert all(crp == 0.0 for crp, _ in out.values())
    assert warnings and "unreachable" in warnings[0]


def _results(slacks):
    return [EndpointResult(k, f"e{k}", True, 0.0, s, 0.0, s, s, s) for k, s in enumerate(slacks)]


@pytest.mark.parametrize(
    "slacks, tns, wns",
    [([-2.0, -1.0, 0.5], -3.0, -2.0), ([1.0, 0.5], 0.0, 0.0), ([-0.69], -0.69, -0.69), ([], 0.0, 0.0)],
)
def test_tns_wns(slacks, tns, wns):
    assert compute_tns_wns(_results(slacks)) == (pytest.approx(tns), pytest.approx(wns))


def test_clean_report_text():
    d, libs = chain_design(2, 0.5)
    sdc = SdcConstraints(10.0, "in")
    g, t = _setup(d, libs, sdc)
    text = generate_report(analyze(g, t, sdc))
    lines = text.splitlines()
    assert lines[0] == "TNS 0.000 WNS 0.000"
    assert lines[-1].split() == ["endpoint", "startpoint", "AT", "RAT", "CRP", "slack"]


def test_report_rows_sorted_most_negative_first():
    report = SlackReport(_results([-0.5, 1.0, -2.0]), -2.5, -2.0, 3, 2, 2)
    rows = generate_report(report).splitlines()[-2:]
    assert rows[0].startswith("e2") and rows[1].startswith("e0")
    assert rows[0].split()[-1] == "-2.000"


def test_structured_round_trip():
    g, t, _ = _crp(*_register_design(shared=True), period=1.0)
    report = analyze(g, t, SdcConstraints(1.0, "clk"))
    again = parse_report(generate_report(report, "structured"))
    assert again == report
    with pytest.raises(ValueError):
        parse_report('{"schema": "other"}')
    with pytest.raises(ValueError):
        generate_report(report, "html")
