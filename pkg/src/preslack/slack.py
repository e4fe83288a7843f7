"""Endpoint RAT estimation, critical paths, clock reconvergence pessimism, TNS/WNS."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field

from .arrival import DelayModel, PinTiming
from .corners import EF, ER, LR
from .errors import GraphError
from .graph import CELL, NET, TimingGraph
from .sdc import SdcConstraints

logger = logging.getLogger(__name__)

REPORT_SCHEMA = "preslack.slack-report"
REPORT_VERSION = 1

PO = "po"
REGISTER = "register"
UNCONSTRAINED = "unconstrained"

# early value taken at clock pins: early-rise, or min of early-rise/early-fall
CLOCK_EARLY_RISE = "rise"
CLOCK_EARLY_MIN = "min"
CLOCK_EARLY_MODES = (CLOCK_EARLY_RISE, CLOCK_EARLY_MIN)


@dataclass
class EndpointResult:
    endpoint: int
    name: str
    is_po: bool
    at: float  # late-rise
    rat: float
    crp: float
    rat_corrected: float
    slack: float
    slack_corrected: float
    startpoint: int | None = None
    startpoint_name: str | None = None


@dataclass
class SlackReport:
    endpoints: list[EndpointResult]
    tns: float
    wns: float
    endpoint_count: int
    critical_count: int
    screened_count: int  # negative slack before correction
    unconstrained: list[str] = field(default_factory=list)
    settings: dict = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        doc = {"schema": REPORT_SCHEMA, "version": REPORT_VERSION}
        doc.update(asdict(self))
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> SlackReport:
        if doc.get("schema") != REPORT_SCHEMA:
            raise ValueError(f"not a slack report document (schema {doc.get('schema')!r})")
        if doc.get("version") != REPORT_VERSION:
            raise ValueError(f"unsupported slack report version {doc.get('version')!r}")
        body = {k: v for k, v in doc.items() if k not in ("schema", "version")}
        body["endpoints"] = [EndpointResult(**e) for e in body["endpoints"]]
        return cls(**body)


def _clock_early(at, v: int, mode: str) -> float:
    if mode == CLOCK_EARLY_MIN:
        return min(at[v][ER], at[v][EF])
    return at[v][ER]


def classify_endpoints(graph: TimingGraph) -> dict[int, str]:
    """PO for output ports, register for data inputs of clocked instances."""
    out = {}
    for v in graph.endpoints:
        node = graph.nodes[v]
        if node.instance is None:
            kind = PO if node.port_direction in ("output", "inout") else UNCONSTRAINED
        elif not node.is_clock_pin and node.direction != "fanout" and graph.clock_pin(node.instance) is not None:
            kind = REGISTER
        else:
            kind = UNCONSTRAINED
        out[v] = kind
    return out


def estimate_rat(
    graph: TimingGraph,
    timing: PinTiming,
    sdc: SdcConstraints,
    *,
    clock_early: str = CLOCK_EARLY_RISE,
    kinds: dict[int, str] | None = None,
) -> dict[int, float]:
    """RAT per constrained endpoint; unconstrained endpoints are left out."""
    if kinds is None:
        kinds = classify_endpoints(graph)
    at = timing.at
    period, mu = sdc.clock_period, sdc.clock_uncertainty
    rats = {}
    unconstrained = 0
    for v, kind in kinds.items():
        if kind == PO:
            rats[v] = period - sdc.output_delay(graph.nodes[v].name) - mu
        elif kind == REGISTER:
            clk = graph.clock_pin(graph.nodes[v].instance)
            rats[v] = period + float(_clock_early(at, clk, clock_early)) - mu
        else:
            unconstrained += 1
    if unconstrained:
        logger.warning("%d endpoint(s) unconstrained (neither an output port nor a register data pin)", unconstrained)
    return rats


def find_critical_paths(
    graph: TimingGraph,
    timing: PinTiming,
    rats: dict[int, float],
    *,
    model: DelayModel | None = None,
) -> list[tuple[int, list[int]]]:
    """Backward traversal from each violating endpoint along the worst late-rise arrival.

    Paths are returned launch end first. Ties go to the lowest node id.
    """
    if model is None:
        model = DelayModel(graph)
    at_lr = timing.at[:, LR].tolist()
    slew_lr = timing.slew[:, LR].tolist()
    fanin = graph.fanin
    nodes = graph.nodes
    limit = len(nodes)
    out = []
    for v in sorted(rats):
        if not rats[v] - at_lr[v] < 0:
            continue
        path = [v]
        cur = v
        while fanin[cur] and not (cur != v and nodes[cur].is_clock_pin):
            best, best_val = None, -math.inf
            for kind, u, k in fanin[cur]:
                d = model.edge_delay(kind, k, LR, slew_lr[u], cur)
                if d is None:
                    continue
                val = at_lr[u] + d
                if val > best_val or (val == best_val and u < best):
                    best, best_val = u, val
            if best is None:
                break
            cur = best
            path.append(cur)
            if len(path) > limit:
                raise GraphError(f"backward traversal from {nodes[v].name} exceeds the node count")
        path.reverse()
        out.append((v, path))
    return out


@dataclass
class ClockPath:
    pins: list[int]  # root first
    status: str  # source | gated | unreachable


def clock_path(graph: TimingGraph, pin: int, source: int | None) -> ClockPath:
    """Walk back from a clock pin through nets and single-input cells."""
    fanin = graph.fanin
    pins = [pin]
    cur = pin
    status = "unreachable"
    while True:
        if cur == source:
            status = "source"
            break
        fin = fanin[cur]
        if not fin:
            break
        if len(fin) > 1:
            status = "gated"
            break
        cur = fin[0][1]
        pins.append(cur)
        if len(pins) > len(graph.nodes):
            raise GraphError(f"clock path of {graph.nodes[pin].name} does not terminate")
    pins.reverse()
    return ClockPath(pins, status)


def startpoint_of(graph: TimingGraph, path: list[int]) -> int:
    for v in path:
        if graph.is_register_output(v):
            return v
    return path[0]


def crpr_correct(
    graph: TimingGraph,
    timing: PinTiming,
    critical: list[tuple[int, list[int]]],
    sdc: SdcConstraints,
    *,
    clock_early: str = CLOCK_EARLY_RISE,
    kinds: dict[int, str] | None = None,
    warnings: list[str] | None = None,
) -> dict[int, tuple[float, int]]:
    """(CRP, startpoint) for each critical endpoint."""
    if kinds is None:
        kinds = classify_endpoints(graph)
    source = graph.ids.get(sdc.clock_port)
    at = timing.at
    cache: dict[int, ClockPath] = {}

    def path_of(pin: int) -> ClockPath:
        cp = cache.get(pin)
        if cp is None:
            cp = cache[pin] = clock_path(graph, pin, source)
            if cp.status == "gated":
                logger.warning("clock path of %s stops at multi-input pin %s", graph.nodes[pin].name, graph.nodes[cp.pins[0]].name)
        return cp

    out = {}
    unreachable = 0
    for v, path in critical:
        start = startpoint_of(graph, path)
        crp = 0.0
        launch = None
        if graph.is_register_output(start):
            launch = graph.clock_pin(graph.nodes[start].instance)
        if kinds.get(v) == PO:
            capture = ClockPath([source], "source") if source is not None else None
        else:
            capture_pin = graph.clock_pin(graph.nodes[v].instance)
            capture = path_of(capture_pin) if capture_pin is not None else None
        if launch is not None and capture is not None:
            lp = path_of(launch)
            if "unreachable" in (lp.status, capture.status):
                unreachable += 1
            elif lp.pins[0] == capture.pins[0]:
                common = None
                for a, b in zip(lp.pins, capture.pins):
                    if a != b:
                        break
                    common = a
                crp = max(0.0, float(at[common][LR]) - float(_clock_early(at, common, clock_early)))
        out[v] = (crp, start)
    if unreachable:
        msg = f"{unreachable} critical endpoint(s) with a clock pin unreachable from {sdc.clock_port}; CRP set to 0"
        logger.warning(msg)
        if warnings is not None:
            warnings.append(msg)
    return out


def compute_tns_wns(results) -> tuple[float, float]:
    slacks = [r.slack_corrected for r in results]
    tns = math.fsum(s for s in slacks if s < 0) + 0.0
    wns = min([0.0] + slacks) + 0.0
    return tns, wns


def analyze(
    graph: TimingGraph,
    timing: PinTiming,
    sdc: SdcConstraints,
    *,
    model: DelayModel | None = None,
    clock_early: str = CLOCK_EARLY_RISE,
) -> SlackReport:
    if clock_early not in CLOCK_EARLY_MODES:
        raise ValueError(f"clock early mode must be one of {CLOCK_EARLY_MODES}")
    warnings = list(timing.warnings)
    kinds = classify_endpoints(graph)
    rats = estimate_rat(graph, timing, sdc, clock_early=clock_early, kinds=kinds)
    critical = find_critical_paths(graph, timing, rats, model=model)
    crps = crpr_correct(graph, timing, critical, sdc, clock_early=clock_early, kinds=kinds, warnings=warnings)
    nodes = graph.nodes
    results = []
    for v in sorted(rats):
        at = float(timing.at[v][LR])
        rat = rats[v]
        crp, start = crps.get(v, (0.0, None))
        results.append(
            EndpointResult(
                v, nodes[v].name, kinds[v] == PO, at, rat, crp, rat + crp, rat - at, rat + crp - at,
                start, None if start is None else nodes[start].name,
            )
        )
    unconstrained = [nodes[v].name for v in sorted(kinds) if kinds[v] == UNCONSTRAINED]
    if unconstrained:
        warnings.append(f"{len(unconstrained)} unconstrained endpoint(s) excluded from TNS/WNS")
    tns, wns = compute_tns_wns(results)
    settings = {
        "clock_period": sdc.clock_period,
        "clock_uncertainty": sdc.clock_uncertainty,
        "lut_shape": list(graph.lut_shape),
        "at_source": timing.source,
        "clock_early": clock_early,
    }
    return SlackReport(
        results, tns, wns, len(results),
        sum(1 for r in results if r.slack_corrected < 0), len(critical),
        unconstrained, settings, warnings,
    )


def _ns(x: float) -> str:
    s = f"{x:.3f}"
    return "0.000" if s == "-0.000" else s


def generate_report(report: SlackReport, fmt: str = "text") -> str:
    if fmt in ("structured", "json"):
        return json.dumps(report.to_dict(), indent=1, sort_keys=True) + "\n"
    if fmt != "text":
        raise ValueError(f"unknown report format {fmt!r}")
    s = report.settings
    lines = [
        f"TNS {_ns(report.tns)} WNS {_ns(report.wns)}",
        f"endpoints {report.endpoint_count} critical {report.critical_count} "
        f"unconstrained {len(report.unconstrained)}",
    ]
    if s:
        shape = "x".join(str(x) for x in s.get("lut_shape", ()))
        lines.append(
            f"period {_ns(s.get('clock_period', 0.0))} uncertainty {_ns(s.get('clock_uncertainty', 0.0))} "
            f"lut_shape {shape} at_source {s.get('at_source', '')}"
        )
    rows = sorted((r for r in report.endpoints if r.slack_corrected < 0), key=lambda r: (r.slack_corrected, r.endpoint))
    table = [("endpoint", "startpoint", "AT", "RAT", "CRP", "slack")]
    for r in rows:
        table.append((r.name, r.startpoint_name or "-", _ns(r.at), _ns(r.rat), _ns(r.crp), _ns(r.slack_corrected)))
    widths = [max(len(row[i]) for row in table) for i in range(6)]
    lines.append("")
    for row in table:
        cells = [row[0].ljust(widths[0]), row[1].ljust(widths[1])]
        cells += [row[i].rjust(widths[i]) for i in range(2, 6)]
        lines.append("  ".join(cells).rstrip())
    return "\n".join(lines) + "\n"


def parse_report(text: str) -> SlackReport:
    return SlackReport.from_dict(json.loads(text))
