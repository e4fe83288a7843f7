"""Per-pin arrival times and slews for the slack engine.

Three sources: ground-truth labels, an external prediction file (same record
format as labels), or a built-in pre-routing NLDM propagator.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .corners import CORNER_TABLES, CORNERS, EARLY
from .errors import GraphError, LabelError
from .graph import CELL, NET, TimingGraph
from .liberty import LibrarySet, TimingArc, lut_lookup
from .sdc import SdcConstraints
from .sdf import DelayLabels, parse_label_sidecar

logger = logging.getLogger(__name__)

LABELS = "labels"
EXTERNAL = "external"
PROPAGATED = "propagated"

DEFAULT_PI_SLEW = 0.05


@dataclass(eq=False)
class PinTiming:
    """Four-corner AT and slew per node id, as (n, 4) arrays in ns."""

    at: np.ndarray
    slew: np.ndarray
    source: str
    warnings: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.at)


class DelayModel:
    """Arc delays used both for propagation and for critical-path tracing.

    With ``libs`` the original library tables are used; without, the
    (resampled) tables stored on the graph's cell edges.
    """

    def __init__(self, graph: TimingGraph, libs: LibrarySet | None = None, net_delay_per_micron: float = 0.0):
        self.graph = graph
        self.net_delay_per_micron = net_delay_per_micron
        if libs is None:
            self.arcs = [e.arc for e in graph.cell_edges]
        else:
            by_key: dict[tuple[str, str, str], TimingArc] = {}
            self.arcs = []
            for e in graph.cell_edges:
                cls = graph.nodes[e.src].cell_class
                key = (cls, e.arc.related_input_pin, e.arc.output_pin)
                arc = by_key.get(key)
                if arc is None:
                    cell = libs.resolve(cls)
                    arc = next(
                        (a for a in cell.arcs if (a.related_input_pin, a.output_pin) == key[1:]),
                        e.arc,
                    )
                    by_key[key] = arc
                self.arcs.append(arc)
        self.loads = graph.loads

    def net_delay(self, k: int) -> float:
        if self.net_delay_per_micron:
            return self.net_delay_per_micron * self.graph.net_edges[k].length
        return 0.0

    def cell_delay(self, k: int, corner: int, slew: float, load: float) -> float | None:
        analysis, kind, _ = CORNER_TABLES[corner]
        lut = self.arcs[k].tables.get((kind, analysis))
        if lut is None:
            return None
        return lut_lookup(lut, slew, load)

    def cell_slew(self, k: int, corner: int, slew: float, load: float) -> float | None:
        analysis, _, kind = CORNER_TABLES[corner]
        lut = self.arcs[k].tables.get((kind, analysis))
        if lut is None:
            return None
        return lut_lookup(lut, slew, load)

    def edge_delay(self, kind: str, k: int, corner: int, src_slew: float, dst: int) -> float | None:
        if kind == NET:
            return self.net_delay(k)
        return self.cell_delay(k, corner, src_slew, self.loads[dst][corner])


def _level_order(graph: TimingGraph) -> list[int]:
    if graph.levels is None:
        raise GraphError("graph has no topological levels; run compute_levels first")
    levels = graph.levels
    return sorted(range(len(levels)), key=levels.__getitem__)


def _sweep(
    graph: TimingGraph,
    model: DelayModel,
    source_at,
    pi_slew: float,
    at: list[list[float] | None],
    slew: list[list[float] | None],
    warnings: list[str],
) -> None:
    """Fill every ``None`` entry of ``at``/``slew`` in level order."""
    fanin = graph.fanin
    loads = model.loads
    skipped = 0
    for v in _level_order(graph):
        if at[v] is not None:
            if slew[v] is None:
                slew[v] = [pi_slew] * 4
            continue
        fin = fanin[v]
        if not fin:
            at[v] = [source_at(v)] * 4
            slew[v] = [pi_slew] * 4
            continue
        new_at = [0.0] * 4
        new_slew = [pi_slew] * 4
        load = loads[v]
        for c in range(4):
            early = c < 2
            best = None
            best_slew = pi_slew
            for kind, u, k in fin:
                a_u = at[u][c]
                s_u = slew[u][c]
                if kind == NET:
                    cand = a_u + model.net_delay(k)
                    cand_slew = s_u
                else:
                    d = model.cell_delay(k, c, s_u, load[c])
                    if d is None:
                        skipped += 1
                        continue
                    cand = a_u + d
                    if best is not None and (cand >= best if early else cand <= best):
                        continue
                    out_slew = model.cell_slew(k, c, s_u, load[c])
                    cand_slew = s_u if out_slew is None else out_slew
                if best is None or (cand < best if early else cand > best):
                    best, best_slew = cand, cand_slew
            if best is not None:
                new_at[c] = best
                new_slew[c] = best_slew
        at[v] = new_at
        slew[v] = new_slew
    if skipped:
        msg = f"{skipped} arc/corner lookup(s) skipped for missing delay tables"
        warnings.append(msg)
        logger.warning(msg)


def _source_at(graph: TimingGraph, sdc: SdcConstraints | None):
    nodes = graph.nodes

    def source_at(v: int) -> float:
        node = nodes[v]
        if sdc is None or node.instance is not None:
            return 0.0
        if node.name == sdc.clock_port:
            return 0.0
        if node.port_direction in ("input", "inout"):
            return sdc.input_delay(node.name)
        return 0.0

    return source_at


def propagate_at(
    graph: TimingGraph,
    libs: LibrarySet | None,
    sdc: SdcConstraints,
    *,
    pi_slew: float = DEFAULT_PI_SLEW,
    net_delay_per_micron: float = 0.0,
) -> PinTiming:
    """Level-order NLDM forward propagation without parasitics.

    Late corners take the max over fanin arcs, early corners the min.
    Transitions propagate same-sense (no unateness).
    """
    n = len(graph.nodes)
    model = DelayModel(graph, libs, net_delay_per_micron)
    at: list = [None] * n
    slew: list = [None] * n
    warnings: list[str] = []
    _sweep(graph, model, _source_at(graph, sdc), pi_slew, at, slew, warnings)
    return PinTiming(np.array(at, dtype=float).reshape(n, 4), np.array(slew, dtype=float).reshape(n, 4), PROPAGATED, warnings)


def _from_pin_labels(
    graph: TimingGraph,
    labels: DelayLabels,
    source: str,
    strict: bool,
    sdc: SdcConstraints | None,
    pi_slew: float,
    net_delay_per_micron: float,
    libs: LibrarySet | None,
) -> PinTiming:
    n = len(graph.nodes)
    ids = graph.ids
    warnings: list[str] = []
    at: list = [None] * n
    slew: list = [None] * n
    extra = 0
    for pin, vals in labels.pin_at.items():
        v = ids.get(pin)
        if v is None:
            extra += 1
            continue
        if all(x is not None for x in vals):
            at[v] = [float(x) for x in vals]
    for pin, vals in labels.pin_slew.items():
        v = ids.get(pin)
        if v is not None and all(x is not None for x in vals):
            slew[v] = [float(x) for x in vals]
    if extra:
        msg = f"{extra} labelled pin(s) are not in the graph and were ignored"
        warnings.append(msg)
        logger.warning(msg)
    missing = [graph.nodes[v].name for v in range(n) if at[v] is None]
    if missing:
        if strict:
            shown = ", ".join(missing[:20]) + (" ..." if len(missing) > 20 else "")
            raise LabelError(f"{len(missing)} pin(s) have no complete AT label: {shown}", missing)
        msg = f"{len(missing)} pin(s) without AT labels filled by local propagation"
        warnings.append(msg)
        logger.warning(msg)
    model = DelayModel(graph, libs, net_delay_per_micron)
    _sweep(graph, model, _source_at(graph, sdc), pi_slew, at, slew, warnings)
    return PinTiming(np.array(at, dtype=float).reshape(n, 4), np.array(slew, dtype=float).reshape(n, 4), source, warnings)


def at_from_labels(
    graph: TimingGraph,
    labels: DelayLabels,
    *,
    strict: bool = True,
    sdc: SdcConstraints | None = None,
    pi_slew: float = DEFAULT_PI_SLEW,
    net_delay_per_micron: float = 0.0,
    libs: LibrarySet | None = None,
) -> PinTiming:
    """AT/slew copied from labels. Unlabelled pins are an error unless ``strict`` is off."""
    return _from_pin_labels(graph, labels, LABELS, strict, sdc, pi_slew, net_delay_per_micron, libs)


def at_from_external(
    graph: TimingGraph,
    document: str | DelayLabels,
    *,
    strict: bool = True,
    sdc: SdcConstraints | None = None,
    pi_slew: float = DEFAULT_PI_SLEW,
    net_delay_per_micron: float = 0.0,
    libs: LibrarySet | None = None,
    source: str | None = None,
) -> PinTiming:
    """AT/slew from a prediction file in the label record format."""
    labels = parse_label_sidecar(document, source=source) if isinstance(document, str) else document
    if labels.pin_rat:
        labels.warnings.append("RAT records in a prediction file are ignored")
    timing = _from_pin_labels(graph, labels, EXTERNAL, strict, sdc, pi_slew, net_delay_per_micron, libs)
    timing.warnings[:0] = labels.warnings
    return timing


def timing_to_labels(graph: TimingGraph, timing: PinTiming) -> DelayLabels:
    """AT and slew of every pin as label records."""
    labels = DelayLabels()
    for v, node in enumerate(graph.nodes):
        labels.pin_at[node.name] = tuple(float(x) for x in timing.at[v])
        labels.pin_slew[node.name] = tuple(float(x) for x in timing.slew[v])
    return labels


__all__ = [
    "CORNERS",
    "DEFAULT_PI_SLEW",
    "DelayModel",
    "EARLY",
    "PinTiming",
    "at_from_external",
    "at_from_labels",
    "propagate_at",
    "timing_to_labels",
]
