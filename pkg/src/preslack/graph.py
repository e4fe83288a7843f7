"""Pin-level heterogeneous timing graph.

Every pin is a node. Net edges run from a net's driver to each sink, cell
edges from a cell input to a cell output along a Liberty timing arc. The
"forward" graph is net edges in driver-to-sink direction plus cell edges;
endpoints are nodes without forward fanout.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Any

from .corners import ANALYSES, CORNERS, TABLE_KINDS
from .errors import GraphError, StructuralError
from .liberty import DEFAULT_LUT_SHAPE, LibrarySet, Lut, TimingArc
from .physical import PORT, PhysicalDesign, resolve_net_drivers
from .sdf import DelayLabels

logger = logging.getLogger(__name__)

SCHEMA = "preslack.timing-graph"
SCHEMA_VERSION = 1

NET = "net"
CELL = "cell"

FANIN = "fanin"
FANOUT = "fanout"

NODE_FEATURES = (
    "is_primary_io",
    "dist_left",
    "dist_bottom",
    "dist_right",
    "dist_top",
    "cap_ER",
    "cap_EF",
    "cap_LR",
    "cap_LF",
    "is_fanout",
)

TABLE_ORDER = tuple((kind, a) for a in ANALYSES for kind in TABLE_KINDS)


@dataclass
class PinNode:
    name: str
    instance: str | None  # None for design ports
    pin: str
    cell_class: str | None
    is_primary_io: bool
    port_direction: str | None
    boundary_distances: tuple[float, float, float, float]  # left, bottom, right, top (um)
    capacitance: tuple[float, float, float, float]
    direction: str  # fanin | fanout
    is_clock_pin: bool
    location: tuple[float, float]  # um

    def features(self) -> list[float]:
        return [
            1.0 if self.is_primary_io else 0.0,
            *self.boundary_distances,
            *self.capacitance,
            1.0 if self.direction == FANOUT else 0.0,
        ]


@dataclass(frozen=True)
class NetEdge:
    src: int
    dst: int
    length: float  # Manhattan, um
    net: str = ""


@dataclass
class CellEdge:
    src: int
    dst: int
    arc: TimingArc

    @property
    def valid(self) -> tuple[bool, ...]:
        return self.arc.valid_flags


@dataclass
class TimingGraph:
    name: str
    nodes: list[PinNode]
    net_edges: list[NetEdge]
    cell_edges: list[CellEdge]
    die: tuple[float, float, float, float]  # xl, yl, xh, yh in um
    lut_shape: tuple[int, int] = DEFAULT_LUT_SHAPE
    endpoints: list[int] = field(default_factory=list)
    levels: list[int] | None = None
    removed_edges: list[tuple[str, int, int]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.nodes)

    @cached_property
    def ids(self) -> dict[str, int]:
        return {node.name: i for i, node in enumerate(self.nodes)}

    @cached_property
    def fanin(self) -> list[list[tuple[str, int, int]]]:
        """Per node, incoming forward edges as (kind, src, edge index)."""
        out: list[list[tuple[str, int, int]]] = [[] for _ in self.nodes]
        for k, e in enumerate(self.net_edges):
            out[e.dst].append((NET, e.src, k))
        for k, e in enumerate(self.cell_edges):
            out[e.dst].append((CELL, e.src, k))
        return out

    @cached_property
    def fanout(self) -> list[list[tuple[str, int, int]]]:
        """Per node, outgoing forward edges as (kind, dst, edge index)."""
        out: list[list[tuple[str, int, int]]] = [[] for _ in self.nodes]
        for k, e in enumerate(self.net_edges):
            out[e.src].append((NET, e.dst, k))
        for k, e in enumerate(self.cell_edges):
            out[e.src].append((CELL, e.dst, k))
        return out

    @cached_property
    def instance_nodes(self) -> dict[str, list[int]]:
        out: dict[str, list[int]] = {}
        for i, node in enumerate(self.nodes):
            if node.instance is not None:
                out.setdefault(node.instance, []).append(i)
        return out

    @cached_property
    def loads(self) -> list[tuple[float, float, float, float]]:
        """Per node, the summed capacitance of the sinks of the net it drives."""
        acc = [[0.0, 0.0, 0.0, 0.0] for _ in self.nodes]
        for e in self.net_edges:
            cap = self.nodes[e.dst].capacitance
            row = acc[e.src]
            for c in range(4):
                row[c] += cap[c]
        return [tuple(row) for row in acc]

    def clock_pin(self, instance: str) -> int | None:
        for i in self.instance_nodes.get(instance, ()):
            if self.nodes[i].is_clock_pin:
                return i
        return None

    def is_register_output(self, node_id: int) -> bool:
        node = self.nodes[node_id]
        if node.instance is None or node.is_clock_pin:
            return False
        clk = self.clock_pin(node.instance)
        return clk is not None and any(kind == CELL and src == clk for kind, src, _ in self.fanin[node_id])


def _endpoints(n: int, net_edges, cell_edges) -> list[int]:
    has_out = [False] * n
    for e in net_edges:
        has_out[e.src] = True
    for e in cell_edges:
        has_out[e.src] = True
    return [i for i in range(n) if not has_out[i]]


def build_graph(
    design: PhysicalDesign,
    libs: LibrarySet,
    lut_shape: tuple[int, int] = DEFAULT_LUT_SHAPE,
) -> TimingGraph:
    """Build the graph; cycles are left in place (see :func:`remove_cycles`)."""
    rows, cols = lut_shape
    design = resolve_net_drivers(design, libs)
    dbu = float(design.dbu_per_micron)
    xl, yl, xh, yh = design.bbox

    def geometry(loc):
        x = min(max(loc[0], xl), xh)
        y = min(max(loc[1], yl), yh)
        dist = ((x - xl) / dbu, (y - yl) / dbu, (xh - x) / dbu, (yh - y) / dbu)
        return dist, (loc[0] / dbu, loc[1] / dbu)

    # net role of every connected pin, used for the fanin/fanout feature
    role: dict[tuple[str, str], str] = {}
    for net in design.nets:
        if net.driver is None:
            continue
        for k, conn in enumerate(net.connections):
            role[conn] = FANOUT if k == net.driver else FANIN

    nodes: list[PinNode] = []
    dbu_loc: list[tuple[int, int]] = []
    ids: dict[tuple[str, str], int] = {}
    for port in design.ports:
        dist, loc = geometry(port.location)
        default = FANOUT if port.direction in ("input", "inout") else FANIN
        ids[(PORT, port.name)] = len(nodes)
        nodes.append(
            PinNode(
                port.name, None, port.name, None, True, port.direction, dist, (0.0,) * 4,
                role.get((PORT, port.name), default), False, loc,
            )
        )
        dbu_loc.append(port.location)

    arcs_cache: dict[str, list[TimingArc]] = {}
    cell_edges: list[CellEdge] = []
    for comp in design.components:
        cell = libs.resolve(comp.cell_class)
        dist, loc = geometry(comp.location)
        for pin in cell.pins.values():
            key = (comp.instance, pin.name)
            default = FANOUT if pin.direction in ("output", "inout") else FANIN
            ids[key] = len(nodes)
            nodes.append(
                PinNode(
                    f"{comp.instance}/{pin.name}", comp.instance, pin.name, cell.name, False, None,
                    dist, tuple(pin.capacitance), role.get(key, default), pin.is_clock, loc,
                )
            )
            dbu_loc.append(comp.location)
        arcs = arcs_cache.get(cell.name)
        if arcs is None:
            arcs = arcs_cache[cell.name] = [arc.interpolated(rows, cols) for arc in cell.arcs]
        for arc in arcs:
            cell_edges.append(
                CellEdge(ids[(comp.instance, arc.related_input_pin)], ids[(comp.instance, arc.output_pin)], arc)
            )

    net_edges: list[NetEdge] = []
    for net in design.nets:
        if net.driver is None:
            continue
        try:
            conn_ids = [ids[c] for c in net.connections]
        except KeyError as exc:
            raise StructuralError(f"net {net.name} references unknown pin {exc.args[0]}") from None
        src = conn_ids[net.driver]
        sx, sy = dbu_loc[src]
        for k, dst in enumerate(conn_ids):
            if k == net.driver or dst == src:
                continue
            dx, dy = dbu_loc[dst]
            net_edges.append(NetEdge(src, dst, (abs(dx - sx) + abs(dy - sy)) / dbu, net.name))

    return TimingGraph(
        design.name,
        nodes,
        net_edges,
        cell_edges,
        (xl / dbu, yl / dbu, xh / dbu, yh / dbu),
        (rows, cols),
        _endpoints(len(nodes), net_edges, cell_edges),
    )


def _find_cuts(graph: TimingGraph, skip: set[tuple[str, int]]) -> list[tuple[str, int]]:
    """One DFS pass; returns the edges to cut for every back-edge found."""
    n = len(graph.nodes)
    out: list[list[tuple[int, str, int]]] = [[] for _ in range(n)]
    indeg = [0] * n
    for k, e in enumerate(graph.net_edges):
        if (NET, k) not in skip:
            out[e.src].append((e.dst, NET, k))
            indeg[e.dst] += 1
    for k, e in enumerate(graph.cell_edges):
        if (CELL, k) not in skip:
            out[e.src].append((e.dst, CELL, k))
            indeg[e.dst] += 1
    for lst in out:
        lst.sort()

    WHITE, GRAY, BLACK = 0, 1, 2
    color = [WHITE] * n
    cuts: list[tuple[str, int]] = []
    roots = [v for v in range(n) if indeg[v] == 0] + list(range(n))
    for root in roots:
        if color[root] != WHITE:
            continue
        color[root] = GRAY
        # stack entries: (node, next child index, edge that led here)
        stack: list[list[Any]] = [[root, 0, None]]
        while stack:
            top = stack[-1]
            u, i = top[0], top[1]
            if i >= len(out[u]):
                color[u] = BLACK
                stack.pop()
                continue
            top[1] = i + 1
            v, kind, k = out[u][i]
            if color[v] == WHITE:
                color[v] = GRAY
                stack.append([v, 0, (kind, k)])
            elif color[v] == GRAY:
                cut = (kind, k)
                if kind == NET:
                    # cutting a net edge would orphan its sink; prefer the
                    # nearest cell edge on the same cycle
                    for frame in reversed(stack):
                        if frame[0] == v:
                            break
                        if frame[2] is not None and frame[2][0] == CELL:
                            cut = frame[2]
                            break
                if cut not in cuts:
                    cuts.append(cut)
    return cuts


def remove_cycles(graph: TimingGraph) -> TimingGraph:
    """Cut back-edges found by depth-first search until the forward graph is acyclic."""
    removed: set[tuple[str, int]] = set()
    order: list[tuple[str, int]] = []
    while True:
        cuts = _find_cuts(graph, removed)
        if not cuts:
            break
        for c in cuts:
            removed.add(c)
            order.append(c)
    if not removed:
        return graph
    removed_edges = []
    for kind, k in order:
        e = graph.net_edges[k] if kind == NET else graph.cell_edges[k]
        removed_edges.append((kind, e.src, e.dst))
        logger.info("cycle removal cut %s edge %s -> %s", kind, graph.nodes[e.src].name, graph.nodes[e.dst].name)
    net_edges = [e for k, e in enumerate(graph.net_edges) if (NET, k) not in removed]
    cell_edges = [e for k, e in enumerate(graph.cell_edges) if (CELL, k) not in removed]
    return replace(
        graph,
        net_edges=net_edges,
        cell_edges=cell_edges,
        endpoints=_endpoints(len(graph.nodes), net_edges, cell_edges),
        levels=None,
        removed_edges=list(graph.removed_edges) + removed_edges,
    )


def compute_levels(graph: TimingGraph) -> tuple[list[int], list[list[int]]]:
    """Topological level of every node and the nodes grouped by level.

    Sources are level 0; every other node sits one above its highest
    forward predecessor.
    """
    n = len(graph.nodes)
    indeg = [len(f) for f in graph.fanin]
    fanout = graph.fanout
    levels = [0] * n
    frontier = [v for v in range(n) if indeg[v] == 0]
    buckets: list[list[int]] = []
    seen = 0
    while frontier:
        buckets.append(frontier)
        seen += len(frontier)
        nxt = []
        for u in frontier:
            lu = levels[u] + 1
            for _, v, _ in fanout[u]:
                if levels[v] < lu:
                    levels[v] = lu
                indeg[v] -= 1
                if indeg[v] == 0:
                    nxt.append(v)
        nxt.sort()
        frontier = nxt
    if seen != n:
        raise GraphError(f"cycle detected: {n - seen} node(s) never became ready; run remove_cycles first")
    return levels, buckets


def prepare_graph(
    design: PhysicalDesign, libs: LibrarySet, lut_shape: tuple[int, int] = DEFAULT_LUT_SHAPE
) -> TimingGraph:
    """build_graph, remove_cycles and compute_levels in one go."""
    graph = remove_cycles(build_graph(design, libs, lut_shape))
    levels, _ = compute_levels(graph)
    graph.levels = levels
    return graph


# ---------------------------------------------------------------------------
# interchange document


def _table_key(kind: str, analysis: str) -> str:
    return f"{analysis}_{kind}"


def _corner_list(values) -> list[float | None]:
    return [None if v is None else float(v) for v in values]


def export_graph(graph: TimingGraph, labels: DelayLabels | None = None) -> dict:
    """Self-describing JSON-ready document of the graph (and labels, if given)."""
    nodes = graph.nodes
    doc: dict[str, Any] = {
        "schema": SCHEMA,
        "version": SCHEMA_VERSION,
        "name": graph.name,
        "die": list(graph.die),
        "lut_shape": list(graph.lut_shape),
        "node_feature_columns": list(NODE_FEATURES),
        "nodes": {
            "name": [n.name for n in nodes],
            "instance": [n.instance for n in nodes],
            "pin": [n.pin for n in nodes],
            "cell_class": [n.cell_class for n in nodes],
            "port_direction": [n.port_direction for n in nodes],
            "is_clock_pin": [n.is_clock_pin for n in nodes],
            "location": [list(n.location) for n in nodes],
            "features": [n.features() for n in nodes],
        },
        "net_edges": {
            "src": [e.src for e in graph.net_edges],
            "dst": [e.dst for e in graph.net_edges],
            "length": [e.length for e in graph.net_edges],
            "net": [e.net for e in graph.net_edges],
        },
        "cell_edge_tables": [_table_key(kind, a) for kind, a in TABLE_ORDER],
        "cell_edges": [],
        "endpoints": list(graph.endpoints),
        "levels": None if graph.levels is None else list(graph.levels),
        "removed_edges": [list(r) for r in graph.removed_edges],
    }
    for e in graph.cell_edges:
        tables = {}
        for kind, a in TABLE_ORDER:
            lut = e.arc.tables.get((kind, a))
            tables[_table_key(kind, a)] = None if lut is None else {
                "index1": list(lut.index1),
                "index2": list(lut.index2),
                "values": lut.flat_values(),
            }
        doc["cell_edges"].append(
            {
                "src": e.src,
                "dst": e.dst,
                "related_pin": e.arc.related_input_pin,
                "output_pin": e.arc.output_pin,
                "valid": list(e.valid),
                "is_valid": e.arc.is_valid,
                "tables": tables,
            }
        )
    if labels is not None:
        doc["labels"], doc["label_warnings"] = _export_labels(graph, labels)
    return doc


def _export_labels(graph: TimingGraph, labels: DelayLabels):
    ids = graph.ids
    warnings = []
    empty = [None] * 4
    out: dict[str, Any] = {"corners": list(CORNERS)}
    for key, table in (("at", labels.pin_at), ("slew", labels.pin_slew), ("rat", labels.pin_rat)):
        unknown = sorted(p for p in table if p not in ids)
        if unknown:
            warnings.append(f"{len(unknown)} {key} label pin(s) not in graph, e.g. {unknown[0]}")
        out[key] = [_corner_list(table[n.name]) if n.name in table else empty for n in graph.nodes]
    nodes = graph.nodes
    out["net_delay"] = [
        _corner_list(labels.net_delays.get((nodes[e.src].name, nodes[e.dst].name), empty)) for e in graph.net_edges
    ]
    out["cell_delay"] = [
        _corner_list(
            labels.cell_delays.get(
                (nodes[e.src].instance, e.arc.related_input_pin, e.arc.output_pin), empty
            )
        )
        for e in graph.cell_edges
    ]
    return out, warnings


def import_graph(doc: dict) -> TimingGraph:
    """Inverse of :func:`export_graph` (labels are not part of the graph)."""
    if doc.get("schema") != SCHEMA:
        raise GraphError(f"not a timing-graph document (schema {doc.get('schema')!r})")
    if doc.get("version") != SCHEMA_VERSION:
        raise GraphError(f"unsupported timing-graph version {doc.get('version')!r}")
    nd = doc["nodes"]
    nodes = []
    for i, name in enumerate(nd["name"]):
        f = nd["features"][i]
        nodes.append(
            PinNode(
                name,
                nd["instance"][i],
                nd["pin"][i],
                nd["cell_class"][i],
                bool(f[0]),
                nd["port_direction"][i],
                tuple(f[1:5]),
                tuple(f[5:9]),
                FANOUT if f[9] else FANIN,
                bool(nd["is_clock_pin"][i]),
                tuple(nd["location"][i]),
            )
        )
    ne = doc["net_edges"]
    net_edges = [NetEdge(s, d, l, n) for s, d, l, n in zip(ne["src"], ne["dst"], ne["length"], ne["net"])]
    cell_edges = []
    for rec in doc["cell_edges"]:
        tables = {}
        for kind, a in TABLE_ORDER:
            t = rec["tables"].get(_table_key(kind, a))
            if t is None:
                continue
            n2 = len(t["index2"])
            vals = t["values"]
            tables[(kind, a)] = Lut(
                list(t["index1"]), list(t["index2"]), [vals[r * n2 : (r + 1) * n2] for r in range(len(t["index1"]))]
            )
        cell_edges.append(CellEdge(rec["src"], rec["dst"], TimingArc(rec["related_pin"], rec["output_pin"], tables)))
    return TimingGraph(
        doc["name"],
        nodes,
        net_edges,
        cell_edges,
        tuple(doc["die"]),
        tuple(doc["lut_shape"]),
        list(doc["endpoints"]),
        None if doc["levels"] is None else list(doc["levels"]),
        [tuple(r) for r in doc["removed_edges"]],
    )
