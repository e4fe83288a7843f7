"""DEF placement reader: die area, I/O pins, placed components and nets."""

from __future__ import annotations

import logging
import re
from bisect import bisect_right
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path

from .errors import ParseError, StructuralError
from .liberty import LibrarySet

logger = logging.getLogger(__name__)

Point = tuple[int, int]

PORT = "PIN"  # instance field of a net connection that refers to a design port

_TOKEN_RE = re.compile(r'"[^"]*"|[();]|[^\s();]+')

# sections skipped wholesale, each terminated by "END <name>"
_SKIPPED_SECTIONS = frozenset(
    {
        "SPECIALNETS", "VIAS", "NONDEFAULTRULES", "REGIONS", "GROUPS", "BLOCKAGES", "SLOTS",
        "FILLS", "SCANCHAINS", "PROPERTYDEFINITIONS", "PINPROPERTIES", "STYLES", "BEGINEXT",
    }
)


@dataclass
class Port:
    name: str
    direction: str  # input | output | inout
    location: Point
    net: str | None = None


@dataclass
class Component:
    instance: str
    cell_class: str
    location: Point
    orientation: str = "N"


@dataclass
class Net:
    name: str
    connections: list[tuple[str, str]]
    driver: int | None = None  # index into connections once resolved


@dataclass
class PhysicalDesign:
    name: str
    dbu_per_micron: int
    die: tuple[Point, Point, Point, Point]
    ports: list[Port] = field(default_factory=list)
    components: list[Component] = field(default_factory=list)
    nets: list[Net] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list, compare=False)
    diagnostics: list[tuple[str, str]] = field(default_factory=list, compare=False)

    @property
    def bbox(self) -> tuple[int, int, int, int]:
        xs = [p[0] for p in self.die]
        ys = [p[1] for p in self.die]
        return min(xs), min(ys), max(xs), max(ys)

    @cached_property
    def component_map(self) -> dict[str, Component]:
        return {c.instance: c for c in self.components}

    @cached_property
    def port_map(self) -> dict[str, Port]:
        return {p.name: p for p in self.ports}


def die_from_points(points: list[Point]) -> tuple[Point, Point, Point, Point]:
    xs = [p[0] for p in points]
    ys = [p[1] for p in points]
    xl, yl, xh, yh = min(xs), min(ys), max(xs), max(ys)
    return (xl, yl), (xh, yl), (xh, yh), (xl, yh)


class _Tokens:
    def __init__(self, text: str, source: str | None):
        text = re.sub(r"(?m)#.*$", "", text)
        self.source = source
        self.text = text
        matches = list(_TOKEN_RE.finditer(text))
        self.toks = [m.group() for m in matches]
        self.offsets = [m.start() for m in matches]
        self.pos = 0
        self._newlines = None

    def line(self, pos: int | None = None) -> int:
        if self._newlines is None:
            self._newlines = [m.start() for m in re.finditer("\n", self.text)]
        if pos is None:
            pos = self.pos
        if pos >= len(self.offsets):
            return len(self._newlines) + 1
        return bisect_right(self._newlines, self.offsets[pos]) + 1

    def error(self, message: str, pos: int | None = None) -> ParseError:
        return ParseError(message, self.line(pos), self.source)

    def statement(self) -> tuple[list[str], int]:
        start = self.pos
        toks = self.toks
        n = len(toks)
        i = start
        while i < n and toks[i] != ";":
            i += 1
        if i >= n:
            raise self.error("statement not terminated by ';'", start)
        self.pos = i + 1
        return toks[start:i], start


def _int(tok: str, t: _Tokens, pos: int) -> int:
    try:
        return int(tok)
    except ValueError:
        try:
            value = float(tok)
        except ValueError:
            raise t.error(f"expected a number, got {tok!r}", pos) from None
        if value != int(value):
            raise t.error(f"non-integer coordinate {tok!r}", pos) from None
        return int(value)


def _points(stmt: list[str], t: _Tokens, pos: int) -> list[Point]:
    pts = []
    i = 0
    while i < len(stmt):
        if stmt[i] == "(":
            if i + 3 >= len(stmt) or stmt[i + 3] != ")":
                raise t.error("malformed point", pos)
            pts.append((_int(stmt[i + 1], t, pos), _int(stmt[i + 2], t, pos)))
            i += 4
        else:
            i += 1
    return pts


def _placement(stmt: list[str], t: _Tokens, pos: int) -> tuple[Point, str] | None:
    for i, tok in enumerate(stmt):
        if tok in ("PLACED", "FIXED", "COVER") and i > 0 and stmt[i - 1] == "+":
            if i + 4 >= len(stmt) or stmt[i + 1] != "(" or stmt[i + 4] != ")":
                raise t.error(f"malformed {tok} location", pos)
            xy = (_int(stmt[i + 2], t, pos), _int(stmt[i + 3], t, pos))
            orient = stmt[i + 5] if i + 5 < len(stmt) and stmt[i + 5] != "+" else "N"
            return xy, orient
    return None


def _section(t: _Tokens, name: str):
    """Yield the '-' statements of a section up to its END."""
    while True:
        if t.pos >= len(t.toks):
            raise t.error(f"section {name} not closed by END {name}")
        if t.toks[t.pos] == "END":
            if t.pos + 1 < len(t.toks) and t.toks[t.pos + 1] == name:
                t.pos += 2
                return
            raise t.error(f"expected END {name}")
        stmt, pos = t.statement()
        if stmt and stmt[0] == "-":
            yield stmt, pos
        elif stmt:
            raise t.error(f"unexpected {stmt[0]!r} in {name}", pos)


def _skip_section(t: _Tokens, name: str) -> None:
    toks = t.toks
    n = len(toks)
    i = t.pos
    while i + 1 < n and not (toks[i] == "END" and toks[i + 1] == name):
        i += 1
    if i + 1 >= n:
        raise t.error(f"section {name} not closed by END {name}")
    t.pos = i + 2


def parse_def(text: str, *, source: str | None = None) -> PhysicalDesign:
    """Parse DEF text. Coordinates stay in database units."""
    t = _Tokens(text, source)
    name = ""
    dbu = 1000
    die_points: list[Point] | None = None
    ports: list[Port] = []
    components: list[Component] = []
    nets: list[Net] | None = None
    warnings: list[str] = []

    while t.pos < len(t.toks):
        head = t.toks[t.pos]
        if head == "END":
            if t.pos + 1 < len(t.toks) and t.toks[t.pos + 1] == "DESIGN":
                break
            raise t.error("unexpected END")
        stmt, pos = t.statement()
        if not stmt:
            continue
        key = stmt[0]
        if key == "DESIGN" and len(stmt) > 1:
            name = stmt[1]
        elif key == "UNITS":
            if len(stmt) != 4 or stmt[1:3] != ["DISTANCE", "MICRONS"]:
                raise t.error("expected UNITS DISTANCE MICRONS <n>", pos)
            dbu = _int(stmt[3], t, pos)
        elif key == "DIEAREA":
            die_points = _points(stmt, t, pos)
            if len(die_points) < 2:
                raise t.error("DIEAREA needs at least two points", pos)
        elif key == "COMPONENTS":
            for comp, cpos in _section(t, "COMPONENTS"):
                if len(comp) < 3:
                    raise t.error("component needs a name and a cell class", cpos)
                placed = _placement(comp, t, cpos)
                if placed is None:
                    msg = f"component {comp[1]} has no placement, using (0, 0)"
                    warnings.append(msg)
                    logger.warning(msg)
                    placed = ((0, 0), "N")
                components.append(Component(comp[1], comp[2], placed[0], placed[1]))
        elif key == "PINS":
            for pin, ppos in _section(t, "PINS"):
                if len(pin) < 2:
                    raise t.error("pin needs a name", ppos)
                net = direction = None
                for i, tok in enumerate(pin[:-1]):
                    if pin[i - 1] == "+" and tok == "NET":
                        net = pin[i + 1]
                    elif pin[i - 1] == "+" and tok == "DIRECTION":
                        direction = pin[i + 1].lower()
                if direction is None:
                    warnings.append(f"pin {pin[1]} has no DIRECTION, assuming input")
                    direction = "input"
                elif direction not in ("input", "output", "inout", "feedthru"):
                    raise t.error(f"pin {pin[1]}: bad direction {direction!r}", ppos)
                if direction == "feedthru":
                    direction = "inout"
                placed = _placement(pin, t, ppos)
                if placed is None:
                    msg = f"pin {pin[1]} has no placement, using (0, 0)"
                    warnings.append(msg)
                    logger.warning(msg)
                    placed = ((0, 0), "N")
                ports.append(Port(pin[1], direction, placed[0], net))
        elif key == "NETS":
            nets = []
            for stmt_n, npos in _section(t, "NETS"):
                if len(stmt_n) < 2:
                    raise t.error("net needs a name", npos)
                conns = []
                i = 2
                while i < len(stmt_n) and stmt_n[i] != "+":
                    if stmt_n[i] != "(":
                        raise t.error(f"net {stmt_n[1]}: expected '('", npos)
                    j = stmt_n.index(")", i) if ")" in stmt_n[i:] else -1
                    if j < 0 or j - i < 3:
                        raise t.error(f"net {stmt_n[1]}: malformed connection", npos)
                    inst, pin_name = stmt_n[i + 1], stmt_n[i + 2]
                    if inst == "*":
                        warnings.append(f"net {stmt_n[1]}: wildcard connection skipped")
                    else:
                        conns.append((inst, pin_name))
                    i = j + 1
                nets.append(Net(stmt_n[1], conns))
        elif key in _SKIPPED_SECTIONS:
            _skip_section(t, key)

    if die_points is None:
        raise ParseError("missing DIEAREA", None, source)
    if nets is None:
        raise ParseError("missing NETS section", None, source)

    design = PhysicalDesign(name, dbu, die_from_points(die_points), ports, components, nets, warnings)
    comps = design.component_map
    portmap = design.port_map
    for net in nets:
        for inst, pin_name in net.connections:
            if inst == PORT:
                if pin_name not in portmap:
                    raise StructuralError(f"net {net.name} references undeclared pin {pin_name}")
            elif inst not in comps:
                raise StructuralError(f"net {net.name} references undeclared component {inst}")
    return design


def read_def(path: str | Path) -> PhysicalDesign:
    path = Path(path)
    return parse_def(path.read_text(), source=str(path))


def resolve_net_drivers(design: PhysicalDesign, libs: LibrarySet) -> PhysicalDesign:
    """Annotate each net with its driver.

    Nets without a driver or with several are left with ``driver=None`` and
    reported in ``diagnostics``; graph construction ignores them.
    """
    comps = design.component_map
    ports = design.port_map
    missing = libs.missing({c.cell_class for c in design.components})
    if missing:
        raise StructuralError(f"cell classes missing from the libraries: {', '.join(missing)}")
    nets = []
    diagnostics = []
    for net in design.nets:
        drivers, inouts = [], []
        for k, (inst, pin_name) in enumerate(net.connections):
            if inst == PORT:
                direction = ports[pin_name].direction
                if direction == "input":
                    drivers.append(k)
                elif direction == "inout":
                    inouts.append(k)
            else:
                cell = libs.resolve(comps[inst].cell_class)
                pin = cell.pins.get(pin_name)
                if pin is None:
                    raise StructuralError(f"net {net.name}: cell {cell.name} has no pin {pin_name}")
                if pin.direction == "output":
                    drivers.append(k)
                elif pin.direction == "inout":
                    inouts.append(k)
        driver = None
        if len(drivers) == 1:
            driver = drivers[0]
        elif len(drivers) > 1:
            diagnostics.append((net.name, "multi-driver"))
        elif len(inouts) == 1:
            driver = inouts[0]
        elif len(inouts) > 1:
            diagnostics.append((net.name, "multi-driver"))
        else:
            diagnostics.append((net.name, "undriven"))
        nets.append(Net(net.name, list(net.connections), driver))
    for net_name, problem in diagnostics:
        logger.warning("net %s excluded: %s", net_name, problem)
    return replace(design, nets=nets, diagnostics=diagnostics, warnings=list(design.warnings))


def write_def(design: PhysicalDesign) -> str:
    """Serialize the supported subset back to DEF."""
    xl, yl, xh, yh = design.bbox
    out = [
        "VERSION 5.8 ;",
        'DIVIDERCHAR "/" ;',
        'BUSBITCHARS "[]" ;',
        f"DESIGN {design.name or 'top'} ;",
        f"UNITS DISTANCE MICRONS {design.dbu_per_micron} ;",
        f"DIEAREA ( {xl} {yl} ) ( {xh} {yh} ) ;",
        "",
        f"COMPONENTS {len(design.components)} ;",
    ]
    for c in design.components:
        out.append(f"  - {c.instance} {c.cell_class} + PLACED ( {c.location[0]} {c.location[1]} ) {c.orientation} ;")
    out += ["END COMPONENTS", "", f"PINS {len(design.ports)} ;"]
    for p in design.ports:
        net = f" + NET {p.net}" if p.net else ""
        out.append(
            f"  - {p.name}{net} + DIRECTION {p.direction.upper()} + USE SIGNAL"
            f" + PLACED ( {p.location[0]} {p.location[1]} ) N ;"
        )
    out += ["END PINS", "", f"NETS {len(design.nets)} ;"]
    for net in design.nets:
        conns = " ".join(f"( {inst} {pin} )" for inst, pin in net.connections)
        out.append(f"  - {net.name} {conns} ;")
    out += ["END NETS", "", "END DESIGN", ""]
    return "\n".join(out)
