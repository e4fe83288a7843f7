"""Liberty (.lib) reader for the NLDM subset used by the timing graph.

Only cells, pins (direction, capacitances, clock flag), delay timing groups
and their four table kinds are extracted. Everything else in the file is
parsed for balance and then ignored.
"""

from __future__ import annotations

import logging
import math
import re
from bisect import bisect_right
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .corners import ANALYSES, EARLY, LATE, TABLE_KINDS
from .errors import ParseError, StructuralError

logger = logging.getLogger(__name__)

# Lookups beyond the table edge extrapolate at most this many edge spans.
EXTRAPOLATION_SPANS = 10.0

DEFAULT_LUT_SHAPE = (7, 7)

CLOCK_PIN_NAMES = frozenset({"CLK", "CK", "CLKN"})

# timing_type values that describe checks rather than propagation delays
_CONSTRAINT_TIMING = re.compile(
    r"^(setup|hold|recovery|removal|skew|non_seq|nochange|min_pulse|minimum_period|max_clock)"
)

_TIME_UNITS = {"s": 1e9, "ms": 1e6, "us": 1e3, "ns": 1.0, "ps": 1e-3, "fs": 1e-6}


@dataclass
class Lut:
    """Two-dimensional NLDM table indexed by input slew (rows) and load (columns)."""

    index1: list[float]
    index2: list[float]
    values: list[list[float]]

    def __post_init__(self):
        for name, index in (("index1", self.index1), ("index2", self.index2)):
            if len(index) < 1:
                raise ValueError(f"{name} must have at least one breakpoint")
            if any(b <= a for a, b in zip(index, index[1:])):
                raise ValueError(f"{name} must be strictly increasing: {index}")
        if len(self.values) != len(self.index1) or any(len(row) != len(self.index2) for row in self.values):
            raise ValueError(
                f"values shape does not match indices {len(self.index1)}x{len(self.index2)}"
            )

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.index1), len(self.index2)

    @classmethod
    def constant(cls, value: float) -> Lut:
        return cls([0.0], [0.0], [[float(value)]])

    def flat_values(self) -> list[float]:
        return [v for row in self.values for v in row]


def _axis_position(index: Sequence[float], x: float) -> tuple[int, int, float]:
    n = len(index)
    if n == 1:
        return 0, 0, 0.0
    if x < index[0]:
        x = max(x, index[0] - EXTRAPOLATION_SPANS * (index[1] - index[0]))
    elif x > index[-1]:
        x = min(x, index[-1] + EXTRAPOLATION_SPANS * (index[-1] - index[-2]))
    i = bisect_right(index, x) - 1
    if i < 0:
        i = 0
    elif i > n - 2:
        i = n - 2
    lo = index[i]
    return i, i + 1, (x - lo) / (index[i + 1] - lo)


def lut_lookup(lut: Lut, x1: float, x2: float) -> float:
    """Bilinear lookup with clamped linear extrapolation outside the grid."""
    if not (math.isfinite(x1) and math.isfinite(x2)):
        raise ValueError(f"non-finite lookup point ({x1}, {x2})")
    i0, i1, t = _axis_position(lut.index1, x1)
    j0, j1, u = _axis_position(lut.index2, x2)
    v = lut.values
    return (
        (1.0 - t) * (1.0 - u) * v[i0][j0]
        + (1.0 - t) * u * v[i0][j1]
        + t * (1.0 - u) * v[i1][j0]
        + t * u * v[i1][j1]
    )


def _resample_axis(index: list[float], target: int) -> list[float]:
    if len(index) == target:
        return list(index)
    if len(index) == 1:
        # constant along this axis; any increasing breakpoints will do
        return [index[0] + k for k in range(target)]
    return [float(x) for x in np.linspace(index[0], index[-1], target)]


def interpolate_lut(lut: Lut, target_rows: int, target_cols: int) -> Lut:
    """Resample ``lut`` onto a ``target_rows`` x ``target_cols`` grid.

    An axis that already has the target length is kept verbatim; any other
    axis gets uniformly spaced breakpoints spanning the source range.
    """
    if int(target_rows) != target_rows or int(target_cols) != target_cols:
        raise ValueError("target shape must be integral")
    if target_rows < 1 or target_cols < 1:
        raise ValueError(f"target shape must be positive, got {target_rows}x{target_cols}")
    if lut.shape == (target_rows, target_cols):
        return Lut(list(lut.index1), list(lut.index2), [list(row) for row in lut.values])
    rows = _resample_axis(lut.index1, target_rows)
    cols = _resample_axis(lut.index2, target_cols)
    values = [[lut_lookup(lut, x1, x2) for x2 in cols] for x1 in rows]
    return Lut(rows, cols, values)


@dataclass
class TimingArc:
    """Delay arc from ``related_input_pin`` to ``output_pin``.

    ``tables`` is keyed by (table kind, analysis), e.g. ("cell_rise", "late").
    A fully characterized arc has all eight entries.
    """

    related_input_pin: str
    output_pin: str
    tables: dict[tuple[str, str], Lut] = field(default_factory=dict)

    def table(self, kind: str, analysis: str) -> Lut | None:
        return self.tables.get((kind, analysis))

    @property
    def valid_flags(self) -> tuple[bool, ...]:
        return tuple((kind, a) in self.tables for a in ANALYSES for kind in TABLE_KINDS)

    @property
    def is_valid(self) -> bool:
        return all(self.valid_flags)

    def interpolated(self, rows: int, cols: int) -> TimingArc:
        return TimingArc(
            self.related_input_pin,
            self.output_pin,
            {key: interpolate_lut(lut, rows, cols) for key, lut in self.tables.items()},
        )


@dataclass
class LibertyPin:
    name: str
    direction: str
    # early-rise, early-fall, late-rise, late-fall
    capacitance: list[float] = field(default_factory=lambda: [0.0] * 4)
    is_clock: bool = False


@dataclass
class LibertyCell:
    name: str
    pins: dict[str, LibertyPin] = field(default_factory=dict)
    arcs: list[TimingArc] = field(default_factory=list)

    @property
    def clock_pins(self) -> list[str]:
        return [p.name for p in self.pins.values() if p.is_clock]

    @property
    def is_sequential(self) -> bool:
        return any(p.is_clock for p in self.pins.values())


class CellLibrary(dict):
    """Cells by name, with the library name and any parse warnings."""

    def __init__(self, name: str = "", cells: Mapping[str, LibertyCell] | None = None):
        super().__init__(cells or {})
        self.name = name
        self.warnings: list[str] = []


# ---------------------------------------------------------------------------
# generic Liberty syntax

_TOKEN_RE = re.compile(
    r"""
    (?P<cont>\\[ \t]*\r?\n)
  | (?P<nl>\n)
  | (?P<ws>[ \t\r\f]+)
  | (?P<comment>/\*.*?\*/|//[^\n]*)
  | (?P<str>"(?:[^"\\]|\\.|\\\n)*")
  | (?P<punct>[{}();:,])
  | (?P<word>[^\s{}();:,"]+)
    """,
    re.S | re.X,
)


@dataclass
class _Stmt:
    name: str
    line: int
    args: list[str] | None = None  # group / complex attribute arguments
    value: str | None = None  # simple attribute value
    children: list[_Stmt] | None = None  # group body

    def attr(self, name: str) -> str | None:
        found = None
        for child in self.children or ():
            if child.name == name and child.value is not None:
                found = child.value
        return found

    def complex(self, name: str) -> list[str] | None:
        found = None
        for child in self.children or ():
            if child.name == name and child.args is not None and child.children is None:
                found = child.args
        return found

    def groups(self, name: str) -> list[_Stmt]:
        return [c for c in self.children or () if c.name == name and c.children is not None]


def _tokenize(text: str, source: str | None):
    tokens = []  # (kind, text, physical line, logical line)
    line = 1
    logical = 1
    pos = 0
    n = len(text)
    while pos < n:
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, source)
        kind = m.lastgroup
        tok = m.group()
        if kind == "nl":
            line += 1
            logical += 1
        elif kind == "cont":
            line += 1
        elif kind == "comment" or kind == "str":
            nls = tok.count("\n")
            if kind == "str":
                tokens.append(("str", tok[1:-1].replace("\\\n", ""), line, logical))
            line += nls
            if kind == "comment":
                logical += nls
        elif kind != "ws":
            tokens.append((kind if kind == "word" else tok, tok, line, logical))
        pos = m.end()
    return tokens


def _parse_body(tokens, pos: int, source: str | None, closing: bool, open_line: int):
    stmts: list[_Stmt] = []
    n = len(tokens)
    while pos < n:
        kind, text, line, logical = tokens[pos]
        if kind == "}":
            if not closing:
                raise ParseError("unbalanced '}'", line, source)
            return stmts, pos + 1
        if kind == ";":
            pos += 1
            continue
        if kind not in ("word", "str"):
            raise ParseError(f"unexpected {text!r}", line, source)
        name = text
        pos += 1
        if pos >= n:
            raise ParseError(f"unexpected end of input after {name!r}", line, source)
        nxt = tokens[pos][0]
        if nxt == ":":
            pos += 1
            parts = []
            first_logical = tokens[pos][3] if pos < n else logical
            while pos < n and tokens[pos][0] not in (";", "}") and tokens[pos][3] == first_logical:
                parts.append(tokens[pos][1])
                pos += 1
            if pos < n and tokens[pos][0] == ";":
                pos += 1
            stmts.append(_Stmt(name, line, value=" ".join(parts)))
        elif nxt == "(":
            pos += 1
            args = []
            while True:
                if pos >= n:
                    raise ParseError(f"unbalanced '(' in {name!r}", line, source)
                k, t = tokens[pos][0], tokens[pos][1]
                pos += 1
                if k == ")":
                    break
                if k == ",":
                    continue
                if k in ("word", "str"):
                    args.append(t)
                elif k == "(":
                    raise ParseError(f"nested '(' in {name!r}", tokens[pos - 1][2], source)
                else:
                    raise ParseError(f"unexpected {t!r} in arguments of {name!r}", tokens[pos - 1][2], source)
            if pos < n and tokens[pos][0] == "{":
                children, pos = _parse_body(tokens, pos + 1, source, True, line)
                stmts.append(_Stmt(name, line, args=args, children=children))
            else:
                if pos < n and tokens[pos][0] == ";":
                    pos += 1
                stmts.append(_Stmt(name, line, args=args))
        else:
            raise ParseError(f"expected ':' or '(' after {name!r}", line, source)
    if closing:
        raise ParseError("unbalanced '{' (group never closed)", open_line, source)
    return stmts, pos


def _parse_syntax(text: str, source: str | None) -> list[_Stmt]:
    stmts, _ = _parse_body(_tokenize(text, source), 0, source, False, 0)
    return stmts


# ---------------------------------------------------------------------------
# extraction of the NLDM subset


def _floats(items: Iterable[str]) -> list[float]:
    out = []
    for item in items:
        for piece in re.split(r"[,\s]+", item.strip()):
            if piece:
                out.append(float(piece))
    return out


def _time_scale(unit: str | None) -> float:
    if not unit:
        return 1.0
    m = re.fullmatch(r"\s*([0-9.eE+-]*)\s*([a-zA-Z]+)\s*", unit.strip('"'))
    if not m or m.group(2).lower() not in _TIME_UNITS:
        raise StructuralError(f"unsupported time_unit {unit!r}")
    mult = float(m.group(1)) if m.group(1) else 1.0
    return mult * _TIME_UNITS[m.group(2).lower()]


def _is_load_axis(variable: str | None) -> bool:
    return bool(variable) and "capacitance" in variable


@dataclass
class _Template:
    variable_1: str | None
    variable_2: str | None
    index_1: list[float] | None
    index_2: list[float] | None


def _read_table(group: _Stmt, templates: dict[str, _Template], where: str, time_scale: float) -> Lut:
    tmpl = templates.get(group.args[0]) if group.args else None
    idx1 = group.complex("index_1")
    idx2 = group.complex("index_2")
    index_1 = _floats(idx1) if idx1 is not None else (tmpl.index_1 if tmpl else None)
    index_2 = _floats(idx2) if idx2 is not None else (tmpl.index_2 if tmpl else None)
    var1 = tmpl.variable_1 if tmpl else None
    var2 = tmpl.variable_2 if tmpl else None
    raw = group.complex("values")
    if raw is None:
        raise StructuralError(f"{where}: table has no values")
    try:
        flat = _floats(raw)
    except ValueError as exc:
        raise StructuralError(f"{where}: bad number in values ({exc})") from None

    if index_1 and index_2:
        n1, n2 = len(index_1), len(index_2)
        if len(flat) != n1 * n2:
            raise StructuralError(f"{where}: {len(flat)} values for a {n1}x{n2} table")
        values = [flat[i * n2 : (i + 1) * n2] for i in range(n1)]
        if _is_load_axis(var1) and not _is_load_axis(var2):
            index_1, index_2 = index_2, index_1
            values = [list(col) for col in zip(*values)]
    elif index_1:
        if len(flat) != len(index_1):
            raise StructuralError(f"{where}: {len(flat)} values for a 1-D table of {len(index_1)}")
        if _is_load_axis(var1):
            index_1, index_2, values = [0.0], index_1, [flat]
        else:
            index_2, values = [0.0], [[v] for v in flat]
    else:
        if len(flat) != 1:
            raise StructuralError(f"{where}: {len(flat)} values for a scalar table")
        index_1, index_2, values = [0.0], [0.0], [flat]

    if time_scale != 1.0:
        values = [[v * time_scale for v in row] for row in values]
        index_1 = [v * time_scale for v in index_1]
    try:
        return Lut(list(index_1), list(index_2), values)
    except ValueError as exc:
        raise StructuralError(f"{where}: {exc}") from None


def _strip(name: str) -> str:
    return name.strip().strip('"')


def _read_cell(group: _Stmt, templates, corner: str, time_scale: float, lib: CellLibrary) -> LibertyCell:
    cell = LibertyCell(_strip(group.args[0]) if group.args else "")
    pending: list[tuple[str, _Stmt]] = []
    pin_groups = list(group.groups("pin"))
    for bus in group.groups("bus") + group.groups("bundle"):
        pin_groups.extend(bus.groups("pin"))
    slot = (0, 1) if corner == EARLY else (2, 3)
    for pg in pin_groups:
        direction = (pg.attr("direction") or "").strip('"').lower()
        cap = pg.attr("capacitance")
        rise = pg.attr("rise_capacitance") or cap
        fall = pg.attr("fall_capacitance") or cap
        clock_attr = pg.attr("clock")
        for raw_name in pg.args or ():
            name = _strip(raw_name)
            caps = [0.0] * 4
            if rise is None or fall is None:
                if direction in ("input", "inout"):
                    msg = f"cell {cell.name} pin {name}: no capacitance, using 0"
                    lib.warnings.append(msg)
                    logger.warning(msg)
            caps[slot[0]] = float(rise) if rise is not None else 0.0
            caps[slot[1]] = float(fall) if fall is not None else 0.0
            if min(caps) < 0:
                raise StructuralError(f"cell {cell.name} pin {name}: negative capacitance")
            if clock_attr is not None:
                is_clock = clock_attr.strip('"').lower() == "true"
            else:
                is_clock = name.upper() in CLOCK_PIN_NAMES
            cell.pins[name] = LibertyPin(name, direction or "input", caps, is_clock)
            if direction in ("output", "inout"):
                pending.extend((name, t) for t in pg.groups("timing"))

    arcs: dict[tuple[str, str], TimingArc] = {}
    for out_pin, tg in pending:
        timing_type = (tg.attr("timing_type") or "combinational").strip('"')
        if _CONSTRAINT_TIMING.match(timing_type):
            continue
        related = tg.attr("related_pin")
        if not related:
            raise StructuralError(f"cell {cell.name} pin {out_pin}: timing group without related_pin")
        for rel in related.strip('"').split():
            where = f"cell {cell.name} arc {rel}->{out_pin}"
            if rel not in cell.pins:
                raise StructuralError(f"{where}: related pin {rel} is not a pin of the cell")
            arc = arcs.get((rel, out_pin))
            if arc is None:
                arc = arcs[(rel, out_pin)] = TimingArc(rel, out_pin)
            for kind in TABLE_KINDS:
                for tab in tg.groups(kind):
                    arc.tables[(kind, corner)] = _read_table(tab, templates, f"{where} {kind}", time_scale)
    cell.arcs = list(arcs.values())
    return cell


def parse_liberty(text: str, corner: str = LATE, *, source: str | None = None) -> CellLibrary:
    """Parse Liberty source into cells.

    Capacitances and tables land in the ``corner`` ("early" or "late")
    slots; the other corner is left empty for :class:`LibrarySet` to fill.
    """
    if corner not in ANALYSES:
        raise ValueError(f"corner must be 'early' or 'late', not {corner!r}")
    stmts = _parse_syntax(text, source)
    libs = [s for s in stmts if s.name == "library" and s.children is not None]
    body = libs[0] if libs else _Stmt("library", 1, args=[], children=stmts)
    lib = CellLibrary(_strip(body.args[0]) if body.args else "")
    time_scale = _time_scale(body.attr("time_unit"))
    templates = {}
    for tg in body.groups("lu_table_template"):
        i1, i2 = tg.complex("index_1"), tg.complex("index_2")
        templates[_strip(tg.args[0])] = _Template(
            tg.attr("variable_1"),
            tg.attr("variable_2"),
            _floats(i1) if i1 is not None else None,
            _floats(i2) if i2 is not None else None,
        )
    for cg in body.groups("cell"):
        cell = _read_cell(cg, templates, corner, time_scale, lib)
        if cell.name in lib:
            lib.warnings.append(f"duplicate cell {cell.name}, keeping the last definition")
        lib[cell.name] = cell
    return lib


def read_liberty(path: str | Path, corner: str = LATE) -> CellLibrary:
    path = Path(path)
    return parse_liberty(path.read_text(), corner, source=str(path))


def _read_liberty_job(args):
    return read_liberty(*args)


def read_liberty_files(paths: Sequence[str | Path], corner: str, jobs: int = 1) -> list[CellLibrary]:
    """Parse several libraries, in worker processes when ``jobs`` > 1.

    Results come back in input order regardless of completion order.
    """
    work = [(p, corner) for p in paths]
    if jobs <= 1 or len(work) <= 1:
        return [_read_liberty_job(w) for w in work]
    with ProcessPoolExecutor(max_workers=min(jobs, len(work))) as pool:
        return list(pool.map(_read_liberty_job, work))


# ---------------------------------------------------------------------------
# writing (round-trip of the supported subset)


def _fmt(x: float) -> str:
    return repr(float(x))


def _write_table(kind: str, lut: Lut, indent: str) -> list[str]:
    rows = ", ".join(f'"{", ".join(_fmt(v) for v in row)}"' for row in lut.values)
    return [
        f"{indent}{kind} (preslack_table) {{",
        f'{indent}  index_1 ("{", ".join(_fmt(v) for v in lut.index1)}");',
        f'{indent}  index_2 ("{", ".join(_fmt(v) for v in lut.index2)}");',
        f"{indent}  values ({rows});",
        f"{indent}}}",
    ]


def write_liberty(cells: Mapping[str, LibertyCell], corner: str = LATE, name: str = "preslack") -> str:
    """Serialize the ``corner`` half of ``cells`` as Liberty text."""
    rise, fall = (0, 1) if corner == EARLY else (2, 3)
    out = [
        f"library ({name}) {{",
        '  time_unit : "1ns" ;',
        "  capacitive_load_unit (1, pf) ;",
        "  lu_table_template (preslack_table) {",
        "    variable_1 : input_net_transition ;",
        "    variable_2 : total_output_net_capacitance ;",
        "  }",
    ]
    for cell in cells.values():
        out.append(f"  cell ({cell.name}) {{")
        by_output: dict[str, list[TimingArc]] = {}
        for arc in cell.arcs:
            by_output.setdefault(arc.output_pin, []).append(arc)
        for pin in cell.pins.values():
            out.append(f"    pin ({pin.name}) {{")
            out.append(f"      direction : {pin.direction} ;")
            out.append(f"      rise_capacitance : {_fmt(pin.capacitance[rise])} ;")
            out.append(f"      fall_capacitance : {_fmt(pin.capacitance[fall])} ;")
            out.append(f"      clock : {'true' if pin.is_clock else 'false'} ;")
            for arc in by_output.get(pin.name, ()):
                out.append("      timing () {")
                out.append(f'        related_pin : "{arc.related_input_pin}" ;')
                for kind in TABLE_KINDS:
                    lut = arc.tables.get((kind, corner))
                    if lut is not None:
                        out.extend(_write_table(kind, lut, "        "))
                out.append("      }")
            out.append("    }")
        out.append("  }")
    out.append("}")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# early/late library pair


def merge_libraries(libs: Sequence[CellLibrary]) -> dict[str, LibertyCell]:
    """Merge several libraries of one corner; the first definition of a cell wins."""
    merged: dict[str, LibertyCell] = {}
    for lib in libs:
        for name, cell in lib.items():
            if name in merged:
                logger.warning("cell %s defined in more than one library; keeping the first", name)
                continue
            merged[name] = cell
    return merged


@dataclass
class LibrarySet:
    """Early (fast) and late (slow) cell definitions."""

    early: dict[str, LibertyCell]
    late: dict[str, LibertyCell]
    _merged: dict[str, LibertyCell] = field(default_factory=dict, init=False, repr=False, compare=False)

    def missing(self, names: Iterable[str]) -> list[str]:
        return sorted({n for n in names if n not in self.early or n not in self.late})

    def resolve(self, name: str) -> LibertyCell:
        """Cell ``name`` with early data from the early library and late data from the late one."""
        cell = self._merged.get(name)
        if cell is not None:
            return cell
        try:
            early, late = self.early[name], self.late[name]
        except KeyError:
            raise StructuralError(f"cell class {name} is not in both libraries") from None
        pins = {}
        for pname, lp in late.pins.items():
            ep = early.pins.get(pname, lp)
            caps = [ep.capacitance[0], ep.capacitance[1], lp.capacitance[2], lp.capacitance[3]]
            pins[pname] = LibertyPin(pname, lp.direction, caps, lp.is_clock or ep.is_clock)
        arcs: dict[tuple[str, str], TimingArc] = {}
        for src, analysis in ((late, LATE), (early, EARLY)):
            for arc in src.arcs:
                key = (arc.related_input_pin, arc.output_pin)
                merged = arcs.setdefault(key, TimingArc(*key))
                for (kind, a), lut in arc.tables.items():
                    if a == analysis:
                        merged.tables[(kind, a)] = lut
        cell = LibertyCell(name, pins, list(arcs.values()))
        self._merged[name] = cell
        return cell
