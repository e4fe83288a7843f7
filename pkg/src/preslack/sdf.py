"""SDF delay files and the per-pin AT/RAT/slew label format.

Label records are plain text, one per line::

    # pin quantity corner value
    u1/Y AT LR 1.25
    u1/Y SLEW LR 0.031

with quantity one of AT, RAT, SLEW and corner one of ER, EF, LR, LF.
The same records may also be embedded in an SDF file as
``// LABEL u1/Y AT LR 1.25`` comment lines.
"""

from __future__ import annotations

import logging
import math
import re
from bisect import bisect_right
from dataclasses import dataclass, field
from pathlib import Path

from .corners import CORNERS, corner_index
from .errors import ParseError

logger = logging.getLogger(__name__)

# (early-rise, early-fall, late-rise, late-fall); None where unknown
Corner4 = tuple

QUANTITIES = ("AT", "RAT", "SLEW")

_TIMESCALE_NS = {"us": 1e3, "ns": 1.0, "ps": 1e-3, "fs": 1e-6}
_LABEL_RE = re.compile(r"^[ \t]*//[ \t]*LABEL[ \t]+(.*)$", re.M)
_COMMENT_RE = re.compile(r"//[^\n]*|/\*.*?\*/", re.S)
_SEXPR_TOKEN = re.compile(r'"[^"]*"|[()]|[^\s()]+')


@dataclass
class DelayLabels:
    cell_delays: dict[tuple[str, str, str], Corner4] = field(default_factory=dict)
    net_delays: dict[tuple[str, str], Corner4] = field(default_factory=dict)
    pin_at: dict[str, Corner4] = field(default_factory=dict)
    pin_rat: dict[str, Corner4] = field(default_factory=dict)
    pin_slew: dict[str, Corner4] = field(default_factory=dict)
    cell_types: dict[str, str] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list, compare=False)

    def pin_map(self, quantity: str) -> dict[str, Corner4]:
        return {"AT": self.pin_at, "RAT": self.pin_rat, "SLEW": self.pin_slew}[quantity.upper()]

    def merge(self, other: DelayLabels) -> DelayLabels:
        """Field-wise union; entries of ``other`` win, partial pin records combine per corner."""
        out = DelayLabels(
            {**self.cell_delays, **other.cell_delays},
            {**self.net_delays, **other.net_delays},
            warnings=self.warnings + other.warnings,
        )
        for q in QUANTITIES:
            dst = out.pin_map(q)
            for src in (self.pin_map(q), other.pin_map(q)):
                for pin, vals in src.items():
                    old = dst.get(pin, (None,) * 4)
                    dst[pin] = tuple(v if v is not None else o for v, o in zip(vals, old))
        out.cell_types = {**self.cell_types, **other.cell_types}
        return out


def _set_pin_value(labels: DelayLabels, pin: str, quantity: str, corner: int, value: float) -> bool:
    target = labels.pin_map(quantity)
    old = target.get(pin, (None,) * 4)
    duplicate = old[corner] is not None
    new = list(old)
    new[corner] = value
    target[pin] = tuple(new)
    return duplicate


def _parse_records(lines, source: str | None, labels: DelayLabels) -> None:
    errors = []
    duplicates = 0
    for lineno, line in lines:
        parts = line.split()
        if not parts:
            continue
        if len(parts) != 4:
            errors.append(f"line {lineno}: expected 'pin quantity corner value', got {line.strip()!r}")
            continue
        pin, quantity, corner, value = parts
        if quantity.upper() not in QUANTITIES:
            errors.append(f"line {lineno}: unknown quantity {quantity!r}")
            continue
        if corner.upper() not in CORNERS:
            errors.append(f"line {lineno}: unknown corner {corner!r}")
            continue
        try:
            number = float(value)
        except ValueError:
            errors.append(f"line {lineno}: value {value!r} is not a number")
            continue
        if not math.isfinite(number):
            errors.append(f"line {lineno}: value {value!r} is not finite")
            continue
        if _set_pin_value(labels, pin, quantity.upper(), corner_index(corner), number):
            duplicates += 1
            labels.warnings.append(f"line {lineno}: duplicate {quantity.upper()} {corner.upper()} for {pin}, keeping the last")
    if errors:
        shown = "; ".join(errors[:10])
        more = f" (and {len(errors) - 10} more)" if len(errors) > 10 else ""
        raise ParseError(f"{len(errors)} bad label line(s): {shown}{more}", None, source)
    if duplicates:
        logger.warning("%d duplicate label record(s), last one kept", duplicates)


def parse_label_sidecar(text: str, *, source: str | None = None) -> DelayLabels:
    """Parse label records (AT/RAT/SLEW per pin and corner)."""
    labels = DelayLabels()
    lines = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0]
        if line.strip():
            lines.append((lineno, line))
    _parse_records(lines, source, labels)
    return labels


def read_labels(path: str | Path) -> DelayLabels:
    path = Path(path)
    return parse_label_sidecar(path.read_text(), source=str(path))


def _fmt(x: float) -> str:
    return repr(float(x))


def write_label_sidecar(labels: DelayLabels) -> str:
    out = ["# pin quantity corner value"]
    for q in QUANTITIES:
        for pin, vals in labels.pin_map(q).items():
            for corner, v in zip(CORNERS, vals):
                if v is not None:
                    out.append(f"{pin} {q} {corner} {_fmt(v)}")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# SDF


class _Sexpr:
    def __init__(self, text: str, source: str | None):
        self.text = text
        self.source = source
        self._newlines = None

    def line(self, offset: int) -> int:
        if self._newlines is None:
            self._newlines = [m.start() for m in re.finditer("\n", self.text)]
        return bisect_right(self._newlines, offset) + 1

    def error(self, message: str, offset: int) -> ParseError:
        return ParseError(message, self.line(offset), self.source)

    def parse(self):
        """Nested lists of (token, offset) atoms."""
        stack: list[list] = [[]]
        opened: list[int] = []
        for m in _SEXPR_TOKEN.finditer(self.text):
            tok = m.group()
            if tok == "(":
                node: list = []
                stack[-1].append(node)
                stack.append(node)
                opened.append(m.start())
            elif tok == ")":
                if len(stack) == 1:
                    raise self.error("unbalanced ')'", m.start())
                stack.pop()
                opened.pop()
            else:
                stack[-1].append((tok.strip('"') if tok.startswith('"') else tok, m.start()))
        if len(stack) != 1:
            raise self.error("unbalanced '('", opened[-1])
        return stack[0]


def _head(node) -> str | None:
    if isinstance(node, list) and node and isinstance(node[0], tuple):
        return node[0][0].upper()
    return None


def _atoms(node) -> list[str]:
    return [a[0] for a in node if isinstance(a, tuple)]


def _offset(node) -> int:
    for item in node:
        if isinstance(item, tuple):
            return item[1]
        off = _offset(item)
        if off >= 0:
            return off
    return -1


def _timescale(node, sx: _Sexpr) -> float:
    text = "".join(_atoms(node)[1:])
    m = re.fullmatch(r"([0-9.]*)([a-zA-Z]+)", text)
    if not m or m.group(2).lower() not in _TIMESCALE_NS:
        raise sx.error(f"bad TIMESCALE {text!r}", _offset(node))
    return float(m.group(1) or 1.0) * _TIMESCALE_NS[m.group(2).lower()]


def _triple(node, sx: _Sexpr, scale: float) -> tuple[float, float] | None:
    """(early, late) from an rvalue such as (0.1:0.2:0.3), (0.2) or ()."""
    atoms = [a for a in node if isinstance(a, tuple)]
    if not atoms:
        return None
    if len(atoms) != 1 or len(node) != 1:
        raise sx.error("malformed delay value", _offset(node))
    tok, off = atoms[0]
    parts = tok.split(":")
    if len(parts) not in (1, 3):
        raise sx.error(f"malformed delay triple {tok!r}", off)
    try:
        nums = [float(p) * scale if p else None for p in parts]
    except ValueError:
        raise sx.error(f"malformed delay triple {tok!r}", off) from None
    present = [v for v in nums if v is not None]
    if not present:
        return None
    early = next(v for v in nums if v is not None)
    late = next(v for v in reversed(nums) if v is not None)
    if early > late:
        raise sx.error(f"min delay exceeds max delay in {tok!r}", off)
    return early, late


def _rise_fall(values: list, sx: _Sexpr, scale: float, where: str, labels: DelayLabels) -> Corner4 | None:
    if not values:
        raise sx.error(f"{where}: no delay values", -1)
    for v in values:
        if not isinstance(v, list):
            raise sx.error(f"{where}: delay values must be parenthesized", v[1])
    rise = _triple(values[0], sx, scale)
    fall = _triple(values[1], sx, scale) if len(values) > 1 else rise
    if rise is None and fall is None:
        labels.warnings.append(f"{where}: empty delay, skipped")
        return None
    if rise is None:
        rise = fall
    if fall is None:
        fall = rise
    quad = (rise[0], fall[0], rise[1], fall[1])
    if min(quad) < 0:
        labels.warnings.append(f"{where}: negative delay")
    return quad


def _port(node) -> str:
    if isinstance(node, tuple):
        return node[0]
    # (posedge CLK) and friends
    return _atoms(node)[-1]


def parse_sdf(text: str, *, source: str | None = None) -> DelayLabels:
    """Parse IOPATH/INTERCONNECT delays (in ns) plus any embedded LABEL lines."""
    labels = DelayLabels()
    label_lines = []
    for m in _LABEL_RE.finditer(text):
        label_lines.append((text.count("\n", 0, m.start()) + 1, m.group(1)))
    _parse_records(label_lines, source, labels)

    # blank comments out without shifting offsets so line numbers survive
    stripped = _COMMENT_RE.sub(lambda m: re.sub(r"[^\n]", " ", m.group()), text)
    sx = _Sexpr(stripped, source)
    top = sx.parse()
    files = [n for n in top if _head(n) == "DELAYFILE"]
    if not files:
        if not stripped.strip():
            return labels
        raise ParseError("no DELAYFILE", None, source)
    scale = 1.0
    divider = "/"
    for node in files[0][1:]:
        head = _head(node)
        if head == "TIMESCALE":
            scale = _timescale(node, sx)
        elif head == "DIVIDER":
            divider = _atoms(node)[1] if len(_atoms(node)) > 1 else "/"
        elif head == "CELL":
            _read_cell(node, sx, scale, divider, labels)
    return labels


def _read_cell(cell, sx: _Sexpr, scale: float, divider: str, labels: DelayLabels) -> None:
    instance = ""
    celltype = None
    for node in cell[1:]:
        head = _head(node)
        if head == "CELLTYPE":
            atoms = _atoms(node)
            celltype = atoms[1] if len(atoms) > 1 else None
        elif head == "INSTANCE":
            atoms = _atoms(node)
            instance = atoms[1] if len(atoms) > 1 else ""
            if instance == "*":
                raise sx.error("wildcard INSTANCE is not supported", _offset(node))
    if instance and celltype is not None:
        labels.cell_types[instance] = celltype
    prefix = instance + divider if instance else ""
    for node in cell[1:]:
        if _head(node) != "DELAY":
            continue
        for block in node[1:]:
            kind = _head(block)
            if kind == "INCREMENT":
                raise sx.error("INCREMENT delays are not supported, only ABSOLUTE", _offset(block))
            if kind != "ABSOLUTE":
                continue
            for entry in block[1:]:
                what = _head(entry)
                if what == "IOPATH":
                    if len(entry) < 4:
                        raise sx.error("IOPATH needs two ports and a delay", _offset(entry))
                    src, dst = _port(entry[1]), _port(entry[2])
                    key = (instance, src, dst)
                    quad = _rise_fall(entry[3:], sx, scale, f"IOPATH {instance} {src} {dst}", labels)
                    if quad is None:
                        continue
                    if key in labels.cell_delays:
                        labels.warnings.append(f"duplicate IOPATH {instance} {src} {dst}, keeping the last")
                    labels.cell_delays[key] = quad
                elif what == "INTERCONNECT":
                    if len(entry) < 4:
                        raise sx.error("INTERCONNECT needs two ports and a delay", _offset(entry))
                    src, dst = prefix + _port(entry[1]), prefix + _port(entry[2])
                    quad = _rise_fall(entry[3:], sx, scale, f"INTERCONNECT {src} {dst}", labels)
                    if quad is None:
                        continue
                    if (src, dst) in labels.net_delays:
                        labels.warnings.append(f"duplicate INTERCONNECT {src} {dst}, keeping the last")
                    labels.net_delays[(src, dst)] = quad
                elif what in ("COND", "CONDELSE"):
                    labels.warnings.append("conditional delay skipped")


def read_sdf(path: str | Path) -> DelayLabels:
    path = Path(path)
    return parse_sdf(path.read_text(), source=str(path))


def _rvalues(quad: Corner4) -> str:
    er, ef, lr, lf = quad
    return f"({_fmt(er)}::{_fmt(lr)}) ({_fmt(ef)}::{_fmt(lf)})"


def write_sdf(labels: DelayLabels, design: str = "top") -> str:
    """Serialize delays (and pin labels as LABEL comments) as SDF 3.0."""
    out = []
    for q in QUANTITIES:
        for pin, vals in labels.pin_map(q).items():
            for corner, v in zip(CORNERS, vals):
                if v is not None:
                    out.append(f"// LABEL {pin} {q} {corner} {_fmt(v)}")
    out += [
        "(DELAYFILE",
        '  (SDFVERSION "3.0")',
        f'  (DESIGN "{design}")',
        "  (DIVIDER /)",
        "  (TIMESCALE 1ns)",
    ]
    if labels.net_delays:
        out += [f'  (CELL (CELLTYPE "{design}") (INSTANCE)', "    (DELAY (ABSOLUTE"]
        for (src, dst), quad in labels.net_delays.items():
            out.append(f"      (INTERCONNECT {src} {dst} {_rvalues(quad)})")
        out.append("  )))")
    by_inst: dict[str, list] = {}
    for (inst, src, dst), quad in labels.cell_delays.items():
        by_inst.setdefault(inst, []).append((src, dst, quad))
    for inst, entries in by_inst.items():
        celltype = labels.cell_types.get(inst)
        ct = f' (CELLTYPE "{celltype}")' if celltype is not None else ""
        out += [f"  (CELL{ct} (INSTANCE {inst})", "    (DELAY (ABSOLUTE"]
        for src, dst, quad in entries:
            out.append(f"      (IOPATH {src} {dst} {_rvalues(quad)})")
        out.append("  )))")
    for inst, celltype in labels.cell_types.items():
        if inst not in by_inst:
            out.append(f'  (CELL (CELLTYPE "{celltype}") (INSTANCE {inst}))')
    out.append(")")
    return "\n".join(out) + "\n"
