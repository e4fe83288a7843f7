"""The small slice of SDC the slack estimator needs.

Recognized: ``create_clock``, ``set_clock_uncertainty``, ``set_output_delay``,
``set_input_delay`` and plain ``set name value`` variables. Anything else is
recorded in :attr:`SdcConstraints.ignored` and skipped.
"""

from __future__ import annotations

import ast
import operator
import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ParseError, StructuralError

ALL = "*"


@dataclass
class SdcConstraints:
    clock_period: float
    clock_port: str
    clock_name: str = ""
    clock_uncertainty: float = 0.0
    # per-port delays; the key "*" holds an [all_outputs]/[all_inputs] default
    output_delays: dict[str, float] = field(default_factory=dict)
    input_delays: dict[str, float] = field(default_factory=dict)
    ignored: list[str] = field(default_factory=list, compare=False)

    def output_delay(self, port: str) -> float:
        return self.output_delays.get(port, self.output_delays.get(ALL, 0.0))

    def input_delay(self, port: str) -> float:
        return self.input_delays.get(port, self.input_delays.get(ALL, 0.0))

    def check_ports(self, ports) -> None:
        names = set(ports)
        if self.clock_port not in names:
            raise StructuralError(f"clock port {self.clock_port} is not a port of the design")


def _logical_lines(text: str):
    lineno = 0
    pending = ""
    start = 1
    for lineno, raw in enumerate(text.splitlines(), 1):
        if not pending:
            start = lineno
        if raw.rstrip().endswith("\\"):
            pending += raw.rstrip()[:-1] + " "
            continue
        line = pending + raw
        pending = ""
        yield start, line
    if pending:
        yield start, pending


def _words(line: str, lineno: int, source: str | None) -> list[str]:
    """Split a Tcl command into words, keeping [...] and {...} groups whole."""
    words = []
    i, n = 0, len(line)
    while i < n:
        c = line[i]
        if c.isspace():
            i += 1
            continue
        if c == ";":
            words.append(";")
            i += 1
            continue
        if c in "[{":
            close = "]" if c == "[" else "}"
            depth = 0
            j = i
            while j < n:
                if line[j] == c:
                    depth += 1
                elif line[j] == close:
                    depth -= 1
                    if depth == 0:
                        break
                j += 1
            if j >= n:
                raise ParseError(f"unbalanced {c!r}", lineno, source)
            words.append(line[i : j + 1])
            i = j + 1
        elif c == '"':
            j = line.find('"', i + 1)
            if j < 0:
                raise ParseError("unterminated string", lineno, source)
            words.append(line[i + 1 : j])
            i = j + 1
        else:
            j = i
            while j < n and not line[j].isspace() and line[j] != ";":
                j += 1
            words.append(line[i:j])
            i = j
    return words


def _strip_comment(line: str) -> str:
    stripped = line.lstrip()
    if stripped.startswith("#"):
        return ""
    # trailing ";# comment"
    m = re.search(r";\s*#", line)
    return line[: m.start()] if m else line


_VAR_RE = re.compile(r"\$(?:\{([^}]*)\}|((?:::)?[A-Za-z_][\w:]*(?:\([^)]*\))?))")


def _object_names(word: str, lineno: int, source: str | None) -> tuple[str, list[str]]:
    """('ports'|'clocks'|'all_outputs'|..., names) for an object query like [get_ports {a b}]."""
    if word.startswith("{") and word.endswith("}"):
        return "ports", word[1:-1].split()
    if not (word.startswith("[") and word.endswith("]")):
        return "ports", [word]
    inner = word[1:-1].strip()
    parts = _words(inner, lineno, source)
    if not parts:
        raise ParseError("empty object query", lineno, source)
    cmd = parts[0]
    if cmd in ("all_outputs", "all_inputs"):
        return cmd, [ALL]
    if cmd in ("get_ports", "get_clocks", "get_pins", "get_nets"):
        names = []
        for p in parts[1:]:
            if p.startswith("-"):
                continue
            if p.startswith("{") and p.endswith("}"):
                names.extend(p[1:-1].split())
            else:
                names.append(p)
        return cmd[4:], names
    raise ParseError(f"unsupported object query {word!r}", lineno, source)


_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
}


def _arith(node) -> float:
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        return float(node.value)
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        value = _arith(node.operand)
        return -value if isinstance(node.op, ast.USub) else value
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        return _BINOPS[type(node.op)](_arith(node.left), _arith(node.right))
    raise ValueError("not plain arithmetic")


def _number(word: str, what: str, lineno: int, source: str | None) -> float:
    if word.startswith("[expr") and word.endswith("]"):
        expr = word[5:-1].strip().strip("{}")
        try:
            return _arith(ast.parse(expr, mode="eval").body)
        except (SyntaxError, ValueError):
            raise ParseError(f"unsupported expression for {what}: {word!r}", lineno, source) from None
    try:
        return float(word)
    except ValueError:
        raise ParseError(f"expected a number for {what}, got {word!r}", lineno, source) from None


def parse_sdc(text: str, *, source: str | None = None) -> SdcConstraints:
    variables: dict[str, str] = {}
    clock = None
    uncertainty = 0.0
    outputs: dict[str, float] = {}
    inputs: dict[str, float] = {}
    ignored: list[str] = []

    def subst(m):
        name = m.group(1) or m.group(2)
        if name not in variables:
            raise ParseError(f"undefined variable ${name}", lineno, source)
        return variables[name]

    for lineno, raw in _logical_lines(text):
        line = _strip_comment(raw).strip()
        if not line:
            continue
        words = _words(line, lineno, source)
        # split on ';' into separate commands
        commands, cur = [], []
        for w in words:
            if w == ";":
                if cur:
                    commands.append(cur)
                cur = []
            else:
                cur.append(w)
        if cur:
            commands.append(cur)
        for cmd in commands:
            name = cmd[0]
            if name == "set" and len(cmd) == 3:
                variables[cmd[1]] = _VAR_RE.sub(subst, cmd[2])
                continue
            cmd = [_VAR_RE.sub(subst, w) for w in cmd]
            args = cmd[1:]
            if name == "create_clock":
                if clock is not None:
                    raise ParseError("more than one create_clock (multiple clocks are not supported)", lineno, source)
                period = None
                clock_name = ""
                targets = []
                i = 0
                while i < len(args):
                    a = args[i]
                    if a == "-period":
                        period = _number(args[i + 1], "-period", lineno, source)
                        i += 2
                    elif a == "-name":
                        clock_name = args[i + 1].strip("{}")
                        i += 2
                    elif a == "-waveform":
                        i += 2
                    elif a == "-add":
                        raise ParseError("create_clock -add (multiple clocks) is not supported", lineno, source)
                    elif a.startswith("-"):
                        i += 1
                    else:
                        targets.append(a)
                        i += 1
                if period is None:
                    raise ParseError("create_clock without -period", lineno, source)
                if period <= 0:
                    raise ParseError(f"clock period must be positive, got {period}", lineno, source)
                ports = []
                for t in targets:
                    kind, names = _object_names(t, lineno, source)
                    if kind != "ports":
                        raise ParseError(f"clock source must be a port, got {t!r}", lineno, source)
                    ports.extend(names)
                if len(ports) != 1:
                    raise ParseError("virtual or multi-port clocks are not supported", lineno, source)
                clock = (period, ports[0], clock_name or ports[0])
            elif name == "create_generated_clock":
                raise ParseError("generated clocks are not supported", lineno, source)
            elif name == "set_clock_uncertainty":
                values = [a for a in args if not a.startswith("-") and not a.startswith("[")]
                if "-hold" in args and "-setup" not in args:
                    continue
                if not values:
                    raise ParseError("set_clock_uncertainty without a value", lineno, source)
                uncertainty = _number(values[0], "clock uncertainty", lineno, source)
                if uncertainty < 0:
                    raise ParseError("clock uncertainty must be non-negative", lineno, source)
            elif name in ("set_output_delay", "set_input_delay"):
                target = outputs if name == "set_output_delay" else inputs
                value = None
                objects = []
                is_min = "-min" in args and "-max" not in args
                i = 0
                while i < len(args):
                    a = args[i]
                    if a in ("-clock", "-reference_pin"):
                        i += 2
                        continue
                    if a.startswith("-") and not re.fullmatch(r"-[0-9.]+(e-?\d+)?", a):
                        i += 1
                        continue
                    if a.startswith("[") and not a.startswith("[expr"):
                        objects.append(a)
                    elif value is None:
                        value = _number(a, name, lineno, source)
                    else:
                        objects.append(a)
                    i += 1
                if value is None or not objects:
                    raise ParseError(f"{name} needs a value and a port", lineno, source)
                if is_min:
                    # setup analysis only uses -max values
                    continue
                for obj in objects:
                    _, names = _object_names(obj, lineno, source)
                    for port in names:
                        target[port] = value
            else:
                ignored.append(raw.strip())

    if clock is None:
        raise ParseError("no create_clock in constraints", None, source)
    period, port, clock_name = clock
    return SdcConstraints(period, port, clock_name, uncertainty, outputs, inputs, ignored)


def read_sdc(path: str | Path) -> SdcConstraints:
    path = Path(path)
    return parse_sdc(path.read_text(), source=str(path))


def write_sdc(sdc: SdcConstraints) -> str:
    out = [f"create_clock -name {sdc.clock_name or sdc.clock_port} -period {sdc.clock_period!r} [get_ports {sdc.clock_port}]"]
    if sdc.clock_uncertainty:
        out.append(f"set_clock_uncertainty {sdc.clock_uncertainty!r} [get_clocks {sdc.clock_name or sdc.clock_port}]")
    clk = sdc.clock_name or sdc.clock_port
    for port, value in sdc.input_delays.items():
        obj = "[all_inputs]" if port == ALL else f"[get_ports {{{port}}}]"
        out.append(f"set_input_delay -max {value!r} -clock {clk} {obj}")
    for port, value in sdc.output_delays.items():
        obj = "[all_outputs]" if port == ALL else f"[get_ports {{{port}}}]"
        out.append(f"set_output_delay -max {value!r} -clock {clk} {obj}")
    return "\n".join(out) + "\n"
