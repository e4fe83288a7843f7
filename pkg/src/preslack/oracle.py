"""Exhaustive path-enumeration reference for small circuits with constant tables.

Deliberately independent of the graph, arrival and slack modules: it works
on the placed netlist and raw cell definitions, enumerates every path
explicitly and applies the RAT/CRP/slack formulas to the worst one.
"""

from __future__ import annotations

from dataclasses import dataclass

PORT = "PIN"

# corner order: early-rise, early-fall, late-rise, late-fall
_CORNER_KEYS = (("cell_rise", "early"), ("cell_fall", "early"), ("cell_rise", "late"), ("cell_fall", "late"))
_LR = 2
_ER = 0


def _const(cell, related, output, kind, analysis) -> float:
    for arc in cell.arcs:
        if arc.related_input_pin == related and arc.output_pin == output:
            lut = arc.tables[(kind, analysis)]
            if len(lut.values) != 1 or len(lut.values[0]) != 1:
                raise ValueError("oracle supports constant 1x1 tables only")
            return lut.values[0][0]
    raise KeyError((cell.name, related, output))


class _Netlist:
    def __init__(self, design, early, late, sdc):
        self.sdc = sdc
        self.preds: dict[tuple, list[tuple[tuple, tuple]]] = {}
        self.succ_count: dict[tuple, int] = {}
        self.clock_pins: set[tuple] = set()
        self.clocked: set[str] = set()
        self.direction: dict[tuple, str] = {}
        for port in design.ports:
            key = (PORT, port.name)
            self.direction[key] = port.direction
            self.preds[key] = []
            self.succ_count[key] = 0
        zero = (0.0, 0.0, 0.0, 0.0)
        for comp in design.components:
            lc, ec = late[comp.cell_class], early[comp.cell_class]
            for pin in lc.pins.values():
                key = (comp.instance, pin.name)
                self.direction[key] = pin.direction
                self.preds[key] = []
                self.succ_count[key] = 0
                if pin.is_clock:
                    self.clock_pins.add(key)
                    self.clocked.add(comp.instance)
            for arc in lc.arcs:
                delays = tuple(
                    _const(ec if a == "early" else lc, arc.related_input_pin, arc.output_pin, kind, a)
                    for kind, a in _CORNER_KEYS
                )
                src = (comp.instance, arc.related_input_pin)
                dst = (comp.instance, arc.output_pin)
                self.preds[dst].append((src, delays))
                self.succ_count[src] += 1
        for net in design.nets:
            drivers = []
            for conn in net.connections:
                d = self.direction[conn]
                if (conn[0] == PORT and d == "input") or (conn[0] != PORT and d == "output"):
                    drivers.append(conn)
            if len(drivers) != 1:
                continue
            drv = drivers[0]
            for conn in net.connections:
                if conn != drv:
                    self.preds[conn].append((drv, zero))
                    self.succ_count[drv] += 1

    def source_at(self, pin) -> float:
        if pin[0] != PORT or pin[1] == self.sdc.clock_port:
            return 0.0
        if self.direction[pin] != "input":
            return 0.0
        d = self.sdc.input_delays
        return d.get(pin[1], d.get("*", 0.0))

    def paths_to(self, pin, stop_at_clock: bool = False) -> list[list]:
        """Every path (pin list, source first) ending at ``pin``."""
        out = []

        def walk(v, suffix):
            if not self.preds[v] or (stop_at_clock and v in self.clock_pins and suffix):
                out.append([v, *suffix])
                return
            for u, _ in self.preds[v]:
                walk(u, [v, *suffix])

        walk(pin, [])
        return out

    def path_delay(self, path, corner: int, start: float = 0.0) -> float:
        """``start`` plus the delays along ``path``, summed from the launch end."""
        total = start
        for u, v in zip(path, path[1:]):
            total += next(d[corner] for src, d in self.preds[v] if src == u)
        return total


def oracle_arrivals(design, early, late, sdc) -> dict[tuple, tuple[float, float, float, float]]:
    """Per pin, early (min) and late (max) arrival over all paths from any source."""
    nl = _Netlist(design, early, late, sdc)
    out = {}
    for pin in nl.preds:
        paths = nl.paths_to(pin)
        vals = []
        for c in range(4):
            arrivals = [nl.path_delay(p, c, nl.source_at(p[0])) for p in paths]
            vals.append(min(arrivals) if c < 2 else max(arrivals))
        out[pin] = tuple(vals)
    return out


@dataclass
class OracleEndpoint:
    pin: tuple[str, str]
    rat: float
    at: float
    crp: float
    slack: float
    slack_corrected: float
    ambiguous: bool = False


def oracle_slacks(design, early, late, sdc, *, tie_tolerance: float = 1e-9) -> dict[str, OracleEndpoint]:
    """Per constrained endpoint (keyed by pin name), slack and CRPR-corrected slack."""
    nl = _Netlist(design, early, late, sdc)
    arrivals = oracle_arrivals(design, early, late, sdc)
    period, mu = sdc.clock_period, sdc.clock_uncertainty
    clock_src = (PORT, sdc.clock_port)

    def clock_paths(pin):
        return [p for p in nl.paths_to(pin) if p[0] == clock_src]

    def crp_between(launch_ck, capture_paths):
        best = 0.0
        for lp in clock_paths(launch_ck):
            for cp in capture_paths:
                common = None
                for a, b in zip(lp, cp):
                    if a != b:
                        break
                    common = a
                if common is not None:
                    at = arrivals[common]
                    best = max(best, at[_LR] - at[_ER])
        return best

    out = {}
    for pin, n_succ in nl.succ_count.items():
        if n_succ:
            continue
        inst, name = pin
        if inst == PORT:
            if nl.direction[pin] not in ("output", "inout"):
                continue
            d = sdc.output_delays
            rat = period - d.get(name, d.get("*", 0.0)) - mu
            capture_paths = [[clock_src]]
        elif inst in nl.clocked and pin not in nl.clock_pins and nl.direction[pin] == "input":
            ck = next(p for p in nl.clock_pins if p[0] == inst)
            rat = period + arrivals[ck][_ER] - mu
            capture_paths = clock_paths(ck)
        else:
            continue
        at = arrivals[pin][_LR]
        slack = rat - at
        crp = 0.0
        ambiguous = False
        if slack < 0:
            # worst data path: launch point is a clock pin or a source
            scored = []
            for p in nl.paths_to(pin, stop_at_clock=True):
                scored.append((nl.path_delay(p, _LR, arrivals[p[0]][_LR]), p))
            scored.sort(key=lambda t: -t[0])
            candidates = []
            for value, p in scored:
                if scored[0][0] - value > tie_tolerance:
                    break
                launch = p[0] if p[0] in nl.clock_pins else None
                candidates.append(crp_between(launch, capture_paths) if launch else 0.0)
            crp = candidates[0]
            ambiguous = any(abs(c - crp) > tie_tolerance for c in candidates)
        name_str = name if inst == PORT else f"{inst}/{name}"
        out[name_str] = OracleEndpoint(pin, rat, at, crp, slack, slack + crp, ambiguous)
    return out
