"""Random placed single-clock circuits for testing and benchmarking.

Small circuits give every instance its own cell class with constant 1x1
tables, so path delays are plain sums. Large circuits share a handful of
classes with 7x7 tables.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from pathlib import Path

from .corners import EARLY, LATE, TABLE_KINDS
from .liberty import LibertyCell, LibertyPin, LibrarySet, Lut, TimingArc, write_liberty
from .physical import PORT, Component, Net, PhysicalDesign, Port, die_from_points, write_def
from .sdc import SdcConstraints, write_sdc

CLOCK_PORT = "clk"


@dataclass
class SyntheticCircuit:
    design: PhysicalDesign
    early: dict[str, LibertyCell]
    late: dict[str, LibertyCell]
    sdc: SdcConstraints
    meta: dict = field(default_factory=dict)

    @property
    def libs(self) -> LibrarySet:
        return LibrarySet(self.early, self.late)

    def write(self, directory: str | Path, stem: str | None = None) -> dict[str, Path]:
        """Write .lib (early, late), .def and .sdc files; returns the paths."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        stem = stem or self.design.name
        paths = {
            "lib_early": directory / f"{stem}_early.lib",
            "lib_late": directory / f"{stem}_late.lib",
            "def": directory / f"{stem}.def",
            "sdc": directory / f"{stem}.sdc",
        }
        paths["lib_early"].write_text(write_liberty(self.early, EARLY, f"{stem}_early"))
        paths["lib_late"].write_text(write_liberty(self.late, LATE, f"{stem}_late"))
        paths["def"].write_text(write_def(self.design))
        paths["sdc"].write_text(write_sdc(self.sdc))
        return paths


class _Builder:
    def __init__(self, rng: random.Random, name: str, size: int):
        self.rng = rng
        self.name = name
        self.size = size  # die edge in dbu
        self.early: dict[str, LibertyCell] = {}
        self.late: dict[str, LibertyCell] = {}
        self.ports: list[Port] = []
        self.components: list[Component] = []
        self.sinks: dict[tuple[str, str], list[tuple[str, str]]] = {}
        self.pins = 0

    def loc(self) -> tuple[int, int]:
        return self.rng.randrange(self.size + 1), self.rng.randrange(self.size + 1)

    def port(self, name: str, direction: str) -> tuple[str, str]:
        self.ports.append(Port(name, direction, self.loc()))
        self.pins += 1
        return (PORT, name)

    def add_class(self, early: LibertyCell, late: LibertyCell) -> None:
        self.early[early.name] = early
        self.late[late.name] = late

    def instance(self, inst: str, cls: str, npins: int) -> None:
        self.components.append(Component(inst, cls, self.loc()))
        self.pins += npins

    def connect(self, driver: tuple[str, str], sink: tuple[str, str]) -> None:
        self.sinks.setdefault(driver, []).append(sink)

    def finish(self, sdc: SdcConstraints, meta: dict) -> SyntheticCircuit:
        nets = []
        port_net = {}
        for k, (driver, sinks) in enumerate(self.sinks.items()):
            name = f"n{k}"
            conns = [driver, *sinks]
            nets.append(Net(name, conns))
            for inst, pin in conns:
                if inst == PORT:
                    port_net[pin] = name
        for p in self.ports:
            p.net = port_net.get(p.name)
        die = die_from_points([(0, 0), (self.size, self.size)])
        design = PhysicalDesign(self.name, 1000, die, self.ports, self.components, nets)
        return SyntheticCircuit(design, self.early, self.late, sdc, meta)


def _constant_cell(rng: random.Random, name: str, inputs: list[str], output: str, clock: str | None = None):
    """Early/late cell pair with constant tables; early = late x U(0.5, 0.95)."""
    early_pins, late_pins = {}, {}
    for pin in inputs + ([clock] if clock else []):
        late_cap = [rng.uniform(0.001, 0.01) for _ in range(2)]
        early_cap = [c * rng.uniform(0.8, 1.0) for c in late_cap]
        caps = early_cap + late_cap
        early_pins[pin] = LibertyPin(pin, "input", list(caps), pin == clock)
        late_pins[pin] = LibertyPin(pin, "input", list(caps), pin == clock)
    early_pins[output] = LibertyPin(output, "output", [0.0] * 4)
    late_pins[output] = LibertyPin(output, "output", [0.0] * 4)
    early_arcs, late_arcs = [], []
    for pin in [clock] if clock else inputs:
        late_t, early_t = {}, {}
        for kind in TABLE_KINDS:
            hi = 1.0 if kind.startswith("cell") else 0.2
            value = rng.uniform(0.05, hi)
            late_t[(kind, LATE)] = Lut.constant(value)
            early_t[(kind, EARLY)] = Lut.constant(value * rng.uniform(0.5, 0.95))
        late_arcs.append(TimingArc(pin, output, late_t))
        early_arcs.append(TimingArc(pin, output, early_t))
    return LibertyCell(name, early_pins, early_arcs), LibertyCell(name, late_pins, late_arcs)


def generate_circuit(
    seed: int,
    *,
    max_pins: int = 50,
    name: str | None = None,
    period_scale: tuple[float, float] = (0.4, 1.1),
) -> SyntheticCircuit:
    """Random single-clock circuit with a buffer-tree clock and <= ``max_pins`` pins.

    The clock period is drawn as a fraction of the longest register-to-register
    or I/O path estimate, so most circuits have some violations.
    """
    rng = random.Random(seed)
    b = _Builder(rng, name or f"synth{seed}", 200_000)
    n_regs = rng.randint(1, 4)
    n_pi = rng.randint(1, 3)
    n_buf = rng.randint(0, 4)
    # pin budget: clk port, PIs, registers (3 pins), buffers (2), gates (<=4), POs
    clk = b.port(CLOCK_PORT, "input")
    pis = [b.port(f"in{i}", "input") for i in range(n_pi)]

    # clock tree: each buffer hangs off the clock port or an earlier buffer
    clock_nodes = [clk]
    for i in range(n_buf):
        cls = f"CKBUF_{i}"
        b.add_class(*_constant_cell(rng, cls, ["A"], "Y"))
        inst = f"cb{i}"
        b.instance(inst, cls, 2)
        b.connect(rng.choice(clock_nodes), (inst, "A"))
        clock_nodes.append((inst, "Y"))

    signals = list(pis)
    reg_d = []
    for i in range(n_regs):
        cls = f"DFF_{i}"
        early, late = _constant_cell(rng, cls, ["D"], "Q", clock="CK")
        b.add_class(early, late)
        inst = f"r{i}"
        b.instance(inst, cls, 3)
        b.connect(rng.choice(clock_nodes), (inst, "CK"))
        signals.append((inst, "Q"))
        reg_d.append((inst, "D"))

    # prune clock buffers that ended up driving nothing
    while True:
        dead = [c for c in b.components if c.cell_class.startswith("CKBUF_") and not b.sinks.get((c.instance, "Y"))]
        if not dead:
            break
        for c in dead:
            b.components.remove(c)
            b.pins -= 2
            b.sinks.pop((c.instance, "Y"), None)
            for sinks in b.sinks.values():
                if (c.instance, "A") in sinks:
                    sinks.remove((c.instance, "A"))
            del b.early[c.cell_class], b.late[c.cell_class]
    b.sinks = {k: v for k, v in b.sinks.items() if v}

    used: set[tuple[str, str]] = set()
    gates = 0
    max_pos = 3
    while True:
        n_in = rng.randint(1, 3)
        if b.pins + n_in + 1 + max_pos + 1 > max_pins or gates >= 12:
            break
        cls = f"G_{gates}"
        inputs = [chr(ord("A") + k) for k in range(n_in)]
        b.add_class(*_constant_cell(rng, cls, inputs, "Y"))
        inst = f"g{gates}"
        b.instance(inst, cls, n_in + 1)
        for pin in inputs:
            src = rng.choice(signals)
            b.connect(src, (inst, pin))
            used.add(src)
        signals.append((inst, "Y"))
        gates += 1

    for d in reg_d:
        src = rng.choice(signals)
        b.connect(src, d)
        used.add(src)
    # every unused signal gets a primary output so nothing dangles
    unused = [s for s in signals if s not in used]
    n_po = 0
    for s in unused:
        b.connect(s, b.port(f"out{n_po}", "output"))
        n_po += 1
    if n_po == 0:
        b.connect(rng.choice(signals), b.port("out0", "output"))
        n_po = 1

    from .oracle import oracle_arrivals  # local import: oracle only used for period choice

    circuit_tmp = b.finish(SdcConstraints(1.0, CLOCK_PORT), {})
    arrivals = oracle_arrivals(circuit_tmp.design, circuit_tmp.early, circuit_tmp.late, circuit_tmp.sdc)
    worst = max((v[2] for v in arrivals.values()), default=1.0)
    period = round(max(worst, 0.1) * rng.uniform(*period_scale), 6)
    sdc = SdcConstraints(
        period,
        CLOCK_PORT,
        CLOCK_PORT,
        round(rng.uniform(0.0, 0.3), 6),
        {f"out{k}": round(rng.uniform(0.0, 0.5), 6) for k in range(n_po) if rng.random() < 0.7},
        {p[1]: round(rng.uniform(0.0, 0.5), 6) for p in pis if rng.random() < 0.7},
    )
    circuit = b.finish(sdc, {"seed": seed, "registers": n_regs, "gates": gates, "clock_buffers": n_buf})
    return circuit


def chain_circuit(delays: list[float], period: float, *, output_delay: float = 0.0, uncertainty: float = 0.0, name: str = "chain") -> SyntheticCircuit:
    """PI -> buffer chain -> PO with the given late delays (early = half).

    The PO slack is ``period - output_delay - uncertainty - sum(delays)``.
    """
    rng = random.Random(0)
    b = _Builder(rng, name, 100_000)
    b.port(CLOCK_PORT, "input")
    cur = b.port("in0", "input")
    for i, d in enumerate(delays):
        cls = f"BUF_{i}"
        early_t = {(k, EARLY): Lut.constant(d / 2 if k.startswith("cell") else 0.05) for k in TABLE_KINDS}
        late_t = {(k, LATE): Lut.constant(d if k.startswith("cell") else 0.05) for k in TABLE_KINDS}
        pins = {"A": LibertyPin("A", "input", [0.002] * 4), "Y": LibertyPin("Y", "output", [0.0] * 4)}
        b.add_class(
            LibertyCell(cls, dict(pins), [TimingArc("A", "Y", early_t)]),
            LibertyCell(cls, dict(pins), [TimingArc("A", "Y", late_t)]),
        )
        inst = f"b{i}"
        b.instance(inst, cls, 2)
        b.connect(cur, (inst, "A"))
        cur = (inst, "Y")
    b.connect(cur, b.port("out0", "output"))
    sdc = SdcConstraints(period, CLOCK_PORT, CLOCK_PORT, uncertainty, {"out0": output_delay} if output_delay else {}, {})
    return b.finish(sdc, {})


# ---------------------------------------------------------------------------
# large designs for performance checks


def _table(rng: random.Random, base: float, slope_s: float, slope_c: float) -> Lut:
    slews = [0.01, 0.03, 0.07, 0.15, 0.3, 0.6, 1.2]
    loads = [0.0005, 0.002, 0.005, 0.01, 0.02, 0.05, 0.1]
    values = [[base + slope_s * s + slope_c * c for c in loads] for s in slews]
    return Lut(slews, loads, values)


def _library_cell(rng: random.Random, name: str, inputs: list[str], output: str, clock: str | None = None):
    early_pins, late_pins = {}, {}
    for pin in inputs + ([clock] if clock else []):
        cap = rng.uniform(0.001, 0.005)
        early_pins[pin] = LibertyPin(pin, "input", [cap * 0.9] * 2 + [cap] * 2, pin == clock)
        late_pins[pin] = LibertyPin(pin, "input", [cap * 0.9] * 2 + [cap] * 2, pin == clock)
    early_pins[output] = LibertyPin(output, "output", [0.0] * 4)
    late_pins[output] = LibertyPin(output, "output", [0.0] * 4)
    early_arcs, late_arcs = [], []
    for pin in [clock] if clock else inputs:
        et, lt = {}, {}
        for kind in TABLE_KINDS:
            base = rng.uniform(0.02, 0.08)
            lt[(kind, LATE)] = _table(rng, base, 0.3, 2.0)
            et[(kind, EARLY)] = _table(rng, base * 0.8, 0.25, 1.6)
        late_arcs.append(TimingArc(pin, output, lt))
        early_arcs.append(TimingArc(pin, output, et))
    return LibertyCell(name, early_pins, early_arcs), LibertyCell(name, late_pins, late_arcs)


def generate_large_circuit(target_pins: int, seed: int = 0, *, name: str = "large") -> SyntheticCircuit:
    """Levelized random logic between register banks, about ``target_pins`` pins."""
    rng = random.Random(seed)
    b = _Builder(rng, name, 2_000_000)
    classes = {
        "BUF": ["A"],
        "INV": ["A"],
        "NAND2": ["A", "B"],
        "NOR2": ["A", "B"],
        "AOI21": ["A", "B", "C"],
    }
    for cls, inputs in classes.items():
        b.add_class(*_library_cell(rng, cls, inputs, "Y"))
    b.add_class(*_library_cell(rng, "CLKBUF", ["A"], "Y"))
    b.add_class(*_library_cell(rng, "DFF", ["D"], "Q", clock="CK"))
    names = list(classes)

    clk = b.port(CLOCK_PORT, "input")
    n_regs = max(4, target_pins // 40)
    # two-level clock tree
    leaves = []
    n_root = max(1, int(n_regs ** 0.5) // 4)
    for i in range(n_root):
        b.instance(f"ckr{i}", "CLKBUF", 2)
        b.connect(clk, (f"ckr{i}", "A"))
        for j in range(4):
            inst = f"ckl{i}_{j}"
            b.instance(inst, "CLKBUF", 2)
            b.connect((f"ckr{i}", "Y"), (inst, "A"))
            leaves.append((inst, "Y"))
    signals = [b.port(f"in{i}", "input") for i in range(32)]
    reg_d = []
    for i in range(n_regs):
        inst = f"r{i}"
        b.instance(inst, "DFF", 3)
        b.connect(leaves[i % len(leaves)], (inst, "CK"))
        signals.append((inst, "Q"))
        reg_d.append((inst, "D"))
    used = set()
    budget = target_pins - n_regs - 64
    k = 0
    window = 2000
    while b.pins < budget:
        cls = rng.choice(names)
        inputs = classes[cls]
        inst = f"g{k}"
        b.instance(inst, cls, len(inputs) + 1)
        lo = max(0, len(signals) - window)
        for pin in inputs:
            src = signals[rng.randrange(lo, len(signals))]
            b.connect(src, (inst, pin))
            used.add(src)
        signals.append((inst, "Y"))
        k += 1
    for d in reg_d:
        src = signals[rng.randrange(max(0, len(signals) - window), len(signals))]
        b.connect(src, d)
        used.add(src)
    n_po = 0
    for s in signals:
        if s not in used:
            b.connect(s, b.port(f"out{n_po}", "output"))
            n_po += 1
    sdc = SdcConstraints(2.0, CLOCK_PORT, CLOCK_PORT, 0.1, {}, {})
    return b.finish(sdc, {"seed": seed, "registers": n_regs, "gates": k})
