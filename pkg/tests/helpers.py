"""Small netlist builders and random-structure generators shared by the tests."""

from __future__ import annotations

import random

from preslack.corners import ANALYSES, EARLY, LATE, TABLE_KINDS
from preslack.liberty import LibertyCell, LibertyPin, LibrarySet, Lut, TimingArc
from preslack.physical import PORT, Component, Net, PhysicalDesign, Port, die_from_points
from preslack.sdf import DelayLabels


def const_cell(name, inputs, output="Y", late=0.5, early=None, clock=None, cap=0.002):
    """Early/late pair of a cell whose arcs all have constant tables."""
    early = late / 2 if early is None else early
    pins = {}
    for p in inputs + ([clock] if clock else []):
        pins[p] = LibertyPin(p, "input", [cap] * 4, p == clock)
    pins[output] = LibertyPin(output, "output", [0.0] * 4)
    drivers = [clock] if clock else inputs
    ea = [TimingArc(p, output, {(k, EARLY): Lut.constant(early) for k in TABLE_KINDS}) for p in drivers]
    la = [TimingArc(p, output, {(k, LATE): Lut.constant(late) for k in TABLE_KINDS}) for p in drivers]
    return LibertyCell(name, dict(pins), ea), LibertyCell(name, dict(pins), la)


def library(*pairs) -> LibrarySet:
    return LibrarySet({e.name: e for e, _ in pairs}, {l.name: l for _, l in pairs})


def design(ports, components, nets, die=(0, 0, 100_000, 100_000), name="t"):
    """ports: [(name, dir, (x, y))]; components: [(inst, cls, (x, y))];
    nets: {name: [(inst|'PIN', pin), ...]}"""
    return PhysicalDesign(
        name,
        1000,
        die_from_points([(die[0], die[1]), (die[2], die[3])]),
        [Port(n, d, loc) for n, d, loc in ports],
        [Component(i, c, loc) for i, c, loc in components],
        [Net(n, list(conns)) for n, conns in nets.items()],
    )


def inverter_design():
    libs = library(const_cell("INV", ["A"]))
    d = design(
        [("in", "input", (0, 0)), ("out", "output", (10_000, 0))],
        [("u1", "INV", (5_000, 3_000))],
        {"a": [(PORT, "in"), ("u1", "A")], "y": [("u1", "Y"), (PORT, "out")]},
    )
    return d, libs


def chain_design(k, delay=0.5):
    pairs = [const_cell(f"INV{i}", ["A"], late=delay) for i in range(k)]
    comps = [(f"u{i}", f"INV{i}", (1000 * i, 0)) for i in range(k)]
    nets = {"n0": [(PORT, "in"), ("u0", "A")]}
    for i in range(1, k):
        nets[f"n{i}"] = [(f"u{i - 1}", "Y"), (f"u{i}", "A")]
    nets["out"] = [(f"u{k - 1}", "Y"), (PORT, "out")]
    d = design([("in", "input", (0, 0)), ("out", "output", (50_000, 0))], comps, nets)
    return d, library(*pairs)


# ---------------------------------------------------------------------------
# random structures for round-trip fuzzing


def _ident(rng, prefix):
    return prefix + "".join(rng.choice("abcdefgh0123456789_") for _ in range(rng.randint(1, 6)))


def _float(rng):
    return rng.choice([0.0, rng.uniform(0, 5), rng.uniform(0, 1e-3), round(rng.uniform(0, 2), 3)])


def random_lut(rng, max_dim=7) -> Lut:
    r, c = rng.randint(1, max_dim), rng.randint(1, max_dim)
    i1 = sorted(rng.sample(range(1, 10_000), r))
    i2 = sorted(rng.sample(range(1, 10_000), c))
    return Lut([x / 1000 for x in i1], [x / 10_000 for x in i2], [[_float(rng) for _ in range(c)] for _ in range(r)])


def random_library(rng, corner: str) -> dict[str, LibertyCell]:
    """Cells with only ``corner`` populated, in the canonical order the writer emits."""
    cells = {}
    slot = (0, 1) if corner == EARLY else (2, 3)
    for k in range(rng.randint(1, 4)):
        name = _ident(rng, f"C{k}_")
        pins = {}
        n_in = rng.randint(1, 3)
        for i in range(n_in):
            caps = [0.0] * 4
            caps[slot[0]], caps[slot[1]] = _float(rng), _float(rng)
            pins[f"I{i}"] = LibertyPin(f"I{i}", "input", caps, rng.random() < 0.2)
        arcs = []
        for o in range(rng.randint(1, 2)):
            out = f"Z{o}"
            pins[out] = LibertyPin(out, "output", [0.0] * 4, False)
            for i in range(n_in):
                if rng.random() < 0.7:
                    kinds = [kd for kd in TABLE_KINDS if rng.random() < 0.8]
                    arcs.append(TimingArc(f"I{i}", out, {(kd, corner): random_lut(rng) for kd in kinds}))
        cells[name] = LibertyCell(name, pins, arcs)
    return cells


def random_design(rng) -> PhysicalDesign:
    xl, yl = rng.randint(-1000, 1000), rng.randint(-1000, 1000)
    xh, yh = xl + rng.randint(1, 10**6), yl + rng.randint(1, 10**6)

    def loc():
        return rng.randint(xl, xh), rng.randint(yl, yh)

    ports = [
        Port(f"p{i}_{_ident(rng, '')}", rng.choice(["input", "output", "inout"]), loc()) for i in range(rng.randint(0, 6))
    ]
    comps = [
        Component(f"u{i}", _ident(rng, "CELL"), loc(), rng.choice(["N", "S", "FN", "FS", "E", "W"]))
        for i in range(rng.randint(0, 8))
    ]
    endpoints = [(PORT, p.name) for p in ports] + [(c.instance, rng.choice("ABYQ")) for c in comps]
    nets = []
    for i in range(rng.randint(0, 8)):
        conns = [rng.choice(endpoints) for _ in range(rng.randint(1, 4))] if endpoints else []
        nets.append(Net(f"n{i}", conns))
    for p in ports:
        hits = [n.name for n in nets if (PORT, p.name) in n.connections]
        p.net = hits[-1] if hits else None
    return PhysicalDesign(_ident(rng, "d"), rng.choice([100, 1000, 2000]), die_from_points([(xl, yl), (xh, yh)]), ports, comps, nets)


def random_labels(rng) -> DelayLabels:
    labels = DelayLabels()

    def quad():
        er, ef = _float(rng), _float(rng)
        return (er, ef, er + _float(rng), ef + _float(rng))

    insts = [f"u{i}" for i in range(rng.randint(0, 5))]
    for inst in insts:
        for _ in range(rng.randint(0, 3)):
            labels.cell_delays[(inst, rng.choice("ABC"), rng.choice("YZ"))] = quad()
        if rng.random() < 0.6:
            labels.cell_types[inst] = _ident(rng, "CT")
    for _ in range(rng.randint(0, 5)):
        labels.net_delays[(f"{rng.choice(insts or ['x'])}/Y", f"{_ident(rng, 'v')}/A")] = quad()
    for q in ("AT", "RAT", "SLEW"):
        target = labels.pin_map(q)
        for _ in range(rng.randint(0, 4)):
            vals = tuple(_float(rng) if rng.random() < 0.7 else None for _ in range(4))
            if any(v is not None for v in vals):
                target[_ident(rng, "pin/")] = vals
    # instances that appear only as cell types, without delays
    return labels


__all__ = [
    "ANALYSES",
    "chain_design",
    "const_cell",
    "design",
    "inverter_design",
    "library",
    "random_design",
    "random_labels",
    "random_library",
    "random_lut",
]
