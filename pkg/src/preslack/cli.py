"""Command-line front end: parse, slack, compare and gen subcommands.

Every option can also be set through an environment variable named
``PRESLACK_<OPTION>`` (dashes become underscores, e.g. ``PRESLACK_LUT_SHAPE``).
Repeatable path options take an ``os.pathsep``-separated list. Command-line
flags win over the environment.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .arrival import DEFAULT_PI_SLEW, DelayModel, at_from_external, at_from_labels, propagate_at, timing_to_labels
from .corners import EARLY, LATE
from .errors import PreslackError
from .graph import compute_levels, build_graph, export_graph, remove_cycles
from .liberty import LibrarySet, merge_libraries, read_liberty
from .metrics import evaluate
from .physical import read_def
from .sdc import read_sdc
from .sdf import DelayLabels, read_labels, read_sdf, write_label_sidecar
from .slack import CLOCK_EARLY_MODES, CLOCK_EARLY_RISE, analyze, generate_report

logger = logging.getLogger("preslack")

ENV_PREFIX = "PRESLACK_"

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_USAGE = 2
EXIT_INPUT = 3

AT_SOURCES = ("labels", "external", "propagate")


@dataclass
class RunConfig:
    lib_early: list[str]
    lib_late: list[str]
    def_path: str
    sdc_path: str
    sdf_paths: list[str] = field(default_factory=list)
    label_paths: list[str] = field(default_factory=list)
    predictions: str | None = None
    at_source: str = "propagate"
    lut_shape: tuple[int, int] = (7, 7)
    strict_labels: bool = True
    net_delay_per_micron: float = 0.0
    pi_slew: float = DEFAULT_PI_SLEW
    clock_early: str = CLOCK_EARLY_RISE
    jobs: int = 1
    out_graph: str | None = None
    out_report: str | None = None
    out_text: str | None = None
    fail_on_wns: bool = True

    def __post_init__(self):
        if not self.lib_early or not self.lib_late:
            raise ValueError("at least one early and one late Liberty file are required")
        if self.at_source == "labels" and not (self.sdf_paths or self.label_paths):
            raise ValueError("--at labels needs --sdf or --labels")
        if self.at_source == "external" and not self.predictions:
            raise ValueError("--at external needs --predictions")


class Phases:
    """Back-to-back wall-clock phases; their durations sum to the total."""

    def __init__(self):
        self.start = self.mark = time.perf_counter()
        self.times: dict[str, float] = {}

    def done(self, name: str) -> None:
        now = time.perf_counter()
        self.times[name] = self.times.get(name, 0.0) + now - self.mark
        self.mark = now

    @property
    def total(self) -> float:
        return self.mark - self.start

    def line(self) -> str:
        parts = [f"t_{k}={v:.3f}s" for k, v in self.times.items()]
        return " ".join(parts + [f"total={self.total:.3f}s"])


@dataclass
class Inputs:
    libs: LibrarySet
    design: object
    sdc: object
    labels: DelayLabels | None


def _job(task):
    kind, path = task
    if kind == "lib_early":
        return read_liberty(path, EARLY)
    if kind == "lib_late":
        return read_liberty(path, LATE)
    if kind == "def":
        return read_def(path)
    if kind == "sdc":
        return read_sdc(path)
    if kind == "sdf":
        return read_sdf(path)
    return read_labels(path)


def load_inputs(config: RunConfig) -> Inputs:
    """Parse every input file; independent files run concurrently when jobs > 1."""
    tasks = [("lib_early", p) for p in config.lib_early] + [("lib_late", p) for p in config.lib_late]
    tasks += [("def", config.def_path), ("sdc", config.sdc_path)]
    tasks += [("sdf", p) for p in config.sdf_paths] + [("labels", p) for p in config.label_paths]
    jobs = max(1, min(config.jobs, len(tasks)))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_job, tasks))
    else:
        results = [_job(t) for t in tasks]
    early, late, labels = [], [], None
    design = sdc = None
    for (kind, _), res in zip(tasks, results):
        if kind == "lib_early":
            early.append(res)
        elif kind == "lib_late":
            late.append(res)
        elif kind == "def":
            design = res
        elif kind == "sdc":
            sdc = res
        else:
            labels = res if labels is None else labels.merge(res)
    for lib in early + late:
        for w in lib.warnings:
            logger.warning("%s: %s", lib.name, w)
    libs = LibrarySet(merge_libraries(early), merge_libraries(late))
    return Inputs(libs, design, sdc, labels)


def _stage(name: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except PreslackError as exc:
        raise PreslackError(f"[{name}] {exc}") from exc


def run_graph(config: RunConfig, phases: Phases):
    inputs = _stage("parse", load_inputs, config)
    phases.done("parse")
    inputs.sdc.check_ports(p.name for p in inputs.design.ports)
    graph = _stage("graph", build_graph, inputs.design, inputs.libs, config.lut_shape)
    graph = _stage("graph", remove_cycles, graph)
    graph.levels, _ = _stage("graph", compute_levels, graph)
    phases.done("graph")
    return inputs, graph


def _stats(graph) -> str:
    return (
        f"nodes={len(graph.nodes)} cell_edges={len(graph.cell_edges)} "
        f"net_edges={len(graph.net_edges)} endpoints={len(graph.endpoints)}"
    )


def _write(path: str, text: str) -> None:
    Path(path).write_text(text)


def cmd_parse(config: RunConfig, out=None) -> int:
    out = out or sys.stdout
    phases = Phases()
    inputs, graph = run_graph(config, phases)
    if config.out_graph:
        doc = export_graph(graph, inputs.labels)
        _write(config.out_graph, json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n")
        phases.done("write")
    print(f"{_stats(graph)} {phases.line()}", file=out)
    return EXIT_OK


def run_slack(config: RunConfig, phases: Phases):
    inputs, graph = run_graph(config, phases)
    libs = inputs.libs
    common = dict(
        sdc=inputs.sdc, pi_slew=config.pi_slew, net_delay_per_micron=config.net_delay_per_micron, libs=libs
    )
    if config.at_source == "labels":
        timing = _stage("at", at_from_labels, graph, inputs.labels, strict=config.strict_labels, **common)
    elif config.at_source == "external":
        text = Path(config.predictions).read_text()
        timing = _stage(
            "at", at_from_external, graph, text, strict=config.strict_labels, source=config.predictions, **common
        )
    else:
        timing = _stage(
            "at", propagate_at, graph, libs, inputs.sdc,
            pi_slew=config.pi_slew, net_delay_per_micron=config.net_delay_per_micron,
        )
    phases.done("at")
    model = DelayModel(graph, libs, config.net_delay_per_micron)
    report = _stage("slack", analyze, graph, timing, inputs.sdc, model=model, clock_early=config.clock_early)
    phases.done("slack")
    return inputs, graph, timing, report


def cmd_slack(config: RunConfig, out=None) -> int:
    out = out or sys.stdout
    phases = Phases()
    inputs, graph, timing, report = run_slack(config, phases)
    text = generate_report(report, "text")
    if config.out_report:
        _write(config.out_report, generate_report(report, "structured"))
    if config.out_text:
        _write(config.out_text, text)
    if config.out_graph:
        _write(config.out_graph, json.dumps(export_graph(graph, inputs.labels), sort_keys=True, separators=(",", ":")) + "\n")
    phases.done("write")
    out.write(text)
    print(f"{_stats(graph)} {phases.line()}", file=out)
    if config.fail_on_wns and report.wns < 0:
        return EXIT_VIOLATION
    return EXIT_OK


def cmd_compare(config: RunConfig, out=None, out_eval: str | None = None) -> int:
    out = out or sys.stdout
    if not (config.sdf_paths or config.label_paths):
        raise ValueError("compare needs ground-truth --sdf or --labels")
    phases = Phases()
    inputs, graph, timing, report = run_slack(config, phases)
    summary = evaluate(graph, report, inputs.labels, timing)
    phases.done("evaluate")
    if out_eval:
        _write(out_eval, json.dumps(summary.to_dict(), indent=1, sort_keys=True) + "\n")
    print(summary.line(), file=out)
    print(f"{_stats(graph)} {phases.line()}", file=out)
    return EXIT_OK


def cmd_gen(args, out=None) -> int:
    out = out or sys.stdout
    from .oracle import oracle_slacks
    from .synth import generate_circuit, generate_large_circuit
    from .graph import prepare_graph

    directory = Path(args.out_dir)
    for k in range(args.count):
        seed = args.seed + k
        if args.large:
            circuit = generate_large_circuit(args.large, seed, name=f"large{seed}")
        else:
            circuit = generate_circuit(seed, max_pins=args.max_pins)
        paths = circuit.write(directory)
        graph = prepare_graph(circuit.design, circuit.libs)
        timing = propagate_at(graph, circuit.libs, circuit.sdc)
        labels = timing_to_labels(graph, timing)
        if args.large:
            report = analyze(graph, timing, circuit.sdc, model=DelayModel(graph, circuit.libs))
            rats = {r.name: r.rat_corrected for r in report.endpoints}
        else:
            rats = {
                name: e.rat + e.crp
                for name, e in oracle_slacks(circuit.design, circuit.early, circuit.late, circuit.sdc).items()
            }
        for name, rat in rats.items():
            labels.pin_rat[name] = (None, None, rat, None)
        label_path = directory / f"{circuit.design.name}.labels"
        label_path.write_text(write_label_sidecar(labels))
        print(" ".join(str(p) for p in [*paths.values(), label_path]), file=out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument handling


def _lut_shape(text: str) -> tuple[int, int]:
    try:
        rows, cols = (int(x) for x in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected RxC, got {text!r}") from None
    if rows < 1 or cols < 1:
        raise argparse.ArgumentTypeError("LUT dimensions must be positive")
    return rows, cols


def _env_list(name: str) -> list[str] | None:
    value = os.environ.get(ENV_PREFIX + name)
    return [p for p in value.split(os.pathsep) if p] if value else None


def _env(name: str, default=None):
    return os.environ.get(ENV_PREFIX + name, default)


def _add_inputs(p: argparse.ArgumentParser) -> None:
    p.add_argument("--lib-early", action="append", metavar="LIB", help="early (fast) Liberty file, repeatable")
    p.add_argument("--lib-late", action="append", metavar="LIB", help="late (slow) Liberty file, repeatable")
    p.add_argument("--def", dest="def_path", metavar="DEF", default=_env("DEF"))
    p.add_argument("--sdc", dest="sdc_path", metavar="SDC", default=_env("SDC"))
    p.add_argument("--sdf", action="append", metavar="SDF", help="SDF with embedded labels, repeatable")
    p.add_argument("--labels", action="append", metavar="FILE", help="label sidecar file, repeatable")
    p.add_argument("--lut-shape", type=_lut_shape, default=_env("LUT_SHAPE", "7x7"), metavar="RxC")
    p.add_argument("--jobs", type=int, default=int(_env("JOBS", os.cpu_count() or 1)), metavar="N")
    p.add_argument("--out-graph", default=_env("OUT_GRAPH"), metavar="JSON", help="write the interchange graph")


def _add_slack(p: argparse.ArgumentParser) -> None:
    p.add_argument("--at", dest="at_source", choices=AT_SOURCES, default=_env("AT"))
    p.add_argument("--predictions", default=_env("PREDICTIONS"), metavar="FILE")
    p.add_argument("--permissive", action="store_true", default=_env("PERMISSIVE") == "1",
                   help="fill pins missing from labels/predictions by local propagation")
    p.add_argument("--net-delay-per-micron", type=float, default=float(_env("NET_DELAY_PER_MICRON", 0.0)))
    p.add_argument("--pi-slew", type=float, default=float(_env("PI_SLEW", DEFAULT_PI_SLEW)))
    p.add_argument("--clock-early", choices=CLOCK_EARLY_MODES, default=_env("CLOCK_EARLY", CLOCK_EARLY_RISE),
                   help="early clock-pin value: early-rise or min of early rise/fall")
    p.add_argument("--out-report", default=_env("OUT_REPORT"), metavar="JSON", help="structured report")
    p.add_argument("--out-text", default=_env("OUT_TEXT"), metavar="TXT", help="text report")
    p.add_argument("--no-fail-on-wns", action="store_true", default=_env("NO_FAIL_ON_WNS") == "1")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="preslack", description="Pre-routing slack estimation.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("parse", help="parse inputs and build the timing graph")
    _add_inputs(p)
    p = sub.add_parser("slack", help="estimate endpoint slack, TNS and WNS")
    _add_inputs(p)
    _add_slack(p)
    p = sub.add_parser("compare", help="evaluate estimates against labels")
    _add_inputs(p)
    _add_slack(p)
    p.add_argument("--out-eval", default=_env("OUT_EVAL"), metavar="JSON")
    p = sub.add_parser("gen", help="write random synthetic benchmark circuits")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--max-pins", type=int, default=50)
    p.add_argument("--large", type=int, default=0, metavar="PINS", help="generate a large design of about PINS pins")
    return parser


def _config(args, parser) -> RunConfig:
    lib_early = args.lib_early or _env_list("LIB_EARLY")
    lib_late = args.lib_late or _env_list("LIB_LATE")
    sdf = args.sdf or _env_list("SDF") or []
    labels = args.labels or _env_list("LABELS") or []
    missing = [flag for flag, v in (("--lib-early", lib_early), ("--lib-late", lib_late),
                                    ("--def", args.def_path), ("--sdc", args.sdc_path)) if not v]
    if missing:
        parser.error(f"missing required option(s): {', '.join(missing)}")
    shape = args.lut_shape if isinstance(args.lut_shape, tuple) else _lut_shape(args.lut_shape)
    at_source = getattr(args, "at_source", None)
    if at_source is None:
        at_source = "labels" if (sdf or labels) else "propagate"
    if args.jobs < 1:
        parser.error("--jobs must be at least 1")
    try:
        return RunConfig(
            lib_early, lib_late, args.def_path, args.sdc_path, sdf, labels,
            predictions=getattr(args, "predictions", None),
            at_source=at_source,
            lut_shape=shape,
            strict_labels=not getattr(args, "permissive", False),
            net_delay_per_micron=getattr(args, "net_delay_per_micron", 0.0),
            pi_slew=getattr(args, "pi_slew", DEFAULT_PI_SLEW),
            clock_early=getattr(args, "clock_early", CLOCK_EARLY_RISE),
            jobs=args.jobs,
            out_graph=args.out_graph,
            out_report=getattr(args, "out_report", None),
            out_text=getattr(args, "out_text", None),
            fail_on_wns=not getattr(args, "no_fail_on_wns", False),
        )
    except ValueError as exc:
        parser.error(str(exc))


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "gen":
            return cmd_gen(args)
        sub = parser._subparsers._group_actions[0].choices[args.command]
        config = _config(args, sub)
        if args.command == "parse":
            return cmd_parse(config)
        if args.command == "slack":
            return cmd_slack(config)
        if args.command == "compare" and not (config.sdf_paths or config.label_paths):
            sub.error("compare needs ground-truth --sdf or --labels")
        return cmd_compare(config, out_eval=args.out_eval)
    except SystemExit as exc:
        return int(exc.code or 0)
    except (PreslackError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
