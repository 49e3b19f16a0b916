"""Command-line surface: simulate -> build -> track -> diagnose -> export.

Exit codes: 0 success, 2 usage or validation error, 3 runtime failure
(numerical blowup).  All outputs are deterministic for identical inputs.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import builder, ingest, tracking
from .errors import CpTaintError, NumericalBlowup
from .model import Dataset, NodeId, Variable, format_node_id, parse_node_id
from .sim import (
    ControllerParams,
    Injection,
    MotorParams,
    Scenario,
    parse_injection,
    parse_scenario_config,
    simulate,
    simulate_pair,
)


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise CpTaintError(f"cannot read {path}: {exc}") from None


def _write(path: str, text: str) -> None:
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise CpTaintError(f"cannot write {path}: {exc}") from None


# simulate ---------------------------------------------------------------


def _add_scenario_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="scenario config file (key = value)")
    parser.add_argument("--cycles", type=int, help="number of cycles to run")
    parser.add_argument("--cycle-len", type=int, help="events per cycle (default 64)")
    parser.add_argument("--seed", type=int, help="noise seed")
    parser.add_argument("--speed", type=float, help="speed command in rpm")
    parser.add_argument(
        "--speed-profile", help="speed command steps, e.g. '0:1000,64:1200'"
    )
    parser.add_argument("--load-torque", type=float, help="base load torque in N m")
    parser.add_argument("--noise-current", type=float, help="phase-current noise std (A)")
    parser.add_argument("--noise-theta", type=float, help="angle noise std (deg)")
    parser.add_argument("--noise-omega", type=float, help="speed noise std (rpm)")
    parser.add_argument(
        "--attack",
        action="append",
        default=[],
        metavar="KIND:START:END:MAG",
        help="cyber injection (speed|iq|pwm), repeatable",
    )
    parser.add_argument(
        "--fault",
        action="append",
        default=[],
        metavar="KIND:START:END:MAG",
        help="physical injection (torque|resistance), repeatable",
    )


def _scenario_from_args(args: argparse.Namespace) -> tuple[MotorParams, ControllerParams, Scenario]:
    if args.config:
        motor, ctrl, scenario = parse_scenario_config(_read(args.config))
    else:
        motor, ctrl, scenario = MotorParams(), ControllerParams(), Scenario()

    from dataclasses import replace

    updates: dict[str, object] = {}
    if args.cycles is not None:
        updates["cycles"] = args.cycles
    if args.cycle_len is not None:
        updates["cycle_len"] = args.cycle_len
    if args.seed is not None:
        updates["noise_seed"] = args.seed
    if args.speed is not None:
        updates["speed_rpm"] = args.speed
    if args.load_torque is not None:
        updates["load_torque"] = args.load_torque
    if args.noise_current is not None:
        updates["noise_current"] = args.noise_current
    if args.noise_theta is not None:
        updates["noise_theta"] = args.noise_theta
    if args.noise_omega is not None:
        updates["noise_omega"] = args.noise_omega
    if args.speed_profile:
        steps = []
        for part in args.speed_profile.split(","):
            part = part.strip()
            if part:
                ev, rpm = part.split(":")
                steps.append((int(ev), float(rpm)))
        updates["speed_profile"] = tuple(steps)

    injections = list(scenario.injections)
    for text in args.attack:
        inj = parse_injection(text)
        if not inj.kind.is_cyber:
            raise CpTaintError(f"--attack {text!r}: {inj.kind.code} is a physical fault, use --fault")
        injections.append(inj)
    for text in args.fault:
        inj = parse_injection(text)
        if inj.kind.is_cyber:
            raise CpTaintError(f"--fault {text!r}: {inj.kind.code} is a cyber attack, use --attack")
        injections.append(inj)
    updates["injections"] = tuple(injections)
    return motor, ctrl, replace(scenario, **updates)


def cmd_simulate(args: argparse.Namespace) -> int:
    motor, ctrl, scenario = _scenario_from_args(args)
    if scenario.injections:
        baseline, disturbed, log = simulate_pair(motor, ctrl, scenario)
    else:
        disturbed, log = simulate(motor, ctrl, scenario)
        baseline = disturbed
    _write(args.out, ingest.emit_dataset(disturbed))
    if args.baseline_out:
        _write(args.baseline_out, ingest.emit_dataset(baseline))
    if args.log_out:
        _write(args.log_out, log.to_csv())
    print(f"wrote {disturbed.n_events} events to {args.out}")
    return 0


# build ------------------------------------------------------------------


def _load_dataset(args: argparse.Namespace, path: str) -> Dataset:
    text = _read(path)
    cycle_len = args.cycle_len
    n_cycles = args.cycles
    if n_cycles is None:
        n_rows = max(0, len(text.splitlines()) - 1)
        if n_rows == 0 or n_rows % cycle_len:
            raise CpTaintError(
                f"{path}: {n_rows} rows is not a whole number of {cycle_len}-event cycles; "
                "pass --cycles explicitly"
            )
        n_cycles = n_rows // cycle_len
    return ingest.parse_dataset(
        text,
        cycle_len=cycle_len,
        n_cycles=n_cycles,
        speed_ref_default=args.speed_ref_default,
    )


def _parse_sources(specs: list[str], tag: str, cycle_len: int) -> list[tuple[Variable | NodeId, str]]:
    sources: list[tuple[Variable | NodeId, str]] = []
    for spec in specs:
        kind, _, rest = spec.partition(":")
        if kind == "var" and rest:
            try:
                sources.append((Variable(int(rest)), tag))
            except ValueError:
                raise CpTaintError(f"--source {spec!r}: variable must be an integer 0..9") from None
        elif kind == "node" and rest:
            sources.append((parse_node_id(rest, cycle_len), tag))
        else:
            raise CpTaintError(f"--source {spec!r}: expected var:<0..9> or node:<c-e-v>")
    return sources


def cmd_build(args: argparse.Namespace) -> int:
    dataset = _load_dataset(args, args.data)
    if args.template:
        template = ingest.parse_template(_read(args.template))
    else:
        template = ingest.default_template()
    sources = _parse_sources(args.source, args.scenario_tag, dataset.cycle_len)
    graph = builder.build_graph(dataset, template, sources)
    report = builder.validate_graph(graph)
    if not report.ok:
        sys.stderr.write(report.to_text())
        return 2
    _write(args.out, builder.export_edges(graph, extended=args.extended))
    print(f"wrote {graph.n_edges} edges ({graph.n_nodes} nodes) to {args.out}")
    return 0


# tracking queries -------------------------------------------------------


def _load_graph(args: argparse.Namespace):
    return builder.load_graph(_read(args.graph), cycle_len=args.cycle_len)


def _policy(args: argparse.Namespace) -> tracking.MismatchPolicy:
    return tracking.MismatchPolicy(
        rel_tol=args.rel_tol,
        abs_tol=args.abs_tol,
        angle_aware=not args.no_angle_aware,
    )


def _baseline_for(graph, args: argparse.Namespace) -> Dataset:
    return ingest.parse_dataset(
        _read(args.baseline),
        cycle_len=graph.cycle_len,
        n_cycles=max(1, -(-graph.n_events // graph.cycle_len)),
        speed_ref_default=args.speed_ref_default,
        allow_partial=True,
    )


def cmd_forward(args: argparse.Namespace) -> int:
    graph = _load_graph(args)
    node = parse_node_id(args.node, graph.cycle_len)
    reached = tracking.forward_taint(graph, {node})
    for node_id in sorted(reached):
        print(format_node_id(node_id))
    return 0


def cmd_backward(args: argparse.Namespace) -> int:
    graph = _load_graph(args)
    node = parse_node_id(args.node, graph.cycle_len)
    if args.baseline:
        baseline = _baseline_for(graph, args)
        factors = tracking.causing_factors(graph, baseline, node, _policy(args))
        for f in sorted(factors, key=lambda f: f.node_id):
            flag = "mismatch" if f.mismatch else "ok"
            print(f"{format_node_id(f.node_id)},{flag},{f.deviation!r}")
    else:
        for node_id in sorted(tracking.backward_taint(graph, node)):
            print(format_node_id(node_id))
    return 0


def cmd_diagnose(args: argparse.Namespace) -> int:
    graph = _load_graph(args)
    node = parse_node_id(args.node, graph.cycle_len)
    baseline = _baseline_for(graph, args)
    report = tracking.diagnose(graph, baseline, node, _policy(args), max_paths=args.max_paths)
    print(report.to_text(), end="")
    return 0


def cmd_export_dot(args: argparse.Namespace) -> int:
    graph = _load_graph(args)
    highlight: set[NodeId] = set()
    if args.highlight_from:
        node = parse_node_id(args.highlight_from, graph.cycle_len)
        highlight = tracking.forward_taint(graph, {node})
    dot = builder.export_dot(graph, highlight)
    if args.out:
        _write(args.out, dot)
        print(f"wrote DOT to {args.out}")
    else:
        print(dot, end="")
    return 0


# pipeline ---------------------------------------------------------------


def cmd_pipeline(args: argparse.Namespace) -> int:
    motor, ctrl, scenario = _scenario_from_args(args)
    baseline, disturbed, log = simulate_pair(motor, ctrl, scenario)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write(str(out_dir / "dataset.csv"), ingest.emit_dataset(disturbed))
    _write(str(out_dir / "baseline.csv"), ingest.emit_dataset(baseline))
    _write(str(out_dir / "groundtruth.csv"), log.to_csv())

    template = ingest.default_template()
    sources = _parse_sources(args.source or ["var:0"], args.scenario_tag, disturbed.cycle_len)
    graph = builder.build_graph(disturbed, template, sources)
    _write(str(out_dir / "graph.csv"), builder.export_edges(graph))

    policy = _policy(args)
    try:
        damage_var = Variable(args.damage_var)
    except ValueError:
        raise CpTaintError(f"--damage-var {args.damage_var} outside 0..9") from None
    damage = tracking.first_mismatched_node(graph, baseline, damage_var, policy)
    if damage is None:
        print("no mismatch observed on the damage variable")
        print("classification: Inconclusive")
        return 0
    report = tracking.diagnose(graph, baseline, damage, policy, max_paths=args.max_paths)
    print(report.to_text(), end="")
    return 0


# parser -----------------------------------------------------------------


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cptaint",
        description="taint graphs and intrusion diagnosis over motor-drive event data",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run the drive simulator and write dataset CSVs")
    _add_scenario_flags(p)
    p.add_argument("--out", required=True, help="disturbed (or plain) dataset CSV path")
    p.add_argument("--baseline-out", help="matched clean baseline CSV path")
    p.add_argument("--log-out", help="ground-truth injection log CSV path")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("build", help="build the taint graph from a dataset CSV")
    p.add_argument("--data", required=True, help="dataset CSV path")
    p.add_argument("--template", help="seed topology CSV (default: built-in)")
    p.add_argument("--cycle-len", type=int, default=64)
    p.add_argument("--cycles", type=int, help="default: inferred from the row count")
    p.add_argument("--speed-ref-default", type=float, default=0.0)
    p.add_argument(
        "--source",
        action="append",
        default=[],
        metavar="var:<0..9>|node:<c-e-v>",
        help="taint source; var: marks every event (persistent), node: one event",
    )
    p.add_argument("--scenario-tag", default="attack")
    p.add_argument("--extended", action="store_true", help="write full tag sets")
    p.add_argument("--out", required=True, help="graph-info CSV path")
    p.set_defaults(func=cmd_build)

    def add_graph_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--graph", required=True, help="graph-info CSV path")
        p.add_argument("--cycle-len", type=int, help="override inferred cycle length")

    def add_policy_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--rel-tol", type=float, default=0.05)
        p.add_argument("--abs-tol", type=float, default=0.01)
        p.add_argument("--no-angle-aware", action="store_true")
        p.add_argument("--speed-ref-default", type=float, default=0.0)

    p = sub.add_parser("forward", help="forward damage set from a node")
    add_graph_flags(p)
    p.add_argument("--node", required=True, help="source node id c-e-v")
    p.set_defaults(func=cmd_forward)

    p = sub.add_parser("backward", help="backward causal cone of a node")
    add_graph_flags(p)
    p.add_argument("--node", required=True, help="sink node id c-e-v")
    p.add_argument("--baseline", help="clean dataset CSV for mismatch annotation")
    add_policy_flags(p)
    p.set_defaults(func=cmd_backward)

    p = sub.add_parser("diagnose", help="answer the intrusion-diagnosis questions")
    add_graph_flags(p)
    p.add_argument("--node", required=True, help="observed damage node id c-e-v")
    p.add_argument("--baseline", required=True, help="clean dataset CSV")
    add_policy_flags(p)
    p.add_argument("--max-paths", type=int, default=10)
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("export-dot", help="render the graph as DOT")
    add_graph_flags(p)
    p.add_argument("--highlight-from", help="highlight the forward set of this node")
    p.add_argument("--out", help="output path (default: stdout)")
    p.set_defaults(func=cmd_export_dot)

    p = sub.add_parser("pipeline", help="simulate, build and diagnose in one run")
    _add_scenario_flags(p)
    p.add_argument("--out-dir", default=".", help="directory for the emitted files")
    p.add_argument(
        "--source", action="append", default=None, metavar="var:<0..9>|node:<c-e-v>",
        help="taint source for the built graph (default var:0)",
    )
    p.add_argument("--scenario-tag", default="attack")
    p.add_argument("--damage-var", type=int, default=9, help="variable observed for damage")
    p.add_argument("--rel-tol", type=float, default=0.05)
    p.add_argument("--abs-tol", type=float, default=0.01)
    p.add_argument("--no-angle-aware", action="store_true")
    p.add_argument("--max-paths", type=int, default=10)
    p.set_defaults(func=cmd_pipeline)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NumericalBlowup as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 3
    except CpTaintError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
