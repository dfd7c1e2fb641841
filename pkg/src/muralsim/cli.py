"""Command line entry points: compile, simulate, score, serve, replay.

Exit codes: 0 success, 1 usage error, 2 input error, 3 runtime failure.
Every produced artifact embeds the sha256 of its inputs for provenance.
"""

from __future__ import annotations

import argparse
import asyncio
import hashlib
import signal
import sys
from dataclasses import fields
from pathlib import Path

from muralsim import __version__
from muralsim.compiler import (
    CompileError,
    CompileParams,
    compile_svg,
    parse_plan,
    plan_hash,
    serialize_plan,
    total_travel,
)
from muralsim.fsm import ProgressError
from muralsim.svgload import SvgError
from muralsim.wire import WireError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INPUT = 2
EXIT_RUNTIME = 3


class UsageError(Exception):
    pass


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _read(path: str, what: str) -> str:
    p = Path(path)
    if not p.exists():
        raise InputError(f"{what} file not found: {path}")
    return p.read_text()


def _load_params(path: str | None) -> CompileParams:
    if path is None:
        return CompileParams()
    known = {f.name for f in fields(CompileParams)}
    kv = {}
    for lineno, raw in enumerate(_read(path, "params").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, _, value = (s.strip() for s in line.partition("="))
        if key not in known:
            raise InputError(f"params line {lineno}: unknown key {key!r}")
        try:
            kv[key] = float(value)
        except ValueError:
            raise InputError(f"params line {lineno}: bad value for {key!r}") from None
    try:
        return CompileParams(**kv)
    except CompileError as exc:
        raise InputError(str(exc)) from exc


def cmd_compile(args) -> int:
    svg_text = _read(args.svg, "svg")
    params = _load_params(args.params)
    try:
        plan = compile_svg(svg_text, params,
                           meta={"source_sha256": _sha256(svg_text.encode())})
    except (SvgError, CompileError) as exc:
        raise InputError(str(exc)) from exc
    text = serialize_plan(plan)
    Path(args.out).write_text(text)
    draw_len = sum(p.drawing_interval[1] - p.drawing_interval[0] for p in plan.paths)
    print(f"paths = {len(plan.paths)}")
    print(f"outline_paths = {sum(1 for p in plan.paths if p.kind == 'outline')}")
    print(f"infill_paths = {sum(1 for p in plan.paths if p.kind == 'infill')}")
    print(f"draw_length_m = {draw_len:.3f}")
    print(f"travel_length_m = {total_travel(plan.paths):.3f}")
    print(f"wall_extent_m = {plan.wall_extent[0]:.3f} x {plan.wall_extent[1]:.3f}")
    print(f"plan_sha256 = {plan_hash(plan)}")
    return EXIT_OK


def _load_plan(path: str):
    try:
        return parse_plan(_read(path, "plan"))
    except CompileError as exc:
        raise InputError(str(exc)) from exc


def _load_scenario(path: str):
    from muralsim.sim.config import ScenarioError, parse_scenario
    try:
        return parse_scenario(_read(path, "scenario"))
    except ScenarioError as exc:
        raise InputError(str(exc)) from exc


def cmd_simulate(args) -> int:
    from muralsim.sim import canvas as canvas_mod
    from muralsim.sim.runner import run_scenario

    plan_text = _read(args.plan, "plan")
    scenario_text = _read(args.scenario, "scenario")
    plan = _load_plan(args.plan)
    scenario = _load_scenario(args.scenario)
    if args.seed is not None:
        scenario.seed = args.seed
    report = run_scenario(scenario, plan)
    report.metrics["input_plan_sha256"] = _sha256(plan_text.encode())
    report.metrics["input_scenario_sha256"] = _sha256(scenario_text.encode())
    out = Path(args.out)
    report.write(out)
    stroke = 2.354 * scenario.sigma_per_n_thin * scenario.controller.wall_setpoint
    target = canvas_mod.render_target(plan, scenario.canvas_cell, stroke)
    import numpy as np
    target_canvas = canvas_mod.Canvas(extent=plan.wall_extent,
                                      cell=scenario.canvas_cell,
                                      grid=target.astype(float))
    (out / "target.pgm").write_bytes(canvas_mod.to_pgm(target_canvas, 1.0))
    for key in ("canvas_iou", "canvas_coverage", "canvas_overspray",
                "identity_swaps", "sim_seconds"):
        print(f"{key} = {report.metrics[key]}")
    print(f"realtime_factor = {report.timing['realtime_factor']:.1f}")
    print(f"report_dir = {out}")
    return EXIT_OK


def cmd_score(args) -> int:
    from muralsim.sim.canvas import from_pgm, score_masks

    try:
        painted = from_pgm(Path(args.canvas).read_bytes()) >= args.threshold
        target = from_pgm(Path(args.target).read_bytes()) >= args.threshold
    except FileNotFoundError as exc:
        raise InputError(str(exc)) from exc
    except ValueError as exc:
        raise InputError(f"bad raster: {exc}") from exc
    if painted.shape != target.shape:
        raise InputError(
            f"raster shapes differ: {painted.shape} vs {target.shape}")
    score = score_masks(painted, target)
    print(f"iou = {score.iou:.6f}")
    print(f"coverage = {score.coverage:.6f}")
    print(f"overspray = {score.overspray:.6f}")
    return EXIT_OK


def cmd_serve(args) -> int:
    from muralsim.sim.runner import Simulation
    from muralsim.station import StationCore, StationServer

    plan = _load_plan(args.plan)
    scenario = _load_scenario(args.scenario)
    sim = Simulation(scenario, plan)
    core = StationCore(plan, data_dir=args.data)
    server = StationServer(sim, core, tcp_port=args.port, ws_port=args.ws_port,
                           rate=args.rate)

    async def main():
        loop = asyncio.get_running_loop()
        for sig in (signal.SIGINT, signal.SIGTERM):
            try:
                loop.add_signal_handler(sig, server.stop)
            except (ValueError, NotImplementedError, RuntimeError):
                pass  # not the main thread; rely on the mission finishing
        await server.run()

    try:
        asyncio.run(main())
    except OSError as exc:
        print(f"error: cannot bind port {args.port}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_replay(args) -> int:
    from muralsim.station import JOURNAL_MAGIC, StationCore

    plan = _load_plan(args.plan)
    lines = _read(args.journal, "journal").splitlines()
    if not lines or lines[0] != JOURNAL_MAGIC:
        raise InputError("journal has an unknown header")
    core = StationCore(plan)
    try:
        core.replay(lines[1:])
    except WireError as exc:
        raise InputError(f"corrupt journal: {exc}") from exc
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "state.json").write_bytes(core.snapshot_bytes())
    print(f"messages_replayed = {sum(1 for ln in lines[1:] if ln.strip())}")
    print(f"namespaces_with_progress = {len(core.progress)}")
    print(f"assignments = {sum(len(v) for v in core.assignments.values())}")
    print(f"state_sha256 = {_sha256(core.snapshot_bytes())}")
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="muralsim",
                     description="multi-drone mural painting simulator and toolchain")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compile", help="compile an SVG into a mission plan")
    p.add_argument("--svg", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--params", default=None,
                   help="key = value file overriding compile parameters")
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("simulate", help="run a headless mission simulation")
    p.add_argument("--plan", required=True)
    p.add_argument("--scenario", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None, help="override scenario seed")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("score", help="compare two canvas rasters")
    p.add_argument("--canvas", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--threshold", type=int, default=128,
                   help="gray level counting as painted (default 128)")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("serve", help="run the ground station with a live simulation")
    p.add_argument("--plan", required=True)
    p.add_argument("--scenario", required=True)
    p.add_argument("--port", type=int, default=8765, help="executor TCP port")
    p.add_argument("--ws-port", type=int, default=None,
                   help="console websocket port (default: TCP port + 1)")
    p.add_argument("--rate", type=float, default=1.0,
                   help="simulation speed multiplier")
    p.add_argument("--data", default="muralsim_data",
                   help="journal/snapshot directory")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("replay", help="rebuild station state from a journal")
    p.add_argument("--journal", required=True)
    p.add_argument("--plan", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ProgressError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except KeyboardInterrupt:
        return EXIT_RUNTIME
    except Exception as exc:  # anything unexpected is a runtime failure
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
