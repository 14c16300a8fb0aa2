"""Command-line entry points: batch runs and a standalone console server."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .backends import DEFAULT_MODEL, DEFAULT_TEMPERATURE, BackendConfig, bundled_policies
from .console import Console
from .harness import backend_factory, run_batch
from .scenarios import SCENARIOS, build_world
from .transport import ConsoleEndpoint, ConsoleServer
from .world import SimConfig

# Keys a JSON config file may set; each mirrors the long flag of the same name.
CONFIG_KEYS = (
    "scenario",
    "runs",
    "backend",
    "model",
    "temperature",
    "seed",
    "latency",
    "noise",
    "out",
    "loopback",
    "source",
    "max_steps",
    "workers",
    "verbose",
)


def load_config(path: str) -> dict[str, object]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(data, dict):
        raise SystemExit(f"config {path}: expected a JSON object")
    unknown = sorted(set(data) - set(CONFIG_KEYS))
    if unknown:
        raise SystemExit(f"config {path}: unknown keys {', '.join(unknown)}")
    return data


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="llmsat",
        description="Run simulated spacecraft missions with a language-model agent at the console.",
    )
    parser.add_argument("--config", help="JSON file supplying defaults for any of the flags below")
    parser.add_argument("--scenario", choices=sorted(SCENARIOS), default="A")
    parser.add_argument("--runs", type=int, default=5, help="sessions per batch")
    parser.add_argument("--backend", choices=("live", "scripted", "replay"), default="scripted")
    parser.add_argument("--model", default=DEFAULT_MODEL, help="model id for the live backend")
    parser.add_argument("--temperature", type=float, default=DEFAULT_TEMPERATURE)
    parser.add_argument("--seed", type=int, default=0, help="batch seed; per-run seeds derive from it")
    parser.add_argument("--latency", type=float, default=5.0, help="simulated seconds per console command")
    parser.add_argument("--noise", type=float, default=0.0, help="relative 1-sigma burn execution error")
    parser.add_argument("--out", default="runs", help="output directory for reports and transcripts")
    parser.add_argument(
        "--loopback",
        action=argparse.BooleanOptionalAction,
        default=True,
        help="connect agent and console in-process instead of over TCP",
    )
    parser.add_argument(
        "--source",
        "--policy",
        dest="source",
        help="scripted policy or replay transcript (bundled name or JSON path)",
    )
    parser.add_argument("--max-steps", dest="max_steps", type=int, default=60)
    parser.add_argument("--workers", type=int, default=1, help="parallel sessions")
    parser.add_argument("--list-policies", action="store_true", help="print bundled scripted policies")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def parse_args(argv: list[str] | None = None) -> argparse.Namespace:
    parser = build_parser()
    pre, _ = parser.parse_known_args(argv)
    if pre.config:
        parser.set_defaults(**load_config(pre.config))
    return parser.parse_args(argv)


def main(argv: list[str] | None = None) -> int:
    args = parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    if args.list_policies:
        print("\n".join(bundled_policies()))
        return 0
    if args.runs < 1:
        print("--runs must be at least 1", file=sys.stderr)
        return 2
    sim = SimConfig(latency=args.latency, noise_sigma=args.noise)
    config = BackendConfig(args.backend, args.model, args.temperature, args.seed, args.source)
    try:
        factory = backend_factory(config, args.scenario)
        factory(0)  # surface bad policy or transcript names before any run starts
        report = run_batch(
            args.scenario,
            args.runs,
            factory,
            seed=args.seed,
            sim=sim,
            loopback=args.loopback,
            max_steps=args.max_steps,
            out_dir=Path(args.out),
            workers=args.workers,
        )
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(report.markdown(), end="")
    print(f"\nReports written to {Path(args.out).resolve()}")
    return 1 if report.partial else 0


def serve_main(argv: list[str] | None = None) -> int:
    """Expose one scenario console over TCP for an external agent."""
    parser = argparse.ArgumentParser(prog="llmsat-console", description="Serve a mission console over TCP.")
    parser.add_argument("--scenario", choices=sorted(SCENARIOS), default="A")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=7000)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--latency", type=float, default=5.0)
    parser.add_argument("--noise", type=float, default=0.0)
    args = parser.parse_args(argv)
    world = build_world(args.scenario, args.seed, SimConfig(latency=args.latency, noise_sigma=args.noise))
    server = ConsoleServer(ConsoleEndpoint(Console(world)), args.host, args.port)
    host, port = server.address
    print(f"Scenario {args.scenario} console listening on {host}:{port}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.close()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
