"""Batch runner: isolated sessions, evaluator scoring and report files."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

from .agent import Agent, Backend, RunTranscript
from .backends import BackendConfig, make_backend
from .console import Console
from .scenarios import SCENARIOS, build_world
from .transport import ConsoleEndpoint, ConsoleServer, LoopbackLink, SocketLink
from .world import SimConfig, World

log = logging.getLogger(__name__)

REPORT_COLUMNS = ("Run", "Result", "Tokens", "Observations", "Steps", "Ended", "Seed")


def run_seed(batch_seed: int, index: int) -> int:
    """Reproducible per-run seed derived from the batch seed and run index."""
    digest = hashlib.sha256(f"{batch_seed}:{index}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


@dataclass(frozen=True)
class RunResult:
    scenario: str
    index: int
    seed: int
    success: bool
    reason: str
    ended_by: str
    steps: int
    prompt_tokens: int
    completion_tokens: int
    propellant_used: float
    messages: tuple[str, ...] = ()
    error: str | None = None
    transcript_path: str | None = None

    @property
    def tokens(self) -> int:
        return self.prompt_tokens + self.completion_tokens

    @property
    def backend_failed(self) -> bool:
        return self.ended_by == "error" and (self.error or "").startswith("BackendError")

    @property
    def observations(self) -> str:
        """Free-text note for the report, in the spirit of a reviewer's comment."""
        note = self.reason
        if self.ended_by != "final_answer":
            note += f" (ended by {self.ended_by})"
        if self.error:
            note += f"; {self.error}"
        if self.scenario == "C" and self.messages:
            note += f"; message: {self.messages[-1]}"
        return note


@dataclass
class BatchReport:
    scenario: str
    runs_requested: int
    batch_seed: int
    rows: list[RunResult] = field(default_factory=list)
    partial: bool = False

    @property
    def successes(self) -> int:
        return sum(r.success for r in self.rows)

    @property
    def success_rate(self) -> float:
        return self.successes / len(self.rows) if self.rows else 0.0

    @property
    def average_tokens(self) -> float:
        return statistics.fmean(r.tokens for r in self.rows) if self.rows else 0.0

    def table(self) -> list[dict[str, object]]:
        return [
            {
                "Run": r.index + 1,
                "Result": "success" if r.success else "failure",
                "Tokens": r.tokens,
                "Observations": r.observations,
                "Steps": r.steps,
                "Ended": r.ended_by,
                "Seed": r.seed,
            }
            for r in self.rows
        ]

    def to_dict(self) -> dict[str, object]:
        return {
            "scenario": self.scenario,
            "runs_requested": self.runs_requested,
            "runs_completed": len(self.rows),
            "batch_seed": self.batch_seed,
            "partial": self.partial,
            "successes": self.successes,
            "success_rate": self.success_rate,
            "average_tokens": self.average_tokens,
            "rows": self.table(),
            "runs": [asdict(r) for r in self.rows],
        }

    def markdown(self) -> str:
        title = f"Scenario {self.scenario}: {SCENARIOS[self.scenario].title}"
        lines = [f"# {title}", ""]
        if self.partial:
            lines += [
                f"**Partial report:** {len(self.rows)} of {self.runs_requested} runs completed "
                "before the backend failed.",
                "",
            ]
        lines += ["| Run | Result | Tokens | Observations |", "|---|---|---|---|"]
        for row in self.table():
            mark = "✓" if row["Result"] == "success" else "✗"
            note = str(row["Observations"]).replace("|", "\\|").replace("\n", " ")
            lines.append(f"| {row['Run']} | {mark} | {row['Tokens']:,} | {note} |")
        lines.append(f"| Avg. | {self.success_rate:.0%} | {self.average_tokens:,.0f} | |")
        return "\n".join(lines) + "\n"

    def write(self, out_dir: Path) -> dict[str, Path]:
        out_dir.mkdir(parents=True, exist_ok=True)
        paths = {
            "csv": out_dir / "report.csv",
            "json": out_dir / "report.json",
            "md": out_dir / "report.md",
        }
        with paths["csv"].open("w", newline="", encoding="utf-8") as handle:
            writer = csv.DictWriter(handle, fieldnames=REPORT_COLUMNS)
            writer.writeheader()
            writer.writerows(self.table())
            writer.writerow(
                {
                    "Run": "Avg.",
                    "Result": f"{self.success_rate:.4f}",
                    "Tokens": f"{self.average_tokens:.1f}",
                    "Observations": "partial" if self.partial else "",
                }
            )
        paths["json"].write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")
        paths["md"].write_text(self.markdown(), encoding="utf-8")
        return paths


BackendFactory = Callable[[int], Backend]


def backend_factory(config: BackendConfig, scenario: str) -> BackendFactory:
    """One fresh backend per run, seeded with that run's seed."""

    def build(seed: int) -> Backend:
        return make_backend(BackendConfig(config.kind, config.model_id, config.temperature, seed, config.source), scenario)

    return build


def _session(world: World, backend: Backend, loopback: bool, max_steps: int) -> RunTranscript:
    endpoint = ConsoleEndpoint(Console(world))
    if loopback:
        return Agent(backend, LoopbackLink(endpoint), max_steps=max_steps).run()
    with ConsoleServer(endpoint) as server:
        host, port = server.address
        return Agent(backend, SocketLink(host, port), max_steps=max_steps).run()


def run_single(
    scenario: str,
    index: int,
    seed: int,
    backend: Backend,
    sim: SimConfig | None = None,
    loopback: bool = True,
    max_steps: int = 60,
    out_dir: Path | None = None,
) -> RunResult:
    """Run one isolated session and score it with the scenario evaluator."""
    spec = SCENARIOS[scenario]
    world = build_world(spec, seed=seed, config=sim)
    dashboard = Console(world).dashboard()
    transcript = _session(world, backend, loopback, max_steps)
    verdict = spec.evaluate(world, transcript.ended_by)
    transcript_path = None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        stem = out_dir / f"run_{index + 1}"
        text = dashboard + "\n" + transcript.render()
        if transcript.final_answer is not None:
            text += f"Final Answer: {transcript.final_answer}\n"
        Path(f"{stem}.transcript.txt").write_text(text, encoding="utf-8")
        Path(f"{stem}.usage.json").write_text(
            json.dumps(
                {
                    "prompt_tokens": transcript.usage.prompt_tokens,
                    "completion_tokens": transcript.usage.completion_tokens,
                    "total_tokens": transcript.usage.total,
                    "steps": transcript.usage_records(),
                },
                indent=2,
            )
            + "\n",
            encoding="utf-8",
        )
        transcript_path = f"{stem}.transcript.txt"
    log.info("scenario %s run %d: %s (%s)", scenario, index + 1, verdict.success, verdict.reason)
    return RunResult(
        scenario=scenario,
        index=index,
        seed=seed,
        success=verdict.success,
        reason=verdict.reason,
        ended_by=transcript.ended_by,
        steps=transcript.steps,
        prompt_tokens=transcript.usage.prompt_tokens,
        completion_tokens=transcript.usage.completion_tokens,
        propellant_used=world.propellant_used,
        messages=tuple(m.body for m in world.messages),
        error=transcript.error,
        transcript_path=transcript_path,
    )


def run_batch(
    scenario: str,
    runs: int,
    make: BackendFactory,
    seed: int = 0,
    sim: SimConfig | None = None,
    loopback: bool = True,
    max_steps: int = 60,
    out_dir: Path | None = None,
    workers: int = 1,
) -> BatchReport:
    """``runs`` isolated sessions from identical initial conditions.

    A backend failure stops the batch; the report is then flagged partial.
    """
    if runs < 1:
        raise ValueError("runs must be at least 1")
    if scenario not in SCENARIOS:
        raise ValueError(f"unknown scenario {scenario!r}")
    report = BatchReport(scenario, runs, seed)

    def one(index: int) -> RunResult:
        run_seed_value = run_seed(seed, index)
        return run_single(
            scenario, index, run_seed_value, make(run_seed_value), sim, loopback, max_steps, out_dir
        )

    if workers <= 1:
        for index in range(runs):
            result = one(index)
            report.rows.append(result)
            if result.backend_failed:
                report.partial = index + 1 < runs
                break
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, range(runs)))
        for result in results:
            report.rows.append(result)
            if result.backend_failed:
                report.partial = result.index + 1 < runs
                break
    if report.partial:
        log.warning("backend failed; report covers %d of %d runs", len(report.rows), runs)
    if out_dir is not None:
        report.write(out_dir)
    return report
