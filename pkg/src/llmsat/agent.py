"""ReAct loop: prompt the model, parse its action, act on the console, repeat."""

from __future__ import annotations

import json
import logging
import math
import re
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Protocol, Union

from .prompts import FORMAT_REMINDER, SYSTEM_PROMPT
from .transport import DeadlockError, Link, LinkError

log = logging.getLogger(__name__)

VALID_ACTIONS = ("run", "sleep", "Final Answer")
DEADLOCK_OBSERVATION = "No alarms or maneuvers are scheduled: you did not wake up."

_FENCE = re.compile(r"```(?:json)?\s*(.*?)```", re.DOTALL)


class BackendError(RuntimeError):
    """Transient or fatal failure of a model backend."""


@dataclass(frozen=True)
class Completion:
    text: str
    prompt_tokens: int
    completion_tokens: int


class Backend(Protocol):
    def complete(self, messages: list[dict[str, str]]) -> Completion: ...


def count_tokens(text: str) -> int:
    """Approximate token count: one token per four characters, rounded up."""
    return math.ceil(len(text) / 4)


@dataclass(frozen=True)
class AgentAction:
    kind: str  # "run", "sleep" or "final_answer"
    input: str = ""


@dataclass(frozen=True)
class ParseFailure:
    feedback: str


@dataclass
class TokenUsage:
    prompt_tokens: int = 0
    completion_tokens: int = 0

    @property
    def total(self) -> int:
        return self.prompt_tokens + self.completion_tokens

    def add(self, prompt: int, completion: int) -> None:
        self.prompt_tokens += prompt
        self.completion_tokens += completion


@dataclass
class TranscriptEntry:
    thought: str
    action: Union[AgentAction, ParseFailure]
    blob: Any
    observation: str | None
    prompt_tokens: int
    completion_tokens: int

    def render(self) -> str:
        if isinstance(self.blob, dict):
            body = json.dumps(self.blob, indent=2)
        else:
            body = str(self.blob)
        text = f"Thought: {self.thought}\nAction:\n```\n{body}\n```\n"
        if self.observation is not None:
            text += f"Observation: {self.observation}\n"
        return text


@dataclass
class RunTranscript:
    entries: list[TranscriptEntry] = field(default_factory=list)
    usage: TokenUsage = field(default_factory=TokenUsage)
    ended_by: str = "running"
    final_answer: str | None = None
    error: str | None = None

    @property
    def steps(self) -> int:
        return len(self.entries)

    def render(self) -> str:
        return "".join(e.render() for e in self.entries)

    def usage_records(self) -> list[dict[str, int]]:
        return [
            {"step": i + 1, "prompt_tokens": e.prompt_tokens, "completion_tokens": e.completion_tokens}
            for i, e in enumerate(self.entries)
        ]


def build_initial_prompt(dashboard: str) -> list[dict[str, str]]:
    return [
        {"role": "system", "content": SYSTEM_PROMPT},
        {"role": "user", "content": dashboard},
    ]


def _split_thought(text: str) -> str:
    head = text.split("Action:", 1)[0].strip()
    if head.startswith("Thought:"):
        head = head[len("Thought:") :]
    return head.strip()


def _last_json_object(text: str) -> Any:
    """Last fenced JSON blob, or failing that the last bare JSON object in ``text``."""
    for candidate in reversed(_FENCE.findall(text)):
        try:
            return json.loads(candidate)
        except json.JSONDecodeError:
            continue
    decoder = json.JSONDecoder()
    found = None
    for start in (m.start() for m in re.finditer(r"\{", text)):
        try:
            found, _ = decoder.raw_decode(text, start)
        except json.JSONDecodeError:
            continue
    return found


def parse_action(text: str) -> tuple[str, Union[AgentAction, ParseFailure], Any]:
    """Return (thought, action or feedback, raw blob) for one model output."""
    thought = _split_thought(text)
    blob = _last_json_object(text)
    if not isinstance(blob, dict) or "action" not in blob:
        return thought, ParseFailure(FORMAT_REMINDER), blob if blob is not None else text.strip()
    name = blob["action"]
    value = blob.get("action_input", "")
    if name == "run":
        if not isinstance(value, str):
            return thought, ParseFailure("run expects action_input to be a console command string."), blob
        return thought, AgentAction("run", value), blob
    if name == "sleep":
        return thought, AgentAction("sleep"), blob
    if name == "Final Answer":
        return thought, AgentAction("final_answer", value if isinstance(value, str) else json.dumps(value)), blob
    return thought, ParseFailure(f"{name} is not a valid tool, try one of [run, sleep]."), blob


class Agent:
    """Drives one session: ``run()`` loops until Final Answer, deadlock, error or the step cap."""

    def __init__(
        self,
        backend: Backend,
        link: Link,
        max_steps: int = 60,
        attempts: int = 3,
        backoff: float = 1.0,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.backend = backend
        self.link = link
        self.max_steps = max_steps
        self.attempts = attempts
        self.backoff = backoff
        self._sleep = sleep

    def _complete(self, messages: list[dict[str, str]]) -> Completion:
        for attempt in range(self.attempts):
            try:
                return self.backend.complete(messages)
            except BackendError as exc:
                log.warning("backend attempt %d/%d failed: %s", attempt + 1, self.attempts, exc)
                if attempt + 1 == self.attempts:
                    raise
                self._sleep(self.backoff * 2**attempt)
        raise AssertionError("unreachable")

    def _act(self, action: AgentAction) -> str:
        if action.kind == "run":
            return self.link.request(action.input)
        return self.link.await_event()

    def step(self, messages: list[dict[str, str]], transcript: RunTranscript) -> TranscriptEntry:
        """One model call and the resulting console interaction."""
        completion = self._complete(messages)
        transcript.usage.add(completion.prompt_tokens, completion.completion_tokens)
        thought, action, blob = parse_action(completion.text)
        entry = TranscriptEntry(
            thought, action, blob, None, completion.prompt_tokens, completion.completion_tokens
        )
        transcript.entries.append(entry)
        messages.append({"role": "assistant", "content": completion.text})
        if isinstance(action, ParseFailure):
            entry.observation = action.feedback
        elif action.kind == "final_answer":
            transcript.final_answer = action.input
            transcript.ended_by = "final_answer"
            self.link.disconnect()
            return entry
        else:
            try:
                entry.observation = self._act(action)
            except DeadlockError:
                entry.observation = DEADLOCK_OBSERVATION
                transcript.ended_by = "deadlock"
                return entry
        messages.append({"role": "user", "content": f"Observation: {entry.observation}"})
        return entry

    def run(self) -> RunTranscript:
        transcript = RunTranscript()
        try:
            messages = build_initial_prompt(self.link.connect())
            for _ in range(self.max_steps):
                self.step(messages, transcript)
                if transcript.ended_by != "running":
                    return transcript
            transcript.ended_by = "max_steps"
        except (BackendError, LinkError) as exc:
            transcript.ended_by = "error"
            transcript.error = f"{type(exc).__name__}: {exc}"
        return transcript
