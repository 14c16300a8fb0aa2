"""Text-completion backends: live chat API, scripted policy tables and transcript replay."""

from __future__ import annotations

import json
import logging
import os
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from string import Template
from typing import Any

import httpx

from .agent import BackendError, Completion, count_tokens

log = logging.getLogger(__name__)

DEFAULT_MODEL = "gpt-4-1106-preview"
DEFAULT_TEMPERATURE = 0.7
API_KEY_ENV = "OPENAI_API_KEY"
BASE_URL_ENV = "OPENAI_BASE_URL"
DEFAULT_BASE_URL = "https://api.openai.com/v1"


def render_output(thought: str, blob: dict[str, Any]) -> str:
    """Model output in the Thought/Action layout the agent parses."""
    return f"Thought: {thought}\nAction:\n```\n{json.dumps(blob, indent=2)}\n```"


def _approximate(messages: list[dict[str, str]], text: str) -> Completion:
    prompt = count_tokens("".join(m["content"] for m in messages))
    return Completion(text, prompt, count_tokens(text))


def _blob(action: str, value: str | None) -> dict[str, Any]:
    if action == "sleep":
        return {"action": "sleep"}
    return {"action": action, "action_input": value or ""}


@dataclass(frozen=True)
class Rule:
    when: str
    thought: str
    action: str
    input: str = ""
    state: str = "*"
    next: str | None = None

    def match(self, state: str, text: str) -> dict[str, str] | None:
        if self.state not in ("*", state):
            return None
        found = re.search(self.when, text, re.DOTALL)
        return None if found is None else found.groupdict(default="")


@dataclass(frozen=True)
class ScriptedPolicy:
    """Ordered observation-pattern rules; the first matching rule for the current state wins."""

    name: str
    rules: tuple[Rule, ...]
    fallback: Rule = field(
        default_factory=lambda: Rule(
            when="",
            thought="No rule covers this observation, so I cannot continue safely.",
            action="Final Answer",
            input="Session ended: the scripted policy has no response to the last observation.",
        )
    )

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ScriptedPolicy":
        rules = tuple(Rule(**r) for r in data["rules"])
        if "fallback" in data:
            return cls(data["name"], rules, Rule(**data["fallback"]))
        return cls(data["name"], rules)

    def choose(self, state: str, observation: str) -> tuple[Rule, dict[str, str]]:
        for rule in self.rules:
            groups = rule.match(state, observation)
            if groups is not None:
                return rule, groups
        return self.fallback, {}


def _data_path(kind: str, name: str) -> Path | Any:
    candidate = Path(name)
    if candidate.suffix == ".json" and candidate.exists():
        return candidate
    return resources.files("llmsat.data").joinpath(kind).joinpath(f"{name}.json")


def load_policy(name: str) -> ScriptedPolicy:
    """Load a bundled policy by name, or any policy JSON file by path."""
    return ScriptedPolicy.from_dict(json.loads(_data_path("policies", name).read_text(encoding="utf-8")))


def bundled_policies() -> list[str]:
    folder = resources.files("llmsat.data").joinpath("policies")
    return sorted(p.name[: -len(".json")] for p in folder.iterdir() if p.name.endswith(".json"))


class ScriptedBackend:
    """Deterministic policy driven by the latest observation.

    The policy state is recomputed from the conversation on every call, so the
    backend itself holds no per-session state.
    """

    def __init__(self, policy: ScriptedPolicy):
        self.policy = policy

    def _state_before_last(self, observations: list[str]) -> str:
        state = "start"
        for text in observations[:-1]:
            rule, _ = self.policy.choose(state, text)
            state = rule.next or state
        return state

    def complete(self, messages: list[dict[str, str]]) -> Completion:
        observations = [m["content"] for m in messages if m["role"] == "user"]
        state = self._state_before_last(observations)
        rule, groups = self.policy.choose(state, observations[-1])
        value = Template(rule.input).safe_substitute(groups)
        return _approximate(messages, render_output(rule.thought, _blob(rule.action, value)))


class ReplayBackend:
    """Replays the Thought/Action pairs of a recorded session in order."""

    def __init__(self, steps: list[dict[str, Any]]):
        self.steps = steps
        self.cursor = 0

    @classmethod
    def load(cls, name: str) -> "ReplayBackend":
        data = json.loads(_data_path("replay", name).read_text(encoding="utf-8"))
        return cls(data["steps"])

    def complete(self, messages: list[dict[str, str]]) -> Completion:
        if self.cursor >= len(self.steps):
            raise BackendError("replay transcript exhausted")
        step = self.steps[self.cursor]
        self.cursor += 1
        return _approximate(messages, render_output(step["thought"], step["action"]))


class LiveBackend:
    """OpenAI-compatible chat-completion client; the API key comes from the environment only."""

    def __init__(
        self,
        model: str = DEFAULT_MODEL,
        temperature: float = DEFAULT_TEMPERATURE,
        base_url: str | None = None,
        timeout: float = 120.0,
        seed: int | None = None,
    ):
        self.model = model
        self.temperature = temperature
        self.seed = seed
        self.base_url = (base_url or os.environ.get(BASE_URL_ENV) or DEFAULT_BASE_URL).rstrip("/")
        self.timeout = timeout

    def complete(self, messages: list[dict[str, str]]) -> Completion:
        key = os.environ.get(API_KEY_ENV)
        if not key:
            raise BackendError(f"{API_KEY_ENV} is not set")
        body: dict[str, Any] = {
            "model": self.model,
            "messages": messages,
            "temperature": self.temperature,
            # Keep the model from inventing its own observations.
            "stop": ["\nObservation:"],
        }
        if self.seed is not None:
            body["seed"] = self.seed
        log.debug("chat request: model=%s messages=%d", self.model, len(messages))
        try:
            response = httpx.post(
                f"{self.base_url}/chat/completions",
                json=body,
                headers={"Authorization": f"Bearer {key}"},
                timeout=self.timeout,
            )
            response.raise_for_status()
            data = response.json()
        except (httpx.HTTPError, ValueError) as exc:
            raise BackendError(f"chat completion failed: {exc}") from exc
        text = data["choices"][0]["message"]["content"] or ""
        usage = data.get("usage") or {}
        log.debug("chat response: %d chars, usage=%s", len(text), usage)
        return Completion(
            text,
            int(usage.get("prompt_tokens", count_tokens("".join(m["content"] for m in messages)))),
            int(usage.get("completion_tokens", count_tokens(text))),
        )


@dataclass(frozen=True)
class BackendConfig:
    kind: str = "scripted"
    model_id: str = DEFAULT_MODEL
    temperature: float = DEFAULT_TEMPERATURE
    seed: int = 0
    # Scripted policy name/path, or replay transcript name/path.
    source: str | None = None


def make_backend(config: BackendConfig, scenario: str = "A"):
    if config.kind == "live":
        return LiveBackend(config.model_id, config.temperature, seed=config.seed)
    if config.kind == "scripted":
        return ScriptedBackend(load_policy(config.source or DEFAULT_POLICIES[scenario]))
    if config.kind == "replay":
        source = config.source or DEFAULT_REPLAYS.get(scenario)
        if source is None:
            raise ValueError(f"no bundled replay for scenario {scenario}; pass a transcript file")
        return ReplayBackend.load(source)
    raise ValueError(f"unknown backend kind {config.kind!r}")


DEFAULT_POLICIES = {"A": "scenario_a", "B": "scenario_b", "C": "scenario_c_justify"}
DEFAULT_REPLAYS = {"A": "scenario_a_run1", "B": "scenario_b_run3", "C": "scenario_c_run1"}
