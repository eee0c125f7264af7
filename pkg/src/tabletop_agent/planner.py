"""ReAct-style task planner.

Each step the model answers with a ``Thought:`` line and exactly one
``Action:`` line: either a natural-language subtask for the executor or
``Finish[...]``.  The executor's observation is appended to the history and
the loop continues until ``Finish`` or the step budget runs out.
"""

from __future__ import annotations

import logging
import re
import time
from dataclasses import dataclass, field
from typing import Protocol, Union

from .actions import ActionDispatcher, DispatchError
from .llm import ChatEndpointLike, ChatMessage, ChatRequest, LLMError, Transcript
from .prompts import load_prompt

logger = logging.getLogger(__name__)

TEMPLATE_KINDS = ("query_positions", "query_names", "atomic_manipulation", "other")

_TEMPLATES = (
    ("query_positions", re.compile(r"^get (the )?positions? of (all )?(the )?(objects|items)\b", re.I)),
    ("query_names", re.compile(r"^get (the )?names? of (all )?(the )?(objects|items)\b", re.I)),
    ("atomic_manipulation", re.compile(r"^pick (up )?.+? and place (it|them)\b.+", re.I | re.S)),
)
_THOUGHT = re.compile(r"^\s*\**thought\**\s*:\**", re.I | re.M)
_ACTION = re.compile(r"^\s*\**action\**\s*:\**\s*(.*)$", re.I | re.M)
_FINISH = re.compile(r"^finish\s*\[(.*)\]\s*$", re.I | re.S)


class PlannerFormatError(ValueError):
    pass


def classify_subtask(text: str) -> str:
    for kind, pattern in _TEMPLATES:
        if pattern.match(text.strip()):
            return kind
    return "other"


@dataclass(frozen=True)
class Subtask:
    text: str
    template_kind: str = "other"

    @classmethod
    def from_text(cls, text: str) -> Subtask:
        text = text.strip()
        return cls(text, classify_subtask(text))

    def render(self) -> str:
        return self.text


@dataclass(frozen=True)
class Finish:
    answer: str

    def render(self) -> str:
        return f"Finish[{self.answer}]"


Action = Union[Subtask, Finish]


@dataclass
class PlannerStep:
    thought: str
    action: Action
    observation: str | None = None
    attempts: int = 1

    def serialize(self) -> str:
        lines = [f"Thought: {self.thought}", f"Action: {self.action.render()}"]
        if self.observation is not None:
            lines.append(f"Observation: {self.observation}")
        return "\n".join(lines)


@dataclass
class PlannerConfig:
    max_steps: int = 20
    repair_retries: int = 1
    temperature: float = 0.0

    def __post_init__(self) -> None:
        if self.max_steps < 1:
            raise ValueError("max_steps must be at least 1")
        if self.repair_retries < 0:
            raise ValueError("repair_retries must be non-negative")


def parse_reply(text: str) -> tuple[str, Action]:
    """Split a planner reply into (thought, action)."""
    actions = list(_ACTION.finditer(text))
    if not actions:
        raise PlannerFormatError("reply has no 'Action:' line")
    if len(actions) > 1:
        raise PlannerFormatError(f"reply has {len(actions)} 'Action:' lines; exactly one is allowed")
    action_match = actions[0]
    thought_match = _THOUGHT.search(text, 0, action_match.start())
    if thought_match is None:
        raise PlannerFormatError("reply has no 'Thought:' line before the action")
    thought = text[thought_match.end() : action_match.start()].strip()
    action_text = action_match.group(1).strip()
    if not action_text:
        raise PlannerFormatError("the 'Action:' line is empty")
    finish = _FINISH.match(action_text)
    if finish:
        return thought, Finish(finish.group(1).strip())
    return thought, Subtask.from_text(action_text)


def serialize_history(history: list[PlannerStep]) -> str:
    return "\n\n".join(step.serialize() for step in history)


def build_messages(instruction: str, history: list[PlannerStep]) -> list[ChatMessage]:
    parts = [f"User request: {instruction}"]
    if history:
        parts.append("Previous steps:\n" + serialize_history(history))
    parts.append("What is the next step?")
    return [ChatMessage("system", load_prompt("planner")), ChatMessage("user", "\n\n".join(parts))]


def plan_step(instruction: str, history: list[PlannerStep], llm: ChatEndpointLike,
              config: PlannerConfig | None = None, transcript: Transcript | None = None) -> PlannerStep:
    """Ask the model for the next step, with format repair on malformed replies."""
    config = config or PlannerConfig()
    if len(history) >= config.max_steps:
        raise ValueError("step budget exhausted")
    messages = build_messages(instruction, history)
    if transcript is not None:
        transcript.add("planner", messages[-1])
    for attempt in range(config.repair_retries + 1):
        reply = llm.complete(ChatRequest(llm.model, list(messages), None, config.temperature))
        if transcript is not None:
            transcript.add("planner", reply)
        try:
            thought, action = parse_reply(reply.content)
        except PlannerFormatError as exc:
            logger.info("planner format error (attempt %d): %s", attempt + 1, exc)
            if attempt == config.repair_retries:
                raise PlannerFormatError(f"{exc} (after {attempt + 1} attempts)") from None
            repair = ChatMessage("user", load_prompt("planner_repair"))
            messages += [ChatMessage("assistant", reply.content), repair]
            if transcript is not None:
                transcript.add("planner", repair)
            continue
        if isinstance(action, Subtask) and action.template_kind == "other":
            logger.info("subtask does not match a template: %s", action.text)
        return PlannerStep(thought, action, attempts=attempt + 1)
    raise AssertionError("unreachable")


class Executor(Protocol):
    actions: ActionDispatcher

    def execute_subtask(self, subtask: str) -> str: ...


@dataclass
class TaskTrace:
    instruction: str
    steps: list[PlannerStep] = field(default_factory=list)
    trace: list[str] = field(default_factory=list)
    latency: float = 0.0
    finished: bool = False
    aborted: bool = False
    error: str | None = None

    @property
    def unfinished(self) -> bool:
        return not self.finished

    @property
    def planner_calls(self) -> int:
        return sum(s.attempts for s in self.steps)


def run_task(instruction: str, executor: Executor, llm: ChatEndpointLike,
             config: PlannerConfig | None = None, transcript: Transcript | None = None) -> TaskTrace:
    """Plan/execute loop until ``Finish`` or ``max_steps``."""
    config = config or PlannerConfig()
    result = TaskTrace(instruction)
    started = time.perf_counter()
    try:
        while len(result.steps) < config.max_steps:
            step = plan_step(instruction, result.steps, llm, config, transcript)
            result.steps.append(step)
            if isinstance(step.action, Finish):
                result.finished = True
                break
            observation = executor.execute_subtask(step.action.text).strip()
            step.observation = observation or "(the executor returned no observation)"
    except PlannerFormatError as exc:
        result.aborted, result.error = True, f"planner format error: {exc}"
    except (LLMError, DispatchError) as exc:
        result.aborted, result.error = True, f"{type(exc).__name__}: {exc}"
    try:
        result.trace = executor.actions.trace()
    except DispatchError as exc:
        result.error = (result.error + "; " if result.error else "") + f"trace unavailable: {exc}"
    result.latency = time.perf_counter() - started
    return result
