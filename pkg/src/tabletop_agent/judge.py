"""Scoring predicted traces: LLM judges with majority vote, and a rule-based
oracle used when no judge models are configured."""

from __future__ import annotations

import re
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .effects import effect_score, replay
from .llm import ChatEndpointLike, ChatMessage, ChatRequest
from .prompts import load_prompt

RUBRIC = {
    0: "The predicted solution does not solve any subtask.",
    1: "The predicted solution solves at least one subtask.",
    2: "The predicted solution fully solves all subtasks.",
}
_SCORE_LINE = re.compile(r"^\W*score\W*:\s*\**\s*([0-2])\s*\**\.?\s*$", re.I)


class JudgeError(RuntimeError):
    pass


@dataclass(frozen=True)
class JudgeVerdict:
    per_judge: tuple[int, int, int]
    final: int | float
    rationales: tuple[str, ...] = ("", "", "")

    def __post_init__(self) -> None:
        if len(self.per_judge) != 3 or any(s not in (0, 1, 2) for s in self.per_judge):
            raise ValueError(f"need three scores in {{0, 1, 2}}, got {self.per_judge}")

    @property
    def has_majority(self) -> bool:
        return isinstance(self.final, int)


def aggregate(scores: Sequence[int]) -> int | float:
    """Majority value of three scores; the mean when all three differ."""
    if len(scores) != 3 or any(s not in (0, 1, 2) for s in scores):
        raise ValueError(f"need three scores in {{0, 1, 2}}, got {tuple(scores)}")
    value, count = Counter(scores).most_common(1)[0]
    if count >= 2:
        return int(value)
    return sum(scores) / 3


def parse_score(text: str) -> int | None:
    lines = [line for line in text.strip().splitlines() if line.strip()]
    if not lines:
        return None
    m = _SCORE_LINE.match(lines[-1].strip())
    return int(m.group(1)) if m else None


def judge_inputs(instruction: str, ground_truth: Sequence[str], predicted: Sequence[str]) -> str:
    gt = "\n".join(ground_truth) or "(no actions)"
    pred = "\n".join(predicted) or "(no actions)"
    return (
        f"Task:\n{instruction}\n\n"
        f"Ground truth action sequence:\n{gt}\n\n"
        f"LLM-generated action sequence:\n{pred}"
    )


def judge_detailed(instruction: str, ground_truth: Sequence[str], predicted: Sequence[str],
                   judge_llm: ChatEndpointLike) -> tuple[int, str]:
    """Score plus the judge's reasoning text (without the score line)."""
    messages = [
        ChatMessage("system", load_prompt("judge")),
        ChatMessage("user", judge_inputs(instruction, ground_truth, predicted)),
    ]
    reply = judge_llm.complete(ChatRequest(judge_llm.model, messages, None, 0.0))
    score = parse_score(reply.content)
    if score is None:
        messages += [ChatMessage("assistant", reply.content), ChatMessage("user", load_prompt("judge_repair"))]
        retry = judge_llm.complete(ChatRequest(judge_llm.model, messages, None, 0.0))
        score = parse_score(retry.content)
        if score is None:
            raise JudgeError(f"judge {judge_llm.model} gave no parsable score: {retry.content[:120]!r}")
    rationale = "\n".join(reply.content.strip().splitlines()[:-1]).strip()
    return score, rationale


def judge_once(instruction: str, ground_truth: Sequence[str], predicted: Sequence[str],
               judge_llm: ChatEndpointLike) -> int:
    return judge_detailed(instruction, ground_truth, predicted, judge_llm)[0]


def oracle_judge(instruction: str, ground_truth: Sequence[str], predicted: Sequence[str], env_id: int,
                 order_constrained: bool = False, corpus_dir: str | Path | None = None) -> int:
    """Rule-based stand-in for an LLM judge.

    Both traces are replayed on fresh worlds; each object the ground truth
    moves is one subtask.  2 when every such final state is reproduced (in
    order when required) and nothing else was moved, 1 when at least one is,
    otherwise 0.  ``instruction`` is accepted for signature parity only.
    """
    expected = replay(ground_truth, env_id, corpus_dir)
    got = replay(predicted, env_id, corpus_dir)
    return effect_score(expected, got, order_constrained)


def judge_verdict(instruction: str, ground_truth: Sequence[str], predicted: Sequence[str],
                  judges: Sequence[ChatEndpointLike]) -> JudgeVerdict:
    """Three LLM judges in parallel, aggregated by majority vote."""
    if len(judges) != 3:
        raise ValueError("exactly three judges are required")
    with ThreadPoolExecutor(max_workers=3) as pool:
        outcomes = list(pool.map(lambda j: judge_detailed(instruction, ground_truth, predicted, j), judges))
    scores = tuple(s for s, _ in outcomes)
    return JudgeVerdict(scores, aggregate(scores), tuple(r for _, r in outcomes))


def oracle_verdict(instruction: str, ground_truth: Sequence[str], predicted: Sequence[str], env_id: int,
                   order_constrained: bool = False, corpus_dir: str | Path | None = None) -> JudgeVerdict:
    score = oracle_judge(instruction, ground_truth, predicted, env_id, order_constrained, corpus_dir)
    note = f"oracle: {RUBRIC[score]}"
    return JudgeVerdict((score, score, score), score, (note, note, note))
