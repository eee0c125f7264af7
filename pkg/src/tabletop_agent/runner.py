"""Benchmark orchestration: run every selected instance through the planner
and an executor, judge the resulting trace, persist per-task results."""

from __future__ import annotations

import json
import logging
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Sequence

import httpx

from .actions import DispatchError, HttpDispatcher, LocalDispatcher
from .corpus import Corpus, TaskInstance, filter_corpus, load_corpus
from .executor_cap import CapExecutor
from .executor_tap import TapConfig, TapExecutor
from .judge import JudgeError, judge_verdict, oracle_verdict
from .llm import (
    ChatEndpoint,
    ChatEndpointLike,
    ChatMessage,
    EndpointConfig,
    LLMError,
    Metered,
    MockEndpoint,
    Transcript,
    mock_provider,
    tool_call,
)
from .planner import PlannerConfig, run_task
from .report import summary_row, write_summary
from .script import parse_trace_line
from .world import load_environment, render_value

logger = logging.getLogger(__name__)

ModelFactory = Callable[[TaskInstance, str], ChatEndpointLike]
# fields that legitimately differ between otherwise identical runs
VOLATILE_FIELDS = ("latency", "model_time")


@dataclass
class RunConfig:
    mode: str
    model: str
    judges: str | list[str] = "oracle"
    corpus: str | None = None
    env: int | None = None
    task: int | None = None
    category: str | None = None
    parallel: int = 1
    out: str = "results"
    seed_tag: str = ""
    repeat: int = 1
    server: str | None = None
    max_steps: int = 20
    max_tool_steps: int = 15
    temperature: float = 0.0
    timeout: float = 120.0
    retries: int = 2

    def __post_init__(self) -> None:
        if self.mode not in ("cap", "tap"):
            raise ValueError(f"mode must be 'cap' or 'tap', not {self.mode!r}")
        if not self.model:
            raise ValueError("a model spec is required")
        if self.parallel < 1 or self.repeat < 1:
            raise ValueError("parallel and repeat must be at least 1")
        if isinstance(self.judges, str) and self.judges != "oracle":
            self.judges = [j.strip() for j in self.judges.split(",") if j.strip()]
        if self.judges != "oracle" and len(self.judges) != 3:
            raise ValueError("judges must be 'oracle' or exactly three model specs")
        if self.category:
            self.category = self.category.upper()

    def snapshot(self) -> dict[str, Any]:
        return asdict(self)


@dataclass
class TaskResult:
    key: str
    instance_id: str
    env_id: int
    task_id: int
    category: str
    final: int | float
    per_judge: list[int] | None
    latency: float
    model_time: float
    steps: int
    unfinished: bool
    trace: list[str]
    rationales: list[str] = field(default_factory=list)
    error: str | None = None

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> TaskResult:
        return cls(**data)

    def comparable(self) -> dict[str, Any]:
        return {k: v for k, v in self.to_dict().items() if k not in VOLATILE_FIELDS}


@dataclass
class ResultSet:
    config: dict[str, Any]
    results: list[TaskResult]
    table: dict[str, str] = field(default_factory=dict)


# -- model specs -------------------------------------------------------------------

_RELATION_PHRASES = {
    "in": "in the", "at": "at the", "on_top_of": "on top of the", "left_of": "to the left of the",
    "right_of": "to the right of the", "in_front_of": "in front of the", "behind": "behind the",
}


def _ground_truth_steps(instance: TaskInstance) -> list[tuple[str, str, str, dict[str, Any]]]:
    """(object, reference, relation, place pose) for each pick/get_pose/place group."""
    steps = []
    current: dict[str, Any] = {}
    for line in instance.ground_truth:
        action, args, _ = parse_trace_line(line)
        if action == "pick":
            current = {"object": args["object_name"]}
        elif action == "get_pose":
            current.update(reference=args["reference"], relation=args["relation"])
        elif action == "place":
            steps.append((current["object"], current["reference"], current["relation"], args["pose"]))
    return steps


def replay_scripts(instance: TaskInstance, mode: str) -> dict[str, list[ChatMessage]]:
    """Planner and executor scripts that reproduce an instance's ground truth."""
    planner: list[ChatMessage] = []
    executor: list[ChatMessage] = []
    for n, (obj, ref, rel, pose) in enumerate(_ground_truth_steps(instance)):
        subtask = f"Pick up the {obj} and place it {_RELATION_PHRASES[rel]} {ref}"
        planner.append(ChatMessage("assistant", f"Thought: Object {n + 1} of the request.\nAction: {subtask}"))
        if mode == "cap":
            code = (
                f"pick(object_name={render_value(obj)})\n"
                f"target = get_pose(reference={render_value(ref)}, relation={render_value(rel)})\n"
                "place(pose=target)\n"
            )
            executor.append(ChatMessage("assistant", f"```\n{code}```"))
        else:
            executor += [
                ChatMessage("assistant", tool_calls=(tool_call("pick", {"object_name": obj}, f"c{n}a"),)),
                ChatMessage("assistant", tool_calls=(
                    tool_call("get_pose", {"reference": ref, "relation": rel}, f"c{n}b"),)),
                ChatMessage("assistant", tool_calls=(tool_call("place", {"pose": pose}, f"c{n}c"),)),
                ChatMessage("assistant", f"The {obj} was successfully picked and placed {_RELATION_PHRASES[rel]} {ref}."),
            ]
    planner.append(ChatMessage("assistant", "Thought: Every object is where it should be.\nAction: Finish[done]"))
    return {"planner": planner, "executor": executor}


def endpoint_from_spec(spec: str, timeout: float = 120.0, retries: int = 2) -> ChatEndpoint:
    """``model@base_url`` or ``model@base_url#API_KEY_ENV``."""
    model, sep, rest = spec.partition("@")
    if not sep or not model or not rest:
        raise ValueError(f"model spec {spec!r} is not 'replay', 'mock:<file>' or 'model@base_url[#KEY_ENV]'")
    base_url, _, key_env = rest.partition("#")
    return ChatEndpoint(EndpointConfig(base_url, model, key_env or "OPENAI_API_KEY", timeout, retries))


def _load_mock_file(path: str) -> dict[str, list[Any]]:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ValueError(f"{path}: mock script file must map roles to message lists")
    return data


def model_factory(spec: str, mode: str, timeout: float = 120.0, retries: int = 2) -> ModelFactory:
    """Build the per-task, per-role endpoint factory for a model spec.

    ``replay`` replays each instance's ground truth; ``mock:<file>`` replays a
    role-keyed JSON script (fresh per task); anything else is a remote endpoint
    shared by all tasks.
    """
    if spec == "replay":
        def replay_factory(instance: TaskInstance, role: str) -> ChatEndpointLike:
            return MockEndpoint(replay_scripts(instance, mode)[role], model="replay")
        return replay_factory
    if spec.startswith("mock:"):
        scripts = _load_mock_file(spec[5:])

        def mock_factory(instance: TaskInstance, role: str) -> ChatEndpointLike:
            return mock_provider(scripts[role], model=f"mock-{role}")
        return mock_factory
    shared = endpoint_from_spec(spec, timeout, retries)
    return lambda instance, role: shared


def judge_factories(config: RunConfig) -> list[ModelFactory] | None:
    if config.judges == "oracle":
        return None
    factories = []
    for i, spec in enumerate(config.judges):
        if spec.startswith("mock:"):
            scripts = _load_mock_file(spec[5:])
            role = f"judge{i + 1}" if f"judge{i + 1}" in scripts else "judge"
            factories.append(lambda inst, _r, s=scripts[role]: mock_provider(s, model="mock-judge"))
        else:
            factories.append(model_factory(spec, config.mode, config.timeout, config.retries))
    return factories


# -- running -------------------------------------------------------------------------


def run_instance(instance: TaskInstance, config: RunConfig, models: ModelFactory,
                 judges: Sequence[ModelFactory] | None, key: str, corpus_dir: str | Path | None = None,
                 transcript: Transcript | None = None, http_client: httpx.Client | None = None) -> TaskResult:
    if config.server:
        actions = HttpDispatcher.create_session(config.server, instance.env_id, client=http_client)
    else:
        actions = LocalDispatcher(load_environment(instance.env_id, corpus_dir))
    planner_llm = Metered(models(instance, "planner"))
    executor_llm = Metered(models(instance, "executor"))
    if config.mode == "cap":
        executor = CapExecutor(executor_llm, actions, config.temperature, transcript)
    else:
        executor = TapExecutor(executor_llm, actions, TapConfig(config.max_tool_steps, config.temperature), transcript)
    try:
        task = run_task(instance.instruction, executor, planner_llm,
                        PlannerConfig(config.max_steps, 1, config.temperature), transcript)
    finally:
        if isinstance(actions, HttpDispatcher):
            try:
                actions.delete_session()
            except DispatchError:
                logger.warning("could not delete session %s", actions.session_id)
            if http_client is None:
                actions.close()
    error = task.error
    if task.aborted:
        final, per_judge, rationales = 0, None, []
    else:
        try:
            if judges is None:
                verdict = oracle_verdict(instance.instruction, instance.ground_truth, task.trace,
                                         instance.env_id, instance.order_constrained, corpus_dir)
            else:
                verdict = judge_verdict(instance.instruction, instance.ground_truth, task.trace,
                                        [Metered(j(instance, "judge")) for j in judges])
            final, per_judge, rationales = verdict.final, list(verdict.per_judge), list(verdict.rationales)
        except (JudgeError, LLMError) as exc:
            final, per_judge, rationales = 0, None, []
            error = f"scoring error: {exc}"
    return TaskResult(
        key=key,
        instance_id=instance.id,
        env_id=instance.env_id,
        task_id=instance.task_id,
        category=instance.category,
        final=final,
        per_judge=per_judge,
        latency=task.latency,
        model_time=planner_llm.total + executor_llm.total,
        steps=len(task.steps),
        unfinished=task.unfinished,
        trace=task.trace,
        rationales=rationales,
        error=error,
    )


def _write_json(path: Path, data: Any) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-", suffix=".json")
    with os.fdopen(fd, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=2, sort_keys=True, ensure_ascii=False)
        fh.write("\n")
    os.replace(tmp, path)


def select_instances(corpus: Corpus, config: RunConfig) -> list[tuple[str, TaskInstance]]:
    chosen = filter_corpus(corpus, env_id=config.env, task_id=config.task, category=config.category)
    keys = []
    for inst in chosen:
        for rep in range(config.repeat):
            keys.append((inst.id if config.repeat == 1 else f"{inst.id}-r{rep + 1}", inst))
    return keys


def run_benchmark(config: RunConfig, models: ModelFactory | None = None,
                  judges: Sequence[ModelFactory] | None | str = "config") -> ResultSet:
    """Run (or resume) a benchmark; per-task results land in ``<out>/tasks``."""
    corpus = load_corpus(config.corpus)
    out = Path(config.out)
    task_dir = out / "tasks"
    models = models or model_factory(config.model, config.mode, config.timeout, config.retries)
    judge_list = judge_factories(config) if judges == "config" else judges
    _write_json(out / "config.json", config.snapshot())

    selected = select_instances(corpus, config)
    done: dict[str, TaskResult] = {}
    for key, _ in selected:
        path = task_dir / f"{key}.json"
        if path.exists():
            done[key] = TaskResult.from_dict(json.loads(path.read_text(encoding="utf-8")))
    pending = [(k, inst) for k, inst in selected if k not in done]
    logger.info("%d tasks selected, %d already complete", len(selected), len(done))

    def work(item: tuple[str, TaskInstance]) -> TaskResult:
        key, inst = item
        transcript = Transcript()
        try:
            result = run_instance(inst, config, models, judge_list, key, corpus.path, transcript, http_client)
        except Exception as exc:  # one broken task must not sink the run
            logger.exception("task %s failed", key)
            result = TaskResult(key, inst.id, inst.env_id, inst.task_id, inst.category, 0, None, 0.0, 0.0,
                                0, True, [], error=f"{type(exc).__name__}: {exc}")
        _write_json(task_dir / f"{key}.json", result.to_dict())
        (out / "transcripts").mkdir(parents=True, exist_ok=True)
        (out / "transcripts" / f"{key}.jsonl").write_text(transcript.dumps() + "\n", encoding="utf-8")
        return result

    # one connection pool for every session; building a client per task is slow
    http_client = httpx.Client(timeout=config.timeout) if config.server else None
    try:
        with ThreadPoolExecutor(max_workers=config.parallel) as pool:
            for result in pool.map(work, pending):
                done[result.key] = result
    finally:
        if http_client is not None:
            http_client.close()

    results = [done[k] for k, _ in selected]
    result_set = ResultSet(config.snapshot(), results)
    result_set.table = summary_row(results, config.mode, config.model)
    emit_report(result_set, out)
    return result_set


def load_results(out_dir: str | Path) -> ResultSet:
    out = Path(out_dir)
    config = json.loads((out / "config.json").read_text(encoding="utf-8"))
    results = [
        TaskResult.from_dict(json.loads(p.read_text(encoding="utf-8")))
        for p in sorted((out / "tasks").glob("*.json"))
    ]
    return ResultSet(config, results, summary_row(results, config["mode"], config["model"]))


def emit_report(result_set: ResultSet, out_dir: str | Path, formats: Sequence[str] = ("csv", "table")) -> list[Path]:
    """Per-task results as one JSON document plus the summary table files."""
    out = Path(out_dir)
    path = out / "results.json"
    _write_json(path, {
        "config": result_set.config,
        "summary": result_set.table,
        "results": [r.to_dict() for r in result_set.results],
    })
    return [path, *write_summary([result_set.table], out, formats)]
