"""Benchmark corpus: three environments x three tasks x six instructions.

Each environment is one JSON file (``env1.json`` ...) holding the layout, the
per-object attribute table and the task instances.  See ``docs/corpus.md``.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterator, Mapping

import jsonschema

from .effects import replay
from .script import ParseError, parse_trace_line
from .world import DATA_DIR, HOME, World, load_environment

CATEGORIES = ("CAN", "LEX", "SYN", "SEM", "HLR")
# instances per (environment, task) and category
COMPOSITION = {"CAN": 1, "LEX": 1, "SYN": 1, "SEM": 1, "HLR": 2}
EXPECTED_SIZE = 54

_REFERENT = {
    "type": "object",
    "properties": {
        "phrase": {"type": "string", "minLength": 1},
        "select": {"enum": ["max", "min", "eq", "ne", "all"]},
        "attribute": {"type": "string"},
        "value": {},
        "rank": {"type": "integer", "minimum": 1},
        "count": {"type": "integer", "minimum": 1},
        "expect": {"type": "array", "items": {"type": "string"}, "minItems": 1},
    },
    "required": ["phrase", "select", "expect"],
    "additionalProperties": False,
}

FILE_SCHEMA: dict[str, Any] = {
    "type": "object",
    "properties": {
        "format": {"const": "tabletop-agent-corpus"},
        "version": {"type": "string"},
        "env_id": {"enum": [1, 2, 3]},
        "name": {"type": "string"},
        "layout": {
            "type": "object",
            "properties": {
                "home_pose": {"type": "object"},
                "objects": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "properties": {
                            "name": {"type": "string", "pattern": "^[a-z][a-z0-9_]*$"},
                            "kind": {"enum": ["item", "container"]},
                            "pose": {"type": "object"},
                            "footprint_radius": {"type": "number", "exclusiveMinimum": 0},
                            "attributes": {"type": "object"},
                        },
                        "required": ["name", "kind", "pose"],
                    },
                    "minItems": 1,
                },
            },
            "required": ["home_pose", "objects"],
        },
        "tasks": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "task_id": {"enum": [1, 2, 3]},
                    "order_constrained": {"type": "boolean"},
                    "ground_truth": {"type": "array", "items": {"type": "string"}, "minItems": 1},
                    "instances": {
                        "type": "array",
                        "items": {
                            "type": "object",
                            "properties": {
                                "id": {"type": "string", "minLength": 1},
                                "category": {"enum": list(CATEGORIES)},
                                "instruction": {"type": "string", "minLength": 1, "pattern": r"\S"},
                                "ground_truth": {"type": "array", "items": {"type": "string"}, "minItems": 1},
                                "order_constrained": {"type": "boolean"},
                                "referents": {"type": "array", "items": _REFERENT},
                            },
                            "required": ["id", "category", "instruction"],
                            "additionalProperties": False,
                        },
                    },
                },
                "required": ["task_id", "instances"],
            },
        },
    },
    "required": ["format", "version", "env_id", "layout", "tasks"],
}
_FILE_VALIDATOR = jsonschema.Draft202012Validator(FILE_SCHEMA)


class CorpusError(ValueError):
    pass


@dataclass(frozen=True)
class TaskInstance:
    id: str
    env_id: int
    task_id: int
    category: str
    instruction: str
    ground_truth: tuple[str, ...]
    order_constrained: bool = False
    referents: tuple[Mapping[str, Any], ...] = ()


@dataclass
class Corpus:
    instances: tuple[TaskInstance, ...]
    version: str = ""
    path: Path | None = None
    layouts: dict[int, Mapping[str, Any]] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.instances)

    def __iter__(self) -> Iterator[TaskInstance]:
        return iter(self.instances)

    def get(self, instance_id: str) -> TaskInstance:
        for inst in self.instances:
            if inst.id == instance_id:
                return inst
        raise KeyError(instance_id)

    def filter(self, env_id: int | None = None, task_id: int | None = None,
               category: str | None = None) -> Corpus:
        return filter_corpus(self, env_id=env_id, task_id=task_id, category=category)


def filter_corpus(corpus: Corpus, env_id: int | None = None, task_id: int | None = None,
                  category: str | None = None) -> Corpus:
    keep = tuple(
        inst for inst in corpus.instances
        if (env_id is None or inst.env_id == env_id)
        and (task_id is None or inst.task_id == task_id)
        and (category is None or inst.category == category.upper())
    )
    return Corpus(keep, corpus.version, corpus.path, corpus.layouts)


def _read_file(path: Path) -> dict[str, Any]:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CorpusError(f"{path.name}: cannot read corpus file: {exc}") from exc
    errors = sorted(_FILE_VALIDATOR.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        where = ".".join(str(p) for p in err.absolute_path) or "<root>"
        raise CorpusError(f"{path.name}: field {where}: {err.message}")
    return data


def load_corpus(path: str | Path | None = None, strict: bool = True) -> Corpus:
    """Load every ``env*.json`` under ``path`` (default: the shipped corpus).

    With ``strict`` the full-benchmark invariants are enforced: 54 instances,
    and 1 CAN + 1 LEX + 1 SYN + 1 SEM + 2 HLR for each environment/task pair.
    """
    root = Path(path) if path is not None else DATA_DIR
    files = sorted(root.glob("env*.json"))
    if not files:
        raise CorpusError(f"{root}: no env*.json corpus files found")
    instances: list[TaskInstance] = []
    layouts: dict[int, Mapping[str, Any]] = {}
    versions = set()
    seen_ids: set[str] = set()
    for file in files:
        data = _read_file(file)
        env_id = data["env_id"]
        if env_id in layouts:
            raise CorpusError(f"{file.name}: field env_id: environment {env_id} defined twice")
        layouts[env_id] = data["layout"]
        versions.add(data["version"])
        task_ids = [t["task_id"] for t in data["tasks"]]
        if len(set(task_ids)) != len(task_ids):
            raise CorpusError(f"{file.name}: field tasks: duplicate task_id")
        for t_index, task in enumerate(data["tasks"]):
            counts = Counter(inst["category"] for inst in task["instances"])
            if strict and dict(counts) != COMPOSITION:
                raise CorpusError(
                    f"{file.name}: field tasks.{t_index}.instances: env {env_id} task {task['task_id']} "
                    f"has categories {dict(sorted(counts.items()))}, expected {COMPOSITION}"
                )
            for i_index, inst in enumerate(task["instances"]):
                where = f"{file.name}: field tasks.{t_index}.instances.{i_index}"
                if inst["id"] in seen_ids:
                    raise CorpusError(f"{where}.id: duplicate instance id {inst['id']!r}")
                seen_ids.add(inst["id"])
                gt = inst.get("ground_truth", task.get("ground_truth"))
                if not gt:
                    raise CorpusError(f"{where}.ground_truth: missing ground truth")
                for line in gt:
                    try:
                        parse_trace_line(line)
                    except ParseError as exc:
                        raise CorpusError(f"{where}.ground_truth: {line!r} does not parse: {exc}") from None
                instances.append(TaskInstance(
                    id=inst["id"],
                    env_id=env_id,
                    task_id=task["task_id"],
                    category=inst["category"],
                    instruction=inst["instruction"].strip(),
                    ground_truth=tuple(gt),
                    order_constrained=inst.get("order_constrained", task.get("order_constrained", False)),
                    referents=tuple(inst.get("referents", ())),
                ))
    if len(versions) > 1:
        raise CorpusError(f"{root}: corpus files disagree on version: {sorted(versions)}")
    if strict and len(instances) != EXPECTED_SIZE:
        raise CorpusError(f"{root}: corpus has {len(instances)} instances, expected {EXPECTED_SIZE}")
    return Corpus(tuple(instances), versions.pop(), root, layouts)


# -- validation ------------------------------------------------------------------


def resolve_referent(referent: Mapping[str, Any], world: World) -> tuple[list[str], list[str]]:
    """Objects picked out by a referring expression, plus any ambiguity findings."""
    items = world.items()
    select = referent["select"]
    attribute = referent.get("attribute")
    findings: list[str] = []
    phrase = referent["phrase"]
    if select == "all":
        return sorted(o.name for o in items), findings
    if attribute is None:
        return [], [f"referent {phrase!r}: select={select} needs an attribute"]
    missing = [o.name for o in items if attribute not in o.attributes]
    if missing:
        return [], [f"referent {phrase!r}: attribute {attribute!r} missing for {missing}"]
    if select in ("eq", "ne"):
        value = referent.get("value")
        hits = [o.name for o in items if (o.attributes[attribute] == value) == (select == "eq")]
        return sorted(hits), findings
    ranked = sorted(items, key=lambda o: o.attributes[attribute], reverse=(select == "max"))
    rank, count = referent.get("rank", 1), referent.get("count", 1)
    chosen = ranked[rank - 1 : rank - 1 + count]
    if len(chosen) < count:
        return [], [f"referent {phrase!r}: not enough objects to rank"]
    values = [o.attributes[attribute] for o in ranked]
    lo, hi = rank - 1, rank - 1 + count
    # ties across the selection boundary make the phrase ambiguous
    if (lo > 0 and values[lo - 1] == values[lo]) or (hi < len(values) and values[hi - 1] == values[hi]):
        findings.append(f"referent {phrase!r}: ambiguous because of tied {attribute} values")
    return sorted(o.name for o in chosen), findings


def _named_objects(lines: tuple[str, ...]) -> set[str]:
    names = set()
    for line in lines:
        _, args, _ = parse_trace_line(line)
        for key in ("object_name", "reference"):
            if key in args:
                names.add(args[key])
    return names


def validate_instance(instance: TaskInstance, world: World, canonical: TaskInstance | None = None,
                      corpus_dir: str | Path | None = None) -> list[str]:
    """Check one instance; returns human-readable findings (empty means valid).

    ``world`` is a fresh world for the instance's environment; it is used for
    name and attribute lookups.  Ground truth replays on separate fresh worlds.
    """
    findings: list[str] = []
    tag = instance.id
    if world.env_id != instance.env_id:
        return [f"{tag}: world is environment {world.env_id}, instance needs {instance.env_id}"]
    try:
        named = _named_objects(instance.ground_truth)
    except ParseError as exc:
        return [f"{tag}: ground truth does not parse: {exc}"]
    unknown = sorted(n for n in named if n not in world.objects and n != HOME)
    if unknown:
        findings.append(f"{tag}: ground truth names unknown objects {unknown}")

    run = replay(instance.ground_truth, instance.env_id, corpus_dir, only_ok=False)
    findings += [f"{tag}: replay failure: {f}" for f in run.failures]
    findings += [f"{tag}: invalid ground-truth line: {s}" for s in run.skipped]
    if not run.effects:
        findings.append(f"{tag}: ground truth has no effect on the world")

    if canonical is not None and canonical is not instance:
        ref = replay(canonical.ground_truth, canonical.env_id, corpus_dir, only_ok=False)
        if set(ref.effects) != set(run.effects) or any(
            not ref.effects[n].matches(run.effects[n]) for n in ref.effects
        ):
            findings.append(f"{tag}: final effect differs from canonical {canonical.id}")
        if instance.order_constrained and ref.placement_order != run.placement_order:
            findings.append(f"{tag}: placement order differs from canonical {canonical.id}")

    if instance.category == "HLR" and not instance.referents:
        findings.append(f"{tag}: HLR instance has no referents to check")
    for referent in instance.referents:
        resolved, problems = resolve_referent(referent, world)
        findings += [f"{tag}: {p}" for p in problems]
        if resolved != sorted(referent["expect"]):
            findings.append(
                f"{tag}: referent {referent['phrase']!r} resolves to {resolved}, expected {sorted(referent['expect'])}"
            )
        absent = sorted(set(resolved) - named)
        if absent:
            findings.append(f"{tag}: referent {referent['phrase']!r} objects {absent} not used by ground truth")
    return findings


def validate_corpus(corpus: Corpus) -> list[str]:
    findings: list[str] = []
    canon = {(i.env_id, i.task_id): i for i in corpus if i.category == "CAN"}
    for inst in corpus:
        world = load_environment(inst.env_id, corpus.path)
        findings += validate_instance(inst, world, canon.get((inst.env_id, inst.task_id)), corpus.path)
    return findings
