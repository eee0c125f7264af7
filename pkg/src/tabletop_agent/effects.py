"""Replay canonical trace lines on a fresh world and compare object effects."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .actions import DispatchError, validate_args
from .script import ParseError, parse_trace_line
from .world import World, load_environment

POSITION_TOLERANCE = 0.01  # meters, for effects that are not containment


@dataclass(frozen=True)
class Effect:
    """Final state of an object that the trace moved."""

    position: tuple[float, float, float]
    contained_in: str | None

    def matches(self, other: Effect) -> bool:
        if self.contained_in != other.contained_in:
            return False
        if self.contained_in is not None:
            return True
        return math.dist(self.position, other.position) <= POSITION_TOLERANCE


@dataclass
class Replay:
    world: World
    effects: dict[str, Effect] = field(default_factory=dict)
    # objects in the order of their last successful placement
    placement_order: list[str] = field(default_factory=list)
    failures: list[str] = field(default_factory=list)
    skipped: list[str] = field(default_factory=list)

    @property
    def all_ok(self) -> bool:
        return not self.failures and not self.skipped


def replay(lines: Iterable[str], env_id: int, corpus_dir: str | Path | None = None,
           only_ok: bool = True) -> Replay:
    """Run trace lines against a fresh world.

    Lines marked ``-> fail`` are skipped when ``only_ok`` is set (a failed
    action never changes the world, so skipping it is equivalent).
    Unparseable or schema-invalid lines are recorded in ``skipped``.
    """
    world = load_environment(env_id, corpus_dir)
    initial = {name: (o.pose.position, o.contained_in) for name, o in world.objects.items()}
    result = Replay(world)
    placed: list[str] = []
    for line in lines:
        try:
            action, args, ok = parse_trace_line(line)
            args = validate_args(action, args)
        except (ParseError, DispatchError) as exc:
            result.skipped.append(f"{line}: {exc}")
            continue
        if only_ok and not ok:
            continue
        holding = world.robot.held
        outcome = world.call(action, args)
        if not outcome.ok:
            result.failures.append(f"{line}: {outcome.message}")
        elif action == "place" and holding is not None:
            placed.append(holding)
    for name, obj in world.objects.items():
        before_pos, before_in = initial[name]
        if before_in != obj.contained_in or math.dist(before_pos, obj.pose.position) > 1e-9:
            result.effects[name] = Effect(obj.pose.position, obj.contained_in)
    seen: set[str] = set()
    for name in reversed(placed):
        if name not in seen:
            seen.add(name)
            result.placement_order.append(name)
    result.placement_order.reverse()
    return result


def effect_score(expected: Replay, predicted: Replay, order_constrained: bool = False) -> int:
    """0/1/2 score: 2 when every expected effect is reproduced with nothing extra."""
    achieved = {
        name for name, eff in expected.effects.items()
        if name in predicted.effects and eff.matches(predicted.effects[name])
    }
    extraneous = set(predicted.effects) - set(expected.effects)
    in_order = True
    if order_constrained:
        want = [n for n in expected.placement_order if n in expected.effects]
        got = [n for n in predicted.placement_order if n in expected.effects]
        in_order = want == got
    if expected.effects and achieved == set(expected.effects) and not extraneous and in_order:
        return 2
    return 1 if achieved else 0
