"""Deterministic tabletop simulator behind the eight robot actions.

Kinematics are placeholders: any well-formed pose inside the workspace box is
reachable, a picked object is pinned to the end effector, and placing an object
inside a container's footprint marks it as contained.  Frame: robot base at the
origin, +x forward, +y left, +z up.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Any, Mapping

WORKSPACE_MIN = (-0.1, -0.5, 0.0)
WORKSPACE_MAX = (0.6, 0.5, 0.6)
XY_OFFSET = 0.10
Z_OFFSET = 0.05
FOOTPRINT_RADIUS = 0.08

IDENTITY = (1.0, 0.0, 0.0, 0.0)
# (w, x, y, z): half turn about +y, gripper pointing straight down.
TOP_DOWN = (0.0, 0.0, 1.0, 0.0)

RELATION_OFFSETS: dict[str, tuple[float, float, float]] = {
    "at": (0.0, 0.0, 0.0),
    "in": (0.0, 0.0, 0.0),
    "on_top_of": (0.0, 0.0, Z_OFFSET),
    "left_of": (0.0, XY_OFFSET, 0.0),
    "right_of": (0.0, -XY_OFFSET, 0.0),
    "in_front_of": (-XY_OFFSET, 0.0, 0.0),
    "behind": (XY_OFFSET, 0.0, 0.0),
}
RELATIONS = tuple(RELATION_OFFSETS)

# Parameter names in declaration order; this order is used for trace rendering.
ACTION_PARAMS: dict[str, tuple[str, ...]] = {
    "pick": ("object_name",),
    "place": ("pose",),
    "move_to": ("pose",),
    "move_to_home_pos": (),
    "get_objects": (),
    "get_reference_names": (),
    "compute_grasp": ("object_name",),
    "get_pose": ("reference", "relation"),
}
ACTIONS = tuple(ACTION_PARAMS)
# Actions that can change world state.
MANIPULATION_ACTIONS = frozenset({"pick", "place", "move_to", "move_to_home_pos"})

HOME = "home"
DATA_DIR = Path(__file__).resolve().parent / "data"


class ConfigurationError(ValueError):
    """Raised for unknown environments or unreadable layout data."""


def normalize_name(name: str) -> str:
    return " ".join(str(name).split()).lower().replace(" ", "_")


@dataclass(frozen=True)
class Pose:
    """Position in meters plus a unit quaternion ``(w, x, y, z)``."""

    position: tuple[float, float, float]
    orientation: tuple[float, float, float, float] = IDENTITY

    def __post_init__(self) -> None:
        pos = tuple(float(v) for v in self.position)
        quat = tuple(float(v) for v in self.orientation)
        if len(pos) != 3 or len(quat) != 4:
            raise ValueError("pose needs 3 position and 4 orientation components")
        if not all(math.isfinite(v) for v in pos + quat):
            raise ValueError("pose components must be finite")
        norm = math.sqrt(sum(q * q for q in quat))
        if norm < 1e-12:
            raise ValueError("orientation quaternion has zero norm")
        if abs(norm - 1.0) > 1e-12:  # leave unit quaternions bit-exact so round trips are stable
            quat = tuple(q / norm for q in quat)
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "orientation", quat)

    @classmethod
    def from_dict(cls, payload: Any) -> Pose:
        if isinstance(payload, Pose):
            return payload
        if not isinstance(payload, Mapping):
            raise ValueError("pose must be an object with position and orientation")
        if set(payload) != {"position", "orientation"}:
            raise ValueError("pose must have exactly the keys 'position' and 'orientation'")
        position, orientation = payload["position"], payload["orientation"]
        for label, value, size in (("position", position, 3), ("orientation", orientation, 4)):
            if not isinstance(value, (list, tuple)) or len(value) != size:
                raise ValueError(f"pose {label} must be a list of {size} numbers")
            if any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in value):
                raise ValueError(f"pose {label} must contain only numbers")
        return cls(tuple(position), tuple(orientation))

    def to_dict(self) -> dict[str, list[float]]:
        return {"position": list(self.position), "orientation": list(self.orientation)}

    def offset(self, dx: float, dy: float, dz: float) -> Pose:
        x, y, z = self.position
        return Pose((x + dx, y + dy, z + dz), self.orientation)

    def in_workspace(self) -> bool:
        return all(lo <= v <= hi for v, lo, hi in zip(self.position, WORKSPACE_MIN, WORKSPACE_MAX))


@dataclass
class ObjectState:
    name: str
    pose: Pose
    kind: str = "item"
    contained_in: str | None = None
    footprint_radius: float | None = None
    attributes: dict[str, Any] = field(default_factory=dict)

    @property
    def is_container(self) -> bool:
        return self.kind == "container"


@dataclass
class RobotState:
    ee_pose: Pose
    home_pose: Pose
    held: str | None = None


@dataclass(frozen=True)
class ActionResult:
    ok: bool
    message: str
    data: Any = None

    def __post_init__(self) -> None:
        if not self.ok and self.data is not None:
            raise ValueError("failed results carry no data")

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"ok": self.ok, "message": self.message}
        if self.data is not None:
            out["data"] = self.data
        return out


def format_number(value: float) -> str:
    """Render a number with at most four decimals (``0.45``, ``1.0``, ``-0.1``)."""
    text = f"{float(value):.4f}".rstrip("0")
    if text.endswith("."):
        text += "0"
    return "0.0" if text == "-0.0" else text


def render_value(value: Any) -> str:
    if isinstance(value, str):
        return json.dumps(value, ensure_ascii=False)
    if isinstance(value, bool) or value is None:
        return json.dumps(value)
    if isinstance(value, (int, float)):
        return format_number(value)
    if isinstance(value, Pose):
        return render_value(value.to_dict())
    if isinstance(value, Mapping):
        inner = ", ".join(f"{json.dumps(str(k), ensure_ascii=False)}: {render_value(v)}" for k, v in value.items())
        return "{" + inner + "}"
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(render_value(v) for v in value) + "]"
    return json.dumps(str(value))


def render_call(action: str, args: Mapping[str, Any]) -> str:
    """Canonical ``name(key=value, ...)`` text, parameters in declaration order."""
    order = ACTION_PARAMS.get(action, ())
    keys = [k for k in order if k in args] + sorted(k for k in args if k not in order)
    return f"{action}(" + ", ".join(f"{k}={render_value(args[k])}" for k in keys) + ")"


@dataclass(frozen=True)
class ActionRecord:
    index: int
    action: str
    args: dict[str, Any]
    ok: bool

    def render(self) -> str:
        return f"{render_call(self.action, self.args)} -> {'ok' if self.ok else 'fail'}"


def _xy_distance(a: Pose, b: Pose) -> float:
    return math.hypot(a.position[0] - b.position[0], a.position[1] - b.position[1])


class World:
    """Mutable simulation state for one environment.

    Every action appends exactly one :class:`ActionRecord`.  A failed action
    changes nothing else.
    """

    def __init__(self, env_id: int, objects: Mapping[str, ObjectState], robot: RobotState) -> None:
        self.env_id = env_id
        self.objects: dict[str, ObjectState] = dict(objects)
        self.robot = robot
        self.trace: list[ActionRecord] = []

    # -- bookkeeping -------------------------------------------------------

    def _finish(self, action: str, args: dict[str, Any], result: ActionResult) -> ActionResult:
        self.trace.append(ActionRecord(len(self.trace), action, args, result.ok))
        return result

    def _move_ee(self, pose: Pose) -> None:
        self.robot.ee_pose = pose
        if self.robot.held is not None:
            self.objects[self.robot.held].pose = pose

    def _lookup_item(self, name: str) -> tuple[ObjectState | None, str | None]:
        obj = self.objects.get(name)
        if obj is None:
            return None, f"Object {name} not found"
        if obj.is_container:
            return None, f"Object {name} is not graspable"
        return obj, None

    def items(self) -> list[ObjectState]:
        return sorted((o for o in self.objects.values() if not o.is_container), key=lambda o: o.name)

    def containers(self) -> list[ObjectState]:
        return sorted((o for o in self.objects.values() if o.is_container), key=lambda o: o.name)

    def snapshot(self) -> dict[str, tuple[tuple[float, ...], str | None]]:
        return {name: (o.pose.position, o.contained_in) for name, o in sorted(self.objects.items())}

    def call(self, action: str, args: Mapping[str, Any] | None = None) -> ActionResult:
        """Invoke an action by name with keyword arguments."""
        args = dict(args or {})
        if action not in ACTION_PARAMS:
            raise KeyError(f"unknown action {action!r}")
        return getattr(self, action)(**args)

    # -- robot control -----------------------------------------------------

    def pick(self, object_name: str) -> ActionResult:
        name = normalize_name(object_name)
        args = {"object_name": name}
        obj, error = self._lookup_item(name)
        if error:
            return self._finish("pick", args, ActionResult(False, error))
        if self.robot.held is not None:
            return self._finish("pick", args, ActionResult(False, f"Gripper already holding {self.robot.held}"))
        assert obj is not None
        grasp = Pose(obj.pose.position, TOP_DOWN)
        self.robot.held = name
        obj.contained_in = None
        self._move_ee(grasp)
        return self._finish("pick", args, ActionResult(True, f"The {name} was successfully picked"))

    def place(self, pose: Pose | Mapping[str, Any]) -> ActionResult:
        try:
            target = Pose.from_dict(pose)
        except ValueError as exc:
            return self._finish("place", {"pose": pose}, ActionResult(False, f"Malformed pose: {exc}"))
        args = {"pose": target.to_dict()}
        if self.robot.held is None:
            return self._finish("place", args, ActionResult(False, "Gripper is empty"))
        if not target.in_workspace():
            return self._finish("place", args, ActionResult(False, "Pose out of workspace"))
        name = self.robot.held
        self._move_ee(target)
        self.robot.held = None
        obj = self.objects[name]
        inside = [
            (_xy_distance(target, c.pose), c.name)
            for c in self.containers()
            if _xy_distance(target, c.pose) <= (c.footprint_radius or FOOTPRINT_RADIUS)
        ]
        obj.contained_in = min(inside)[1] if inside else None
        where = f" in the {obj.contained_in}" if obj.contained_in else ""
        return self._finish("place", args, ActionResult(True, f"The {name} was successfully placed{where}"))

    def move_to(self, pose: Pose | Mapping[str, Any]) -> ActionResult:
        try:
            target = Pose.from_dict(pose)
        except ValueError as exc:
            return self._finish("move_to", {"pose": pose}, ActionResult(False, f"Malformed pose: {exc}"))
        args = {"pose": target.to_dict()}
        if not target.in_workspace():
            return self._finish("move_to", args, ActionResult(False, "Pose out of workspace"))
        self._move_ee(target)
        return self._finish("move_to", args, ActionResult(True, "The robot moved to the target pose"))

    def move_to_home_pos(self) -> ActionResult:
        self._move_ee(self.robot.home_pose)
        return self._finish("move_to_home_pos", {}, ActionResult(True, "The robot moved to the home position"))

    # -- perception ---------------------------------------------------------

    def get_objects(self) -> ActionResult:
        listing = [{"name": o.name, "position": list(o.pose.position)} for o in self.items()]
        summary = ", ".join(
            f"{o['name']} at ({', '.join(format_number(v) for v in o['position'])})" for o in listing
        )
        return self._finish("get_objects", {}, ActionResult(True, f"Objects: {summary}", listing))

    def get_reference_names(self) -> ActionResult:
        names = sorted([c.name for c in self.containers()] + [HOME])
        return self._finish(
            "get_reference_names", {}, ActionResult(True, f"Reference names: {', '.join(names)}", names)
        )

    def compute_grasp(self, object_name: str) -> ActionResult:
        name = normalize_name(object_name)
        args = {"object_name": name}
        obj, error = self._lookup_item(name)
        if error:
            return self._finish("compute_grasp", args, ActionResult(False, error))
        assert obj is not None
        grasp = Pose(obj.pose.position, TOP_DOWN)
        return self._finish(
            "compute_grasp", args, ActionResult(True, f"Grasp pose computed for {name}", grasp.to_dict())
        )

    def get_pose(self, reference: str, relation: str = "at") -> ActionResult:
        ref = normalize_name(reference)
        rel = normalize_name(relation)
        args = {"reference": ref, "relation": rel}
        if rel not in RELATION_OFFSETS:
            return self._finish("get_pose", args, ActionResult(False, f"Unknown relation {rel}"))
        if ref == HOME:
            base = self.robot.home_pose
        elif ref in self.objects:
            base = self.objects[ref].pose
        else:
            return self._finish("get_pose", args, ActionResult(False, f"Reference {ref} not found"))
        pose = base.offset(*RELATION_OFFSETS[rel])
        return self._finish(
            "get_pose", args, ActionResult(True, f"Pose {rel} {ref} computed", pose.to_dict())
        )


# -- environment layouts ------------------------------------------------------


def environment_file(env_id: int, corpus_dir: str | Path | None = None) -> Path:
    return Path(corpus_dir or DATA_DIR) / f"env{env_id}.json"


@lru_cache(maxsize=32)
def _read_layout(path: str) -> dict[str, Any]:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)["layout"]


def world_from_layout(env_id: int, layout: Mapping[str, Any]) -> World:
    try:
        home = Pose.from_dict(layout["home_pose"])
        objects = {}
        for entry in layout["objects"]:
            kind = entry.get("kind", "item")
            if kind not in ("item", "container"):
                raise ConfigurationError(f"object {entry['name']!r}: unknown kind {kind!r}")
            radius = entry.get("footprint_radius", FOOTPRINT_RADIUS) if kind == "container" else None
            objects[entry["name"]] = ObjectState(
                name=entry["name"],
                pose=Pose.from_dict(entry["pose"]),
                kind=kind,
                footprint_radius=radius,
                attributes=dict(entry.get("attributes", {})),
            )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigurationError(f"invalid layout for environment {env_id}: {exc}") from exc
    return World(env_id, objects, RobotState(ee_pose=home, home_pose=home))


def load_environment(env_id: int, corpus_dir: str | Path | None = None) -> World:
    """Fresh world for environment 1, 2 or 3: robot at home, empty trace."""
    if isinstance(env_id, bool) or env_id not in (1, 2, 3):
        raise ConfigurationError(f"unknown environment id {env_id!r}; expected 1, 2 or 3")
    path = environment_file(env_id, corpus_dir)
    try:
        layout = _read_layout(str(path))
    except (OSError, KeyError, json.JSONDecodeError) as exc:
        raise ConfigurationError(f"cannot read layout from {path}: {exc}") from exc
    return world_from_layout(env_id, copy.deepcopy(layout))
