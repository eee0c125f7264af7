"""Action schemas and dispatch handles.

Executors talk to the robot through a *dispatch handle*: anything with
``dispatch(action, args) -> dict`` and ``trace() -> list[str]``.  The
in-process :class:`LocalDispatcher` wraps a :class:`~tabletop_agent.world.World`
directly; :class:`HttpDispatcher` talks to a running action server.
"""

from __future__ import annotations

import threading
from typing import Any, Mapping, Protocol

import httpx
import jsonschema

from .world import ACTIONS, RELATIONS, Pose, World

_NUMBER_LIST = {"type": "array", "items": {"type": "number"}}

POSE_SCHEMA: dict[str, Any] = {
    "type": "object",
    "description": "Pose dictionary: position [x, y, z] in meters and orientation quaternion [w, x, y, z].",
    "properties": {
        "position": {**_NUMBER_LIST, "minItems": 3, "maxItems": 3},
        "orientation": {**_NUMBER_LIST, "minItems": 4, "maxItems": 4},
    },
    "required": ["position", "orientation"],
    "additionalProperties": False,
}

_OBJECT_NAME = {"type": "string", "minLength": 1, "description": "Name of an object in the environment."}

# name -> (description, expected output, properties)
ACTION_SPECS: dict[str, tuple[str, str, dict[str, Any]]] = {
    "pick": (
        "Move the gripper to the object and grasp it. Only one object can be held at a time; containers cannot be picked.",
        "Nothing. The message confirms the pick or explains the failure.",
        {"object_name": _OBJECT_NAME},
    ),
    "place": (
        "Move the held object to the given pose and release it. Placing inside a container's footprint puts the object in that container.",
        "Nothing. The message confirms the placement or explains the failure.",
        {"pose": POSE_SCHEMA},
    ),
    "move_to": (
        "Move the gripper (and any held object) to the given pose.",
        "Nothing.",
        {"pose": POSE_SCHEMA},
    ),
    "move_to_home_pos": (
        "Move the gripper (and any held object) back to the home position.",
        "Nothing.",
        {},
    ),
    "get_objects": (
        "List the graspable objects in the environment with their current positions.",
        'A list of records {"name": string, "position": [x, y, z]} sorted by name.',
        {},
    ),
    "get_reference_names": (
        "List the names that can be used as references for placing: every container plus \"home\".",
        "A list of strings.",
        {},
    ),
    "compute_grasp": (
        "Compute a top-down grasp pose for an object.",
        'A pose {"position": [x, y, z], "orientation": [w, x, y, z]}.',
        {"object_name": _OBJECT_NAME},
    ),
    "get_pose": (
        "Compute a placement pose relative to a reference (an object name or \"home\"). "
        "Relations: at, in, on_top_of, left_of, right_of, in_front_of, behind.",
        'A pose {"position": [x, y, z], "orientation": [w, x, y, z]}.',
        {
            "reference": {"type": "string", "minLength": 1, "description": "Object name or \"home\"."},
            "relation": {"type": "string", "enum": list(RELATIONS), "description": "Spatial relation to the reference."},
        },
    ),
}


def parameters_schema(action: str) -> dict[str, Any]:
    props = ACTION_SPECS[action][2]
    return {
        "type": "object",
        "properties": props,
        "required": list(props),
        "additionalProperties": False,
    }


_VALIDATORS = {name: jsonschema.Draft202012Validator(parameters_schema(name)) for name in ACTIONS}


class DispatchError(RuntimeError):
    """Transport-level failure talking to the action backend."""


class UnknownActionError(DispatchError):
    status = 404


class UnknownSessionError(DispatchError):
    status = 404


class SchemaError(DispatchError):
    """Arguments do not match the action's parameter schema."""

    status = 400


def validate_args(action: str, args: Any) -> dict[str, Any]:
    """Check ``args`` against the action schema and return a plain dict copy."""
    if action not in _VALIDATORS:
        raise UnknownActionError(f"unknown action {action!r}")
    if not isinstance(args, Mapping):
        raise SchemaError(f"{action}: arguments must be a JSON object")
    args = dict(args)
    errors = sorted(_VALIDATORS[action].iter_errors(args), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        where = "/".join(str(p) for p in err.absolute_path)
        raise SchemaError(f"{action}: {where + ': ' if where else ''}{err.message}")
    if "pose" in args:
        try:
            Pose.from_dict(args["pose"])
        except ValueError as exc:
            raise SchemaError(f"{action}: pose: {exc}") from exc
    return args


class ActionDispatcher(Protocol):
    def dispatch(self, action: str, args: Mapping[str, Any] | None = None) -> dict[str, Any]: ...

    def trace(self) -> list[str]: ...


class LocalDispatcher:
    """In-process dispatch against a world; one lock serializes access."""

    def __init__(self, world: World) -> None:
        self.world = world
        self.lock = threading.RLock()

    def dispatch(self, action: str, args: Mapping[str, Any] | None = None) -> dict[str, Any]:
        checked = validate_args(action, {} if args is None else args)
        with self.lock:
            return self.world.call(action, checked).to_dict()

    def trace(self) -> list[str]:
        with self.lock:
            return [r.render() for r in self.world.trace]


class HttpDispatcher:
    """Dispatch handle bound to one session of a running action server."""

    def __init__(self, base_url: str, session_id: str = "default", timeout: float = 10.0,
                 client: httpx.Client | None = None) -> None:
        self.base_url = base_url.rstrip("/")
        self.session_id = session_id
        self.client = client or httpx.Client(timeout=timeout)

    @classmethod
    def create_session(cls, base_url: str, env_id: int, **kwargs: Any) -> HttpDispatcher:
        handle = cls(base_url, **kwargs)
        body = handle._request("POST", "/session", {"env_id": env_id})
        handle.session_id = body["session_id"]
        return handle

    def _request(self, method: str, path: str, payload: Any = None) -> dict[str, Any]:
        try:
            resp = self.client.request(method, self.base_url + path, json=payload)
        except httpx.HTTPError as exc:
            raise DispatchError(f"{method} {path} failed: {exc}") from exc
        try:
            body = resp.json()
        except ValueError as exc:
            raise DispatchError(f"{method} {path}: response is not JSON") from exc
        message = body.get("message", resp.text) if isinstance(body, dict) else resp.text
        if resp.status_code == 400:
            raise SchemaError(message)
        if resp.status_code == 404:
            if "session" in str(message).lower():
                raise UnknownSessionError(message)
            raise UnknownActionError(message)
        if resp.status_code != 200:
            raise DispatchError(f"{method} {path}: HTTP {resp.status_code}: {message}")
        return body

    def dispatch(self, action: str, args: Mapping[str, Any] | None = None) -> dict[str, Any]:
        body = self._request("POST", f"/session/{self.session_id}/{action}", dict(args or {}))
        return {k: body[k] for k in ("ok", "message", "data") if k in body}

    def trace(self) -> list[str]:
        return list(self._request("GET", f"/session/{self.session_id}/trace")["data"])

    def delete_session(self) -> None:
        self._request("DELETE", f"/session/{self.session_id}")

    def close(self) -> None:
        self.client.close()
