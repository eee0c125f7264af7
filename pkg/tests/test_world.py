import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sim_props import check_relation_algebra, check_round_trip, run_random_sequence
from tabletop_agent.world import (
    IDENTITY,
    TOP_DOWN,
    ActionRecord,
    ActionResult,
    ConfigurationError,
    Pose,
    format_number,
    load_environment,
    render_call,
)


@pytest.fixture
def env3():
    return load_environment(3)


@pytest.fixture
def env1():
    return load_environment(1)


# -- load_environment ---------------------------------------------------------


def test_env3_objects():
    world = load_environment(3)
    assert set(world.objects) == {"strawberry", "plum", "lemon", "peach", "bowl", "trash"}
    assert {o.name for o in world.containers()} == {"bowl", "trash"}


def test_env1_and_env2_objects():
    assert set(load_environment(1).objects) == {"spoon", "spatula", "coke", "basket"}
    assert set(load_environment(2).objects) == {"cardboard_box", "wooden_box", "metal_box", "container"}


def test_fresh_world_state(env1):
    assert env1.robot.held is None
    assert env1.trace == []
    assert env1.robot.ee_pose == env1.robot.home_pose


@pytest.mark.parametrize("bad", [0, 4, -1, True, "3", None])
def test_unknown_env_id(bad):
    with pytest.raises(ConfigurationError):
        load_environment(bad)


def test_layouts_are_separated_and_in_bounds():
    for env_id in (1, 2, 3):
        world = load_environment(env_id)
        poses = [o.pose for o in world.objects.values()]
        assert all(p.in_workspace() for p in poses)
        for i, a in enumerate(poses):
            for b in poses[i + 1:]:
                assert math.dist(a.position, b.position) >= 0.15


def test_worlds_are_independent():
    a, b = load_environment(3), load_environment(3)
    a.pick("lemon")
    assert b.robot.held is None and b.trace == []


# -- Pose ---------------------------------------------------------------------


def test_pose_normalizes_quaternion():
    pose = Pose((0, 0, 0), (2, 0, 0, 0))
    assert pose.orientation == (1.0, 0.0, 0.0, 0.0)


@pytest.mark.parametrize("quat", [(0, 0, 0, 0), (math.nan, 1, 0, 0)])
def test_pose_rejects_bad_orientation(quat):
    with pytest.raises(ValueError):
        Pose((0, 0, 0), quat)


def test_pose_rejects_infinite_position():
    with pytest.raises(ValueError):
        Pose((math.inf, 0, 0))


@pytest.mark.parametrize("payload", [
    {"position": [0, 0, 0]},
    {"position": [0, 0], "orientation": [1, 0, 0, 0]},
    {"position": [0, 0, 0], "orientation": [1, 0, 0, 0], "frame": "base"},
    {"position": ["a", 0, 0], "orientation": [1, 0, 0, 0]},
    {"position": [True, 0, 0], "orientation": [1, 0, 0, 0]},
    [0, 0, 0],
])
def test_pose_from_dict_rejects(payload):
    with pytest.raises(ValueError):
        Pose.from_dict(payload)


@given(
    st.tuples(*[st.floats(-10, 10)] * 3),
    st.tuples(*[st.floats(-1, 1)] * 4).filter(lambda q: sum(v * v for v in q) > 1e-6),
)
def test_pose_norm_invariant(position, quat):
    pose = Pose(position, quat)
    assert abs(math.sqrt(sum(q * q for q in pose.orientation)) - 1) <= 1e-9
    assert Pose.from_dict(pose.to_dict()) == pose


def test_action_result_failure_has_no_data():
    with pytest.raises(ValueError):
        ActionResult(False, "nope", {"x": 1})


# -- pick ---------------------------------------------------------------------


def test_pick_lemon(env3):
    result = env3.pick("lemon")
    assert result.ok and result.message == "The lemon was successfully picked"
    assert env3.robot.held == "lemon"
    assert env3.objects["lemon"].pose == env3.robot.ee_pose
    assert env3.robot.ee_pose.orientation == TOP_DOWN


def test_pick_unknown(env3):
    result = env3.pick("orange")
    assert not result.ok and result.message == "Object orange not found"
    assert len(env3.trace) == 1 and not env3.trace[0].ok


def test_pick_while_holding(env3):
    env3.pick("lemon")
    result = env3.pick("peach")
    assert not result.ok and result.message == "Gripper already holding lemon"
    assert env3.robot.held == "lemon"


def test_pick_container(env3):
    result = env3.pick("trash")
    assert not result.ok and result.message == "Object trash is not graspable"


def test_pick_normalizes_name(env3):
    assert env3.pick("  Lemon ").ok
    assert env3.trace[0].args == {"object_name": "lemon"}


def test_pick_clears_containment(env3):
    env3.pick("lemon")
    env3.place(env3.objects["trash"].pose)
    assert env3.objects["lemon"].contained_in == "trash"
    env3.pick("lemon")
    assert env3.objects["lemon"].contained_in is None


# -- place --------------------------------------------------------------------


def test_place_in_trash(env3):
    env3.pick("lemon")
    target = env3.get_pose("trash", "in").data
    result = env3.place(target)
    assert result.ok and result.message == "The lemon was successfully placed in the trash"
    assert env3.objects["lemon"].contained_in == "trash"
    assert env3.robot.held is None
    listing = {o["name"]: o["position"] for o in env3.get_objects().data}
    assert listing["lemon"] == pytest.approx([0.4, -0.35, 0.0])


def test_place_empty_gripper(env3):
    result = env3.place(Pose((0.3, 0.0, 0.1)))
    assert not result.ok and result.message == "Gripper is empty"


def test_place_out_of_workspace(env3):
    env3.pick("lemon")
    result = env3.place(Pose((0.3, 0.0, -0.2)))
    assert not result.ok and result.message == "Pose out of workspace"
    assert env3.robot.held == "lemon"


def test_place_malformed(env3):
    env3.pick("lemon")
    result = env3.place({"position": [0, 0, 0]})
    assert not result.ok and result.message.startswith("Malformed pose")


def test_containment_boundary(env3):
    trash = env3.objects["trash"].pose.position
    env3.pick("lemon")
    env3.place(Pose((trash[0] + 0.079, trash[1], 0.0)))
    assert env3.objects["lemon"].contained_in == "trash"
    env3.pick("lemon")
    env3.place(Pose((trash[0] + 0.081, trash[1], 0.0)))
    assert env3.objects["lemon"].contained_in is None


# -- motion -------------------------------------------------------------------


def test_move_to_home(env3):
    assert env3.move_to(env3.robot.home_pose).ok
    assert env3.robot.ee_pose == env3.robot.home_pose


def test_move_to_below_table(env3):
    result = env3.move_to(Pose((0.3, 0.0, -1.0)))
    assert not result.ok and result.message == "Pose out of workspace"


def test_move_to_carries_held(env3):
    env3.pick("lemon")
    target = Pose((0.3, 0.2, 0.2), IDENTITY)
    env3.move_to(target)
    assert env3.objects["lemon"].pose == target


def test_move_to_home_pos(env3):
    env3.move_to(Pose((0.3, 0.2, 0.2)))
    env3.pick("lemon")
    assert env3.move_to_home_pos().ok
    assert env3.robot.ee_pose == env3.robot.home_pose
    assert env3.objects["lemon"].pose == env3.robot.home_pose


def test_move_to_home_on_fresh_world(env3):
    before = env3.robot.ee_pose
    assert env3.move_to_home_pos().ok
    assert env3.robot.ee_pose == before


# -- perception ---------------------------------------------------------------


def test_get_objects_env1(env1):
    result = env1.get_objects()
    assert [o["name"] for o in result.data] == ["coke", "spatula", "spoon"]
    assert result.data[0]["position"] == [0.35, 0.0, 0.06]
    assert env1.get_objects().data == result.data


def test_get_reference_names(env3):
    assert env3.get_reference_names().data == ["bowl", "home", "trash"]
    assert load_environment(2).get_reference_names().data == ["container", "home"]
    env3.pick("lemon")
    assert env3.get_reference_names().data == ["bowl", "home", "trash"]


def test_compute_grasp(env3):
    result = env3.compute_grasp("lemon")
    assert result.data["position"] == list(env3.objects["lemon"].pose.position)
    assert result.data["orientation"] == list(TOP_DOWN)
    assert not env3.compute_grasp("orange").ok
    assert not env3.compute_grasp("bowl").ok


def test_get_pose_examples(env1, env3):
    assert env3.get_pose("trash", "in").data["position"] == [0.4, -0.35, 0.0]
    coke = env1.objects["coke"].pose.position
    assert env1.get_pose("coke", "left_of").data["position"] == pytest.approx([coke[0], coke[1] + 0.1, coke[2]])
    result = env1.get_pose("fork", "in")
    assert not result.ok and result.message == "Reference fork not found"
    result = env1.get_pose("coke", "under")
    assert not result.ok and result.message == "Unknown relation under"


def test_get_pose_home_keeps_orientation(env3):
    assert env3.get_pose("home", "at").data == env3.robot.home_pose.to_dict()


# -- rendering ------------------------------------------------------------------


@pytest.mark.parametrize("value,text", [
    (0.45, "0.45"), (1, "1.0"), (-0.1, "-0.1"), (0.123456, "0.1235"), (-0.00001, "0.0"), (2.5e-5, "0.0")
])
def test_format_number(value, text):
    assert format_number(value) == text


def test_record_rendering():
    assert ActionRecord(0, "pick", {"object_name": "lemon"}, True).render() == 'pick(object_name="lemon") -> ok'
    line = render_call("get_pose", {"relation": "in", "reference": "trash"})
    assert line == 'get_pose(reference="trash", relation="in")'
    assert ActionRecord(1, "move_to_home_pos", {}, False).render() == "move_to_home_pos() -> fail"


def test_trace_records_every_call(env3):
    env3.pick("orange")
    env3.pick("lemon")
    env3.place(env3.get_pose("trash", "in").data)
    assert [r.render() for r in env3.trace] == [
        'pick(object_name="orange") -> fail',
        'pick(object_name="lemon") -> ok',
        'get_pose(reference="trash", relation="in") -> ok',
        'place(pose={"position": [0.4, -0.35, 0.0], "orientation": [1.0, 0.0, 0.0, 0.0]}) -> ok',
    ]


# -- properties -----------------------------------------------------------------


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([1, 2, 3]), st.integers(1, 40))
def test_random_sequences_keep_invariants(seed, env_id, length):
    run_random_sequence(random.Random(seed), env_id, length)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([1, 2, 3]), st.integers(0, 20))
def test_round_trip_after_random_prefix(seed, env_id, length):
    rng = random.Random(seed)
    world = run_random_sequence(rng, env_id, length)
    if world.robot.held is not None:
        world.place(world.objects[world.robot.held].pose)
    for obj in world.items():
        check_round_trip(world, obj.name)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([1, 2, 3]), st.integers(0, 20))
def test_relation_algebra(seed, env_id, length):
    world = run_random_sequence(random.Random(seed), env_id, length)
    for reference in [*world.objects, "home"]:
        check_relation_algebra(world, reference)


@settings(max_examples=200, deadline=None)
@given(st.sampled_from([1, 2, 3]), st.data())
def test_containment_property(env_id, data):
    world = load_environment(env_id)
    item = data.draw(st.sampled_from([o.name for o in world.items()]))
    container = data.draw(st.sampled_from([o.name for o in world.containers()]))
    cx, cy, _ = world.objects[container].pose.position
    angle = data.draw(st.floats(0, 2 * math.pi))
    radius = data.draw(st.one_of(st.just(0.0), st.floats(0.0805, 0.3)))
    target = Pose((cx + radius * math.cos(angle), cy + radius * math.sin(angle), 0.05))
    world.pick(item)
    result = world.place(target)
    if not result.ok:
        assert result.message == "Pose out of workspace"
        return
    if radius == 0.0:
        assert world.objects[item].contained_in == container
    else:
        assert world.objects[item].contained_in != container
