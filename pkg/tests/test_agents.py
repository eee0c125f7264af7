import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import scenarios
from tabletop_agent.actions import DispatchError, LocalDispatcher
from tabletop_agent.executor_cap import (
    ExecutorError,
    execute_subtask_cap,
    extract_script,
    generate_script,
)
from tabletop_agent.executor_tap import TapConfig, execute_subtask_tap
from tabletop_agent.llm import ChatMessage, StatusError, mock_provider, tool_call
from tabletop_agent.planner import (
    Finish,
    PlannerConfig,
    PlannerFormatError,
    PlannerStep,
    Subtask,
    classify_subtask,
    parse_reply,
    plan_step,
    run_task,
    serialize_history,
)
from tabletop_agent.prompts import load_prompt, prompt_version
from tabletop_agent.world import load_environment


@pytest.fixture
def actions():
    return LocalDispatcher(load_environment(3))


class EchoExecutor:
    """Executor stub that records subtasks and reports a fixed observation."""

    def __init__(self, actions):
        self.actions = actions
        self.subtasks = []

    def execute_subtask(self, subtask):
        self.subtasks.append(subtask)
        return f"did: {subtask}"


# -- prompts --------------------------------------------------------------------------


@pytest.mark.parametrize("name", ["planner", "tap_system", "cap_system", "judge"])
def test_prompts_are_versioned(name):
    assert prompt_version(name) == "1"
    assert not load_prompt(name).startswith("# prompt-version")


def test_cap_prompt_lists_every_action():
    text = load_prompt("cap_system", actions="ACTIONS-HERE")
    assert "ACTIONS-HERE" in text and "$actions" not in text


# -- planner parsing ----------------------------------------------------------------------


@pytest.mark.parametrize("text,kind", [
    ("Get the names of objects present in the environment", "query_names"),
    ("Get the position of objects in the environment", "query_positions"),
    ("Get the positions of all the objects in the environment", "query_positions"),
    ("Pick up the lemon and place it in the trash", "atomic_manipulation"),
    ("pick the spoon and place it to the left of the coke", "atomic_manipulation"),
    ("Wave at the user", "other"),
])
def test_classify_subtask(text, kind):
    assert classify_subtask(text) == kind


def test_parse_reply_subtask():
    thought, action = parse_reply("Thought: need object list\nAction: Get the names of objects present in the environment")
    assert thought == "need object list"
    assert action == Subtask("Get the names of objects present in the environment", "query_names")


def test_parse_reply_finish():
    assert parse_reply("Thought: done\nAction: Finish[all fruits moved]")[1] == Finish("all fruits moved")


def test_parse_reply_multiline_thought_and_markdown():
    thought, action = parse_reply("**Thought:** first\nsecond line\n**Action:** Finish[ok]")
    assert thought == "first\nsecond line" and action == Finish("ok")


@pytest.mark.parametrize("text", [
    "Thought: a\nAction: Pick up the lemon and place it in the trash\nAction: Finish[x]",
    "Action: Finish[x]",
    "Thought: only thinking",
    "Thought: a\nAction:   ",
    "",
])
def test_parse_reply_rejects(text):
    with pytest.raises(PlannerFormatError):
        parse_reply(text)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.sampled_from(["Thought: t", "Action: Pick up x and place it in y", "Action: Finish[z]",
                                 "Observation: o", "noise"]), max_size=6))
def test_parser_never_yields_two_actions(lines):
    text = "\n".join(lines)
    try:
        _, action = parse_reply(text)
    except PlannerFormatError:
        assert sum(line.startswith("Action:") for line in lines) != 1 or not any(
            line.startswith("Thought:") for line in lines[: next(i for i, l in enumerate(lines) if l.startswith("Action:"))]
        )
        return
    assert isinstance(action, (Subtask, Finish))
    assert sum(line.startswith("Action:") for line in lines) == 1


def test_repair_retry_then_success():
    llm = mock_provider(["Thought: a\nAction: x\nAction: y", "Thought: ok\nAction: Finish[done]"])
    step = plan_step("do it", [], llm)
    assert step.action == Finish("done") and step.attempts == 2
    repair_request = llm.requests[1]
    assert repair_request.messages[-1].content == load_prompt("planner_repair")
    assert repair_request.messages[-2].content == "Thought: a\nAction: x\nAction: y"


def test_second_format_failure_raises():
    llm = mock_provider(["nonsense", "still nonsense"])
    with pytest.raises(PlannerFormatError):
        plan_step("do it", [], llm)


def test_history_is_serialized_in_order(actions):
    llm = mock_provider(["Thought: a\nAction: Get the names of objects present in the environment",
                         "Thought: b\nAction: Pick up the lemon and place it in the trash",
                         "Thought: c\nAction: Finish[ok]"])
    task = run_task("Move the lemon", EchoExecutor(actions), llm)
    assert task.finished and len(task.steps) == 3
    for k, req in enumerate(llm.requests):
        user = req.messages[-1].content
        assert user.startswith("User request: Move the lemon")
        if k:
            assert serialize_history(task.steps[:k]) in user
        else:
            assert "Previous steps" not in user
    assert task.steps[0].serialize() == (
        "Thought: a\nAction: Get the names of objects present in the environment\n"
        "Observation: did: Get the names of objects present in the environment"
    )


def test_finish_first_step_empty_trace(actions):
    llm = mock_provider(["Thought: nothing to do\nAction: Finish[none]"])
    task = run_task("Pick up the lemon and peach and place them in the trash.", EchoExecutor(actions), llm)
    assert task.trace == [] and task.finished
    instance = scenarios.load_corpus().get("e3t1-CAN")
    assert scenarios.oracle_judge(instance.instruction, instance.ground_truth, task.trace, 3) == 0


def test_max_steps_flags_unfinished(actions):
    llm = mock_provider([f"Thought: {i}\nAction: Get the names of objects present in the environment" for i in range(21)])
    task = run_task("loop", EchoExecutor(actions), llm, PlannerConfig(max_steps=20))
    assert task.unfinished and len(task.steps) == 20 and len(llm.requests) == 20
    assert llm.remaining == 1


def test_step_budget_counts_repairs(actions):
    replies = []
    for i in range(5):
        replies += ["bad", f"Thought: {i}\nAction: Get the names of objects present in the environment"]
    llm = mock_provider(replies)
    task = run_task("x", EchoExecutor(actions), llm, PlannerConfig(max_steps=5))
    assert task.planner_calls == 10 <= 5 * (1 + 1)


def test_format_error_aborts_task(actions):
    task = run_task("x", EchoExecutor(actions), mock_provider(["bad", "worse"]))
    assert task.aborted and "format" in task.error


def test_llm_error_aborts_task(actions):
    class Broken:
        model = "broken"

        def complete(self, request):
            raise StatusError("down", 503, attempts=3)

    task = run_task("x", EchoExecutor(actions), Broken())
    assert task.aborted and "down" in task.error


def test_latency_covers_model_time(actions):
    from tabletop_agent.llm import Metered

    llm = Metered(mock_provider(["Thought: a\nAction: Finish[x]"]))
    task = run_task("x", EchoExecutor(actions), llm)
    assert task.latency >= llm.total >= 0


def test_planner_step_serialize_without_observation():
    step = PlannerStep("t", Finish("a"))
    assert step.serialize() == "Thought: t\nAction: Finish[a]"


# -- tool-as-policy -----------------------------------------------------------------------


def test_tap_single_success(actions):
    llm = mock_provider([*scenarios.tap_pick_place("lemon")])
    observation = execute_subtask_tap("Pick up the lemon and place it in the trash", llm, actions)
    assert observation == "The lemon was successfully picked and placed in the trash."
    assert actions.world.objects["lemon"].contained_in == "trash"
    tool_messages = [m for m in llm.requests[-1].messages if m.role == "tool"]
    assert len(tool_messages) == 3
    assert json.loads(tool_messages[0].content) == {"ok": True, "message": "The lemon was successfully picked"}
    assert llm.requests[0].tools and len(llm.requests[0].tools) == 8


def test_tap_self_correction(actions):
    llm = mock_provider([scenarios.calls(("pick", {"object_name": "orange"})), *scenarios.tap_pick_place("lemon")])
    execute_subtask_tap("Pick up the lemon and place it in the trash", llm, actions)
    trace = actions.trace()
    assert trace[:2] == ['pick(object_name="orange") -> fail', 'pick(object_name="lemon") -> ok']
    first_tool = [m for m in llm.requests[1].messages if m.role == "tool"][0]
    assert json.loads(first_tool.content)["message"] == "Object orange not found"


def test_tap_truncation(actions):
    llm = mock_provider([scenarios.calls(("get_objects", {}))] * 16)
    observation = execute_subtask_tap("look around", llm, actions, TapConfig(max_tool_steps=15))
    assert observation.startswith("Tool loop truncated after 15 steps")
    assert len(actions.trace()) == 15 and llm.remaining == 1


def test_tap_multiple_calls_per_message(actions):
    llm = mock_provider([scenarios.calls(("get_objects", {}), ("get_reference_names", {})), "Seen."])
    execute_subtask_tap("look", llm, actions)
    assert [line.split("(")[0] for line in actions.trace()] == ["get_objects", "get_reference_names"]
    assert [m.tool_call_id for m in llm.requests[1].messages if m.role == "tool"] == ["call0", "call1"]


@pytest.mark.parametrize("call,fragment", [
    (tool_call("pick", "{not json", "c"), "not valid JSON"),
    (tool_call("fly", {}, "c"), "unknown tool fly"),
    (tool_call("pick", {"object": "lemon"}, "c"), "invalid arguments"),
])
def test_tap_bad_calls_are_fed_back(actions, call, fragment):
    llm = mock_provider([ChatMessage("assistant", tool_calls=(call,)), "gave up"])
    observation = execute_subtask_tap("Pick up the lemon", llm, actions)
    tool_msg = [m for m in llm.requests[1].messages if m.role == "tool"][0]
    assert fragment in json.loads(tool_msg.content)["message"]
    assert observation == "gave up"
    assert actions.trace() == []


def test_tap_transport_failure(actions):
    class Down:
        def dispatch(self, action, args):
            raise DispatchError("connection refused")

        def trace(self):
            return []

    llm = mock_provider([scenarios.calls(("get_objects", {}))])
    observation = execute_subtask_tap("look", llm, Down())
    assert observation.startswith("Executor error: could not reach the robot")


def test_tap_observation_never_empty(actions):
    llm = mock_provider([scenarios.calls(("pick", {"object_name": "lemon"})), ""])
    assert execute_subtask_tap("pick", llm, actions) == "The lemon was successfully picked"
    assert execute_subtask_tap("noop", mock_provider([""]), actions)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.sampled_from(["pick", "get_objects", "move_to_home_pos", "fly"]), min_size=1, max_size=20))
def test_tap_trace_grows_by_dispatched_calls(names):
    actions = LocalDispatcher(load_environment(3))
    script = [scenarios.calls((n, {"object_name": "lemon"} if n == "pick" else {})) for n in names] + ["end"]
    llm = mock_provider(script)
    execute_subtask_tap("go", llm, actions, TapConfig(max_tool_steps=15))
    dispatched = [n for n in names[:15] if n != "fly"]
    assert len(actions.trace()) == len(dispatched)


# -- code-as-policy -----------------------------------------------------------------------


def test_extract_fenced():
    assert extract_script("```python\npick(object_name=\"lemon\")\n```") == 'pick(object_name="lemon")\n'


def test_extract_with_prose():
    reply = 'Sure!\n```\nmove_to_home_pos()\n```\nThis moves home.\n```\nget_objects()\n```'
    assert extract_script(reply) == "move_to_home_pos()\n"


def test_extract_unfenced():
    assert extract_script('pick(object_name="lemon")') == 'pick(object_name="lemon")'


def test_extract_unterminated_fence():
    assert extract_script("```\nget_objects()\n") == "get_objects()\n"


def test_generate_script_prompt():
    llm = mock_provider(["```\nget_objects()\n```"])
    assert generate_script("look", llm) == "get_objects()\n"
    system = llm.requests[0].messages[0].content
    for name in ("pick(object_name: string)", "get_pose(reference: string, relation: string)", "Returns:"):
        assert name in system
    assert llm.requests[0].messages[1].content == "Subtask: look"


def test_generate_script_empty_reply():
    with pytest.raises(ExecutorError):
        generate_script("look", mock_provider(["   "]))
    assert execute_subtask_cap("look", mock_provider([""]), None).startswith("Executor error")


def test_cap_success_observation(actions):
    observation = execute_subtask_cap("lemon to trash", mock_provider([scenarios.cap_script("lemon")]), actions)
    assert "The lemon was successfully picked" in observation
    assert observation.endswith("Script completed successfully.")


def test_cap_parse_error_observation(actions):
    observation = execute_subtask_cap("x", mock_provider(["```\nwhile True: pick()\n```"]), actions)
    assert observation.startswith("Script parse error at line 1, column 1")
    assert actions.trace() == []


def test_cap_halt_observation(actions):
    reply = '```\npick(object_name="lemon")\npick(object_name="peach")\nmove_to_home_pos()\n```'
    observation = execute_subtask_cap("x", mock_provider([reply]), actions)
    lines = observation.splitlines()
    assert lines[0] == '1. pick(object_name="lemon"): The lemon was successfully picked'
    assert lines[1] == 'Execution halted at statement 2: pick(object_name="peach"): Gripper already holding lemon'
    assert len(actions.trace()) == 2


def test_cap_unfenced_single_expression(actions):
    observation = execute_subtask_cap("x", mock_provider(["get_reference_names()"]), actions)
    assert observation.startswith("1. get_reference_names(): Reference names: bowl, home, trash")


# -- scripted end-to-end -----------------------------------------------------------------


def test_scripted_run_cap():
    outcome = scenarios.canonical_cap()
    assert outcome.task.finished and outcome.score == 2
    manip = [line for line in outcome.task.trace if line.startswith(("pick", "place"))]
    assert manip[0] == 'pick(object_name="lemon") -> ok' and manip[2] == 'pick(object_name="peach") -> ok'


def test_scripted_run_tap():
    outcome = scenarios.canonical_tap()
    assert outcome.task.finished and outcome.score == 2
    assert outcome.executor.remaining == 0 and outcome.planner.remaining == 0


def test_scripted_orange_recovery():
    outcome = scenarios.tap_orange_recovery()
    assert outcome.score == 2
    assert outcome.task.trace[0] == 'pick(object_name="orange") -> fail'


def test_scripted_parse_error_recovery():
    outcome = scenarios.cap_parse_error_recovery()
    assert outcome.score == 2
    assert outcome.task.steps[0].observation.startswith("Script parse error at line 1")
    assert "Script parse error" in outcome.planner.requests[1].messages[-1].content
