import itertools
from collections import Counter

import pytest
from hypothesis import given
from hypothesis import strategies as st

from tabletop_agent.corpus import load_corpus
from tabletop_agent.judge import (
    RUBRIC,
    JudgeError,
    JudgeVerdict,
    aggregate,
    judge_inputs,
    judge_once,
    judge_verdict,
    oracle_judge,
    oracle_verdict,
    parse_score,
)
from tabletop_agent.llm import mock_provider
from tabletop_agent.prompts import load_prompt

ALL_TRIPLES = list(itertools.product((0, 1, 2), repeat=3))


def expected_aggregate(triple):
    """Independent oracle: a value held by two or more judges, else the mean (1.0)."""
    for value in (0, 1, 2):
        if triple.count(value) >= 2:
            return value
    return 1.0


@pytest.fixture(scope="module")
def corpus():
    return load_corpus()


def test_triple_classes():
    kinds = Counter(len(set(t)) for t in ALL_TRIPLES)
    assert len(ALL_TRIPLES) == 27
    assert kinds == {1: 3, 2: 18, 3: 6}


@pytest.mark.parametrize("triple", ALL_TRIPLES)
def test_aggregate_table(triple):
    got = aggregate(triple)
    want = expected_aggregate(triple)
    assert got == want and type(got) is type(want)


@given(st.permutations([0, 1, 2]) | st.tuples(*[st.sampled_from((0, 1, 2))] * 3).map(list))
def test_aggregate_is_symmetric(scores):
    assert all(aggregate(p) == aggregate(scores) for p in itertools.permutations(scores))


@pytest.mark.parametrize("bad", [(0, 1), (0, 1, 3), (-1, 0, 0), (0, 0, 0, 0)])
def test_aggregate_rejects(bad):
    with pytest.raises(ValueError):
        aggregate(bad)


def test_verdict_majority_flag():
    assert JudgeVerdict((2, 2, 1), 2).has_majority
    assert not JudgeVerdict((0, 1, 2), 1.0).has_majority
    with pytest.raises(ValueError):
        JudgeVerdict((2, 2), 2)


def test_rubric_text():
    assert RUBRIC[2] == "The predicted solution fully solves all subtasks."
    assert all(RUBRIC[k] in load_prompt("judge") for k in RUBRIC)


@pytest.mark.parametrize("text,score", [
    ("The plan is good.\nScore: 2", 2),
    ("Score: 0", 0),
    ("reasoning\n**Score:** 1", 1),
    ("reasoning\nscore: 1.", 1),
    ("Score: 2\nbut actually more text", None),
    ("Score: 3", None),
    ("no score here", None),
    ("", None),
])
def test_parse_score(text, score):
    assert parse_score(text) == score


def test_judge_inputs_has_three_parts():
    text = judge_inputs("task", ["a() -> ok"], [])
    assert text.index("Task:") < text.index("Ground truth") < text.index("LLM-generated")
    assert "(no actions)" in text


def test_judge_reprompts_once():
    judge = mock_provider(["I think it's fine.", "Score: 1"])
    assert judge_once("t", ["x"], ["y"], judge) == 1
    assert judge.requests[1].messages[-1].content == load_prompt("judge_repair")


def test_judge_gives_up():
    with pytest.raises(JudgeError):
        judge_once("t", ["x"], ["y"], mock_provider(["hmm", "still hmm"]))


def test_three_mock_judges():
    judges = [mock_provider([f"Reason {i}.\nScore: {s}"], f"j{i}") for i, s in enumerate((2, 1, 2))]
    verdict = judge_verdict("t", ["x"], ["y"], judges)
    assert verdict.per_judge == (2, 1, 2) and verdict.final == 2
    assert verdict.rationales == ("Reason 0.", "Reason 1.", "Reason 2.")


def test_split_mock_judges():
    judges = [mock_provider([f"Score: {s}"]) for s in (0, 1, 2)]
    assert judge_verdict("t", [], [], judges).final == 1.0


def test_judge_count():
    with pytest.raises(ValueError):
        judge_verdict("t", [], [], [mock_provider(["Score: 1"])])


# -- oracle ------------------------------------------------------------------------


def _gt(corpus, iid):
    inst = corpus.get(iid)
    return inst, list(inst.ground_truth)


def test_oracle_reordered_unconstrained(corpus):
    inst, gt = _gt(corpus, "e3t1-CAN")
    swapped = gt[3:] + gt[:3]
    assert oracle_judge(inst.instruction, gt, swapped, 3) == 2


def test_oracle_reordered_constrained(corpus):
    inst, gt = _gt(corpus, "e3t3-CAN")
    swapped = gt[3:] + gt[:3]
    assert oracle_judge(inst.instruction, gt, swapped, 3, order_constrained=True) == 1


def test_oracle_partial(corpus):
    inst, gt = _gt(corpus, "e3t1-CAN")
    assert oracle_judge(inst.instruction, gt, gt[:3], 3) == 1


def test_oracle_home_only(corpus):
    inst, gt = _gt(corpus, "e3t1-CAN")
    assert oracle_judge(inst.instruction, gt, ["move_to_home_pos() -> ok"], 3) == 0
    assert oracle_judge(inst.instruction, gt, [], 3) == 0


def test_oracle_extraneous_move(corpus):
    inst, gt = _gt(corpus, "e3t1-CAN")
    extra = gt + ['pick(object_name="plum") -> ok', *gt[1:3]]
    assert oracle_judge(inst.instruction, gt, extra, 3) == 1


def test_oracle_ignores_failed_lines(corpus):
    inst, gt = _gt(corpus, "e3t1-CAN")
    noisy = ['pick(object_name="orange") -> fail', *gt]
    assert oracle_judge(inst.instruction, gt, noisy, 3) == 2


def test_oracle_position_tolerance(corpus):
    inst1, gt1 = _gt(corpus, "e1t3-CAN")
    nudged = [line.replace("0.35, 0.1, 0.06", "0.355, 0.1, 0.06") for line in gt1]
    assert oracle_judge(inst1.instruction, gt1, nudged, 1) == 2
    far = [line.replace("0.35, 0.1, 0.06", "0.37, 0.1, 0.06") for line in gt1]
    assert oracle_judge(inst1.instruction, gt1, far, 1) == 1


def test_oracle_verdict_shape(corpus):
    inst, gt = _gt(corpus, "e3t1-CAN")
    verdict = oracle_verdict(inst.instruction, gt, gt, 3)
    assert verdict.per_judge == (2, 2, 2) and verdict.final == 2
    assert verdict.rationales[0].startswith("oracle: ")
