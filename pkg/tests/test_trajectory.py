import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from ragcritic.critique import ErrorLocation
from ragcritic.trajectory import (
    QaRecord,
    Trajectory,
    TrajectoryStep,
    load_qa_records,
    locate_component,
    parse_trajectory,
)

FIXTURE = "<think>plan</think><search>q</search><information>Doc 1: A. Doc 2: B.</information><answer>x</answer>"


def test_well_formed_fixture():
    t = parse_trajectory(FIXTURE)
    assert [s.kind for s in t.steps] == ["think", "search", "information", "answer"]
    assert t.steps[2].documents == ((1, "A."), (2, "B."))
    assert t.final_answer == "x"


def test_no_tags():
    t = parse_trajectory("no tags here")
    assert t.steps == ()
    assert t.final_answer is None


def test_last_answer_wins():
    t = parse_trajectory("<answer>a</answer> some text <answer>b</answer>")
    assert t.final_answer == "b"


def test_unclosed_tag_is_dropped():
    t = parse_trajectory("<think>never closed <answer>y</answer>")
    assert [s.kind for s in t.steps] == ["answer"]


def test_nested_tag_is_plain_text():
    t = parse_trajectory("<think>a <answer>z</answer> b</think>")
    assert len(t.steps) == 1
    assert t.steps[0].kind == "think"
    assert t.final_answer is None


def test_uppercase_tags_not_recognised():
    assert parse_trajectory("<ANSWER>x</ANSWER>").steps == ()


@pytest.mark.parametrize(
    "block, expected",
    [
        ("Doc 1: alpha Doc 3: gamma", ((1, "alpha"), (3, "gamma"))),
        ("Document 2 : beta Document 7: eta", ((2, "beta"), (7, "eta"))),
        ("Doc1:tight Doc  2 :  loose", ((1, "tight"), (2, "loose"))),
        ('Doc 1(Title: "Paris") capital Doc 2(Title: "Rome") city', ((1, '(Title: "Paris") capital'), (2, '(Title: "Rome") city'))),
        ("just prose", ()),
    ],
)
def test_document_markers(block, expected):
    step = parse_trajectory(f"<information>{block}</information>").steps[0]
    assert step.documents == expected


def test_first_marker_form_wins():
    step = parse_trajectory("<information>Doc 1: one Document 2: two</information>").steps[0]
    assert step.documents == ((1, "one Document 2: two"),)


def test_documents_only_on_information_steps():
    t = parse_trajectory("<think>Doc 1: not a document</think>")
    assert t.steps[0].documents == ()


@pytest.mark.parametrize(
    "loc, expected",
    [
        (ErrorLocation("information", 3), True),
        (ErrorLocation("information", 9), False),
        (ErrorLocation("answer"), True),
        (ErrorLocation("think", 1), True),
        (ErrorLocation("think", 2), False),
    ],
)
def test_locate_component(loc, expected):
    docs = " ".join(f"Doc {i}: d{i}" for i in range(1, 6))
    t = parse_trajectory(f"<think>a</think><information>{docs}</information><answer>x</answer>")
    assert locate_component(t, loc) is expected


def test_locate_missing_step_type():
    assert not locate_component(parse_trajectory("<answer>x</answer>"), ErrorLocation("search"))


step_text = st.text(alphabet=st.characters(blacklist_characters="<>"), max_size=30)
steps = st.lists(st.tuples(st.sampled_from(["think", "search", "information", "answer"]), step_text), max_size=8)


@given(steps)
def test_round_trip(pairs):
    raw = "".join(f"<{k}>{c}</{k}>" for k, c in pairs)
    first = parse_trajectory(raw)
    again = parse_trajectory(first.serialize())
    assert again == first
    assert [s.kind for s in first.steps] == [k for k, _ in pairs]


@given(st.text(max_size=200), st.text(alphabet=st.characters(blacklist_characters="<"), max_size=50))
def test_appending_plain_text_never_changes_steps(raw, suffix):
    assert parse_trajectory(raw + suffix).steps == parse_trajectory(raw).steps


@given(st.text(max_size=200))
def test_final_answer_absent_iff_no_answer_step(raw):
    t = parse_trajectory(raw)
    assert (t.final_answer is None) == (not any(s.kind == "answer" for s in t.steps))


def test_load_records(tmp_path):
    p = tmp_path / "qa.jsonl"
    rows = [
        {"id": "a", "question": "q?", "golden_answers": ["x"], "trajectory": FIXTURE, "source": "nq"},
        {"id": "b", "question": "r?", "golden_answers": ["y", "z"], "trajectory": ""},
    ]
    p.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
    recs = load_qa_records(p)
    assert recs[0].extra == {"source": "nq"}
    assert recs[1].gold_answers == ["y", "z"]
    assert recs[0].to_json()["source"] == "nq"


def test_duplicate_ids_rejected(tmp_path):
    p = tmp_path / "qa.jsonl"
    row = json.dumps({"id": "a", "question": "q", "golden_answers": ["x"], "trajectory": ""})
    p.write_text(row + "\n" + row + "\n")
    with pytest.raises(ValueError, match="duplicate"):
        load_qa_records(p)


def test_empty_gold_rejected():
    with pytest.raises(ValueError):
        QaRecord("a", "q", [], "")


def test_serialize_is_canonical():
    t = Trajectory((TrajectoryStep("think", "p"), TrajectoryStep("answer", "x")))
    assert t.serialize() == "<think>p</think><answer>x</answer>"
