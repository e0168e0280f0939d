"""Critique-gated answer refinement."""

from __future__ import annotations

from dataclasses import dataclass

from ragcritic.critique import Critique, UnencodableCritique, Verdict, parse_location, serialize_critique
from ragcritic.text import normalize_answer
from ragcritic.trajectory import QaRecord, Trajectory, parse_trajectory

CORRECTNESS_MODES = ("substring", "exact", "llm")

REFINE_SYSTEM_PROMPT = (
    "You answer questions by reasoning step by step and consulting a search engine when needed."
)

REFINE_TASK = """\
Answer the question below from scratch.
Reason inside <think> and </think>. If you need outside knowledge, issue a
query inside <search> and </search>; retrieved passages come back inside
<information> and </information>.

Question:
{question}

Previous trajectory:
{trajectory}

External critique:
{critique}
"""

# Wording is a fixed contract; tests check every line.
REFINE_RULES = """\
You are also given:
1. A previous trajectory from an earlier attempt.
2. An external critique of that previous trajectory.

Important rules:
- The previous trajectory may contain mistakes.
- The previous final answer may be wrong.
- The external critique may also be wrong.
- Do NOT blindly trust the previous trajectory.
- Do NOT blindly trust the critique.
- Use the critique only as a hint about possible problems to check.
- Re-solve the question with fresh reasoning instead of simply copying the previous answer.
- If the critique points out a possible issue, verify it by your own reasoning and search.
- If the critique is unsupported or mistaken, ignore it.
- Do not change your answer just because the critique suggests a change.
- Base your final answer on your own reasoning process and the retrieved information.
- You MUST end with exactly one final answer inside <answer> and </answer>."""

RULE_LINES = tuple(line for line in REFINE_RULES.splitlines() if line.strip())

_GRADER_SYSTEM = "You grade short answers against reference answers. Reply with a single word: yes or no."
_GRADER_TEMPLATE = """\
Reference answer(s):
{gold}

Predicted answer:
{pred}

Does the predicted answer match any reference answer in meaning?"""


@dataclass(frozen=True)
class InterventionPolicy:
    on_unsure: str = "keep"

    def __post_init__(self):
        if self.on_unsure not in ("keep", "refine"):
            raise ValueError(f"on_unsure must be 'keep' or 'refine', got {self.on_unsure!r}")


@dataclass(frozen=True)
class RefinementOutcome:
    id: str
    initial_answer: str
    initial_correct: bool
    verdict: Verdict
    triggered: bool
    final_answer: str
    final_correct: bool
    fallback_used: bool = False
    location: str | None = None

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "initial_answer": self.initial_answer,
            "initial_correct": self.initial_correct,
            "verdict": Verdict(self.verdict).value,
            "triggered": self.triggered,
            "final_answer": self.final_answer,
            "final_correct": self.final_correct,
            "fallback_used": self.fallback_used,
            "location": self.location,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "RefinementOutcome":
        verdict = Verdict.parse(str(obj["verdict"]))
        if verdict is None:
            raise ValueError(f"unknown verdict {obj['verdict']!r}")
        for key in ("initial_correct", "triggered", "final_correct"):
            if not isinstance(obj[key], bool):
                raise ValueError(f"{key} must be a boolean")
        loc = obj.get("location")
        return cls(
            id=str(obj["id"]),
            initial_answer=obj["initial_answer"],
            initial_correct=obj["initial_correct"],
            verdict=verdict,
            triggered=obj["triggered"],
            final_answer=obj["final_answer"],
            final_correct=obj["final_correct"],
            fallback_used=bool(obj.get("fallback_used", False)),
            location=str(parse_location(loc)) if parse_location(loc) else None,
        )


def decide_intervention(verdict: Verdict, policy: InterventionPolicy = InterventionPolicy()) -> bool:
    verdict = Verdict(verdict)
    if verdict is Verdict.CORRECT:
        return False
    if verdict is Verdict.INCORRECT:
        return True
    return policy.on_unsure == "refine"


def build_refinement_prompt(record: QaRecord, prev: Trajectory, critique: Critique) -> str:
    try:
        critique_text = serialize_critique(critique)
    except UnencodableCritique:
        critique_text = critique.raw_text
    trajectory = record.trajectory_text or prev.serialize()
    return REFINE_TASK.format(question=record.question, trajectory=trajectory, critique=critique_text) + "\n" + REFINE_RULES


def judge_answer(pred: str, gold, mode: str = "substring", judge=None) -> bool:
    """Is ``pred`` a correct answer for any of ``gold``?

    ``exact`` and ``substring`` compare normalized strings offline; ``llm``
    asks ``judge`` for a yes/no grade.
    """
    if mode not in CORRECTNESS_MODES:
        raise ValueError(f"unknown correctness mode {mode!r}")
    if not gold:
        raise ValueError("need at least one gold answer")
    if mode == "llm":
        if judge is None:
            raise ValueError("llm correctness mode needs a judge endpoint")
        if not pred.strip():
            return False
        user = _GRADER_TEMPLATE.format(gold="\n".join(f"- {g}" for g in gold), pred=pred)
        reply = judge.complete(_GRADER_SYSTEM, user).response_text
        words = normalize_answer(reply).split()
        return bool(words) and words[0] == "yes"
    p = normalize_answer(pred)
    if not p:
        return False
    for g in gold:
        g = normalize_answer(g)
        if not g:
            continue
        if mode == "exact" and p == g:
            return True
        if mode == "substring" and (g in p or p in g):
            return True
    return False


def refine(
    record: QaRecord,
    prev: Trajectory,
    critique: Critique,
    policy: InterventionPolicy,
    gen,
    *,
    mode: str = "substring",
    judge=None,
) -> RefinementOutcome:
    """One critique-gated refinement pass for a single record.

    Generator transport errors propagate so the caller can mark the record
    failed instead of quietly keeping the old answer.
    """
    initial = prev.final_answer or ""
    initial_correct = judge_answer(initial, record.gold_answers, mode, judge)
    triggered = decide_intervention(critique.verdict, policy)
    final, final_correct, fallback = initial, initial_correct, False
    if triggered:
        prompt = build_refinement_prompt(record, prev, critique)
        response = gen.complete(REFINE_SYSTEM_PROMPT, prompt).response_text
        answer = parse_trajectory(response).final_answer
        if answer is None:
            fallback = True
        else:
            final = answer
            final_correct = initial_correct if final == initial else judge_answer(final, record.gold_answers, mode, judge)
    return RefinementOutcome(
        id=record.id,
        initial_answer=initial,
        initial_correct=initial_correct,
        verdict=Verdict(critique.verdict),
        triggered=triggered,
        final_answer=final,
        final_correct=final_correct,
        fallback_used=fallback,
        location=str(critique.location) if critique.location else None,
    )
