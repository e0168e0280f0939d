"""Seeded synthetic populations, scripted critics and a scripted generator.

Every record draws from its own ``random.Random`` stream keyed by
``(seed, purpose, index)``. Changing one rate therefore never reshuffles the
draws of another record or another purpose, which keeps comparisons across
critic profiles paired.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, replace

from ragcritic.critique import Critique, ErrorLocation, Verdict, parse_critique, serialize_critique
from ragcritic.refinement import InterventionPolicy, refine
from ragcritic.supervision import SupervisionRecord
from ragcritic.trajectory import QaRecord, parse_trajectory

N_DOCS = 5
_SYLLABLES = "ka lo mi ren tu vas zel qor bi na fen dor sil mo pra tek".split()
_TOPICS = "river treaty novel bridge opera comet festival dynasty".split()


@dataclass(frozen=True)
class CriticRates:
    false_alarm: float = 0.0  # P(INCORRECT | answer correct)
    detection: float = 1.0  # P(INCORRECT | answer wrong)
    unsure: float = 0.0  # P(UNSURE | not flagged)
    malformed: float = 0.0  # P(critique text breaks the strict format)

    def __post_init__(self):
        for name in ("false_alarm", "detection", "unsure", "malformed"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")


# Aggressive roughly follows an untrained critic (~13% false alarms, ~33%
# recall); conservative a trained one (~5%, ~18%).
PROFILES = {
    "aggressive": CriticRates(false_alarm=0.13, detection=0.33, unsure=0.0),
    "conservative": CriticRates(false_alarm=0.05, detection=0.18, unsure=0.10),
    "oracle": CriticRates(false_alarm=0.0, detection=1.0, unsure=0.0),
    "random": CriticRates(),
}


@dataclass(frozen=True)
class GeneratorRates:
    fix_success: float = 0.5  # P(correct answer | refining a wrong answer)
    break_rate: float = 0.2  # P(wrong answer | refining a correct answer)
    no_answer: float = 0.0  # P(response carries no answer span)


@dataclass(frozen=True)
class SyntheticItem:
    record: QaRecord
    initially_correct: bool
    gold_doc: int
    wrong_answer: str


def _rng(seed: int, purpose: str, i: int) -> random.Random:
    return random.Random(f"{seed}:{purpose}:{i}")


def _name(rng: random.Random) -> str:
    return "".join(rng.choice(_SYLLABLES) for _ in range(3)).capitalize()


def _distinct_names(rng, k):
    names = []
    while len(names) < k:
        cand = _name(rng)
        low = cand.lower()
        if all(low not in n.lower() and n.lower() not in low for n in names):
            names.append(cand)
    return names


def _trajectory(question: str, topic: str, docs, answer: str | None) -> str:
    info = " ".join(f"Doc {i}: {text}" for i, text in docs)
    parts = [
        f"<think>I need to find which {topic} the question refers to.</think>",
        f"<search>{question}</search>",
        f"<information>{info}</information>",
        "<think>The documents mention several candidates; I pick the best supported one.</think>",
    ]
    if answer is not None:
        parts.append(f"<answer>{answer}</answer>")
    return "\n".join(parts)


def synthesize_population(size: int, seed: int, base_accuracy: float = 0.6) -> list[SyntheticItem]:
    items = []
    for i in range(size):
        rng = _rng(seed, "population", i)
        topic = rng.choice(_TOPICS)
        gold, wrong, *others = _distinct_names(rng, 2 + N_DOCS)
        gold_doc = rng.randint(1, N_DOCS)
        docs = []
        for d in range(1, N_DOCS + 1):
            subject = gold if d == gold_doc else others[d - 1]
            docs.append((d, f"The {topic} named {subject} is described in record {i} of the archive."))
        correct = rng.random() < base_accuracy
        qid = f"sim-{i:05d}"
        question = f"Which {topic} is associated with archive record {i} ({qid})?"
        answer = gold if correct else wrong
        rec = QaRecord(qid, question, [gold], _trajectory(question, topic, docs, answer))
        items.append(SyntheticItem(rec, correct, gold_doc, wrong))
    return items


def _critique_for(verdict: Verdict, doc: int, topic_hint: str) -> Critique:
    if verdict is Verdict.INCORRECT:
        return Critique(
            Verdict.INCORRECT,
            ErrorLocation("information", doc),
            f"The answer relies on a {topic_hint} from the wrong document instead of Doc {doc}.",
            f"Re-read Doc {doc} and answer with the {topic_hint} it names for this archive record.",
            format_valid=True,
        )
    if verdict is Verdict.CORRECT:
        return Critique(
            Verdict.CORRECT,
            None,
            f"The final answer matches the {topic_hint} named in Doc {doc} of the evidence.",
            "Keep the current answer because the retrieved evidence already supports it.",
            format_valid=True,
        )
    return Critique(
        Verdict.UNSURE,
        None,
        f"The retrieved documents name several candidates and Doc {doc} is ambiguous.",
        f"Compare Doc {doc} against the question constraint before changing the answer.",
        format_valid=True,
    )


def _topic(item: SyntheticItem) -> str:
    return item.record.question.split()[1]


def simulate_critic(profile: str, rates: CriticRates | None, seed: int, items) -> list[Critique]:
    """Scripted critiques for ``items`` (``SyntheticItem`` with known correctness).

    ``aggressive`` and ``conservative`` differ only in their default rates;
    ``oracle`` always matches the truth; ``random`` picks verdicts uniformly.
    """
    if profile not in PROFILES:
        raise ValueError(f"unknown critic profile {profile!r}")
    rates = rates or PROFILES[profile]
    out = []
    for i, item in enumerate(items):
        rng = _rng(seed, "critic", i)
        u_flag, u_unsure, u_loc, u_bad = rng.random(), rng.random(), rng.random(), rng.random()
        wrong_doc = 1 + int(u_loc * N_DOCS)
        if profile == "oracle":
            verdict = Verdict.CORRECT if item.initially_correct else Verdict.INCORRECT
        elif profile == "random":
            verdict = (Verdict.CORRECT, Verdict.INCORRECT, Verdict.UNSURE)[min(2, int(u_flag * 3))]
        else:
            p_flag = rates.false_alarm if item.initially_correct else rates.detection
            if u_flag < p_flag:
                verdict = Verdict.INCORRECT
            elif u_unsure < rates.unsure:
                verdict = Verdict.UNSURE
            else:
                verdict = Verdict.CORRECT
        doc = item.gold_doc if profile == "oracle" or u_loc < 0.6 else wrong_doc
        c = _critique_for(verdict, doc, _topic(item))
        text = serialize_critique(c)
        if profile != "oracle" and u_bad < rates.malformed:
            text = f"Here is my critique: {text} Hope this helps."
        out.append(parse_critique(text, strict=True))
    return out


def reference_supervision(items) -> list[SupervisionRecord]:
    """Reference critiques that agree with the known truth."""
    refs = []
    for item in items:
        verdict = Verdict.CORRECT if item.initially_correct else Verdict.INCORRECT
        c = _critique_for(verdict, item.gold_doc, _topic(item))
        keywords = ["reread", f"doc {item.gold_doc}"] if verdict is Verdict.INCORRECT else []
        refs.append(
            SupervisionRecord(
                id=item.record.id,
                verdict=verdict,
                location=c.location,
                reason=c.reason,
                fix=c.fix,
                keywords=keywords,
                judge_samples=[replace(c, raw_text=serialize_critique(c))],
                consensus_size=1,
                selected_index=0,
            )
        )
    return refs


def generator_script(items, seed: int, rates: GeneratorRates) -> list[dict]:
    """Scripted generator responses keyed on each record's question line."""
    rows = []
    for i, item in enumerate(items):
        rng = _rng(seed, "generator", i)
        u_outcome, u_missing = rng.random(), rng.random()
        gold = item.record.gold_answers[0]
        if item.initially_correct:
            answer = item.wrong_answer if u_outcome < rates.break_rate else gold
        else:
            answer = gold if u_outcome < rates.fix_success else item.wrong_answer
        prev = parse_trajectory(item.record.trajectory_text)
        docs = [(d, t) for d, t in prev.documents]
        if u_missing < rates.no_answer:
            answer = None
        text = _trajectory(item.record.question, _topic(item), docs, answer)
        rows.append({"match": item.record.question, "response": text})
    return rows


def run_simulation(items, critiques, generator, policy: InterventionPolicy = InterventionPolicy()):
    """Refine every item with its critique against ``generator``; substring correctness."""
    outcomes = []
    for item, critique in zip(items, critiques):
        prev = parse_trajectory(item.record.trajectory_text)
        outcomes.append(refine(item.record, prev, critique, policy, generator, mode="substring"))
    return outcomes
