"""Search-style RAG trajectories: tagged think/search/information/answer rollouts."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Iterable, Iterator

if TYPE_CHECKING:
    from ragcritic.critique import ErrorLocation

STEP_KINDS = ("think", "search", "information", "answer")

# Non-greedy and flat: an inner opening tag is just text of the outer span.
_TAG_RE = re.compile(r"<(think|search|information|answer)>(.*?)</\1>", re.DOTALL)
# "Doc 3:", "Document 3 :", and the "Doc 3(Title: ...)" variant retrievers emit.
_DOC_MARKER = r"\b{word}\s*(\d+)\s*(?::|(?=\())"
_DOC_WORDS = ("Document", "Doc")


@dataclass(frozen=True)
class TrajectoryStep:
    kind: str
    content: str
    documents: tuple[tuple[int, str], ...] = ()


@dataclass(frozen=True)
class Trajectory:
    steps: tuple[TrajectoryStep, ...] = ()

    @property
    def final_answer(self) -> str | None:
        for step in reversed(self.steps):
            if step.kind == "answer":
                return step.content
        return None

    @property
    def documents(self) -> list[tuple[int, str]]:
        """All retrieved documents across information steps, in source order."""
        return [doc for step in self.steps for doc in step.documents]

    def text(self) -> str:
        return "\n".join(step.content for step in self.steps)

    def serialize(self) -> str:
        return "".join(f"<{s.kind}>{s.content}</{s.kind}>" for s in self.steps)


@dataclass
class QaRecord:
    id: str
    question: str
    gold_answers: list[str]
    trajectory_text: str
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.gold_answers:
            raise ValueError(f"record {self.id!r} has no gold answers")

    def to_json(self) -> dict:
        out = dict(self.extra)
        out.update(
            id=self.id,
            question=self.question,
            golden_answers=list(self.gold_answers),
            trajectory=self.trajectory_text,
        )
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "QaRecord":
        known = {"id", "question", "golden_answers", "trajectory"}
        gold = obj["golden_answers"]
        if isinstance(gold, str):
            gold = [gold]
        return cls(
            id=str(obj["id"]),
            question=obj["question"],
            gold_answers=[str(g) for g in gold],
            trajectory_text=obj.get("trajectory", ""),
            extra={k: v for k, v in obj.items() if k not in known},
        )


def _split_documents(content: str) -> tuple[tuple[int, str], ...]:
    # The marker spelling found first in the block is the only one honoured.
    first = None
    for word in _DOC_WORDS:
        m = re.search(_DOC_MARKER.format(word=word), content)
        if m and (first is None or m.start() < first[1]):
            first = (word, m.start())
    if first is None:
        return ()
    marker = re.compile(_DOC_MARKER.format(word=first[0]))
    matches = list(marker.finditer(content))
    docs = []
    for i, m in enumerate(matches):
        end = matches[i + 1].start() if i + 1 < len(matches) else len(content)
        docs.append((int(m.group(1)), content[m.end() : end].strip()))
    return tuple(docs)


def parse_trajectory(raw: str) -> Trajectory:
    """Parse every well-formed tag pair of ``raw`` in source order.

    Never raises. Text outside recognised tags is ignored and unclosed tags
    are dropped, so malformed rollouts degrade to fewer steps rather than
    fabricated ones.
    """
    steps = []
    for m in _TAG_RE.finditer(raw):
        kind, content = m.group(1), m.group(2).strip()
        docs = _split_documents(content) if kind == "information" else ()
        steps.append(TrajectoryStep(kind, content, docs))
    return Trajectory(tuple(steps))


def locate_component(traj: Trajectory, loc: "ErrorLocation") -> bool:
    """Does the trajectory contain the component ``loc`` points at?"""
    of_type = [s for s in traj.steps if s.kind == loc.loc_type]
    if not of_type:
        return False
    if loc.index is None:
        return True
    if loc.loc_type == "information":
        return any(idx == loc.index for idx, _ in traj.documents)
    # think steps are indexed 1-based in order of appearance
    return loc.index <= len(of_type)


def read_jsonl(path: str | Path) -> Iterator[dict]:
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                yield json.loads(line)


def write_jsonl(path: str | Path, rows: Iterable[dict]) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False, sort_keys=False) + "\n")
            n += 1
    return n


def load_qa_records(path: str | Path) -> list[QaRecord]:
    records = [QaRecord.from_json(obj) for obj in read_jsonl(path)]
    seen = set()
    for r in records:
        if r.id in seen:
            raise ValueError(f"duplicate record id {r.id!r} in {path}")
        seen.add(r.id)
    return records
