"""Consensus reference critiques from K sampled judge critiques.

Each trajectory is judged K times. Unparseable samples go through tag
recovery and, failing that, become an UNSURE placeholder. The modal verdict
(ties resolve to UNSURE) defines the candidate set, and the candidate with
the best quality score supplies location, reason and fix.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

from ragcritic.critique import (
    Critique,
    ErrorLocation,
    Verdict,
    fallback_critique,
    is_recoverable,
    parse_critique,
    parse_location,
)
from ragcritic.gateway import ChatExchange
from ragcritic.rewards import DEFAULT_GENERIC_PHRASES, is_degenerate_field
from ragcritic.text import content_tokens, tokenize, unique
from ragcritic.trajectory import QaRecord, Trajectory, locate_component

JUDGE_SYSTEM_PROMPT = """\
You are a careful critic of retrieval-augmented question answering.
You inspect a model's full reasoning trajectory: its <think> reasoning, its
<search> query, the <information> documents it retrieved, and its final
<answer>. You are also shown the reference answer.

Judge only from evidence you can point to in the trajectory and the reference.
- If the final answer agrees with the reference and is supported, it is CORRECT.
- If the final answer is wrong or unsupported, it is INCORRECT; name the first
  step where the trajectory went wrong.
- If the evidence is insufficient to decide, say UNSURE rather than guessing.
Never invent documents, facts, or steps that are not in the trajectory."""

JUDGE_INSTRUCTION_TEMPLATE = """\
Question:
{question}

Reference answer(s):
{gold}

Trajectory:
{trajectory}

Write your critique using exactly these four tags, once each, in this order,
and nothing outside them:
<verdict> CORRECT | INCORRECT | UNSURE </verdict>
<location> think | search | information:DocN | answer | none </location>
<reason> a specific explanation of what went wrong, citing the evidence </reason>
<fix> a concrete, actionable instruction for a new attempt </fix>"""


@dataclass(frozen=True)
class SupervisionConfig:
    k_samples: int = 5
    judge_temperature: float = 0.7
    quality_weights: tuple[float, ...] = (1.0, 1.0, 1.0, 1.0)
    keyword_limit: int = 8
    seed: int = 0
    min_field_tokens: int = 5
    generic_phrases: tuple[str, ...] = DEFAULT_GENERIC_PHRASES

    def __post_init__(self):
        if self.k_samples < 1:
            raise ValueError("k_samples must be >= 1")
        if self.keyword_limit < 1:
            raise ValueError("keyword_limit must be >= 1")
        if len(self.quality_weights) != 4 or min(self.quality_weights) < 0:
            raise ValueError("quality_weights needs four non-negative weights")


@dataclass(frozen=True)
class QualityScore:
    s_keyword: float
    s_reason: float
    s_fix: float
    s_location: float
    total: float


@dataclass
class SupervisionRecord:
    id: str
    verdict: Verdict
    location: ErrorLocation | None = None
    reason: str = ""
    fix: str = ""
    keywords: list[str] = field(default_factory=list)
    judge_samples: list[Critique] = field(default_factory=list)
    consensus_size: int = 0
    quality_score: float = 0.0
    selected_index: int | None = None

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "verdict": self.verdict.value,
            "location": str(self.location) if self.location else None,
            "reason": self.reason,
            "fix": self.fix,
            "keywords": list(self.keywords),
            "consensus_size": self.consensus_size,
            "quality_score": self.quality_score,
            "selected_index": self.selected_index,
            "judge_samples": [c.raw_text for c in self.judge_samples],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SupervisionRecord":
        verdict = Verdict.parse(obj.get("verdict") or "") or Verdict.UNSURE
        return cls(
            id=str(obj["id"]),
            verdict=verdict,
            location=parse_location(obj.get("location")),
            reason=obj.get("reason") or "",
            fix=obj.get("fix") or "",
            keywords=list(obj.get("keywords") or []),
            judge_samples=[judged_critique(raw) for raw in obj.get("judge_samples") or []],
            consensus_size=int(obj.get("consensus_size") or 0),
            quality_score=float(obj.get("quality_score") or 0.0),
            selected_index=obj.get("selected_index"),
        )


def build_judge_prompt(record: QaRecord) -> tuple[str, str]:
    user = JUDGE_INSTRUCTION_TEMPLATE.format(
        question=record.question,
        gold="\n".join(f"- {g}" for g in record.gold_answers),
        trajectory=record.trajectory_text,
    )
    return JUDGE_SYSTEM_PROMPT, user


def judged_critique(raw: str) -> Critique:
    """Strict parse, then tag recovery, then the UNSURE placeholder."""
    c = parse_critique(raw, strict=True)
    if c.format_valid:
        return c
    if is_recoverable(raw):
        return parse_critique(raw, strict=False)
    return fallback_critique(raw)


def is_fallback(c: Critique) -> bool:
    return not c.format_valid and not is_recoverable(c.raw_text)


def sample_judge_critiques(record: QaRecord, traj: Trajectory, cfg: SupervisionConfig, judge) -> list[Critique]:
    """Draw ``cfg.k_samples`` critiques from ``judge`` (anything with ``complete``).

    Transport errors propagate; a record never silently loses samples.
    """
    system, user = build_judge_prompt(record)
    out = []
    for i in range(cfg.k_samples):
        exchange = judge.complete(system, user, seed=cfg.seed + i)
        out.append(judged_critique(exchange.response_text))
    return out


def consensus_verdict(samples) -> Verdict:
    if not samples:
        raise ValueError("consensus needs at least one sample")
    counts = Counter(Verdict(getattr(s, "verdict", s)) for s in samples)
    top = max(counts.values())
    tied = [v for v, n in counts.items() if n == top]
    return tied[0] if len(tied) == 1 else Verdict.UNSURE


def extract_keywords(fix: str, gold_answers, traj: Trajectory, limit: int) -> list[str]:
    """Content terms of ``fix``, then gold-answer terms seen in retrieved documents."""
    doc_tokens = set(tokenize(" ".join(text for _, text in traj.documents)))
    gold_terms = [t for g in gold_answers for t in content_tokens(g) if t in doc_tokens]
    return unique(content_tokens(fix) + gold_terms)[:limit]


def recover_keywords(traj: Trajectory, question: str, location: ErrorLocation | None, limit: int) -> list[str]:
    """Question terms that also occur in the supporting evidence.

    Supporting evidence is the located document when the location names one,
    otherwise every information step.
    """
    docs = traj.documents
    if location is not None and location.loc_type == "information" and location.index is not None:
        docs = [d for d in docs if d[0] == location.index] or docs
    if docs:
        support = set(tokenize(" ".join(text for _, text in docs)))
    else:
        support = set(tokenize(" ".join(s.content for s in traj.steps if s.kind == "information")))
    return unique(t for t in content_tokens(question) if t in support)[:limit]


def score_quality(c: Critique, traj: Trajectory, gold, cfg: SupervisionConfig) -> QualityScore:
    s_location = 1.0 if c.location is not None and locate_component(traj, c.location) else 0.0
    reason_terms = content_tokens(c.reason)
    if reason_terms:
        seen = set(tokenize(traj.text()))
        s_reason = sum(t in seen for t in reason_terms) / len(reason_terms)
    else:
        s_reason = 0.0
    s_fix = 0.0 if is_degenerate_field(c.fix, cfg.min_field_tokens, cfg.generic_phrases) else 1.0
    n_kw = len(extract_keywords(c.fix, gold, traj, cfg.keyword_limit))
    s_keyword = min(1.0, n_kw / cfg.keyword_limit)
    w = cfg.quality_weights
    total = w[0] * s_keyword + w[1] * s_reason + w[2] * s_fix + w[3] * s_location
    return QualityScore(s_keyword, s_reason, s_fix, s_location, total)


def consolidate(record: QaRecord, traj: Trajectory, samples: list[Critique], cfg: SupervisionConfig) -> SupervisionRecord:
    """Vote, select and attach keywords for an already-sampled critique set."""
    verdict = consensus_verdict(samples)
    candidates = [i for i, c in enumerate(samples) if c.verdict is verdict]
    best, best_score = None, None
    for i in candidates:
        score = score_quality(samples[i], traj, record.gold_answers, cfg).total
        if best_score is None or score > best_score:
            best, best_score = i, score
    rec = SupervisionRecord(
        id=record.id,
        verdict=verdict,
        judge_samples=list(samples),
        consensus_size=len(candidates),
        selected_index=best,
    )
    if best is None:
        # tie broken to UNSURE with no UNSURE sample: nothing to select from
        return rec
    chosen = samples[best]
    rec.quality_score = best_score
    if is_fallback(chosen):
        return rec
    rec.location, rec.reason, rec.fix = chosen.location, chosen.reason, chosen.fix
    rec.keywords = extract_keywords(chosen.fix, record.gold_answers, traj, cfg.keyword_limit)
    if not rec.keywords:
        rec.keywords = recover_keywords(traj, record.question, chosen.location, cfg.keyword_limit)
    return rec


def build_supervision(record: QaRecord, traj: Trajectory, cfg: SupervisionConfig, judge) -> SupervisionRecord:
    samples = sample_judge_critiques(record, traj, cfg, judge)
    return consolidate(record, traj, samples, cfg)


class ReplayJudge:
    """Serves recorded judge transcripts keyed by (record id, sample index)."""

    def __init__(self, rows):
        self._responses = {(str(r["id"]), int(r["sample"])): r["response"] for r in rows}

    def for_record(self, record_id: str) -> "_RecordReplay":
        return _RecordReplay(self, record_id)

    def response(self, record_id: str, index: int) -> str:
        try:
            return self._responses[(record_id, index)]
        except KeyError:
            raise KeyError(f"no recorded judge sample {index} for record {record_id!r}") from None


class _RecordReplay:
    def __init__(self, replay: ReplayJudge, record_id: str):
        self._replay, self._id, self._next = replay, record_id, 0

    def complete(self, system: str, user: str, *, seed=None):
        text = self._replay.response(self._id, self._next)
        self._next += 1
        return ChatExchange(system, user, text, 0.0, 1)


def transcript_rows(rec: SupervisionRecord) -> list[dict]:
    return [{"id": rec.id, "sample": i, "response": c.raw_text} for i, c in enumerate(rec.judge_samples)]
