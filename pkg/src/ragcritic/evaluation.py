"""Intervention-behaviour metrics over refinement outcomes.

Undefined rates (empty denominators) are ``None``, never zero.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

from ragcritic.critique import Verdict, parse_location
from ragcritic.refinement import RefinementOutcome
from ragcritic.rewards import LABELS

LOCATION_BUCKETS = ("think", "information", "answer", "none")


def _rate(num: int, den: int) -> float | None:
    return num / den if den else None


@dataclass
class VerdictConfusion:
    counts: list[list[int]] = field(default_factory=lambda: [[0] * 3 for _ in range(3)])
    labels: tuple[str, ...] = tuple(v.value for v in LABELS)

    @property
    def total(self) -> int:
        return sum(map(sum, self.counts))


@dataclass
class LocationConfusion:
    labels: tuple[str, ...] = LOCATION_BUCKETS
    counts: list[list[int]] = None

    def __post_init__(self):
        if self.counts is None:
            self.counts = [[0] * len(self.labels) for _ in self.labels]


@dataclass
class DetectionStats:
    tp: int
    fp: int
    fn: int
    tn: int
    precision: float | None
    recall: float | None
    false_alarm: float | None

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class RefinementStats:
    n: int
    initially_correct: int
    initially_wrong: int
    improved: int
    harmed: int
    triggered: int
    triggered_final_correct: int
    triggered_wrong: int
    triggered_corrected: int
    imp: float | None
    harm: float | None
    prec: float | None
    corr: float | None
    corr_per_trig: float | None
    corr_per_wrong: float | None

    def to_dict(self) -> dict:
        return asdict(self)


def verdict_ground_truth(outcome: RefinementOutcome, supervision=None) -> Verdict:
    """Reference verdict from answer correctness; UNSURE only via a supervision label."""
    if supervision is not None and Verdict(supervision.verdict) is Verdict.UNSURE:
        return Verdict.UNSURE
    return Verdict.CORRECT if outcome.initial_correct else Verdict.INCORRECT


def detection_stats(outcomes) -> DetectionStats:
    """Error detection with INCORRECT as the positive class; UNSURE counts as no flag."""
    tp = fp = fn = tn = 0
    for o in outcomes:
        flagged = Verdict(o.verdict) is Verdict.INCORRECT
        if o.initial_correct:
            fp += flagged
            tn += not flagged
        else:
            tp += flagged
            fn += not flagged
    return DetectionStats(tp, fp, fn, tn, _rate(tp, tp + fp), _rate(tp, tp + fn), _rate(fp, fp + tn))


def refinement_stats(outcomes) -> RefinementStats:
    n = correct = improved = harmed = trig = trig_ok = trig_wrong = trig_fixed = 0
    for o in outcomes:
        n += 1
        correct += o.initial_correct
        improved += (not o.initial_correct) and o.final_correct
        harmed += o.initial_correct and not o.final_correct
        if o.triggered:
            trig += 1
            trig_ok += o.final_correct
            if not o.initial_correct:
                trig_wrong += 1
                trig_fixed += o.final_correct
    wrong = n - correct
    return RefinementStats(
        n=n,
        initially_correct=correct,
        initially_wrong=wrong,
        improved=improved,
        harmed=harmed,
        triggered=trig,
        triggered_final_correct=trig_ok,
        triggered_wrong=trig_wrong,
        triggered_corrected=trig_fixed,
        imp=_rate(improved, n),
        harm=_rate(harmed, n),
        prec=_rate(trig_ok, trig),
        corr=_rate(trig_fixed, trig_wrong),
        corr_per_trig=_rate(trig_fixed, trig),
        corr_per_wrong=_rate(improved, wrong),
    )


def _bucket(location: str | None, labels) -> str:
    loc = parse_location(location) if isinstance(location, str) else location
    name = loc.loc_type if loc is not None else "none"
    # types outside the configured bucket set fold into "none"
    return name if name in labels else "none"


def confusion_matrices(outcomes, supervision: dict | None = None, buckets=LOCATION_BUCKETS):
    """Verdict matrix over every outcome; location matrix over agreed-INCORRECT ones.

    ``supervision`` maps record id to a record with ``verdict`` and
    ``location``. Without it the location matrix stays empty because no
    reference locations exist.
    """
    if "none" not in buckets:
        buckets = tuple(buckets) + ("none",)
    vc = VerdictConfusion()
    lc = LocationConfusion(labels=tuple(buckets))
    for o in outcomes:
        ref = supervision.get(o.id) if supervision else None
        gt = verdict_ground_truth(o, ref)
        pred = Verdict(o.verdict)
        vc.counts[LABELS.index(gt)][LABELS.index(pred)] += 1
        if ref is None:
            continue
        if Verdict(ref.verdict) is Verdict.INCORRECT and pred is Verdict.INCORRECT:
            row = lc.labels.index(_bucket(ref.location, lc.labels))
            col = lc.labels.index(_bucket(o.location, lc.labels))
            lc.counts[row][col] += 1
    return vc, lc


def cosine(a, b) -> float:
    na = math.sqrt(sum(x * x for x in a))
    nb = math.sqrt(sum(x * x for x in b))
    if na == 0 or nb == 0:
        return 0.0
    return sum(x * y for x, y in zip(a, b)) / (na * nb)


def sbert_similarity(pred: str, gold, embedder) -> float:
    """Best cosine similarity between ``pred`` and any gold answer embedding."""
    gold = list(gold)
    if not gold:
        raise ValueError("sbert_similarity needs at least one gold answer")
    vectors = embedder.embed([pred] + gold)
    return max(cosine(vectors[0], v) for v in vectors[1:])
