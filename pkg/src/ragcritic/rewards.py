"""Gated critique rewards: format, verdict, auxiliary penalty, and diagnostic terms."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

from ragcritic.critique import Critique, ErrorLocation, Verdict
from ragcritic.text import contains_phrase, token_f1, tokenize

LABELS = (Verdict.CORRECT, Verdict.INCORRECT, Verdict.UNSURE)

# rows: ground truth, cols: prediction, both in LABELS order
DEFAULT_VERDICT_MATRIX = (
    (0.7, -1.0, -0.1),
    (-0.3, 0.5, -0.1),
    (0.1, -0.2, 0.0),
)

DEFAULT_GENERIC_PHRASES = (
    "search again",
    "try again",
    "check the answer",
    "be more careful",
)


@dataclass(frozen=True)
class RewardConfig:
    alpha_format: float = 0.1
    gamma_format: float = 1.0
    verdict_matrix: tuple[tuple[float, ...], ...] = DEFAULT_VERDICT_MATRIX
    lambda_type: float = 0.3
    lambda_index: float = 0.2
    reason_max: float = 0.5
    beta_reason: float = 2.0
    fix_alpha: float = 0.5
    fix_max: float = 0.5
    beta_fix: float = 2.0
    aux_penalty_per_violation: float = -0.2
    aux_floor: float = -0.5
    min_field_tokens: int = 5
    generic_phrases: tuple[str, ...] = DEFAULT_GENERIC_PHRASES

    def __post_init__(self):
        if self.gamma_format <= 0:
            raise ValueError("gamma_format must be > 0")
        if self.beta_reason <= 0 or self.beta_fix <= 0:
            raise ValueError("beta_reason and beta_fix must be > 0")
        if not 0.0 <= self.fix_alpha <= 1.0:
            raise ValueError("fix_alpha must lie in [0, 1]")
        if min(self.lambda_type, self.lambda_index, self.reason_max, self.fix_max) < 0:
            raise ValueError("lambda and cap values must be >= 0")
        if not self.aux_floor <= self.aux_penalty_per_violation <= 0:
            raise ValueError("need aux_floor <= aux_penalty_per_violation <= 0")
        if self.min_field_tokens < 1:
            raise ValueError("min_field_tokens must be positive")
        if len(self.verdict_matrix) != 3 or any(len(row) != 3 for row in self.verdict_matrix):
            raise ValueError("verdict_matrix must be 3x3")

    @property
    def max_total(self) -> float:
        top = max(max(row) for row in self.verdict_matrix)
        return self.alpha_format + top + self.lambda_type + self.lambda_index + self.reason_max + self.fix_max

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class RewardBreakdown:
    r_format: float = 0.0
    r_verdict: float = 0.0
    r_loc: float = 0.0
    r_reason: float = 0.0
    r_fix: float = 0.0
    r_aux: float = 0.0
    gated: bool = False
    total: float = 0.0
    stage: int = 1
    s_reason: float = 0.0
    s_fix_f1: float = 0.0
    s_fix_kw: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Reference:
    """Reference critique fields the reward is computed against."""

    verdict: Verdict
    location: ErrorLocation | None = None
    reason: str = ""
    fix: str = ""
    keywords: tuple[str, ...] = field(default_factory=tuple)


def format_reward(format_valid: bool, cfg: RewardConfig) -> float:
    return cfg.alpha_format if format_valid else -cfg.gamma_format


def verdict_reward(gt: Verdict, pred: Verdict, cfg: RewardConfig) -> float:
    return cfg.verdict_matrix[LABELS.index(Verdict(gt))][LABELS.index(Verdict(pred))]


def location_reward(pred: ErrorLocation | None, ref: ErrorLocation | None, cfg: RewardConfig) -> float:
    if pred is None or ref is None or pred.loc_type != ref.loc_type:
        return 0.0
    # index credit only on a type match: both unindexed, or equal indices
    if pred.index == ref.index:
        return cfg.lambda_type + cfg.lambda_index
    return cfg.lambda_type


def exp_transform(s: float, r_max: float, beta: float) -> float:
    """Map a similarity in [0, 1] onto [0, r_max] with sharpness ``beta``."""
    if beta <= 0:
        raise ValueError("beta must be > 0")
    return r_max * math.expm1(beta * s) / math.expm1(beta)


def reason_reward(pred_reason: str, ref_reason: str, cfg: RewardConfig) -> float:
    return exp_transform(token_f1(pred_reason, ref_reason), cfg.reason_max, cfg.beta_reason)


def keyword_coverage(pred_fix: str, keywords) -> float:
    if not keywords:
        return 1.0
    tokens = tokenize(pred_fix)
    hits = sum(1 for kw in keywords if contains_phrase(tokens, kw))
    return hits / len(keywords)


def fix_score(pred_fix: str, ref_fix: str, keywords, cfg: RewardConfig) -> tuple[float, float, float]:
    """Return (mixed score, F1 term, keyword coverage term)."""
    f1 = token_f1(pred_fix, ref_fix)
    kw = keyword_coverage(pred_fix, keywords)
    return cfg.fix_alpha * f1 + (1.0 - cfg.fix_alpha) * kw, f1, kw


def fix_reward(pred_fix: str, ref_fix: str, keywords, cfg: RewardConfig) -> float:
    s_fix, _, _ = fix_score(pred_fix, ref_fix, keywords, cfg)
    return exp_transform(s_fix, cfg.fix_max, cfg.beta_fix)


def is_degenerate_field(text: str, min_tokens: int, generic_phrases) -> bool:
    """Too short, or built around a stock non-actionable phrase."""
    tokens = tokenize(text)
    if len(tokens) < min_tokens:
        return True
    return any(contains_phrase(tokens, p) for p in generic_phrases)


def aux_violations(c: Critique, cfg: RewardConfig) -> int:
    count = 0
    for text in (c.reason, c.fix):
        if is_degenerate_field(text, cfg.min_field_tokens, cfg.generic_phrases):
            count += 1
    if c.verdict is Verdict.INCORRECT and c.location is None:
        count += 1
    return count


def aux_penalty(c: Critique, cfg: RewardConfig) -> float:
    n = aux_violations(c, cfg)
    if n == 0:
        return 0.0
    return max(cfg.aux_floor, cfg.aux_penalty_per_violation * n)


def compute_reward(pred: Critique, ref, stage: int, cfg: RewardConfig) -> RewardBreakdown:
    """Two-stage gated reward for one critique against its reference.

    ``ref`` is anything exposing ``verdict``, ``location``, ``reason``,
    ``fix`` and ``keywords`` (a :class:`Reference` or a supervision record).
    Invalid format short-circuits to ``-gamma``. Stage 1 scores format,
    verdict and the auxiliary penalty; stage 2 adds location/reason/fix and
    keeps the auxiliary penalty only when the predicted verdict matches.
    """
    if stage not in (1, 2):
        raise ValueError(f"stage must be 1 or 2, got {stage!r}")
    if not pred.format_valid:
        return RewardBreakdown(total=-cfg.gamma_format, stage=stage)

    r_format = format_reward(True, cfg)
    r_verdict = verdict_reward(ref.verdict, pred.verdict, cfg)

    if stage == 1:
        r_aux = aux_penalty(pred, cfg)
        return RewardBreakdown(
            r_format=r_format,
            r_verdict=r_verdict,
            r_aux=r_aux,
            total=r_format + r_verdict + r_aux,
            stage=1,
        )

    if Verdict(pred.verdict) is not Verdict(ref.verdict):
        return RewardBreakdown(r_format=r_format, r_verdict=r_verdict, total=r_format + r_verdict, stage=2)

    r_loc = location_reward(pred.location, ref.location, cfg)
    s_reason = token_f1(pred.reason, ref.reason)
    r_reason = exp_transform(s_reason, cfg.reason_max, cfg.beta_reason)
    s_fix, s_f1, s_kw = fix_score(pred.fix, ref.fix, ref.keywords, cfg)
    r_fix = exp_transform(s_fix, cfg.fix_max, cfg.beta_fix)
    r_aux = aux_penalty(pred, cfg)
    return RewardBreakdown(
        r_format=r_format,
        r_verdict=r_verdict,
        r_loc=r_loc,
        r_reason=r_reason,
        r_fix=r_fix,
        r_aux=r_aux,
        gated=True,
        total=r_format + r_verdict + (r_loc + r_reason + r_fix) + r_aux,
        stage=2,
        s_reason=s_reason,
        s_fix_f1=s_f1,
        s_fix_kw=s_kw,
    )
