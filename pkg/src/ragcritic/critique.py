"""The four-field structured critique: verdict, location, reason, fix."""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum

FIELDS = ("verdict", "location", "reason", "fix")
FALLBACK_REASON = "parse failure"

_TAGS = tuple(f"<{f}>" for f in FIELDS) + tuple(f"</{f}>" for f in FIELDS)
_STRICT_RE = re.compile(
    r"\A\s*"
    + r"\s*".join(rf"<{f}>(.*?)</{f}>" for f in FIELDS)
    + r"\s*\Z",
    re.DOTALL,
)
_FIELD_RE = {f: re.compile(rf"<{f}>(.*?)</{f}>", re.DOTALL) for f in FIELDS}
_LOCATION_RE = re.compile(
    r"""\A\s*(think|information|answer|search)
        (?:\s*:?\s*(?:doc(?:ument)?|step)?\s*(\d+))?
        \s*\Z""",
    re.IGNORECASE | re.VERBOSE,
)
_INDEXABLE = ("information", "think")


class Verdict(str, Enum):
    CORRECT = "CORRECT"
    INCORRECT = "INCORRECT"
    UNSURE = "UNSURE"

    @classmethod
    def parse(cls, text: str) -> "Verdict | None":
        try:
            return cls(text.strip().upper())
        except ValueError:
            return None


class UnencodableCritique(ValueError):
    """A field contains a tag sequence that would break the strict format."""


@dataclass(frozen=True)
class ErrorLocation:
    loc_type: str
    index: int | None = None

    def __post_init__(self):
        if self.loc_type not in ("think", "information", "answer", "search"):
            raise ValueError(f"unknown location type {self.loc_type!r}")
        if self.index is not None:
            if self.loc_type not in _INDEXABLE:
                raise ValueError(f"{self.loc_type} locations carry no index")
            if self.index < 1:
                raise ValueError("location index must be positive")

    def __str__(self) -> str:
        if self.index is None:
            return self.loc_type
        if self.loc_type == "information":
            return f"information:Doc{self.index}"
        return f"think:{self.index}"


def parse_location(text: str | None) -> ErrorLocation | None:
    """Read ``think``, ``answer``, ``search``, ``information`` or ``information:DocN``.

    Anything unrecognised, including ``none``, yields ``None``.
    """
    if not text:
        return None
    m = _LOCATION_RE.match(text)
    if not m:
        return None
    loc_type = m.group(1).lower()
    if m.group(2) is None:
        return ErrorLocation(loc_type)
    index = int(m.group(2))
    if loc_type not in _INDEXABLE or index < 1:
        return None
    return ErrorLocation(loc_type, index)


@dataclass(frozen=True)
class Critique:
    verdict: Verdict = Verdict.UNSURE
    location: ErrorLocation | None = None
    reason: str = ""
    fix: str = ""
    raw_text: str = ""
    format_valid: bool = False

    def populated_fields(self) -> int:
        return sum(
            [self.verdict is not Verdict.UNSURE, self.location is not None, bool(self.reason), bool(self.fix)]
        )


def validate_format(raw: str) -> bool:
    """Exactly one of each tag pair, in fixed order, nothing outside, a known verdict."""
    if any(raw.count(tag) != 1 for tag in _TAGS):
        return False
    m = _STRICT_RE.match(raw)
    return bool(m) and Verdict.parse(m.group(1)) is not None


def recover_fields(raw: str) -> dict[str, str]:
    """Content of the first occurrence of each tag pair, wherever it sits."""
    found = {}
    for name, rx in _FIELD_RE.items():
        m = rx.search(raw)
        if m:
            found[name] = m.group(1).strip()
    return found


def is_recoverable(raw: str) -> bool:
    """Whether recovery can salvage at least a parseable verdict."""
    return Verdict.parse(recover_fields(raw).get("verdict", "")) is not None


def parse_critique(raw: str, strict: bool = True) -> Critique:
    """Parse a critic/judge output.

    Strict mode returns an all-default critique unless ``raw`` passes
    :func:`validate_format`. Recovery mode (``strict=False``) takes whatever
    tag pairs it can find. In both modes ``format_valid`` reports the strict
    check on the original string.
    """
    valid = validate_format(raw)
    if strict and not valid:
        return Critique(raw_text=raw, format_valid=False)
    fields = recover_fields(raw)
    return Critique(
        verdict=Verdict.parse(fields.get("verdict", "")) or Verdict.UNSURE,
        location=parse_location(fields.get("location")),
        reason=fields.get("reason", ""),
        fix=fields.get("fix", ""),
        raw_text=raw,
        format_valid=valid,
    )


def fallback_critique(raw: str = "") -> Critique:
    return Critique(Verdict.UNSURE, None, FALLBACK_REASON, "", raw, False)


def serialize_critique(c: Critique) -> str:
    """Render the canonical strict form; raises :class:`UnencodableCritique`."""
    location = str(c.location) if c.location is not None else "none"
    parts = {
        "verdict": Verdict(c.verdict).value,
        "location": location,
        "reason": c.reason.strip(),
        "fix": c.fix.strip(),
    }
    for name in ("reason", "fix"):
        if any(tag in parts[name] for tag in _TAGS):
            raise UnencodableCritique(f"{name} contains a critique tag: {parts[name]!r}")
    return " ".join(f"<{k}> {v} </{k}>" for k, v in parts.items())
