import math
from dataclasses import replace

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import critiques, locations, sentences, verdicts
from ragcritic.critique import Critique, ErrorLocation, Verdict
from ragcritic.rewards import (
    RewardConfig,
    Reference,
    aux_penalty,
    aux_violations,
    compute_reward,
    exp_transform,
    fix_reward,
    format_reward,
    location_reward,
    reason_reward,
    verdict_reward,
)
from ragcritic.text import normalize_answer, token_f1

CFG = RewardConfig()
C, I, U = Verdict.CORRECT, Verdict.INCORRECT, Verdict.UNSURE

# Closed forms evaluated independently at 50 digits (mpmath).
EXP_HALF = 0.134470710684997
REASON_F1_08 = 0.309359658389660
FIX_S_075 = 0.272472883038294

GOOD_REASON = "The answer names the river from Doc 2 rather than Doc 3."
GOOD_FIX = "Re-read Doc 3 and report the river it names for the treaty."


@pytest.mark.parametrize(
    "pred, ref, expected",
    [
        ("Eiffel Tower", "eiffel tower", 1.0),
        ("the eiffel tower", "eiffel tower", 0.8),
        ("apple", "banana", 0.0),
        ("", "", 1.0),
        ("...", "x", 0.0),
        ("a a b", "a b b", 2 * 2 / 6),
    ],
)
def test_token_f1(pred, ref, expected):
    assert token_f1(pred, ref) == pytest.approx(expected, abs=1e-12)


def test_normalize_answer():
    assert normalize_answer("The  Eiffel-Tower!") == "eiffeltower"
    assert normalize_answer("An apple") == "apple"


def test_format_reward():
    assert format_reward(True, CFG) == 0.1
    assert format_reward(False, CFG) == -1.0
    assert format_reward(True, replace(CFG, alpha_format=0.0)) == 0.0


@pytest.mark.parametrize("gt, pred, expected", [(C, I, -1.0), (I, I, 0.5), (U, U, 0.0), (I, C, -0.3)])
def test_verdict_reward(gt, pred, expected):
    assert verdict_reward(gt, pred, CFG) == expected


def test_false_alarms_cost_more_than_misses():
    assert verdict_reward(C, I, CFG) < verdict_reward(I, C, CFG) < 0


@pytest.mark.parametrize(
    "pred, ref, expected",
    [
        (ErrorLocation("information", 3), ErrorLocation("information", 3), 0.5),
        (ErrorLocation("information", 2), ErrorLocation("information", 3), 0.3),
        (ErrorLocation("think"), ErrorLocation("answer"), 0.0),
        (ErrorLocation("answer"), ErrorLocation("answer"), 0.5),
        (ErrorLocation("information"), ErrorLocation("information", 3), 0.3),
        (None, ErrorLocation("answer"), 0.0),
        (None, None, 0.0),
    ],
)
def test_location_reward(pred, ref, expected):
    assert location_reward(pred, ref, CFG) == pytest.approx(expected, abs=1e-12)


def test_exp_transform_values():
    assert exp_transform(0.0, 0.5, 2.0) == 0.0
    assert exp_transform(1.0, 0.5, 2.0) == pytest.approx(0.5, abs=1e-9)
    assert exp_transform(0.5, 0.5, 2.0) == pytest.approx(EXP_HALF, abs=1e-12)
    with pytest.raises(ValueError):
        exp_transform(0.5, 0.5, 0.0)


def test_reason_reward():
    assert reason_reward(GOOD_REASON, GOOD_REASON, CFG) == pytest.approx(0.5, abs=1e-12)
    assert reason_reward("apple", "banana", CFG) == 0.0
    # overlap 2 of lengths 3 and 2 gives F1 = 0.8
    assert reason_reward("the eiffel tower", "eiffel tower", CFG) == pytest.approx(REASON_F1_08, abs=1e-12)


def test_fix_reward():
    kws = ["doc 3", "river"]
    assert fix_reward(GOOD_FIX, GOOD_FIX, kws, CFG) == pytest.approx(0.5, abs=1e-12)
    assert fix_reward("", GOOD_FIX, kws, CFG) == 0.0
    # F1 = 2*1/(2+2) = 0.5, coverage 1.0 -> s_fix = 0.75
    assert fix_reward("doc three", "doc four", ["doc"], CFG) == pytest.approx(FIX_S_075, abs=1e-12)


def test_empty_keywords_count_as_covered():
    assert fix_reward("x y", "x z", [], CFG) == fix_reward("x y", "x z", ["x"], CFG)


def _crit(verdict, location=None, reason=GOOD_REASON, fix=GOOD_FIX, valid=True):
    return Critique(verdict, location, reason, fix, format_valid=valid)


def test_aux_penalty_examples():
    assert aux_penalty(_crit(I, ErrorLocation("information", 3)), CFG) == 0.0
    one = _crit(C, fix="search again")
    assert aux_violations(one, CFG) == 1
    assert aux_penalty(one, CFG) == pytest.approx(-0.2)
    three = _crit(I, None, reason="", fix="search again")
    assert aux_violations(three, CFG) == 3
    assert aux_penalty(three, CFG) == -0.5


def test_generic_phrase_in_long_field():
    c = _crit(C, fix="You should be more careful when reading the retrieved documents.")
    assert aux_violations(c, CFG) == 1


def test_compute_reward_examples():
    ref = Reference(I, ErrorLocation("information", 3), GOOD_REASON, GOOD_FIX, ("doc 3",))
    for stage in (1, 2):
        bad = compute_reward(_crit(I, valid=False), ref, stage, CFG)
        assert bad.total == -1.0
        assert (bad.r_format, bad.r_verdict, bad.r_loc, bad.r_reason, bad.r_fix, bad.r_aux) == (0,) * 6
        assert not bad.gated
    miss = compute_reward(_crit(C), ref, 2, CFG)
    assert miss.total == pytest.approx(-0.2, abs=1e-12)
    assert (miss.r_loc, miss.r_reason, miss.r_fix, miss.r_aux) == (0,) * 4
    best = compute_reward(_crit(I, ErrorLocation("information", 3)), ref, 2, CFG)
    assert best.gated
    assert best.total == pytest.approx(2.1, abs=1e-12)


def test_stage1_keeps_aux_on_mismatch():
    ref = Reference(I, ErrorLocation("answer"), GOOD_REASON, GOOD_FIX)
    r = compute_reward(_crit(C, fix="try again"), ref, 1, CFG)
    assert r.total == pytest.approx(0.1 - 0.3 - 0.2)


def test_bad_stage():
    with pytest.raises(ValueError):
        compute_reward(_crit(C), Reference(C), 3, CFG)


@pytest.mark.parametrize("kwargs", [{"gamma_format": 0}, {"beta_fix": -1}, {"fix_alpha": 2}, {"aux_floor": 0.1}])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        RewardConfig(**kwargs)


references = st.builds(Reference, verdicts, locations, sentences(), sentences(),
                       st.lists(st.sampled_from(["doc", "river", "paris london"]), max_size=3).map(tuple))


@given(critiques(), references, st.sampled_from([1, 2]))
def test_total_is_bounded(c, ref, stage):
    r = compute_reward(c, ref, stage, CFG)
    # a valid critique can sink below -gamma: alpha + worst verdict + aux floor
    low = min(-CFG.gamma_format, CFG.alpha_format + min(map(min, CFG.verdict_matrix)) + CFG.aux_floor)
    assert low - 1e-12 <= r.total <= CFG.max_total + 1e-12
    assert r.r_aux <= 0


@given(critiques(valid=True), references, locations, sentences(), sentences())
def test_gating_law(c, ref, loc, reason, fix):
    if c.verdict is ref.verdict:
        return
    base = compute_reward(c, ref, 2, CFG).total
    assert compute_reward(replace(c, location=loc, reason=reason, fix=fix), ref, 2, CFG).total == base


@given(critiques(), references, st.sampled_from([1, 2]))
def test_deterministic(c, ref, stage):
    assert compute_reward(c, ref, stage, CFG) == compute_reward(c, ref, stage, CFG)


@given(st.floats(0.01, 10), st.floats(0, 1), st.floats(0, 1))
def test_exp_transform_monotone(beta, a, b):
    if a < b:
        assert exp_transform(a, 1.0, beta) < exp_transform(b, 1.0, beta)


@given(sentences(), sentences())
def test_token_f1_symmetric_and_bounded(a, b):
    f = token_f1(a, b)
    assert f == token_f1(b, a)
    assert 0.0 <= f <= 1.0
    assert (f == 1.0) == (sorted(a.split()) == sorted(b.split()))


def test_worst_case_below_gamma():
    r = compute_reward(_crit(I, reason="", fix=""), Reference(C), 1, CFG)
    assert r.total == pytest.approx(-1.4, abs=1e-12)


def test_exp_half_matches_closed_form():
    assert EXP_HALF == pytest.approx(0.5 * (math.e - 1) / (math.e**2 - 1), abs=1e-12)


@given(st.text(max_size=40))
def test_strip_punctuation_fast_path_agrees(text):
    import unicodedata

    from ragcritic.text import strip_punctuation

    slow = "".join(ch for ch in text if not unicodedata.category(ch).startswith("P"))
    assert strip_punctuation(text) == slow
    ascii_text = "".join(chr(i) for i in range(128))
    assert strip_punctuation(ascii_text) == "".join(ch for ch in ascii_text if not unicodedata.category(ch).startswith("P"))
