import pytest

from ragcritic.critique import Verdict
from ragcritic.gateway import ScriptedEndpoint
from ragcritic.refinement import judge_answer
from ragcritic.simulation import (
    CriticRates,
    GeneratorRates,
    generator_script,
    reference_supervision,
    run_simulation,
    simulate_critic,
    synthesize_population,
)
from ragcritic.trajectory import parse_trajectory


def test_population_is_seeded_and_labelled():
    a = synthesize_population(50, seed=3)
    assert a == synthesize_population(50, seed=3)
    assert a != synthesize_population(50, seed=4)
    for item in a:
        answer = parse_trajectory(item.record.trajectory_text).final_answer
        assert judge_answer(answer, item.record.gold_answers) is item.initially_correct
        assert len(parse_trajectory(item.record.trajectory_text).documents) == 5


def test_prefix_stability():
    # per-record streams: a larger population shares its prefix with a smaller one
    assert synthesize_population(30, 1)[:10] == synthesize_population(10, 1)


def test_oracle_critic_matches_truth():
    items = synthesize_population(40, seed=0)
    for item, c in zip(items, simulate_critic("oracle", None, 0, items)):
        assert c.format_valid
        assert c.verdict is (Verdict.CORRECT if item.initially_correct else Verdict.INCORRECT)


def test_malformed_rate():
    items = synthesize_population(200, seed=0)
    crits = simulate_critic("aggressive", CriticRates(0.1, 0.3, 0.0, malformed=1.0), 0, items)
    assert all(not c.format_valid and c.verdict is Verdict.UNSURE for c in crits)


def test_profiles_share_random_numbers():
    items = synthesize_population(500, seed=2)
    hi = simulate_critic("aggressive", CriticRates(0.2, 0.5), 9, items)
    lo = simulate_critic("aggressive", CriticRates(0.1, 0.3), 9, items)
    # lowering the flag rates only removes flags, never adds them
    for a, b in zip(hi, lo):
        if b.verdict is Verdict.INCORRECT:
            assert a.verdict is Verdict.INCORRECT


def test_unknown_profile_and_bad_rates():
    with pytest.raises(ValueError):
        simulate_critic("sloppy", None, 0, [])
    with pytest.raises(ValueError):
        CriticRates(false_alarm=1.5)


def test_generator_extremes():
    items = synthesize_population(100, seed=5)
    crits = simulate_critic("oracle", None, 0, items)
    perfect = ScriptedEndpoint(generator_script(items, 0, GeneratorRates(fix_success=1.0, break_rate=0.0)))
    outs = run_simulation(items, crits, perfect)
    assert all(o.final_correct for o in outs)
    silent = ScriptedEndpoint(generator_script(items, 0, GeneratorRates(no_answer=1.0)))
    outs = run_simulation(items, crits, silent)
    assert all(o.final_answer == o.initial_answer for o in outs)
    assert all(o.fallback_used for o in outs if o.triggered)


def test_reference_supervision_agrees_with_truth():
    items = synthesize_population(20, seed=0)
    for item, ref in zip(items, reference_supervision(items)):
        assert ref.verdict is (Verdict.CORRECT if item.initially_correct else Verdict.INCORRECT)
        assert ref.judge_samples[0].format_valid
