import pytest
from hypothesis import strategies as st

from ragcritic.critique import Critique, ErrorLocation, Verdict

VALID_EXAMPLE = (
    "<verdict> INCORRECT </verdict> \n"
    "<location> information:Doc3 </location> \n"
    "<reason> The information does not ... </reason> \n"
    "<fix> search for additional evidence ... </fix>"
)

WORDS = "the capital river treaty doc evidence answer search year born paris london wrong city again check".split()


@pytest.fixture
def valid_example():
    return VALID_EXAMPLE


def sentences(min_size=0, max_size=12):
    return st.lists(st.sampled_from(WORDS), min_size=min_size, max_size=max_size).map(" ".join)


locations = st.one_of(
    st.none(),
    st.sampled_from(["think", "answer", "search", "information"]).map(ErrorLocation),
    st.integers(1, 9).map(lambda i: ErrorLocation("information", i)),
    st.integers(1, 4).map(lambda i: ErrorLocation("think", i)),
)

verdicts = st.sampled_from(list(Verdict))


@st.composite
def critiques(draw, valid=None):
    return Critique(
        verdict=draw(verdicts),
        location=draw(locations),
        reason=draw(sentences()),
        fix=draw(sentences()),
        raw_text="",
        format_valid=draw(st.booleans()) if valid is None else valid,
    )


# Acceptance criteria append (number, title, passed) here; printed after the run.
CRITERIA_RESULTS = []


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed in sorted(CRITERIA_RESULTS):
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {number:2d}. {title}")
