import pytest
from hypothesis import given, strategies as st

from dialweave.dialogue import (
    AGENT,
    RoleMap,
    SpanAnnotation,
    Subdialogue,
    Turn,
    USER,
    detect_termination,
    parse_subdialogue,
    render_subdialogue,
)
from dialweave.errors import ParameterError, ParseError

RM = RoleMap()  # Alice / Bob


def test_parse_basic():
    wire = "<div><p>Alice: How can I help?</p><p>Bob: I crashed my car.</p></div>"
    sub = parse_subdialogue(wire, RM)
    assert [t.speaker for t in sub.turns] == [AGENT, USER]
    assert sub.turns[0].text == "How can I help?"
    assert sub.turns[1].index == 2


def test_parse_tolerates_whitespace_between_elements():
    wire = "<div>\n  <p>Alice: Hello.</p>\n  <p>Bob: Hi.</p>\n</div>\n"
    sub = parse_subdialogue(wire, RM)
    assert len(sub.turns) == 2


@pytest.mark.parametrize(
    "wire",
    [
        "<p>Alice: no wrapper</p>",
        "<div><p>Alice: one</p></div><div><p>Bob: two</p></div>",
        "<div></div>",
        "<div>loose text<p>Alice: hi</p></div>",
        "<div><p>Alice: <b>nested</b> tags</p></div>",
        "<div><p>Alice hi, no colon marker</p></div>",
        "<div><p>Mallory: unknown speaker</p></div>",
        "<div><p>Alice: </p></div>",
        "<div><p>Alice: unclosed",
    ],
)
def test_parse_rejects_malformed(wire):
    with pytest.raises(ParseError):
        parse_subdialogue(wire, RM)


def test_render_round_trip_with_markup_chars():
    sub = Subdialogue(
        turns=(
            Turn(1, AGENT, "Is your speed < 30 & safe?"),
            Turn(2, USER, 'He said "yes" > twice.'),
        )
    )
    wire = render_subdialogue(sub, RM)
    again = parse_subdialogue(wire, RM)
    assert [t.text for t in again.turns] == [t.text for t in sub.turns]
    assert [t.speaker for t in again.turns] == [AGENT, USER]


# the wire format trims utterance whitespace, so only strip-stable texts
# can survive a round trip
_utterances = st.text(
    alphabet=st.characters(blacklist_categories=("Cs", "Cc")), min_size=1, max_size=60
).filter(lambda s: s.strip() == s and s)


@given(st.lists(st.tuples(st.sampled_from([AGENT, USER]), _utterances), min_size=1, max_size=6))
def test_render_parse_round_trip(pairs):
    sub = Subdialogue(
        turns=tuple(Turn(i + 1, spk, text) for i, (spk, text) in enumerate(pairs))
    )
    again = parse_subdialogue(render_subdialogue(sub, RM), RM)
    assert [(t.speaker, t.text) for t in again.turns] == [
        (t.speaker, t.text) for t in sub.turns
    ]


def test_custom_role_names():
    rm = RoleMap(agent_name="Dana", user_name="Lee")
    sub = parse_subdialogue("<div><p>Dana: Hello.</p><p>Lee: Hi.</p></div>", rm)
    assert [t.speaker for t in sub.turns] == [AGENT, USER]
    assert "Dana:" in render_subdialogue(sub, rm)


def test_detect_termination_cases():
    mk = lambda text, spk=AGENT: Subdialogue(turns=(Turn(1, spk, text),))
    assert detect_termination(mk("Take care and Have a Good Day!"))
    assert detect_termination(mk("Good bye now."))
    assert detect_termination(mk("goodbye"))
    assert not detect_termination(mk("The goods arrived by day."))
    assert detect_termination(mk("goodbye", spk=USER), speakers=(USER,))
    assert not detect_termination(mk("goodbye", spk=USER), speakers=(AGENT,))


def test_turn_validation():
    with pytest.raises(ParameterError):
        Turn(1, "narrator", "hi")
    with pytest.raises(ParameterError):
        Turn(1, AGENT, "   ")


def test_span_annotation_offsets():
    a = SpanAnnotation(1, 0, 4, "Caller", "D", "S", "dent")
    a.validate_offsets("dented fender")
    with pytest.raises(ParameterError):
        SpanAnnotation(1, 3, 3, "Caller", "D", "S", "x").validate_offsets("abcdef")
    with pytest.raises(ParameterError):
        SpanAnnotation(1, 2, 99, "Caller", "D", "S", "x").validate_offsets("abcdef")


def test_span_annotation_round_trip():
    a = SpanAnnotation(2, 1, 5, "Caller", "D", "S", "dent", resolution="concat",
                       resolution_target="front")
    assert SpanAnnotation.from_dict(a.as_dict()) == a
