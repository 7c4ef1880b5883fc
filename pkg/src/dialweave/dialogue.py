"""Turns, subdialogues, and the HTML wire format.

A subdialogue travels as one ``<div>`` whose ``<p>`` children each hold
``Speaker: utterance``.  The canonical rendering puts one ``<p>`` per line
with no attributes; the parser tolerates arbitrary whitespace between tags
and rejects anything else loudly so malformed LM output reaches the
reviewer instead of being silently repaired.
"""

from __future__ import annotations

import html
from dataclasses import dataclass, field, replace
from html.parser import HTMLParser

from .errors import ParameterError, ParseError

AGENT = "agent"
USER = "user"

LM_PROPOSED = "lm_proposed"
HUMAN_EDITED = "human_edited"

DEFAULT_TERMINATION_SIGNALS = ("have a good day", "good bye", "goodbye")


@dataclass(frozen=True)
class Turn:
    index: int
    speaker: str
    text: str

    def __post_init__(self):
        if self.speaker not in (AGENT, USER):
            raise ParameterError(f"unknown speaker {self.speaker!r}")
        if not self.text.strip():
            raise ParameterError(f"turn {self.index} has empty text")

    def with_index(self, index: int) -> "Turn":
        return replace(self, index=index)

    def as_dict(self) -> dict:
        return {"index": self.index, "speaker": self.speaker, "text": self.text}

    @classmethod
    def from_dict(cls, d: dict) -> "Turn":
        return cls(index=d["index"], speaker=d["speaker"], text=d["text"])


@dataclass(frozen=True)
class RoleMap:
    """Display names for the two speaker roles, e.g. agent=Alice, user=Bob."""

    agent_name: str = "Alice"
    user_name: str = "Bob"

    def name_for(self, speaker: str) -> str:
        if speaker == AGENT:
            return self.agent_name
        if speaker == USER:
            return self.user_name
        raise ParameterError(f"role map has no entry for speaker {speaker!r}")

    def speaker_for(self, name: str) -> str | None:
        if name == self.agent_name:
            return AGENT
        if name == self.user_name:
            return USER
        return None

    def as_dict(self) -> dict:
        return {"agent_name": self.agent_name, "user_name": self.user_name}

    @classmethod
    def from_dict(cls, d: dict) -> "RoleMap":
        return cls(
            agent_name=d.get("agent_name", "Alice"),
            user_name=d.get("user_name", "Bob"),
        )


@dataclass(frozen=True)
class Subdialogue:
    turns: tuple[Turn, ...]
    provenance: str = LM_PROPOSED

    def __post_init__(self):
        if not self.turns:
            raise ParameterError("subdialogue must have at least one turn")


class _WireParser(HTMLParser):
    """Strict reader for the <div>/<p> wire format."""

    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.divs: list[list[str]] = []
        self._in_div = False
        self._in_p = False
        self._buf: list[str] = []

    def handle_starttag(self, tag, attrs):
        if tag == "div":
            if self._in_div or self._in_p:
                raise ParseError("nested <div> is not allowed", fragment=self.get_starttag_text() or "")
            self._in_div = True
            self.divs.append([])
        elif tag == "p":
            if not self._in_div or self._in_p:
                raise ParseError("<p> outside <div> or nested <p>", fragment=self.get_starttag_text() or "")
            self._in_p = True
            self._buf = []
        else:
            raise ParseError(f"unknown tag <{tag}>", fragment=self.get_starttag_text() or "")

    def handle_startendtag(self, tag, attrs):
        raise ParseError(f"self-closing tag <{tag}/> is not allowed")

    def handle_endtag(self, tag):
        if tag == "p":
            if not self._in_p:
                raise ParseError("stray </p>")
            self._in_p = False
            self.divs[-1].append("".join(self._buf))
        elif tag == "div":
            if self._in_p or not self._in_div:
                raise ParseError("unbalanced </div>")
            self._in_div = False
        else:
            raise ParseError(f"unknown closing tag </{tag}>")

    def handle_data(self, data):
        if self._in_p:
            self._buf.append(data)
        elif data.strip():
            raise ParseError("text outside <p>", fragment=data.strip()[:60])

    def close(self):
        super().close()
        if self._in_p or self._in_div:
            raise ParseError("unclosed tag at end of input")


def parse_subdialogue(wire: str, role_map: RoleMap | None = None) -> Subdialogue:
    """Parse the wire format into a Subdialogue.

    Each paragraph body is split on the first ``": "`` into a display name
    and the utterance; the role map turns names into speaker roles.
    Raises ParseError for any structural problem, carrying the fragment.
    """
    role_map = role_map or RoleMap()
    parser = _WireParser()
    try:
        parser.feed(wire)
        parser.close()
    except AssertionError as e:  # html.parser internal errors on garbage input
        raise ParseError("malformed markup", fragment=str(e)) from e
    if len(parser.divs) == 0:
        raise ParseError("missing <div> element")
    if len(parser.divs) > 1:
        raise ParseError(f"expected one <div>, found {len(parser.divs)}")
    paragraphs = parser.divs[0]
    if not paragraphs:
        raise ParseError("empty subdialogue: <div> has no <p> turns")
    turns = []
    for i, body in enumerate(paragraphs, start=1):
        body = body.strip()
        if ": " not in body:
            raise ParseError("turn without a speaker prefix", fragment=body[:80])
        name, text = body.split(": ", 1)
        speaker = role_map.speaker_for(name.strip())
        if speaker is None:
            raise ParseError(f"unknown speaker name {name.strip()!r}", fragment=body[:80])
        text = text.strip()
        if not text:
            raise ParseError("turn with empty utterance", fragment=body[:80])
        turns.append(Turn(index=i, speaker=speaker, text=text))
    return Subdialogue(turns=tuple(turns), provenance=LM_PROPOSED)


def render_subdialogue(s: Subdialogue, role_map: RoleMap | None = None) -> str:
    """Canonical wire form: one <p> per line; parse(render(s)) == s."""
    role_map = role_map or RoleMap()
    lines = ["<div>"]
    for turn in s.turns:
        name = role_map.name_for(turn.speaker)
        lines.append(f"<p>{html.escape(name)}: {html.escape(turn.text)}</p>")
    lines.append("</div>")
    return "\n".join(lines)


def detect_termination(
    s: Subdialogue,
    signals: tuple[str, ...] = DEFAULT_TERMINATION_SIGNALS,
    speakers: tuple[str, ...] | None = None,
) -> bool:
    """True iff any turn contains a termination phrase, case-insensitive.

    ``speakers`` restricts the check to the given roles (default: all turns).
    """
    if not signals:
        raise ParameterError("signal list must be non-empty")
    lowered = [sig.casefold() for sig in signals]
    for turn in s.turns:
        if speakers is not None and turn.speaker not in speakers:
            continue
        text = turn.text.casefold()
        if any(sig in text for sig in lowered):
            return True
    return False


@dataclass(frozen=True)
class SpanAnnotation:
    """A labeled character span in one turn, carrying its extracted triplet.

    Offsets are 0-based half-open into the turn text.  ``resolution`` is set
    when the annotation went through duplicate-conflict resolution.
    """

    turn_index: int
    char_start: int
    char_end: int
    referent: str
    domain: str
    slot: str
    value: str
    resolution: str | None = None
    resolution_target: str | None = None

    def validate_offsets(self, turn_text: str) -> None:
        if not (0 <= self.char_start < self.char_end <= len(turn_text)):
            raise ParameterError(
                f"span [{self.char_start},{self.char_end}) out of range for turn "
                f"{self.turn_index} (length {len(turn_text)})"
            )

    def as_dict(self) -> dict:
        d = {
            "turn_index": self.turn_index,
            "char_start": self.char_start,
            "char_end": self.char_end,
            "referent": self.referent,
            "domain": self.domain,
            "slot": self.slot,
            "value": self.value,
        }
        if self.resolution is not None:
            d["resolution"] = self.resolution
        if self.resolution_target is not None:
            d["resolution_target"] = self.resolution_target
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SpanAnnotation":
        return cls(
            turn_index=d["turn_index"],
            char_start=d["char_start"],
            char_end=d["char_end"],
            referent=d["referent"],
            domain=d["domain"],
            slot=d["slot"],
            value=d["value"],
            resolution=d.get("resolution"),
            resolution_target=d.get("resolution_target"),
        )
