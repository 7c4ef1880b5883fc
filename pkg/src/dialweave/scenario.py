"""Scenario sampling and prompt assembly for dialogue generation.

A scenario pins down what a generated call should be about: a handful of
referent/domain/slot/value triplets drawn from the ontology plus caller and
agent personas.  Prompts are built as named sections in a fixed order so
regeneration with different steering stays textually stable everywhere else.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

from .dialogue import AGENT, RoleMap, Turn, USER
from .errors import ContextOverflowError, ParameterError
from .ontology import Ontology, Triplet, sample_triplets
from .personas import agent_personality, caller_personalities

DEFAULT_TRIPLET_COUNT = 3
DEFAULT_CHARS_PER_TOKEN = 4.0

SECTION_ORDER = ("task", "personas", "story", "scenario", "history", "steering", "format")

_STORY_TASK = (
    "Write a short first-person account (4 to 6 sentences) of a car accident, "
    "told by the driver who will later call their insurance company about it. "
    "The account must stay consistent with every fact listed below, but should "
    "read as a natural story, not a list."
)

_DIALOGUE_TASK = (
    "Continue the phone conversation between {agent}, an insurance agent, and "
    "{user}, a caller reporting a car accident. Write the next few exchanges "
    "only; do not finish the whole call unless it has clearly reached its end. "
    "When the call is complete, the agent ends with a goodbye such as "
    '"have a good day".'
)

_FORMAT_RULES = (
    "Return the new exchanges only, as HTML: a single <div> element containing "
    "one <p> element per utterance. Each <p> must start with the speaker name "
    "followed by a colon and a space, e.g. <p>{agent}: Hello.</p> No other "
    "markup, no text outside the <p> elements."
)


@dataclass(frozen=True)
class ScenarioSpec:
    """What a generated dialogue must cover and who is speaking."""

    triplets: tuple[Triplet, ...]
    agent_persona: str
    caller_persona: str
    role_map: RoleMap

    def __post_init__(self):
        if isinstance(self.role_map, dict):
            object.__setattr__(self, "role_map", RoleMap.from_dict(self.role_map))

    def as_dict(self) -> dict:
        return {
            "triplets": [t.as_dict() for t in self.triplets],
            "agent_persona": self.agent_persona,
            "caller_persona": self.caller_persona,
            "role_map": self.role_map.as_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioSpec":
        return cls(
            triplets=tuple(
                Triplet(t["referent"], t["domain"], t["slot"], t["value"])
                for t in d["triplets"]
            ),
            agent_persona=d["agent_persona"],
            caller_persona=d["caller_persona"],
            role_map=RoleMap.from_dict(d.get("role_map", {})),
        )


def sample_scenario(
    ontology: Ontology,
    seed: int,
    count: int = DEFAULT_TRIPLET_COUNT,
    role_map: RoleMap | dict | None = None,
) -> ScenarioSpec:
    """Draw a reproducible scenario: ``count`` distinct triplets plus a
    caller persona, all from the one seeded generator.
    """
    rng = random.Random(seed)
    triplets = sample_triplets(ontology, rng, count)
    caller = rng.choice(caller_personalities())
    return ScenarioSpec(
        triplets=tuple(triplets),
        agent_persona=agent_personality(),
        caller_persona=caller,
        role_map=role_map or RoleMap(),
    )


@dataclass(frozen=True)
class PromptBundle:
    """Ordered named sections that render to one prompt string."""

    sections: tuple[tuple[str, str], ...]

    def __post_init__(self):
        order = {name: i for i, name in enumerate(SECTION_ORDER)}
        last = -1
        for name, _ in self.sections:
            if name not in order:
                raise ParameterError(f"unknown prompt section {name!r}")
            if order[name] <= last:
                raise ParameterError(f"prompt section {name!r} out of order or repeated")
            last = order[name]

    def section(self, name: str) -> str | None:
        for n, text in self.sections:
            if n == name:
                return text
        return None

    def render(self) -> str:
        return "\n\n".join(text for _, text in self.sections)

    def estimated_tokens(self, chars_per_token: float = DEFAULT_CHARS_PER_TOKEN) -> int:
        if chars_per_token <= 0:
            raise ParameterError("chars_per_token must be positive")
        return math.ceil(len(self.render()) / chars_per_token)


def _scenario_lines(spec: ScenarioSpec) -> str:
    lines = ["Facts the conversation must establish:"]
    for t in spec.triplets:
        lines.append(f"- {t.referent} / {t.domain} / {t.slot}: {t.value}")
    return "\n".join(lines)


def _persona_lines(spec: ScenarioSpec) -> str:
    agent = spec.role_map.agent_name
    user = spec.role_map.user_name
    return (
        f"{agent} (the agent) is {spec.agent_persona}.\n"
        f"{user} (the caller) {spec.caller_persona}."
    )


def build_story_prompt(spec: ScenarioSpec) -> PromptBundle:
    return PromptBundle(
        sections=(
            ("task", _STORY_TASK),
            ("scenario", _scenario_lines(spec)),
        )
    )


def _history_lines(spec: ScenarioSpec, turns: list[Turn]) -> str:
    if not turns:
        return "Conversation so far: (the call is just starting)"
    lines = ["Conversation so far:"]
    for t in turns:
        lines.append(f"{spec.role_map.name_for(t.speaker)}: {t.text}")
    return "\n".join(lines)


def build_generation_prompt(
    spec: ScenarioSpec,
    story: str,
    turns: list[Turn],
    instruction: str | None = None,
    max_tokens: int | None = None,
    chars_per_token: float = DEFAULT_CHARS_PER_TOKEN,
) -> PromptBundle:
    """Prompt for the next subdialogue given the story and the accepted
    history.  ``instruction`` carries reviewer steering for regeneration.
    Raises ContextOverflowError when the estimated token count exceeds
    ``max_tokens``.
    """
    agent = spec.role_map.agent_name
    user = spec.role_map.user_name
    sections = [
        ("task", _DIALOGUE_TASK.format(agent=agent, user=user)),
        ("personas", _persona_lines(spec)),
        ("story", f"{user}'s account of the accident:\n{story}"),
        ("scenario", _scenario_lines(spec)),
        ("history", _history_lines(spec, turns)),
    ]
    if instruction:
        sections.append(("steering", f"Reviewer guidance for the next exchanges: {instruction}"))
    sections.append(("format", _FORMAT_RULES.format(agent=agent)))
    bundle = PromptBundle(sections=tuple(sections))
    if max_tokens is not None:
        estimate = bundle.estimated_tokens(chars_per_token)
        if estimate > max_tokens:
            raise ContextOverflowError(
                f"prompt estimated at {estimate} tokens exceeds limit {max_tokens}"
            )
    return bundle


def seed_turns(role_map: RoleMap) -> list[Turn]:
    """The fixed opening exchange every session starts from."""
    agent = role_map.agent_name
    user = role_map.user_name
    return [
        Turn(
            index=1,
            speaker=AGENT,
            text=f"Thank you for calling, this is {agent}. How may I help you today?",
        ),
        Turn(
            index=2,
            speaker=USER,
            text=(
                f"Hi {agent}, my name is {user}. I was just in a car accident "
                "and I need to file a claim."
            ),
        ),
    ]
