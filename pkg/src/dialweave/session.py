"""Collaborative dialogue-building sessions, event-sourced.

Every mutation validates against the current state, then appends one event
and folds it in.  Replaying the event log from scratch reconstructs the
session exactly; nothing in the fold touches a clock, a generator, or a
network, because model outputs are captured inside the events that recorded
them.

Lifecycle: story_pending -> drafting -> reviewing (per proposed subdialogue)
-> back to drafting on commit, until a committed subdialogue contains a
termination phrase by the agent, which moves the session to ending_proposed;
from there the reviewer completes the session or rejects the ending and
keeps going.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from datetime import datetime, timezone

from .backend import CompletionRequest, DEFAULT_BACKOFF, DEFAULT_RETRIES, complete
from .dialogue import (
    AGENT,
    DEFAULT_TERMINATION_SIGNALS,
    HUMAN_EDITED,
    LM_PROPOSED,
    SpanAnnotation,
    Subdialogue,
    Turn,
    detect_termination,
    parse_subdialogue,
)
from .document import DialogueDocument
from .errors import (
    GenerationError,
    InconsistencyError,
    NotFoundError,
    ParameterError,
    ParseError,
    StaleReferenceError,
    StateError,
    ValidationError,
)
from .ontology import Ontology, Triplet
from .scenario import ScenarioSpec, build_generation_prompt, build_story_prompt, seed_turns
from .state import CONCAT, KEEP, RESOLUTIONS, Resolution, StateSnapshot, UPDATE, merge_value
from .textnorm import normalize_value

STORY_PENDING = "story_pending"
DRAFTING = "drafting"
REVIEWING = "reviewing"
ENDING_PROPOSED = "ending_proposed"
COMPLETED = "completed"

PHASES = (STORY_PENDING, DRAFTING, REVIEWING, ENDING_PROPOSED, COMPLETED)

EV_CREATED = "created"
EV_STORY_DRAFTED = "story_drafted"
EV_PROPOSED = "subdialogue_proposed"
EV_TURN_EDITED = "turn_edited"
EV_TURN_DELETED = "turn_deleted"
EV_ANNOTATION_ADDED = "annotation_added"
EV_CONFLICT_DETECTED = "conflict_detected"
EV_CONFLICT_RESOLVED = "conflict_resolved"
EV_COMMITTED = "subdialogue_committed"
EV_ENDING_REJECTED = "ending_rejected"
EV_COMPLETED = "session_completed"

COUNTER_KEYS = (
    "proposals",
    "regenerations",
    "turns_edited",
    "turns_deleted",
    "annotations",
    "conflicts",
    "subdialogues_committed",
)


@dataclass(frozen=True)
class SessionEvent:
    seq: int
    kind: str
    payload: dict
    ts: str = ""

    def as_dict(self) -> dict:
        return {"seq": self.seq, "kind": self.kind, "payload": self.payload, "ts": self.ts}

    @classmethod
    def from_dict(cls, d: dict) -> "SessionEvent":
        return cls(seq=d["seq"], kind=d["kind"], payload=d["payload"], ts=d.get("ts", ""))


@dataclass(frozen=True)
class ConflictPrompt:
    """A duplicate-slot annotation waiting for the reviewer's decision."""

    conflict_id: str
    annotation: SpanAnnotation
    existing_values: tuple[str, ...]
    options: tuple[str, ...] = (UPDATE, KEEP, CONCAT)

    def as_dict(self) -> dict:
        return {
            "conflict_id": self.conflict_id,
            "annotation": self.annotation.as_dict(),
            "existing_values": list(self.existing_values),
            "options": list(self.options),
        }


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


class Session:
    """One dialogue under construction.  Mutations append events; state is
    the fold of those events.
    """

    def __init__(self):
        self.events: list[SessionEvent] = []
        self.session_id: str = ""
        self.scenario: ScenarioSpec | None = None
        self.termination_signals: tuple[str, ...] = DEFAULT_TERMINATION_SIGNALS
        self.phase: str = STORY_PENDING
        self.story: str = ""
        self.committed: list[Turn] = []
        self.draft: list[Turn] = []
        self.draft_provenance: list[str] = []
        self.annotations: list[SpanAnnotation] = []
        self.pending_conflict: ConflictPrompt | None = None
        self.counters: dict[str, int] = {k: 0 for k in COUNTER_KEYS}
        # Running cumulative state, fed by annotations in acceptance order.
        self._cb: dict = {}
        self.ontology: Ontology | None = None

    # -- construction ------------------------------------------------------

    @classmethod
    def create(
        cls,
        session_id: str,
        scenario: ScenarioSpec,
        ontology: Ontology | None = None,
        termination_signals: tuple[str, ...] = DEFAULT_TERMINATION_SIGNALS,
    ) -> "Session":
        if not session_id:
            raise ParameterError("session_id is empty")
        s = cls()
        s.ontology = ontology
        opening = seed_turns(scenario.role_map)
        s._record(
            EV_CREATED,
            {
                "session_id": session_id,
                "scenario": scenario.as_dict(),
                "termination_signals": list(termination_signals),
                "opening_turns": [t.as_dict() for t in opening],
            },
        )
        return s

    @classmethod
    def replay(cls, events: list[SessionEvent], ontology: Ontology | None = None) -> "Session":
        s = cls()
        s.ontology = ontology
        for ev in events:
            if ev.seq != len(s.events) + 1:
                raise ValidationError(
                    f"event log corrupt: expected seq {len(s.events) + 1}, found {ev.seq}"
                )
            s.events.append(ev)
            s._apply(ev)
        return s

    # -- event plumbing ----------------------------------------------------

    @property
    def version(self) -> int:
        return len(self.events)

    def _record(self, kind: str, payload: dict) -> SessionEvent:
        ev = SessionEvent(seq=len(self.events) + 1, kind=kind, payload=payload, ts=_now())
        self.events.append(ev)
        self._apply(ev)
        return ev

    def _apply(self, ev: SessionEvent) -> None:
        p = ev.payload
        if ev.kind == EV_CREATED:
            self.session_id = p["session_id"]
            self.scenario = ScenarioSpec.from_dict(p["scenario"])
            self.termination_signals = tuple(p["termination_signals"])
            self.committed = [Turn.from_dict(t) for t in p["opening_turns"]]
            self.phase = STORY_PENDING
        elif ev.kind == EV_STORY_DRAFTED:
            self.story = p["story"]
            self.phase = DRAFTING
        elif ev.kind == EV_PROPOSED:
            start = len(self.committed) + 1
            self.draft = [
                Turn(index=start + i, speaker=t["speaker"], text=t["text"])
                for i, t in enumerate(p["turns"])
            ]
            self.draft_provenance = [LM_PROPOSED] * len(self.draft)
            self.phase = REVIEWING
            self.counters["proposals"] += 1
            if p.get("regenerated"):
                self.counters["regenerations"] += 1
        elif ev.kind == EV_TURN_EDITED:
            pos = p["index"] - len(self.committed) - 1
            self.draft[pos] = Turn(index=p["index"], speaker=self.draft[pos].speaker, text=p["text"])
            self.draft_provenance[pos] = HUMAN_EDITED
            self.counters["turns_edited"] += 1
        elif ev.kind == EV_TURN_DELETED:
            pos = p["index"] - len(self.committed) - 1
            del self.draft[pos]
            del self.draft_provenance[pos]
            self.draft = [t.with_index(len(self.committed) + 1 + i) for i, t in enumerate(self.draft)]
            self.annotations = [
                a if a.turn_index < p["index"]
                else SpanAnnotation(**{**a.as_dict(), "turn_index": a.turn_index - 1})
                for a in self.annotations
            ]
            self.counters["turns_deleted"] += 1
            if not self.draft:
                self.phase = DRAFTING
        elif ev.kind == EV_ANNOTATION_ADDED:
            a = SpanAnnotation.from_dict(p["annotation"])
            self.annotations.append(a)
            merge_value(self._cb, a.referent, a.domain, a.slot, a.value, None)
            self.counters["annotations"] += 1
        elif ev.kind == EV_CONFLICT_DETECTED:
            a = SpanAnnotation.from_dict(p["annotation"])
            existing = tuple(self._cb.get(a.referent, {}).get((a.domain, a.slot), ()))
            self.pending_conflict = ConflictPrompt(p["conflict_id"], a, existing)
            self.counters["conflicts"] += 1
        elif ev.kind == EV_CONFLICT_RESOLVED:
            prompt = self.pending_conflict
            a = SpanAnnotation.from_dict(
                {
                    **prompt.annotation.as_dict(),
                    "resolution": p["resolution"],
                    **({"resolution_target": p["target"]} if p.get("target") else {}),
                }
            )
            self.annotations.append(a)
            merge_value(
                self._cb, a.referent, a.domain, a.slot, a.value,
                Resolution(p["resolution"], p.get("target")),
            )
            self.pending_conflict = None
            self.counters["annotations"] += 1
        elif ev.kind == EV_COMMITTED:
            self.committed.extend(self.draft)
            self.draft = []
            self.draft_provenance = []
            self.counters["subdialogues_committed"] += 1
            self.phase = ENDING_PROPOSED if p["ending_detected"] else DRAFTING
        elif ev.kind == EV_ENDING_REJECTED:
            self.phase = DRAFTING
        elif ev.kind == EV_COMPLETED:
            self.phase = COMPLETED
        else:
            raise ValidationError(f"unknown event kind {ev.kind!r}")

    # -- guards ------------------------------------------------------------

    def _require_phase(self, *phases: str) -> None:
        if self.phase not in phases:
            raise StateError(
                f"operation requires phase {' or '.join(phases)}, session is in {self.phase}"
            )

    def _require_no_conflict(self) -> None:
        if self.pending_conflict is not None:
            raise StateError(
                f"conflict {self.pending_conflict.conflict_id} must be resolved first"
            )

    def _draft_position(self, index: int) -> int:
        lo = len(self.committed) + 1
        hi = len(self.committed) + len(self.draft)
        if not (lo <= index <= hi):
            raise NotFoundError(
                f"turn {index} is not in the editable draft range {lo}..{hi}"
            )
        return index - lo

    def turn_text(self, index: int) -> str:
        if 1 <= index <= len(self.committed):
            return self.committed[index - 1].text
        if len(self.committed) < index <= len(self.committed) + len(self.draft):
            return self.draft[index - len(self.committed) - 1].text
        raise NotFoundError(f"turn {index} does not exist")

    def all_turns(self) -> list[Turn]:
        return list(self.committed) + list(self.draft)

    # -- operations --------------------------------------------------------

    def draft_story(self, story: str) -> None:
        self._require_phase(STORY_PENDING)
        if not story.strip():
            raise ParameterError("story is empty")
        self._record(EV_STORY_DRAFTED, {"story": story})

    def propose(
        self,
        subdialogue: Subdialogue,
        raw: str = "",
        instruction: str | None = None,
        regenerated: bool = False,
    ) -> None:
        if regenerated:
            self._require_phase(REVIEWING)
            if any(a.turn_index > len(self.committed) for a in self.annotations):
                raise StaleReferenceError(
                    "draft turns carry annotations; they would be orphaned by regeneration"
                )
        else:
            self._require_phase(DRAFTING)
        self._require_no_conflict()
        payload = {
            "turns": [{"speaker": t.speaker, "text": t.text} for t in subdialogue.turns],
            "raw": raw,
            "regenerated": regenerated,
        }
        if instruction:
            payload["instruction"] = instruction
        self._record(EV_PROPOSED, payload)

    def edit_turn(self, index: int, text: str) -> None:
        self._require_phase(REVIEWING)
        self._require_no_conflict()
        self._draft_position(index)
        if not text.strip():
            raise ParameterError("edited turn text is empty")
        if any(a.turn_index == index for a in self.annotations):
            raise StaleReferenceError(f"turn {index} has annotations; edits would orphan them")
        self._record(EV_TURN_EDITED, {"index": index, "text": text})

    def delete_turn(self, index: int) -> None:
        self._require_phase(REVIEWING)
        self._require_no_conflict()
        self._draft_position(index)
        if any(a.turn_index == index for a in self.annotations):
            raise StaleReferenceError(f"turn {index} has annotations; delete them first")
        self._record(EV_TURN_DELETED, {"index": index})

    def annotate(self, annotation: SpanAnnotation) -> ConflictPrompt | None:
        """Accept a span annotation, or surface a conflict to resolve.

        Returns None when the annotation was recorded, or the pending
        ConflictPrompt when the slot already holds a different value.
        """
        self._require_phase(REVIEWING, ENDING_PROPOSED)
        self._require_no_conflict()
        if annotation.resolution is not None:
            raise ParameterError("resolutions are set via the conflict flow, not directly")
        text = self.turn_text(annotation.turn_index)
        annotation.validate_offsets(text)
        if self.ontology is not None:
            problems = self.ontology.validate_triplet(
                Triplet(annotation.referent, annotation.domain, annotation.slot, annotation.value)
            )
            if problems:
                raise ValidationError("annotation does not fit the ontology", problems)
        existing = self._cb.get(annotation.referent, {}).get(
            (annotation.domain, annotation.slot)
        )
        norm = normalize_value(annotation.value)
        if existing and all(normalize_value(v) != norm for v in existing):
            conflict_id = f"c{self.counters['conflicts'] + 1}"
            self._record(
                EV_CONFLICT_DETECTED,
                {"conflict_id": conflict_id, "annotation": annotation.as_dict()},
            )
            return self.pending_conflict
        self._record(EV_ANNOTATION_ADDED, {"annotation": annotation.as_dict()})
        return None

    def resolve_conflict(self, conflict_id: str, resolution: str, target: str | None = None) -> None:
        if self.pending_conflict is None:
            raise StateError("no conflict is pending")
        if self.pending_conflict.conflict_id != conflict_id:
            raise NotFoundError(f"conflict {conflict_id!r} is not the pending one")
        if resolution not in RESOLUTIONS:
            raise ParameterError(f"resolution must be one of {RESOLUTIONS}, got {resolution!r}")
        if target is not None:
            existing = self.pending_conflict.existing_values
            if all(normalize_value(v) != normalize_value(target) for v in existing):
                raise InconsistencyError(
                    f"target {target!r} is not among the existing values {list(existing)}"
                )
        payload = {"conflict_id": conflict_id, "resolution": resolution}
        if target is not None:
            payload["target"] = target
        self._record(EV_CONFLICT_RESOLVED, payload)

    def commit(self) -> None:
        self._require_phase(REVIEWING)
        self._require_no_conflict()
        if not self.draft:
            raise StateError("nothing to commit; the draft is empty")
        sub = Subdialogue(turns=tuple(self.draft))
        ending = detect_termination(sub, self.termination_signals, speakers=(AGENT,))
        self._record(EV_COMMITTED, {"ending_detected": ending})

    def reject_ending(self) -> None:
        self._require_phase(ENDING_PROPOSED)
        self._record(EV_ENDING_REJECTED, {})

    def complete(self, force: bool = False) -> None:
        if self.phase == COMPLETED:
            raise StateError("session is already completed")
        if not force:
            self._require_phase(ENDING_PROPOSED)
        self._require_no_conflict()
        self._record(EV_COMPLETED, {"forced": force})

    # -- views ---------------------------------------------------------------

    def state(self) -> StateSnapshot:
        """Running cumulative state built from annotations in event order."""
        pruned = {
            r: {key: tuple(vals) for key, vals in fills.items() if vals}
            for r, fills in self._cb.items()
        }
        return StateSnapshot(pruned, as_of_turn=len(self.committed))

    def to_document(self) -> DialogueDocument:
        """The dialogue as committed so far; draft turns and their
        annotations stay out until committed.
        """
        n = len(self.committed)
        return DialogueDocument(
            dialogue_id=self.session_id,
            turns=tuple(self.committed),
            annotations=tuple(a for a in self.annotations if a.turn_index <= n),
            role_map=self.scenario.role_map,
            scenario=self.scenario.as_dict(),
            meta={"workflow": dict(self.counters), "story": self.story},
        )

    def view(self) -> dict:
        """JSON-friendly summary for the HTTP layer."""
        return {
            "session_id": self.session_id,
            "phase": self.phase,
            "version": self.version,
            "story": self.story,
            "scenario": self.scenario.as_dict() if self.scenario else None,
            "turns": [
                {**t.as_dict(), "committed": True} for t in self.committed
            ] + [
                {**t.as_dict(), "committed": False, "provenance": self.draft_provenance[i]}
                for i, t in enumerate(self.draft)
            ],
            "annotations": [a.as_dict() for a in self.annotations],
            "pending_conflict": (
                self.pending_conflict.as_dict() if self.pending_conflict else None
            ),
            "counters": dict(self.counters),
        }

    # -- snapshot support ----------------------------------------------------

    def state_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "scenario": self.scenario.as_dict() if self.scenario else None,
            "termination_signals": list(self.termination_signals),
            "phase": self.phase,
            "story": self.story,
            "committed": [t.as_dict() for t in self.committed],
            "draft": [t.as_dict() for t in self.draft],
            "draft_provenance": list(self.draft_provenance),
            "annotations": [a.as_dict() for a in self.annotations],
            "pending_conflict": (
                self.pending_conflict.as_dict() if self.pending_conflict else None
            ),
            "counters": dict(self.counters),
            "cb": {
                r: [{"domain": d, "slot": s, "values": list(vals)} for (d, s), vals in fills.items()]
                for r, fills in self._cb.items()
            },
            "version": self.version,
        }

    @classmethod
    def from_state_dict(cls, d: dict, events: list[SessionEvent],
                        ontology: Ontology | None = None) -> "Session":
        s = cls()
        s.ontology = ontology
        s.session_id = d["session_id"]
        s.scenario = ScenarioSpec.from_dict(d["scenario"]) if d.get("scenario") else None
        s.termination_signals = tuple(d["termination_signals"])
        s.phase = d["phase"]
        s.story = d["story"]
        s.committed = [Turn.from_dict(t) for t in d["committed"]]
        s.draft = [Turn.from_dict(t) for t in d["draft"]]
        s.draft_provenance = list(d["draft_provenance"])
        s.annotations = [SpanAnnotation.from_dict(a) for a in d["annotations"]]
        if d.get("pending_conflict"):
            pc = d["pending_conflict"]
            s.pending_conflict = ConflictPrompt(
                pc["conflict_id"],
                SpanAnnotation.from_dict(pc["annotation"]),
                tuple(pc["existing_values"]),
            )
        s.counters = dict(d["counters"])
        s._cb = {
            r: {(f["domain"], f["slot"]): list(f["values"]) for f in fills}
            for r, fills in d["cb"].items()
        }
        s.events = list(events[: d["version"]])
        for ev in events[d["version"]:]:
            s.events.append(ev)
            s._apply(ev)
        return s


# -- orchestration over a text-completion backend ----------------------------


def generate_story(
    session: Session,
    backend,
    retries: int = DEFAULT_RETRIES,
    backoff: float = DEFAULT_BACKOFF,
    audit_path=None,
    sleep=time.sleep,
) -> str:
    """Ask the backend for the accident story and record it."""
    prompt = build_story_prompt(session.scenario).render()
    result = complete(
        backend, CompletionRequest(prompt=prompt),
        retries=retries, backoff=backoff, audit_path=audit_path, sleep=sleep,
    )
    story = result.text.strip()
    session.draft_story(story)
    return story


def generate_subdialogue(
    session: Session,
    backend,
    instruction: str | None = None,
    regenerate: bool = False,
    max_tokens: int | None = None,
    parse_retries: int = 1,
    retries: int = DEFAULT_RETRIES,
    backoff: float = DEFAULT_BACKOFF,
    audit_path=None,
    sleep=time.sleep,
) -> Subdialogue:
    """Ask the backend for the next subdialogue and stage it for review.

    The generation prompt always builds on committed turns only, so a
    regeneration fully replaces the current draft.  Unparseable completions
    are retried ``parse_retries`` times before raising GenerationError.
    """
    if regenerate:
        session._require_phase(REVIEWING)
        if any(a.turn_index > len(session.committed) for a in session.annotations):
            raise StaleReferenceError(
                "draft turns carry annotations; they would be orphaned by regeneration"
            )
    else:
        session._require_phase(DRAFTING)
    prompt = build_generation_prompt(
        session.scenario,
        session.story,
        session.committed,
        instruction=instruction,
        max_tokens=max_tokens,
    ).render()
    request = CompletionRequest(prompt=prompt)
    last: ParseError | None = None
    for _ in range(parse_retries + 1):
        result = complete(
            backend, request,
            retries=retries, backoff=backoff, audit_path=audit_path, sleep=sleep,
        )
        try:
            sub = parse_subdialogue(result.text, session.scenario.role_map)
        except ParseError as exc:
            last = exc
            continue
        session.propose(sub, raw=result.text, instruction=instruction, regenerated=regenerate)
        return sub
    raise GenerationError(
        f"backend output was not a well-formed subdialogue: {last}",
        raw_text=last.fragment if last else "",
    )
