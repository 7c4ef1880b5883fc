"""A finished dialogue with its span annotations and derived belief states."""

from __future__ import annotations

from dataclasses import dataclass, field

from .dialogue import RoleMap, SpanAnnotation, Turn, USER
from .errors import InconsistencyError, ValidationError
from .state import (
    Resolution,
    SlotFill,
    StateSnapshot,
    TurnUpdate,
    build_state_change_examples as _build_examples,
    replay_cb_sequence,
)
from .textnorm import normalize_value


@dataclass(frozen=True)
class DialogueDocument:
    """An immutable dialogue plus annotations.

    Turn-level beliefs and cumulative states are derived, never stored, so a
    document can't drift out of sync with its annotations.
    """

    dialogue_id: str
    turns: tuple[Turn, ...]
    annotations: tuple[SpanAnnotation, ...] = ()
    role_map: RoleMap = field(default_factory=RoleMap)
    scenario: dict | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if isinstance(self.role_map, dict):
            object.__setattr__(self, "role_map", RoleMap.from_dict(self.role_map))
        problems = []
        for i, turn in enumerate(self.turns, start=1):
            if turn.index != i:
                problems.append(f"turn at position {i} has index {turn.index}")
        n = len(self.turns)
        for a in self.annotations:
            if not (1 <= a.turn_index <= n):
                problems.append(f"annotation references missing turn {a.turn_index}")
                continue
            try:
                a.validate_offsets(self.turns[a.turn_index - 1].text)
            except Exception as exc:
                problems.append(str(exc))
        if problems:
            raise ValidationError(f"invalid dialogue {self.dialogue_id!r}", problems)

    def user_turn_indices(self) -> list[int]:
        return [t.index for t in self.turns if t.speaker == USER]

    def anchor_turn(self, turn_index: int) -> int:
        """User turn whose belief update an annotation at ``turn_index``
        contributes to: the first user turn at or after it, falling back to
        the last user turn for annotations on a trailing agent turn.
        """
        user_turns = self.user_turn_indices()
        if not user_turns:
            raise InconsistencyError(
                f"dialogue {self.dialogue_id!r} has annotations but no user turns"
            )
        for u in user_turns:
            if u >= turn_index:
                return u
        return user_turns[-1]

    def tlbs(self) -> list[TurnUpdate]:
        """Turn-level beliefs derived from the annotations, in turn order.

        Only user turns carry updates; turns whose group is empty are
        omitted entirely.
        """
        grouped: dict[int, list[SpanAnnotation]] = {}
        for a in self.annotations:
            grouped.setdefault(self.anchor_turn(a.turn_index), []).append(a)
        out = []
        for anchor in sorted(grouped):
            fills: dict[str, dict[tuple[str, str], list[str]]] = {}
            ops: dict[tuple[str, str, str, str], Resolution] = {}
            for a in grouped[anchor]:
                fills.setdefault(a.referent, {}).setdefault((a.domain, a.slot), []).append(a.value)
                if a.resolution is not None:
                    key = (a.referent, a.domain, a.slot, normalize_value(a.value))
                    ops[key] = Resolution(a.resolution, a.resolution_target)
            entries = {
                r: tuple(SlotFill(d, s, tuple(vals)) for (d, s), vals in by_slot.items())
                for r, by_slot in fills.items()
            }
            out.append(TurnUpdate(turn_index=anchor, entries=entries, ops=ops))
        return out

    def cb_sequence(self) -> list[StateSnapshot]:
        return replay_cb_sequence(self.tlbs())

    def final_cb(self) -> StateSnapshot:
        seq = self.cb_sequence()
        return seq[-1] if seq else StateSnapshot.empty()

    def as_dict(self) -> dict:
        d = {
            "dialogue_id": self.dialogue_id,
            "role_map": self.role_map.as_dict(),
            "turns": [t.as_dict() for t in self.turns],
            "annotations": [a.as_dict() for a in self.annotations],
        }
        if self.scenario is not None:
            d["scenario"] = self.scenario
        if self.meta:
            d["meta"] = self.meta
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DialogueDocument":
        return cls(
            dialogue_id=d["dialogue_id"],
            turns=tuple(Turn.from_dict(t) for t in d["turns"]),
            annotations=tuple(SpanAnnotation.from_dict(a) for a in d.get("annotations", [])),
            role_map=RoleMap.from_dict(d.get("role_map", {})),
            scenario=d.get("scenario"),
            meta=d.get("meta", {}),
        )


def build_state_change_examples(
    doc: DialogueDocument, k: int, include_same: bool = True
) -> list[dict]:
    """Training records for a sequence-to-sequence state tracker; see
    ``state.build_state_change_examples`` for the record layout.
    """
    records = _build_examples(list(doc.turns), doc.tlbs(), k, include_same)
    for r in records:
        r["dialogue_id"] = doc.dialogue_id
    return records
