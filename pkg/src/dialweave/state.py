"""Entity-centric dialogue state: turn-level updates, cumulative beliefs,
the four-edit-operation command language, and the diff/apply pair.

State is a map from referent to active slot fills, where a fill may hold
several values at once.  Values are matched by normalized form (see
``textnorm``) but displayed with their original casing.  All values here are
immutable; every operation returns a new snapshot.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .dialogue import Turn, USER
from .errors import InconsistencyError, ParameterError, ValidationError
from .textnorm import normalize_value

UPDATE = "update"
KEEP = "keep"
CONCAT = "concat"
RESOLUTIONS = (UPDATE, KEEP, CONCAT)

OP_NEW = "new"
OP_SAME = "same"
OP_DELETE = "delete"
OP_CONCAT = "concat"


def _dedup(values) -> tuple[str, ...]:
    """Drop values that repeat an earlier one under normalization."""
    seen = set()
    out = []
    for v in values:
        n = normalize_value(v)
        if n not in seen:
            seen.add(n)
            out.append(v)
    return tuple(out)


@dataclass(frozen=True)
class SlotFill:
    domain: str
    slot: str
    values: tuple[str, ...]

    def __post_init__(self):
        if not self.values:
            raise ParameterError(f"slot fill {self.domain}/{self.slot} has no values")
        object.__setattr__(self, "values", _dedup(self.values))

    def as_dict(self) -> dict:
        return {"domain": self.domain, "slot": self.slot, "values": list(self.values)}


@dataclass(frozen=True)
class Resolution:
    """How an incoming duplicate value merges with an existing fill.

    ``target`` optionally names the prior value affected; without it,
    ``update`` replaces the whole value set and ``concat`` extends the most
    recent value.
    """

    kind: str
    target: str | None = None

    def __post_init__(self):
        if self.kind not in RESOLUTIONS:
            raise ParameterError(f"unknown resolution {self.kind!r}")


@dataclass(frozen=True)
class TurnUpdate:
    """Turn-level belief: referent-linked fills extracted from one exchange.

    ``ops`` maps (referent, domain, slot, normalized value) to the resolution
    the annotator chose for that incoming value, if any.
    """

    turn_index: int
    entries: dict[str, tuple[SlotFill, ...]] = field(default_factory=dict)
    ops: dict[tuple[str, str, str, str], Resolution] = field(default_factory=dict)

    def instances(self):
        """Flatten to (referent, domain, slot, value) tuples in stored order."""
        for referent, fills in self.entries.items():
            for f in fills:
                for v in f.values:
                    yield (referent, f.domain, f.slot, v)

    def as_dict(self) -> dict:
        d = {
            "turn_index": self.turn_index,
            "entries": {
                r: [f.as_dict() for f in fills] for r, fills in sorted(self.entries.items())
            },
        }
        if self.ops:
            d["ops"] = [
                {
                    "referent": r,
                    "domain": dom,
                    "slot": slot,
                    "value": val,
                    "resolution": res.kind,
                    **({"target": res.target} if res.target is not None else {}),
                }
                for (r, dom, slot, val), res in self.ops.items()
            ]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TurnUpdate":
        entries = {
            r: tuple(SlotFill(f["domain"], f["slot"], tuple(f["values"])) for f in fills)
            for r, fills in d.get("entries", {}).items()
        }
        ops = {}
        for o in d.get("ops", []):
            key = (o["referent"], o["domain"], o["slot"], normalize_value(o["value"]))
            ops[key] = Resolution(o["resolution"], o.get("target"))
        return cls(turn_index=d["turn_index"], entries=entries, ops=ops)


class StateSnapshot:
    """Cumulative belief state at a point in the dialogue.

    Internally a referent -> (domain, slot) -> value-tuple map.  Equality is
    order-insensitive on values and uses normalized forms.
    """

    __slots__ = ("entries", "as_of_turn")

    def __init__(self, entries: dict[str, dict[tuple[str, str], tuple[str, ...]]] | None = None,
                 as_of_turn: int = 0):
        frozen: dict[str, dict[tuple[str, str], tuple[str, ...]]] = {}
        for referent, fills in (entries or {}).items():
            kept = {key: _dedup(vals) for key, vals in fills.items() if vals}
            if kept:
                frozen[referent] = kept
        self.entries = frozen
        self.as_of_turn = as_of_turn

    @classmethod
    def empty(cls) -> "StateSnapshot":
        return cls({}, 0)

    def values_at(self, referent: str, domain: str, slot: str) -> tuple[str, ...] | None:
        return self.entries.get(referent, {}).get((domain, slot))

    def referents(self) -> list[str]:
        return sorted(self.entries.keys())

    def fills(self, referent: str) -> list[SlotFill]:
        out = []
        for (domain, slot), values in sorted(self.entries.get(referent, {}).items()):
            out.append(SlotFill(domain, slot, values))
        return out

    def instances(self):
        """Flatten to (referent, domain, slot, value) in deterministic order."""
        for referent in sorted(self.entries):
            for (domain, slot), values in sorted(self.entries[referent].items()):
                for v in values:
                    yield (referent, domain, slot, v)

    def active_slot_count(self) -> int:
        return sum(len(fills) for fills in self.entries.values())

    def has_multi_value(self) -> bool:
        return any(
            len(values) >= 2 for fills in self.entries.values() for values in fills.values()
        )

    def _canonical(self):
        return {
            r: {key: frozenset(normalize_value(v) for v in vals) for key, vals in fills.items()}
            for r, fills in self.entries.items()
        }

    def __eq__(self, other):
        if not isinstance(other, StateSnapshot):
            return NotImplemented
        return self._canonical() == other._canonical()

    def __hash__(self):
        raise TypeError("StateSnapshot is not hashable")

    def __repr__(self):
        parts = [f"{r}:{d}/{s}={v!r}" for (r, d, s, v) in self.instances()]
        return f"StateSnapshot(t={self.as_of_turn}, {', '.join(parts)})"

    def _mutable(self) -> dict:
        return {r: {key: list(vals) for key, vals in fills.items()} for r, fills in self.entries.items()}

    def as_dict(self) -> dict:
        return {
            "as_of_turn": self.as_of_turn,
            "entries": {
                r: [
                    {"domain": d, "slot": s, "values": list(vals)}
                    for (d, s), vals in sorted(self.entries[r].items())
                ]
                for r in sorted(self.entries)
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StateSnapshot":
        entries = {}
        for r, fills in d.get("entries", {}).items():
            entries[r] = {(f["domain"], f["slot"]): tuple(f["values"]) for f in fills}
        return cls(entries, d.get("as_of_turn", 0))


@dataclass(frozen=True)
class StateChangeCommand:
    """One edit operation on a referent-slot-value triplet.

    For ``concat``, ``value`` is the suffix and ``concat_with`` the existing
    value it extends; the result is ``"<concat_with> <value>"``.
    """

    op: str
    referent: str
    domain: str
    slot: str
    value: str
    concat_with: str | None = None

    def __post_init__(self):
        if self.op not in (OP_NEW, OP_SAME, OP_DELETE, OP_CONCAT):
            raise ParameterError(f"unknown edit operation {self.op!r}")
        if self.op == OP_CONCAT and self.concat_with is None:
            raise ValidationError("concat command requires concat_with")

    def as_dict(self) -> dict:
        d = {
            "op": self.op,
            "referent": self.referent,
            "domain": self.domain,
            "slot": self.slot,
            "value": self.value,
        }
        if self.concat_with is not None:
            d["concat_with"] = self.concat_with
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "StateChangeCommand":
        return cls(
            op=d["op"],
            referent=d["referent"],
            domain=d["domain"],
            slot=d["slot"],
            value=d["value"],
            concat_with=d.get("concat_with"),
        )


def _find_value(values: list[str], target: str) -> int:
    norm = normalize_value(target)
    for i, v in enumerate(values):
        if normalize_value(v) == norm:
            return i
    return -1


def merge_value(
    entries: dict,
    referent: str,
    domain: str,
    slot: str,
    value: str,
    resolution: Resolution | None = None,
) -> None:
    """Apply one incoming value to a mutable state builder.

    Without a resolution: insert, or no-op when the value is already present.
    With one: update replaces (the target or the whole set), keep appends,
    concat joins the target (default: most recent value) with the incoming
    value using a single space.
    """
    fills = entries.setdefault(referent, {})
    key = (domain, slot)
    existing = fills.get(key)
    triplet = f"({referent}, {domain}, {slot}, {value!r})"
    if resolution is None:
        if existing is None:
            fills[key] = [value]
        elif _find_value(existing, value) < 0:
            existing.append(value)
        return
    if existing is None:
        raise InconsistencyError(f"resolution {resolution.kind!r} for {triplet} but no prior fill exists")
    if resolution.kind == UPDATE:
        if resolution.target is None:
            fills[key] = [value]
        else:
            i = _find_value(existing, resolution.target)
            if i < 0:
                raise InconsistencyError(
                    f"update target {resolution.target!r} not present for {triplet}"
                )
            existing[i] = value
            fills[key] = list(_dedup(existing))
    elif resolution.kind == KEEP:
        if _find_value(existing, value) < 0:
            existing.append(value)
    elif resolution.kind == CONCAT:
        target = resolution.target if resolution.target is not None else existing[-1]
        i = _find_value(existing, target)
        if i < 0:
            raise InconsistencyError(f"concat target {target!r} not present for {triplet}")
        existing[i] = f"{existing[i]} {value}"
        fills[key] = list(_dedup(existing))


def _prune(entries: dict) -> dict:
    return {
        r: {key: tuple(vals) for key, vals in fills.items() if vals}
        for r, fills in entries.items()
        if any(vals for vals in fills.values())
    }


def apply_tlb(prev: StateSnapshot, tlb: TurnUpdate) -> StateSnapshot:
    """Fold one turn-level belief into the cumulative state."""
    if tlb.turn_index <= prev.as_of_turn:
        raise ParameterError(
            f"turn update {tlb.turn_index} is not after snapshot turn {prev.as_of_turn}"
        )
    entries = prev._mutable()
    for referent, fills in tlb.entries.items():
        for f in fills:
            for value in f.values:
                res = tlb.ops.get((referent, f.domain, f.slot, normalize_value(value)))
                merge_value(entries, referent, f.domain, f.slot, value, res)
    return StateSnapshot(_prune(entries), as_of_turn=tlb.turn_index)


def apply_state_change(prev: StateSnapshot, cmds: list[StateChangeCommand]) -> StateSnapshot:
    """Apply edit operations to a snapshot.

    ``same`` asserts presence without changing state; ``new`` on a present
    value and ``same``/``delete`` on an absent one are inconsistencies.
    """
    entries = prev._mutable()
    for cmd in cmds:
        fills = entries.setdefault(cmd.referent, {})
        key = (cmd.domain, cmd.slot)
        existing = fills.get(key)
        where = f"({cmd.referent}, {cmd.domain}, {cmd.slot}, {cmd.value!r})"
        if cmd.op == OP_NEW:
            if existing is not None and _find_value(existing, cmd.value) >= 0:
                raise InconsistencyError(f"[new] on already-present value {where}")
            if existing is None:
                fills[key] = [cmd.value]
            else:
                existing.append(cmd.value)
        elif cmd.op == OP_SAME:
            if existing is None or _find_value(existing, cmd.value) < 0:
                raise InconsistencyError(f"[same] on absent value {where}")
        elif cmd.op == OP_DELETE:
            if existing is None or (i := _find_value(existing, cmd.value)) < 0:
                raise InconsistencyError(f"[delete] on absent value {where}")
            existing.pop(i)
            if not existing:
                del fills[key]
        elif cmd.op == OP_CONCAT:
            if existing is None or (i := _find_value(existing, cmd.concat_with)) < 0:
                raise InconsistencyError(
                    f"[concat] target {cmd.concat_with!r} not present {where}"
                )
            existing[i] = f"{existing[i]} {cmd.value}"
            fills[key] = list(_dedup(existing))
    return StateSnapshot(_prune(entries), as_of_turn=prev.as_of_turn)


def _max_concat_matching(prev_only: list[str], next_only: list[str]) -> dict[int, int]:
    """Maximum bipartite matching of deleted values to added values that
    extend them (``added == deleted + " suffix"``).  Returns next->prev index
    pairs.  Kuhn's augmenting paths; inputs are small (per-slot value sets).
    """
    edges = {
        j: [i for i, p in enumerate(prev_only) if n.startswith(p + " ") and len(n) > len(p) + 1]
        for j, n in enumerate(next_only)
    }
    match_prev: dict[int, int] = {}

    def try_assign(j: int, visited: set[int]) -> bool:
        for i in edges[j]:
            if i in visited:
                continue
            visited.add(i)
            if i not in match_prev or try_assign(match_prev[i], visited):
                match_prev[i] = j
                return True
        return False

    for j in range(len(next_only)):
        try_assign(j, set())
    return {j: i for i, j in match_prev.items()}


def diff(prev: StateSnapshot, next: StateSnapshot) -> list[StateChangeCommand]:
    """Minimal command list with apply_state_change(prev, diff(prev, next)) == next.

    Unchanged values emit ``same``; an added value extending a removed one by
    a space-joined suffix becomes ``concat``; everything else is delete+new.
    Output order is (referent, domain, slot, value, op) lexicographic.
    """
    keys = set()
    for snap in (prev, next):
        for r, fills in snap.entries.items():
            for (d, s) in fills:
                keys.add((r, d, s))
    cmds = []
    for (r, d, s) in sorted(keys):
        pv = list(prev.values_at(r, d, s) or ())
        nv = list(next.values_at(r, d, s) or ())
        pnorm = {normalize_value(v): v for v in pv}
        nnorm = {normalize_value(v): v for v in nv}
        for n, v in nnorm.items():
            if n in pnorm:
                cmds.append(StateChangeCommand(OP_SAME, r, d, s, v))
        prev_only = [v for v in pv if normalize_value(v) not in nnorm]
        next_only = [v for v in nv if normalize_value(v) not in pnorm]
        matching = _max_concat_matching(prev_only, next_only)
        used_prev = set(matching.values())
        for j, n in enumerate(next_only):
            if j in matching:
                p = prev_only[matching[j]]
                cmds.append(StateChangeCommand(OP_CONCAT, r, d, s, n[len(p) + 1:], concat_with=p))
            else:
                cmds.append(StateChangeCommand(OP_NEW, r, d, s, n))
        for i, p in enumerate(prev_only):
            if i not in used_prev:
                cmds.append(StateChangeCommand(OP_DELETE, r, d, s, p))
    cmds.sort(key=lambda c: (c.referent, c.domain, c.slot, c.value, c.op))
    return cmds


def replay_cb_sequence(tlbs: list[TurnUpdate]) -> list[StateSnapshot]:
    """Cumulative states after each turn update, folded from the empty state."""
    out = []
    state = StateSnapshot.empty()
    for tlb in tlbs:
        state = apply_tlb(state, tlb)
        out.append(state)
    return out


def build_state_change_examples(
    turns: list[Turn],
    tlbs: list[TurnUpdate],
    k: int,
    include_same: bool = True,
) -> list[dict]:
    """Emit one training record per user turn.

    Each record holds the most recent exchange, the previous cumulative state
    restricted to values that entered it within the last ``k`` turns, and the
    command list transforming the previous state into the current one.
    """
    if k < 1:
        raise ParameterError("k must be >= 1")
    tlb_by_turn = {t.turn_index: t for t in tlbs}
    records = []
    state = StateSnapshot.empty()
    # Turn at which each (referent, domain, slot, normalized value) entered the state.
    entered: dict[tuple[str, str, str, str], int] = {}
    for turn in turns:
        if turn.speaker != USER:
            continue
        prev_state = state
        tlb = tlb_by_turn.get(turn.index)
        cur_state = apply_tlb(prev_state, tlb) if tlb is not None else prev_state
        commands = diff(prev_state, cur_state)
        window_start = turn.index - k
        restricted_entries: dict = {}
        for (r, d, s, v) in prev_state.instances():
            key = (r, d, s, normalize_value(v))
            if entered.get(key, 0) >= window_start:
                restricted_entries.setdefault(r, {}).setdefault((d, s), []).append(v)
        restricted = StateSnapshot(_prune(restricted_entries), prev_state.as_of_turn)
        emitted = commands if include_same else [c for c in commands if c.op != OP_SAME]
        context = [t for t in turns if t.index in (turn.index - 1, turn.index)]
        records.append(
            {
                "turn_index": turn.index,
                "context_turns": [{"speaker": t.speaker, "text": t.text} for t in context],
                "prev_state": restricted.as_dict()["entries"],
                "commands": [c.as_dict() for c in emitted],
            }
        )
        for cmd in commands:
            if cmd.op == OP_NEW:
                entered[(cmd.referent, cmd.domain, cmd.slot, normalize_value(cmd.value))] = turn.index
            elif cmd.op == OP_CONCAT:
                joined = f"{cmd.concat_with} {cmd.value}"
                entered[(cmd.referent, cmd.domain, cmd.slot, normalize_value(joined))] = turn.index
        state = cur_state
    return records
