"""Corpus container and dataset utilities: stats, splits, anonymization."""

from __future__ import annotations

import json
import os
import re
import random
from dataclasses import dataclass, replace as dc_replace
from pathlib import Path

import numpy as np

from .dialogue import SpanAnnotation, RoleMap, Turn
from .document import DialogueDocument
from .errors import ParameterError, ValidationError
from .personas import name_pool

CORPUS_SCHEMA = "1"


@dataclass
class Corpus:
    corpus_id: str
    documents: list[DialogueDocument]

    def as_dict(self) -> dict:
        return {
            "schema": CORPUS_SCHEMA,
            "corpus_id": self.corpus_id,
            "dialogues": [d.as_dict() for d in self.documents],
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), ensure_ascii=False, indent=2) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "Corpus":
        if "dialogues" not in d:
            raise ValidationError('corpus file lacks a "dialogues" list')
        docs = [DialogueDocument.from_dict(x) for x in d["dialogues"]]
        # The same dialogue may appear once per annotator (for agreement
        # studies); any other repetition is a corruption.
        seen: set[tuple[str, str | None]] = set()
        dupes = set()
        for doc in docs:
            key = (doc.dialogue_id, doc.meta.get("annotator"))
            if key in seen:
                dupes.add(doc.dialogue_id)
            seen.add(key)
        if dupes:
            raise ValidationError(f"duplicate dialogue ids in corpus: {sorted(dupes)}")
        return cls(corpus_id=d.get("corpus_id", ""), documents=docs)


def load_corpus(path) -> Corpus:
    try:
        data = json.loads(Path(path).read_text("utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"corpus file {path} is not valid JSON: {exc}") from exc
    return Corpus.from_dict(data)


def save_corpus(corpus: Corpus, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(corpus.to_json(), encoding="utf-8")
    os.replace(tmp, path)


# -- statistics ---------------------------------------------------------------


def _summary(values) -> dict:
    arr = np.asarray(values, dtype=float)
    return {
        "mean": round(float(arr.mean()), 6),
        "std": round(float(arr.std()), 6),
        "min": round(float(arr.min()), 6),
        "max": round(float(arr.max()), 6),
        "total": round(float(arr.sum()), 6),
    }


def compute_stats(corpus: Corpus) -> dict:
    """Descriptive statistics over a corpus; deterministic for a given file."""
    if not corpus.documents:
        return {"corpus_id": corpus.corpus_id, "dialogues": 0}
    turns = [len(d.turns) for d in corpus.documents]
    user_turns = [len(d.user_turn_indices()) for d in corpus.documents]
    annotations = [len(d.annotations) for d in corpus.documents]
    finals = [d.final_cb() for d in corpus.documents]
    active = [s.active_slot_count() for s in finals]
    multi = sum(1 for s in finals if s.has_multi_value())
    referents: dict[str, int] = {}
    for s in finals:
        for r in s.referents():
            referents[r] = referents.get(r, 0) + 1
    stats = {
        "corpus_id": corpus.corpus_id,
        "dialogues": len(corpus.documents),
        "turns": _summary(turns),
        "user_turns": _summary(user_turns),
        "annotations": _summary(annotations),
        "active_slots": _summary(active),
        "multi_value_dialogue_fraction": round(multi / len(corpus.documents), 6),
        "referent_dialogue_counts": dict(sorted(referents.items())),
    }
    workflows = [d.meta.get("workflow") for d in corpus.documents]
    if all(isinstance(w, dict) for w in workflows):
        for key in ("subdialogues_committed", "regenerations", "turns_edited", "turns_deleted"):
            if all(key in w for w in workflows):
                stats[f"workflow_{key}"] = _summary([w[key] for w in workflows])
    return stats


def render_stats(stats: dict) -> str:
    return json.dumps(stats, indent=2, sort_keys=True) + "\n"


# -- splitting ----------------------------------------------------------------


def split_sizes(n: int, ratios: list[float]) -> list[int]:
    """Bucket sizes by largest remainder; remainder ties go to the later
    bucket.  Sizes always sum to ``n``.
    """
    if n < 0:
        raise ParameterError("n must be >= 0")
    if not ratios or any(r < 0 for r in ratios) or sum(ratios) <= 0:
        raise ParameterError("ratios must be non-negative and sum to a positive value")
    total = sum(ratios)
    raw = [n * r / total for r in ratios]
    sizes = [int(x) for x in raw]
    leftover = n - sum(sizes)
    order = sorted(range(len(ratios)), key=lambda i: (raw[i] - sizes[i], i), reverse=True)
    for i in order[:leftover]:
        sizes[i] += 1
    return sizes


def _bucket_names(k: int) -> list[str]:
    if k == 2:
        return ["train", "test"]
    if k == 3:
        return ["train", "dev", "test"]
    return [f"part_{i}" for i in range(k)]


SPLIT_STRATEGIES = ("random", "by_slot_count")


def split_corpus(
    corpus: Corpus,
    ratios: list[float],
    strategy: str = "random",
    seed: int = 0,
) -> list[tuple[str, Corpus]]:
    """Partition a corpus into named parts.

    random: seeded shuffle, then contiguous slices of the target sizes.
    by_slot_count: dialogues sorted by active-slot count (densest first) are
    dealt one at a time to the bucket with the largest remaining share of its
    target, which keeps slot-count distributions comparable across parts.
    """
    if strategy not in SPLIT_STRATEGIES:
        raise ParameterError(f"unknown split strategy {strategy!r}")
    sizes = split_sizes(len(corpus.documents), ratios)
    names = _bucket_names(len(ratios))
    buckets: list[list[DialogueDocument]] = [[] for _ in ratios]
    if strategy == "random":
        order = list(corpus.documents)
        random.Random(seed).shuffle(order)
        at = 0
        for i, size in enumerate(sizes):
            buckets[i] = order[at:at + size]
            at += size
    else:
        ranked = sorted(
            corpus.documents,
            key=lambda d: (-d.final_cb().active_slot_count(), d.dialogue_id),
        )
        for doc in ranked:
            best, best_share = None, None
            for i, size in enumerate(sizes):
                if len(buckets[i]) >= size:
                    continue
                share = (size - len(buckets[i])) / size
                if best_share is None or share > best_share:
                    best, best_share = i, share
            buckets[best].append(doc)
    return [
        (names[i], Corpus(corpus_id=f"{corpus.corpus_id}-{names[i]}", documents=buckets[i]))
        for i in range(len(ratios))
    ]


# -- anonymization ------------------------------------------------------------


def _map_position(pos: int, edits: list[tuple[int, int, int]]) -> int:
    """Map an offset in the original text into the rewritten text.

    ``edits`` are (start, old_len, new_len), non-overlapping, ascending.
    Positions inside a replaced region stay inside it (clamped), so spans
    that cover a name keep covering its substitute.
    """
    delta = 0
    for start, old_len, new_len in edits:
        if pos <= start:
            break
        if pos < start + old_len:
            return start + delta + min(pos - start, new_len)
        delta += new_len - old_len
    return pos + delta


def _rewrite(text: str, mapping: dict[str, str]) -> tuple[str, list[tuple[int, int, int]]]:
    if not mapping:
        return text, []
    pattern = re.compile(r"\b(" + "|".join(re.escape(k) for k in sorted(mapping, key=len, reverse=True)) + r")\b")
    edits = []
    out = []
    last = 0
    for m in pattern.finditer(text):
        out.append(text[last:m.start()])
        new = mapping[m.group(1)]
        out.append(new)
        edits.append((m.start(), m.end() - m.start(), len(new)))
        last = m.end()
    out.append(text[last:])
    return "".join(out), edits


def anonymize_document(doc: DialogueDocument, seed: int, pool: tuple[str, ...] | None = None) -> DialogueDocument:
    """Replace the two speaker names everywhere, deterministically per
    (seed, dialogue_id): turn texts, annotation spans and values, the stored
    story, and the role map itself.  Span offsets are remapped so every
    annotation still points at its phrase.
    """
    pool = pool or name_pool()
    rng = random.Random(f"{seed}:{doc.dialogue_id}")
    current = {doc.role_map.agent_name, doc.role_map.user_name}
    candidates = [n for n in pool if n not in current]
    if len(candidates) < 2:
        raise ParameterError("name pool too small to anonymize")
    new_agent, new_user = rng.sample(candidates, 2)
    mapping = {doc.role_map.agent_name: new_agent, doc.role_map.user_name: new_user}

    new_turns = []
    edits_by_turn: dict[int, list[tuple[int, int, int]]] = {}
    for t in doc.turns:
        text, edits = _rewrite(t.text, mapping)
        edits_by_turn[t.index] = edits
        new_turns.append(Turn(index=t.index, speaker=t.speaker, text=text))
    new_annotations = []
    for a in doc.annotations:
        edits = edits_by_turn.get(a.turn_index, [])
        value, _ = _rewrite(a.value, mapping)
        new_annotations.append(
            dc_replace(
                a,
                char_start=_map_position(a.char_start, edits),
                char_end=_map_position(a.char_end, edits),
                value=value,
            )
        )
    meta = dict(doc.meta)
    if isinstance(meta.get("story"), str):
        meta["story"], _ = _rewrite(meta["story"], mapping)
    scenario = doc.scenario
    if isinstance(scenario, dict) and "role_map" in scenario:
        scenario = {**scenario, "role_map": {"agent_name": new_agent, "user_name": new_user}}
    return DialogueDocument(
        dialogue_id=doc.dialogue_id,
        turns=tuple(new_turns),
        annotations=tuple(new_annotations),
        role_map=RoleMap(agent_name=new_agent, user_name=new_user),
        scenario=scenario,
        meta=meta,
    )


def anonymize_corpus(corpus: Corpus, seed: int) -> Corpus:
    return Corpus(
        corpus_id=corpus.corpus_id,
        documents=[anonymize_document(d, seed) for d in corpus.documents],
    )
