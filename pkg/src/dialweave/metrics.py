"""Scoring for belief-state predictions against annotated dialogues.

Tuples are (referent, domain, slot, value).  Free-form values earn partial
credit via longest-common-substring overlap; categorical values are all or
nothing.  Sets of tuples are compared under the best one-to-one alignment,
so duplicated predictions can't double-count a single gold value.

Precision and recall are macro-averaged: over referents within a turn (for
cumulative state), over scored turns within a dialogue, then over dialogues.
F1 is computed once, from the averaged precision and recall, never averaged
itself.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .document import DialogueDocument
from .errors import ParameterError, ValidationError
from .ontology import CATEGORICAL, Ontology
from .state import StateSnapshot, TurnUpdate, merge_value
from .textnorm import lcs_length, normalize_value

QUARTERS = (1, 2, 3, 4)


def value_score(pred: str, gold: str, categorical: bool = False) -> float:
    """Overlap credit for a value pair in [0, 1].

    Categorical: exact match after normalization.  Free-form: length of the
    longest common substring of the normalized strings over the longer
    length, so "7 AM" vs "7:00 AM" scores 3/7.
    """
    a = normalize_value(pred)
    b = normalize_value(gold)
    if categorical:
        return 1.0 if a == b else 0.0
    if not a and not b:
        return 1.0
    if not a or not b:
        return 0.0
    return lcs_length(a, b) / max(len(a), len(b))


def align_and_score(pred, gold, pair_score) -> float:
    """Total score of the best one-to-one alignment between two tuple lists.

    ``pair_score(p, g)`` gives the credit for matching p to g.  Solved as a
    rectangular assignment problem; unmatched items contribute nothing.
    """
    if not pred or not gold:
        return 0.0
    matrix = np.zeros((len(pred), len(gold)))
    for i, p in enumerate(pred):
        for j, g in enumerate(gold):
            matrix[i, j] = pair_score(p, g)
    rows, cols = linear_sum_assignment(matrix, maximize=True)
    return float(matrix[rows, cols].sum())


@dataclass
class PRPair:
    precision: float = 0.0
    recall: float = 0.0

    @property
    def f1(self) -> float:
        if self.precision + self.recall == 0:
            return 0.0
        return 2 * self.precision * self.recall / (self.precision + self.recall)

    def as_dict(self) -> dict:
        return {
            "precision": round(self.precision, 6),
            "recall": round(self.recall, 6),
            "f1": round(self.f1, 6),
        }


class _Averager:
    """Macro mean of (precision, recall) samples."""

    def __init__(self):
        self.p_sum = 0.0
        self.r_sum = 0.0
        self.n = 0

    def add(self, p: float, r: float) -> None:
        self.p_sum += p
        self.r_sum += r
        self.n += 1

    def mean(self) -> PRPair | None:
        if self.n == 0:
            return None
        return PRPair(self.p_sum / self.n, self.r_sum / self.n)


def _is_categorical(ontology: Ontology | None, domain: str, slot: str) -> bool:
    if ontology is None:
        return False
    sd = ontology.slot_def(domain, slot)
    return sd is not None and sd.kind == CATEGORICAL


def _pair_scorer(ontology: Ontology | None, key_len: int):
    """Score (key..., value) tuples: value credit gated on equal keys.

    ``key_len`` counts leading key fields; the domain/slot pair is assumed to
    sit immediately before the value for categorical lookup.
    """

    def score(p, g) -> float:
        if p[:key_len] != g[:key_len]:
            return 0.0
        categorical = _is_categorical(ontology, p[key_len - 2], p[key_len - 1])
        return value_score(p[key_len], g[key_len], categorical)

    return score


def _exact_scorer(p, g) -> float:
    return 1.0 if p == g else 0.0


def _precision_recall(pred, gold, pair_score) -> tuple[float, float]:
    total = align_and_score(pred, gold, pair_score)
    p = total / len(pred) if pred else 1.0
    r = total / len(gold) if gold else 1.0
    return p, r


def snapshot_tuples(snapshot: StateSnapshot) -> list[tuple[str, str, str, str]]:
    return list(snapshot.instances())


def tlb_tuples(tlb: TurnUpdate | None) -> list[tuple[str, str, str, str]]:
    return list(tlb.instances()) if tlb is not None else []


def cb_turn_score(
    pred_cb: StateSnapshot,
    gold_cb: StateSnapshot,
    ontology: Ontology | None = None,
) -> tuple[float, float, int] | None:
    """Per-turn cumulative-state precision/recall plus stray-referent count.

    Scores are averaged over the referents active in gold; predicted tuples
    on referents gold never mentions are returned as a false-positive count
    because no denominator ever sees them.  Returns None when gold is empty.
    """
    gold_refs = gold_cb.referents()
    if not gold_refs:
        return None
    scorer = _pair_scorer(ontology, key_len=3)
    p_sum = 0.0
    r_sum = 0.0
    for ref in gold_refs:
        pred = [t for t in pred_cb.instances() if t[0] == ref]
        gold = [t for t in gold_cb.instances() if t[0] == ref]
        p, r = _precision_recall(pred, gold, scorer)
        p_sum += p
        r_sum += r
    stray = sum(1 for t in pred_cb.instances() if t[0] not in gold_cb.entries)
    return p_sum / len(gold_refs), r_sum / len(gold_refs), stray


TLB_VIEWS = ("full", "referent", "referent_slot", "slot_value")


def tlb_turn_scores(
    pred: list[tuple[str, str, str, str]],
    gold: list[tuple[str, str, str, str]],
    ontology: Ontology | None = None,
) -> dict[str, tuple[float, float]]:
    """Turn-level precision/recall under four views of the tuple.

    full: whole tuple with partial value credit; referent: referent labels
    only; referent_slot: referent plus slot identity; slot_value: referents
    stripped, value credit kept.
    """
    views = {
        "full": (pred, gold, _pair_scorer(ontology, key_len=3)),
        "referent": ([t[:1] for t in pred], [t[:1] for t in gold], _exact_scorer),
        "referent_slot": ([t[:3] for t in pred], [t[:3] for t in gold], _exact_scorer),
        "slot_value": ([t[1:] for t in pred], [t[1:] for t in gold], _pair_scorer(ontology, key_len=2)),
    }
    return {name: _precision_recall(p, g, s) for name, (p, g, s) in views.items()}


@dataclass
class DialoguePrediction:
    """Model output for one dialogue: turn-level updates and, optionally,
    explicit cumulative snapshots.  When snapshots are absent the cumulative
    state is rebuilt by folding the updates in turn order; inconsistent merge
    hints in predicted updates are ignored rather than rejected.
    """

    dialogue_id: str
    tlbs: list[TurnUpdate] = field(default_factory=list)
    cbs: list[StateSnapshot] = field(default_factory=list)

    def tlb_at(self, turn_index: int) -> TurnUpdate | None:
        for t in self.tlbs:
            if t.turn_index == turn_index:
                return t
        return None

    def cb_at(self, turn_index: int) -> StateSnapshot:
        if self.cbs:
            best = StateSnapshot.empty()
            for snap in self.cbs:
                if snap.as_of_turn <= turn_index and snap.as_of_turn >= best.as_of_turn:
                    best = snap
            return best
        entries: dict = {}
        last = 0
        for tlb in sorted(self.tlbs, key=lambda t: t.turn_index):
            if tlb.turn_index > turn_index:
                break
            for referent, domain, slot, value in tlb.instances():
                res = tlb.ops.get((referent, domain, slot, normalize_value(value)))
                try:
                    merge_value(entries, referent, domain, slot, value, res)
                except Exception:
                    merge_value(entries, referent, domain, slot, value, None)
            last = tlb.turn_index
        pruned = {
            r: {key: tuple(vals) for key, vals in fills.items() if vals}
            for r, fills in entries.items()
        }
        return StateSnapshot(pruned, as_of_turn=last)

    def as_dict(self) -> dict:
        d: dict = {"dialogue_id": self.dialogue_id}
        if self.tlbs:
            d["tlbs"] = [t.as_dict() for t in self.tlbs]
        if self.cbs:
            d["cbs"] = [s.as_dict() for s in self.cbs]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DialoguePrediction":
        return cls(
            dialogue_id=d["dialogue_id"],
            tlbs=[TurnUpdate.from_dict(t) for t in d.get("tlbs", [])],
            cbs=[StateSnapshot.from_dict(s) for s in d.get("cbs", [])],
        )


def load_predictions(source: str) -> dict[str, DialoguePrediction]:
    try:
        data = json.loads(source)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"predictions file is not valid JSON: {exc}") from exc
    if not isinstance(data, dict) or not isinstance(data.get("predictions"), list):
        raise ValidationError('predictions file must be an object with a "predictions" list')
    out = {}
    for entry in data["predictions"]:
        if not isinstance(entry, dict) or "dialogue_id" not in entry:
            raise ValidationError(f"prediction entries need a dialogue_id, got {entry!r}")
        try:
            pred = DialoguePrediction.from_dict(entry)
        except (KeyError, TypeError, AttributeError) as exc:
            raise ValidationError(
                f"malformed prediction for dialogue {entry['dialogue_id']!r}: {exc}"
            ) from exc
        if pred.dialogue_id in out:
            raise ValidationError(f"duplicate prediction for dialogue {pred.dialogue_id!r}")
        out[pred.dialogue_id] = pred
    return out


def quartile_eval_turn(total_turns: int, user_turns: list[int], quarter: int) -> int:
    """Turn at which the Q-th quarter of the dialogue is evaluated.

    Starts at ceil(Q*T/4); an agent turn defers to the next user turn, and
    running off the end selects T+1, meaning the final state.
    """
    if quarter not in QUARTERS:
        raise ParameterError(f"quarter must be 1..4, got {quarter}")
    base = -(-quarter * total_turns // 4)
    for u in user_turns:
        if u >= base:
            return u
    return total_turns + 1


def gold_cb_at(cb_sequence: list[StateSnapshot], turn_index: int) -> StateSnapshot:
    best = StateSnapshot.empty()
    for snap in cb_sequence:
        if snap.as_of_turn <= turn_index and snap.as_of_turn >= best.as_of_turn:
            best = snap
    return best


@dataclass
class ScoreReport:
    cb_avg: PRPair | None
    cb_quartiles: dict[int, PRPair | None]
    tlb: dict[str, PRPair | None]
    counts: dict[str, int]

    def as_dict(self) -> dict:
        def cell(pair):
            return pair.as_dict() if pair is not None else None

        return {
            "cb": {
                "average": cell(self.cb_avg),
                "quartiles": {f"q{q}": cell(self.cb_quartiles.get(q)) for q in QUARTERS},
            },
            "tlb": {name: cell(self.tlb.get(name)) for name in TLB_VIEWS},
            "counts": {k: self.counts[k] for k in sorted(self.counts)},
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=True) + "\n"

    def render_table(self) -> str:
        rows = [("metric", "precision", "recall", "f1", "n")]

        def add(name, pair, n):
            if pair is None:
                rows.append((name, "-", "-", "-", str(n)))
            else:
                rows.append(
                    (name, f"{pair.precision:.4f}", f"{pair.recall:.4f}", f"{pair.f1:.4f}", str(n))
                )

        add("cb_average", self.cb_avg, self.counts.get("cb_dialogues_scored", 0))
        for q in QUARTERS:
            add(f"cb_q{q}", self.cb_quartiles.get(q), self.counts.get(f"cb_q{q}_dialogues", 0))
        for name in TLB_VIEWS:
            add(f"tlb_{name}", self.tlb.get(name), self.counts.get("tlb_dialogues_scored", 0))
        widths = [max(len(r[i]) for r in rows) for i in range(5)]
        lines = []
        for i, row in enumerate(rows):
            lines.append("  ".join(cell.ljust(widths[j]) for j, cell in enumerate(row)).rstrip())
            if i == 0:
                lines.append("  ".join("-" * widths[j] for j in range(5)))
        extras = [
            f"{k}={self.counts[k]}"
            for k in sorted(self.counts)
            if k.startswith(("stray", "unmatched", "excluded"))
        ]
        if extras:
            lines.append("")
            lines.append("diagnostics: " + " ".join(extras))
        return "\n".join(lines) + "\n"


def evaluate_corpus(
    documents: list[DialogueDocument],
    predictions: dict[str, DialoguePrediction],
    ontology: Ontology | None = None,
) -> ScoreReport:
    """Score predictions against annotated dialogues.

    Cumulative state is scored at every user turn with non-empty gold state
    and at the four quarter points; turn-level updates at every user turn
    whose gold update is non-empty.  Turns and dialogues with empty gold are
    excluded from averages and surface in the counts instead, as do predicted
    values at excluded turns and predictions for unknown dialogues.
    """
    cb_overall = _Averager()
    quartiles = {q: _Averager() for q in QUARTERS}
    tlb_overall = {name: _Averager() for name in TLB_VIEWS}
    counts = {
        "dialogues": len(documents),
        "cb_dialogues_scored": 0,
        "tlb_dialogues_scored": 0,
        "cb_turns_scored": 0,
        "tlb_turns_scored": 0,
        "excluded_empty_gold_cb_turns": 0,
        "excluded_empty_gold_tlb_turns": 0,
        "stray_referent_values": 0,
        "stray_tlb_values": 0,
        "unmatched_prediction_dialogues": 0,
    }
    for q in QUARTERS:
        counts[f"cb_q{q}_dialogues"] = 0
    seen_ids = set()
    empty = DialoguePrediction(dialogue_id="")
    for doc in documents:
        seen_ids.add(doc.dialogue_id)
        pred = predictions.get(doc.dialogue_id, empty)
        gold_tlbs = {t.turn_index: t for t in doc.tlbs()}
        cb_seq = doc.cb_sequence()
        user_turns = doc.user_turn_indices()
        total_turns = len(doc.turns)

        dialogue_cb = _Averager()
        for u in user_turns:
            gold_cb = gold_cb_at(cb_seq, u)
            scored = cb_turn_score(pred.cb_at(u), gold_cb, ontology)
            if scored is None:
                counts["excluded_empty_gold_cb_turns"] += 1
                counts["stray_referent_values"] += len(snapshot_tuples(pred.cb_at(u)))
                continue
            p, r, stray = scored
            dialogue_cb.add(p, r)
            counts["stray_referent_values"] += stray
        pair = dialogue_cb.mean()
        if pair is not None:
            cb_overall.add(pair.precision, pair.recall)
            counts["cb_dialogues_scored"] += 1
            counts["cb_turns_scored"] += dialogue_cb.n

        for q in QUARTERS:
            t_q = quartile_eval_turn(total_turns, user_turns, q)
            scored = cb_turn_score(pred.cb_at(t_q), gold_cb_at(cb_seq, t_q), ontology)
            if scored is None:
                continue
            p, r, _ = scored
            quartiles[q].add(p, r)
            counts[f"cb_q{q}_dialogues"] += 1

        dialogue_tlb = {name: _Averager() for name in TLB_VIEWS}
        for u in user_turns:
            gold = tlb_tuples(gold_tlbs.get(u))
            pred_tuples = tlb_tuples(pred.tlb_at(u))
            if not gold:
                counts["excluded_empty_gold_tlb_turns"] += 1
                counts["stray_tlb_values"] += len(pred_tuples)
                continue
            for name, (p, r) in tlb_turn_scores(pred_tuples, gold, ontology).items():
                dialogue_tlb[name].add(p, r)
        scored_turns = dialogue_tlb["full"].n
        if scored_turns:
            counts["tlb_dialogues_scored"] += 1
            counts["tlb_turns_scored"] += scored_turns
            for name in TLB_VIEWS:
                pair = dialogue_tlb[name].mean()
                tlb_overall[name].add(pair.precision, pair.recall)

    counts["unmatched_prediction_dialogues"] = sum(
        1 for did in predictions if did not in seen_ids
    )
    return ScoreReport(
        cb_avg=cb_overall.mean(),
        cb_quartiles={q: quartiles[q].mean() for q in QUARTERS},
        tlb={name: tlb_overall[name].mean() for name in TLB_VIEWS},
        counts=counts,
    )


def inter_annotator_agreement(
    documents: list[DialogueDocument],
    seed: int,
    ontology: Ontology | None = None,
) -> dict:
    """Agreement between annotators who labeled the same dialogues.

    Documents sharing a dialogue_id are treated as rival annotations, told
    apart by meta["annotator"].  One annotator per dialogue is drawn as the
    reference with the given seed; every other annotator's tuples earn their
    best match score against the reference's tuples for the same turn, then
    scores average up through turns, dialogues, and annotators.  Reported as
    a percentage.
    """
    groups: dict[str, dict[str, DialogueDocument]] = {}
    for doc in documents:
        label = str(doc.meta.get("annotator", ""))
        if not label:
            raise ValidationError(
                f"dialogue {doc.dialogue_id!r} lacks meta.annotator, required for agreement"
            )
        by_annotator = groups.setdefault(doc.dialogue_id, {})
        if label in by_annotator:
            raise ValidationError(
                f"dialogue {doc.dialogue_id!r} has two copies from annotator {label!r}"
            )
        by_annotator[label] = doc
    rng = random.Random(seed)
    scorer = _pair_scorer(ontology, key_len=3)
    per_annotator: dict[str, list[float]] = {}
    n_compared = 0
    for dialogue_id in sorted(groups):
        by_annotator = groups[dialogue_id]
        if len(by_annotator) < 2:
            continue
        labels = sorted(by_annotator)
        reference = rng.choice(labels)
        ref_tlbs = {t.turn_index: t for t in by_annotator[reference].tlbs()}
        n_compared += 1
        for label in labels:
            if label == reference:
                continue
            turn_scores = []
            for tlb in by_annotator[label].tlbs():
                mine = list(tlb.instances())
                if not mine:
                    continue
                theirs = tlb_tuples(ref_tlbs.get(tlb.turn_index))
                best = [max((scorer(m, t) for t in theirs), default=0.0) for m in mine]
                turn_scores.append(sum(best) / len(best))
            if turn_scores:
                per_annotator.setdefault(label, []).append(sum(turn_scores) / len(turn_scores))
    annotator_means = {
        label: sum(scores) / len(scores) for label, scores in sorted(per_annotator.items())
    }
    overall = (
        sum(annotator_means.values()) / len(annotator_means) if annotator_means else 0.0
    )
    return {
        "agreement_pct": round(overall * 100, 2),
        "per_annotator_pct": {k: round(v * 100, 2) for k, v in annotator_means.items()},
        "dialogues_compared": n_compared,
    }
