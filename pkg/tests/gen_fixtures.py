"""Regenerate the committed fixtures under tests/data/.

Usage:  python3 tests/gen_fixtures.py

Twenty dialogues are produced by driving real sessions against a scripted
mock backend, so every document passed through the same propose / review /
annotate / commit path the service uses.  Predictions are the gold beliefs
with seeded noise.  Everything is deterministic; the golden tests compare
bytes.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path

from dialweave.backend import MockBackend
from dialweave.corpus import Corpus, compute_stats, render_stats, save_corpus
from dialweave.dialogue import SpanAnnotation
from dialweave.metrics import evaluate_corpus, load_predictions
from dialweave.ontology import CATEGORICAL, builtin_ontology
from dialweave.scenario import sample_scenario
from dialweave.session import Session, generate_story, generate_subdialogue
from dialweave.state import replay_cb_sequence

DATA = Path(__file__).parent / "data"

FREE_VALUES = {
    "First Name": ("Dana", "Lee", "Morgan", "Sam"),
    "Last Name": ("Okafor", "Lindqvist", "Reyes", "Tanaka"),
    "Phone Number": ("555-0142", "555-0199", "555-0023"),
    "Email": ("dana@example.com", "lee.r@example.org"),
    "Home Address": ("12 Birch Lane", "404 Summit Ave", "77 Canal St"),
    "Policy Number": ("PL-553311", "PL-208990", "PL-114477"),
    "Date": ("last Tuesday", "this Monday", "March 3rd", "two weeks ago"),
    "Time": ("7 AM", "around noon", "9:30 in the evening", "half past eight"),
    "Location": (
        "the Pine St intersection",
        "a parking garage on 5th",
        "the I-90 onramp",
        "the grocery store lot",
    ),
    "Number of Involved Cars": ("two", "three"),
    "Injury": ("whiplash", "a sprained wrist", "some bruising", "a sore neck"),
    "Hospital Name": ("St. Mary's", "Harborview", "Lakeside General"),
    "Number of Injured": ("one", "two", "nobody"),
    "Make": ("Toyota", "Honda", "Ford", "Subaru"),
    "Model": ("Corolla", "Civic", "Outback", "F-150"),
    "Year": ("2018", "2021", "2015"),
    "License Plate": ("ABC-1234", "XYZ-7788", "KJH-5521"),
    "Car Mileage": ("82,000 miles", "40k miles", "just under 120k"),
    "Repair Estimate": ("$2,400", "about $900", "$5,100"),
    "Repair Shop": ("Mike's Auto Body", "Precision Collision"),
    "Speed Limit": ("25 mph", "35 mph", "60 mph"),
    "Insurance Company": ("Acme Mutual", "Northwind Assurance"),
    "Claim Number": ("CLM-20443", "CLM-88109"),
    "Deductible": ("$500", "$1,000"),
    "Prior Claims": ("none", "one in 2019"),
    "Speed": ("about 25 mph", "roughly 40 mph", "under 10 mph"),
    "Number of Passengers": ("one", "two", "three"),
    "Passenger Age": ("eight", "34", "sixty"),
    "Callback Time": ("tomorrow morning", "after 5 PM", "Friday afternoon"),
    "Next Steps": ("send photos of the damage", "schedule an inspection"),
    "Adjuster Assigned": ("Sam Rivera", "not yet"),
}
FALLBACK_VALUES = ("not sure", "I'd have to check", "hard to say")

AGENT_ASKS = (
    "Could you tell me about the {}?",
    "I need to note the {}. What should I put down?",
    "Let's cover the {} next.",
    "One more thing on the {}, please.",
)
USER_OPENERS = ("Right, ", "Okay, so ", "Let me think. ", "Sure. ", "Well, ")
FIRST_JOIN = ("it was ", "I'd say ", "that would be ", "put down ")
MORE_JOIN = (", and also ", ", plus ", ". On top of that, ", ", then ")


@dataclass
class Mention:
    referent: str
    domain: str
    slot: str
    value: str
    resolution: str | None = None


def pick_value(rng: random.Random, ont, domain: str, slot: str, avoid: str | None = None) -> str:
    sdef = ont.slot_def(domain, slot)
    if sdef.kind == CATEGORICAL:
        pool = [v for v in sdef.permissible_values if v != avoid]
    else:
        pool = [v for v in FREE_VALUES.get(slot, FALLBACK_VALUES) if v != avoid]
    return rng.choice(pool)


def plan_mentions(rng: random.Random, ont, n_sub: int) -> list[list[Mention]]:
    keys = ont.slot_keys()
    targets: list[tuple[str, str, str]] = []
    while len(targets) < 3 + rng.randrange(3):
        domain, slot = rng.choice(keys)
        referent = rng.choice(("Caller", "Caller", "Other Driver", "Global", "Witness"))
        if (referent, domain, slot) not in targets:
            targets.append((referent, domain, slot))
    plan: list[list[Mention]] = [[] for _ in range(n_sub)]
    for referent, domain, slot in targets:
        value = pick_value(rng, ont, domain, slot)
        free = ont.slot_def(domain, slot).kind != CATEGORICAL
        if rng.random() < 0.4:
            first = rng.randrange(n_sub - 1) if n_sub > 1 else 0
            second = rng.randrange(first + 1, n_sub) if n_sub > 1 else 0
            v2 = pick_value(rng, ont, domain, slot, avoid=value)
            options = ("update", "keep", "concat") if free else ("update", "keep")
            plan[first].append(Mention(referent, domain, slot, value))
            plan[second].append(Mention(referent, domain, slot, v2, rng.choice(options)))
        else:
            plan[rng.randrange(n_sub)].append(Mention(referent, domain, slot, value))
    return plan


def user_line(rng: random.Random, mentions: list[Mention]):
    """Compose the caller's answer, returning (text, spans aligned to mentions)."""
    if not mentions:
        return rng.choice(("It all happened so fast.", "Honestly it's a bit of a blur.")), []
    text = rng.choice(USER_OPENERS)
    spans = []
    for j, m in enumerate(mentions):
        text += rng.choice(FIRST_JOIN) if j == 0 else rng.choice(MORE_JOIN)
        spans.append((len(text), len(text) + len(m.value)))
        text += m.value
    return text + ".", spans


def wire(lines: list[tuple[str, str]]) -> str:
    body = "".join(f"<p>{name}: {text}</p>" for name, text in lines)
    return f"<div>{body}</div>"


def build_dialogue(i: int, ont):
    """Script one session and drive it end to end; returns the document."""
    rng = random.Random(4100 + i)
    scenario = sample_scenario(ont, seed=350 + i)
    agent = scenario.role_map.agent_name
    caller = scenario.role_map.user_name
    n_sub = 2 + i % 2
    plan = plan_mentions(rng, ont, n_sub)
    regen = i % 5 == 0
    edit = i % 4 == 1
    filler = i % 6 == 2

    story = (
        f"{caller} here. I was driving near "
        f"{rng.choice(FREE_VALUES['Location'])} {rng.choice(FREE_VALUES['Date'])} "
        "when another car hit mine. Nobody is badly hurt but the car needs work."
    )
    script = [story]
    subdialogue_lines: list[list[tuple[str, str]]] = []
    user_spans: list[list[tuple[int, int]]] = []
    for k in range(n_sub):
        mentions = plan[k]
        topic = mentions[0].slot.lower() if mentions else "rest of it"
        lines = [(agent, rng.choice(AGENT_ASKS).format(topic))]
        text, spans = user_line(rng, mentions)
        lines.append((caller, text))
        if filler and k == 0:
            lines += [
                (agent, "Anything else you can recall?"),
                (caller, "Not right now, sorry."),
            ]
        if k == n_sub - 1:
            lines += [
                (agent, "Thanks for calling, we have everything we need. Have a good day!"),
                (caller, "Thanks, goodbye."),
            ]
        if regen and k == 0:
            script.append(wire([
                (agent, "Could you walk me through everything at once?"),
                (caller, "That is a lot to cover in one go."),
            ]))
        script.append(wire(lines))
        subdialogue_lines.append(lines)
        user_spans.append(spans)

    session = Session.create(f"mini-{i:02d}", scenario, ontology=ont)
    backend = MockBackend(responses=script)
    generate_story(session, backend)
    for k in range(n_sub):
        base = len(session.committed)
        generate_subdialogue(session, backend)
        if regen and k == 0:
            generate_subdialogue(
                session, backend, instruction="ask one question at a time", regenerate=True
            )
        if filler and k == 0:
            session.delete_turn(base + 4)
            session.delete_turn(base + 3)
        if edit and k == 0:
            old = subdialogue_lines[k][0][1]
            session.edit_turn(base + 1, old + " Take your time.")
        for m, (start, end) in zip(plan[k], user_spans[k]):
            prompt = session.annotate(SpanAnnotation(
                base + 2, start, end, m.referent, m.domain, m.slot, m.value
            ))
            if prompt is not None:
                session.resolve_conflict(prompt.conflict_id, m.resolution or "keep")
        session.commit()
    session.complete()
    return session.to_document()


def mutate_value(rng: random.Random, value: str, categorical: bool) -> str:
    words = value.split()
    if not categorical and len(words) > 1:
        return words[0]
    if len(value) > 3:
        return value[:-1]
    return value + " or so"


def perturb_predictions(doc, ont, rng: random.Random):
    """Gold TLBs with seeded drop / corrupt / spurious-tuple noise."""
    tlbs = []
    for tlb in doc.tlbs():
        entries = {}
        for referent in sorted(tlb.entries):
            fills = []
            for fill in tlb.entries[referent]:
                sdef = ont.slot_def(fill.domain, fill.slot)
                categorical = sdef is not None and sdef.kind == CATEGORICAL
                values = []
                for v in fill.values:
                    roll = rng.random()
                    if roll < 0.12:
                        continue
                    if roll < 0.32:
                        v = mutate_value(rng, v, categorical)
                    values.append(v)
                if values:
                    fills.append({"domain": fill.domain, "slot": fill.slot, "values": values})
            if fills:
                entries[referent] = fills
        if rng.random() < 0.10:
            domain, slot = rng.choice(ont.slot_keys())
            sdef = ont.slot_def(domain, slot)
            value = (
                rng.choice(sdef.permissible_values)
                if sdef.kind == CATEGORICAL
                else "unclear"
            )
            entries.setdefault(rng.choice(ont.referents), []).append(
                {"domain": domain, "slot": slot, "values": [value]}
            )
        if entries:
            tlbs.append({"turn_index": tlb.turn_index, "entries": entries})
    return tlbs


def main() -> None:
    ont = builtin_ontology()
    docs = [build_dialogue(i, ont) for i in range(20)]
    corpus = Corpus("mini20", docs)
    DATA.mkdir(exist_ok=True)
    save_corpus(corpus, DATA / "mini_corpus.json")

    predictions = []
    for i, doc in enumerate(docs):
        rng = random.Random(7700 + i)
        entry = {"dialogue_id": doc.dialogue_id, "tlbs": perturb_predictions(doc, ont, rng)}
        if i % 4 == 0:
            from dialweave.state import TurnUpdate

            parsed = [TurnUpdate.from_dict(t) for t in entry["tlbs"]]
            entry["cbs"] = [s.as_dict() for s in replay_cb_sequence(parsed)]
        predictions.append(entry)
    pred_text = json.dumps(
        {"predictions": predictions}, indent=2, sort_keys=True, ensure_ascii=False
    ) + "\n"
    (DATA / "mini_predictions.json").write_text(pred_text, encoding="utf-8")

    report = evaluate_corpus(corpus.documents, load_predictions(pred_text), ontology=ont)
    (DATA / "golden_report.json").write_text(report.to_json(), encoding="utf-8")
    (DATA / "golden_stats.txt").write_text(render_stats(compute_stats(corpus)), encoding="utf-8")
    print(f"wrote {len(docs)} dialogues and goldens under {DATA}")


if __name__ == "__main__":
    main()
