"""Schema of referents, domains, slots, and permissible values.

The ontology guides scenario sampling, bounds annotation, and supplies the
categorical/free-form distinction the scorer needs.  Instances are immutable
after load and safe to share across threads.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from importlib import resources

from .errors import ParameterError, ParseError, ValidationError
from .textnorm import normalize_value

SCHEMA_VERSION = "1"

CATEGORICAL = "categorical"
FREE_FORM = "free_form"

DEFAULT_MAX_SAMPLE = 64

# Fallback values for free-form slots when no per-slot pool is configured.
_GENERIC_PLACEHOLDERS = [
    "yesterday afternoon",
    "around noon",
    "two weeks ago",
    "near the shopping mall",
    "on the highway",
    "about thirty",
    "not sure yet",
]


@dataclass(frozen=True)
class SlotDef:
    name: str
    kind: str
    permissible_values: tuple[str, ...] = ()
    description: str | None = None


@dataclass(frozen=True)
class Domain:
    name: str
    slots: tuple[SlotDef, ...]

    def slot(self, name: str) -> SlotDef | None:
        for s in self.slots:
            if s.name == name:
                return s
        return None


@dataclass(frozen=True)
class Triplet:
    """One referent-linked slot-value instruction for the generator."""

    referent: str
    domain: str
    slot: str
    value: str

    def as_dict(self) -> dict:
        return {
            "referent": self.referent,
            "domain": self.domain,
            "slot": self.slot,
            "value": self.value,
        }


@dataclass(frozen=True)
class Ontology:
    referents: tuple[str, ...]
    domains: tuple[Domain, ...]
    version: str = "1"
    _index: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        index = {(d.name, s.name): s for d in self.domains for s in d.slots}
        object.__setattr__(self, "_index", index)

    def domain(self, name: str) -> Domain | None:
        for d in self.domains:
            if d.name == name:
                return d
        return None

    def slot_def(self, domain: str, slot: str) -> SlotDef | None:
        return self._index.get((domain, slot))

    def slot_count(self) -> int:
        return sum(len(d.slots) for d in self.domains)

    def slot_keys(self) -> list[tuple[str, str]]:
        return [(d.name, s.name) for d in self.domains for s in d.slots]

    def validate_triplet(self, t: Triplet) -> list[str]:
        """Return the list of invariant violations for a triplet (empty if valid)."""
        problems = []
        if t.referent not in self.referents:
            problems.append(f"unknown referent {t.referent!r}")
        slot = self.slot_def(t.domain, t.slot)
        if slot is None:
            problems.append(f"unknown slot {t.domain!r}/{t.slot!r}")
        elif slot.kind == CATEGORICAL:
            allowed = {normalize_value(v) for v in slot.permissible_values}
            if normalize_value(t.value) not in allowed:
                problems.append(
                    f"value {t.value!r} not permissible for {t.domain}/{t.slot}"
                )
        return problems

    def require_triplet(self, t: Triplet) -> None:
        problems = self.validate_triplet(t)
        if problems:
            raise ValidationError("invalid triplet", problems)


def _validate_document(doc: dict) -> list[str]:
    problems = []
    referents = doc.get("referents", [])
    domains = doc.get("domains", [])
    if not isinstance(referents, list) or not all(isinstance(r, str) for r in referents):
        problems.append("'referents' must be an array of strings")
        referents = []
    if not referents:
        problems.append("empty ontology: no referents")
    seen_r = set()
    for r in referents:
        if not r.strip():
            problems.append("empty referent label")
        if r in seen_r:
            problems.append(f"duplicate referent {r!r}")
        seen_r.add(r)
    if not isinstance(domains, list):
        problems.append("'domains' must be an array")
        domains = []
    if not domains:
        problems.append("empty ontology: no domains")
    seen_d = set()
    for d in domains:
        if not isinstance(d, dict):
            problems.append(f"domain entry is not an object: {d!r}")
            continue
        name = d.get("name", "")
        if not isinstance(name, str) or not name.strip():
            problems.append("domain with empty name")
        if name in seen_d:
            problems.append(f"duplicate domain {name!r}")
        seen_d.add(name)
        seen_s = set()
        for s in d.get("slots", []):
            if not isinstance(s, dict):
                problems.append(f"slot entry in {name!r} is not an object: {s!r}")
                continue
            sname = s.get("name", "")
            kind = s.get("kind", "")
            values = s.get("values", [])
            if not isinstance(sname, str) or not sname.strip():
                problems.append(f"slot with empty name in domain {name!r}")
            if sname in seen_s:
                problems.append(f"duplicate slot {sname!r} in domain {name!r}")
            seen_s.add(sname)
            if kind not in (CATEGORICAL, FREE_FORM):
                problems.append(f"unknown kind {kind!r} for slot {name}/{sname}")
            elif kind == CATEGORICAL and not values:
                problems.append(f"categorical slot {name}/{sname} has empty value set")
            elif kind == FREE_FORM and values:
                problems.append(f"free-form slot {name}/{sname} must not list values")
    return problems


def load_ontology(source: str) -> Ontology:
    """Parse and validate an ontology document (JSON text).

    Raises ParseError with position info on malformed JSON and
    ValidationError listing every invariant violation found.
    """
    try:
        doc = json.loads(source)
    except json.JSONDecodeError as e:
        raise ParseError("ontology document is not valid JSON", fragment=e.msg, line=e.lineno) from e
    if not isinstance(doc, dict):
        raise ValidationError("ontology document must be an object")
    problems = _validate_document(doc)
    if problems:
        raise ValidationError("invalid ontology", problems)
    domains = tuple(
        Domain(
            name=d["name"],
            slots=tuple(
                SlotDef(
                    name=s["name"],
                    kind=s["kind"],
                    permissible_values=tuple(s.get("values", [])),
                    description=s.get("description"),
                )
                for s in d.get("slots", [])
            ),
        )
        for d in doc["domains"]
    )
    return Ontology(
        referents=tuple(doc["referents"]),
        domains=domains,
        version=str(doc.get("version", "1")),
    )


def load_ontology_file(path) -> Ontology:
    with open(path, encoding="utf-8") as f:
        return load_ontology(f.read())


def render_ontology(o: Ontology) -> str:
    """Serialize an ontology back to its document form (round-trips with load)."""
    doc = {
        "version": o.version,
        "referents": list(o.referents),
        "domains": [
            {
                "name": d.name,
                "slots": [
                    {
                        "name": s.name,
                        "kind": s.kind,
                        "values": list(s.permissible_values),
                        **({"description": s.description} if s.description else {}),
                    }
                    for s in d.slots
                ],
            }
            for d in o.domains
        ],
    }
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


def builtin_ontology() -> Ontology:
    """The bundled illustrative auto-claim ontology (6 referents, 10 domains, 60 slots)."""
    text = resources.files("dialweave.data").joinpath("sample_ontology.json").read_text("utf-8")
    return load_ontology(text)


def builtin_placeholders() -> dict[str, list[str]]:
    text = resources.files("dialweave.data").joinpath("placeholder_values.json").read_text("utf-8")
    return json.loads(text)


def sample_triplets(
    o: Ontology,
    seed: int | random.Random,
    count: int,
    placeholders: dict[str, list[str]] | None = None,
    max_count: int = DEFAULT_MAX_SAMPLE,
) -> list[Triplet]:
    """Draw ``count`` distinct referent-domain-slot combinations with values.

    Categorical values are uniform over the slot's permissible values;
    free-form values come from the placeholder pool keyed ``"Domain/Slot"``
    (falling back to a generic pool).  Output is a pure function of
    (ontology, seed, count); pass a Random instance to share a generator.
    """
    if count < 1:
        raise ParameterError("count must be >= 1")
    if count > max_count:
        raise ParameterError(f"count {count} exceeds maximum {max_count}")
    if o.slot_count() == 0:
        raise ParameterError("ontology has no slots")
    if placeholders is None:
        placeholders = builtin_placeholders()
    combos = [(r, d, s) for r in o.referents for (d, s) in o.slot_keys()]
    if count > len(combos):
        raise ParameterError(
            f"count {count} exceeds the {len(combos)} distinct referent-slot combinations"
        )
    rng = seed if isinstance(seed, random.Random) else random.Random(seed)
    chosen = rng.sample(combos, count)
    out = []
    for referent, domain, slot in chosen:
        sdef = o.slot_def(domain, slot)
        if sdef.kind == CATEGORICAL:
            value = rng.choice(list(sdef.permissible_values))
        else:
            pool = placeholders.get(f"{domain}/{slot}") or placeholders.get("default") or _GENERIC_PLACEHOLDERS
            value = rng.choice(list(pool))
        out.append(Triplet(referent=referent, domain=domain, slot=slot, value=value))
    return out
