"""Lexicon-based NLU and template NLG.

Both directions share one lexicon so that realize/parse round-trips exactly:
the NLG substitutes canonical surface forms into templates, and the NLU
recovers them by greedy longest token-n-gram matching.  Negation and
uncertainty cues are scoped to their clause (clauses break at punctuation and
coordinating conjunctions).  This module replaces a trained tagger with a
deterministic one behind the same semantic-frame contract.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .dialogue import (
    AGENT_KINDS,
    FALSE,
    NOT_SURE,
    SLOT_STATUSES,
    TRUE,
    USER_INTENTS,
    AgentAction,
    SemanticFrame,
)
from .ontology import Ontology

DEFAULT_NEGATION = ("not", "no", "never", "don't", "doesn't", "without")
DEFAULT_UNCERTAIN = (
    "not sure", "unsure", "uncertain", "maybe", "perhaps",
    "hard to say", "cannot tell", "cannot say", "can't tell", "can't say",
)
DEFAULT_AFFIRM = ("yes", "yeah", "yep", "right", "correct", "indeed")
DEFAULT_INTENT_TRIGGERS = {
    "request_disease": (
        "what is wrong", "what could this be", "which disease do i have",
        "what i am suffering from", "what illness", "what disease",
    ),
    "request_symptom": (
        "do you have", "have you noticed", "is there any",
        "does the patient show", "have you been troubled by",
    ),
    "inform_disease": (
        "my diagnosis is", "it looks like", "you may have",
        "this appears to be", "the most likely condition is",
    ),
    "thanks": ("thank you", "thanks"),
    "closing": ("goodbye", "bye", "see you", "take care"),
}

_WORD = re.compile(r"[a-z0-9']+")
_CLAUSE_BREAK = re.compile(r"[.,;:?!]+")
_CONJUNCTIONS = {"and", "but"}


class LexiconError(Exception):
    """Raised on lexicon files that cannot support unambiguous parsing."""


class ParseFailure(Exception):
    """Utterance carried no resolvable intent, slots, or polarity."""


def _tokens(text: str) -> tuple[str, ...]:
    return tuple(_WORD.findall(text.lower()))


def _clauses(text: str) -> list[tuple[str, ...]]:
    out = []
    for chunk in _CLAUSE_BREAK.split(text.lower()):
        toks: list[str] = []
        for w in _WORD.findall(chunk):
            if w in _CONJUNCTIONS:
                if toks:
                    out.append(tuple(toks))
                toks = []
            else:
                toks.append(w)
        if toks:
            out.append(tuple(toks))
    return out


def _contains(haystack: tuple[str, ...], needle: tuple[str, ...]) -> bool:
    n = len(needle)
    return any(haystack[i:i + n] == needle for i in range(len(haystack) - n + 1))


@dataclass
class Lexicon:
    """Surface forms for ontology units plus cue and trigger phrases."""

    symptom_surfaces: dict[str, list[str]]
    disease_surfaces: dict[str, list[str]]
    negation: tuple[str, ...] = DEFAULT_NEGATION
    uncertain: tuple[str, ...] = DEFAULT_UNCERTAIN
    affirm: tuple[str, ...] = DEFAULT_AFFIRM
    intent_triggers: dict[str, tuple[str, ...]] = field(
        default_factory=lambda: dict(DEFAULT_INTENT_TRIGGERS)
    )

    def __post_init__(self):
        self._entries: dict[tuple[str, ...], tuple[str, str]] = {}
        for kind, table in (("symptom", self.symptom_surfaces), ("disease", self.disease_surfaces)):
            for ident, surfaces in table.items():
                if not surfaces:
                    raise LexiconError(f"{kind} {ident!r} has no surface form")
                for surface in surfaces:
                    toks = _tokens(surface)
                    if not toks:
                        raise LexiconError(f"{kind} {ident!r} has an empty surface {surface!r}")
                    if any(t in _CONJUNCTIONS for t in toks):
                        raise LexiconError(
                            f"surface {surface!r} contains a clause-breaking conjunction"
                        )
                    prev = self._entries.get(toks)
                    if prev is not None and prev != (kind, ident):
                        raise LexiconError(
                            f"surface {surface!r} maps to both {prev[1]!r} and {ident!r}"
                        )
                    self._entries[toks] = (kind, ident)
        self._neg = tuple(_tokens(c) for c in self.negation)
        self._unc = tuple(_tokens(c) for c in self.uncertain)
        self._aff = tuple(_tokens(c) for c in self.affirm)
        self._triggers = sorted(
            ((intent, _tokens(t)) for intent, ts in self.intent_triggers.items() for t in ts),
            key=lambda it: -len(it[1]),
        )
        self._max_entry = max((len(t) for t in self._entries), default=1)

    def canonical(self, kind: str, ident: str) -> str:
        table = self.symptom_surfaces if kind == "symptom" else self.disease_surfaces
        return table[ident][0]

    def check_coverage(self, ontology: Ontology) -> None:
        missing = [s for s in ontology.symptoms if s not in self.symptom_surfaces]
        missing += [d for d in ontology.diseases if d not in self.disease_surfaces]
        if missing:
            raise LexiconError(f"lexicon lacks surface forms for: {missing}")

    def scan_entities(self, clause: tuple[str, ...]) -> list[tuple[str, str]]:
        """Greedy left-to-right longest-match over surface token n-grams."""
        found, i = [], 0
        while i < len(clause):
            hit = None
            for n in range(min(self._max_entry, len(clause) - i), 0, -1):
                entry = self._entries.get(clause[i:i + n])
                if entry is not None:
                    hit, i = entry, i + n
                    break
            if hit is not None:
                found.append(hit)
            else:
                i += 1
        return found

    def clause_status(self, clause: tuple[str, ...]) -> str:
        # Uncertainty outranks negation ("not sure" contains "not").
        if any(_contains(clause, c) for c in self._unc):
            return NOT_SURE
        if any(_contains(clause, c) for c in self._neg):
            return FALSE
        return TRUE

    def has_affirm(self, toks: tuple[str, ...]) -> bool:
        return any(_contains(toks, c) for c in self._aff)

    def match_intent(self, toks: tuple[str, ...]) -> str | None:
        for intent, trigger in self._triggers:
            if _contains(toks, trigger):
                return intent
        return None


def lexicon_from_ontology(ontology: Ontology) -> Lexicon:
    """Identity lexicon: identifiers with underscores read as spaces."""
    return Lexicon(
        symptom_surfaces={s: [s.replace("_", " ")] for s in ontology.symptoms},
        disease_surfaces={d: [d.replace("_", " ")] for d in ontology.diseases},
    )


def load_lexicon(path: str | Path) -> Lexicon:
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    triggers = {k: tuple(v) for k, v in raw.get("intents", {}).items()}
    for intent, defaults in DEFAULT_INTENT_TRIGGERS.items():
        triggers.setdefault(intent, defaults)
    return Lexicon(
        symptom_surfaces={k: list(v) for k, v in raw["symptoms"].items()},
        disease_surfaces={k: list(v) for k, v in raw["diseases"].items()},
        negation=tuple(raw.get("negation", DEFAULT_NEGATION)),
        uncertain=tuple(raw.get("uncertain", DEFAULT_UNCERTAIN)),
        affirm=tuple(raw.get("affirm", DEFAULT_AFFIRM)),
        intent_triggers=triggers,
    )


def demo_lexicon() -> Lexicon:
    with resources.files("meddx.data").joinpath("demo_lexicon.json").open("r", encoding="utf-8") as f:
        raw = json.load(f)
    triggers = {k: tuple(v) for k, v in raw["intents"].items()}
    return Lexicon(
        symptom_surfaces=raw["symptoms"],
        disease_surfaces=raw["diseases"],
        negation=tuple(raw["negation"]),
        uncertain=tuple(raw["uncertain"]),
        affirm=tuple(raw["affirm"]),
        intent_triggers=triggers,
    )


_STATUS_INTENT = {TRUE: "confirm_symptom", FALSE: "deny_symptom", NOT_SURE: "not_sure_symptom"}


def nlu_parse(utterance: str, lexicon: Lexicon, context: str | None = None) -> SemanticFrame:
    """Parse an utterance into a semantic frame.

    `context` is the symptom the agent just asked about; a bare polarity
    answer ("Yes.", "Not sure.") resolves against it.  Raises ParseFailure
    when neither intent, slots, nor context-polarity can be resolved.
    """
    if not utterance.strip():
        raise ParseFailure("empty utterance")
    toks = _tokens(utterance)
    slots: dict[str, str] = {}
    disease: str | None = None
    for clause in _clauses(utterance):
        entities = lexicon.scan_entities(clause)
        if not entities:
            continue
        status = lexicon.clause_status(clause)
        for kind, ident in entities:
            if kind == "symptom":
                slots[ident] = status
            else:
                disease = ident

    intent = lexicon.match_intent(toks)
    if intent == "request_symptom":
        requested = next(iter(slots), None)
        if requested is None:
            raise ParseFailure(f"symptom request without a recognizable symptom: {utterance!r}")
        return SemanticFrame(intent="request_symptom", requested_symptom=requested)
    if intent == "inform_disease":
        if disease is None:
            raise ParseFailure(f"diagnosis statement without a recognizable disease: {utterance!r}")
        return SemanticFrame(intent="inform_disease", disease_slot=disease)
    if intent is not None:
        return SemanticFrame(intent=intent, slots=slots, disease_slot=disease)

    if slots:
        anchor = context if context in slots else next(iter(slots))
        return SemanticFrame(intent=_STATUS_INTENT[slots[anchor]], slots=slots)

    # Bare polarity answer resolved against the pending request.
    if context is not None:
        if any(_contains(toks, c) for c in lexicon._unc):
            status = NOT_SURE
        elif any(_contains(toks, c) for c in lexicon._neg):
            status = FALSE
        elif lexicon.has_affirm(toks):
            status = TRUE
        else:
            return SemanticFrame(intent="not_sure_symptom", slots={context: NOT_SURE})
        return SemanticFrame(intent=_STATUS_INTENT[status], slots={context: status})
    raise ParseFailure(f"no resolvable intent in {utterance!r}")


@dataclass
class TemplateSet:
    """Utterance templates per action kind plus per-status self-report fragments."""

    by_kind: dict[str, list[str]]
    fragments: dict[str, list[str]]

    MIN_TEMPLATES = 4
    KINDS = tuple(k for k in AGENT_KINDS) + tuple(
        i for i in USER_INTENTS if i != "closing"  # closing shares the agent entry
    )

    def __post_init__(self):
        for kind in self.KINDS:
            n = len(self.by_kind.get(kind, []))
            if n < self.MIN_TEMPLATES:
                raise ValueError(f"action kind {kind!r} has {n} templates, needs >= {self.MIN_TEMPLATES}")
        for status in SLOT_STATUSES:
            if not self.fragments.get(status):
                raise ValueError(f"missing self-report fragments for status {status!r}")


def load_templates(path: str | Path) -> TemplateSet:
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    fragments = raw.pop("fragments")
    return TemplateSet(by_kind=raw, fragments=fragments)


def default_templates() -> TemplateSet:
    with resources.files("meddx.data").joinpath("templates.json").open("r", encoding="utf-8") as f:
        raw = json.load(f)
    fragments = raw.pop("fragments")
    return TemplateSet(by_kind=raw, fragments=fragments)


def action_frame(action: AgentAction) -> SemanticFrame:
    """Lift an agent action into the frame vocabulary used by NLG/NLU."""
    if action.kind == "inform_disease":
        return SemanticFrame(intent="inform_disease", disease_slot=action.target)
    if action.kind == "request_symptom":
        return SemanticFrame(intent="request_symptom", requested_symptom=action.target)
    return SemanticFrame(intent=action.kind)


def nlg_realize(
    frame: SemanticFrame | AgentAction,
    templates: TemplateSet,
    lexicon: Lexicon,
    rng: np.random.Generator,
) -> str:
    """Render a frame as text: uniform template choice, canonical surface forms."""
    if isinstance(frame, AgentAction):
        frame = action_frame(frame)
    choices = templates.by_kind[frame.intent]
    template = choices[int(rng.integers(len(choices)))]
    fields: dict[str, str] = {}
    if frame.requested_symptom is not None:
        fields["symptom"] = lexicon.canonical("symptom", frame.requested_symptom)
    if frame.disease_slot is not None:
        fields["disease"] = lexicon.canonical("disease", frame.disease_slot)
    if frame.intent == "request_disease":
        clauses = []
        for s, status in frame.slots.items():
            frags = templates.fragments[status]
            frag = frags[int(rng.integers(len(frags)))]
            clauses.append(frag.format(symptom=lexicon.canonical("symptom", s)))
        fields["symptoms"] = " ".join(clauses)
    elif frame.slots:
        # Symptom-answer intents carry a single slot by contract.
        s = next(iter(frame.slots))
        fields["symptom"] = lexicon.canonical("symptom", s)
    try:
        return template.format(**fields).strip()
    except (KeyError, IndexError) as e:
        raise ValueError(f"template {template!r} has unresolvable placeholder: {e}") from e
