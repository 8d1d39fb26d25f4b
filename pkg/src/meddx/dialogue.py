"""Actions, semantic frames, rule-based state tracking and policy-facing encodings.

Symptom statuses use the 4-value alphabet: 1 (confirmed), -1 (denied),
-2 (not sure), 0 (never mentioned).  The action space follows the canonical
ontology order greetings / diseases / symptoms, so the request-action block
is always the last N indices.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .ontology import Ontology

# Slot statuses carried in semantic frames.
TRUE, FALSE, NOT_SURE = "true", "false", "not_sure"
SLOT_STATUSES = (TRUE, FALSE, NOT_SURE)
STATUS_VALUE = {TRUE: 1.0, FALSE: -1.0, NOT_SURE: -2.0}

USER_INTENTS = ("request_disease", "confirm_symptom", "deny_symptom", "not_sure_symptom", "closing")
AGENT_KINDS = ("thanks", "closing", "inform_disease", "request_symptom")
NUM_USER_INTENTS = len(USER_INTENTS)


@dataclass(frozen=True)
class AgentAction:
    """One of: greeting (thanks/closing), inform_disease(d), request_symptom(s)."""

    kind: str
    target: str | None = None

    def __post_init__(self):
        if self.kind not in AGENT_KINDS:
            raise ValueError(f"unknown agent action kind {self.kind!r}")
        needs_target = self.kind in ("inform_disease", "request_symptom")
        if needs_target != (self.target is not None):
            raise ValueError(f"action {self.kind} target mismatch: {self.target!r}")


def action_index(action: AgentAction, ontology: Ontology) -> int:
    G, M = ontology.num_greetings, ontology.num_diseases
    if action.kind in ("thanks", "closing"):
        return ontology.greeting_actions.index(action.kind)
    if action.kind == "inform_disease":
        return G + ontology.disease_index(action.target)
    return G + M + ontology.symptom_index(action.target)


def action_from_index(index: int, ontology: Ontology) -> AgentAction:
    G, M, D = ontology.num_greetings, ontology.num_diseases, ontology.num_actions
    if not 0 <= index < D:
        raise ValueError(f"action index {index} out of range [0, {D})")
    if index < G:
        return AgentAction(kind=ontology.greeting_actions[index])
    if index < G + M:
        return AgentAction(kind="inform_disease", target=ontology.diseases[index - G])
    return AgentAction(kind="request_symptom", target=ontology.symptoms[index - G - M])


def action_table(ontology: Ontology) -> list[tuple[int, str, str]]:
    """(index, kind, identifier) rows for the whole action space."""
    rows = []
    for i in range(ontology.num_actions):
        a = action_from_index(i, ontology)
        rows.append((i, a.kind, a.target or a.kind))
    return rows


@dataclass(frozen=True)
class SemanticFrame:
    """Structured (intent, slots) exchanged between NLU/NLG, tracker and simulator.

    `slots` maps symptom id -> status in {true, false, not_sure}.  Agent
    request frames carry the asked symptom in `requested_symptom` (a request
    asserts no truth value, so it never occupies `slots`).
    """

    intent: str
    slots: dict[str, str] = field(default_factory=dict)
    disease_slot: str | None = None
    requested_symptom: str | None = None

    def validate(self, ontology: Ontology) -> None:
        if self.intent not in USER_INTENTS and self.intent not in AGENT_KINDS:
            raise ValueError(f"unknown intent {self.intent!r}")
        for s, status in self.slots.items():
            if s not in ontology.symptoms:
                raise ValueError(f"frame slot {s!r} not in ontology")
            if status not in SLOT_STATUSES:
                raise ValueError(f"bad slot status {status!r} for {s!r}")
        if self.disease_slot is not None and self.disease_slot not in ontology.diseases:
            raise ValueError(f"frame disease {self.disease_slot!r} not in ontology")
        if self.requested_symptom is not None and self.requested_symptom not in ontology.symptoms:
            raise ValueError(f"requested symptom {self.requested_symptom!r} not in ontology")


@dataclass(frozen=True)
class DialogueState:
    """Immutable per-session state; update operations return new values."""

    symptoms: np.ndarray              # length N over {1, -1, -2, 0}
    prev_agent: AgentAction | None = None
    prev_user: str | None = None      # one of USER_INTENTS
    turn: int = 0                     # agent turns taken so far
    last_request: str | None = None   # set iff prev_agent is request_symptom


def new_state(ontology: Ontology) -> DialogueState:
    return DialogueState(symptoms=np.zeros(ontology.num_symptoms))


def update_symptoms(state: DialogueState, frame: SemanticFrame, ontology: Ontology) -> np.ndarray:
    """Apply a user frame to the symptom vector (latest frame wins per slot).

    An unanswered request is backfilled as not-sure: if the state records a
    pending requested symptom and the frame does not mention it, that entry
    becomes -2.
    """
    vec = state.symptoms.copy()
    for s, status in frame.slots.items():
        vec[ontology.symptom_index(s)] = STATUS_VALUE[status]
    if state.last_request is not None and state.last_request not in frame.slots:
        vec[ontology.symptom_index(state.last_request)] = STATUS_VALUE[NOT_SURE]
    return vec


def observe_user(state: DialogueState, frame: SemanticFrame, ontology: Ontology) -> DialogueState:
    """Track a user frame: update slots, record the user intent, clear the pending request."""
    vec = update_symptoms(state, frame, ontology)
    return replace(state, symptoms=vec, prev_user=frame.intent, last_request=None)


def observe_agent(state: DialogueState, action: AgentAction) -> DialogueState:
    """Track an agent action: bump the turn counter and record any pending request."""
    pending = action.target if action.kind == "request_symptom" else None
    return replace(state, prev_agent=action, last_request=pending, turn=state.turn + 1)


def state_dim(ontology: Ontology, max_turns: int) -> int:
    return ontology.num_symptoms + ontology.num_actions + NUM_USER_INTENTS + max_turns + 1


def encode_state(state: DialogueState, ontology: Ontology, max_turns: int) -> np.ndarray:
    """Feature vector: [symptom values | prev-agent one-hot | prev-user one-hot | turn one-hot]."""
    if state.turn > max_turns:
        raise ValueError(f"turn {state.turn} exceeds max turns {max_turns}")
    D = ontology.num_actions
    agent_oh = np.zeros(D)
    if state.prev_agent is not None:
        agent_oh[action_index(state.prev_agent, ontology)] = 1.0
    user_oh = np.zeros(NUM_USER_INTENTS)
    if state.prev_user in USER_INTENTS:
        user_oh[USER_INTENTS.index(state.prev_user)] = 1.0
    turn_oh = np.zeros(max_turns + 1)
    turn_oh[state.turn] = 1.0
    return np.concatenate([state.symptoms, agent_oh, user_oh, turn_oh])


def allowed_mask(symptoms: np.ndarray, num_actions: int) -> np.ndarray:
    """Boolean mask over actions; requests for known-status symptoms are disallowed.

    Relies on the canonical layout: the last N action indices are the
    request-symptom block.  Greetings and informs are never masked.
    """
    N = symptoms.shape[0]
    mask = np.ones(num_actions, dtype=bool)
    mask[num_actions - N:] = symptoms == 0
    return mask


def mask_actions(q: np.ndarray, state: DialogueState) -> np.ndarray:
    """Set request entries for already-known symptoms to -inf; others unchanged."""
    out = np.array(q, dtype=float, copy=True)
    out[~allowed_mask(state.symptoms, q.shape[0])] = -np.inf
    return out
