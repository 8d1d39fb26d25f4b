"""HTTP session service for live human-agent diagnosis chat.

Sessions hold one dialogue each: the opening self-report, alternating
agent/user turns, and a terminal diagnosis (or failure at the turn budget).
The agent runs the greedy masked policy; exploration is a training-only
concern.  Storage is in-memory with optional append-only JSONL persistence.
"""

from __future__ import annotations

import json
import threading
import time
import uuid
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from . import dialogue
from .dialogue import AgentAction, DialogueState, SemanticFrame
from .language import Lexicon, ParseFailure, TemplateSet, action_frame, nlg_realize, nlu_parse
from .policy import DiagnosisPolicy

OPEN, SUCCESS, FAILED = "open", "success", "failed"


def _frame_dict(frame: SemanticFrame | None) -> dict | None:
    if frame is None:
        return None
    return {
        "intent": frame.intent,
        "slots": dict(frame.slots),
        "disease_slot": frame.disease_slot,
        "requested_symptom": frame.requested_symptom,
    }


def _state_dict(state: DialogueState) -> dict:
    return {
        "symptoms": state.symptoms.tolist(),
        "prev_agent": asdict(state.prev_agent) if state.prev_agent else None,
        "prev_user": state.prev_user,
        "turn": state.turn,
        "last_request": state.last_request,
    }


def _state_from_dict(d: dict) -> DialogueState:
    prev_agent = AgentAction(**d["prev_agent"]) if d["prev_agent"] else None
    return DialogueState(
        symptoms=np.array(d["symptoms"], dtype=float),
        prev_agent=prev_agent,
        prev_user=d["prev_user"],
        turn=d["turn"],
        last_request=d["last_request"],
    )


@dataclass
class SessionRecord:
    session_id: str
    state: DialogueState
    transcript: list[dict] = field(default_factory=list)
    status: str = OPEN
    diagnosis: str | None = None

    def add_turn(self, speaker: str, utterance: str, frame: SemanticFrame | None,
                 action_index: int | None) -> None:
        self.transcript.append({
            "speaker": speaker,
            "utterance": utterance,
            "frame": _frame_dict(frame),
            "action_index": action_index,
            "timestamp": time.time(),
        })

    def to_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "transcript": list(self.transcript),
            "status": self.status,
            "diagnosis": self.diagnosis,
            "state": _state_dict(self.state),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SessionRecord":
        return cls(
            session_id=d["session_id"],
            state=_state_from_dict(d["state"]),
            transcript=list(d["transcript"]),
            status=d["status"],
            diagnosis=d["diagnosis"],
        )


class SessionStore:
    """In-memory session map; snapshots appended to a JSONL file when enabled."""

    def __init__(self, persist_path: str | Path | None = None):
        self._records: dict[str, SessionRecord] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._global = threading.Lock()
        self._persist = Path(persist_path) if persist_path else None
        if self._persist is not None and self._persist.exists():
            for line in self._persist.read_text(encoding="utf-8").splitlines():
                if line.strip():
                    rec = SessionRecord.from_dict(json.loads(line))
                    self._records[rec.session_id] = rec
                    self._locks[rec.session_id] = threading.Lock()

    def create(self, record: SessionRecord) -> None:
        with self._global:
            self._records[record.session_id] = record
            self._locks[record.session_id] = threading.Lock()

    def lock(self, session_id: str) -> threading.Lock:
        with self._global:
            if session_id not in self._locks:
                raise KeyError(session_id)
            return self._locks[session_id]

    def get(self, session_id: str) -> SessionRecord:
        rec = self._records.get(session_id)
        if rec is None:
            raise KeyError(session_id)
        return rec

    def snapshot(self, record: SessionRecord) -> None:
        if self._persist is not None:
            with self._global:
                with open(self._persist, "a", encoding="utf-8") as f:
                    f.write(json.dumps(record.to_dict(), sort_keys=True) + "\n")


class StartSessionRequest(BaseModel):
    self_report: str


class MessageRequest(BaseModel):
    text: str


def create_app(
    policy: DiagnosisPolicy,
    lexicon: Lexicon,
    templates: TemplateSet,
    persist_path: str | Path | None = None,
    seed: int = 0,
) -> FastAPI:
    lexicon.check_coverage(policy.ontology)
    app = FastAPI(title="meddx diagnosis chat")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"],
    )
    store = SessionStore(persist_path)
    rng = np.random.default_rng(seed)
    T = policy.config.max_turns

    def agent_turn(rec: SessionRecord) -> str:
        """Pick the greedy action, realize it, and settle the session status."""
        action_idx = policy.act(rec.state, epsilon=0.0, rng=rng)
        action = dialogue.action_from_index(action_idx, policy.ontology)
        rec.state = dialogue.observe_agent(rec.state, action)
        utterance = nlg_realize(action, templates, lexicon, rng)
        rec.add_turn("agent", utterance, action_frame(action), action_idx)
        if action.kind == "inform_disease":
            rec.status = SUCCESS
            rec.diagnosis = action.target
        elif action.kind in ("thanks", "closing") or rec.state.turn >= T:
            rec.status = FAILED
        return utterance

    def reply_payload(rec: SessionRecord, utterance: str) -> dict:
        payload = {"agent_utterance": utterance, "status": rec.status}
        if rec.diagnosis is not None:
            payload["diagnosis"] = rec.diagnosis
        return payload

    @app.post("/sessions", status_code=201)
    def create_session(req: StartSessionRequest):
        if not req.self_report.strip():
            raise HTTPException(status_code=400, detail="self_report must not be empty")
        try:
            frame = nlu_parse(req.self_report, lexicon)
        except ParseFailure:
            # Unrecognized self-report still opens a dialogue with no known slots.
            frame = SemanticFrame(intent="request_disease")
        rec = SessionRecord(session_id=uuid.uuid4().hex, state=dialogue.new_state(policy.ontology))
        rec.add_turn("user", req.self_report, frame, None)
        rec.state = dialogue.observe_user(rec.state, frame, policy.ontology)
        utterance = agent_turn(rec)
        store.create(rec)
        store.snapshot(rec)
        return {"id": rec.session_id, **reply_payload(rec, utterance)}

    @app.post("/sessions/{session_id}/messages")
    def post_message(session_id: str, req: MessageRequest):
        try:
            lock = store.lock(session_id)
        except KeyError:
            raise HTTPException(status_code=404, detail="unknown session") from None
        with lock:
            rec = store.get(session_id)
            if rec.status != OPEN:
                raise HTTPException(status_code=409, detail="session is closed")
            if not req.text.strip():
                raise HTTPException(status_code=400, detail="text must not be empty")
            context = rec.state.last_request
            try:
                frame = nlu_parse(req.text, lexicon, context=context)
            except ParseFailure:
                raise HTTPException(
                    status_code=400, detail="could not understand the message"
                ) from None
            rec.add_turn("user", req.text, frame, None)
            rec.state = dialogue.observe_user(rec.state, frame, policy.ontology)
            utterance = agent_turn(rec)
            store.snapshot(rec)
            return reply_payload(rec, utterance)

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        try:
            rec = store.get(session_id)
        except KeyError:
            raise HTTPException(status_code=404, detail="unknown session") from None
        return rec.to_dict()

    return app
