import time

import numpy as np
import pytest
from fastapi.testclient import TestClient

from meddx.language import default_templates, lexicon_from_ontology
from meddx.ontology import Ontology, UserGoal, compute_knowledge_stats
from meddx.policy import DiagnosisPolicy, PolicyConfig
from meddx.service import create_app


@pytest.fixture(scope="module")
def assets(request):
    trained = request.getfixturevalue("trained_separable")
    policy = trained["policy"]
    lexicon = lexicon_from_ontology(policy.ontology)
    return policy, lexicon, default_templates()


@pytest.fixture()
def client(assets):
    policy, lexicon, templates = assets
    app = create_app(policy, lexicon, templates, seed=1)
    return TestClient(app)


def drive_to_diagnosis(client, replies=("Not sure.", "Not sure.", "Yes.")):
    r = client.post("/sessions", json={"self_report": "I feel bad. What is wrong with me?"})
    assert r.status_code == 201
    payload = r.json()
    sid = payload["id"]
    for reply in replies:
        if payload["status"] != "open":
            break
        r = client.post(f"/sessions/{sid}/messages", json={"text": reply})
        assert r.status_code == 200
        payload = {**payload, **r.json()}
    return sid, payload


class TestSessionLifecycle:
    def test_create_returns_first_question(self, client):
        r = client.post("/sessions", json={"self_report": "I feel bad. What is wrong with me?"})
        assert r.status_code == 201
        body = r.json()
        assert body["id"]
        assert body["agent_utterance"]
        assert body["status"] == "open"

    def test_empty_self_report_400(self, client):
        assert client.post("/sessions", json={"self_report": "   "}).status_code == 400

    def test_unknown_session_404(self, client):
        assert client.get("/sessions/nope").status_code == 404
        assert client.post("/sessions/nope/messages", json={"text": "hi"}).status_code == 404

    def test_scripted_conversation_reaches_diagnosis(self, client):
        sid, payload = drive_to_diagnosis(client)
        assert payload["status"] == "success"
        assert payload["diagnosis"] in [f"dis_{i:02d}" for i in range(4)]
        record = client.get(f"/sessions/{sid}").json()
        assert record["status"] == "success"
        assert record["diagnosis"] == payload["diagnosis"]
        # opening user turn, then agent/user alternation
        speakers = [t["speaker"] for t in record["transcript"]]
        assert speakers[0] == "user"
        assert all(s != t for s, t in zip(speakers, speakers[1:]))

    def test_message_after_close_409(self, client):
        sid, payload = drive_to_diagnosis(client)
        assert payload["status"] == "success"
        r = client.post(f"/sessions/{sid}/messages", json={"text": "Yes."})
        assert r.status_code == 409

    def test_empty_message_400(self, client):
        r = client.post("/sessions", json={"self_report": "What is wrong with me?"})
        sid = r.json()["id"]
        assert client.post(f"/sessions/{sid}/messages", json={"text": ""}).status_code == 400

    def test_self_report_symptoms_prefill_state(self, client):
        # A recognizable symptom in the self-report is never asked again.
        r = client.post("/sessions", json={"self_report": "I have sym 00. What is wrong with me?"})
        body = r.json()
        assert "sym 00" not in body["agent_utterance"]

    def test_unparseable_self_report_still_opens(self, client):
        r = client.post("/sessions", json={"self_report": "qwerty asdf"})
        assert r.status_code == 201
        assert r.json()["status"] == "open"


class TestTurnBudget:
    @pytest.fixture()
    def request_happy_client(self):
        # Basic-mode policy rigged to always prefer symptom requests; with more
        # symptoms than the turn budget the session must close at T.
        onto = Ontology(
            diseases=("d1", "d2"),
            symptoms=tuple(f"s{i:02d}" for i in range(30)),
        )
        goals = (UserGoal(disease_tag="d1", implicit_symptoms={"s00": True}),
                 UserGoal(disease_tag="d2", implicit_symptoms={"s01": True}))
        stats = compute_knowledge_stats(goals, onto)
        pol = DiagnosisPolicy(onto, stats, PolicyConfig(mode="basic", hidden=4, max_turns=22, seed=0))
        pol.params.W1[:] = 0.0
        pol.params.W2[:] = 0.0
        pol.params.b2[:] = 0.0
        pol.params.b2[onto.num_greetings + onto.num_diseases:] = 1.0
        app = create_app(pol, lexicon_from_ontology(onto), default_templates(), seed=0)
        return TestClient(app)

    def test_session_closes_at_turn_budget(self, request_happy_client):
        c = request_happy_client
        r = c.post("/sessions", json={"self_report": "What is wrong with me?"})
        sid = r.json()["id"]
        status = r.json()["status"]
        messages_sent = 0
        while status == "open":
            r = c.post(f"/sessions/{sid}/messages", json={"text": "Not sure."})
            assert r.status_code == 200
            status = r.json()["status"]
            messages_sent += 1
            assert messages_sent <= 22
        assert status == "failed"
        record = c.get(f"/sessions/{sid}").json()
        agent_turns = sum(1 for t in record["transcript"] if t["speaker"] == "agent")
        assert agent_turns == 22
        # the T+1-th user message is rejected
        assert c.post(f"/sessions/{sid}/messages", json={"text": "Yes."}).status_code == 409


class TestPersistence:
    def test_reload_reproduces_get(self, assets, tmp_path):
        policy, lexicon, templates = assets
        persist = tmp_path / "sessions.jsonl"
        app = create_app(policy, lexicon, templates, persist_path=persist, seed=1)
        with TestClient(app) as c:
            sid, _ = drive_to_diagnosis(c)
            before = c.get(f"/sessions/{sid}").json()
        app2 = create_app(policy, lexicon, templates, persist_path=persist, seed=1)
        with TestClient(app2) as c2:
            after = c2.get(f"/sessions/{sid}").json()
        assert after == before


class TestLatency:
    def test_forward_plus_nlg_under_50ms(self, assets):
        policy, lexicon, templates = assets
        from meddx import dialogue
        from meddx.language import nlg_realize
        rng = np.random.default_rng(0)
        state = dialogue.new_state(policy.ontology)
        start = time.perf_counter()
        n = 200
        for _ in range(n):
            idx = policy.act(state, 0.0, rng)
            nlg_realize(dialogue.action_from_index(idx, policy.ontology),
                        templates, lexicon, rng)
        per_turn = (time.perf_counter() - start) / n
        assert per_turn < 0.05
