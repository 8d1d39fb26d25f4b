import numpy as np
import pytest

from meddx.dialogue import AgentAction, SemanticFrame
from meddx.language import (
    Lexicon,
    LexiconError,
    ParseFailure,
    default_templates,
    demo_lexicon,
    lexicon_from_ontology,
    load_lexicon,
    load_templates,
    nlg_realize,
    nlu_parse,
)
from meddx.ontology import Ontology
from meddx.synthetic import DEMO_DISEASES, DEMO_SYMPTOMS


@pytest.fixture(scope="module")
def lex():
    return demo_lexicon()


@pytest.fixture(scope="module")
def tpl():
    return default_templates()


@pytest.fixture(scope="module")
def demo_onto():
    return Ontology(diseases=DEMO_DISEASES, symptoms=DEMO_SYMPTOMS)


class TestLexicon:
    def test_demo_covers_demo_ontology(self, lex, demo_onto):
        lex.check_coverage(demo_onto)

    def test_missing_coverage_reported(self, lex):
        bigger = Ontology(diseases=DEMO_DISEASES, symptoms=DEMO_SYMPTOMS + ("weird_pain",))
        with pytest.raises(LexiconError, match="weird_pain"):
            lex.check_coverage(bigger)

    def test_duplicate_surface_rejected(self):
        with pytest.raises(LexiconError, match="maps to both"):
            Lexicon(symptom_surfaces={"a": ["ouch"], "b": ["ouch"]}, disease_surfaces={})

    def test_conjunction_in_surface_rejected(self):
        with pytest.raises(LexiconError, match="conjunction"):
            Lexicon(symptom_surfaces={"a": ["hand and foot"]}, disease_surfaces={})

    def test_auto_lexicon_reads_underscores_as_spaces(self):
        onto = Ontology(diseases=("some_disease",), symptoms=("sore_throat",))
        lex = lexicon_from_ontology(onto)
        assert lex.canonical("symptom", "sore_throat") == "sore throat"
        lex.check_coverage(onto)

    def test_load_from_file(self, tmp_path):
        blob = """{
          "symptoms": {"fever": ["fever"]},
          "diseases": {"flu": ["flu", "influenza"]},
          "negation": ["not", "no"],
          "uncertain": ["not sure"],
          "intents": {"closing": ["goodbye"]}
        }"""
        p = tmp_path / "lex.json"
        p.write_text(blob)
        lex = load_lexicon(p)
        assert lex.canonical("disease", "flu") == "flu"
        # defaults fill for unlisted intents
        assert "request_symptom" in lex.intent_triggers


class TestParse:
    def test_confirm_with_symptom(self, lex):
        frame = nlu_parse("Yes, he does have bloating", lex)
        assert frame.intent == "confirm_symptom"
        assert frame.slots == {"bloating": "true"}

    def test_bare_not_sure_uses_context(self, lex):
        frame = nlu_parse("Not sure.", lex, context="sputum")
        assert frame.intent == "not_sure_symptom"
        assert frame.slots == {"sputum": "not_sure"}

    def test_bare_yes_and_no_use_context(self, lex):
        assert nlu_parse("Yes.", lex, context="fever").slots == {"fever": "true"}
        assert nlu_parse("No.", lex, context="fever").slots == {"fever": "false"}

    def test_negation_scoped_to_clause(self, lex):
        frame = nlu_parse("I do not have a cough. I have a fever.", lex)
        assert frame.slots == {"cough": "false", "fever": "true"}

    def test_conjunction_breaks_clause(self, lex):
        frame = nlu_parse("no cough and fever", lex)
        assert frame.slots == {"cough": "false", "fever": "true"}

    def test_multiword_surface_longest_match(self, lex):
        frame = nlu_parse("My kid has a runny nose today", lex)
        assert frame.slots == {"runny_nose": "true"}

    def test_gibberish_without_context_fails(self, lex):
        with pytest.raises(ParseFailure):
            nlu_parse("lorem ipsum dolor", lex)

    def test_gibberish_with_context_backstops_not_sure(self, lex):
        frame = nlu_parse("lorem ipsum dolor", lex, context="fever")
        assert frame.intent == "not_sure_symptom"
        assert frame.slots == {"fever": "not_sure"}

    def test_empty_utterance_fails(self, lex):
        with pytest.raises(ParseFailure):
            nlu_parse("   ", lex)

    def test_agent_question_parses_as_request(self, lex):
        frame = nlu_parse("Do you have wheezing?", lex)
        assert frame == SemanticFrame(intent="request_symptom", requested_symptom="wheezing")

    def test_diagnosis_statement_parses_as_inform(self, lex):
        frame = nlu_parse("My diagnosis is bronchitis.", lex)
        assert frame == SemanticFrame(intent="inform_disease", disease_slot="bronchitis")

    def test_self_report_parses_as_disease_request(self, lex):
        frame = nlu_parse("I have diarrhea. No fever. What is wrong with me?", lex)
        assert frame.intent == "request_disease"
        assert frame.slots == {"diarrhea": "true", "fever": "false"}


class TestRealize:
    def test_seeded_determinism(self, lex, tpl):
        f = SemanticFrame(intent="confirm_symptom", slots={"fever": "true"})
        a = nlg_realize(f, tpl, lex, np.random.default_rng(9))
        b = nlg_realize(f, tpl, lex, np.random.default_rng(9))
        assert a == b

    def test_inform_mentions_disease_exactly_once(self, lex, tpl, rng):
        for _ in range(20):
            text = nlg_realize(AgentAction("inform_disease", "rhinitis"), tpl, lex, rng)
            assert text.lower().count("rhinitis") == 1

    def test_request_uses_canonical_surface(self, lex, tpl, rng):
        text = nlg_realize(AgentAction("request_symptom", "runny_nose"), tpl, lex, rng)
        assert "runny nose" in text.lower()

    def test_unresolvable_placeholder_raises(self, lex, rng, tpl):
        broken = default_templates()
        broken.by_kind["thanks"] = ["Thanks {nothing}."] * 4
        with pytest.raises(ValueError, match="placeholder"):
            nlg_realize(SemanticFrame(intent="thanks"), broken, lex, rng)

    def test_template_count_contract(self, tmp_path, tpl):
        import json
        raw = {k: list(v) for k, v in tpl.by_kind.items()}
        raw["fragments"] = tpl.fragments
        raw["closing"] = ["Bye."]
        p = tmp_path / "tpl.json"
        p.write_text(json.dumps(raw))
        with pytest.raises(ValueError, match="needs >= 4"):
            load_templates(p)


def all_frames(lexicon, rng, fillings=5):
    """One frame per action kind per random filling."""
    symptoms = list(lexicon.symptom_surfaces)
    diseases = list(lexicon.disease_surfaces)
    statuses = ["true", "false", "not_sure"]
    frames = []
    for _ in range(fillings):
        s = symptoms[int(rng.integers(len(symptoms)))]
        d = diseases[int(rng.integers(len(diseases)))]
        status = statuses[int(rng.integers(3))]
        k = int(rng.integers(1, 4))
        mixed = {
            sym: statuses[int(rng.integers(3))]
            for sym in rng.choice(symptoms, size=k, replace=False)
        }
        frames += [
            SemanticFrame(intent="request_symptom", requested_symptom=s),
            SemanticFrame(intent="inform_disease", disease_slot=d),
            SemanticFrame(intent="thanks"),
            SemanticFrame(intent="closing"),
            SemanticFrame(intent="confirm_symptom", slots={s: "true"}),
            SemanticFrame(intent="deny_symptom", slots={s: "false"}),
            SemanticFrame(intent="not_sure_symptom", slots={s: "not_sure"}),
            SemanticFrame(intent="request_disease", slots=mixed),
            SemanticFrame(intent="request_disease", slots={}),
            SemanticFrame(intent=f"{ {'true':'confirm','false':'deny','not_sure':'not_sure'}[status] }_symptom",
                          slots={s: status}),
        ]
    return frames


class TestRoundTrip:
    @pytest.mark.parametrize("which", ["demo", "auto"])
    def test_realize_parse_round_trip(self, which, tpl):
        if which == "demo":
            lexicon = demo_lexicon()
        else:
            onto = Ontology(
                diseases=tuple(f"dis_{i:02d}" for i in range(4)),
                symptoms=tuple(f"sym_{i:02d}" for i in range(12)),
            )
            lexicon = lexicon_from_ontology(onto)
        rng = np.random.default_rng(77)
        for frame in all_frames(lexicon, rng):
            for _ in range(6):  # cover every template choice with high probability
                text = nlg_realize(frame, tpl, lexicon, rng)
                context = frame.requested_symptom or next(iter(frame.slots), None)
                back = nlu_parse(text, lexicon, context=context)
                assert back == frame, (text, back, frame)

    def test_every_template_exactly(self, tpl):
        # Deterministic sweep: force each template index via a stub rng.
        lexicon = demo_lexicon()

        class FixedRng:
            def __init__(self, idx):
                self.idx = idx

            def integers(self, n):
                return min(self.idx, n - 1)

        frames = all_frames(lexicon, np.random.default_rng(5), fillings=2)
        for frame in frames:
            n_templates = len(tpl.by_kind[frame.intent])
            for idx in range(n_templates):
                text = nlg_realize(frame, tpl, lexicon, FixedRng(idx))
                context = frame.requested_symptom or next(iter(frame.slots), None)
                back = nlu_parse(text, lexicon, context=context)
                assert back == frame, (idx, text, back, frame)
