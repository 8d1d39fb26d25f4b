"""Synthetic goal corpora for benchmarks, convergence tests and demos.

The separable corpus assigns each disease its own disjoint block of symptoms;
a goal's implicit symptoms are its disease's whole block, so one confirmed
symptom identifies the disease.
"""

from __future__ import annotations

import numpy as np

from .ontology import Dataset, Ontology, UserGoal

DEMO_DISEASES = ("dyspepsia", "enteritis", "rhinitis", "bronchitis")
DEMO_SYMPTOMS = (
    "bloating", "anorexia", "vomiting",
    "diarrhea", "fever",
    "runny_nose", "sneezing",
    "cough", "sputum", "wheezing",
)
DEMO_BLOCKS = {
    "dyspepsia": ("bloating", "anorexia", "vomiting"),
    "enteritis": ("diarrhea", "vomiting", "fever"),
    "rhinitis": ("runny_nose", "sneezing", "cough"),
    "bronchitis": ("cough", "sputum", "wheezing"),
}


def separable_ontology(num_diseases: int = 4, symptoms_per_disease: int = 3) -> Ontology:
    diseases = tuple(f"dis_{i:02d}" for i in range(num_diseases))
    symptoms = tuple(
        f"sym_{i:02d}" for i in range(num_diseases * symptoms_per_disease)
    )
    return Ontology(diseases=diseases, symptoms=symptoms)


def separable_dataset(
    num_diseases: int = 4,
    symptoms_per_disease: int = 3,
    train_goals: int = 200,
    test_goals: int = 200,
    seed: int = 0,
    explicit_per_goal: int = 0,
) -> Dataset:
    """Disjoint-block corpus: disease i owns symptoms [i*k, (i+1)*k).

    With explicit_per_goal > 0, that many block symptoms move from the
    implicit set into the opening self-report.
    """
    onto = separable_ontology(num_diseases, symptoms_per_disease)
    rng = np.random.default_rng(seed)

    def make_goal() -> UserGoal:
        d = int(rng.integers(num_diseases))
        block = [
            onto.symptoms[d * symptoms_per_disease + j] for j in range(symptoms_per_disease)
        ]
        n_explicit = min(explicit_per_goal, symptoms_per_disease - 1)
        chosen = rng.permutation(symptoms_per_disease)
        explicit = {block[i]: True for i in chosen[:n_explicit]}
        implicit = {block[i]: True for i in chosen[n_explicit:]}
        return UserGoal(
            disease_tag=onto.diseases[d],
            explicit_symptoms=explicit,
            implicit_symptoms=implicit,
        )

    train = tuple(make_goal() for _ in range(train_goals))
    test = tuple(make_goal() for _ in range(test_goals))
    return Dataset(train=train, test=test, ontology=onto)


def demo_dataset(train_goals: int = 160, test_goals: int = 40, seed: int = 7) -> Dataset:
    """English-named corpus matching the shipped demo lexicon.

    Blocks overlap (cough, vomiting appear in two diseases), and goals carry
    one explicit symptom plus occasional denied distractors, so dialogues look
    more like real triage than the separable benchmark.
    """
    onto = Ontology(diseases=DEMO_DISEASES, symptoms=DEMO_SYMPTOMS)
    rng = np.random.default_rng(seed)
    others = {
        d: [s for s in DEMO_SYMPTOMS if s not in DEMO_BLOCKS[d]] for d in DEMO_DISEASES
    }

    def make_goal() -> UserGoal:
        d = DEMO_DISEASES[int(rng.integers(len(DEMO_DISEASES)))]
        block = list(DEMO_BLOCKS[d])
        order = rng.permutation(len(block))
        explicit = {block[order[0]]: True}
        implicit = {block[i]: True for i in order[1:]}
        if rng.random() < 0.5:
            distractor = others[d][int(rng.integers(len(others[d])))]
            implicit[distractor] = False
        return UserGoal(disease_tag=d, explicit_symptoms=explicit, implicit_symptoms=implicit)

    train = tuple(make_goal() for _ in range(train_goals))
    test = tuple(make_goal() for _ in range(test_goals))
    return Dataset(train=train, test=test, ontology=onto)
