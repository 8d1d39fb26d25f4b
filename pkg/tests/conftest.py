import time

import numpy as np
import pytest

from meddx.ontology import Ontology, UserGoal, compute_knowledge_stats
from meddx.policy import DiagnosisPolicy, PolicyConfig
from meddx.simulator import REWARD_SCHEMES
from meddx.synthetic import separable_dataset
from meddx.training import TrainerConfig, train


@pytest.fixture(scope="session")
def toy_ontology():
    # D = 2 greetings + 2 diseases + 3 symptoms = 7
    return Ontology(diseases=("d1", "d2"), symptoms=("s1", "s2", "s3"))


@pytest.fixture(scope="session")
def toy_goals():
    return (
        UserGoal(disease_tag="d1", explicit_symptoms={"s1": True}, implicit_symptoms={"s2": True}),
        UserGoal(disease_tag="d1", explicit_symptoms={"s1": True}),
        UserGoal(disease_tag="d2", explicit_symptoms={"s2": True}, implicit_symptoms={"s3": True}),
    )


@pytest.fixture(scope="session")
def toy_stats(toy_goals, toy_ontology):
    return compute_knowledge_stats(toy_goals, toy_ontology)


@pytest.fixture(scope="session")
def separable():
    return separable_dataset(4, 3, 200, 200, seed=0)


@pytest.fixture(scope="session")
def separable_stats(separable):
    return compute_knowledge_stats(separable.train, separable.ontology)


@pytest.fixture(scope="session")
def fresh_policy(separable, separable_stats):
    return DiagnosisPolicy(
        separable.ontology, separable_stats,
        PolicyConfig(mode="full", hidden=128, max_turns=22, seed=0),
    )


@pytest.fixture(scope="session")
def trained_separable(separable, separable_stats):
    """Full-model convergence run with the reference hyperparameters.

    gamma 0.9, epsilon 0.1, batch 32, lr 0.01, buffer 10000, 100 sims/epoch;
    stops early once greedy eval success reaches 0.95.
    """
    policy = DiagnosisPolicy(
        separable.ontology, separable_stats,
        PolicyConfig(mode="full", hidden=128, max_turns=22, seed=0),
    )
    config = TrainerConfig(
        gamma=0.9, epsilon=0.1, batch=32, lr=0.01, sims_per_epoch=100,
        epochs=300, eval_episodes=200, buffer_capacity=10000, seed=0,
        early_stop_success=0.95,
    )
    start = time.monotonic()
    report, best = train(config, separable, policy, REWARD_SCHEMES["default"])
    wall = time.monotonic() - start
    assert best is not None
    return {"dataset": separable, "policy": best, "report": report, "wall": wall}


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)
