"""Dialogue engine for automatic medical diagnosis.

A reinforcement-learned agent requests symptoms from a (simulated or human)
patient and informs a disease.  Action values fuse a learned Q-branch, a
learned action-relation matrix, and a fixed conditional-probability knowledge
graph built from the training corpus.
"""

from .dialogue import AgentAction, DialogueState, SemanticFrame
from .ontology import (
    Dataset,
    KnowledgeStats,
    Ontology,
    UserGoal,
    build_relation_init,
    compute_knowledge_stats,
    load_dataset,
    ontology_hash,
    save_dataset,
)
from .policy import DiagnosisPolicy, PolicyConfig, load_bundle, save_bundle
from .simulator import REWARD_SCHEMES, RewardScheme
from .training import ErrorModel, ReplayBuffer, TrainerConfig, evaluate, run_episode, train

__version__ = "0.1.0"

__all__ = [
    "AgentAction",
    "Dataset",
    "DiagnosisPolicy",
    "DialogueState",
    "ErrorModel",
    "KnowledgeStats",
    "Ontology",
    "PolicyConfig",
    "REWARD_SCHEMES",
    "ReplayBuffer",
    "RewardScheme",
    "SemanticFrame",
    "TrainerConfig",
    "UserGoal",
    "build_relation_init",
    "compute_knowledge_stats",
    "evaluate",
    "load_bundle",
    "load_dataset",
    "ontology_hash",
    "run_episode",
    "save_bundle",
    "save_dataset",
    "train",
]
