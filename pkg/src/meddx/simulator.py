"""Simulated patient: plays one user goal per session and emits rewards.

The patient discloses all explicit symptoms in the opening turn, answers
symptom requests truthfully (confirm / deny / not sure), and terminates the
session on a diagnosis or when the turn budget runs out.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dialogue import FALSE, NOT_SURE, TRUE, AgentAction, SemanticFrame
from .ontology import Dataset, UserGoal

DEFAULT_MAX_TURNS = 22

SUCCESS = "success"
FAIL_WRONG_DISEASE = "fail_wrong_disease"
FAIL_MAX_TURNS = "fail_max_turns"
OUTCOMES = (SUCCESS, FAIL_WRONG_DISEASE, FAIL_MAX_TURNS)


@dataclass(frozen=True)
class RewardScheme:
    """Terminal rewards plus the per-turn penalty for off-goal symptom requests."""

    success: float
    failure: float
    miss_penalty: float
    name: str = "custom"

    def __post_init__(self):
        if not self.success > 0 > self.failure:
            raise ValueError(f"reward scheme needs success > 0 > failure, got {self}")


# Main scheme follows 2L / -L / -1 with the turn budget L = 22; the remaining
# presets are the smaller-magnitude variants used for reward-scale comparisons.
REWARD_SCHEMES: dict[str, RewardScheme] = {
    "default": RewardScheme(44.0, -22.0, -1.0, name="default"),
    "R1": RewardScheme(22.0, -11.0, -1.0, name="R1"),
    "R2": RewardScheme(11.0, -6.0, -1.0, name="R2"),
    "R1*": RewardScheme(22.0, -11.0, -0.5, name="R1*"),
    "R2*": RewardScheme(11.0, -6.0, -0.25, name="R2*"),
}


def parse_reward_scheme(text: str) -> RewardScheme:
    """Scheme by preset name, or a custom 'success,failure,penalty' triple."""
    if text in REWARD_SCHEMES:
        return REWARD_SCHEMES[text]
    parts = text.split(",")
    if len(parts) != 3:
        raise ValueError(f"unknown reward scheme {text!r} (presets: {sorted(REWARD_SCHEMES)})")
    s, f, p = (float(x) for x in parts)
    return RewardScheme(s, f, -abs(p), name=text)


class SessionDoneError(Exception):
    """Raised when an agent action arrives after the session has terminated."""


@dataclass
class SimSession:
    goal: UserGoal
    max_turns: int = DEFAULT_MAX_TURNS
    turn: int = 0
    done: bool = False
    outcome: str | None = None


def sample_goal(split: tuple[UserGoal, ...] | list[UserGoal], rng: np.random.Generator) -> UserGoal:
    """Uniform draw from a dataset split."""
    if not split:
        raise ValueError("cannot sample from an empty goal split")
    return split[int(rng.integers(len(split)))]


def start_session(goal: UserGoal, max_turns: int = DEFAULT_MAX_TURNS) -> SimSession:
    return SimSession(goal=goal, max_turns=max_turns)


def initial_frame(goal: UserGoal) -> SemanticFrame:
    """Opening user turn: disease request carrying every explicit symptom."""
    slots = {s: (TRUE if v else FALSE) for s, v in goal.explicit_symptoms.items()}
    return SemanticFrame(intent="request_disease", slots=slots)


def respond(
    session: SimSession, agent_action: AgentAction, scheme: RewardScheme
) -> tuple[SemanticFrame | None, float]:
    """Answer one agent action; returns (user frame or None if terminal, reward).

    A request is penalized only when the symptom does not exist in the goal's
    implicit set; confirmed and denied symptoms cost nothing.  Reaching the
    turn budget without a diagnosis fails the session with the failure reward
    added on top of any request penalty earned that turn.
    """
    if session.done:
        raise SessionDoneError("agent acted on a finished session")
    session.turn += 1
    goal = session.goal

    if agent_action.kind == "inform_disease":
        session.done = True
        if agent_action.target == goal.disease_tag:
            session.outcome = SUCCESS
            return None, scheme.success
        session.outcome = FAIL_WRONG_DISEASE
        return None, scheme.failure

    if agent_action.kind in ("thanks", "closing"):
        # The agent gave up without informing: terminal failure.
        session.done = True
        session.outcome = FAIL_WRONG_DISEASE
        return None, scheme.failure

    symptom = agent_action.target
    truth = goal.symptom_truth(symptom)
    if truth is True:
        frame = SemanticFrame(intent="confirm_symptom", slots={symptom: TRUE})
    elif truth is False:
        frame = SemanticFrame(intent="deny_symptom", slots={symptom: FALSE})
    else:
        frame = SemanticFrame(intent="not_sure_symptom", slots={symptom: NOT_SURE})
    reward = 0.0 if symptom in goal.implicit_symptoms else scheme.miss_penalty

    if session.turn >= session.max_turns:
        session.done = True
        session.outcome = FAIL_MAX_TURNS
        reward += scheme.failure
        return None, reward
    return frame, reward


def is_request_hit(goal: UserGoal, symptom: str) -> bool:
    """A request 'matches' when the symptom exists among the goal's implicit symptoms."""
    return symptom in goal.implicit_symptoms


def split_goals(dataset: Dataset, split: str) -> tuple[UserGoal, ...]:
    if split == "train":
        return dataset.train
    if split == "test":
        return dataset.test
    raise ValueError(f"unknown split {split!r}")
