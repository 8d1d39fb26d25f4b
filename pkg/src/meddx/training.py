"""Deep Q-learning driver: replay, target network, episode rollout, epoch loop.

One epoch = a block of simulated dialogues appended to the replay buffer,
a pass of sampled gradient batches against a frozen target network, a greedy
evaluation, and the buffer-flush-on-new-best rule.  The target network is
refreshed from the online network once per epoch, after the gradient steps.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import dialogue
from .dialogue import SLOT_STATUSES, USER_INTENTS, AgentAction, SemanticFrame
from .language import Lexicon, TemplateSet, nlg_realize, nlu_parse
from .metrics import EpisodeSummary, MetricsReport, compute_metrics, fingerprint
from .ontology import Dataset, UserGoal
from .policy import DiagnosisPolicy, select_action
from .simulator import (
    RewardScheme,
    initial_frame,
    is_request_hit,
    respond,
    sample_goal,
    start_session,
)


@dataclass
class Transition:
    s: np.ndarray
    a: int
    r: float
    s_next: np.ndarray
    done: bool
    mask_next: np.ndarray  # allowed actions in s_next

    def __post_init__(self):
        if not math.isfinite(self.r):
            raise ValueError(f"non-finite reward {self.r!r}")


class ReplayBuffer:
    """Fixed-capacity ring with uniform without-replacement batch sampling."""

    def __init__(self, capacity: int = 10000):
        self.capacity = capacity
        self._items: list[Transition] = []
        self._cursor = 0

    def __len__(self) -> int:
        return len(self._items)

    def append(self, t: Transition) -> None:
        if len(self._items) < self.capacity:
            self._items.append(t)
        else:
            self._items[self._cursor] = t
            self._cursor = (self._cursor + 1) % self.capacity

    def extend(self, ts) -> None:
        for t in ts:
            self.append(t)

    def sample(self, batch: int, rng: np.random.Generator) -> list[Transition]:
        if batch > len(self._items):
            raise ValueError(f"batch {batch} exceeds buffer size {len(self._items)}")
        idx = rng.choice(len(self._items), size=batch, replace=False)
        return [self._items[i] for i in idx]

    def flush(self) -> None:
        self._items.clear()
        self._cursor = 0


@dataclass
class TrainerConfig:
    gamma: float = 0.9
    epsilon: float = 0.1
    batch: int = 32
    lr: float = 0.01
    sims_per_epoch: int = 100
    epochs: int = 300
    eval_episodes: int = 500
    buffer_capacity: int = 10000
    seed: int = 0
    steps_per_epoch: int | None = None      # default: ceil(new transitions / batch)
    early_stop_success: float | None = None

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma must be in [0, 1), got {self.gamma}")

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass
class ErrorModel:
    """Frame-level noise standing in for NLU mistakes."""

    slot_error_rate: float = 0.05
    intent_error_rate: float = 0.05
    rng: np.random.Generator = field(default_factory=np.random.default_rng)

    def __post_init__(self):
        for r in (self.slot_error_rate, self.intent_error_rate):
            if not 0.0 <= r <= 1.0:
                raise ValueError(f"error rates must be probabilities, got {r}")


def corrupt_frame(frame: SemanticFrame, em: ErrorModel) -> SemanticFrame:
    """Independently misclassify the intent and flip slot statuses."""
    intent = frame.intent
    if em.intent_error_rate > 0 and em.rng.random() < em.intent_error_rate:
        others = [i for i in USER_INTENTS if i != intent]
        intent = others[int(em.rng.integers(len(others)))]
    slots = {}
    for s, status in frame.slots.items():
        if em.slot_error_rate > 0 and em.rng.random() < em.slot_error_rate:
            others = [x for x in SLOT_STATUSES if x != status]
            status = others[int(em.rng.integers(len(others)))]
        slots[s] = status
    return replace(frame, intent=intent, slots=slots)


def bellman_target(t: Transition, target_policy: DiagnosisPolicy, gamma: float) -> float:
    """r for terminal transitions, else r + gamma * masked max of the target net."""
    if t.done:
        return t.r
    q_next = target_policy.q_values(t.s_next)
    masked = np.where(t.mask_next, q_next, -np.inf)
    return t.r + gamma * float(masked.max())


def batch_targets(batch: list[Transition], target_policy: DiagnosisPolicy, gamma: float) -> np.ndarray:
    s_next = np.stack([t.s_next for t in batch])
    q_next = target_policy.forward_batch(s_next).a_t
    mask = np.stack([t.mask_next for t in batch])
    max_next = np.where(mask, q_next, -np.inf).max(axis=1)
    r = np.array([t.r for t in batch])
    done = np.array([t.done for t in batch])
    return np.where(done, r, r + gamma * max_next)


@dataclass
class EpisodeResult:
    transitions: list[Transition]
    outcome: str
    turns: int
    requests: int
    hits: int
    episode_return: float

    def summary(self, disease_tag: str) -> EpisodeSummary:
        return EpisodeSummary(
            outcome=self.outcome, turns=self.turns, requests=self.requests,
            hits=self.hits, disease_tag=disease_tag, episode_return=self.episode_return,
        )


def _frame_to_action(frame: SemanticFrame) -> AgentAction:
    if frame.intent == "request_symptom":
        return AgentAction(kind="request_symptom", target=frame.requested_symptom)
    if frame.intent == "inform_disease":
        return AgentAction(kind="inform_disease", target=frame.disease_slot)
    if frame.intent in ("thanks", "closing"):
        return AgentAction(kind=frame.intent)
    raise RuntimeError(f"frame {frame.intent!r} is not an agent action")


def run_episode(
    policy: DiagnosisPolicy,
    goal: UserGoal,
    scheme: RewardScheme,
    epsilon: float,
    rng: np.random.Generator,
    error_model: ErrorModel | None = None,
    mode: str = "frame",
    lexicon: Lexicon | None = None,
    templates: TemplateSet | None = None,
    collect: bool = True,
) -> EpisodeResult:
    """Play one dialogue to termination.

    Frame-level mode passes semantic frames directly; language-level mode
    routes every frame through NLG and back through NLU.  The episode ends on
    an inform, an agent greeting, or the turn budget.
    """
    goal.validate(policy.ontology)
    if mode not in ("frame", "language"):
        raise ValueError(f"unknown episode mode {mode!r}")
    if mode == "language" and (lexicon is None or templates is None):
        raise ValueError("language-level mode needs a lexicon and templates")
    onto = policy.ontology
    T = policy.config.max_turns
    session = start_session(goal, max_turns=T)
    state = dialogue.new_state(onto)

    def through_language_user(frame: SemanticFrame, context: str | None) -> SemanticFrame:
        text = nlg_realize(frame, templates, lexicon, rng)
        return nlu_parse(text, lexicon, context=context)

    user = initial_frame(goal)
    if mode == "language":
        user = through_language_user(user, None)
    if error_model is not None:
        user = corrupt_frame(user, error_model)
    state = dialogue.observe_user(state, user, onto)

    transitions: list[Transition] = []
    requests = hits = 0
    episode_return = 0.0

    while not session.done:
        s_t = dialogue.encode_state(state, onto, T)
        a_idx = select_action(policy.q_values(s_t), state, epsilon, rng, policy.config.apply_filter)
        action = dialogue.action_from_index(a_idx, onto)
        heard = action
        if mode == "language":
            text = nlg_realize(action, templates, lexicon, rng)
            heard = _frame_to_action(nlu_parse(text, lexicon))
        after_agent = dialogue.observe_agent(state, action)

        user, reward = respond(session, heard, scheme)
        episode_return += reward
        if heard.kind == "request_symptom":
            requests += 1
            hits += int(is_request_hit(goal, heard.target))

        if user is None:
            state = after_agent
        else:
            if mode == "language":
                user = through_language_user(user, action.target)
            if error_model is not None:
                user = corrupt_frame(user, error_model)
            state = dialogue.observe_user(after_agent, user, onto)

        if collect:
            s_next = dialogue.encode_state(state, onto, T)
            transitions.append(Transition(
                s=s_t, a=a_idx, r=reward, s_next=s_next, done=session.done,
                mask_next=dialogue.allowed_mask(state.symptoms, onto.num_actions),
            ))

    return EpisodeResult(
        transitions=transitions,
        outcome=session.outcome,
        turns=session.turn,
        requests=requests,
        hits=hits,
        episode_return=episode_return,
    )


def evaluate(
    policy: DiagnosisPolicy,
    goals: list[UserGoal] | tuple[UserGoal, ...],
    episodes: int,
    scheme: RewardScheme,
    rng: np.random.Generator | None = None,
    error_model: ErrorModel | None = None,
    mode: str = "frame",
    lexicon: Lexicon | None = None,
    templates: TemplateSet | None = None,
    config_fingerprint: str = "",
) -> MetricsReport:
    """Greedy policy rollout over a goal list, cycling deterministically."""
    if episodes < 1:
        raise ValueError("evaluate needs at least one episode")
    if not goals:
        raise ValueError("evaluate needs a nonempty goal list")
    rng = rng or np.random.default_rng(0)
    summaries = []
    for i in range(episodes):
        goal = goals[i % len(goals)]
        ep = run_episode(
            policy, goal, scheme, epsilon=0.0, rng=rng, error_model=error_model,
            mode=mode, lexicon=lexicon, templates=templates, collect=False,
        )
        summaries.append(ep.summary(goal.disease_tag))
    return compute_metrics(summaries, config_fingerprint)


@dataclass
class TrainingReport:
    epochs: list[dict] = field(default_factory=list)
    best_success: float = -1.0
    best_epoch: int | None = None
    config_fingerprint: str = ""
    total_episodes: int = 0

    def to_jsonl(self) -> str:
        return "\n".join(json.dumps(rec, sort_keys=True) for rec in self.epochs)


def train(
    config: TrainerConfig,
    dataset: Dataset,
    policy: DiagnosisPolicy,
    scheme: RewardScheme,
    error_model: ErrorModel | None = None,
    mode: str = "frame",
    lexicon: Lexicon | None = None,
    templates: TemplateSet | None = None,
    eval_fn=None,
    report_path: str | Path | None = None,
    log=None,
) -> tuple[TrainingReport, DiagnosisPolicy | None]:
    """Run the epoch loop; returns the report and the best-eval policy snapshot.

    `eval_fn(policy, epoch) -> float` replaces the built-in greedy evaluation
    when given (used to script the flush rule in tests).  Raises
    DivergenceError if a gradient step produces a non-finite loss.
    """
    seeds = np.random.SeedSequence(config.seed).spawn(3)
    sim_rng = np.random.default_rng(seeds[0])
    sample_rng = np.random.default_rng(seeds[1])
    evalset_rng = np.random.default_rng(seeds[2])

    eval_goals = [sample_goal(dataset.train, evalset_rng) for _ in range(config.eval_episodes)]
    buffer = ReplayBuffer(config.buffer_capacity)
    target_policy = policy.clone()
    fp = fingerprint({"trainer": config.to_dict(), "policy": policy.config.__dict__,
                      "scheme": scheme.name, "mode": mode})
    report = TrainingReport(config_fingerprint=fp)
    best_policy: DiagnosisPolicy | None = None
    out = open(report_path, "w", encoding="utf-8") if report_path else None

    try:
        for epoch in range(1, config.epochs + 1):
            new_transitions = 0
            for _ in range(config.sims_per_epoch):
                goal = sample_goal(dataset.train, sim_rng)
                ep = run_episode(
                    policy, goal, scheme, epsilon=config.epsilon, rng=sim_rng,
                    error_model=error_model, mode=mode, lexicon=lexicon, templates=templates,
                )
                buffer.extend(ep.transitions)
                new_transitions += len(ep.transitions)
            report.total_episodes += config.sims_per_epoch

            steps = config.steps_per_epoch
            if steps is None:
                steps = math.ceil(new_transitions / config.batch)
            losses = []
            for _ in range(steps):
                if len(buffer) < config.batch:
                    break
                batch = buffer.sample(config.batch, sample_rng)
                targets = batch_targets(batch, target_policy, config.gamma)
                s = np.stack([t.s for t in batch])
                a = np.array([t.a for t in batch])
                losses.append(policy.backward_and_step(s, a, targets, config.lr))

            if eval_fn is not None:
                eval_success, avg_turns, match_rate = float(eval_fn(policy, epoch)), 0.0, 0.0
            else:
                metrics = evaluate(
                    policy, eval_goals, len(eval_goals), scheme, rng=sim_rng,
                    error_model=error_model, mode=mode, lexicon=lexicon, templates=templates,
                )
                eval_success = metrics.accuracy
                avg_turns, match_rate = metrics.avg_turns, metrics.match_rate

            flushed = False
            if eval_success > report.best_success:
                report.best_success = eval_success
                report.best_epoch = epoch
                best_policy = policy.clone()
                buffer.flush()
                flushed = True

            target_policy = policy.clone()

            record = {
                "epoch": epoch,
                "eval_success": eval_success,
                "avg_turns": avg_turns,
                "match_rate": match_rate,
                "loss_mean": (sum(losses) / len(losses)) if losses else None,
                "buffer_size": len(buffer),
                "flushed": flushed,
            }
            report.epochs.append(record)
            if out is not None:
                out.write(json.dumps(record, sort_keys=True) + "\n")
                out.flush()
            if log is not None:
                log(record)
            if config.early_stop_success is not None and eval_success >= config.early_stop_success:
                break
    finally:
        if out is not None:
            out.close()
    return report, best_policy
