"""Episode summaries and aggregate evaluation metrics."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

from .simulator import SUCCESS


def fingerprint(config: dict) -> str:
    """Short stable hash so any two differing runs are distinguishable."""
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:12]


@dataclass(frozen=True)
class EpisodeSummary:
    outcome: str
    turns: int
    requests: int
    hits: int
    disease_tag: str
    episode_return: float


@dataclass
class MetricsReport:
    accuracy: float
    match_rate: float
    avg_turns: float
    per_disease: dict[str, float] = field(default_factory=dict)
    episodes: int = 0
    config_fingerprint: str = ""

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "match_rate": self.match_rate,
            "avg_turns": self.avg_turns,
            "per_disease": dict(sorted(self.per_disease.items())),
            "episodes": self.episodes,
            "config_fingerprint": self.config_fingerprint,
        }


def compute_metrics(summaries: list[EpisodeSummary], config_fingerprint: str = "") -> MetricsReport:
    """Accuracy, implicit-symptom match rate and average turns over episodes.

    Match rate is micro-averaged: total on-goal requests over total requests,
    defined as 0 when no symptom was ever requested.
    """
    if not summaries:
        raise ValueError("compute_metrics needs at least one episode")
    n = len(summaries)
    successes = sum(1 for s in summaries if s.outcome == SUCCESS)
    total_requests = sum(s.requests for s in summaries)
    total_hits = sum(s.hits for s in summaries)
    per_disease: dict[str, list[int]] = {}
    for s in summaries:
        wins_runs = per_disease.setdefault(s.disease_tag, [0, 0])
        wins_runs[0] += int(s.outcome == SUCCESS)
        wins_runs[1] += 1
    return MetricsReport(
        accuracy=successes / n,
        match_rate=(total_hits / total_requests) if total_requests else 0.0,
        avg_turns=sum(s.turns for s in summaries) / n,
        per_disease={d: w / r for d, (w, r) in per_disease.items()},
        episodes=n,
        config_fingerprint=config_fingerprint,
    )
