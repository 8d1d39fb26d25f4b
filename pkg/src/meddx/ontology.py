"""Disease/symptom universe, user-goal datasets, and dataset-derived statistics.

The ontology fixes a canonical action-index layout (greetings, then diseases,
then symptoms) that every other component relies on.  From a training corpus
of user goals we derive the conditional-probability matrices that drive the
knowledge branch and the initial value of the learnable relation matrix.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

FORMAT_VERSION = 1
DEFAULT_GREETINGS = ("thanks", "closing")


class DatasetError(Exception):
    """Raised when a goal file cannot be parsed at all."""


class ValidationError(Exception):
    """Raised when a parsed goal violates the ontology or its own invariants."""


@dataclass(frozen=True)
class Ontology:
    """The closed universe of diseases, symptoms and greeting actions.

    Ordering is canonical and index-bearing: greeting actions occupy indices
    [0, G), diseases [G, G+M) and symptoms [G+M, D).
    """

    diseases: tuple[str, ...]
    symptoms: tuple[str, ...]
    greeting_actions: tuple[str, ...] = DEFAULT_GREETINGS

    def __post_init__(self):
        ids = list(self.greeting_actions) + list(self.diseases) + list(self.symptoms)
        if len(set(ids)) != len(ids):
            dupes = sorted({x for x in ids if ids.count(x) > 1})
            raise ValidationError(f"duplicate identifiers in ontology: {dupes}")
        if not self.diseases or not self.symptoms:
            raise ValidationError("ontology needs at least one disease and one symptom")

    @property
    def num_greetings(self) -> int:
        return len(self.greeting_actions)

    @property
    def num_diseases(self) -> int:
        return len(self.diseases)

    @property
    def num_symptoms(self) -> int:
        return len(self.symptoms)

    @property
    def num_actions(self) -> int:
        """Action-space size D = G + M + N."""
        return self.num_greetings + self.num_diseases + self.num_symptoms

    def disease_index(self, disease: str) -> int:
        return self.diseases.index(disease)

    def symptom_index(self, symptom: str) -> int:
        return self.symptoms.index(symptom)

    def to_dict(self) -> dict:
        return {
            "greetings": list(self.greeting_actions),
            "diseases": list(self.diseases),
            "symptoms": list(self.symptoms),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Ontology":
        return cls(
            diseases=tuple(d["diseases"]),
            symptoms=tuple(d["symptoms"]),
            greeting_actions=tuple(d.get("greetings", DEFAULT_GREETINGS)),
        )


def ontology_hash(ontology: Ontology) -> str:
    """Stable fingerprint of the canonical index layout."""
    blob = json.dumps(ontology.to_dict(), separators=(",", ":"), sort_keys=True)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class UserGoal:
    """One patient case: target disease, disclosed and hidden symptoms."""

    disease_tag: str
    explicit_symptoms: dict[str, bool] = field(default_factory=dict)
    implicit_symptoms: dict[str, bool] = field(default_factory=dict)
    request_slots: frozenset[str] = frozenset({"disease"})
    self_report: str | None = None

    def validate(self, ontology: Ontology, label: str = "goal") -> None:
        if self.disease_tag not in ontology.diseases:
            raise ValidationError(f"{label}: unknown disease_tag {self.disease_tag!r}")
        for fname, slots in (
            ("explicit_symptoms", self.explicit_symptoms),
            ("implicit_symptoms", self.implicit_symptoms),
        ):
            for s in slots:
                if s not in ontology.symptoms:
                    raise ValidationError(f"{label}.{fname}: unknown symptom {s!r}")
        overlap = set(self.explicit_symptoms) & set(self.implicit_symptoms)
        if overlap:
            raise ValidationError(
                f"{label}: symptoms {sorted(overlap)} appear as both explicit and implicit"
            )
        if "disease" not in self.request_slots:
            raise ValidationError(f"{label}.request_slots must contain 'disease'")

    def symptom_truth(self, symptom: str) -> bool | None:
        """Ground-truth value of a symptom, or None if absent from the goal."""
        if symptom in self.explicit_symptoms:
            return self.explicit_symptoms[symptom]
        if symptom in self.implicit_symptoms:
            return self.implicit_symptoms[symptom]
        return None


@dataclass(frozen=True)
class Dataset:
    train: tuple[UserGoal, ...]
    test: tuple[UserGoal, ...]
    ontology: Ontology


def _parse_goal(raw: dict, ontology: Ontology, label: str) -> UserGoal:
    if not isinstance(raw, dict):
        raise ValidationError(f"{label}: goal must be an object, got {type(raw).__name__}")
    try:
        goal = UserGoal(
            disease_tag=raw["disease_tag"],
            explicit_symptoms=dict(raw.get("explicit_inform_slots", {})),
            implicit_symptoms=dict(raw.get("implicit_inform_slots", {})),
            request_slots=frozenset(k for k, v in raw.get("request_slots", {"disease": True}).items() if v),
            self_report=raw.get("self_report"),
        )
    except KeyError as e:
        raise ValidationError(f"{label}: missing field {e.args[0]!r}") from None
    for fname in ("explicit_inform_slots", "implicit_inform_slots"):
        for s, v in raw.get(fname, {}).items():
            if not isinstance(v, bool):
                raise ValidationError(f"{label}.{fname}[{s!r}]: value must be boolean")
    goal.validate(ontology, label)
    return goal


def load_dataset(path: str | Path, ontology: Ontology | None = None) -> Dataset:
    """Load a goal file (UTF-8 JSON, format_version 1) and validate every goal.

    If `ontology` is given it must match the file's own ontology section;
    otherwise the ontology is taken from the file.
    """
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise DatasetError(f"cannot parse goal file {path}: {e}") from e
    if not isinstance(raw, dict) or "ontology" not in raw:
        raise DatasetError(f"{path}: goal file must be an object with an 'ontology' section")
    version = raw.get("format_version", 1)
    if version != FORMAT_VERSION:
        raise DatasetError(f"{path}: unsupported format_version {version}")
    file_onto = Ontology.from_dict(raw["ontology"])
    if ontology is not None and ontology_hash(ontology) != ontology_hash(file_onto):
        raise ValidationError(f"{path}: file ontology does not match the supplied ontology")
    onto = ontology or file_onto

    def parse_split(name: str) -> tuple[UserGoal, ...]:
        goals = raw.get(name, [])
        if not isinstance(goals, list):
            raise DatasetError(f"{path}: '{name}' must be a list of goals")
        return tuple(_parse_goal(g, onto, f"{name}[{i}]") for i, g in enumerate(goals))

    train, test = parse_split("train"), parse_split("test")
    if not train:
        raise ValidationError(f"{path}: train split is empty")
    return Dataset(train=train, test=test, ontology=onto)


def save_dataset(dataset: Dataset, path: str | Path) -> None:
    """Inverse of load_dataset; writes the documented goal-file format."""

    def goal_dict(g: UserGoal) -> dict:
        return {
            "disease_tag": g.disease_tag,
            "explicit_inform_slots": dict(g.explicit_symptoms),
            "implicit_inform_slots": dict(g.implicit_symptoms),
            "request_slots": {k: True for k in sorted(g.request_slots)},
            "self_report": g.self_report,
        }

    blob = {
        "format_version": FORMAT_VERSION,
        "ontology": dataset.ontology.to_dict(),
        "train": [goal_dict(g) for g in dataset.train],
        "test": [goal_dict(g) for g in dataset.test],
    }
    Path(path).write_text(json.dumps(blob, indent=1), encoding="utf-8")


@dataclass(frozen=True)
class KnowledgeStats:
    """Dataset-derived conditional probabilities, all frozen after construction.

    p_dis_given_sym[d, s] = P(disease d | symptom s present)
    p_sym_given_dis[s, d] = P(symptom s present | disease d)
    p_sym_prior[s]        = P(symptom s present)
    relation_init         = column-stochastic D x D co-occurrence prior
    """

    p_dis_given_sym: np.ndarray  # M x N
    p_sym_given_dis: np.ndarray  # N x M
    p_sym_prior: np.ndarray      # N
    relation_init: np.ndarray    # D x D


def _true_symptoms(goal: UserGoal) -> set[str]:
    # A symptom counts only when its truth value is true; explicit and implicit
    # both count (both are ground-truth patient facts).
    present = {s for s, v in goal.explicit_symptoms.items() if v}
    present |= {s for s, v in goal.implicit_symptoms.items() if v}
    return present


def _cooccurrence_counts(train: list[UserGoal] | tuple[UserGoal, ...], ontology: Ontology):
    M, N = ontology.num_diseases, ontology.num_symptoms
    dis_count = np.zeros(M)
    sym_count = np.zeros(N)
    dis_sym = np.zeros((M, N))
    sym_sym = np.zeros((N, N))
    for goal in train:
        d = ontology.disease_index(goal.disease_tag)
        dis_count[d] += 1
        present = sorted(ontology.symptom_index(s) for s in _true_symptoms(goal))
        for i in present:
            sym_count[i] += 1
            dis_sym[d, i] += 1
            for j in present:
                sym_sym[i, j] += 1
    return dis_count, sym_count, dis_sym, sym_sym


def _safe_div(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    # Zero-count conditionals are defined as 0.
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(den > 0, num / np.maximum(den, 1), 0.0)
    return out


def compute_knowledge_stats(
    train: list[UserGoal] | tuple[UserGoal, ...], ontology: Ontology
) -> KnowledgeStats:
    """Count-based conditional probabilities over the training goals."""
    if not train:
        raise ValidationError("cannot compute statistics from an empty training split")
    for i, g in enumerate(train):
        g.validate(ontology, f"train[{i}]")
    dis_count, sym_count, dis_sym, _ = _cooccurrence_counts(train, ontology)
    p_dis_given_sym = _safe_div(dis_sym, sym_count[None, :])          # M x N
    p_sym_given_dis = _safe_div(dis_sym.T, dis_count[None, :])        # N x M
    p_sym_prior = sym_count / len(train)
    stats = KnowledgeStats(
        p_dis_given_sym=p_dis_given_sym,
        p_sym_given_dis=p_sym_given_dis,
        p_sym_prior=p_sym_prior,
        relation_init=build_relation_init_raw_normalized(train, ontology),
    )
    return stats


def relation_conditionals(
    train: list[UserGoal] | tuple[UserGoal, ...], ontology: Ontology
) -> np.ndarray:
    """Unnormalized D x D matrix of P(unit_j | unit_i) from goal co-occurrence.

    Greeting rows/columns are one-hot self; disease-disease is identity
    (each goal carries exactly one disease).
    """
    G, M, N = ontology.num_greetings, ontology.num_diseases, ontology.num_symptoms
    D = ontology.num_actions
    dis_count, sym_count, dis_sym, sym_sym = _cooccurrence_counts(train, ontology)

    R = np.zeros((D, D))
    R[:G, :G] = np.eye(G)
    dis, sym = slice(G, G + M), slice(G + M, D)
    R[dis, dis] = np.eye(M)
    R[dis, sym] = _safe_div(dis_sym, dis_count[:, None])       # P(sym | dis)
    R[sym, dis] = _safe_div(dis_sym.T, sym_count[:, None])     # P(dis | sym)
    R[sym, sym] = _safe_div(sym_sym, sym_count[:, None])       # P(sym_j | sym_i)
    return R


def normalize_columns(R: np.ndarray) -> np.ndarray:
    """Renormalize every column to sum to 1; all-zero columns become uniform."""
    sums = R.sum(axis=0)
    out = np.where(sums > 0, R / np.where(sums > 0, sums, 1.0), 1.0 / R.shape[0])
    return out


def build_relation_init_raw_normalized(train, ontology: Ontology) -> np.ndarray:
    return normalize_columns(relation_conditionals(train, ontology))


def build_relation_init(
    stats: KnowledgeStats, train: list[UserGoal] | tuple[UserGoal, ...], ontology: Ontology
) -> np.ndarray:
    """Column-stochastic initializer for the learnable relation matrix."""
    del stats  # conditionals are recounted; joint symptom counts are not in stats
    return build_relation_init_raw_normalized(train, ontology)
