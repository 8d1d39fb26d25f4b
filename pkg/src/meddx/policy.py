"""Knowledge-routed relational deep Q-network.

Three branches produce length-D action vectors from a dialogue state:

  basic      a_r = W2 relu(W1 s + b1) + b2        (learned, two-layer MLP)
  relation   a_f = a_r . R                        (learned D x D matrix,
                                                   initialized from co-occurrence
                                                   conditionals, column-stochastic)
  knowledge  a_k = [0_G | P(dis) | P(sym)]        (fixed two-hop propagation
                                                   through the conditional matrices)

fused as a_t = sigmoid(a_r) + sigmoid(a_f) + a_k.  Ablation modes reproduce the
sub-models: "basic" scores with raw a_r, "relation" drops a_k, "knowledge"
drops the relation term.  Gradients are derived by hand (plain SGD) so they can
be validated against finite differences.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from .dialogue import allowed_mask
from .ontology import KnowledgeStats, Ontology, ontology_hash
from . import dialogue

BUNDLE_FORMAT_VERSION = 1
MODES = ("basic", "relation", "knowledge", "full")


class BundleError(Exception):
    """Raised on bundle corruption or ontology drift."""


class DivergenceError(Exception):
    """Raised when a training step produces a non-finite loss."""


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function (split form, no overflow)."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _sigmoid_grad(sig: np.ndarray) -> np.ndarray:
    return sig * (1.0 - sig)


@dataclass
class PolicyConfig:
    mode: str = "full"                 # basic | relation | knowledge | full
    hidden: int = 512
    max_turns: int = 22
    relation_init: str = "prior"       # prior | random
    renormalize_relation: bool = False  # re-project R columns after each step
    apply_filter: bool = True          # mask repeated symptom requests
    seed: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown policy mode {self.mode!r}")
        if self.relation_init not in ("prior", "random"):
            raise ValueError(f"unknown relation init {self.relation_init!r}")


@dataclass
class QNetworkParams:
    W1: np.ndarray  # H x S
    b1: np.ndarray  # H
    W2: np.ndarray  # D x H
    b2: np.ndarray  # D

    def copy(self) -> "QNetworkParams":
        return QNetworkParams(self.W1.copy(), self.b1.copy(), self.W2.copy(), self.b2.copy())


@dataclass(frozen=True)
class KnowledgeBranch:
    """Frozen conditional matrices; no gradients ever flow here."""

    p_dis_given_sym: np.ndarray  # M x N
    p_sym_given_dis: np.ndarray  # N x M
    p_sym_prior: np.ndarray      # N

    def __post_init__(self):
        for arr in (self.p_dis_given_sym, self.p_sym_given_dis, self.p_sym_prior):
            arr.setflags(write=False)

    @classmethod
    def from_stats(cls, stats: KnowledgeStats) -> "KnowledgeBranch":
        return cls(
            p_dis_given_sym=stats.p_dis_given_sym.copy(),
            p_sym_given_dis=stats.p_sym_given_dis.copy(),
            p_sym_prior=stats.p_sym_prior.copy(),
        )


@dataclass
class PolicyOutput:
    a_r: np.ndarray
    a_f: np.ndarray
    a_k: np.ndarray
    a_t: np.ndarray


def glorot_uniform(rng: np.random.Generator, fan_out: int, fan_in: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_out, fan_in))


def forward_basic(s: np.ndarray, params: QNetworkParams) -> np.ndarray:
    """a_r = W2 relu(W1 s + b1) + b2 for a single state vector."""
    h = np.maximum(params.W1 @ s + params.b1, 0.0)
    return params.W2 @ h + params.b2


def forward_relation(a_r: np.ndarray, R: np.ndarray) -> np.ndarray:
    """Refined result a_f[j] = sum_i a_r[i] R[i, j] (row vector times matrix)."""
    return a_r @ R


def forward_knowledge(symptoms: np.ndarray, kb: KnowledgeBranch, num_greetings: int) -> np.ndarray:
    """Two-hop symptom->disease->symptom propagation, zero-padded for greetings.

    Observed statuses route 1 (confirmed) or -1 (denied, discouraging related
    diseases); unmentioned and not-sure symptoms fall back to their dataset
    prior.
    """
    prior = np.where(symptoms == 1, 1.0, np.where(symptoms == -1, -1.0, kb.p_sym_prior))
    p_dis = kb.p_dis_given_sym @ prior
    p_sym = kb.p_sym_given_dis @ p_dis
    return np.concatenate([np.zeros(num_greetings), p_dis, p_sym])


def combine(a_r: np.ndarray, a_f: np.ndarray, a_k: np.ndarray) -> np.ndarray:
    """Fused action values: sigmoid(a_r) + sigmoid(a_f) + a_k, elementwise."""
    return sigmoid(a_r) + sigmoid(a_f) + a_k


def select_action(a_t: np.ndarray, state: dialogue.DialogueState, epsilon: float,
                  rng: np.random.Generator, apply_filter: bool = True) -> int:
    """Epsilon-greedy over masked action values; ties break to the lowest index."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must be a probability, got {epsilon}")
    if apply_filter:
        mask = allowed_mask(state.symptoms, a_t.shape[0])
    else:
        mask = np.ones(a_t.shape[0], dtype=bool)
    if epsilon > 0 and rng.random() < epsilon:
        return int(rng.choice(np.flatnonzero(mask)))
    masked = np.where(mask, a_t, -np.inf)
    return int(np.argmax(masked))


class DiagnosisPolicy:
    """Learnable parameters plus the frozen knowledge matrices, index-locked to one ontology."""

    def __init__(self, ontology: Ontology, stats: KnowledgeStats, config: PolicyConfig,
                 params: QNetworkParams | None = None, R: np.ndarray | None = None):
        self.ontology = ontology
        self.config = config
        self.kb = KnowledgeBranch.from_stats(stats)
        self.state_size = dialogue.state_dim(ontology, config.max_turns)
        D = ontology.num_actions
        rng = np.random.default_rng(config.seed)
        if params is None:
            params = QNetworkParams(
                W1=glorot_uniform(rng, config.hidden, self.state_size),
                b1=np.zeros(config.hidden),
                W2=glorot_uniform(rng, D, config.hidden),
                b2=np.zeros(D),
            )
        if R is None:
            if config.relation_init == "prior":
                R = stats.relation_init.copy()
            else:
                from .ontology import normalize_columns
                R = normalize_columns(rng.uniform(0.0, 1.0, size=(D, D)))
        self.params = params
        self.R = np.asarray(R, dtype=float)

    # -- forward -----------------------------------------------------------

    @property
    def num_actions(self) -> int:
        return self.ontology.num_actions

    def _split_symptoms(self, s_batch: np.ndarray) -> np.ndarray:
        # The raw symptom statuses are the first N features by layout.
        return s_batch[..., : self.ontology.num_symptoms]

    def _knowledge_batch(self, S: np.ndarray) -> np.ndarray:
        sym = self._split_symptoms(S)
        prior = np.where(sym == 1, 1.0, np.where(sym == -1, -1.0, self.kb.p_sym_prior))
        P_dis = prior @ self.kb.p_dis_given_sym.T
        P_sym = P_dis @ self.kb.p_sym_given_dis.T
        return np.concatenate(
            [np.zeros((S.shape[0], self.ontology.num_greetings)), P_dis, P_sym], axis=1
        )

    def forward_batch(self, s_batch: np.ndarray) -> PolicyOutput:
        """All branch outputs for a B x S batch (or a single S vector)."""
        squeeze = s_batch.ndim == 1
        S = np.atleast_2d(np.asarray(s_batch, dtype=float))
        p = self.params
        Z1 = S @ p.W1.T + p.b1
        H = np.maximum(Z1, 0.0)
        A_r = H @ p.W2.T + p.b2
        A_f = A_r @ self.R
        A_k = self._knowledge_batch(S)
        mode = self.config.mode
        if mode == "basic":
            A_t = A_r.copy()
        elif mode == "relation":
            A_t = sigmoid(A_r) + sigmoid(A_f)
        elif mode == "knowledge":
            A_t = sigmoid(A_r) + A_k
        else:
            A_t = sigmoid(A_r) + sigmoid(A_f) + A_k
        if squeeze:
            return PolicyOutput(A_r[0], A_f[0], A_k[0], A_t[0])
        return PolicyOutput(A_r, A_f, A_k, A_t)

    def q_values(self, s: np.ndarray) -> np.ndarray:
        return self.forward_batch(s).a_t

    def act(self, state: dialogue.DialogueState, epsilon: float, rng: np.random.Generator) -> int:
        s = dialogue.encode_state(state, self.ontology, self.config.max_turns)
        return select_action(self.q_values(s), state, epsilon, rng, self.config.apply_filter)

    # -- backward ----------------------------------------------------------

    def gradients(self, s_batch: np.ndarray, actions: np.ndarray, targets: np.ndarray):
        """Mean-squared-error loss and analytic gradients for all learnables.

        Gradients flow through both sigmoid terms into the MLP and through the
        relation product into R; the knowledge branch is constant.
        """
        S = np.atleast_2d(np.asarray(s_batch, dtype=float))
        actions = np.asarray(actions, dtype=int)
        targets = np.asarray(targets, dtype=float)
        B = S.shape[0]
        rows = np.arange(B)
        p = self.params

        Z1 = S @ p.W1.T + p.b1
        H = np.maximum(Z1, 0.0)
        A_r = H @ p.W2.T + p.b2
        mode = self.config.mode
        use_rel = mode in ("relation", "full")
        use_kn = mode in ("knowledge", "full")

        ar_a = A_r[rows, actions]
        if use_rel:
            A_f = A_r @ self.R
            af_a = A_f[rows, actions]
        if mode == "basic":
            q_a = ar_a
        else:
            sig_ar = sigmoid(ar_a)
            q_a = sig_ar.copy()
            if use_rel:
                sig_af = sigmoid(af_a)
                q_a = q_a + sig_af
            if use_kn:
                q_a = q_a + self._knowledge_batch(S)[rows, actions]

        err = q_a - targets
        per_sample = err ** 2
        if not np.all(np.isfinite(per_sample)):
            bad = int(np.flatnonzero(~np.isfinite(per_sample))[0])
            raise DivergenceError(
                f"non-finite loss at batch item {bad}: q={q_a[bad]!r} target={targets[bad]!r}"
            )
        loss = float(per_sample.mean())
        g = 2.0 * err / B

        G_ar = np.zeros_like(A_r)
        grad_R = None
        if mode == "basic":
            G_ar[rows, actions] = g
        else:
            G_ar[rows, actions] = g * _sigmoid_grad(sig_ar)
            if use_rel:
                coeff = g * _sigmoid_grad(sig_af)
                C = np.zeros_like(A_r)
                C[rows, actions] = coeff
                G_ar += C @ self.R.T
                grad_R = A_r.T @ C

        grad_b2 = G_ar.sum(axis=0)
        grad_W2 = G_ar.T @ H
        G_h = G_ar @ p.W2
        G_z1 = G_h * (Z1 > 0)
        grad_b1 = G_z1.sum(axis=0)
        grad_W1 = G_z1.T @ S
        grads = {"W1": grad_W1, "b1": grad_b1, "W2": grad_W2, "b2": grad_b2}
        if grad_R is not None:
            grads["R"] = grad_R
        return loss, grads

    def sgd_step(self, grads: dict, lr: float) -> None:
        p = self.params
        p.W1 -= lr * grads["W1"]
        p.b1 -= lr * grads["b1"]
        p.W2 -= lr * grads["W2"]
        p.b2 -= lr * grads["b2"]
        if "R" in grads:
            self.R -= lr * grads["R"]
            if self.config.renormalize_relation:
                from .ontology import normalize_columns
                self.R = normalize_columns(np.clip(self.R, 0.0, None))

    def backward_and_step(self, s_batch: np.ndarray, actions: np.ndarray,
                          targets: np.ndarray, lr: float) -> float:
        loss, grads = self.gradients(s_batch, actions, targets)
        self.sgd_step(grads, lr)
        return loss

    def clone(self) -> "DiagnosisPolicy":
        stats = KnowledgeStats(
            p_dis_given_sym=self.kb.p_dis_given_sym.copy(),
            p_sym_given_dis=self.kb.p_sym_given_dis.copy(),
            p_sym_prior=self.kb.p_sym_prior.copy(),
            relation_init=self.R.copy(),
        )
        return DiagnosisPolicy(self.ontology, stats, replace(self.config),
                        params=self.params.copy(), R=self.R.copy())


# -- persistence -------------------------------------------------------------

_ARRAY_ORDER = ("W1", "b1", "W2", "b2", "R", "p_dis_given_sym", "p_sym_given_dis", "p_sym_prior")


def _bundle_arrays(policy: DiagnosisPolicy) -> dict[str, np.ndarray]:
    return {
        "W1": policy.params.W1, "b1": policy.params.b1,
        "W2": policy.params.W2, "b2": policy.params.b2,
        "R": policy.R,
        "p_dis_given_sym": policy.kb.p_dis_given_sym,
        "p_sym_given_dis": policy.kb.p_sym_given_dis,
        "p_sym_prior": policy.kb.p_sym_prior,
    }


def _bundle_header(policy: DiagnosisPolicy) -> dict:
    return {
        "format_version": BUNDLE_FORMAT_VERSION,
        "ontology_hash": ontology_hash(policy.ontology),
        "S": policy.state_size,
        "H": policy.config.hidden,
        "D": policy.num_actions,
        "flags": asdict(policy.config),
        "ontology": policy.ontology.to_dict(),
    }


def save_bundle(policy: DiagnosisPolicy, path: str | Path, binary: bool = False) -> None:
    """Serialize header + matrices; JSON by default, row-major f64-LE binary otherwise."""
    path = Path(path)
    header = _bundle_header(policy)
    arrays = _bundle_arrays(policy)
    if binary:
        header["encoding"] = "binary-f64le"
        header["shapes"] = {k: list(arrays[k].shape) for k in _ARRAY_ORDER}
        blob = b"".join(np.ascontiguousarray(arrays[k], dtype="<f8").tobytes() for k in _ARRAY_ORDER)
        with open(path, "wb") as f:
            f.write(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")
            f.write(blob)
    else:
        header["encoding"] = "json"
        header["arrays"] = {k: arrays[k].tolist() for k in _ARRAY_ORDER}
        path.write_text(json.dumps(header, sort_keys=True), encoding="utf-8")


def load_bundle(path: str | Path, ontology: Ontology | None = None) -> DiagnosisPolicy:
    """Load a bundle, verifying format version and the embedded ontology hash."""
    path = Path(path)
    data = path.read_bytes()
    try:
        header = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError):
        header = None
    if header is not None:
        raw = header.pop("arrays", None)
        if raw is None:
            raise BundleError(f"{path}: JSON bundle is missing its arrays section")
        arrays = {k: np.asarray(raw[k], dtype=float) for k in _ARRAY_ORDER}
    else:
        newline = data.index(b"\n")
        try:
            header = json.loads(data[:newline].decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise BundleError(f"{path}: unrecognized bundle header: {e}") from e
        if header.get("encoding") != "binary-f64le":
            raise BundleError(f"{path}: unknown bundle encoding {header.get('encoding')!r}")
        blob = data[newline + 1:]
        arrays, offset = {}, 0
        for k in _ARRAY_ORDER:
            shape = tuple(header["shapes"][k])
            n = int(np.prod(shape)) if shape else 1
            arrays[k] = np.frombuffer(blob, dtype="<f8", count=n, offset=offset).reshape(shape).copy()
            offset += n * 8
    if header.get("format_version") != BUNDLE_FORMAT_VERSION:
        raise BundleError(f"{path}: unsupported bundle format_version {header.get('format_version')}")
    embedded = Ontology.from_dict(header["ontology"])
    if ontology_hash(embedded) != header["ontology_hash"]:
        raise BundleError(f"{path}: ontology hash mismatch (bundle edited or index drift)")
    if ontology is not None and ontology_hash(ontology) != header["ontology_hash"]:
        raise BundleError(f"{path}: bundle was trained against a different ontology")
    flags = dict(header["flags"])
    config = PolicyConfig(**flags)
    stats = KnowledgeStats(
        p_dis_given_sym=arrays["p_dis_given_sym"],
        p_sym_given_dis=arrays["p_sym_given_dis"],
        p_sym_prior=arrays["p_sym_prior"],
        relation_init=arrays["R"].copy(),
    )
    params = QNetworkParams(W1=arrays["W1"], b1=arrays["b1"], W2=arrays["W2"], b2=arrays["b2"])
    policy = DiagnosisPolicy(embedded, stats, config, params=params, R=arrays["R"])
    if policy.state_size != header["S"] or policy.num_actions != header["D"]:
        raise BundleError(f"{path}: header dimensions disagree with the embedded ontology")
    return policy
