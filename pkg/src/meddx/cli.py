"""Command-line entry points: synth, train, evaluate, ablate, chat, serve, inspect."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import dialogue, synthetic, training
from .language import (
    ParseFailure,
    default_templates,
    lexicon_from_ontology,
    load_lexicon,
    load_templates,
    nlg_realize,
    nlu_parse,
)
from .metrics import fingerprint
from .ontology import (
    Dataset,
    DatasetError,
    ValidationError,
    compute_knowledge_stats,
    load_dataset,
    save_dataset,
)
from .policy import BundleError, DiagnosisPolicy, PolicyConfig, load_bundle, save_bundle
from .simulator import REWARD_SCHEMES, parse_reward_scheme
from .training import ErrorModel, TrainerConfig, evaluate, train

ABLATION_VARIANTS = (
    ("basic", "Basic DQN", "basic", "prior"),
    ("relation_random", "DQN + relation branch (random init)", "relation", "random"),
    ("relation", "DQN + relation branch", "relation", "prior"),
    ("knowledge", "DQN + knowledge branch", "knowledge", "prior"),
    ("full", "DQN + relation + knowledge", "full", "prior"),
)


def _add_common_training_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--epochs", type=int, default=300)
    p.add_argument("--sims", type=int, default=100, help="simulated dialogues per epoch")
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--gamma", type=float, default=0.9)
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--buffer", type=int, default=10000)
    p.add_argument("--eval-episodes", type=int, default=500)
    p.add_argument("--hidden", type=int, default=512)
    p.add_argument("--max-turns", type=int, default=22)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--early-stop", type=float, default=None,
                   help="stop once eval success reaches this rate")
    p.add_argument("--reward-scheme", "--reward", dest="reward_scheme", default="default",
                   help=f"preset {sorted(REWARD_SCHEMES)} or 'success,failure,penalty'")
    p.add_argument("--mode", choices=["frame", "language"], default="frame")
    p.add_argument("--ablation", choices=[m for m, *_ in ABLATION_VARIANTS if m != "relation_random"],
                   default="full", help="policy variant to train")
    p.add_argument("--relation-init", choices=["prior", "random"], default="prior")
    p.add_argument("--slot-error", type=float, default=0.0)
    p.add_argument("--intent-error", type=float, default=0.0)
    p.add_argument("--lexicon", type=Path, default=None)
    p.add_argument("--templates", type=Path, default=None)


def _language_assets(args, dataset: Dataset):
    lexicon = load_lexicon(args.lexicon) if args.lexicon else lexicon_from_ontology(dataset.ontology)
    lexicon.check_coverage(dataset.ontology)
    templates = load_templates(args.templates) if args.templates else default_templates()
    return lexicon, templates


def _build_policy(dataset: Dataset, args, mode: str, relation_init: str) -> DiagnosisPolicy:
    stats = compute_knowledge_stats(dataset.train, dataset.ontology)
    config = PolicyConfig(
        mode=mode, hidden=args.hidden, max_turns=args.max_turns,
        relation_init=relation_init, seed=args.seed,
    )
    return DiagnosisPolicy(dataset.ontology, stats, config)


def _trainer_config(args) -> TrainerConfig:
    return TrainerConfig(
        gamma=args.gamma, epsilon=args.epsilon, batch=args.batch, lr=args.lr,
        sims_per_epoch=args.sims, epochs=args.epochs, eval_episodes=args.eval_episodes,
        buffer_capacity=args.buffer, seed=args.seed, early_stop_success=args.early_stop,
    )


def _error_model(args) -> ErrorModel | None:
    if args.slot_error == 0 and args.intent_error == 0:
        return None
    return ErrorModel(
        slot_error_rate=args.slot_error, intent_error_rate=args.intent_error,
        rng=np.random.default_rng(args.seed + 1),
    )


def _run_training(args, dataset: Dataset, mode: str, relation_init: str, report_path=None,
                  quiet=False):
    policy = _build_policy(dataset, args, mode, relation_init)
    scheme = parse_reward_scheme(args.reward_scheme)
    lexicon = templates = None
    if args.mode == "language":
        lexicon, templates = _language_assets(args, dataset)

    def log(rec):
        if not quiet:
            print(f"epoch {rec['epoch']:>4}  success {rec['eval_success']:.3f}  "
                  f"turns {rec['avg_turns']:.2f}  match {rec['match_rate']:.3f}  "
                  f"buffer {rec['buffer_size']}{'  *flush*' if rec['flushed'] else ''}",
                  file=sys.stderr)

    report, best = train(
        _trainer_config(args), dataset, policy, scheme,
        error_model=_error_model(args), mode=args.mode,
        lexicon=lexicon, templates=templates, report_path=report_path, log=log,
    )
    return report, best if best is not None else policy


def cmd_synth(args) -> int:
    if args.demo:
        dataset = synthetic.demo_dataset(seed=args.seed)
    else:
        dataset = synthetic.separable_dataset(
            num_diseases=args.diseases, symptoms_per_disease=args.symptoms_per,
            train_goals=args.train, test_goals=args.test, seed=args.seed,
            explicit_per_goal=args.explicit,
        )
    save_dataset(dataset, args.out)
    print(f"wrote {len(dataset.train)} train / {len(dataset.test)} test goals to {args.out}")
    return 0


def cmd_train(args) -> int:
    dataset = load_dataset(args.data)
    report, best = _run_training(args, dataset, args.ablation, args.relation_init,
                                 report_path=args.report)
    save_bundle(best, args.out, binary=args.binary)
    print(json.dumps({
        "bundle": str(args.out),
        "best_success": report.best_success,
        "best_epoch": report.best_epoch,
        "epochs_run": len(report.epochs),
        "config_fingerprint": report.config_fingerprint,
    }, indent=2))
    return 0


def cmd_evaluate(args) -> int:
    if args.episodes < 1:
        raise UsageError("--episodes must be at least 1")
    policy = load_bundle(args.bundle)
    dataset = load_dataset(args.data, ontology=policy.ontology)
    goals = dataset.test if args.split == "test" else dataset.train
    if not goals:
        raise UsageError(f"dataset has no goals in the {args.split!r} split")
    scheme = parse_reward_scheme(args.reward_scheme)
    lexicon = templates = None
    if args.mode == "language":
        lexicon, templates = _language_assets(args, dataset)
    em = _error_model(args)
    metrics = evaluate(
        policy, goals, args.episodes, scheme, rng=np.random.default_rng(args.seed),
        error_model=em, mode=args.mode, lexicon=lexicon, templates=templates,
        config_fingerprint=fingerprint({
            "bundle": str(args.bundle), "episodes": args.episodes, "split": args.split,
            "scheme": scheme.name, "mode": args.mode, "seed": args.seed,
        }),
    )
    print(json.dumps(metrics.to_dict(), indent=2))
    return 0


def cmd_ablate(args) -> int:
    dataset = load_dataset(args.data)
    scheme = parse_reward_scheme(args.reward_scheme)
    rows = []
    for key, label, mode, relation_init in ABLATION_VARIANTS:
        report, best = _run_training(args, dataset, mode, relation_init, quiet=True)
        goals = dataset.test or dataset.train
        metrics = evaluate(best, goals, len(goals), scheme,
                           rng=np.random.default_rng(args.seed))
        rows.append({
            "variant": key,
            "label": label,
            "accuracy": metrics.accuracy,
            "match_rate": metrics.match_rate,
            "avg_turns": metrics.avg_turns,
            "per_disease": metrics.per_disease,
            "best_train_success": report.best_success,
        })
        print(f"{label:<42} accuracy {metrics.accuracy:.3f}  "
              f"match {metrics.match_rate:.3f}  turns {metrics.avg_turns:.2f}",
              file=sys.stderr)
    result = {"rows": rows, "config_fingerprint": fingerprint({
        "data": str(args.data), "epochs": args.epochs, "seed": args.seed,
        "scheme": scheme.name,
    })}
    if args.out:
        Path(args.out).write_text(json.dumps(result, indent=2), encoding="utf-8")
    print(json.dumps(result, indent=2))
    return 0


def cmd_inspect(args) -> int:
    if args.bundle:
        onto = load_bundle(args.bundle).ontology
    elif args.data:
        onto = load_dataset(args.data).ontology
    else:
        raise UsageError("inspect needs --bundle or --data")
    if args.actions:
        for idx, kind, ident in dialogue.action_table(onto):
            print(f"{idx}\t{kind}\t{ident}")
    else:
        print(json.dumps(onto.to_dict(), indent=2))
    return 0


def cmd_chat(args) -> int:
    policy = load_bundle(args.bundle)
    lexicon = load_lexicon(args.lexicon) if args.lexicon else lexicon_from_ontology(policy.ontology)
    lexicon.check_coverage(policy.ontology)
    templates = load_templates(args.templates) if args.templates else default_templates()
    rng = np.random.default_rng(args.seed)
    state = dialogue.new_state(policy.ontology)
    print("Describe your complaint (or 'quit'):")
    opening = input("you> ").strip()
    if opening.lower() in ("quit", "exit"):
        return 0
    try:
        frame = nlu_parse(opening, lexicon)
    except ParseFailure:
        frame = dialogue.SemanticFrame(intent="request_disease")
    state = dialogue.observe_user(state, frame, policy.ontology)
    while True:
        a_idx = policy.act(state, epsilon=0.0, rng=rng)
        action = dialogue.action_from_index(a_idx, policy.ontology)
        state = dialogue.observe_agent(state, action)
        print(f"agent> {nlg_realize(action, templates, lexicon, rng)}")
        if action.kind == "inform_disease" or action.kind in ("thanks", "closing"):
            return 0
        if state.turn >= policy.config.max_turns:
            print("agent> We are out of time, sorry.")
            return 0
        answer = input("you> ").strip()
        if answer.lower() in ("quit", "exit"):
            return 0
        try:
            frame = nlu_parse(answer, lexicon, context=state.last_request)
        except ParseFailure:
            print("agent> Sorry, I did not catch that.")
            continue
        state = dialogue.observe_user(state, frame, policy.ontology)


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    policy = load_bundle(args.bundle)
    lexicon = load_lexicon(args.lexicon) if args.lexicon else lexicon_from_ontology(policy.ontology)
    templates = load_templates(args.templates) if args.templates else default_templates()
    app = create_app(policy, lexicon, templates, persist_path=args.persist, seed=args.seed)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


class UsageError(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="meddx",
                                     description="dialogue engine for automatic diagnosis")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic goal dataset")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--demo", action="store_true", help="English demo corpus matching the shipped lexicon")
    p.add_argument("--diseases", type=int, default=4)
    p.add_argument("--symptoms-per", type=int, default=3)
    p.add_argument("--train", type=int, default=200)
    p.add_argument("--test", type=int, default=200)
    p.add_argument("--explicit", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train a policy bundle")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--report", type=Path, default=None, help="write per-epoch JSON lines here")
    p.add_argument("--binary", action="store_true", help="save the bundle in binary form")
    _add_common_training_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="evaluate a bundle against a dataset")
    p.add_argument("--bundle", type=Path, required=True)
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--episodes", type=int, required=True)
    p.add_argument("--split", choices=["train", "test"], default="test")
    p.add_argument("--reward-scheme", "--reward", dest="reward_scheme", default="default")
    p.add_argument("--mode", choices=["frame", "language"], default="frame")
    p.add_argument("--slot-error", type=float, default=0.0)
    p.add_argument("--intent-error", type=float, default=0.0)
    p.add_argument("--lexicon", type=Path, default=None)
    p.add_argument("--templates", type=Path, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("ablate", help="train and compare all policy variants")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--out", type=Path, default=None, help="write the comparison JSON here")
    _add_common_training_flags(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("chat", help="terminal dialogue against a trained bundle")
    p.add_argument("--bundle", type=Path, required=True)
    p.add_argument("--lexicon", type=Path, default=None)
    p.add_argument("--templates", type=Path, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_chat)

    p = sub.add_parser("serve", help="run the HTTP chat service")
    p.add_argument("--bundle", type=Path, required=True)
    p.add_argument("--lexicon", type=Path, default=None)
    p.add_argument("--templates", type=Path, default=None)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--persist", type=Path, default=None, help="append-only session log")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("inspect", help="dump the action-index table or ontology")
    p.add_argument("--bundle", type=Path, default=None)
    p.add_argument("--data", type=Path, default=None)
    p.add_argument("--actions", action="store_true", help="TSV: index, kind, identifier")
    p.set_defaults(func=cmd_inspect)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (DatasetError, ValidationError, BundleError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
