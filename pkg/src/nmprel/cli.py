"""Command-line interface: ``nmprel {gen,train,eval,infer}``.

Every subcommand accepts ``--config FILE`` (a JSON object keyed by option
name); explicit flags override the file, which overrides the defaults. The
resolved configuration is echoed to stderr on every run.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
Set ``NMP_LOG`` (DEBUG, INFO, WARNING, ...) to control log verbosity.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from collections import Counter

from . import kernels
from .diffcore import CheckpointError
from .evaluation import candidates, render_table
from .graph import DEFAULT_T1, DEFAULT_T2, build_graph
from .model import forward
from .pipeline import evaluate
from .scenedata import (SceneValidationError, SyntheticConfig, generate_synthetic, load_dataset,
                        load_embedding_table, predicate_names, save_scenes, scenes_from_document,
                        synthetic_meta)
from .training import Ablation, TrainConfig, TrainedModel, load_checkpoint, save_checkpoint, train

log = logging.getLogger("nmprel")


class UsageError(Exception):
    """Bad flags, config values or input files (exit code 2)."""


# (flag, type, default, help); a default of None marks a required option
OPTIONS = {
    "gen": [
        ("--out", str, None, "output scene file"),
        ("--scenes", int, 200, "number of scenes"),
        ("--objects", int, 6, "objects per scene"),
        ("--categories", int, 6, "object categories"),
        ("--predicates", int, 8, "predicate classes (first four are geometric)"),
        ("--visual-dim", int, 16, "length of the noisy one-hot visual feature"),
        ("--noise", float, 0.1, "standard deviation of the visual feature noise"),
        ("--layouts", bool, True, "use column/row scene layouts marked by category 0"),
        ("--seed", int, 0, "random seed"),
    ],
    "train": [
        ("--data", str, None, "training scene file"),
        ("--out", str, None, "checkpoint to write"),
        ("--log", str, "", "JSON-lines training log (default: <out>.log.jsonl)"),
        ("--epochs", int, 30, "passes over the training scenes"),
        ("--lr", float, 0.0005, "RMSProp learning rate"),
        ("--seed", int, 0, "seed for initialisation, shuffling and label sampling"),
        ("--ablation", str, "graph,a,l,s", "enabled parts: a (visual), s (word), l (spatial), graph"),
        ("--d-h", int, 64, "hidden embedding width"),
        ("--mlp-hidden", int, 64, "inner width of every two-layer perceptron"),
        ("--word-dim", int, 50, "word embedding width"),
        ("--word-embeddings", str, "", "JSON word table to initialise the word embeddings"),
        ("--graph-mode", str, "predicate", "interaction graph: predicate or relationship"),
        ("--t1", float, DEFAULT_T1, "relationship graph distance threshold"),
        ("--t2", float, DEFAULT_T2, "relationship graph overlap threshold"),
        ("--shuffle", bool, True, "shuffle scene order every epoch"),
        ("--eval-every", int, 0, "evaluate on --eval-data every N epochs (0: never)"),
        ("--eval-data", str, "", "scene file for periodic evaluation"),
        ("--threads", int, 1, "parallel gradient workers (>1 is not bit-deterministic)"),
    ],
    "eval": [
        ("--data", str, None, "scene file to evaluate on"),
        ("--ckpt", str, None, "checkpoint"),
        ("--mode", str, "predicate", "predicate or relationship detection"),
        ("--n", str, "50,100", "comma-separated recall cut-offs"),
        ("--k", str, "1", "comma-separated predicates kept per pair; 'K' means all"),
        ("--zero-shot-train", str, "", "training scene file; adds the unseen-triplet sub-report"),
        ("--t1", float, DEFAULT_T1, "relationship graph distance threshold"),
        ("--t2", float, DEFAULT_T2, "relationship graph overlap threshold"),
        ("--detection-scores", bool, False, "multiply candidate scores by object detection scores"),
        ("--table", bool, False, "print a fixed-width results table"),
        ("--json-out", str, "", "write the reports as JSON to this path"),
        ("--threads", int, 1, "parallel scoring workers"),
    ],
    "infer": [
        ("--ckpt", str, None, "checkpoint"),
        ("--scene", str, None, "JSON file with one scene (bare object or {\"scenes\": [one]})"),
        ("--mode", str, "relationship", "which pairs to score: relationship (thresholded) or predicate (annotated)"),
        ("--top", int, 5, "predicates listed per pair"),
        ("--full", bool, False, "include the full predicate distribution per pair"),
        ("--json", bool, False, "print JSON instead of text"),
        ("--t1", float, DEFAULT_T1, "relationship graph distance threshold"),
        ("--t2", float, DEFAULT_T2, "relationship graph overlap threshold"),
    ],
}


COMMAND_HELP = {
    "gen": "write a synthetic scene file",
    "train": "train a model on a scene file and write a checkpoint",
    "eval": "report recall@n of a checkpoint on a scene file",
    "infer": "print ranked predicates for the object pairs of one scene",
}


def _dest(flag: str) -> str:
    return flag.lstrip("-").replace("-", "_")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nmprel", description="Message passing for visual relationship detection.")
    parser.add_argument("--version", action="version", version=f"%(prog)s (kernels: {kernels.BACKEND})")
    sub = parser.add_subparsers(dest="command", required=True)
    for command, options in OPTIONS.items():
        p = sub.add_parser(command, help=COMMAND_HELP[command], description=COMMAND_HELP[command],
                           argument_default=argparse.SUPPRESS)
        p.add_argument("--config", help="JSON file of option values; flags override it")
        for flag, typ, default, help_text in options:
            shown = "required" if default is None else f"default: {default}"
            if typ is bool:
                p.add_argument(flag, action=argparse.BooleanOptionalAction, help=f"{help_text} ({shown})")
            else:
                p.add_argument(flag, type=typ, help=f"{help_text} ({shown})")
    return parser


def _coerce(command: str, key: str, value):
    for flag, typ, _, _ in OPTIONS[command]:
        if _dest(flag) == key:
            if typ is bool:
                if not isinstance(value, bool):
                    raise UsageError(f"config option {key!r} must be true or false")
                return value
            try:
                return typ(value)
            except (TypeError, ValueError):
                raise UsageError(f"config option {key!r}: cannot interpret {value!r}") from None
    raise UsageError(f"unknown config option {key!r} for {command}")


def resolve_config(command: str, args: argparse.Namespace) -> dict:
    resolved = {_dest(flag): default for flag, _, default, _ in OPTIONS[command]}
    given = vars(args).copy()
    given.pop("command", None)
    config_path = given.pop("config", None)
    if config_path:
        try:
            with open(config_path, encoding="utf-8") as fh:
                from_file = json.load(fh)
        except OSError as exc:
            raise UsageError(f"cannot read config file: {exc}") from None
        except json.JSONDecodeError as exc:
            raise UsageError(f"config file {config_path} is not valid JSON: {exc}") from None
        if not isinstance(from_file, dict):
            raise UsageError(f"config file {config_path} must hold a JSON object")
        for key, value in from_file.items():
            key = key.replace("-", "_")
            resolved[key] = _coerce(command, key, value)
    resolved.update(given)
    missing = [f"--{k.replace('_', '-')}" for k, v in resolved.items() if v is None]
    if missing:
        raise UsageError(f"{command}: missing required option(s) {', '.join(missing)}")
    return resolved


def _parse_list(text: str, what: str, K: int | None = None) -> list[int]:
    out = []
    for token in str(text).split(","):
        token = token.strip()
        if not token:
            continue
        if token.upper() == "K" and K is not None:
            out.append(K)
            continue
        try:
            out.append(int(token))
        except ValueError:
            raise UsageError(f"--{what}: {token!r} is not an integer") from None
    if not out or any(v < 1 for v in out):
        raise UsageError(f"--{what} needs a comma-separated list of positive integers")
    return sorted(set(out))


def _load_scenes(path: str, what: str):
    if not os.path.isfile(path):
        raise UsageError(f"{what} file not found: {path}")
    try:
        return load_dataset(path)
    except SceneValidationError as exc:
        raise UsageError(f"{path}: {exc}") from None
    except ValueError as exc:  # JSON syntax
        raise UsageError(f"{path}: cannot parse scene file: {exc}") from None


def _load_model(path: str) -> TrainedModel:
    if not os.path.isfile(path):
        raise UsageError(f"checkpoint not found: {path}")
    try:
        return load_checkpoint(path)
    except CheckpointError as exc:
        raise UsageError(str(exc)) from None


def _check_dims(model: TrainedModel, scenes) -> None:
    cfg = model.config
    problems = []
    for s in scenes:
        for i, o in enumerate(s.objects):
            if o.category >= cfg.num_categories:
                problems.append(f"scene {s.id!r} object {i}: category {o.category} >= {cfg.num_categories}")
            if cfg.use_visual:
                if o.visual_feature is None:
                    problems.append(f"scene {s.id!r} object {i}: no visual feature")
                elif len(o.visual_feature) != cfg.visual_dim:
                    problems.append(f"scene {s.id!r} object {i}: visual feature length "
                                    f"{len(o.visual_feature)} != {cfg.visual_dim}")
        for r in s.relations:
            if r.predicate >= cfg.num_predicates:
                problems.append(f"scene {s.id!r}: predicate {r.predicate} >= {cfg.num_predicates}")
        if len(problems) >= 5:
            break
    if problems:
        raise RuntimeError("checkpoint and data disagree: " + "; ".join(problems[:5]))


# -- subcommands ---------------------------------------------------------------


def cmd_gen(cfg: dict) -> int:
    config = SyntheticConfig(num_scenes=cfg["scenes"], objects_per_scene=cfg["objects"],
                             num_categories=cfg["categories"], num_predicates=cfg["predicates"],
                             seed=cfg["seed"], visual_dim=cfg["visual_dim"], noise=cfg["noise"],
                             context_layouts=cfg["layouts"])
    try:
        config.validate()
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    scenes = generate_synthetic(config)
    save_scenes(scenes, cfg["out"], synthetic_meta(config))
    names = predicate_names(config.num_predicates)
    hist = Counter(r.predicate for s in scenes for r in s.relations)
    total = sum(hist.values())
    print(f"wrote {len(scenes)} scenes, {sum(len(s.objects) for s in scenes)} objects, "
          f"{total} relations to {cfg['out']}")
    for p, name in enumerate(names):
        print(f"  {p:>3} {name:<12} {hist.get(p, 0):>7}")
    return 0


def _eval_callback(scenes):
    def run(model):
        reports = evaluate(model, scenes, ns=(50, 100), ks=(1,))
        return {f"R@{r.n}": r.recall for r in reports}
    return run


def cmd_train(cfg: dict) -> int:
    scenes, meta = _load_scenes(cfg["data"], "data")
    if not scenes:
        raise UsageError(f"{cfg['data']}: no scenes to train on")
    if cfg["graph_mode"] not in ("predicate", "relationship"):
        raise UsageError("--graph-mode must be predicate or relationship")
    try:
        tcfg = TrainConfig(epochs=cfg["epochs"], learning_rate=cfg["lr"], seed=cfg["seed"], shuffle=cfg["shuffle"],
                           ablation=Ablation.parse(cfg["ablation"]), eval_every=cfg["eval_every"], d_h=cfg["d_h"],
                           mlp_hidden=cfg["mlp_hidden"], word_dim=cfg["word_dim"], graph_mode=cfg["graph_mode"],
                           t1=cfg["t1"], t2=cfg["t2"], threads=cfg["threads"])
        tcfg.validate()
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    word_table = None
    if cfg["word_embeddings"]:
        if not os.path.isfile(cfg["word_embeddings"]):
            raise UsageError(f"word embedding file not found: {cfg['word_embeddings']}")
        try:
            table = load_embedding_table(cfg["word_embeddings"], trainable=True)
        except (ValueError, KeyError) as exc:
            raise UsageError(f"{cfg['word_embeddings']}: {exc}") from None
        tcfg.word_dim = table.dim
        word_table = table.rows
    eval_fn = None
    if tcfg.eval_every:
        if not cfg["eval_data"]:
            raise UsageError("--eval-every needs --eval-data")
        eval_fn = _eval_callback(_load_scenes(cfg["eval_data"], "eval data")[0])
    log_path = cfg["log"] or cfg["out"] + ".log.jsonl"
    model, trainlog = train(scenes, tcfg, meta.num_predicates, meta.num_categories, eval_fn=eval_fn,
                            log_path=log_path, word_table=word_table)
    model.predicate_names = meta.predicate_names
    save_checkpoint(model, cfg["out"])
    print(f"trained {tcfg.ablation.label()} on {len(scenes)} scenes for {tcfg.epochs} epochs; "
          f"final mean loss {trainlog.losses[-1]:.6f}")
    print(f"checkpoint: {cfg['out']}")
    print(f"log: {log_path}")
    return 0


def cmd_eval(cfg: dict) -> int:
    if cfg["mode"] not in ("predicate", "relationship"):
        raise UsageError("--mode must be predicate or relationship")
    model = _load_model(cfg["ckpt"])
    scenes, _ = _load_scenes(cfg["data"], "data")
    K = model.config.num_predicates
    ns = _parse_list(cfg["n"], "n")
    ks = _parse_list(cfg["k"], "k", K)
    if max(ks) > K:
        raise UsageError(f"--k {max(ks)} exceeds the {K} predicate classes")
    train_scenes = _load_scenes(cfg["zero_shot_train"], "zero-shot train")[0] if cfg["zero_shot_train"] else None
    _check_dims(model, scenes)
    reports = evaluate(model, scenes, cfg["mode"], ns=ns, ks=ks, zero_shot_train=train_scenes,
                       t1=cfg["t1"], t2=cfg["t2"], use_detection_scores=cfg["detection_scores"],
                       threads=cfg["threads"])
    for r in reports:
        line = f"{r.mode} k={r.k} R@{r.n} = {r.recall:.4f} ({r.hits}/{r.total_gold})"
        if r.zero_shot is not None:
            z = r.zero_shot
            line += f"  zero-shot {z.recall:.4f} ({z.hits}/{z.total_gold}){' empty' if z.empty else ''}"
        print(line)
    if cfg["table"]:
        print()
        print(render_table(reports))
    if cfg["json_out"]:
        with open(cfg["json_out"], "w", encoding="utf-8") as fh:
            json.dump([r.to_dict() for r in reports], fh, indent=1, sort_keys=True)
            fh.write("\n")
    return 0


def _read_one_scene(path: str):
    if not os.path.isfile(path):
        raise UsageError(f"scene file not found: {path}")
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: cannot parse scene file: {exc}") from None
    if isinstance(doc, dict) and "scenes" not in doc:
        doc = {"scenes": [doc]}
    try:
        scenes, _ = scenes_from_document(doc)
    except SceneValidationError as exc:
        raise UsageError(f"{path}: {exc}") from None
    if len(scenes) != 1:
        raise UsageError(f"{path}: expected exactly one scene, found {len(scenes)}")
    return scenes[0]


def infer_scene(model: TrainedModel, scene, mode: str = "relationship", top: int = 5, full: bool = False,
                t1: float = DEFAULT_T1, t2: float = DEFAULT_T2) -> dict:
    """Ranked predicates for every ordered pair of the scene's interaction graph."""
    graph = build_graph(scene, mode, t1, t2)
    scores = forward(scene, graph, model.params, model.config)
    K = model.config.num_predicates
    names = model.predicate_names or [f"pred_{p}" for p in range(K)]
    k = min(top, K)
    pairs = []
    cands = candidates(scene, graph, scores, k) if graph.num_edges else []
    for e, (i, j) in enumerate(graph.edges.tolist()):
        entry = {"subject": i, "object": j,
                 "subject_category": scene.objects[i].category, "object_category": scene.objects[j].category,
                 "predictions": [{"predicate": c.predicate, "name": names[c.predicate], "score": c.score}
                                 for c in cands[e * k:(e + 1) * k]]}
        if full:
            entry["distribution"] = scores[e].tolist()
        pairs.append(entry)
    return {"scene": scene.id, "mode": mode, "pairs": pairs}


def cmd_infer(cfg: dict) -> int:
    if cfg["mode"] not in ("predicate", "relationship"):
        raise UsageError("--mode must be predicate or relationship")
    if cfg["top"] < 1:
        raise UsageError("--top must be >= 1")
    model = _load_model(cfg["ckpt"])
    scene = _read_one_scene(cfg["scene"])
    _check_dims(model, [scene])
    result = infer_scene(model, scene, cfg["mode"], cfg["top"], cfg["full"], cfg["t1"], cfg["t2"])
    if cfg["json"]:
        print(json.dumps(result, indent=1))
        return 0
    for pair in result["pairs"]:
        print(f"({pair['subject']}, {pair['object']})  categories {pair['subject_category']} -> "
              f"{pair['object_category']}")
        for rank, p in enumerate(pair["predictions"], 1):
            print(f"  {rank}. {p['name']:<12} {p['score']:.6f}")
        if "distribution" in pair:
            print("  distribution: " + " ".join(f"{v:.6f}" for v in pair["distribution"]))
    return 0


COMMANDS = {"gen": cmd_gen, "train": cmd_train, "eval": cmd_eval, "infer": cmd_infer}


def _setup_logging() -> None:
    level_name = os.environ.get("NMP_LOG", "WARNING").upper()
    level = getattr(logging, level_name, None)
    if not isinstance(level, int):
        level = logging.WARNING
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already printed the usage message
        return int(exc.code or 0)
    try:
        cfg = resolve_config(args.command, args)
        print(f"config {args.command}: {json.dumps(cfg, sort_keys=True)}", file=sys.stderr)
        return COMMANDS[args.command](cfg)
    except UsageError as exc:
        print(f"nmprel {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (RuntimeError, ValueError, OSError, FloatingPointError) as exc:
        log.debug("failure", exc_info=True)
        print(f"nmprel {args.command}: failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
