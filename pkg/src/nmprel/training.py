"""Per-scene RMSProp training of the message-passing classifier."""
from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .diffcore import RmspropState, Tensor, backward, rmsprop_step
from .diffcore import checkpoint as ckpt
from .diffcore import tensor as T
from .graph import DEFAULT_T1, DEFAULT_T2, InteractionGraph, build_graph
from .model import NmpConfig, NodeInputs, check_params, forward_logits, init_params, node_inputs
from .scenedata import Scene

log = logging.getLogger(__name__)

# named sub-seeds derived from the single run seed
SEED_DATA, SEED_INIT, SEED_SHUFFLE, SEED_LABELS = 0, 1, 2, 3


def sub_rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), stream])


class NoLabeledEdgesError(ValueError):
    pass


@dataclass
class Ablation:
    use_visual: bool = True
    use_word: bool = True
    use_spatial: bool = True
    use_graph: bool = True

    @classmethod
    def parse(cls, text: str) -> "Ablation":
        """Comma list over ``a`` (visual), ``s`` (word), ``l`` (spatial), ``graph``."""
        tokens = {t.strip().lower() for t in text.replace("+", ",").split(",") if t.strip()}
        unknown = tokens - {"a", "s", "l", "graph"}
        if unknown:
            raise ValueError(f"unknown ablation tokens {sorted(unknown)}; use a, s, l, graph")
        return cls("a" in tokens, "s" in tokens, "l" in tokens, "graph" in tokens)

    def label(self) -> str:
        parts = ["Graph"] if self.use_graph else []
        parts += [n for n, on in (("A", self.use_visual), ("L", self.use_spatial), ("S", self.use_word)) if on]
        return "+".join(parts)


@dataclass
class TrainConfig:
    epochs: int = 30
    learning_rate: float = 0.0005
    seed: int = 0
    shuffle: bool = True
    ablation: Ablation = field(default_factory=Ablation)
    eval_every: int = 0
    d_h: int = 64
    mlp_hidden: int = 64
    word_dim: int = 50
    decay: float = 0.9
    epsilon: float = 1e-8
    graph_mode: str = "predicate"
    t1: float = DEFAULT_T1
    t2: float = DEFAULT_T2
    threads: int = 1

    def __post_init__(self):
        if isinstance(self.ablation, dict):
            self.ablation = Ablation(**self.ablation)
        if isinstance(self.ablation, str):
            self.ablation = Ablation.parse(self.ablation)

    def validate(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if not (self.ablation.use_visual or self.ablation.use_word):
            raise ValueError("ablation must keep at least one of visual (a) or word (s) features")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrainLog:
    records: list[dict] = field(default_factory=list)

    @property
    def losses(self) -> list[float]:
        return [r["mean_loss"] for r in self.records]

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in self.records)


@dataclass
class TrainedModel:
    config: NmpConfig
    params: dict[str, np.ndarray]
    predicate_names: list[str] | None = None

    def save(self, path) -> None:
        save_checkpoint(self, path)


@dataclass(frozen=True)
class PreparedScene:
    scene: Scene
    graph: InteractionGraph
    inputs: NodeInputs
    labeled: np.ndarray  # indices of gold-labeled edges


def prepare(scene: Scene, config: NmpConfig, mode: str = "predicate", t1=DEFAULT_T1, t2=DEFAULT_T2) -> PreparedScene:
    graph = build_graph(scene, mode, t1, t2)
    return PreparedScene(scene, graph, node_inputs(scene, config), graph.labeled_edges())


def pick_targets(prepared: PreparedScene, rng: np.random.Generator | None = None) -> np.ndarray:
    """One gold predicate per labeled edge; sampled uniformly when ``rng`` is given."""
    gold = prepared.graph.gold
    if rng is None:
        return np.array([gold[e][0] for e in prepared.labeled], dtype=np.int64)
    return np.array([gold[e][rng.integers(len(gold[e]))] for e in prepared.labeled], dtype=np.int64)


def scene_loss(prepared: PreparedScene, params: dict, config: NmpConfig, targets=None):
    """Mean cross-entropy over the gold-labeled edges and its gradients.

    Returns ``(loss, grads)`` where ``grads`` has an entry for every parameter.
    """
    if len(prepared.labeled) == 0:
        raise NoLabeledEdgesError(f"scene {prepared.scene.id!r} has no gold-labeled edges")
    if targets is None:
        targets = pick_targets(prepared)
    tensors = {k: Tensor(v, requires_grad=True, name=k) for k, v in params.items()}
    loss = scene_loss_tensor(prepared, tensors, config, targets)
    backward(loss)
    grads = {k: t.grad if t.grad is not None else np.zeros_like(t.data) for k, t in tensors.items()}
    return float(loss.data), grads


def scene_loss_tensor(prepared: PreparedScene, params: dict, config: NmpConfig, targets) -> Tensor:
    logits = forward_logits(prepared.graph, prepared.inputs, params, config)
    picked = T.gather_rows(logits, prepared.labeled)
    return T.mean_softmax_cross_entropy(picked, targets)


def model_config_for(train_cfg: TrainConfig, num_predicates: int, num_categories: int, visual_dim: int) -> NmpConfig:
    ab = train_cfg.ablation
    return NmpConfig(
        num_predicates=num_predicates,
        num_categories=num_categories,
        visual_dim=visual_dim if ab.use_visual else 0,
        word_dim=train_cfg.word_dim if ab.use_word else 0,
        d_h=train_cfg.d_h,
        mlp_hidden=train_cfg.mlp_hidden,
        use_visual=ab.use_visual,
        use_word=ab.use_word,
        use_spatial=ab.use_spatial,
        use_graph=ab.use_graph,
    )


def infer_dims(scenes) -> tuple[int, int, int]:
    """(num_predicates, num_categories, visual_dim) implied by the data."""
    K = 1 + max((r.predicate for s in scenes for r in s.relations), default=-1)
    C = 1 + max((o.category for s in scenes for o in s.objects), default=-1)
    d_a = next((len(o.visual_feature) for s in scenes for o in s.objects if o.visual_feature is not None), 0)
    return K, C, d_a


def mean_loss(prepared, params, config) -> float:
    total = 0.0
    for p in prepared:
        total += float(scene_loss_tensor(p, params, config, pick_targets(p)).data)
    return total / len(prepared)


def train(scenes, config: TrainConfig, num_predicates: int | None = None, num_categories: int | None = None,
          eval_fn=None, log_path=None, word_table=None) -> tuple[TrainedModel, TrainLog]:
    """Train on ``scenes`` with one RMSProp step per scene per epoch.

    ``eval_fn(model) -> dict`` is called every ``eval_every`` epochs and its
    result stored in the log record. ``word_table`` (categories x word_dim)
    replaces the random initial word embeddings; it is still trained.
    """
    config.validate()
    if not scenes:
        raise ValueError("no training scenes")
    K, C, d_a = infer_dims(scenes)
    model_cfg = model_config_for(config, max(K, num_predicates or 0), max(C, num_categories or 0), d_a)
    params = init_params(model_cfg, sub_rng(config.seed, SEED_INIT))
    if word_table is not None:
        word_table = np.asarray(word_table, dtype=np.float64)
        if "word_table" not in params:
            raise ValueError("a word table was given but the ablation disables word features")
        if word_table.shape != params["word_table"].shape:
            raise ValueError(f"word table shape {word_table.shape} != expected {params['word_table'].shape}")
        params["word_table"] = word_table.copy()
    prepared = [prepare(s, model_cfg, config.graph_mode, config.t1, config.t2) for s in scenes]
    empty = [p.scene.id for p in prepared if len(p.labeled) == 0]
    if empty:
        raise NoLabeledEdgesError(f"{len(empty)} training scenes have no gold-labeled edges, e.g. {empty[:3]}")

    state = RmspropState.for_params(params, learning_rate=config.learning_rate, decay=config.decay,
                                    epsilon=config.epsilon)
    shuffle_rng = sub_rng(config.seed, SEED_SHUFFLE)
    label_rng = sub_rng(config.seed, SEED_LABELS)
    trainlog = TrainLog()
    logfh = open(log_path, "w", encoding="utf-8") if log_path else None
    pool = ThreadPoolExecutor(config.threads) if config.threads > 1 else None
    try:
        for epoch in range(1, config.epochs + 1):
            t0 = time.perf_counter()
            order = shuffle_rng.permutation(len(prepared)) if config.shuffle else np.arange(len(prepared))
            targets = [pick_targets(prepared[i], label_rng) for i in order]
            losses = []
            if pool is None:
                for i, tg in zip(order, targets):
                    loss, grads = scene_loss(prepared[i], params, model_cfg, tg)
                    rmsprop_step(params, grads, state)
                    losses.append(loss)
            else:
                # gradients of a block are computed against the same parameters, then applied in order
                for start in range(0, len(order), config.threads):
                    block = list(zip(order[start:start + config.threads], targets[start:start + config.threads]))
                    frozen = {k: v.copy() for k, v in params.items()}
                    results = list(pool.map(lambda it: scene_loss(prepared[it[0]], frozen, model_cfg, it[1]), block))
                    for loss, grads in results:
                        rmsprop_step(params, grads, state)
                        losses.append(loss)
            for name, p in params.items():
                if not np.all(np.isfinite(p)):
                    raise FloatingPointError(f"parameter {name} became non-finite in epoch {epoch}")
            record = {"epoch": epoch, "mean_loss": float(np.mean(losses)), "seconds": time.perf_counter() - t0}
            if eval_fn is not None and config.eval_every and epoch % config.eval_every == 0:
                record["eval"] = eval_fn(TrainedModel(model_cfg, params))
            trainlog.records.append(record)
            log.info("epoch %d mean loss %.5f (%.2fs)", epoch, record["mean_loss"], record["seconds"])
            if logfh:
                logfh.write(json.dumps(record, sort_keys=True) + "\n")
                logfh.flush()
    finally:
        if logfh:
            logfh.close()
        if pool is not None:
            pool.shutdown()
    return TrainedModel(model_cfg, params), trainlog


def save_checkpoint(model: TrainedModel, path) -> None:
    header = {"model": model.config.to_dict()}
    if model.predicate_names is not None:
        header["predicate_names"] = list(model.predicate_names)
    ckpt.save_checkpoint(model.params, path, header)


def load_checkpoint(path) -> TrainedModel:
    params, header = ckpt.load_checkpoint(path)
    if "model" not in header:
        raise ckpt.CheckpointError(f"{path}: checkpoint header has no model config")
    try:
        config = NmpConfig.from_dict(header["model"])
        check_params(params, config)
    except (TypeError, ValueError) as exc:
        raise ckpt.CheckpointError(f"{path}: {exc}") from exc
    return TrainedModel(config, params, header.get("predicate_names"))
