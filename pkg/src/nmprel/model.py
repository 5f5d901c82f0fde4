"""Message passing over the interaction graph and the edge classifier.

Pipeline per scene::

    o1  = f_emb(o)                                   node embedding
    e1  = f_e1([o1[src]; o1[dst]])                   node -> edge
    o2  = f_v1([mean_in(e1); mean_out(e1)])          edge -> node
    e2  = f_e2([o2[src]; o2[dst]])                   node -> edge
    e   = f_fusion([e1; e2])
    y   = softmax(W [e; l] + b)

With ``use_graph`` off, ``e = e1`` and the middle three blocks do not exist.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields

import numpy as np

from .diffcore import Tensor, init_mlp2, mlp2, softmax
from .diffcore import tensor as T
from .geometry import SPATIAL_DIM
from .graph import InteractionGraph
from .scenedata import Scene

GRAPH_BLOCKS = ("f_v1", "f_e2", "f_fusion")


@dataclass(frozen=True)
class NmpConfig:
    num_predicates: int
    num_categories: int
    visual_dim: int = 64
    word_dim: int = 50
    d_h: int = 64
    mlp_hidden: int = 64
    use_visual: bool = True
    use_word: bool = True
    use_spatial: bool = True
    use_graph: bool = True

    def __post_init__(self):
        if self.num_predicates < 2:
            raise ValueError("num_predicates must be >= 2")
        if not (self.use_visual or self.use_word):
            raise ValueError("at least one of use_visual / use_word must be enabled")
        for name in ("num_categories", "d_h", "mlp_hidden"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.use_visual and self.visual_dim < 1:
            raise ValueError("visual_dim must be positive when the visual part is used")
        if self.use_word and self.word_dim < 1:
            raise ValueError("word_dim must be positive when the word part is used")

    @property
    def d_o(self) -> int:
        return self.visual_dim * self.use_visual + self.word_dim * self.use_word

    @property
    def classifier_in(self) -> int:
        return self.d_h + SPATIAL_DIM * self.use_spatial

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "NmpConfig":
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})


def init_params(config: NmpConfig, rng: np.random.Generator) -> dict[str, np.ndarray]:
    from .diffcore import glorot_uniform

    d_h, hid = config.d_h, config.mlp_hidden
    params = {}
    params.update(init_mlp2(rng, "f_emb", config.d_o, hid, d_h))
    params.update(init_mlp2(rng, "f_e1", 2 * d_h, hid, d_h))
    if config.use_graph:
        for block in GRAPH_BLOCKS:
            params.update(init_mlp2(rng, block, 2 * d_h, hid, d_h))
    params["classifier.W"] = glorot_uniform(rng, config.num_predicates, config.classifier_in)
    params["classifier.b"] = np.zeros((1, config.num_predicates))
    if config.use_word:
        params["word_table"] = glorot_uniform(rng, config.num_categories, config.word_dim)
    return params


def expected_shapes(config: NmpConfig) -> dict[str, tuple[int, int]]:
    return {k: v.shape for k, v in init_params(config, np.random.default_rng(0)).items()}


def check_params(params: dict, config: NmpConfig) -> None:
    want = expected_shapes(config)
    missing = sorted(set(want) - set(params))
    extra = sorted(set(params) - set(want))
    bad = [f"{k}: {np.shape(params[k])} != {s}" for k, s in want.items() if k in params and np.shape(params[k]) != s]
    if missing or extra or bad:
        raise ValueError(f"parameters do not match config (missing={missing}, unexpected={extra}, shape={bad})")


@dataclass(frozen=True)
class NodeInputs:
    categories: np.ndarray  # (N,) int64
    visual: np.ndarray | None  # (N, d_a)


def node_inputs(scene: Scene, config: NmpConfig) -> NodeInputs:
    cats = np.array([o.category for o in scene.objects], dtype=np.int64)
    if len(cats) and cats.max() >= config.num_categories:
        raise ValueError(f"scene {scene.id!r}: category {cats.max()} >= num_categories {config.num_categories}")
    visual = None
    if config.use_visual:
        missing = [i for i, o in enumerate(scene.objects) if o.visual_feature is None]
        if missing:
            raise ValueError(f"scene {scene.id!r}: objects {missing} have no visual feature")
        visual = np.array([o.visual_feature for o in scene.objects], dtype=np.float64).reshape(len(cats), -1)
        if visual.shape[1] != config.visual_dim:
            raise ValueError(f"scene {scene.id!r}: visual feature width {visual.shape[1]} != {config.visual_dim}")
    return NodeInputs(cats, visual)


def node_features(inputs: NodeInputs, params, config: NmpConfig) -> Tensor:
    """Object embeddings ``[visual; word]`` as a (N, d_o) tensor."""
    parts = []
    if config.use_visual:
        parts.append(T.as_tensor(inputs.visual))
    if config.use_word:
        parts.append(T.gather_rows(params["word_table"], inputs.categories))
    return parts[0] if len(parts) == 1 else T.concat(parts[0], parts[1])


def embed_nodes(graph: InteractionGraph, o, params) -> Tensor:
    o = T.as_tensor(o)
    if o.data.shape[0] != graph.num_nodes:
        raise ValueError(f"{o.data.shape[0]} node rows for a graph of {graph.num_nodes} nodes")
    return mlp2(params, "f_emb", o)


def _pair_concat(graph: InteractionGraph, o) -> Tensor:
    return T.concat(T.gather_rows(o, graph.src), T.gather_rows(o, graph.dst))


def node_to_edge_1(graph: InteractionGraph, o1, params) -> Tensor:
    return mlp2(params, "f_e1", _pair_concat(graph, o1))


def aggregate_edges(graph: InteractionGraph, e) -> Tensor:
    """Per node ``[mean of incoming edge rows; mean of outgoing edge rows]``."""
    incoming = T.segment_mean(e, graph.dst, graph.in_degree)
    outgoing = T.segment_mean(e, graph.src, graph.out_degree)
    return T.concat(incoming, outgoing)


def edge_to_node(graph: InteractionGraph, e1, params) -> Tensor:
    return mlp2(params, "f_v1", aggregate_edges(graph, e1))


def node_to_edge_2(graph: InteractionGraph, o2, params) -> Tensor:
    return mlp2(params, "f_e2", _pair_concat(graph, o2))


def fuse_edges(e1, e2, params, config: NmpConfig) -> Tensor:
    if not config.use_graph:
        return T.as_tensor(e1)
    return mlp2(params, "f_fusion", T.concat(e1, e2))


def classify_logits(e, spatial, params, config: NmpConfig) -> Tensor:
    e = T.as_tensor(e)
    if config.use_spatial:
        if spatial is None:
            raise ValueError("spatial features required when use_spatial is on")
        x = T.concat(e, T.as_tensor(spatial))
    else:
        x = e
    return T.linear(x, params["classifier.W"], params["classifier.b"])


def classify_edges(e, spatial, params, config: NmpConfig) -> np.ndarray:
    """Per-edge predicate distributions, shape (E, K)."""
    return softmax(classify_logits(e, spatial, params, config).data)


def forward_logits(graph: InteractionGraph, inputs: NodeInputs, params, config: NmpConfig) -> Tensor:
    o = node_features(inputs, params, config)
    o1 = embed_nodes(graph, o, params)
    e1 = node_to_edge_1(graph, o1, params)
    if config.use_graph:
        o2 = edge_to_node(graph, e1, params)
        e2 = node_to_edge_2(graph, o2, params)
        e = fuse_edges(e1, e2, params, config)
    else:
        e = e1
    return classify_logits(e, graph.spatial if config.use_spatial else None, params, config)


def forward(scene: Scene, graph: InteractionGraph, params, config: NmpConfig) -> np.ndarray:
    """Edge scores (E, K) for ``graph`` built from ``scene``."""
    if graph.num_edges == 0:
        return np.zeros((0, config.num_predicates))
    return softmax(forward_logits(graph, node_inputs(scene, config), params, config).data)
