"""Directed interaction graphs over the objects of a scene."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .geometry import BoundingBox, boxes_to_array, iou, norm_distance
from .scenedata import Scene

DEFAULT_T1 = 0.45
DEFAULT_T2 = 0.50


@dataclass(frozen=True)
class InteractionGraph:
    """Edges are sorted by ``(i, j)``; ``gold[e]`` holds the annotated predicates of edge ``e``."""

    num_nodes: int
    edges: np.ndarray  # (E, 2) int64
    in_degree: np.ndarray
    out_degree: np.ndarray
    spatial: np.ndarray  # (E, 14)
    gold: tuple[tuple[int, ...], ...]

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def src(self) -> np.ndarray:
        return self.edges[:, 0]

    @property
    def dst(self) -> np.ndarray:
        return self.edges[:, 1]

    def labeled_edges(self) -> np.ndarray:
        return np.array([e for e, g in enumerate(self.gold) if g], dtype=np.int64)

    def edge_index(self) -> dict[tuple[int, int], int]:
        return {(int(i), int(j)): e for e, (i, j) in enumerate(self.edges)}


def edge_exists(b_i: BoundingBox, b_j: BoundingBox, image_w: float, image_h: float,
                t1: float = DEFAULT_T1, t2: float = DEFAULT_T2) -> bool:
    return norm_distance(b_i, b_j, image_w, image_h) < t1 or iou(b_i, b_j) > t2


def _gold_by_pair(scene: Scene) -> dict[tuple[int, int], tuple[int, ...]]:
    gold: dict[tuple[int, int], set] = {}
    for r in scene.relations:
        gold.setdefault(r.pair, set()).add(r.predicate)
    return {pair: tuple(sorted(preds)) for pair, preds in gold.items()}


def _assemble(scene: Scene, edges: np.ndarray) -> InteractionGraph:
    n = len(scene.objects)
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if len(edges):
        order = np.lexsort((edges[:, 1], edges[:, 0]))
        edges = edges[order]
    in_deg = np.bincount(edges[:, 1], minlength=n).astype(np.int64)
    out_deg = np.bincount(edges[:, 0], minlength=n).astype(np.int64)
    if len(edges):
        spatial = kernels.pair_features(boxes_to_array([o.box for o in scene.objects]),
                                        edges[:, 0], edges[:, 1], scene.image_w, scene.image_h)
    else:
        spatial = np.zeros((0, 14))
    by_pair = _gold_by_pair(scene)
    gold = tuple(by_pair.get((int(i), int(j)), ()) for i, j in edges)
    return InteractionGraph(n, edges, in_deg, out_deg, spatial, gold)


def build_predicate_graph(scene: Scene) -> InteractionGraph:
    """One edge per annotated ordered (subject, object) pair."""
    pairs = sorted(_gold_by_pair(scene))
    return _assemble(scene, np.array(pairs, dtype=np.int64).reshape(-1, 2))


def build_relationship_graph(scene: Scene, t1: float = DEFAULT_T1, t2: float = DEFAULT_T2) -> InteractionGraph:
    """Edges between every ordered pair passing the distance/overlap test."""
    if len(scene.objects) < 2:
        return _assemble(scene, np.zeros((0, 2), dtype=np.int64))
    boxes = boxes_to_array([o.box for o in scene.objects])
    return _assemble(scene, kernels.threshold_edges(boxes, scene.image_w, scene.image_h, t1, t2))


def build_graph(scene: Scene, mode: str = "predicate", t1: float = DEFAULT_T1, t2: float = DEFAULT_T2):
    if mode == "predicate":
        return build_predicate_graph(scene)
    if mode == "relationship":
        return build_relationship_graph(scene, t1, t2)
    raise ValueError(f"unknown graph mode {mode!r}")
