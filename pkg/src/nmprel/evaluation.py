"""Recall@n under top-k predicates, for predicate and relationship detection."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from . import kernels
from .geometry import BoundingBox, boxes_to_array
from .graph import InteractionGraph
from .scenedata import Scene

MATCH_IOU = 0.5


@dataclass(frozen=True)
class PredictedTriplet:
    subject_idx: int
    object_idx: int
    subject_box: BoundingBox
    object_box: BoundingBox
    subject_class: int
    object_class: int
    predicate: int
    score: float

    def sort_key(self):
        return (-self.score, self.subject_idx, self.object_idx, self.predicate)


@dataclass
class RecallReport:
    mode: str
    n: int
    k: int
    hits: int
    total_gold: int
    per_scene: list[tuple[str, int, int]] = field(default_factory=list)
    zero_shot: "RecallReport | None" = None
    empty: bool = False

    @property
    def recall(self) -> float:
        return self.hits / self.total_gold if self.total_gold else 0.0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["recall"] = self.recall
        d["per_scene"] = [{"id": i, "hits": h, "total_gold": t} for i, h, t in self.per_scene]
        d["zero_shot"] = self.zero_shot.to_dict() if self.zero_shot is not None else None
        return d


def candidates(scene: Scene, graph: InteractionGraph, scores: np.ndarray, k: int,
               use_detection_scores: bool = False) -> list[PredictedTriplet]:
    """Top-``k`` predicates of every scored edge; ties go to the lower predicate index."""
    scores = np.asarray(scores, dtype=np.float64)
    K = scores.shape[1] if scores.ndim == 2 else 0
    if not 1 <= k:
        raise ValueError("k must be >= 1")
    if K and k > K:
        raise ValueError(f"k={k} exceeds the {K} predicate classes")
    out = []
    for e, (i, j) in enumerate(graph.edges):
        i, j = int(i), int(j)
        si, oj = scene.objects[i], scene.objects[j]
        factor = 1.0
        if use_detection_scores:
            factor = (si.detection_score if si.detection_score is not None else 1.0) * \
                     (oj.detection_score if oj.detection_score is not None else 1.0)
        for p in np.argsort(-scores[e], kind="stable")[:k]:
            out.append(PredictedTriplet(i, j, si.box, oj.box, si.category, oj.category, int(p),
                                        float(scores[e, p]) * factor))
    return out


def top_n(cands, n: int) -> list[PredictedTriplet]:
    return sorted(cands, key=PredictedTriplet.sort_key)[:n]


def _pairwise_iou(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ix = np.minimum(a[:, None, 0] + a[:, None, 2], b[None, :, 0] + b[None, :, 2]) - np.maximum(a[:, None, 0], b[None, :, 0])
    iy = np.minimum(a[:, None, 1] + a[:, None, 3], b[None, :, 1] + b[None, :, 3]) - np.maximum(a[:, None, 1], b[None, :, 1])
    inter = np.where((ix > 0) & (iy > 0), ix * iy, 0.0)
    area_a = (a[:, 2] * a[:, 3])[:, None]
    area_b = (b[:, 2] * b[:, 3])[None, :]
    return inter / (area_a + area_b - inter)


def compatibility(scene: Scene, kept: list[PredictedTriplet], gold_rel_idx, mode: str) -> np.ndarray:
    """Boolean (candidates, gold) matrix of which candidate may claim which gold triplet."""
    gold = [scene.relations[r] for r in gold_rel_idx]
    if not kept or not gold:
        return np.zeros((len(kept), len(gold)), dtype=bool)
    c_pred = np.array([c.predicate for c in kept])
    g_pred = np.array([g.predicate for g in gold])
    same_pred = c_pred[:, None] == g_pred[None, :]
    if mode == "predicate":
        c_pair = np.array([(c.subject_idx, c.object_idx) for c in kept])
        g_pair = np.array([g.pair for g in gold])
        return same_pred & (c_pair[:, None, 0] == g_pair[None, :, 0]) & (c_pair[:, None, 1] == g_pair[None, :, 1])
    if mode != "relationship":
        raise ValueError(f"unknown mode {mode!r}")
    objs = scene.objects
    c_cls = np.array([(c.subject_class, c.object_class) for c in kept])
    g_cls = np.array([(objs[g.subject_idx].category, objs[g.object_idx].category) for g in gold])
    sub_iou = _pairwise_iou(boxes_to_array([c.subject_box for c in kept]),
                            boxes_to_array([objs[g.subject_idx].box for g in gold]))
    obj_iou = _pairwise_iou(boxes_to_array([c.object_box for c in kept]),
                            boxes_to_array([objs[g.object_idx].box for g in gold]))
    return (same_pred & (c_cls[:, None, 0] == g_cls[None, :, 0]) & (c_cls[:, None, 1] == g_cls[None, :, 1])
            & (sub_iou >= MATCH_IOU) & (obj_iou >= MATCH_IOU))


def recall_at_n(scenes, per_scene_candidates, n: int, mode: str = "predicate", k: int = 1,
                gold_filter=None) -> RecallReport:
    """Micro-averaged recall of gold triplets among each scene's top-``n`` candidates.

    Matching is one-to-one: a maximum bipartite matching between the kept
    candidates (visited in rank order) and the gold triplets.
    ``gold_filter(scene_index, relation_index) -> bool`` restricts the gold set.
    """
    hits_total = gold_total = 0
    per_scene = []
    for si, (scene, cands) in enumerate(zip(scenes, per_scene_candidates)):
        gold_idx = [ri for ri in range(len(scene.relations)) if gold_filter is None or gold_filter(si, ri)]
        kept = top_n(cands, n)
        hits = kernels.max_matching(compatibility(scene, kept, gold_idx, mode)) if gold_idx and kept else 0
        per_scene.append((scene.id, int(hits), len(gold_idx)))
        hits_total += hits
        gold_total += len(gold_idx)
    return RecallReport(mode, n, k, int(hits_total), gold_total, per_scene)


def zero_shot_report(scenes, per_scene_candidates, unseen, n: int, mode: str = "predicate", k: int = 1) -> RecallReport:
    """Recall restricted to the ``unseen`` (scene_index, relation_index) gold set."""
    unseen = set(unseen)
    report = recall_at_n(scenes, per_scene_candidates, n, mode, k, gold_filter=lambda s, r: (s, r) in unseen)
    report.empty = report.total_gold == 0
    return report


def render_table(reports: list[RecallReport], label: str = "model") -> str:
    """Fixed-width table with one row per k: R@50 / R@100 per mode."""
    modes = sorted({r.mode for r in reports}, key=lambda m: ("predicate", "relationship").index(m))
    ns = sorted({r.n for r in reports})
    ks = sorted({r.k for r in reports})
    by_key = {(r.mode, r.n, r.k): r for r in reports}
    head1 = f"{'k':>5} {'Method':<10}" + "".join(f" {m.capitalize()[:5] + ' Det.':^{9 * len(ns)}}" for m in modes)
    head2 = f"{'':>5} {'':<10}" + "".join(f" {'R@' + str(n):>8}" for _ in modes for n in ns)
    lines = [head1, head2, "-" * len(head2)]
    for k in ks:
        row = f"{k:>5} {label:<10}"
        for m in modes:
            for n in ns:
                r = by_key.get((m, n, k))
                row += f" {100 * r.recall:>8.2f}" if r else f" {'-':>8}"
        lines.append(row)
    zs = [r for r in reports if r.zero_shot is not None]
    if zs:
        lines.append("")
        lines.append("zero-shot")
        for r in zs:
            z = r.zero_shot
            flag = " (empty)" if z.empty else ""
            lines.append(f"{r.k:>5} {r.mode:<12} R@{r.n:<4} {100 * z.recall:>8.2f}  [{z.hits}/{z.total_gold}]{flag}")
    return "\n".join(lines)
