"""Scene records, their JSON format, synthetic scenes and zero-shot splits.

Scene file layout::

    {"meta": {"num_categories": C, "num_predicates": K, "predicate_names": [...]},
     "scenes": [{"id", "image_w", "image_h",
                 "objects": [{"x", "y", "w", "h", "category", "visual_feature"?, "score"?}],
                 "relations": [{"sub", "obj", "pred"}]}]}

``meta`` is optional; without it category/predicate ranges are inferred.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import BoundingBox, iou, norm_distance

GEOMETRIC_PREDICATES = ("above", "below", "near", "overlaps")
ABOVE, BELOW, NEAR, OVERLAPS = range(4)

# generator thresholds, as fractions of the image diagonal where relevant
OVERLAP_IOU = 0.3
VERTICAL_GAP = 0.05
NEAR_DISTANCE = 0.2
# pairs this close to a threshold are left unannotated
IOU_MARGIN = 0.08
GAP_BAND = (0.03, 0.10)
DISTANCE_MARGIN = 0.04


class SceneValidationError(ValueError):
    def __init__(self, violations):
        self.violations = list(violations)
        shown = "\n  ".join(self.violations[:20])
        more = f"\n  ... and {len(self.violations) - 20} more" if len(self.violations) > 20 else ""
        super().__init__(f"{len(self.violations)} validation error(s):\n  {shown}{more}")


@dataclass(frozen=True)
class ObjectInstance:
    box: BoundingBox
    category: int
    visual_feature: tuple[float, ...] | None = None
    detection_score: float | None = None


@dataclass(frozen=True)
class RelationAnnotation:
    subject_idx: int
    object_idx: int
    predicate: int

    @property
    def pair(self) -> tuple[int, int]:
        return (self.subject_idx, self.object_idx)


@dataclass(frozen=True)
class Scene:
    id: str
    image_w: float
    image_h: float
    objects: tuple[ObjectInstance, ...] = ()
    relations: tuple[RelationAnnotation, ...] = ()

    def triplet_type(self, rel: RelationAnnotation) -> tuple[int, int, int]:
        """(subject category, predicate, object category)."""
        return (self.objects[rel.subject_idx].category, rel.predicate, self.objects[rel.object_idx].category)


@dataclass
class DatasetMeta:
    num_categories: int | None = None
    num_predicates: int | None = None
    predicate_names: list[str] | None = None

    def to_dict(self):
        d = {}
        if self.num_categories is not None:
            d["num_categories"] = self.num_categories
        if self.num_predicates is not None:
            d["num_predicates"] = self.num_predicates
        if self.predicate_names is not None:
            d["predicate_names"] = list(self.predicate_names)
        return d


# -- validation and (de)serialization ----------------------------------------


def _is_num(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _is_index(v):
    return isinstance(v, int) and not isinstance(v, bool)


def _scene_violations(raw, pos, meta: DatasetMeta, visual_dim: list):
    sid = raw.get("id", f"#{pos}") if isinstance(raw, dict) else f"#{pos}"
    where = f"scene {sid!r}"
    errs = []
    if not isinstance(raw, dict):
        return [f"{where}: not an object"]
    if not isinstance(raw.get("id"), str):
        errs.append(f"{where}.id: must be a string")
    for key in ("image_w", "image_h"):
        if not _is_num(raw.get(key)) or raw[key] <= 0:
            errs.append(f"{where}.{key}: must be a positive number")
    objects = raw.get("objects", [])
    relations = raw.get("relations", [])
    if not isinstance(objects, list):
        return errs + [f"{where}.objects: must be a list"]
    if not isinstance(relations, list):
        return errs + [f"{where}.relations: must be a list"]
    for i, o in enumerate(objects):
        p = f"{where}.objects[{i}]"
        if not isinstance(o, dict):
            errs.append(f"{p}: not an object")
            continue
        for key in ("x", "y", "w", "h"):
            if not _is_num(o.get(key)):
                errs.append(f"{p}.{key}: must be a finite number")
        for key in ("w", "h"):
            if _is_num(o.get(key)) and o[key] <= 0:
                errs.append(f"{p}.{key}: must be positive, got {o[key]}")
        c = o.get("category")
        if not _is_index(c) or c < 0:
            errs.append(f"{p}.category: must be a non-negative integer")
        elif meta.num_categories is not None and c >= meta.num_categories:
            errs.append(f"{p}.category: {c} >= num_categories {meta.num_categories}")
        vf = o.get("visual_feature")
        if vf is not None:
            if not isinstance(vf, list) or not all(_is_num(v) for v in vf):
                errs.append(f"{p}.visual_feature: must be a list of finite numbers")
            elif visual_dim[0] is None:
                visual_dim[0] = len(vf)
            elif len(vf) != visual_dim[0]:
                errs.append(f"{p}.visual_feature: length {len(vf)} != {visual_dim[0]}")
        s = o.get("score")
        if s is not None and (not _is_num(s) or not 0.0 <= s <= 1.0):
            errs.append(f"{p}.score: must be in [0, 1]")
    seen = set()
    for r, rel in enumerate(relations):
        p = f"{where}.relations[{r}]"
        if not isinstance(rel, dict):
            errs.append(f"{p}: not an object")
            continue
        sub, obj, pred = rel.get("sub"), rel.get("obj"), rel.get("pred")
        for key, v in (("sub", sub), ("obj", obj)):
            if not _is_index(v) or not 0 <= v < len(objects):
                errs.append(f"{p}.{key}: index {v!r} out of range for {len(objects)} objects")
        if _is_index(sub) and sub == obj:
            errs.append(f"{p}: subject and object are the same object {sub}")
        if not _is_index(pred) or pred < 0:
            errs.append(f"{p}.pred: must be a non-negative integer")
        elif meta.num_predicates is not None and pred >= meta.num_predicates:
            errs.append(f"{p}.pred: {pred} >= num_predicates {meta.num_predicates}")
        key = (sub, obj, pred)
        if key in seen:
            errs.append(f"{p}: duplicate triplet {key}")
        seen.add(key)
    return errs


def _scene_from_raw(raw) -> Scene:
    objects = tuple(
        ObjectInstance(
            box=BoundingBox(float(o["x"]), float(o["y"]), float(o["w"]), float(o["h"])),
            category=int(o["category"]),
            visual_feature=None if o.get("visual_feature") is None else tuple(float(v) for v in o["visual_feature"]),
            detection_score=None if o.get("score") is None else float(o["score"]),
        )
        for o in raw.get("objects", [])
    )
    relations = tuple(
        RelationAnnotation(int(r["sub"]), int(r["obj"]), int(r["pred"])) for r in raw.get("relations", [])
    )
    return Scene(str(raw["id"]), float(raw["image_w"]), float(raw["image_h"]), objects, relations)


def scenes_from_document(doc) -> tuple[list[Scene], DatasetMeta]:
    if not isinstance(doc, dict) or not isinstance(doc.get("scenes"), list):
        raise SceneValidationError(["document: expected an object with a 'scenes' list"])
    rawmeta = doc.get("meta") or {}
    meta = DatasetMeta(rawmeta.get("num_categories"), rawmeta.get("num_predicates"), rawmeta.get("predicate_names"))
    visual_dim = [None]
    violations = []
    ids = set()
    for pos, raw in enumerate(doc["scenes"]):
        violations.extend(_scene_violations(raw, pos, meta, visual_dim))
        if isinstance(raw, dict) and isinstance(raw.get("id"), str):
            if raw["id"] in ids:
                violations.append(f"scene {raw['id']!r}: duplicate scene id")
            ids.add(raw["id"])
    if violations:
        raise SceneValidationError(violations)
    scenes = [_scene_from_raw(raw) for raw in doc["scenes"]]
    if meta.num_categories is None:
        meta.num_categories = 1 + max((o.category for s in scenes for o in s.objects), default=-1)
    if meta.num_predicates is None:
        meta.num_predicates = 1 + max((r.predicate for s in scenes for r in s.relations), default=-1)
    return scenes, meta


def load_dataset(path) -> tuple[list[Scene], DatasetMeta]:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: not valid JSON: {exc}") from exc
    return scenes_from_document(doc)


def load_scenes(path) -> list[Scene]:
    return load_dataset(path)[0]


def scene_to_dict(scene: Scene) -> dict:
    objects = []
    for o in scene.objects:
        d = {"x": o.box.x, "y": o.box.y, "w": o.box.w, "h": o.box.h, "category": o.category}
        if o.visual_feature is not None:
            d["visual_feature"] = list(o.visual_feature)
        if o.detection_score is not None:
            d["score"] = o.detection_score
        objects.append(d)
    return {
        "id": scene.id,
        "image_w": scene.image_w,
        "image_h": scene.image_h,
        "objects": objects,
        "relations": [{"sub": r.subject_idx, "obj": r.object_idx, "pred": r.predicate} for r in scene.relations],
    }


def dumps_scenes(scenes, meta: DatasetMeta | None = None) -> str:
    doc = {}
    if meta is not None:
        doc["meta"] = meta.to_dict()
    doc["scenes"] = [scene_to_dict(s) for s in scenes]
    return json.dumps(doc)


def save_scenes(scenes, path, meta: DatasetMeta | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_scenes(scenes, meta))


# -- word embeddings ----------------------------------------------------------


@dataclass
class EmbeddingTable:
    rows: np.ndarray
    trainable: bool = True

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=np.float64)
        if self.rows.ndim != 2:
            raise ValueError("embedding rows must form a 2-d table")

    @property
    def num_categories(self) -> int:
        return self.rows.shape[0]

    @property
    def dim(self) -> int:
        return self.rows.shape[1]

    @classmethod
    def glorot(cls, num_categories: int, dim: int, rng: np.random.Generator) -> "EmbeddingTable":
        from .diffcore import glorot_uniform

        return cls(glorot_uniform(rng, num_categories, dim), trainable=True)

    def lookup(self, category: int) -> np.ndarray:
        if not 0 <= category < self.num_categories:
            raise IndexError(f"category {category} not covered by a table of {self.num_categories} rows")
        return self.rows[category]


def load_embedding_table(path, trainable: bool = False) -> EmbeddingTable:
    """Read ``{"dim": D, "rows": [[...], ...]}``; row ``c`` is category ``c``."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    dim = int(doc["dim"])
    rows = doc["rows"]
    bad = [i for i, r in enumerate(rows) if len(r) != dim]
    if bad:
        raise ValueError(f"{path}: rows {bad[:5]} do not have length {dim}")
    return EmbeddingTable(np.array(rows, dtype=np.float64).reshape(len(rows), dim), trainable=trainable)


def save_embedding_table(table: EmbeddingTable, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"dim": table.dim, "rows": table.rows.tolist()}, fh)


def resolve_object_embedding(obj: ObjectInstance, words: EmbeddingTable | None,
                             use_visual: bool = True, use_word: bool = True) -> np.ndarray:
    """Object embedding ``[visual; word]``; a disabled part contributes nothing."""
    parts = []
    if use_visual:
        if obj.visual_feature is None:
            raise ValueError("object has no visual feature but the visual part is enabled")
        parts.append(np.asarray(obj.visual_feature, dtype=np.float64))
    if use_word:
        if words is None:
            raise ValueError("word part enabled without an embedding table")
        parts.append(words.lookup(obj.category))
    if not parts:
        raise ValueError("at least one of the visual or word parts must be enabled")
    return np.concatenate(parts)


# -- zero-shot split -----------------------------------------------------------


def triplet_types(scenes) -> set[tuple[int, int, int]]:
    return {s.triplet_type(r) for s in scenes for r in s.relations}


def zero_shot_split(train, test):
    """Partition test relations by whether their triplet type occurs in ``train``.

    Returns ``(seen, unseen)`` as sets of ``(scene_index, relation_index)``
    into ``test``.
    """
    known = triplet_types(train)
    seen, unseen = set(), set()
    for si, scene in enumerate(test):
        for ri, rel in enumerate(scene.relations):
            (seen if scene.triplet_type(rel) in known else unseen).add((si, ri))
    return seen, unseen


# -- synthetic scenes ------------------------------------------------------------


@dataclass
class SyntheticConfig:
    num_scenes: int = 200
    objects_per_scene: int = 6
    num_categories: int = 6
    num_predicates: int = 8
    seed: int = 0
    visual_dim: int = 16
    noise: float = 0.1
    image_size: float = 1000.0
    min_size: float = 50.0
    max_size: float = 150.0
    context_layouts: bool = True

    def validate(self):
        errs = []
        if self.num_scenes < 1:
            errs.append("num_scenes must be >= 1")
        if self.objects_per_scene < 2:
            errs.append("objects_per_scene must be >= 2")
        if self.num_predicates < 4:
            errs.append("num_predicates must be >= 4")
        if self.num_categories < 1:
            errs.append("num_categories must be >= 1")
        if self.context_layouts and self.num_categories < 2:
            errs.append("context_layouts needs num_categories >= 2 (category 0 is the layout marker)")
        if self.visual_dim < self.num_categories:
            errs.append("visual_dim must be >= num_categories (visual features are noisy one-hots)")
        if self.noise < 0:
            errs.append("noise must be non-negative")
        if not 0 < self.min_size <= self.max_size < self.image_size:
            errs.append("need 0 < min_size <= max_size < image_size")
        if errs:
            raise ValueError("; ".join(errs))


def predicate_names(num_predicates: int) -> list[str]:
    return list(GEOMETRIC_PREDICATES) + [f"semantic_{k}" for k in range(4, num_predicates)]


def semantic_table(config: SyntheticConfig) -> dict[tuple[int, int], int]:
    """Category-pair lookup for the non-geometric predicates.

    Each unordered pair of distinct categories gets exactly one orientation,
    so the reverse ordering never carries a semantic relation.
    """
    if config.num_predicates <= 4:
        return {}
    rng = np.random.default_rng([config.seed, 0x5E])
    table = {}
    for a in range(config.num_categories):
        for b in range(a + 1, config.num_categories):
            flip = bool(rng.integers(2))
            pred = int(rng.integers(4, config.num_predicates))
            table[(b, a) if flip else (a, b)] = pred
    return table


def rule_predicate(bi: BoundingBox, bj: BoundingBox, ci: int, cj: int, image_w: float, image_h: float,
                   table: dict) -> int | None:
    """Ground-truth predicate of the ordered pair, or None when unannotated."""
    overlap = iou(bi, bj)
    if abs(overlap - OVERLAP_IOU) < IOU_MARGIN:
        return None
    if overlap > OVERLAP_IOU:
        return OVERLAPS
    gap = (bj.cy - bi.cy) / math.hypot(image_w, image_h)
    if GAP_BAND[0] < abs(gap) < GAP_BAND[1]:
        return None
    if gap > VERTICAL_GAP:
        return ABOVE
    if gap < -VERTICAL_GAP:
        return BELOW
    dis = norm_distance(bi, bj, image_w, image_h)
    if abs(dis - NEAR_DISTANCE) < DISTANCE_MARGIN:
        return None
    if dis < NEAR_DISTANCE:
        return NEAR
    return table.get((ci, cj))


PLACEMENT_MODES = ("free", "overlap", "beside", "stack")
# Placement-mode probabilities per scene layout. "column" scenes mostly stack
# objects vertically and always contain the marker category 0; "row" scenes
# mostly line objects up side by side and never contain it. The layout is only
# visible through the marker, so a pair classifier has to look beyond the pair.
LAYOUT_MODE_PROBS = {
    "mixed": (0.3, 0.2, 0.3, 0.2),
    "column": (0.1, 0.15, 0.05, 0.7),
    "row": (0.1, 0.15, 0.7, 0.05),
}


def _place(rng, anchor: BoundingBox | None, cfg: SyntheticConfig, layout: str = "mixed") -> BoundingBox:
    size = cfg.image_size
    w, h = rng.uniform(cfg.min_size, cfg.max_size, size=2)
    mode = "free" if anchor is None else rng.choice(PLACEMENT_MODES, p=LAYOUT_MODE_PROBS[layout])
    if mode == "free":
        cx, cy = rng.uniform(w / 2, size - w / 2), rng.uniform(h / 2, size - h / 2)
    elif mode == "overlap":
        w = anchor.w * rng.uniform(0.85, 1.15)
        h = anchor.h * rng.uniform(0.85, 1.15)
        cx = anchor.cx + rng.uniform(-0.15, 0.15) * anchor.w
        cy = anchor.cy + rng.uniform(-0.15, 0.15) * anchor.h
    elif mode == "beside":
        side = rng.choice([-1.0, 1.0])
        cx = anchor.cx + side * rng.uniform((anchor.w + w) / 2 + 5, 520)
        cy = anchor.cy + rng.uniform(-20, 20)
    else:
        side = rng.choice([-1.0, 1.0])
        cx = anchor.cx + rng.uniform(-80, 80)
        cy = anchor.cy + side * rng.uniform(160, 380)
    w, h = min(w, size - 1), min(h, size - 1)
    x = float(np.clip(cx - w / 2, 0.0, size - w))
    y = float(np.clip(cy - h / 2, 0.0, size - h))
    return BoundingBox(x, y, float(w), float(h))


def generate_synthetic(config: SyntheticConfig) -> list[Scene]:
    """Seeded scenes whose relations follow fixed geometric and category rules."""
    config.validate()
    rng = np.random.default_rng(config.seed)
    table = semantic_table(config)
    size = config.image_size
    scenes = []
    for s in range(config.num_scenes):
        layout = ("column", "row")[int(rng.integers(2))] if config.context_layouts else "mixed"
        boxes: list[BoundingBox] = []
        for k in range(config.objects_per_scene):
            anchor = boxes[int(rng.integers(len(boxes)))] if boxes else None
            boxes.append(_place(rng, anchor, config, layout))
        if layout == "mixed":
            cats = rng.integers(config.num_categories, size=config.objects_per_scene)
        else:
            cats = rng.integers(1, config.num_categories, size=config.objects_per_scene)
            if layout == "column":
                cats[int(rng.integers(config.objects_per_scene))] = 0
        objects = []
        for box, c in zip(boxes, cats):
            feat = rng.normal(0.0, config.noise, size=config.visual_dim)
            feat[c] += 1.0
            objects.append(ObjectInstance(box, int(c), tuple(float(v) for v in feat)))
        relations = []
        for i in range(len(objects)):
            for j in range(len(objects)):
                if i == j:
                    continue
                p = rule_predicate(boxes[i], boxes[j], int(cats[i]), int(cats[j]), size, size, table)
                if p is not None:
                    relations.append(RelationAnnotation(i, j, p))
        scenes.append(Scene(f"syn-{config.seed}-{s:05d}", size, size, tuple(objects), tuple(relations)))
    return scenes


def synthetic_meta(config: SyntheticConfig) -> DatasetMeta:
    return DatasetMeta(config.num_categories, config.num_predicates, predicate_names(config.num_predicates))
