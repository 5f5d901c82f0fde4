"""Neural message passing over directed interaction graphs for predicate classification."""
from .evaluation import PredictedTriplet, RecallReport, candidates, recall_at_n, render_table, zero_shot_report
from .geometry import BoundingBox, box_delta, iou, norm_distance, spatial_location, union_box
from .graph import InteractionGraph, build_graph, build_predicate_graph, build_relationship_graph
from .kernels import BACKEND
from .model import NmpConfig, forward, init_params
from .pipeline import evaluate, score_scenes
from .scenedata import (ObjectInstance, RelationAnnotation, Scene, SyntheticConfig, generate_synthetic, load_scenes,
                        save_scenes, zero_shot_split)
from .training import Ablation, TrainConfig, TrainedModel, load_checkpoint, save_checkpoint, train

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "Ablation", "BoundingBox", "InteractionGraph", "NmpConfig", "ObjectInstance", "PredictedTriplet",
    "RecallReport", "RelationAnnotation", "Scene", "SyntheticConfig", "TrainConfig", "TrainedModel",
    "box_delta", "build_graph", "build_predicate_graph", "build_relationship_graph", "candidates", "evaluate",
    "forward", "generate_synthetic", "init_params", "iou", "load_checkpoint", "load_scenes", "norm_distance",
    "recall_at_n", "render_table", "save_checkpoint", "save_scenes", "score_scenes", "spatial_location", "train",
    "union_box", "zero_shot_report", "zero_shot_split",
]
