"""Glue between a trained model, scenes, and the recall reports."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

from .evaluation import RecallReport, candidates, recall_at_n, zero_shot_report
from .graph import DEFAULT_T1, DEFAULT_T2, build_graph
from .model import forward
from .scenedata import zero_shot_split
from .training import TrainedModel


def score_scenes(model: TrainedModel, scenes, mode: str = "predicate", t1=DEFAULT_T1, t2=DEFAULT_T2, threads: int = 1):
    """``[(graph, scores)]`` per scene; scores are (E, K) predicate distributions."""

    def one(scene):
        graph = build_graph(scene, mode, t1, t2)
        return graph, forward(scene, graph, model.params, model.config)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(one, scenes))
    return [one(s) for s in scenes]


def evaluate(model: TrainedModel, scenes, mode: str = "predicate", ns=(50, 100), ks=(1,),
             zero_shot_train=None, t1=DEFAULT_T1, t2=DEFAULT_T2, use_detection_scores: bool = False,
             threads: int = 1) -> list[RecallReport]:
    """One report per (k, n). With ``zero_shot_train`` each report carries a zero-shot sub-report."""
    scored = score_scenes(model, scenes, mode, t1, t2, threads)
    unseen = None
    if zero_shot_train is not None and mode == "predicate":
        _, unseen = zero_shot_split(zero_shot_train, scenes)
    reports = []
    for k in ks:
        cands = [candidates(s, g, sc, k, use_detection_scores) for s, (g, sc) in zip(scenes, scored)]
        for n in ns:
            report = recall_at_n(scenes, cands, n, mode, k)
            if unseen is not None:
                report.zero_shot = zero_shot_report(scenes, cands, unseen, n, mode, k)
            reports.append(report)
    return reports
