"""Scoring of transcripts and offline predictions.

Four measures: planning accuracy (did each decision pick the right primitive
and object), destination recall at metric distance thresholds, execution
success rate over trials, and the cumulative per-step success curve.

The plan-match rule is the mechanized analog of a human judge marking
"primitives and objects": the skill kind must match; the object noun must
match (case-insensitively) when the reference names one; the attribute is
compared only when the reference specifies one. Destinations are scored
separately by recall, never by the plan judgment.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import CameraModel, Destination, unproject
from .grammar import PrimitiveSkill, parse_skill

DEFAULT_RECALL_THRESHOLDS = (0.05, 0.10)


@dataclass(frozen=True)
class PlanJudgment:
    predicted: PrimitiveSkill
    reference: PrimitiveSkill
    correct: bool


@dataclass(frozen=True)
class RecallReport:
    thresholds: tuple[float, ...]
    recalls: tuple[float, ...]
    n_samples: int

    def __post_init__(self):
        pairs = sorted(zip(self.thresholds, self.recalls))
        for (_, lo), (_, hi) in zip(pairs, pairs[1:]):
            if lo > hi + 1e-12:
                raise ValueError("recall must be non-decreasing in the threshold")

    def recall_at(self, threshold: float) -> float:
        return self.recalls[self.thresholds.index(threshold)]

    def format_pair(self) -> str:
        """Render as "r5/r10", e.g. "0.48/0.78", for the default thresholds."""
        return "/".join(f"{r:.2f}" for _, r in sorted(zip(self.thresholds, self.recalls)))


def _as_skill(value) -> PrimitiveSkill:
    return value if isinstance(value, PrimitiveSkill) else parse_skill(value)


def judge_plan(predicted, reference) -> PlanJudgment:
    pred = _as_skill(predicted)
    ref = _as_skill(reference)
    correct = pred.kind is ref.kind
    if correct and ref.object is not None:
        correct = pred.object is not None and pred.object.lower() == ref.object.lower()
    if correct and ref.attribute is not None:
        correct = pred.attribute is not None and pred.attribute.lower() == ref.attribute.lower()
    return PlanJudgment(predicted=pred, reference=ref, correct=correct)


def planning_accuracy(predicted_seqs, reference_seqs) -> float:
    """Fraction of correct per-step judgments over aligned decision sequences.

    Sequences align by step index; steps beyond the shorter sequence count as
    incorrect judgments.
    """
    if len(predicted_seqs) != len(reference_seqs):
        raise ValueError("predicted and reference corpora differ in length")
    matches = 0
    total = 0
    for pred_seq, ref_seq in zip(predicted_seqs, reference_seqs):
        total += max(len(pred_seq), len(ref_seq))
        for pred, ref in zip(pred_seq, ref_seq):
            if judge_plan(pred, ref).correct:
                matches += 1
    return matches / total if total else 1.0


def destination_recall(
    predictions: list[Destination],
    references: list[Destination],
    camera: CameraModel,
    thresholds: tuple[float, ...] = DEFAULT_RECALL_THRESHOLDS,
) -> RecallReport:
    """Fraction of predictions within each 3D distance threshold of the reference.

    Distances are measured in metres between the unprojected world points, so
    thresholds carry their stated physical meaning regardless of where the
    pair sits in the image.
    """
    if len(predictions) != len(references):
        raise ValueError("predictions and references differ in length")
    distances = [
        float(np.linalg.norm(unproject(camera, p) - unproject(camera, r)))
        for p, r in zip(predictions, references)
    ]
    recalls = tuple(
        (sum(1 for d in distances if d <= t) / len(distances)) if distances else 0.0
        for t in thresholds
    )
    return RecallReport(thresholds=tuple(thresholds), recalls=recalls, n_samples=len(distances))


def execution_success_rate(successes) -> float:
    flags = [bool(s) for s in successes]
    if not flags:
        raise ValueError("success rate over zero trials is undefined")
    return sum(flags) / len(flags)


def cumulative_success(step_flag_rows) -> list[float]:
    """curve[k-1] = fraction of trials whose first k steps all succeeded.

    Rows shorter than k contribute the conjunction of the flags they have, so
    a trial that finished early keeps counting as long as it never failed.
    The curve is monotone non-increasing.
    """
    rows = [list(map(bool, row)) for row in step_flag_rows]
    if not rows:
        return []
    curve = []
    prefix_ok = [True] * len(rows)
    for k in range(max(len(row) for row in rows)):
        for i, row in enumerate(rows):
            if k < len(row) and not row[k]:
                prefix_ok[i] = False
        curve.append(sum(prefix_ok) / len(rows))
    return curve
