"""Evaluation report rendering: delimited tables plus matplotlib figures.

The `eval` subcommand aggregates a directory of transcripts into per-task
metrics, writes them as CSV and JSON, and renders the cumulative-success
curves and recall bars as PNG files next to the tables.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .engine import Transcript
from .metrics import (
    RecallReport,
    cumulative_success,
    destination_recall,
    execution_success_rate,
    planning_accuracy,
)


@dataclass
class TaskMetrics:
    task: str
    trials: int
    success_rate: float
    curve: list[float]
    plan_accuracy: float | None = None
    recall: RecallReport | None = None


@dataclass
class EvalReport:
    tasks: list[TaskMetrics] = field(default_factory=list)

    def table_rows(self) -> list[dict]:
        rows = []
        for tm in self.tasks:
            rows.append(
                {
                    "task": tm.task,
                    "trials": tm.trials,
                    "success_rate": f"{tm.success_rate:.3f}",
                    "plan_accuracy": "" if tm.plan_accuracy is None else f"{tm.plan_accuracy:.3f}",
                    "dest_recall": "" if tm.recall is None else tm.recall.format_pair(),
                }
            )
        return rows

    def render_text(self) -> str:
        header = f"{'task':<20} {'trials':>6} {'exec':>6} {'plan':>6} {'recall (5cm/10cm)':>18}"
        lines = [header, "-" * len(header)]
        for row in self.table_rows():
            lines.append(
                f"{row['task']:<20} {row['trials']:>6} {row['success_rate']:>6}"
                f" {row['plan_accuracy'] or '-':>6} {row['dest_recall'] or '-':>18}"
            )
        return "\n".join(lines)


def evaluate_transcripts(
    by_task: dict[str, list[Transcript]],
    references: dict[str, object] | None = None,
) -> EvalReport:
    """Aggregate transcripts into per-task metrics.

    `references` maps task name to a bundled Episode; when present, planning
    accuracy and destination recall are scored against its annotations.
    """
    from .grammar import format_skill

    report = EvalReport()
    for task in sorted(by_task):
        transcripts = by_task[task]
        flags_rows = [[e.post_step_success for e in t.entries] for t in transcripts]
        tm = TaskMetrics(
            task=task,
            trials=len(transcripts),
            success_rate=execution_success_rate([t.success for t in transcripts]),
            curve=cumulative_success(flags_rows),
        )
        episode = references.get(task) if references else None
        if episode is not None:
            ref_decisions = [format_skill(c.skill) for c in episode.clips] + ["done"]
            pred_seqs = [[e.response.decision for e in t.entries] for t in transcripts]
            tm.plan_accuracy = planning_accuracy(pred_seqs, [ref_decisions] * len(transcripts))
            ref_dests = {
                i: c.spatial.destination
                for i, c in enumerate(episode.clips)
                if c.spatial is not None
            }
            preds, refs = [], []
            for t in transcripts:
                for i, entry in enumerate(t.entries):
                    if i in ref_dests and entry.response.destination is not None:
                        preds.append(entry.response.destination)
                        refs.append(ref_dests[i])
            if preds:
                tm.recall = destination_recall(preds, refs, episode.camera)
        report.tasks.append(tm)
    return report


def write_report(report: EvalReport, out_dir) -> list[Path]:
    """Write report.csv, report.json, and the figures; returns written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    csv_path = out / "report.csv"
    with csv_path.open("w", newline="") as fh:
        writer = csv.DictWriter(
            fh, fieldnames=["task", "trials", "success_rate", "plan_accuracy", "dest_recall"]
        )
        writer.writeheader()
        writer.writerows(report.table_rows())
    written.append(csv_path)

    json_path = out / "report.json"
    json_path.write_text(
        json.dumps(
            {
                tm.task: {
                    "trials": tm.trials,
                    "success_rate": tm.success_rate,
                    "plan_accuracy": tm.plan_accuracy,
                    "recall": None
                    if tm.recall is None
                    else {
                        "thresholds": list(tm.recall.thresholds),
                        "recalls": list(tm.recall.recalls),
                        "n_samples": tm.recall.n_samples,
                        "formatted": tm.recall.format_pair(),
                    },
                    "cumulative_success": tm.curve,
                }
                for tm in report.tasks
            },
            indent=1,
        )
        + "\n"
    )
    written.append(json_path)

    written.append(_render_curves(report, out / "cumulative_success.png"))
    recall_fig = _render_recall(report, out / "destination_recall.png")
    if recall_fig is not None:
        written.append(recall_fig)
    return written


def _render_curves(report: EvalReport, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for tm in report.tasks:
        steps = range(1, len(tm.curve) + 1)
        ax.step(list(steps), tm.curve, where="post", label=tm.task)
    ax.set_xlabel("completed steps")
    ax.set_ylabel("fraction of trials still succeeding")
    ax.set_ylim(-0.02, 1.02)
    ax.set_title("Cumulative success by step")
    ax.grid(alpha=0.3)
    if report.tasks:
        ax.legend(fontsize=8, loc="lower left")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def _render_recall(report: EvalReport, path: Path) -> Path | None:
    tasks = [tm for tm in report.tasks if tm.recall is not None]
    if not tasks:
        return None
    fig, ax = plt.subplots(figsize=(7, 4.5))
    width = 0.38
    xs = range(len(tasks))
    for j, threshold in enumerate(tasks[0].recall.thresholds):
        offs = (j - (len(tasks[0].recall.thresholds) - 1) / 2) * width
        ax.bar(
            [x + offs for x in xs],
            [tm.recall.recall_at(threshold) for tm in tasks],
            width,
            label=f"<= {threshold * 100:.0f} cm",
        )
    ax.set_xticks(list(xs))
    ax.set_xticklabels([tm.task for tm in tasks], rotation=30, ha="right", fontsize=8)
    ax.set_ylabel("destination recall")
    ax.set_ylim(0, 1.05)
    ax.set_title("Destination recall at distance thresholds")
    ax.grid(axis="y", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
