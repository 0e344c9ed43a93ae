"""Scoring: confusion counts, the four standard metrics, and the four-way
prediction-change partition between a zero-shot and a one-shot run.

Positive class is YES_C4. ERROR-status frames are excluded from metric
denominators and reported separately. Any 0/0 metric is reported as 0.0
with an explicit warning flag rather than NaN.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

from .client import PredictionRecord
from .phantom import NO_C4, YES_C4, AnnotationSet


class EvaluationError(Exception):
    pass


class DuplicateFrame(EvaluationError):
    pass


class UnknownLabel(EvaluationError):
    pass


class MalformedRow(EvaluationError):
    pass


class MissingTruth(EvaluationError):
    pass


class EmptyEvaluation(EvaluationError):
    pass


class FrameSetMismatch(EvaluationError):
    pass


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    tn: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


@dataclass(frozen=True)
class MetricSet:
    accuracy: float
    precision: float
    recall: float
    f1: float
    warnings: tuple = ()


@dataclass(frozen=True)
class ChangeCounts:
    improvement: int
    decline: int
    no_improvement: int
    no_decline: int

    @property
    def total(self) -> int:
        return self.improvement + self.decline + self.no_improvement + self.no_decline


@dataclass(frozen=True)
class Transition:
    frame: int
    zero_label: str
    one_label: str
    truth: str
    category: str


@dataclass(frozen=True)
class EvaluationReport:
    runs: dict = field(default_factory=dict)  # run name -> MetricSet
    confusions: dict = field(default_factory=dict)  # run name -> ConfusionCounts
    error_frames: dict = field(default_factory=dict)  # run name -> count
    changes: ChangeCounts | None = None
    transitions: tuple = ()


def load_annotations(path) -> AnnotationSet:
    """CSV with header ``frame,label``; one row per frame, no duplicates."""
    labels: dict[int, str] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["frame", "label"]:
            raise MalformedRow(f"expected header 'frame,label', got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise MalformedRow(f"line {lineno}: expected 2 fields, got {len(row)}")
            try:
                frame = int(row[0])
            except ValueError as exc:
                raise MalformedRow(f"line {lineno}: bad frame index {row[0]!r}") from exc
            label = row[1].strip()
            if label not in (YES_C4, NO_C4):
                raise UnknownLabel(f"line {lineno}: unknown label {label!r}")
            if frame in labels:
                raise DuplicateFrame(f"frame {frame} listed twice")
            labels[frame] = label
    return AnnotationSet(labels=labels, provenance=str(path))


def confusion(preds: list[PredictionRecord], truth: AnnotationSet) -> tuple[ConfusionCounts, int]:
    """2x2 tally over OK predictions; returns (counts, error_frame_count)."""
    tp = tn = fp = fn = errors = 0
    for rec in preds:
        if rec.status != "OK" or rec.label is None:
            errors += 1
            continue
        if rec.frame not in truth.labels:
            raise MissingTruth(f"no annotation for frame {rec.frame}")
        actual_yes = truth.labels[rec.frame] == YES_C4
        predicted_yes = rec.label == YES_C4
        if predicted_yes and actual_yes:
            tp += 1
        elif predicted_yes and not actual_yes:
            fp += 1
        elif not predicted_yes and actual_yes:
            fn += 1
        else:
            tn += 1
    return ConfusionCounts(tp=tp, tn=tn, fp=fp, fn=fn), errors


def f1_score(precision: float, recall: float) -> float:
    if precision + recall == 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def metrics(c: ConfusionCounts) -> MetricSet:
    if c.total == 0:
        raise EmptyEvaluation("no scored frames")
    warnings = []
    accuracy = (c.tp + c.tn) / c.total
    if c.tp + c.fp == 0:
        precision = 0.0
        warnings.append("precision undefined (no positive predictions); reported as 0.0")
    else:
        precision = c.tp / (c.tp + c.fp)
    if c.tp + c.fn == 0:
        recall = 0.0
        warnings.append("recall undefined (no positive frames in truth); reported as 0.0")
    else:
        recall = c.tp / (c.tp + c.fn)
    if precision + recall == 0:
        warnings.append("f1 undefined (precision + recall = 0); reported as 0.0")
    return MetricSet(
        accuracy=accuracy,
        precision=precision,
        recall=recall,
        f1=f1_score(precision, recall),
        warnings=tuple(warnings),
    )


CATEGORIES = ("IMPROVEMENT", "DECLINE", "NO_IMPROVEMENT", "NO_DECLINE")


def _categorize(zero_correct: bool, one_correct: bool) -> str:
    if not zero_correct and one_correct:
        return "IMPROVEMENT"
    if zero_correct and not one_correct:
        return "DECLINE"
    if not zero_correct:
        return "NO_IMPROVEMENT"
    return "NO_DECLINE"


def prediction_changes(
    zero: list[PredictionRecord], one: list[PredictionRecord], truth: AnnotationSet
) -> tuple[ChangeCounts, list[Transition]]:
    """Assign each frame scored in both runs to exactly one of the four
    correctness-transition categories."""
    zmap = {r.frame: r for r in zero}
    omap = {r.frame: r for r in one}
    if set(zmap) != set(omap):
        raise FrameSetMismatch(
            f"runs cover different frames ({len(zmap)} vs {len(omap)} entries)"
        )
    counts = dict.fromkeys(CATEGORIES, 0)
    transitions = []
    for frame in sorted(zmap):
        zrec, orec = zmap[frame], omap[frame]
        if zrec.status != "OK" or orec.status != "OK":
            continue
        if frame not in truth.labels:
            raise MissingTruth(f"no annotation for frame {frame}")
        actual = truth.labels[frame]
        category = _categorize(zrec.label == actual, orec.label == actual)
        counts[category] += 1
        transitions.append(
            Transition(
                frame=frame,
                zero_label=zrec.label,
                one_label=orec.label,
                truth=actual,
                category=category,
            )
        )
    return (
        ChangeCounts(
            improvement=counts["IMPROVEMENT"],
            decline=counts["DECLINE"],
            no_improvement=counts["NO_IMPROVEMENT"],
            no_decline=counts["NO_DECLINE"],
        ),
        transitions,
    )


def evaluate_runs(
    runs: dict[str, list[PredictionRecord]],
    truth: AnnotationSet,
    compare: tuple[str, str] | None = None,
) -> EvaluationReport:
    run_metrics = {}
    confusions = {}
    error_frames = {}
    for name, preds in runs.items():
        c, errors = confusion(preds, truth)
        confusions[name] = c
        error_frames[name] = errors
        run_metrics[name] = metrics(c)
    changes = None
    transitions: tuple = ()
    if compare is not None:
        zero_name, one_name = compare
        changes, trans = prediction_changes(runs[zero_name], runs[one_name], truth)
        transitions = tuple(trans)
    return EvaluationReport(
        runs=run_metrics,
        confusions=confusions,
        error_frames=error_frames,
        changes=changes,
        transitions=transitions,
    )


def render_report(report: EvaluationReport, fmt: str = "json") -> str:
    if fmt == "json":
        return _render_json(report)
    if fmt == "markdown":
        return _render_markdown(report)
    raise ValueError(f"unknown report format {fmt!r}")


def _render_json(report: EvaluationReport) -> str:
    doc = {
        "runs": {
            name: {
                "accuracy": m.accuracy,
                "precision": m.precision,
                "recall": m.recall,
                "f1": m.f1,
                "warnings": list(m.warnings),
                "confusion": {
                    "tp": report.confusions[name].tp,
                    "tn": report.confusions[name].tn,
                    "fp": report.confusions[name].fp,
                    "fn": report.confusions[name].fn,
                },
                "error_frames": report.error_frames[name],
            }
            for name, m in report.runs.items()
        },
    }
    if report.changes is not None:
        doc["prediction_changes"] = {
            "improvement": report.changes.improvement,
            "decline": report.changes.decline,
            "no_improvement": report.changes.no_improvement,
            "no_decline": report.changes.no_decline,
        }
        doc["transitions"] = [
            {
                "frame": t.frame,
                "zero": t.zero_label,
                "one": t.one_label,
                "truth": t.truth,
                "category": t.category,
            }
            for t in report.transitions
        ]
    return json.dumps(doc, indent=2, sort_keys=True)


def _render_markdown(report: EvaluationReport) -> str:
    lines = [
        "| Run | Accuracy | Precision | Recall | F1-Score |",
        "| --- | --- | --- | --- | --- |",
    ]
    for name, m in report.runs.items():
        lines.append(
            f"| {name} | {m.accuracy:.4f} | {m.precision:.4f} | {m.recall:.4f} | {m.f1:.4f} |"
        )
    for name, m in report.runs.items():
        for w in m.warnings:
            lines.append(f"> {name}: {w}")
    if report.changes is not None:
        ch = report.changes
        lines += [
            "",
            "| Improvement | Decline | No Improvement | No Decline |",
            "| --- | --- | --- | --- |",
            f"| {ch.improvement} | {ch.decline} | {ch.no_improvement} | {ch.no_decline} |",
        ]
    return "\n".join(lines) + "\n"
