"""Boundary and segment scoring.

Boundary detections are scored by relative distance: |detected - truth|
divided by the video length, correct when at or below a threshold. Matching
is maximum-cardinality one-to-one, with the smallest total distance among
maximum matchings and crossing-free pair order on exact ties. Segment
metrics (MoF, IoU) derive segments from boundaries, match them per video by
maximum frame overlap through the Hungarian algorithm, and score matched
intersections against the ground-truth segment sizes. Corpus precision,
recall, and F1 are micro-averaged over boundary counts; per-video numbers
are kept alongside for inspection.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .data import Annotation
from .detection import BoundarySet
from .errors import DataError

DEFAULT_THRESHOLDS = tuple(round(0.05 * k, 2) for k in range(1, 11))

_INVALID_COST = 1e9


def rel_dis(det_frame: int, gt_frame: int, num_frames: int) -> float:
    """|detected - truth| / video length."""
    if num_frames <= 0:
        raise DataError(f"num_frames must be positive, got {num_frames}")
    return abs(int(det_frame) - int(gt_frame)) / num_frames


@dataclass
class MatchResult:
    """One-to-one pairing between detections and ground truth."""

    pairs: list[tuple[int, int]]
    unmatched_det: list[int]
    unmatched_gt: list[int]


def match_boundaries(det: BoundarySet, gt: BoundarySet, threshold: float) -> MatchResult:
    """Maximum-cardinality one-to-one matching among pairs within threshold.

    Among maximum matchings the one with the smallest total distance wins;
    remaining ties are resolved toward temporal (non-crossing) order.
    """
    if det.video_id != gt.video_id or det.num_frames != gt.num_frames:
        raise DataError(
            f"matching needs the same video: {det.video_id!r}/{det.num_frames} vs "
            f"{gt.video_id!r}/{gt.num_frames}"
        )
    n_det, n_gt = len(det.frames), len(gt.frames)
    if n_det == 0 or n_gt == 0:
        return MatchResult([], list(range(n_det)), list(range(n_gt)))
    dist = np.abs(
        np.subtract.outer(np.asarray(det.frames, dtype=np.float64), np.asarray(gt.frames))
    ) / gt.num_frames
    valid = dist <= threshold
    cost = np.where(valid, dist, _INVALID_COST)
    rows, cols = linear_sum_assignment(cost)
    pairs = [(int(i), int(j)) for i, j in zip(rows, cols) if valid[i, j]]
    pairs = _uncross(pairs, valid, dist)
    matched_det = {i for i, _ in pairs}
    matched_gt = {j for _, j in pairs}
    return MatchResult(
        sorted(pairs),
        [i for i in range(n_det) if i not in matched_det],
        [j for j in range(n_gt) if j not in matched_gt],
    )


def _uncross(pairs, valid, dist):
    """Swap crossing pairs when the swap is valid and distance-neutral."""
    pairs = sorted(pairs)
    changed = True
    while changed:
        changed = False
        for a in range(len(pairs)):
            for b in range(a + 1, len(pairs)):
                i1, j1 = pairs[a]
                i2, j2 = pairs[b]
                if i1 < i2 and j1 > j2 and valid[i1, j2] and valid[i2, j1]:
                    if np.isclose(
                        dist[i1, j1] + dist[i2, j2], dist[i1, j2] + dist[i2, j1]
                    ):
                        pairs[a], pairs[b] = (i1, j2), (i2, j1)
                        pairs.sort()
                        changed = True
    return pairs


def f1_score(precision: float, recall: float) -> float:
    if precision + recall == 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def precision_recall_f1(matches, n_det: int, n_gt: int) -> tuple[float, float, float]:
    """(P, R, F1) from a MatchResult or a true-positive count.

    Empty predictions score precision 0 (and recall 0 with empty truth).
    """
    tp = len(matches.pairs) if isinstance(matches, MatchResult) else int(matches)
    if tp > n_det or tp > n_gt:
        raise DataError(f"true positives {tp} exceed counts det={n_det}, gt={n_gt}")
    precision = tp / n_det if n_det > 0 else 0.0
    recall = tp / n_gt if n_gt > 0 else 0.0
    return precision, recall, f1_score(precision, recall)


@dataclass
class SegmentSet:
    """Ordered half-open frame intervals covering [0, num_frames) exactly."""

    video_id: str
    num_frames: int
    segments: list[tuple[int, int]]

    def __post_init__(self):
        cursor = 0
        for i, (start, end) in enumerate(self.segments):
            if start != cursor or end <= start:
                raise DataError(
                    f"{self.video_id!r}: segment {i} = [{start}, {end}) breaks coverage"
                )
            cursor = end
        if cursor != self.num_frames:
            raise DataError(
                f"{self.video_id!r}: segments cover [0, {cursor}), video has "
                f"{self.num_frames} frames"
            )


def boundaries_to_segments(boundaries: BoundarySet) -> SegmentSet:
    """Boundaries b1..bn over F frames -> [0,b1), [b1,b2), ..., [bn,F)."""
    edges = [0] + list(boundaries.frames) + [boundaries.num_frames]
    segments = [(edges[i], edges[i + 1]) for i in range(len(edges) - 1)]
    return SegmentSet(boundaries.video_id, boundaries.num_frames, segments)


def _overlap(a: tuple[int, int], b: tuple[int, int]) -> int:
    return max(0, min(a[1], b[1]) - max(a[0], b[0]))


def hungarian_match(pred: SegmentSet, gt: SegmentSet) -> MatchResult:
    """One-to-one segment assignment maximizing total frame overlap."""
    if pred.num_frames != gt.num_frames:
        raise DataError("segment matching needs equal video lengths")
    overlaps = np.array(
        [[_overlap(y, z) for z in gt.segments] for y in pred.segments], dtype=np.float64
    )
    rows, cols = linear_sum_assignment(-overlaps)
    pairs = sorted((int(i), int(j)) for i, j in zip(rows, cols))
    matched_pred = {i for i, _ in pairs}
    matched_gt = {j for _, j in pairs}
    return MatchResult(
        pairs,
        [i for i in range(len(pred.segments)) if i not in matched_pred],
        [j for j in range(len(gt.segments)) if j not in matched_gt],
    )


def mof_iou(pred: SegmentSet, gt: SegmentSet, matching: MatchResult) -> tuple[float, float]:
    """Mean-over-frames and mean intersection-over-union across ground truth.

    Unmatched ground-truth segments contribute zero intersection (and their
    own size to the union), so they pull both metrics down.
    """
    n_gt = len(gt.segments)
    inter_by_gt = {j: _overlap(pred.segments[i], gt.segments[j]) for i, j in matching.pairs}
    total_inter = sum(inter_by_gt.values())
    total_gt = sum(end - start for start, end in gt.segments)
    mof = total_inter / total_gt
    iou_sum = 0.0
    for j, (start, end) in enumerate(gt.segments):
        if j in inter_by_gt:
            i = next(i for i, jj in matching.pairs if jj == j)
            pred_size = pred.segments[i][1] - pred.segments[i][0]
            union = pred_size + (end - start) - inter_by_gt[j]
            iou_sum += inter_by_gt[j] / union
    return mof, iou_sum / n_gt


def segment_scores(det: BoundarySet, gt: BoundarySet) -> tuple[float, float]:
    """MoF and IoU of the segmentations induced by two boundary sets."""
    pred_segs = boundaries_to_segments(det)
    gt_segs = boundaries_to_segments(gt)
    return mof_iou(pred_segs, gt_segs, hungarian_match(pred_segs, gt_segs))


@dataclass
class MetricReport:
    thresholds: list[float]
    precision: list[float]
    recall: list[float]
    f1: list[float]
    avg_precision: float
    avg_recall: float
    avg_f1: float
    mof: float
    iou: float
    per_video: dict[str, dict]

    def to_dict(self) -> dict:
        return {
            "thresholds": self.thresholds,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "avg_precision": self.avg_precision,
            "avg_recall": self.avg_recall,
            "avg_f1": self.avg_f1,
            "mof": self.mof,
            "iou": self.iou,
            "per_video": self.per_video,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def to_text_table(self) -> str:
        """Aligned table: one column per threshold plus their average."""
        headers = [f"{t:g}" for t in self.thresholds] + ["avg"]
        rows = [
            ("precision", self.precision + [self.avg_precision]),
            ("recall", self.recall + [self.avg_recall]),
            ("f1", self.f1 + [self.avg_f1]),
        ]
        width = max(len(h) for h in headers) + 4
        label_w = max(len(name) for name, _ in rows) + 2
        lines = ["".ljust(label_w) + "".join(h.rjust(width) for h in headers)]
        for name, values in rows:
            cells = "".join(f"{v:.3f}".rjust(width) for v in values)
            lines.append(name.ljust(label_w) + cells)
        lines.append("")
        lines.append(f"MoF  {self.mof:.3f}")
        lines.append(f"IoU  {self.iou:.3f}")
        return "\n".join(lines) + "\n"


def _as_boundary_set(entry, what: str) -> BoundarySet:
    if isinstance(entry, BoundarySet):
        return entry
    if isinstance(entry, Annotation):
        return BoundarySet(entry.video_id, entry.num_frames, entry.boundaries, entry.scores)
    raise DataError(f"{what} must be BoundarySet or Annotation, got {type(entry).__name__}")


def evaluate_corpus(
    detections: Mapping[str, BoundarySet],
    annotations: Mapping[str, Annotation] | Sequence[Annotation],
    thresholds: Sequence[float] = DEFAULT_THRESHOLDS,
) -> MetricReport:
    """Score a corpus of detections against its annotations.

    Detection and annotation ids must align exactly; the error lists every
    id missing from either side. Precision/recall/F1 are micro-averaged over
    boundary counts per threshold; MoF and IoU are means over videos.
    """
    if not isinstance(annotations, Mapping):
        annotations = {a.video_id: a for a in annotations}
    det_ids = set(detections)
    ann_ids = set(annotations)
    if det_ids != ann_ids:
        missing_ann = sorted(det_ids - ann_ids)
        missing_det = sorted(ann_ids - det_ids)
        raise DataError(
            "detections and annotations do not align: "
            f"missing annotations for {missing_ann}, missing detections for {missing_det}"
        )
    thresholds = [float(t) for t in thresholds]
    ids = sorted(det_ids)
    per_video: dict[str, dict] = {}
    tp = np.zeros(len(thresholds))
    n_det_total = 0
    n_gt_total = 0
    mofs, ious = [], []
    for vid in ids:
        det = _as_boundary_set(detections[vid], "detection")
        gt = _as_boundary_set(annotations[vid], "annotation")
        n_det_total += len(det.frames)
        n_gt_total += len(gt.frames)
        video_f1 = []
        video_p = []
        video_r = []
        for k, theta in enumerate(thresholds):
            result = match_boundaries(det, gt, theta)
            tp[k] += len(result.pairs)
            p, r, f = precision_recall_f1(result, len(det.frames), len(gt.frames))
            video_p.append(p)
            video_r.append(r)
            video_f1.append(f)
        mof, iou = segment_scores(det, gt)
        mofs.append(mof)
        ious.append(iou)
        per_video[vid] = {
            "precision": video_p,
            "recall": video_r,
            "f1": video_f1,
            "mof": mof,
            "iou": iou,
        }
    precision, recall, f1 = [], [], []
    for k in range(len(thresholds)):
        p, r, f = precision_recall_f1(int(tp[k]), n_det_total, n_gt_total)
        precision.append(p)
        recall.append(r)
        f1.append(f)
    return MetricReport(
        thresholds=thresholds,
        precision=precision,
        recall=recall,
        f1=f1,
        avg_precision=float(np.mean(precision)),
        avg_recall=float(np.mean(recall)),
        avg_f1=float(np.mean(f1)),
        mof=float(np.mean(mofs)),
        iou=float(np.mean(ious)),
        per_video=per_video,
    )
