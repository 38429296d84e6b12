"""Detection-to-ground-truth matching and mAP / F-measure reporting.

Matching follows the VOC protocol per (image, class) group: detections are
visited in descending score; a detection is a true positive when its
best-IoU unmatched ground truth reaches the IoU threshold, each ground truth
matches at most once, and detections whose best candidate is a difficult
ground truth are ignored (neither TP nor FP). Difficult ground truths are
excluded from recall counts.

All orderings use content-based keys (score, image id, canonical corner
tuple), so reports are invariant to permutations of the input lists and to
whether images are evaluated serially or in a process pool.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from .geometry import Geometry, Quad, RBox, iou_matrix, rbox_to_quad
from .postprocess import Detection, score_filter

__all__ = [
    "GroundTruth",
    "PrCurve",
    "EvalReport",
    "DEFAULT_IOU_LADDER",
    "match_detections",
    "average_precision",
    "evaluate",
    "f_measure",
]

DEFAULT_IOU_LADDER = tuple(round(0.50 + 0.05 * i, 2) for i in range(10))

ApMode = Literal["all_point", "eleven_point"]
_ELEVEN_POINTS = tuple(i / 10 for i in range(11))


@dataclass(frozen=True)
class GroundTruth:
    """Annotated object: image, quad geometry, class, difficult flag."""

    image_id: str
    geometry: Quad
    class_id: int
    difficult: bool = False

    def __post_init__(self):
        if not isinstance(self.geometry, Quad):
            raise TypeError(f"ground-truth geometry must be Quad, got {type(self.geometry).__name__}")
        if self.class_id < 0:
            raise ValueError(f"class_id must be >= 0, got {self.class_id}")


@dataclass(frozen=True)
class PrCurve:
    """Precision/recall points in descending-score order, with the score at each point."""

    recalls: np.ndarray
    precisions: np.ndarray
    scores: np.ndarray


def _geom_key(geom: Geometry) -> tuple:
    if isinstance(geom, RBox):
        return rbox_to_quad(geom).vertices
    return geom.vertices


def _det_sort_key(det: Detection, idx: int) -> tuple:
    return (-det.score, det.image_id, _geom_key(det.geometry), idx)


def _group_key(image_id: str, class_id: int) -> tuple[str, int]:
    return (image_id, class_id)


def _match_group(
    dets_g: list[tuple[int, Detection]],
    gts_g: list[tuple[int, GroundTruth]],
    thresholds: Sequence[float],
) -> dict[float, tuple[list[str], list[bool]]]:
    """Match one (image, class) group at every threshold; IoUs computed once."""
    ious = iou_matrix([d.geometry for _, d in dets_g], [g.geometry for _, g in gts_g])
    gt_keys = [(_geom_key(g.geometry)) for _, g in gts_g]
    out: dict[float, tuple[list[str], list[bool]]] = {}
    for thr in thresholds:
        matched = [False] * len(gts_g)
        flags: list[str] = []
        for di in range(len(dets_g)):
            best = -1
            best_key: tuple | None = None
            for gj in range(len(gts_g)):
                if matched[gj]:
                    continue
                # highest IoU wins; exact ties prefer non-difficult, then corner order
                key = (-ious[di, gj], gts_g[gj][1].difficult, gt_keys[gj])
                if best_key is None or key < best_key:
                    best, best_key = gj, key
            if best >= 0 and ious[di, best] >= thr:
                if gts_g[best][1].difficult:
                    flags.append("ignored")
                else:
                    flags.append("tp")
                    matched[best] = True
            else:
                flags.append("fp")
        out[thr] = (flags, matched)
    return out


def _group_worker(task):
    key, dets_g, gts_g, thresholds = task
    return key, _match_group(dets_g, gts_g, thresholds)


def _build_groups(dets: Sequence[Detection], gts: Sequence[GroundTruth]):
    groups: dict[tuple[str, int], tuple[list, list]] = {}
    for idx, gt in enumerate(gts):
        groups.setdefault(_group_key(gt.image_id, gt.class_id), ([], []))[1].append((idx, gt))
    for idx, det in enumerate(dets):
        groups.setdefault(_group_key(det.image_id, det.class_id), ([], []))[0].append((idx, det))
    for dets_g, _ in groups.values():
        dets_g.sort(key=lambda item: _det_sort_key(item[1], item[0]))
    return groups


def _match_all(
    dets: Sequence[Detection],
    gts: Sequence[GroundTruth],
    thresholds: Sequence[float],
    workers: int = 1,
) -> dict[float, tuple[list[str], list[bool]]]:
    """Flags per detection and matched markers per GT, aligned to input order."""
    groups = _build_groups(dets, gts)
    tasks = [(key, dets_g, gts_g, tuple(thresholds)) for key, (dets_g, gts_g) in sorted(groups.items())]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = dict(pool.map(_group_worker, tasks))
    else:
        results = {key: _match_group(dets_g, gts_g, thrs) for key, dets_g, gts_g, thrs in tasks}

    out: dict[float, tuple[list[str], list[bool]]] = {
        thr: (["fp"] * len(dets), [False] * len(gts)) for thr in thresholds
    }
    for key, dets_g, gts_g, _ in tasks:
        per_thr = results[key]
        for thr in thresholds:
            flags, matched = per_thr[thr]
            det_flags, gt_matched = out[thr]
            for (global_idx, _), flag in zip(dets_g, flags):
                det_flags[global_idx] = flag
            for (global_idx, _), m in zip(gts_g, matched):
                gt_matched[global_idx] = m
    return out


def match_detections(
    dets: Sequence[Detection], gts: Sequence[GroundTruth], iou_threshold: float
) -> tuple[list[str], list[bool]]:
    """Per-detection flags ('tp' / 'fp' / 'ignored') and per-GT matched markers."""
    result = _match_all(dets, gts, [iou_threshold])
    return result[iou_threshold]


def _pr_curve(
    dets: Sequence[Detection], det_indices: Sequence[int], flags: Sequence[str], npos: int
) -> PrCurve:
    order = sorted(det_indices, key=lambda i: _det_sort_key(dets[i], i))
    tp = fp = 0
    recalls, precisions, scores = [], [], []
    for i in order:
        if flags[i] == "ignored":
            continue
        if flags[i] == "tp":
            tp += 1
        else:
            fp += 1
        recalls.append(tp / npos if npos > 0 else 0.0)
        precisions.append(tp / (tp + fp))
        scores.append(dets[i].score)
    return PrCurve(np.asarray(recalls), np.asarray(precisions), np.asarray(scores))


def average_precision(curve: PrCurve, mode: ApMode = "eleven_point") -> float:
    """AP of a PR curve: monotone-envelope area or the 11-point interpolation."""
    rec, prec = curve.recalls, curve.precisions
    if rec.size == 0:
        return 0.0
    if mode == "eleven_point":
        total = 0.0
        for t in _ELEVEN_POINTS:
            mask = rec >= t
            total += float(prec[mask].max()) if mask.any() else 0.0
        return total / 11.0
    if mode == "all_point":
        mrec = np.concatenate(([0.0], rec, [1.0]))
        mpre = np.concatenate(([0.0], prec, [0.0]))
        for i in range(mpre.size - 1, 0, -1):
            mpre[i - 1] = max(mpre[i - 1], mpre[i])
        changed = np.nonzero(mrec[1:] != mrec[:-1])[0]
        return float(np.sum((mrec[changed + 1] - mrec[changed]) * mpre[changed + 1]))
    raise ValueError(f"unknown AP mode {mode!r}")


@dataclass
class EvalReport:
    """Per-class APs at each IoU threshold plus the derived mean metrics."""

    iou_thresholds: tuple[float, ...]
    mode: ApMode
    class_ids: tuple[int, ...]
    num_gts: dict[int, int]
    num_dets: dict[int, int]
    ap: dict[float, dict[int, float]]
    map_per_threshold: dict[float, float]
    pr_curves: dict[tuple[float, int], PrCurve]
    f_score: dict[str, float] | None = None
    class_names: dict[int, str] | None = None

    def _map_at(self, thr: float) -> float | None:
        for t, v in self.map_per_threshold.items():
            if abs(t - thr) < 1e-9:
                return v
        return None

    @property
    def map50(self) -> float | None:
        return self._map_at(0.50)

    @property
    def map75(self) -> float | None:
        return self._map_at(0.75)

    @property
    def map50_95(self) -> float | None:
        if len(self.iou_thresholds) != len(DEFAULT_IOU_LADDER):
            return None
        if any(abs(a - b) > 1e-9 for a, b in zip(sorted(self.iou_thresholds), DEFAULT_IOU_LADDER)):
            return None
        return sum(self.map_per_threshold.values()) / len(self.map_per_threshold)

    def _class_label(self, cid: int) -> str:
        if self.class_names and cid in self.class_names:
            return self.class_names[cid]
        return str(cid)

    def to_text(self) -> str:
        """Key/value header plus a per-class AP table."""
        lines = [f"mode: {self.mode}"]
        lines.append("iou_thresholds: " + " ".join(f"{t:.2f}" for t in self.iou_thresholds))
        for name, value in (("mAP50", self.map50), ("mAP75", self.map75), ("mAP50:95", self.map50_95)):
            if value is not None:
                lines.append(f"{name}: {value:.4f}")
        for thr in self.iou_thresholds:
            lines.append(f"mAP@{thr:.2f}: {self.map_per_threshold[thr]:.4f}")
        if self.f_score is not None:
            lines.append(
                "f_measure: precision={precision:.4f} recall={recall:.4f} f1={f1:.4f}".format(**self.f_score)
            )
        header = f"{'class':<20}{'gts':>6}{'dets':>7}" + "".join(
            f"{'AP@%.2f' % t:>10}" for t in self.iou_thresholds
        )
        lines.append(header)
        for cid in self.class_ids:
            row = f"{self._class_label(cid):<20}{self.num_gts[cid]:>6}{self.num_dets[cid]:>7}"
            row += "".join(f"{self.ap[t][cid]:>10.4f}" for t in self.iou_thresholds)
            lines.append(row)
        return "\n".join(lines) + "\n"

    def to_json_dict(self) -> dict:
        out = {
            "mode": self.mode,
            "iou_thresholds": list(self.iou_thresholds),
            "classes": [
                {
                    "class_id": cid,
                    "name": self._class_label(cid),
                    "num_gts": self.num_gts[cid],
                    "num_dets": self.num_dets[cid],
                    "ap": {f"{t:.2f}": self.ap[t][cid] for t in self.iou_thresholds},
                }
                for cid in self.class_ids
            ],
            "map_per_threshold": {f"{t:.2f}": v for t, v in self.map_per_threshold.items()},
            "map50": self.map50,
            "map75": self.map75,
            "map50_95": self.map50_95,
        }
        if self.f_score is not None:
            out["f_measure"] = dict(self.f_score)
        return out


def evaluate(
    dets: Sequence[Detection],
    gts: Sequence[GroundTruth],
    thresholds: Sequence[float] | None = None,
    mode: ApMode = "eleven_point",
    workers: int = 1,
    f_measure_at: tuple[float, float] | None = None,
    class_names: dict[int, str] | None = None,
) -> EvalReport:
    """Full evaluation report over the given IoU thresholds.

    Classes are those with at least one non-difficult ground truth; the mean
    AP at each threshold is unweighted over those classes. ``f_measure_at``
    optionally adds an F-measure row as ``(iou_threshold, score_threshold)``.
    ``workers > 1`` evaluates (image, class) groups in a process pool; the
    result is identical to the serial pass.
    """
    thresholds = tuple(thresholds) if thresholds is not None else DEFAULT_IOU_LADDER
    if not thresholds or any(not (0.0 < t <= 1.0) for t in thresholds):
        raise ValueError(f"thresholds must lie in (0, 1], got {thresholds}")
    dets = list(dets)
    gts = list(gts)

    npos: dict[int, int] = {}
    for gt in gts:
        if not gt.difficult:
            npos[gt.class_id] = npos.get(gt.class_id, 0) + 1
    class_ids = tuple(sorted(npos))
    ndet = {cid: sum(1 for d in dets if d.class_id == cid) for cid in class_ids}

    flags_per_thr = _match_all(dets, gts, thresholds, workers=workers)

    ap: dict[float, dict[int, float]] = {}
    map_per_thr: dict[float, float] = {}
    curves: dict[tuple[float, int], PrCurve] = {}
    det_idx_by_class: dict[int, list[int]] = {cid: [] for cid in class_ids}
    for i, det in enumerate(dets):
        if det.class_id in det_idx_by_class:
            det_idx_by_class[det.class_id].append(i)
    for thr in thresholds:
        det_flags, _ = flags_per_thr[thr]
        ap[thr] = {}
        for cid in class_ids:
            curve = _pr_curve(dets, det_idx_by_class[cid], det_flags, npos[cid])
            curves[(thr, cid)] = curve
            ap[thr][cid] = average_precision(curve, mode)
        map_per_thr[thr] = sum(ap[thr].values()) / len(class_ids) if class_ids else 0.0

    f_score = None
    if f_measure_at is not None:
        iou_thr, score_thr = f_measure_at
        f_score = f_measure(dets, gts, iou_thr, score_thr)
        f_score["iou_threshold"] = iou_thr
        f_score["score_threshold"] = score_thr

    return EvalReport(
        iou_thresholds=thresholds,
        mode=mode,
        class_ids=class_ids,
        num_gts=npos,
        num_dets=ndet,
        ap=ap,
        map_per_threshold=map_per_thr,
        pr_curves=curves,
        f_score=f_score,
        class_names=class_names,
    )


def f_measure(
    dets: Sequence[Detection],
    gts: Sequence[GroundTruth],
    iou_threshold: float,
    score_threshold: float,
) -> dict[str, float]:
    """Precision, recall, and F1 after score filtering; 0/0 counts as 0."""
    kept = score_filter(list(dets), score_threshold)
    flags, _ = match_detections(kept, gts, iou_threshold)
    tp = flags.count("tp")
    fp = flags.count("fp")
    npos = sum(1 for g in gts if not g.difficult)
    precision = tp / (tp + fp) if (tp + fp) > 0 else 0.0
    recall = tp / npos if npos > 0 else 0.0
    f1 = 2.0 * precision * recall / (precision + recall) if (precision + recall) > 0 else 0.0
    return {"precision": precision, "recall": recall, "f1": f1}
