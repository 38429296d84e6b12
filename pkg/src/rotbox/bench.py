"""Throughput measurements for the batched IoU kernel and rotated NMS.

Targets are soft and regression-tracked: the pairwise kernel should clear
1e5 pairs/s and NMS over 1e4 boxes should finish within seconds on a
commodity machine. ``run_bench`` also cross-checks the optimized NMS against
the unoptimized reference on its smallest size, so a benchmark run doubles
as a quick correctness probe.
"""
from __future__ import annotations

import time

import numpy as np

from .geometry import Convention, RBox, canonicalize, corners_from_params, iou_matrix_from_corners
from .postprocess import Detection, nms_reference, rotated_nms

__all__ = ["random_boxes", "bench_iou_matrix", "bench_nms", "run_bench"]

_BENCH_COLS = 128  # second operand size for the pairwise benchmark


def random_boxes(n: int, seed: int, canvas: float | None = None) -> list[RBox]:
    """Deterministic random canonical boxes spread over a density-matched canvas."""
    rng = np.random.default_rng(seed)
    canvas = canvas if canvas is not None else 30.0 * max(1.0, n) ** 0.5
    out = []
    for _ in range(n):
        out.append(
            canonicalize(
                RBox(
                    float(rng.uniform(0.0, canvas)),
                    float(rng.uniform(0.0, canvas)),
                    float(rng.uniform(8.0, 40.0)),
                    float(rng.uniform(8.0, 40.0)),
                    float(rng.uniform(-180.0, 180.0)),
                    Convention.LE,
                )
            )
        )
    return out


def _params(boxes: list[RBox]) -> np.ndarray:
    return np.array([[b.cx, b.cy, b.w, b.h, b.theta] for b in boxes], dtype=np.float64)


def bench_iou_matrix(n: int, seed: int = 0, dense: bool = False) -> dict:
    """Time an (n x 128) IoU matrix; reports pairs per second.

    The default canvas scales with n, so most pairs are rejected by the
    bounding-box prefilter (the common evaluation workload); ``dense``
    packs every box into one patch-sized canvas so nearly every pair runs
    the exact clipping kernel.
    """
    canvas = 50.0 if dense else None
    a = _params(random_boxes(n, seed, canvas=canvas))
    b = _params(random_boxes(_BENCH_COLS, seed + 1, canvas=canvas))
    ca, cb = corners_from_params(a), corners_from_params(b)
    aa = a[:, 2] * a[:, 3]
    ab = b[:, 2] * b[:, 3]
    t0 = time.perf_counter()
    m = iou_matrix_from_corners(ca, aa, cb, ab)
    seconds = time.perf_counter() - t0
    pairs = m.size
    return {
        "n": n,
        "dense": dense,
        "pairs": pairs,
        "seconds": seconds,
        "pairs_per_sec": pairs / seconds if seconds > 0 else float("inf"),
    }


def bench_nms(n: int, seed: int = 0, iou_threshold: float = 0.3) -> dict:
    """Time rotated NMS over n random boxes in a dense canvas."""
    boxes = random_boxes(n, seed, canvas=10.0 * max(1.0, n) ** 0.5)
    rng = np.random.default_rng(seed + 2)
    dets = [Detection("bench", b, 0, float(rng.uniform(0.01, 0.99))) for b in boxes]
    t0 = time.perf_counter()
    kept = rotated_nms(dets, iou_threshold)
    seconds = time.perf_counter() - t0
    return {"n": n, "seconds": seconds, "kept": len(kept), "boxes_per_sec": n / seconds if seconds > 0 else float("inf")}


def run_bench(sizes: list[int], seed: int = 0, nms_size: int = 10_000) -> dict:
    """Full benchmark sweep plus an inline optimized-vs-reference NMS check."""
    check_n = min(min(sizes), 500) if sizes else 200
    boxes = random_boxes(check_n, seed, canvas=10.0 * max(1.0, check_n) ** 0.5)
    rng = np.random.default_rng(seed + 3)
    dets = [Detection("bench", b, 0, float(rng.uniform(0.01, 0.99))) for b in boxes]
    if rotated_nms(dets, 0.3) != nms_reference(dets, 0.3):
        raise AssertionError("optimized NMS disagrees with the reference implementation")
    iou_rows = [bench_iou_matrix(n, seed, dense=dense) for n in sizes for dense in (False, True)]
    nms_row = bench_nms(nms_size, seed)
    return {"iou": iou_rows, "nms": nms_row, "nms_check": "ok"}


def format_bench(result: dict) -> str:
    lines = [f"{'n':>8} {'layout':>8} {'pairs':>12} {'seconds':>10} {'pairs/sec':>14}"]
    for row in result["iou"]:
        layout = "dense" if row["dense"] else "sparse"
        lines.append(
            f"{row['n']:>8} {layout:>8} {row['pairs']:>12} {row['seconds']:>10.4f} {row['pairs_per_sec']:>14.0f}"
        )
    nms = result["nms"]
    lines.append(
        f"nms: n={nms['n']} seconds={nms['seconds']:.4f} kept={nms['kept']} boxes/sec={nms['boxes_per_sec']:.0f}"
    )
    lines.append(f"nms reference check: {result['nms_check']}")
    return "\n".join(lines) + "\n"
