"""Command-line surface: convert, crop, nms, eval, render, bench, iou, kernel.

Conventions shared by every subcommand: results go to stdout (or the file
named by a flag), diagnostics to stderr; exit code 0 on success, 2 on usage
errors, 1 on data errors. A ``--config`` file with ``key = value`` lines can
pre-set any long flag of the chosen subcommand; explicit flags win.

The ``kernel`` subcommand is the machine interface used by foreign-language
wrappers: it reads one JSON request ``{"op": "<name>_v1", ...}`` from stdin,
computes with the same library code paths as the human-facing subcommands,
and writes a JSON response to stdout. Geometry crosses that boundary as flat
row-major buffers in the library's y-up frame.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from . import dota_io
from .angle_codec import CslConfig, DclConfig, csl_decode, csl_encode, dcl_decode, dcl_encode
from .errors import RotboxError
from .evaluation import DEFAULT_IOU_LADDER, GroundTruth, evaluate
from .geometry import Convention, Quad, RBox, canonicalize, iou_matrix, rbox_to_quad, rotated_iou
from .losses import LossConfig, gwd_loss, kld_loss
from .postprocess import Detection, rotated_nms

__all__ = ["main"]


def _box_flag(text: str) -> tuple[float, float, float, float, float]:
    parts = text.split(",")
    if len(parts) != 5:
        raise argparse.ArgumentTypeError(f"expected cx,cy,w,h,theta, got {text!r}")
    try:
        vals = tuple(float(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"non-numeric box component in {text!r}") from None
    if not all(math.isfinite(v) for v in vals):
        raise argparse.ArgumentTypeError(f"non-finite box component in {text!r}")
    return vals


def _float_list(text: str) -> list[float]:
    try:
        return [float(p) for p in text.split(",") if p]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text: str) -> list[int]:
    try:
        return [int(p) for p in text.split(",") if p]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _read_config(path: str) -> dict[str, str]:
    values: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise RotboxError(f"{path}:line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rotbox", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="key = value file supplying flag defaults")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("iou", help="rotated IoU of two boxes")
    p.add_argument("--box-a", type=_box_flag, required=True, metavar="CX,CY,W,H,THETA")
    p.add_argument("--box-b", type=_box_flag, required=True, metavar="CX,CY,W,H,THETA")
    p.add_argument("--convention", choices=("oc", "le"), default="le")

    p = sub.add_parser("convert", help="DOTA annotation directory -> record file")
    p.add_argument("--ann-dir", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--sizes-file", help="optional 'image_id width height' lines overriding inferred sizes")

    p = sub.add_parser("crop", help="record file -> patch record file")
    p.add_argument("--records", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--patch-size", type=int, default=600)
    p.add_argument("--overlap", type=int, default=150)
    p.add_argument("--keep-fraction", type=float, default=0.5)
    p.add_argument("--scales", type=_float_list, default=[1.0])
    p.add_argument("--clip-objects", action="store_true")

    p = sub.add_parser("nms", help="per-class NMS over submission files")
    p.add_argument("--dets", required=True, help="directory of Task1_<class>.txt files")
    p.add_argument("--out", required=True)
    p.add_argument("--iou-threshold", type=float, default=0.5)

    p = sub.add_parser("eval", help="score submission files against a GT directory")
    p.add_argument("--dets", required=True, help="directory of Task1_<class>.txt files")
    p.add_argument("--gt-dir", required=True, help="directory of per-image DOTA annotation files")
    p.add_argument("--mode", choices=("eleven_point", "all_point"), default="eleven_point")
    p.add_argument(
        "--iou-thresholds",
        type=_float_list,
        default=None,
        help="comma-separated; defaults to the 0.50:0.05:0.95 ladder",
    )
    p.add_argument("--score-threshold", type=float, default=None, help="adds an F-measure row")
    p.add_argument("--f-iou-threshold", type=float, default=0.5)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--json", help="also write the machine-readable report here")

    p = sub.add_parser("render", help="records or submission files -> per-image SVG overlays")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--records")
    group.add_argument("--dets", help="directory of Task1_<class>.txt files")
    p.add_argument("--out", required=True)
    p.add_argument("--size", type=_int_list, default=None, metavar="W,H")

    p = sub.add_parser("bench", help="throughput of iou_matrix and rotated NMS")
    p.add_argument("--sizes", type=_int_list, default=[100, 1000, 10000])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--nms-size", type=int, default=10000)

    sub.add_parser("kernel", help="JSON request on stdin -> JSON response on stdout")
    return parser


# --------------------------------------------------------------------------
# subcommand implementations


def _cmd_iou(args) -> int:
    conv = Convention(args.convention)
    a = canonicalize(RBox(*args.box_a, conv))
    b = canonicalize(RBox(*args.box_b, conv))
    print(f"{rotated_iou(a, b):.6f}")
    return 0


def _load_annotation_dir(path: str) -> list[dota_io.AnnotationFile]:
    files = sorted(Path(path).glob("*.txt"))
    out = []
    for f in files:
        try:
            text = f.read_text()
        except OSError as e:
            raise RotboxError(f"cannot read annotation file {f}: {e}") from e
        out.append(dota_io.parse_annotation(text, image_id=f.stem, source=str(f)))
    return out


def _cmd_convert(args) -> int:
    files = _load_annotation_dir(args.ann_dir)
    if not files:
        print(f"warning: no annotation files found under {args.ann_dir}", file=sys.stderr)
    sizes = None
    if args.sizes_file:
        sizes = {}
        for raw in Path(args.sizes_file).read_text().splitlines():
            if raw.strip():
                image_id, w, h = raw.split()
                sizes[image_id] = (int(w), int(h))
    ds = dota_io.records_from_annotations(files, image_sizes=sizes)
    Path(args.out).write_text(dota_io.write_records(ds))
    print(f"wrote {len(ds.entries)} objects over {len(ds.image_sizes)} images to {args.out}")
    return 0


def _cmd_crop(args) -> int:
    ds = dota_io.read_records(Path(args.records).read_text(), source=args.records)
    annotations = dota_io.annotations_from_records(ds)
    sizes = {image_id: (w, h) for image_id, w, h in ds.image_sizes}
    patch_files: list[dota_io.AnnotationFile] = []
    patch_sizes: dict[str, tuple[int, int]] = {}
    origins: dict[str, tuple[int, int]] = {}
    for ann in annotations:
        w, h = sizes[ann.image_id]
        for scale in args.scales:
            sw, sh = max(1, round(w * scale)), max(1, round(h * scale))
            scaled = dota_io.AnnotationFile(
                image_id=ann.image_id,
                metadata=ann.metadata,
                objects=tuple(
                    dota_io.AnnotationObject(
                        Quad(tuple((x * scale, y * scale) for x, y in o.quad.vertices)),
                        o.class_name,
                        o.difficult,
                    )
                    for o in ann.objects
                ),
            )
            plan = dota_io.plan_tiles(sw, sh, args.patch_size, args.overlap)
            offsets_x = sorted({o[0] for o in plan.origins})
            offsets_y = sorted({o[1] for o in plan.origins})
            print(f"{ann.image_id} scale={scale:g} x_offsets={offsets_x} y_offsets={offsets_y}")
            for origin, patch in dota_io.crop_annotations(
                scaled, plan, keep_fraction=args.keep_fraction, clip_objects=args.clip_objects
            ):
                pid = dota_io.patch_image_id(ann.image_id, origin, scale)
                patch_files.append(dota_io.AnnotationFile(pid, patch.metadata, patch.objects))
                patch_sizes[pid] = (args.patch_size, args.patch_size)
                origins[pid] = origin
    out = dota_io.records_from_annotations(
        patch_files, class_names=list(ds.class_names), image_sizes=patch_sizes, origins=origins
    )
    Path(args.out).write_text(dota_io.write_records(out))
    print(f"wrote {len(out.entries)} objects over {len(out.image_sizes)} patches to {args.out}")
    return 0


def _load_submission_dir(path: str) -> tuple[dict[str, str], list[str]]:
    files = sorted(Path(path).glob("Task1_*.txt"))
    docs = {f.name: f.read_text() for f in files}
    classes = sorted(f.stem[len("Task1_"):] for f in files)
    return docs, classes


def _cmd_nms(args) -> int:
    docs, classes = _load_submission_dir(args.dets)
    dets = dota_io.read_submission(docs, classes)
    kept: list[Detection] = []
    for cid in range(len(classes)):
        kept.extend(rotated_nms([d for d in dets if d.class_id == cid], args.iou_threshold))
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, text in dota_io.write_submission(kept, classes).items():
        (out_dir / name).write_text(text)
    print(f"kept {len(kept)} of {len(dets)} detections at IoU > {args.iou_threshold}")
    return 0


def _cmd_eval(args) -> int:
    docs, det_classes = _load_submission_dir(args.dets)
    gt_files = _load_annotation_dir(args.gt_dir)
    classes = sorted({o.class_name for f in gt_files for o in f.objects} | set(det_classes))
    name_to_id = {n: i for i, n in enumerate(classes)}
    dets = dota_io.read_submission(docs, classes)
    gts = [
        GroundTruth(f.image_id, o.quad, name_to_id[o.class_name], o.difficult)
        for f in gt_files
        for o in f.objects
    ]
    thresholds = args.iou_thresholds if args.iou_thresholds else DEFAULT_IOU_LADDER
    f_at = (args.f_iou_threshold, args.score_threshold) if args.score_threshold is not None else None
    report = evaluate(
        dets,
        gts,
        thresholds=thresholds,
        mode=args.mode,
        workers=args.workers,
        f_measure_at=f_at,
        class_names={i: n for i, n in enumerate(classes)},
    )
    missing = [
        classes[cid] for cid in report.class_ids if f"Task1_{classes[cid]}.txt" not in docs
    ]
    text = report.to_text()
    if missing:
        text += "".join(f"note: no detections file for class {n}\n" for n in missing)
    print(text, end="")
    if args.json:
        payload = report.to_json_dict()
        if missing:
            payload["missing_submissions"] = missing
        Path(args.json).write_text(json.dumps(payload, indent=2) + "\n")
    return 0


_PALETTE = ("#e6194b", "#3cb44b", "#4363d8", "#f58231", "#911eb4", "#46f0f0", "#f032e6", "#808000")


def _render_svg(boxes: list[tuple[Quad, str, str]], width: float, height: float) -> str:
    """SVG overlay document; polygons sit in a group clipped to the viewport."""
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:g}" height="{height:g}" '
        f'viewBox="0 0 {width:g} {height:g}">',
        f'<defs><clipPath id="viewport"><rect x="0" y="0" width="{width:g}" height="{height:g}"/></clipPath></defs>',
        f'<rect x="0" y="0" width="{width:g}" height="{height:g}" fill="none" stroke="#000"/>',
        '<g clip-path="url(#viewport)">',
    ]
    for i, (quad, label, color) in enumerate(boxes):
        pts = " ".join(f"{x:.1f},{-y:.1f}" for x, y in quad.vertices)
        lines.append(f'<polygon points="{pts}" fill="none" stroke="{color}" stroke-width="2"/>')
        tx, ty = quad.vertices[0]
        lines.append(f'<text x="{tx:.1f}" y="{-ty:.1f}" font-size="12" fill="{color}">{label}</text>')
    lines.append("</g>")
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def _cmd_render(args) -> int:
    per_image: dict[str, list[tuple[Quad, str, str]]] = {}
    if args.records:
        ds = dota_io.read_records(Path(args.records).read_text(), source=args.records)
        for image_id, _, _ in ds.image_sizes:
            per_image.setdefault(image_id, [])
        for e in ds.entries:
            name = ds.class_names[e.class_id]
            color = _PALETTE[e.class_id % len(_PALETTE)]
            per_image.setdefault(e.image_id, []).append((e.quad, name, color))
        sizes = {image_id: (w, h) for image_id, w, h in ds.image_sizes}
    else:
        docs, classes = _load_submission_dir(args.dets)
        for det in dota_io.read_submission(docs, classes):
            name = classes[det.class_id]
            color = _PALETTE[det.class_id % len(_PALETTE)]
            quad = det.geometry if isinstance(det.geometry, Quad) else rbox_to_quad(det.geometry)
            per_image.setdefault(det.image_id, []).append((quad, f"{name} {det.score:.2f}", color))
        sizes = {}
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for image_id in sorted(per_image):
        if args.size:
            w, h = args.size
        elif image_id in sizes:
            w, h = sizes[image_id]
        else:
            xs = [abs(x) for q, _, _ in per_image[image_id] for x, _ in q.vertices] or [100.0]
            ys = [abs(y) for q, _, _ in per_image[image_id] for _, y in q.vertices] or [100.0]
            w, h = math.ceil(max(xs)) + 10, math.ceil(max(ys)) + 10
        (out_dir / f"{image_id}.svg").write_text(_render_svg(per_image[image_id], w, h))
    print(f"rendered {len(per_image)} images to {args.out}")
    return 0


def _cmd_bench(args) -> int:
    result = bench_mod.run_bench(args.sizes, seed=args.seed, nms_size=args.nms_size)
    print(bench_mod.format_bench(result), end="")
    return 0


# --------------------------------------------------------------------------
# kernel protocol (machine interface for foreign-language wrappers)

_RBOX_STRIDE = 6  # cx, cy, w, h, theta, convention code (0 = oc, 1 = le)
_QUAD_STRIDE = 8


def _kernel_boxes(flat, layout: str, name: str) -> list:
    stride = _RBOX_STRIDE if layout == "rbox" else _QUAD_STRIDE
    arr = np.asarray(flat, dtype=np.float64)
    if arr.ndim != 1 or arr.size % stride != 0:
        raise ValueError(f"boundary validation: {name} must be flat with stride {stride}, got size {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"boundary validation: non-finite value in {name}")
    rows = arr.reshape(-1, stride)
    if layout == "rbox":
        out = []
        for r in rows:
            conv = Convention.OC if int(r[5]) == 0 else Convention.LE
            out.append(RBox(r[0], r[1], r[2], r[3], r[4], conv))
        return out
    return [Quad(tuple(zip(r[0::2], r[1::2]))) for r in rows]


def _kernel_loss_cfg(obj: dict | None) -> LossConfig:
    return LossConfig(**obj) if obj else LossConfig()


def _op_iou_matrix(req: dict) -> dict:
    layout = req.get("layout", "rbox")
    a = _kernel_boxes(req["a"], layout, "a")
    b = _kernel_boxes(req["b"], layout, "b")
    m = iou_matrix(a, b)
    return {"shape": list(m.shape), "iou": m.reshape(-1).tolist()}


def _op_rotated_nms(req: dict) -> dict:
    layout = req.get("layout", "rbox")
    boxes = _kernel_boxes(req["boxes"], layout, "boxes")
    scores = np.asarray(req["scores"], dtype=np.float64)
    if scores.size != len(boxes):
        raise ValueError("boundary validation: scores length must match box count")
    dets = [Detection("kernel", g, 0, float(s)) for g, s in zip(boxes, scores)]
    kept = rotated_nms(dets, float(req["iou_threshold"]))
    index_of = {id(d): i for i, d in enumerate(dets)}
    return {"keep": [index_of[id(d)] for d in kept]}


def _op_gwd_loss(req: dict) -> dict:
    pred = _kernel_boxes(req["pred"], "rbox", "pred")[0]
    gt = _kernel_boxes(req["gt"], "rbox", "gt")[0]
    return {"loss": gwd_loss(pred, gt, _kernel_loss_cfg(req.get("cfg")))}


def _op_kld_loss(req: dict) -> dict:
    pred = _kernel_boxes(req["pred"], "rbox", "pred")[0]
    gt = _kernel_boxes(req["gt"], "rbox", "gt")[0]
    return {"loss": kld_loss(pred, gt, _kernel_loss_cfg(req.get("cfg")))}


def _csl_cfg(req: dict) -> CslConfig:
    return CslConfig(
        num_bins=int(req.get("num_bins", 180)),
        window=req.get("window", "gaussian"),
        radius=int(req.get("radius", 4)),
    )


def _dcl_cfg(req: dict) -> DclConfig:
    return DclConfig(num_bits=int(req.get("num_bits", 8)), coding=req.get("coding", "binary"))


def _op_csl_encode(req: dict) -> dict:
    return {"label": csl_encode(float(req["theta"]), _csl_cfg(req)).tolist()}


def _op_csl_decode(req: dict) -> dict:
    return {"theta": csl_decode(np.asarray(req["label"], dtype=np.float64), _csl_cfg(req))}


def _op_dcl_encode(req: dict) -> dict:
    return {"code": dcl_encode(float(req["theta"]), _dcl_cfg(req))}


def _op_dcl_decode(req: dict) -> dict:
    return {"theta": dcl_decode(str(req["code"]), _dcl_cfg(req))}


def _kernel_detections(obj: dict) -> list[Detection]:
    quads = _kernel_boxes(obj["quads"], "quad", "quads")
    ids = obj["image_ids"]
    classes = obj["class_ids"]
    scores = obj["scores"]
    if not (len(quads) == len(ids) == len(classes) == len(scores)):
        raise ValueError("boundary validation: detection arrays must have equal lengths")
    return [Detection(str(i), q, int(c), float(s)) for i, q, c, s in zip(ids, quads, classes, scores)]


def _kernel_gts(obj: dict) -> list[GroundTruth]:
    quads = _kernel_boxes(obj["quads"], "quad", "quads")
    ids = obj["image_ids"]
    classes = obj["class_ids"]
    difficult = obj.get("difficult", [0] * len(quads))
    if not (len(quads) == len(ids) == len(classes) == len(difficult)):
        raise ValueError("boundary validation: ground-truth arrays must have equal lengths")
    return [
        GroundTruth(str(i), q, int(c), bool(d))
        for i, q, c, d in zip(ids, quads, classes, difficult)
    ]


def _op_evaluate(req: dict) -> dict:
    report = evaluate(
        _kernel_detections(req["dets"]),
        _kernel_gts(req["gts"]),
        thresholds=req.get("thresholds"),
        mode=req.get("mode", "eleven_point"),
    )
    return report.to_json_dict()


_KERNEL_OPS = {
    "iou_matrix_v1": _op_iou_matrix,
    "rotated_nms_v1": _op_rotated_nms,
    "gwd_loss_v1": _op_gwd_loss,
    "kld_loss_v1": _op_kld_loss,
    "csl_encode_v1": _op_csl_encode,
    "csl_decode_v1": _op_csl_decode,
    "dcl_encode_v1": _op_dcl_encode,
    "dcl_decode_v1": _op_dcl_decode,
    "evaluate_v1": _op_evaluate,
}


def _cmd_kernel(args) -> int:
    try:
        request = json.loads(sys.stdin.read())
        op = request.get("op")
        if op not in _KERNEL_OPS:
            raise ValueError(f"unknown op {op!r}; supported: {sorted(_KERNEL_OPS)}")
        result = _KERNEL_OPS[op](request)
    except (RotboxError, ValueError, KeyError, TypeError, json.JSONDecodeError) as e:
        print(json.dumps({"ok": False, "error": {"type": type(e).__name__, "message": str(e)}}))
        return 1
    print(json.dumps({"ok": True, "result": result}))
    return 0


_COMMANDS = {
    "iou": _cmd_iou,
    "convert": _cmd_convert,
    "crop": _cmd_crop,
    "nms": _cmd_nms,
    "eval": _cmd_eval,
    "render": _cmd_render,
    "bench": _cmd_bench,
    "kernel": _cmd_kernel,
}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _build_parser()

    # first pass just to find --config; its values become subcommand defaults
    probe = argparse.ArgumentParser(add_help=False)
    probe.add_argument("--config")
    known, _ = probe.parse_known_args(argv)
    if known.config:
        try:
            overrides = _read_config(known.config)
        except (RotboxError, OSError) as e:
            print(f"error: {e}", file=sys.stderr)
            return 1
        for action in parser._subparsers._group_actions[0].choices.values():  # type: ignore[union-attr]
            valid = {a.dest for a in action._actions}
            typed = {a.dest: a.type for a in action._actions}
            defaults = {}
            for key, value in overrides.items():
                if key in valid:
                    caster = typed.get(key)
                    defaults[key] = caster(value) if callable(caster) else value
            action.set_defaults(**defaults)

    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except RotboxError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
