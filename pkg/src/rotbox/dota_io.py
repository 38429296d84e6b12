"""DOTA-format annotation parsing, tiling plans, cropping, and result-file I/O.

Files store image-space (y-down) coordinates; everything in memory uses the
package's mathematical y-up frame. The flip happens exactly once, in the
parse/write functions here, as ``y_math = -y_image``.

Three text formats live in this module:

* DOTA annotation files (read): optional leading ``key:value`` metadata
  lines, then one object per line as
  ``x1 y1 x2 y2 x3 y3 x4 y4 class difficult``.
* Submission files (read/write): one ``Task1_<class>.txt`` per class with
  lines ``<image_id> <score> <x1> <y1> ... <x4> <y4>`` (score at 4 decimals,
  coordinates at 1 decimal). Every class gets a document, detections or not.
* Record files (read/write): the framework-neutral dataset format. A
  versioned header line, a ``classes`` line, ``image`` lines with processing
  dimensions, then ``obj`` lines carrying image id, patch origin, quad,
  class id, and difficult flag. Coordinates round-trip losslessly via
  ``repr``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .errors import AnnotationParseError, RecordVersionError
from .geometry import Quad, RBox, convex_hull, convex_intersection_area, polygon_area, rbox_to_quad
from .postprocess import Detection, rotated_nms

__all__ = [
    "AnnotationObject",
    "AnnotationFile",
    "TilePlan",
    "RecordEntry",
    "RecordDataset",
    "RECORD_FORMAT_VERSION",
    "parse_annotation",
    "plan_tiles",
    "crop_annotations",
    "merge_patch_detections",
    "write_submission",
    "read_submission",
    "write_records",
    "read_records",
    "records_from_annotations",
    "annotations_from_records",
    "patch_image_id",
]

RECORD_FORMAT_VERSION = "v1"
_RECORD_MAGIC = "rotbox-records"


@dataclass(frozen=True)
class AnnotationObject:
    """One annotated object: quad (math frame), class name, difficult flag."""

    quad: Quad
    class_name: str
    difficult: bool


@dataclass(frozen=True)
class AnnotationFile:
    """Parsed annotation document for one image (or one patch of one image)."""

    image_id: str
    metadata: tuple[str, ...]
    objects: tuple[AnnotationObject, ...]


@dataclass(frozen=True)
class TilePlan:
    """Sliding-window patch origins covering a width x height image."""

    patch_size: int
    overlap: int
    width: int
    height: int
    origins: tuple[tuple[int, int], ...]


@dataclass(frozen=True)
class RecordEntry:
    """One object record: image id, patch origin, quad (math frame), class id, difficult."""

    image_id: str
    origin: tuple[int, int]
    quad: Quad
    class_id: int
    difficult: bool


@dataclass(frozen=True)
class RecordDataset:
    """Record-file contents: class registry, per-image dimensions, object entries."""

    class_names: tuple[str, ...]
    image_sizes: tuple[tuple[str, int, int], ...]
    entries: tuple[RecordEntry, ...]


def _flip_y(points) -> tuple[tuple[float, float], ...]:
    return tuple((float(x), -float(y)) for x, y in points)


def parse_annotation(text: str, image_id: str = "", source: str | None = None) -> AnnotationFile:
    """Parse one DOTA annotation document.

    Leading lines containing ``:`` in their first token are kept as metadata.
    Object lines must carry exactly 8 coordinates, a class token, and a 0/1
    difficult flag; anything else raises with the offending line number.
    Unknown class names are kept verbatim (a class registry maps them later).
    """
    metadata: list[str] = []
    objects: list[AnnotationObject] = []
    in_header = True
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        tokens = line.split()
        if in_header and ":" in tokens[0]:
            metadata.append(line)
            continue
        in_header = False
        if len(tokens) != 10:
            raise AnnotationParseError(
                f"expected 8 coordinates + class + difficult, got {len(tokens)} tokens",
                source=source,
                line=lineno,
            )
        try:
            coords = [float(t) for t in tokens[:8]]
        except ValueError:
            raise AnnotationParseError(
                f"non-numeric coordinate in {tokens[:8]}", source=source, line=lineno
            ) from None
        if not all(math.isfinite(c) for c in coords):
            raise AnnotationParseError("non-finite coordinate", source=source, line=lineno)
        if tokens[9] not in ("0", "1"):
            raise AnnotationParseError(
                f"difficult flag must be 0 or 1, got {tokens[9]!r}", source=source, line=lineno
            )
        quad = Quad(_flip_y(zip(coords[0::2], coords[1::2])))
        objects.append(AnnotationObject(quad, tokens[8], tokens[9] == "1"))
    return AnnotationFile(image_id=image_id, metadata=tuple(metadata), objects=tuple(objects))


def _axis_offsets(dim: int, patch_size: int, stride: int) -> list[int]:
    offsets: list[int] = []
    x = 0
    while True:
        if x + patch_size >= dim:
            last = max(0, dim - patch_size)
            if not offsets or offsets[-1] != last:
                offsets.append(last)
            break
        offsets.append(x)
        x += stride
    return offsets


def plan_tiles(width: int, height: int, patch_size: int = 600, overlap: int = 150) -> TilePlan:
    """Patch origins on a stride of ``patch_size - overlap``.

    The final offset per axis is clamped so the patch ends at the image edge;
    images smaller than the patch get the single origin 0 (the patch may
    overhang).
    """
    if not 0 <= overlap < patch_size:
        raise ValueError(f"need 0 <= overlap < patch_size, got overlap={overlap}, patch_size={patch_size}")
    if width <= 0 or height <= 0:
        raise ValueError(f"image dimensions must be positive, got {width}x{height}")
    stride = patch_size - overlap
    xs = _axis_offsets(width, patch_size, stride)
    ys = _axis_offsets(height, patch_size, stride)
    origins = tuple((x, y) for y in ys for x in xs)
    return TilePlan(patch_size=patch_size, overlap=overlap, width=width, height=height, origins=origins)


def patch_image_id(image_id: str, origin: tuple[int, int], scale: float = 1.0) -> str:
    """Stable id for a patch of an image, e.g. ``P0001__600__0_400``."""
    if scale == 1.0:
        return f"{image_id}__{origin[0]}_{origin[1]}"
    return f"{image_id}__s{scale:g}__{origin[0]}_{origin[1]}"


def _patch_rect_math(origin: tuple[int, int], patch_size: int) -> Quad:
    x0, y0 = origin
    return Quad(
        (
            (float(x0), -float(y0 + patch_size)),
            (float(x0 + patch_size), -float(y0 + patch_size)),
            (float(x0 + patch_size), -float(y0)),
            (float(x0), -float(y0)),
        )
    )


def _overlap_fraction(obj_quad: Quad, patch: Quad) -> float:
    """(object ∩ patch) area over object area, using the object's convex hull."""
    hull = convex_hull(obj_quad.vertices)
    if len(hull) < 3:
        return 0.0
    area = polygon_area(hull)
    if area <= 0.0:
        return 0.0
    hull_quad = hull + [hull[-1]] * (4 - len(hull)) if len(hull) < 4 else hull
    if len(hull) > 4:  # quads cannot hull to more than 4 points
        hull_quad = hull[:4]
    inter = convex_intersection_area(patch, Quad(tuple(hull_quad)))
    return inter / area


def _translate_quad(q: Quad, dx: float, dy: float) -> Quad:
    return Quad(tuple((x + dx, y + dy) for x, y in q.vertices))


def crop_annotations(
    ann: AnnotationFile,
    plan: TilePlan,
    keep_fraction: float = 0.5,
    clip_objects: bool = False,
) -> list[tuple[tuple[int, int], AnnotationFile]]:
    """Per-patch annotation files for one image.

    An object lands in a patch when (object ∩ patch) area / object area
    reaches ``keep_fraction``. Kept objects are translated into the
    patch-local frame; with ``clip_objects`` they are additionally replaced
    by the minimum-area rectangle of the clipped polygon (default keeps the
    coordinates untouched beyond translation, overhang included).
    """
    if not 0.0 < keep_fraction <= 1.0:
        raise ValueError(f"keep_fraction must lie in (0, 1], got {keep_fraction}")
    out: list[tuple[tuple[int, int], AnnotationFile]] = []
    for origin in plan.origins:
        patch = _patch_rect_math(origin, plan.patch_size)
        kept: list[AnnotationObject] = []
        for obj in ann.objects:
            frac = _overlap_fraction(obj.quad, patch)
            if frac < keep_fraction:
                continue
            quad = obj.quad
            if clip_objects and frac < 1.0:
                clipped = _clip_to_patch(quad, patch)
                if clipped is None:
                    continue
                quad = clipped
            # patch-local frame: x' = x - x0, y'_math = y_math + y0
            kept.append(replace(obj, quad=_translate_quad(quad, -origin[0], origin[1])))
        out.append(
            (
                origin,
                AnnotationFile(
                    image_id=patch_image_id(ann.image_id, origin),
                    metadata=ann.metadata,
                    objects=tuple(kept),
                ),
            )
        )
    return out


def _clip_to_patch(quad: Quad, patch: Quad) -> Quad | None:
    from .geometry import _clip_convex, quad_to_rbox

    clipped = _clip_convex(list(quad.vertices), patch.vertices)
    if len(clipped) < 3:
        return None
    hull = convex_hull(clipped)
    if len(hull) < 3:
        return None
    padded = (hull + [hull[-1]] * 4)[:4]
    return rbox_to_quad(quad_to_rbox(Quad(tuple(padded))))


def merge_patch_detections(
    per_patch: list[tuple[tuple[int, int], list[Detection]]],
    iou_threshold: float = 0.5,
) -> list[Detection]:
    """Translate patch-local detections back to global coordinates and dedup.

    Concatenates all patches, restores global coordinates from each patch
    origin, then runs per-class rotated NMS to collapse duplicates from
    overlapping patches.
    """
    merged: list[Detection] = []
    for origin, dets in per_patch:
        dx, dy = float(origin[0]), -float(origin[1])
        for det in dets:
            geom = det.geometry
            if isinstance(geom, RBox):
                geom = replace(geom, cx=geom.cx + dx, cy=geom.cy + dy)
            else:
                geom = _translate_quad(geom, dx, dy)
            merged.append(replace(det, geometry=geom))
    out: list[Detection] = []
    for cid in sorted({d.class_id for d in merged}):
        out.extend(rotated_nms([d for d in merged if d.class_id == cid], iou_threshold))
    out.sort(key=lambda d: (-d.score, d.image_id))
    return out


def _det_quad_image_space(det: Detection) -> tuple[tuple[float, float], ...]:
    quad = det.geometry if isinstance(det.geometry, Quad) else rbox_to_quad(det.geometry)
    # re-canonicalize in the flipped frame so written vertex order is stable
    return Quad(_flip_y(quad.vertices)).vertices


def write_submission(dets: list[Detection], class_names: list[str]) -> dict[str, str]:
    """Per-class submission documents keyed by file name (``Task1_<class>.txt``).

    Classes without detections still get an (empty) document. Line order is
    byte-stable: image id, then score descending, then input position.
    """
    by_class: dict[int, list[tuple[int, Detection]]] = {i: [] for i in range(len(class_names))}
    for idx, det in enumerate(dets):
        if det.class_id >= len(class_names):
            raise ValueError(f"detection class_id {det.class_id} outside class_names (n={len(class_names)})")
        by_class[det.class_id].append((idx, det))
    docs: dict[str, str] = {}
    for cid, name in enumerate(class_names):
        rows = sorted(by_class[cid], key=lambda item: (item[1].image_id, -item[1].score, item[0]))
        lines = []
        for _, det in rows:
            coords = " ".join(f"{v:.1f}" for xy in _det_quad_image_space(det) for v in xy)
            lines.append(f"{det.image_id} {det.score:.4f} {coords}")
        docs[f"Task1_{name}.txt"] = "".join(line + "\n" for line in lines)
    return docs


def _class_of_submission_name(filename: str) -> str:
    name = filename.rsplit("/", 1)[-1]
    if not (name.startswith("Task1_") and name.endswith(".txt")):
        raise AnnotationParseError(f"submission file names look like Task1_<class>.txt, got {filename!r}")
    return name[len("Task1_"):-len(".txt")]


def read_submission(documents: dict[str, str], class_names: list[str]) -> list[Detection]:
    """Inverse of :func:`write_submission` over a mapping of file name to text."""
    name_to_id = {n: i for i, n in enumerate(class_names)}
    dets: list[Detection] = []
    for filename in sorted(documents):
        cls = _class_of_submission_name(filename)
        if cls not in name_to_id:
            raise AnnotationParseError(f"unknown class {cls!r}", source=filename)
        for lineno, raw in enumerate(documents[filename].splitlines(), start=1):
            line = raw.strip()
            if not line:
                continue
            tokens = line.split()
            if len(tokens) != 10:
                raise AnnotationParseError(
                    f"expected image id, score, 8 coordinates; got {len(tokens)} tokens",
                    source=filename,
                    line=lineno,
                )
            try:
                score = float(tokens[1])
                coords = [float(t) for t in tokens[2:]]
            except ValueError:
                raise AnnotationParseError(
                    "non-numeric score or coordinate", source=filename, line=lineno
                ) from None
            if not (math.isfinite(score) and all(math.isfinite(c) for c in coords)):
                raise AnnotationParseError("non-finite value", source=filename, line=lineno)
            quad = Quad(_flip_y(zip(coords[0::2], coords[1::2])))
            dets.append(Detection(tokens[0], quad, name_to_id[cls], score))
    return dets


def write_records(ds: RecordDataset) -> str:
    """Serialize a dataset to the versioned line-delimited record format."""
    lines = [f"{_RECORD_MAGIC} {RECORD_FORMAT_VERSION}"]
    lines.append("classes" + "".join(f" {n}" for n in ds.class_names))
    for image_id, w, h in ds.image_sizes:
        lines.append(f"image {image_id} {w} {h}")
    for e in ds.entries:
        coords = " ".join(repr(v) for xy in _flip_y(e.quad.vertices) for v in xy)
        lines.append(
            f"obj {e.image_id} {e.origin[0]} {e.origin[1]} {coords} {e.class_id} {1 if e.difficult else 0}"
        )
    return "".join(line + "\n" for line in lines)


def read_records(text: str, source: str | None = None) -> RecordDataset:
    """Parse the record format; rejects missing/unsupported version headers."""
    lines = text.splitlines()
    if not lines:
        raise AnnotationParseError("empty record file", source=source, line=1)
    head = lines[0].split()
    if len(head) != 2 or head[0] != _RECORD_MAGIC:
        raise AnnotationParseError(
            f"expected header '{_RECORD_MAGIC} <version>', got {lines[0]!r}", source=source, line=1
        )
    if head[1] != RECORD_FORMAT_VERSION:
        raise RecordVersionError(
            f"unsupported record version {head[1]!r} (supported: {RECORD_FORMAT_VERSION})"
        )
    class_names: tuple[str, ...] | None = None
    sizes: list[tuple[str, int, int]] = []
    entries: list[RecordEntry] = []
    for lineno, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if not line:
            continue
        tokens = line.split()
        kind = tokens[0]
        if kind == "classes":
            class_names = tuple(tokens[1:])
        elif kind == "image":
            if len(tokens) != 4:
                raise AnnotationParseError("image line needs id, width, height", source=source, line=lineno)
            sizes.append((tokens[1], int(tokens[2]), int(tokens[3])))
        elif kind == "obj":
            if len(tokens) != 14:
                raise AnnotationParseError(
                    f"obj line needs 14 tokens, got {len(tokens)}", source=source, line=lineno
                )
            try:
                ox, oy = int(tokens[2]), int(tokens[3])
                coords = [float(t) for t in tokens[4:12]]
                class_id = int(tokens[12])
            except ValueError:
                raise AnnotationParseError("malformed obj fields", source=source, line=lineno) from None
            if tokens[13] not in ("0", "1"):
                raise AnnotationParseError("difficult flag must be 0 or 1", source=source, line=lineno)
            quad = Quad(_flip_y(zip(coords[0::2], coords[1::2])))
            entries.append(RecordEntry(tokens[1], (ox, oy), quad, class_id, tokens[13] == "1"))
        else:
            raise AnnotationParseError(f"unknown record kind {kind!r}", source=source, line=lineno)
    if class_names is None:
        raise AnnotationParseError("missing classes line", source=source, line=2)
    return RecordDataset(class_names=class_names, image_sizes=tuple(sizes), entries=tuple(entries))


def records_from_annotations(
    files: list[AnnotationFile],
    class_names: list[str] | None = None,
    image_sizes: dict[str, tuple[int, int]] | None = None,
    origins: dict[str, tuple[int, int]] | None = None,
) -> RecordDataset:
    """Bundle annotation files into a dataset; classes default to the sorted union.

    Image sizes default to the smallest integer box containing all of an
    image's objects (a stand-in when pixel data is unavailable).
    """
    if class_names is None:
        class_names = sorted({o.class_name for f in files for o in f.objects})
    name_to_id = {n: i for i, n in enumerate(class_names)}
    sizes: list[tuple[str, int, int]] = []
    entries: list[RecordEntry] = []
    for f in files:
        if image_sizes and f.image_id in image_sizes:
            w, h = image_sizes[f.image_id]
        else:
            xs = [x for o in f.objects for x, _ in o.quad.vertices]
            ys = [-y for o in f.objects for _, y in o.quad.vertices]
            w = int(math.ceil(max(xs))) + 1 if xs else 1
            h = int(math.ceil(max(ys))) + 1 if ys else 1
        sizes.append((f.image_id, w, h))
        origin = origins.get(f.image_id, (0, 0)) if origins else (0, 0)
        for o in f.objects:
            if o.class_name not in name_to_id:
                raise ValueError(f"class {o.class_name!r} missing from class_names")
            entries.append(RecordEntry(f.image_id, origin, o.quad, name_to_id[o.class_name], o.difficult))
    return RecordDataset(tuple(class_names), tuple(sizes), tuple(entries))


def annotations_from_records(ds: RecordDataset) -> list[AnnotationFile]:
    """Regroup record entries into per-image annotation files (record order kept)."""
    by_image: dict[str, list[AnnotationObject]] = {image_id: [] for image_id, _, _ in ds.image_sizes}
    for e in ds.entries:
        by_image.setdefault(e.image_id, []).append(
            AnnotationObject(e.quad, ds.class_names[e.class_id], e.difficult)
        )
    return [
        AnnotationFile(image_id=image_id, metadata=(), objects=tuple(objs))
        for image_id, objs in by_image.items()
    ]
