"""Rotated-bounding-box geometry, regression losses, angle codecs, and evaluation.

The package covers the non-neural core of an oriented-object-detection
stack: box conventions and conversions, exact rotated IoU, Gaussian-based
regression losses, angle-classification codecs, rotated NMS, DOTA-format
I/O with tiling/merging, and VOC-protocol mAP / F-measure reporting.
"""

from .angle_codec import CslConfig, DclConfig, csl_decode, csl_encode, dcl_decode, dcl_encode
from .errors import (
    AngleRangeError,
    AnnotationParseError,
    DegenerateInputError,
    InvalidBoxError,
    InvalidPolygonError,
    MatrixDomainError,
    RecordVersionError,
    RotboxError,
)
from .evaluation import (
    DEFAULT_IOU_LADDER,
    EvalReport,
    GroundTruth,
    PrCurve,
    average_precision,
    evaluate,
    f_measure,
    match_detections,
)
from .geometry import (
    Convention,
    Quad,
    RBox,
    canonicalize,
    convert_convention,
    convex_hull,
    convex_intersection_area,
    iou_matrix,
    is_canonical,
    polygon_area,
    quad_to_rbox,
    rbox_to_quad,
    rotated_iou,
)
from .losses import (
    Gaussian2,
    LossConfig,
    box_to_gaussian,
    gwd_distance,
    gwd_loss,
    gwd_loss_grad,
    iou_smooth_l1_grad,
    iou_smooth_l1_loss,
    kld_divergence,
    kld_loss,
    kld_loss_grad,
    numeric_gradient,
    rsdet_modulated_grad,
    rsdet_modulated_loss,
    smooth_l1,
    smooth_l1_grad,
)
from .postprocess import Detection, nms_reference, rotated_nms, score_filter

__version__ = "0.1.0"
