/**
 * Typed wrappers over the rotbox core kernels.
 *
 * Every function validates its buffers at the boundary (finiteness, stride,
 * parallel lengths) before the core is invoked, never mutates its inputs,
 * and returns values numerically identical to the core's own output.
 */
import { runKernel } from "./core.js";
import {
  type BoxLayout,
  type CslConfig,
  type DclConfig,
  type DetectionArrays,
  type EvalReport,
  type EvaluateOptions,
  type GroundTruthArrays,
  type IouMatrixResult,
  type LossConfig,
  RBOX_STRIDE,
} from "./types.js";
import {
  BindingsValidationError,
  checkBoxBuffer,
  checkFinite,
  checkSameLength,
  checkScalar,
} from "./validate.js";

export { CoreError, kernelCallCount } from "./core.js";
export { BindingsValidationError } from "./validate.js";
export * from "./types.js";

/** Pairwise IoU matrix between two flat box buffers. */
export function iouMatrix(
  a: Float64Array,
  b: Float64Array,
  layout: BoxLayout = "rbox",
): IouMatrixResult {
  checkBoxBuffer("a", a, layout);
  checkBoxBuffer("b", b, layout);
  const result = runKernel<{ shape: [number, number]; iou: number[] }>("iou_matrix_v1", {
    layout,
    a: Array.from(a),
    b: Array.from(b),
  });
  return { rows: result.shape[0], cols: result.shape[1], iou: Float64Array.from(result.iou) };
}

/** Greedy rotated NMS; returns the kept row indices in score-descending order. */
export function rotatedNms(
  boxes: Float64Array,
  scores: Float64Array,
  iouThreshold: number,
  layout: BoxLayout = "rbox",
): Int32Array {
  const n = checkBoxBuffer("boxes", boxes, layout);
  checkFinite("scores", scores);
  checkSameLength([
    ["boxes", n],
    ["scores", scores.length],
  ]);
  checkScalar("iouThreshold", iouThreshold);
  const result = runKernel<{ keep: number[] }>("rotated_nms_v1", {
    layout,
    boxes: Array.from(boxes),
    scores: Array.from(scores),
    iou_threshold: iouThreshold,
  });
  return Int32Array.from(result.keep);
}

function lossCall(op: string, pred: Float64Array, gt: Float64Array, cfg?: LossConfig): number {
  if (pred.length !== RBOX_STRIDE || gt.length !== RBOX_STRIDE) {
    throw new BindingsValidationError(
      `loss boxes are single rbox rows of ${RBOX_STRIDE} values, got ${pred.length}/${gt.length}`,
    );
  }
  checkFinite("pred", pred);
  checkFinite("gt", gt);
  const result = runKernel<{ loss: number }>(op, {
    pred: Array.from(pred),
    gt: Array.from(gt),
    ...(cfg ? { cfg } : {}),
  });
  return result.loss;
}

/** Gaussian Wasserstein regression loss between two rbox rows. */
export function gwdLoss(pred: Float64Array, gt: Float64Array, cfg?: LossConfig): number {
  return lossCall("gwd_loss_v1", pred, gt, cfg);
}

/** Kullback-Leibler regression loss between two rbox rows. */
export function kldLoss(pred: Float64Array, gt: Float64Array, cfg?: LossConfig): number {
  return lossCall("kld_loss_v1", pred, gt, cfg);
}

/** Dense circular smooth label for an angle in [-90, 90). */
export function cslEncode(theta: number, cfg?: CslConfig): Float64Array {
  checkScalar("theta", theta);
  const result = runKernel<{ label: number[] }>("csl_encode_v1", { theta, ...(cfg ?? {}) });
  return Float64Array.from(result.label);
}

/** Bin-center angle of a dense label's argmax. */
export function cslDecode(label: Float64Array, cfg?: CslConfig): number {
  checkFinite("label", label);
  const result = runKernel<{ theta: number }>("csl_decode_v1", {
    label: Array.from(label),
    ...(cfg ?? {}),
  });
  return result.theta;
}

/** Bit string (MSB first) of the angle's bin index. */
export function dclEncode(theta: number, cfg?: DclConfig): string {
  checkScalar("theta", theta);
  const result = runKernel<{ code: string }>("dcl_encode_v1", { theta, ...(cfg ?? {}) });
  return result.code;
}

/** Bin-center angle of an encoded bit string. */
export function dclDecode(code: string, cfg?: DclConfig): number {
  if (!/^[01]+$/.test(code)) {
    throw new BindingsValidationError(`code must be a 0/1 bit string, got ${JSON.stringify(code)}`);
  }
  const result = runKernel<{ theta: number }>("dcl_decode_v1", { code, ...(cfg ?? {}) });
  return result.theta;
}

function checkQuadArrays(
  name: string,
  arrays: { imageIds: string[]; quads: Float64Array; classIds: Int32Array },
): number {
  const n = checkBoxBuffer(`${name}.quads`, arrays.quads, "quad");
  checkSameLength([
    [`${name}.quads`, n],
    [`${name}.imageIds`, arrays.imageIds.length],
    [`${name}.classIds`, arrays.classIds.length],
  ]);
  return n;
}

/** Full mAP evaluation over flat detection/ground-truth arrays. */
export function evaluateDetections(
  dets: DetectionArrays,
  gts: GroundTruthArrays,
  options?: EvaluateOptions,
): EvalReport {
  const nd = checkQuadArrays("dets", dets);
  checkFinite("dets.scores", dets.scores);
  checkSameLength([
    ["dets.quads", nd],
    ["dets.scores", dets.scores.length],
  ]);
  const ng = checkQuadArrays("gts", gts);
  if (gts.difficult) {
    checkSameLength([
      ["gts.quads", ng],
      ["gts.difficult", gts.difficult.length],
    ]);
  }
  return runKernel<EvalReport>("evaluate_v1", {
    dets: {
      image_ids: dets.imageIds,
      quads: Array.from(dets.quads),
      class_ids: Array.from(dets.classIds),
      scores: Array.from(dets.scores),
    },
    gts: {
      image_ids: gts.imageIds,
      quads: Array.from(gts.quads),
      class_ids: Array.from(gts.classIds),
      difficult: Array.from(gts.difficult ?? new Uint8Array(ng)),
    },
    ...(options?.thresholds ? { thresholds: options.thresholds } : {}),
    ...(options?.mode ? { mode: options.mode } : {}),
  });
}
