/**
 * Shared types for the kernel boundary.
 *
 * Geometry crosses the boundary as flat, contiguous, row-major buffers plus
 * scalars; there are no object graphs. Rotated boxes use six numbers per
 * row (cx, cy, w, h, theta in degrees, convention code) and quads use eight
 * (x1, y1 ... x4, y4). Coordinates live in the core's mathematical y-up
 * frame; angles are degrees, counterclockwise positive.
 */

export const RBOX_STRIDE = 6;
export const QUAD_STRIDE = 8;

/** Convention code stored in the sixth slot of an rbox row. */
export enum ConventionCode {
  /** theta in [-90, 0), no side ordering. */
  OC = 0,
  /** theta in [-90, 90), w is the long edge. */
  LE = 1,
}

export type BoxLayout = "rbox" | "quad";

export interface LossConfig {
  tau?: number;
  transform?: "sqrt" | "log1p";
  smooth_l1_beta?: number;
  kld_direction?: "pred_to_gt" | "gt_to_pred" | "min_symmetric";
}

export interface CslConfig {
  num_bins?: number;
  window?: "gaussian" | "triangle" | "rectangle" | "pulse";
  radius?: number;
}

export interface DclConfig {
  num_bits?: number;
  coding?: "binary" | "gray";
}

/** Detections as parallel flat arrays; `quads` holds 8 numbers per entry. */
export interface DetectionArrays {
  imageIds: string[];
  quads: Float64Array;
  classIds: Int32Array;
  scores: Float64Array;
}

/** Ground truths as parallel flat arrays; `difficult` defaults to all-zero. */
export interface GroundTruthArrays {
  imageIds: string[];
  quads: Float64Array;
  classIds: Int32Array;
  difficult?: Uint8Array;
}

export interface EvaluateOptions {
  thresholds?: number[];
  mode?: "eleven_point" | "all_point";
}

export interface ClassReport {
  class_id: number;
  name: string;
  num_gts: number;
  num_dets: number;
  ap: Record<string, number>;
}

export interface EvalReport {
  mode: string;
  iou_thresholds: number[];
  classes: ClassReport[];
  map_per_threshold: Record<string, number>;
  map50: number | null;
  map75: number | null;
  map50_95: number | null;
}

export interface IouMatrixResult {
  rows: number;
  cols: number;
  /** Row-major [rows x cols] IoU values. */
  iou: Float64Array;
}
