import { QUAD_STRIDE, RBOX_STRIDE, type BoxLayout } from "./types.js";

/** Raised before the core is invoked when a buffer fails boundary checks. */
export class BindingsValidationError extends Error {
  constructor(message: string) {
    super(`boundary validation: ${message}`);
    this.name = "BindingsValidationError";
  }
}

export function strideOf(layout: BoxLayout): number {
  return layout === "rbox" ? RBOX_STRIDE : QUAD_STRIDE;
}

export function checkFinite(name: string, values: ArrayLike<number>): void {
  for (let i = 0; i < values.length; i++) {
    if (!Number.isFinite(values[i])) {
      throw new BindingsValidationError(`non-finite value in ${name} at index ${i}`);
    }
  }
}

export function checkBoxBuffer(name: string, buffer: Float64Array, layout: BoxLayout): number {
  const stride = strideOf(layout);
  if (buffer.length % stride !== 0) {
    throw new BindingsValidationError(
      `${name} length ${buffer.length} is not a multiple of stride ${stride}`,
    );
  }
  checkFinite(name, buffer);
  return buffer.length / stride;
}

export function checkScalar(name: string, value: number): number {
  if (!Number.isFinite(value)) {
    throw new BindingsValidationError(`${name} must be finite, got ${value}`);
  }
  return value;
}

export function checkSameLength(entries: Array<[string, number]>): void {
  const [, first] = entries[0];
  for (const [name, length] of entries) {
    if (length !== first) {
      throw new BindingsValidationError(
        `parallel arrays disagree on length: ${entries[0][0]}=${first} but ${name}=${length}`,
      );
    }
  }
}
