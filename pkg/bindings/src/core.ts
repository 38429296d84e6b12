import { spawnSync } from "node:child_process";

/** Error surfaced from the core process, carrying its error type and message. */
export class CoreError extends Error {
  readonly coreType: string;

  constructor(coreType: string, message: string) {
    super(message);
    this.name = "CoreError";
    this.coreType = coreType;
  }
}

let kernelCalls = 0;

/** Number of kernel-process invocations so far (used by tests to prove guards short-circuit). */
export function kernelCallCount(): number {
  return kernelCalls;
}

function pythonExecutable(): string {
  return process.env.ROTBOX_PYTHON ?? "python3";
}

interface KernelResponse {
  ok: boolean;
  result?: unknown;
  error?: { type: string; message: string };
}

/**
 * Run one versioned kernel op in the core process.
 *
 * The request travels as a single JSON document on stdin and the response
 * comes back on stdout; numbers survive the trip bit-exactly because both
 * sides print shortest-round-trip doubles.
 */
export function runKernel<T>(op: string, payload: Record<string, unknown>): T {
  kernelCalls += 1;
  const proc = spawnSync(pythonExecutable(), ["-m", "rotbox", "kernel"], {
    input: JSON.stringify({ op, ...payload }),
    encoding: "utf8",
    maxBuffer: 256 * 1024 * 1024,
  });
  if (proc.error) {
    throw new CoreError("SpawnError", `cannot start core process: ${proc.error.message}`);
  }
  let response: KernelResponse;
  try {
    response = JSON.parse(proc.stdout) as KernelResponse;
  } catch {
    throw new CoreError(
      "ProtocolError",
      `core produced no parseable response (status ${proc.status}): ${proc.stderr.slice(0, 500)}`,
    );
  }
  if (!response.ok || response.result === undefined) {
    const err = response.error ?? { type: "UnknownError", message: "missing error detail" };
    throw new CoreError(err.type, err.message);
  }
  return response.result as T;
}
