/**
 * Executes one Python candidate file in a fresh interpreter process with
 * CPU-time and address-space limits, classifies the terminal exception by
 * name, and reports a structured verdict.
 *
 * Limits are applied through `ulimit` in a wrapping shell: -v caps the
 * address space (allocation beyond it surfaces as MemoryError inside the
 * candidate), -t caps CPU seconds as a backstop behind the wall-clock kill.
 * Network access is not blocked; that is a documented residual risk.
 */

import { spawn } from "node:child_process";

export type RunStatus = "ok" | "error" | "timeout";

export interface RunVerdict {
  status: RunStatus;
  error_kind: string | null;
  stderr_tail: string;
  duration_ms: number;
}

const STDERR_TAIL_BYTES = 2000;
const STDERR_CAP_BYTES = 256 * 1024;

const EXCEPTION_LINE = /^([A-Za-z_][A-Za-z0-9_.]*?)(?::|$)/;

/** Exception class name from the last non-empty stderr line, or "Other". */
export function classifyErrorKind(stderr: string): string {
  const lines = stderr.split("\n");
  for (let i = lines.length - 1; i >= 0; i--) {
    const line = lines[i].trim();
    if (!line) {
      continue;
    }
    const match = EXCEPTION_LINE.exec(line);
    if (match) {
      const name = match[1];
      const leaf = name.split(".").pop() ?? name;
      if (
        leaf.endsWith("Error") ||
        leaf.endsWith("Exception") ||
        leaf === "KeyboardInterrupt" ||
        leaf === "SystemExit" ||
        leaf === "StopIteration"
      ) {
        return leaf;
      }
    }
    break;
  }
  return "Other";
}

export interface RunOptions {
  timeoutSeconds: number;
  memoryMb: number;
  pythonBin?: string;
}

export function runCandidate(file: string, options: RunOptions): Promise<RunVerdict> {
  const python = options.pythonBin ?? "python3";
  const cpuSeconds = Math.max(1, Math.ceil(options.timeoutSeconds) + 1);
  const memoryKb = options.memoryMb * 1024;
  // exec keeps the python process as the shell's pid, so the kill lands on it.
  const script =
    `ulimit -t ${cpuSeconds} 2>/dev/null; ` +
    `ulimit -v ${memoryKb} 2>/dev/null; ` +
    `exec ${python} "$0"`;

  return new Promise((resolve, reject) => {
    const started = process.hrtime.bigint();
    const child = spawn("bash", ["-c", script, file], {
      stdio: ["ignore", "ignore", "pipe"],
    });

    const stderrChunks: Buffer[] = [];
    let stderrBytes = 0;
    child.stderr.on("data", (chunk: Buffer) => {
      if (stderrBytes < STDERR_CAP_BYTES) {
        stderrChunks.push(chunk);
        stderrBytes += chunk.length;
      }
    });

    let timedOut = false;
    const killer = setTimeout(() => {
      timedOut = true;
      child.kill("SIGKILL");
    }, options.timeoutSeconds * 1000);

    child.on("error", (error) => {
      clearTimeout(killer);
      reject(error);
    });

    child.on("close", (code) => {
      clearTimeout(killer);
      const durationMs = Number(process.hrtime.bigint() - started) / 1e6;
      const stderr = Buffer.concat(stderrChunks);
      const tail = stderr.subarray(-STDERR_TAIL_BYTES).toString("utf-8");
      if (timedOut) {
        resolve({
          status: "timeout",
          error_kind: null,
          stderr_tail: tail,
          duration_ms: durationMs,
        });
      } else if (code === 0) {
        resolve({ status: "ok", error_kind: null, stderr_tail: "", duration_ms: durationMs });
      } else {
        resolve({
          status: "error",
          error_kind: classifyErrorKind(stderr.toString("utf-8")),
          stderr_tail: tail,
          duration_ms: durationMs,
        });
      }
    });
  });
}
