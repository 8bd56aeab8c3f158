import { execFileSync } from "node:child_process";
import { mkdtempSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, describe, expect, it } from "vitest";

import { classifyErrorKind, runCandidate, RunVerdict } from "../src/runner";

const workDir = mkdtempSync(join(tmpdir(), "sandbox-runner-"));
afterAll(() => rmSync(workDir, { recursive: true, force: true }));

let fileCounter = 0;
function candidate(source: string): string {
  const path = join(workDir, `candidate_${fileCounter++}.py`);
  writeFileSync(path, source);
  return path;
}

function run(source: string, timeoutSeconds = 5, memoryMb = 512): Promise<RunVerdict> {
  return runCandidate(candidate(source), { timeoutSeconds, memoryMb });
}

describe("classifyErrorKind", () => {
  it("takes the exception name from the last stderr line", () => {
    const stderr = 'Traceback (most recent call last):\n  ...\nNameError: name "x" is not defined\n';
    expect(classifyErrorKind(stderr)).toBe("NameError");
  });

  it("unwraps dotted exception paths", () => {
    expect(classifyErrorKind("json.decoder.JSONDecodeError: oops")).toBe("JSONDecodeError");
  });

  it("falls back to Other for unrecognized output", () => {
    expect(classifyErrorKind("killed\n")).toBe("Other");
    expect(classifyErrorKind("")).toBe("Other");
  });
});

describe("runCandidate", () => {
  it("reports ok for a clean program", async () => {
    const verdict = await run("x = 1\n");
    expect(verdict.status).toBe("ok");
    expect(verdict.error_kind).toBeNull();
    expect(verdict.duration_ms).toBeGreaterThan(0);
  });

  it.each([
    ["assert 1 == 2", "AssertionError"],
    ["print(undefined_variable)", "NameError"],
    ["len(1)", "TypeError"],
    ["def f(:", "SyntaxError"],
    ["  x = 1", "IndentationError"],
  ])("classifies %s as %s", async (program, expected) => {
    const verdict = await run(program + "\n");
    expect(verdict.status).toBe("error");
    expect(verdict.error_kind).toBe(expected);
  });

  it("times out a busy loop at the budget", async () => {
    const verdict = await run("while True: pass\n", 1);
    expect(verdict.status).toBe("timeout");
    expect(verdict.error_kind).toBeNull();
    expect(verdict.duration_ms).toBeGreaterThanOrEqual(1000);
    expect(verdict.duration_ms).toBeLessThan(2000);
  });

  it("kills runaway allocation under the memory limit", async () => {
    const verdict = await run(
      "blocks = []\nwhile True:\n    blocks.append(bytearray(16 * 1024 * 1024))\n",
      10,
      192
    );
    expect(verdict.status).toBe("error");
    expect(verdict.error_kind).toBe("MemoryError");
  }, 15000);

  it("caps stderr_tail at 2000 bytes", async () => {
    const verdict = await run('import sys\nsys.stderr.write("x" * 10000)\nraise ValueError("boom")\n');
    expect(verdict.status).toBe("error");
    expect(Buffer.byteLength(verdict.stderr_tail, "utf-8")).toBeLessThanOrEqual(2000);
  });
});

describe("cli", () => {
  it("prints exactly one JSON verdict line", () => {
    const out = execFileSync("node", [join(__dirname, "..", "dist", "cli.js"),
      candidate("x = 1\n"), "--timeout", "5", "--memory-mb", "256"]).toString();
    const lines = out.trim().split("\n");
    expect(lines).toHaveLength(1);
    const verdict = JSON.parse(lines[0]);
    expect(verdict.status).toBe("ok");
  });

  it("exits nonzero for an unreadable file", () => {
    expect(() =>
      execFileSync("node", [join(__dirname, "..", "dist", "cli.js"), "/no/such/file.py"])
    ).toThrow();
  });
});
