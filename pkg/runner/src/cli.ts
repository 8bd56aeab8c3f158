#!/usr/bin/env node
/**
 * CLI wrapper: `sandbox-runner <candidate-file> --timeout S --memory-mb M`.
 *
 * Always prints exactly one JSON verdict line on stdout. The exit status is
 * nonzero only when the runner itself cannot operate (bad arguments or an
 * unreadable file); candidate failures are reported inside the verdict.
 */

import { accessSync, constants } from "node:fs";
import { runCandidate } from "./runner";

interface CliArgs {
  file: string;
  timeoutSeconds: number;
  memoryMb: number;
}

function usage(message: string): never {
  process.stderr.write(
    `error: ${message}\nusage: sandbox-runner <candidate-file> [--timeout S] [--memory-mb M]\n`
  );
  process.exit(2);
}

function parseArgs(argv: string[]): CliArgs {
  let file: string | null = null;
  let timeoutSeconds = 5;
  let memoryMb = 512;
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    if (arg === "--timeout") {
      timeoutSeconds = Number(argv[++i]);
    } else if (arg === "--memory-mb") {
      memoryMb = Number(argv[++i]);
    } else if (arg.startsWith("--")) {
      usage(`unknown option ${arg}`);
    } else if (file === null) {
      file = arg;
    } else {
      usage(`unexpected argument ${arg}`);
    }
  }
  if (file === null) {
    usage("missing candidate file");
  }
  if (!Number.isFinite(timeoutSeconds) || timeoutSeconds <= 0) {
    usage("--timeout must be a positive number");
  }
  if (!Number.isInteger(memoryMb) || memoryMb <= 0) {
    usage("--memory-mb must be a positive integer");
  }
  return { file, timeoutSeconds, memoryMb };
}

async function main(): Promise<number> {
  const args = parseArgs(process.argv.slice(2));
  try {
    accessSync(args.file, constants.R_OK);
  } catch {
    process.stderr.write(`error: cannot read candidate file ${args.file}\n`);
    return 2;
  }
  const verdict = await runCandidate(args.file, {
    timeoutSeconds: args.timeoutSeconds,
    memoryMb: args.memoryMb,
  });
  process.stdout.write(JSON.stringify(verdict) + "\n");
  return 0;
}

main().then(
  (code) => process.exit(code),
  (error) => {
    process.stderr.write(`error: runner failed: ${error}\n`);
    process.exit(1);
  }
);
