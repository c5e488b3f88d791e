/**
 * Invocation of the primary component's CLI.
 *
 * Every bound operation is a direct call into that CLI, so behavior and
 * diagnostics are the primary implementation's, never a reimplementation.
 */

import { spawnSync } from "node:child_process";
import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";

/** Nonzero CLI exit, carrying the CLI's own diagnostic text. */
export class LaptCliError extends Error {
  constructor(
    readonly exitCode: number,
    readonly diagnostic: string,
    args: readonly string[],
  ) {
    super(`lapt ${args[0]} failed (exit ${exitCode}): ${diagnostic}`);
    this.name = "LaptCliError";
  }
}

export interface RunOptions {
  /** Python interpreter exposing the `lapt` module (default: $LAPT_PYTHON or python3). */
  python?: string;
}

export function runLapt(args: readonly string[], opts: RunOptions = {}): string {
  const python = opts.python ?? process.env.LAPT_PYTHON ?? "python3";
  const result = spawnSync(python, ["-m", "lapt", ...args], {
    encoding: "utf8",
    maxBuffer: 256 * 1024 * 1024,
  });
  if (result.error) {
    throw result.error;
  }
  if (result.status !== 0) {
    throw new LaptCliError(result.status ?? -1, result.stderr.trim(), args);
  }
  return result.stdout;
}

/** Run `fn` with a private scratch directory, removed afterwards. */
export function withScratchDir<T>(fn: (dir: string) => T): T {
  const dir = fs.mkdtempSync(path.join(os.tmpdir(), "lapt-bindings-"));
  try {
    return fn(dir);
  } finally {
    fs.rmSync(dir, { recursive: true, force: true });
  }
}
