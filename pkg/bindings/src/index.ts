/**
 * Bound operations of the LiDAR-to-BEV pipeline for Node-based ML tooling.
 *
 * Arrays cross the boundary through the shared tensor container; results
 * come back as typed-array views (zero-copy where alignment permits).
 * Validation failures raise LaptCliError carrying the CLI's diagnostic.
 */

import * as fs from "node:fs";
import * as path from "node:path";

import { runLapt, withScratchDir, LaptCliError, RunOptions } from "./runner.js";
import { readTensor, writeTensor, Tensor } from "./tensor.js";

export { LaptCliError, runLapt, RunOptions } from "./runner.js";
export {
  decodeTensor,
  encodeTensor,
  readTensor,
  writeTensor,
  tensor,
  Tensor,
  TensorData,
  Dtype,
  MAGIC,
} from "./tensor.js";

/** Metric extent and resolution of the BEV grid, vehicle frame. */
export interface GridSpec {
  xMin: number;
  xMax: number;
  yMin: number;
  yMax: number;
  cell: number;
}

/** A JSON document: passed through to the CLI verbatim. */
export type JsonDoc = Record<string, unknown>;

function gridArgs(grid: GridSpec): string[] {
  return [
    `--grid-extent=${grid.xMin},${grid.xMax},${grid.yMin},${grid.yMax}`,
    "--grid-cell",
    String(grid.cell),
  ];
}

function materialize(
  dir: string,
  name: string,
  value: Tensor | JsonDoc | string,
): string {
  if (typeof value === "string") {
    return value; // already a path
  }
  const file = path.join(dir, name);
  if ("dtype" in value && "data" in value) {
    writeTensor(file, value as Tensor);
  } else {
    fs.writeFileSync(file, JSON.stringify(value));
  }
  return file;
}

function cameraNames(calib: JsonDoc | string): string[] {
  const doc: JsonDoc =
    typeof calib === "string" ? JSON.parse(fs.readFileSync(calib, "utf8")) : calib;
  const cams = doc.cameras as Array<{ name: string }>;
  return cams.map((c) => c.name);
}

/** Min-pool a full-resolution depth tensor by a factor of df. */
export function minpool(depth: Tensor | string, df: number, opts: RunOptions = {}): Tensor {
  return withScratchDir((dir) => {
    const depthPath = materialize(dir, "depth.tens", depth);
    const out = path.join(dir, "out");
    runLapt(["depth", "--depth-image", depthPath, "--df", String(df), "--out", out], opts);
    return readTensor(path.join(out, "lowres.tens"));
  });
}

export interface DepthRasterResult {
  /** Full-resolution z-buffered depth per camera. */
  depth: Record<string, Tensor>;
  /** Min-pooled depth per camera. */
  lowres: Record<string, Tensor>;
}

/** Z-buffer a LiDAR cloud into per-camera depth images and min-pool them. */
export function depthRaster(
  args: { calib: JsonDoc | string; cloud: Tensor | string; df: number },
  opts: RunOptions = {},
): DepthRasterResult {
  return withScratchDir((dir) => {
    const calibPath = materialize(dir, "calib.json", args.calib);
    const cloudPath = materialize(dir, "cloud.tens", args.cloud);
    const out = path.join(dir, "out");
    runLapt(
      ["depth", "--calib", calibPath, "--cloud", cloudPath, "--df", String(args.df), "--out", out],
      opts,
    );
    const result: DepthRasterResult = { depth: {}, lowres: {} };
    for (const name of cameraNames(args.calib)) {
      result.depth[name] = readTensor(path.join(out, `depth_${name}.tens`));
      result.lowres[name] = readTensor(path.join(out, `lowres_${name}.tens`));
    }
    return result;
  });
}

export interface BuildBevResult {
  /** (n_f, X, Y) float32 BEV feature grid. */
  grid: Tensor;
  /** (X, Y) uint8 occupancy readout, when a threshold was given. */
  occupancy?: Tensor;
}

/** Project per-camera feature tensors into a vehicle-frame BEV grid. */
export function buildBev(
  args: {
    calib: JsonDoc | string;
    cloud: Tensor | string;
    features: Record<string, Tensor | string>;
    df: number;
    grid: GridSpec;
    threshold?: number;
  },
  opts: RunOptions = {},
): BuildBevResult {
  return withScratchDir((dir) => {
    const calibPath = materialize(dir, "calib.json", args.calib);
    const cloudPath = materialize(dir, "cloud.tens", args.cloud);
    const out = path.join(dir, "out");
    const cli = [
      "bev",
      "--calib",
      calibPath,
      "--cloud",
      cloudPath,
      "--df",
      String(args.df),
      ...gridArgs(args.grid),
      "--out",
      out,
    ];
    for (const [name, value] of Object.entries(args.features)) {
      cli.push("--features", `${name}=${materialize(dir, `features_${name}.tens`, value)}`);
    }
    if (args.threshold !== undefined) {
      cli.push("--threshold", String(args.threshold));
    }
    runLapt(cli, opts);
    const result: BuildBevResult = { grid: readTensor(path.join(out, "bev.tens")) };
    if (args.threshold !== undefined) {
      result.occupancy = readTensor(path.join(out, "occupancy.tens"));
    }
    return result;
  });
}

export interface RasterizeGtResult {
  classes: string[];
  /** (C, X, Y) uint8 binary grid, one layer per target class. */
  grid: Tensor;
}

/** Rasterize box/polygon annotations into binary per-class BEV layers. */
export function rasterizeGt(
  args: {
    annotations: JsonDoc | string;
    classes?: JsonDoc | string;
    grid: GridSpec;
  },
  opts: RunOptions = {},
): RasterizeGtResult {
  return withScratchDir((dir) => {
    const annPath = materialize(dir, "annotations.json", args.annotations);
    const out = path.join(dir, "out");
    const cli = ["gt", annPath, ...gridArgs(args.grid), "--out", out];
    if (args.classes !== undefined) {
      cli.push("--classes", materialize(dir, "classes.json", args.classes));
    }
    runLapt(cli, opts);
    const sidecar = JSON.parse(fs.readFileSync(path.join(out, "gt.json"), "utf8"));
    return { classes: sidecar.classes, grid: readTensor(path.join(out, "gt.tens")) };
  });
}

interface ClassScoreDoc {
  iou: number | null;
  intersection: number;
  union: number;
  pred_positive: number;
  gt_positive: number;
}

export interface EvalReportDoc {
  threshold: number;
  classes: Record<string, ClassScoreDoc>;
  pos_weight?: number;
  loss?: number;
}

function runEval(
  pred: Tensor | string,
  gt: Tensor | string,
  extra: string[],
  opts: RunOptions,
): EvalReportDoc {
  return withScratchDir((dir) => {
    const predPath = materialize(dir, "pred.tens", pred);
    const gtPath = materialize(dir, "gt.tens", gt);
    const reportPath = path.join(dir, "report.json");
    runLapt(["eval", predPath, gtPath, "--out", reportPath, ...extra], opts);
    return JSON.parse(fs.readFileSync(reportPath, "utf8"));
  });
}

/**
 * Intersection-over-union of two binary grids.
 * Returns null when the union is empty (undefined, distinct from 0).
 */
export function iou(pred: Tensor | string, gt: Tensor | string, opts: RunOptions = {}): number | null {
  const report = runEval(pred, gt, [], opts);
  const scores = Object.values(report.classes);
  if (scores.length !== 1 || scores[0] === undefined) {
    throw new Error(`expected a single-class report, got ${scores.length} classes`);
  }
  return scores[0].iou;
}

/** Mean weighted binary cross-entropy of a logit grid against binary targets. */
export function bceLoss(
  logits: Tensor | string,
  gt: Tensor | string,
  posWeight = 2.13,
  opts: RunOptions = {},
): number {
  const report = runEval(logits, gt, ["--logits", "--pos-weight", String(posWeight)], opts);
  if (report.loss === undefined) {
    throw new Error("eval report carries no loss");
  }
  return report.loss;
}

/** Full per-class evaluation report for multi-class grids. */
export function evalGrids(
  pred: Tensor | string,
  gt: Tensor | string,
  options: { threshold?: number; logits?: boolean; posWeight?: number } = {},
  opts: RunOptions = {},
): EvalReportDoc {
  const extra: string[] = [];
  if (options.threshold !== undefined) {
    extra.push("--threshold", String(options.threshold));
  }
  if (options.logits) {
    extra.push("--logits");
  }
  if (options.posWeight !== undefined) {
    extra.push("--pos-weight", String(options.posWeight));
  }
  return runEval(pred, gt, extra, opts);
}
