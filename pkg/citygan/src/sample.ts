/**
 * Checkpoint sampling: latent noise -> generator -> thresholded binary grids
 * in the shared ASCII format.
 */

import * as fs from "node:fs";
import * as path from "node:path";
import * as tf from "@tensorflow/tfjs";

import type { GanConfig } from "./config.js";
import type { BinaryGrid } from "./grid.js";
import { writeAsciiGrid } from "./grid.js";
import { Checkpoint, modelsFromCheckpoint } from "./model.js";

/** Map tanh output in [-1, 1] to {0, 1} at the given occupancy threshold. */
export function binarize(batch: tf.Tensor4D, threshold: number, config: GanConfig): BinaryGrid[] {
  const [count, height, width] = [batch.shape[0], batch.shape[1], batch.shape[2]];
  const values = batch.dataSync() as Float32Array;
  const grids: BinaryGrid[] = [];
  for (let i = 0; i < count; i++) {
    const cells = new Uint8Array(width * height);
    for (let j = 0; j < width * height; j++) {
      const p = (values[i * width * height + j] + 1) / 2;
      cells[j] = p >= threshold ? 1 : 0;
    }
    grids.push({ width, height, cellSize: config.cellSize, cells });
  }
  return grids;
}

export function loadCheckpoint(filePath: string): Checkpoint {
  let doc: Checkpoint;
  try {
    doc = JSON.parse(fs.readFileSync(filePath, "utf-8"));
  } catch (err) {
    throw new Error(`corrupt checkpoint ${filePath}: ${(err as Error).message}`);
  }
  if (!doc.config || !doc.generator || !doc.discriminator) {
    throw new Error(`corrupt checkpoint ${filePath}: missing sections`);
  }
  return doc;
}

export interface SampleOptions {
  count: number;
  seed: number;
  threshold?: number;
  outDir: string;
  batch?: number;
}

/** Draw `count` scenes from a checkpoint; returns the written file paths. */
export function sampleToDirectory(checkpoint: Checkpoint, options: SampleOptions): string[] {
  const threshold = options.threshold ?? 0.5;
  if (!(threshold > 0 && threshold < 1)) {
    throw new Error(`threshold must be in (0, 1), got ${threshold}`);
  }
  const { generator } = modelsFromCheckpoint(checkpoint);
  const config = checkpoint.config;
  const batchSize = options.batch ?? 50;
  fs.mkdirSync(options.outDir, { recursive: true });
  const written: string[] = [];
  let produced = 0;
  let batchIndex = 0;
  while (produced < options.count) {
    const take = Math.min(batchSize, options.count - produced);
    // batch-statistics mode: at toy scale the batch-norm moving averages lag
    // the live statistics badly, so sampling uses the same normalization the
    // generator trained under (still deterministic for a fixed seed/batching)
    const out = tf.tidy(() => {
      const z = tf.randomNormal(
        [take, config.noiseDim], 0, 1, "float32", options.seed + batchIndex,
      );
      return generator.apply(z, { training: true }) as tf.Tensor4D;
    });
    const grids = binarize(out, threshold, config);
    out.dispose();
    for (const grid of grids) {
      const name = `scene_${String(produced).padStart(4, "0")}.asc`;
      const filePath = path.join(options.outDir, name);
      writeAsciiGrid(filePath, grid);
      written.push(filePath);
      produced += 1;
    }
    batchIndex += 1;
  }
  generator.dispose();
  return written;
}
