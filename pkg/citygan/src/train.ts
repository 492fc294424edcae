/**
 * Adversarial training loop.
 *
 * Discriminator and generator alternate one Adam step per batch. The
 * discriminator minimizes
 *     -( mean log D(real) + mean log(1 - D(G(z))) )
 * and the generator minimizes the literal
 *        mean log(1 - D(G(z)))
 * (or -mean log D(G(z)) when `nonSaturating` is set). Probabilities are
 * clipped to [1e-7, 1 - 1e-7] before the logs, in training and in any
 * recomputation meant to match the logged values.
 */

import * as fs from "node:fs";
import * as path from "node:path";
import * as tf from "@tensorflow/tfjs";

import type { GanConfig } from "./config.js";
import { listGridFiles, readAsciiGrid, resizeGrid, writeAsciiGrid } from "./grid.js";
import { buildDiscriminator, buildGenerator, checkpointFromModels } from "./model.js";
import { binarize } from "./sample.js";

const EPS = 1e-7;

export interface StepLog {
  step: number;
  lossD: number;
  lossG: number;
}

export interface StepDiagnostics {
  /** D outputs on the step's real and fake batches, straight from training. */
  realProbs: number[];
  fakeProbs: number[];
  lossD: number;
}

export interface TrainResult {
  log: StepLog[];
  firstStep: StepDiagnostics;
  checkpointPath: string;
  datasetSize: number;
}

/** Deterministic 32-bit PRNG for shuffling (Mulberry32). */
export function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

function shuffled(n: number, rand: () => number): number[] {
  const order = Array.from({ length: n }, (_, i) => i);
  for (let i = n - 1; i > 0; i--) {
    const j = Math.floor(rand() * (i + 1));
    [order[i], order[j]] = [order[j], order[i]];
  }
  return order;
}

export function loadTrainingTensors(config: GanConfig): tf.Tensor4D {
  const files = listGridFiles(config.rasterDir);
  if (files.length < config.batchSize) {
    throw new Error(
      `need at least batchSize=${config.batchSize} rasters in ${config.rasterDir}, ` +
      `found ${files.length}`,
    );
  }
  const side = config.imageSize;
  const data = new Float32Array(files.length * side * side);
  files.forEach((file, index) => {
    const grid = resizeGrid(readAsciiGrid(file), side);
    for (let i = 0; i < side * side; i++) {
      data[index * side * side + i] = grid.cells[i] * 2 - 1; // {0,1} -> [-1,1]
    }
  });
  return tf.tensor4d(data, [files.length, side, side, 1]);
}

export function discriminatorLossFromProbs(realProbs: number[], fakeProbs: number[]): number {
  const meanLog = (values: number[], transform: (v: number) => number) =>
    values.reduce((acc, v) => acc + Math.log(transform(clip(v))), 0) / values.length;
  return -(meanLog(realProbs, (v) => v) + meanLog(fakeProbs, (v) => 1 - v));
}

function clip(v: number): number {
  return Math.min(1 - EPS, Math.max(EPS, v));
}

export async function train(config: GanConfig, dataset?: tf.Tensor4D): Promise<TrainResult> {
  const data = dataset ?? loadTrainingTensors(config);
  const n = data.shape[0];
  const generator = buildGenerator(config);
  const discriminator = buildDiscriminator(config);
  const optD = tf.train.adam(config.learningRate, 0.5);
  const optG = tf.train.adam(config.learningRate, 0.5);
  const dVars = discriminator.trainableWeights.map((w) => (w as any).val as tf.Variable);
  const gVars = generator.trainableWeights.map((w) => (w as any).val as tf.Variable);
  const rand = mulberry32(config.seed ^ 0x5eed);

  const log: StepLog[] = [];
  let firstStep: StepDiagnostics | null = null;
  let step = 0;

  for (let epoch = 0; epoch < config.epochs; epoch++) {
    const order = shuffled(n, rand);
    for (let start = 0; start + config.batchSize <= n; start += config.batchSize) {
      const idx = order.slice(start, start + config.batchSize);
      const real = tf.tidy(() => tf.gather(data, idx));
      const zSeedD = config.seed + step * 2 + 1;
      const zSeedG = config.seed + step * 2 + 2;

      const fake = tf.tidy(() =>
        generator.apply(
          tf.randomNormal([config.batchSize, config.noiseDim], 0, 1, "float32", zSeedD),
          { training: true },
        ) as tf.Tensor4D,
      );

      let realProbsT: tf.Tensor | null = null;
      let fakeProbsT: tf.Tensor | null = null;
      const lossD = optD.minimize(
        () =>
          tf.tidy(() => {
            const pReal = (discriminator.apply(real, { training: true }) as tf.Tensor)
              .clipByValue(EPS, 1 - EPS);
            const pFake = (discriminator.apply(fake, { training: true }) as tf.Tensor)
              .clipByValue(EPS, 1 - EPS);
            realProbsT = tf.keep(pReal.clone());
            fakeProbsT = tf.keep(pFake.clone());
            return tf.neg(
              tf.add(tf.mean(tf.log(pReal)), tf.mean(tf.log(tf.sub(1, pFake)))),
            ) as tf.Scalar;
          }),
        true,
        dVars,
      )!;

      const lossG = optG.minimize(
        () =>
          tf.tidy(() => {
            const z = tf.randomNormal([config.batchSize, config.noiseDim], 0, 1, "float32", zSeedG);
            const probs = (discriminator.apply(
              generator.apply(z, { training: true }),
              { training: true },
            ) as tf.Tensor).clipByValue(EPS, 1 - EPS);
            if (config.nonSaturating) {
              return tf.neg(tf.mean(tf.log(probs))) as tf.Scalar;
            }
            return tf.mean(tf.log(tf.sub(1, probs))) as tf.Scalar;
          }),
        true,
        gVars,
      )!;

      const lossDValue = lossD.dataSync()[0];
      const lossGValue = lossG.dataSync()[0];
      if (!Number.isFinite(lossDValue) || !Number.isFinite(lossGValue)) {
        throw new Error(`non-finite loss at step ${step}: D=${lossDValue} G=${lossGValue}`);
      }
      log.push({ step, lossD: lossDValue, lossG: lossGValue });
      if (firstStep === null) {
        firstStep = {
          realProbs: Array.from((realProbsT! as tf.Tensor).dataSync()),
          fakeProbs: Array.from((fakeProbsT! as tf.Tensor).dataSync()),
          lossD: lossDValue,
        };
      }
      (realProbsT! as tf.Tensor).dispose();
      (fakeProbsT! as tf.Tensor).dispose();
      lossD.dispose();
      lossG.dispose();
      real.dispose();
      fake.dispose();
      step += 1;
      // the backend computes synchronously; yield so hosts (loggers, test
      // runners) keep servicing their event loop between steps
      await new Promise<void>((resolve) => setImmediate(resolve));
    }

    if (config.sampleEvery > 0 && (epoch + 1) % config.sampleEvery === 0) {
      writeEpochSample(config, generator, epoch + 1);
    }
  }

  fs.mkdirSync(config.outDir, { recursive: true });
  const checkpointPath = path.join(config.outDir, "checkpoint.json");
  fs.writeFileSync(
    checkpointPath,
    JSON.stringify(checkpointFromModels(config, generator, discriminator, step)),
  );
  const logPath = path.join(config.outDir, "loss_log.csv");
  fs.writeFileSync(
    logPath,
    "step,loss_d,loss_g\n" +
      log.map((row) => `${row.step},${row.lossD},${row.lossG}`).join("\n") + "\n",
  );
  if (dataset === undefined) data.dispose();
  return { log, firstStep: firstStep!, checkpointPath, datasetSize: n };
}

function writeEpochSample(config: GanConfig, generator: tf.Sequential, epoch: number): void {
  const out = tf.tidy(() => {
    const z = tf.randomNormal([1, config.noiseDim], 0, 1, "float32", config.seed + 7_000_000 + epoch);
    return generator.apply(z, { training: true }) as tf.Tensor4D;
  });
  const grid = binarize(out, 0.5, config)[0];
  out.dispose();
  writeAsciiGrid(path.join(config.outDir, `epoch_${String(epoch).padStart(4, "0")}.asc`), grid);
}
