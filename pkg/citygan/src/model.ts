/**
 * Mirrored convolutional generator / discriminator builders.
 *
 * The generator projects noise to an 8x8 feature map and upsamples with
 * stride-2 transposed convolutions (batch norm + ReLU between blocks) down
 * to a single tanh channel; the discriminator mirrors it with stride-2
 * convolutions and leaky ReLU into one sigmoid unit. Depth scales with the
 * scene side; every initializer is seeded so builds are reproducible.
 */

import * as tf from "@tensorflow/tfjs";
import type { GanConfig } from "./config.js";

const BASE_SIDE = 8;
const BASE_CHANNELS = 2; // channel budget is deliberately lean: training runs on a JS backend

export function upsampleBlocks(imageSize: number): number {
  return Math.round(Math.log2(imageSize / BASE_SIDE));
}

function init(seed: number) {
  return tf.initializers.glorotUniform({ seed });
}

export function buildGenerator(config: GanConfig): tf.Sequential {
  const blocks = upsampleBlocks(config.imageSize);
  const projChannels = BASE_CHANNELS << blocks;
  const g = tf.sequential({ name: "generator" });
  g.add(tf.layers.dense({
    inputShape: [config.noiseDim],
    units: BASE_SIDE * BASE_SIDE * projChannels,
    kernelInitializer: init(config.seed + 1),
    useBias: false,
  }));
  g.add(tf.layers.batchNormalization({}));
  g.add(tf.layers.activation({ activation: "relu" }));
  g.add(tf.layers.reshape({ targetShape: [BASE_SIDE, BASE_SIDE, projChannels] }));
  for (let b = 1; b < blocks; b++) {
    g.add(tf.layers.conv2dTranspose({
      filters: projChannels >> b,
      kernelSize: 4,
      strides: 2,
      padding: "same",
      useBias: false,
      kernelInitializer: init(config.seed + 10 + b),
    }));
    g.add(tf.layers.batchNormalization({}));
    g.add(tf.layers.activation({ activation: "relu" }));
  }
  g.add(tf.layers.conv2dTranspose({
    filters: 1,
    kernelSize: 4,
    strides: 2,
    padding: "same",
    activation: "tanh",
    kernelInitializer: init(config.seed + 99),
  }));
  return g;
}

export function buildDiscriminator(config: GanConfig): tf.Sequential {
  const blocks = upsampleBlocks(config.imageSize);
  const d = tf.sequential({ name: "discriminator" });
  for (let b = 0; b < blocks; b++) {
    d.add(tf.layers.conv2d({
      ...(b === 0 ? { inputShape: [config.imageSize, config.imageSize, 1] } : {}),
      filters: BASE_CHANNELS << b,
      kernelSize: 4,
      strides: 2,
      padding: "same",
      kernelInitializer: init(config.seed + 200 + b),
    }));
    d.add(tf.layers.leakyReLU({ alpha: 0.2 }));
  }
  d.add(tf.layers.flatten());
  d.add(tf.layers.dense({
    units: 1,
    activation: "sigmoid",
    kernelInitializer: init(config.seed + 299),
  }));
  return d;
}

export interface Checkpoint {
  config: GanConfig;
  generator: SerializedWeights;
  discriminator: SerializedWeights;
  step: number;
}

interface SerializedWeights {
  shapes: number[][];
  /** base64-encoded little-endian float32 buffers, one per weight tensor */
  data: string[];
}

function serializeWeights(model: tf.Sequential): SerializedWeights {
  const shapes: number[][] = [];
  const data: string[] = [];
  for (const weight of model.getWeights()) {
    shapes.push(weight.shape.slice());
    const values = weight.dataSync() as Float32Array;
    data.push(Buffer.from(values.buffer, values.byteOffset, values.byteLength).toString("base64"));
  }
  return { shapes, data };
}

function restoreWeights(model: tf.Sequential, saved: SerializedWeights): void {
  const tensors = saved.data.map((b64, i) => {
    const buf = Buffer.from(b64, "base64");
    const values = new Float32Array(buf.buffer, buf.byteOffset, buf.byteLength / 4);
    return tf.tensor(Array.from(values), saved.shapes[i]);
  });
  model.setWeights(tensors);
  tensors.forEach((t) => t.dispose());
}

export function checkpointFromModels(
  config: GanConfig, generator: tf.Sequential, discriminator: tf.Sequential, step: number,
): Checkpoint {
  return {
    config,
    generator: serializeWeights(generator),
    discriminator: serializeWeights(discriminator),
    step,
  };
}

export function modelsFromCheckpoint(checkpoint: Checkpoint): {
  generator: tf.Sequential; discriminator: tf.Sequential;
} {
  const generator = buildGenerator(checkpoint.config);
  const discriminator = buildDiscriminator(checkpoint.config);
  restoreWeights(generator, checkpoint.generator);
  restoreWeights(discriminator, checkpoint.discriminator);
  return { generator, discriminator };
}
