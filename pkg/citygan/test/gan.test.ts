import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";
import * as tf from "@tensorflow/tfjs";
import { afterEach, beforeEach, describe, expect, it } from "vitest";

import { DEFAULT_CONFIG, GanConfig, validateConfig } from "../src/config.js";
import { readAsciiGrid } from "../src/grid.js";
import { buildDiscriminator, buildGenerator } from "../src/model.js";
import { binarize, loadCheckpoint, sampleToDirectory } from "../src/sample.js";
import { discriminatorLossFromProbs, train } from "../src/train.js";

let dir: string;

beforeEach(() => {
  dir = fs.mkdtempSync(path.join(os.tmpdir(), "gan-"));
});

afterEach(() => {
  fs.rmSync(dir, { recursive: true, force: true });
});

function blobDataset(count: number, side: number, radius: number): tf.Tensor4D {
  const data = new Float32Array(count * side * side);
  const mid = side / 2;
  for (let i = 0; i < count; i++)
    for (let r = 0; r < side; r++)
      for (let c = 0; c < side; c++) {
        const inside = (r - mid) ** 2 + (c - mid) ** 2 < radius ** 2;
        data[i * side * side + r * side + c] = (inside ? 1 : 0) * 2 - 1;
      }
  return tf.tensor4d(data, [count, side, side, 1]);
}

function smokeConfig(overrides: Partial<GanConfig> = {}): GanConfig {
  return validateConfig({
    ...DEFAULT_CONFIG,
    imageSize: 32,
    epochs: 1,
    seed: 11,
    outDir: path.join(dir, "out"),
    ...overrides,
  });
}

describe("training step", () => {
  it("yields finite logged losses", async () => {
    const config = smokeConfig();
    const dataset = blobDataset(config.batchSize, 32, 8);
    const result = await train(config, dataset);
    dataset.dispose();
    expect(result.log.length).toBe(1);
    expect(Number.isFinite(result.log[0].lossD)).toBe(true);
    expect(Number.isFinite(result.log[0].lossG)).toBe(true);
    expect(fs.existsSync(result.checkpointPath)).toBe(true);
    const logFile = fs.readFileSync(path.join(config.outDir, "loss_log.csv"), "utf-8");
    expect(logFile.startsWith("step,loss_d,loss_g\n")).toBe(true);
  });

  it("logs a discriminator loss that matches manual recomputation", async () => {
    const config = smokeConfig({ epochs: 2 });
    const dataset = blobDataset(config.batchSize, 32, 8);
    const result = await train(config, dataset);
    dataset.dispose();
    const manual = discriminatorLossFromProbs(
      result.firstStep.realProbs,
      result.firstStep.fakeProbs,
    );
    expect(Math.abs(manual - result.firstStep.lossD)).toBeLessThan(1e-4);
  });
});

describe("untrained discriminator", () => {
  it("classifies balanced real/fake batches at chance level", () => {
    const config = smokeConfig();
    const generator = buildGenerator(config);
    const discriminator = buildDiscriminator(config);
    // diverse scenes, so per-input logits are near-independent coin flips;
    // identical inputs would collapse the batch to one effective sample
    const real = tf.tidy(
      () =>
        tf.randomUniform([32, 32, 32, 1], 0, 1, "float32", 17)
          .greater(0.7)
          .toFloat()
          .mul(2)
          .sub(1) as tf.Tensor4D,
    );
    const fake = tf.tidy(() =>
      generator.apply(
        tf.randomNormal([32, config.noiseDim], 0, 1, "float32", 5),
        { training: true },
      ) as tf.Tensor4D,
    );
    const pReal = discriminator.predict(real) as tf.Tensor;
    const pFake = discriminator.predict(fake) as tf.Tensor;
    const correct =
      Array.from(pReal.dataSync()).filter((p) => p >= 0.5).length +
      Array.from(pFake.dataSync()).filter((p) => p < 0.5).length;
    const accuracy = correct / 64;
    expect(accuracy).toBeGreaterThanOrEqual(0.35);
    expect(accuracy).toBeLessThanOrEqual(0.65);
    [real, fake, pReal, pFake].forEach((t) => t.dispose());
  });
});

describe("sampling", () => {
  it("binarization is monotone in the threshold", async () => {
    const config = smokeConfig();
    const dataset = blobDataset(config.batchSize, 32, 8);
    const result = await train(config, dataset);
    dataset.dispose();
    const checkpoint = loadCheckpoint(result.checkpointPath);
    const counts: number[] = [];
    for (const threshold of [0.1, 0.5, 0.9, 0.999]) {
      const files = sampleToDirectory(checkpoint, {
        count: 4, seed: 21, threshold, outDir: path.join(dir, `t${threshold}`),
      });
      let occupied = 0;
      for (const file of files) {
        for (const v of readAsciiGrid(file).cells) occupied += v;
      }
      counts.push(occupied);
    }
    expect(counts[1]).toBeLessThanOrEqual(counts[0]);
    expect(counts[2]).toBeLessThanOrEqual(counts[1]);
    expect(counts[3]).toBeLessThanOrEqual(counts[2]);
    // an early checkpoint's tanh outputs sit near zero: 0.999 leaves near-empty scenes
    expect(counts[3] / (4 * 32 * 32)).toBeLessThan(0.01);
  });

  it("is deterministic for a fixed seed", async () => {
    const config = smokeConfig();
    const dataset = blobDataset(config.batchSize, 32, 8);
    const result = await train(config, dataset);
    dataset.dispose();
    const checkpoint = loadCheckpoint(result.checkpointPath);
    const a = sampleToDirectory(checkpoint, { count: 3, seed: 9, outDir: path.join(dir, "a") });
    const b = sampleToDirectory(checkpoint, { count: 3, seed: 9, outDir: path.join(dir, "b") });
    for (let i = 0; i < a.length; i++) {
      expect(fs.readFileSync(a[i], "utf-8")).toBe(fs.readFileSync(b[i], "utf-8"));
    }
    const c = sampleToDirectory(checkpoint, { count: 3, seed: 10, outDir: path.join(dir, "c") });
    const same = fs.readFileSync(a[0], "utf-8") === fs.readFileSync(c[0], "utf-8");
    expect(same).toBe(false);
  });

  it("checkpoints restore to identical samplers", async () => {
    const config = smokeConfig();
    const dataset = blobDataset(config.batchSize, 32, 8);
    const result = await train(config, dataset);
    dataset.dispose();
    const first = loadCheckpoint(result.checkpointPath);
    const second = loadCheckpoint(result.checkpointPath);
    const a = sampleToDirectory(first, { count: 2, seed: 3, outDir: path.join(dir, "x") });
    const b = sampleToDirectory(second, { count: 2, seed: 3, outDir: path.join(dir, "y") });
    expect(fs.readFileSync(a[0], "utf-8")).toBe(fs.readFileSync(b[0], "utf-8"));
  });

  it("rejects corrupt checkpoints and bad thresholds", async () => {
    const bad = path.join(dir, "bad.json");
    fs.writeFileSync(bad, "{not json");
    expect(() => loadCheckpoint(bad)).toThrow(/corrupt checkpoint/);
    fs.writeFileSync(bad, JSON.stringify({ config: DEFAULT_CONFIG }));
    expect(() => loadCheckpoint(bad)).toThrow(/missing sections/);

    const config = smokeConfig();
    const dataset = blobDataset(config.batchSize, 32, 8);
    const result = await train(config, dataset);
    dataset.dispose();
    const checkpoint = loadCheckpoint(result.checkpointPath);
    expect(() =>
      sampleToDirectory(checkpoint, { count: 1, seed: 0, threshold: 1.5, outDir: dir }),
    ).toThrow(/threshold/);
  });
});

describe("binarize", () => {
  it("maps tanh range onto {0,1}", () => {
    const config = smokeConfig();
    const t = tf.tensor4d([[-1, -0.2, 0.2, 1]].flat(), [1, 2, 2, 1]);
    const [grid] = binarize(t as tf.Tensor4D, 0.5, config);
    t.dispose();
    expect(Array.from(grid.cells)).toEqual([0, 0, 1, 1]);
    expect(grid.cellSize).toBe(config.cellSize);
  });
});

describe("config validation", () => {
  it("enforces the documented domains", () => {
    expect(() => validateConfig({ ...DEFAULT_CONFIG, imageSize: 48 })).toThrow(/power of two/);
    expect(() => validateConfig({ ...DEFAULT_CONFIG, imageSize: 16 })).toThrow(/power of two/);
    expect(() => validateConfig({ ...DEFAULT_CONFIG, noiseDim: 0 })).toThrow(/noiseDim/);
    expect(() => validateConfig({ ...DEFAULT_CONFIG, epochs: 0 })).toThrow(/epochs/);
  });
});
