import * as fs from "node:fs";

export interface GanConfig {
  /** Square scene side in cells; a power of two >= 32. */
  imageSize: number;
  noiseDim: number;
  batchSize: number;
  epochs: number;
  learningRate: number;
  seed: number;
  /** Meters per cell stamped on emitted rasters. */
  cellSize: number;
  /** Directory of training rasters (ASCII grids). */
  rasterDir: string;
  /** Where checkpoints, logs and epoch samples land. */
  outDir: string;
  /** Write one sample grid every N epochs (0 = never). */
  sampleEvery: number;
  /** Use -mean log D(G(z)) instead of the literal mean log(1 - D(G(z))). */
  nonSaturating: boolean;
}

export const DEFAULT_CONFIG: GanConfig = {
  imageSize: 64,
  noiseDim: 64,
  batchSize: 8,
  epochs: 200,
  learningRate: 2e-4,
  seed: 0,
  cellSize: 172.0,
  rasterDir: "data",
  outDir: "out",
  sampleEvery: 0,
  nonSaturating: false,
};

export function validateConfig(config: GanConfig): GanConfig {
  const { imageSize, noiseDim, batchSize, epochs, learningRate } = config;
  if (imageSize < 32 || (imageSize & (imageSize - 1)) !== 0) {
    throw new Error(`imageSize must be a power of two >= 32, got ${imageSize}`);
  }
  if (noiseDim < 1) throw new Error(`noiseDim must be >= 1, got ${noiseDim}`);
  if (batchSize < 1) throw new Error(`batchSize must be >= 1, got ${batchSize}`);
  if (epochs < 1) throw new Error(`epochs must be >= 1, got ${epochs}`);
  if (learningRate <= 0) throw new Error(`learningRate must be > 0, got ${learningRate}`);
  if (config.cellSize <= 0) throw new Error(`cellSize must be > 0, got ${config.cellSize}`);
  return config;
}

export function loadConfig(path: string): GanConfig {
  const doc = JSON.parse(fs.readFileSync(path, "utf-8"));
  return validateConfig({ ...DEFAULT_CONFIG, ...doc });
}
