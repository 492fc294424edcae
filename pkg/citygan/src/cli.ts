/**
 * CLI: `train --config <json>` and
 * `sample --checkpoint <file> --count <n> --seed <n> --out <dir> [--threshold t]`.
 */

import { loadConfig } from "./config.js";
import { loadCheckpoint, sampleToDirectory } from "./sample.js";
import { train } from "./train.js";

function parseArgs(argv: string[]): Map<string, string> {
  const args = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) {
    if (!argv[i].startsWith("--") || i + 1 >= argv.length) {
      throw new Error(`malformed arguments near '${argv[i]}'`);
    }
    args.set(argv[i].slice(2), argv[i + 1]);
  }
  return args;
}

function required(args: Map<string, string>, key: string): string {
  const value = args.get(key);
  if (value === undefined) throw new Error(`missing required option --${key}`);
  return value;
}

async function main(): Promise<number> {
  const [command, ...rest] = process.argv.slice(2);
  try {
    if (command === "train") {
      const args = parseArgs(rest);
      const config = loadConfig(required(args, "config"));
      const result = await train(config);
      const last = result.log[result.log.length - 1];
      console.log(
        `trained ${result.log.length} steps on ${result.datasetSize} rasters; ` +
        `final loss_d=${last.lossD.toFixed(4)} loss_g=${last.lossG.toFixed(4)}; ` +
        `checkpoint: ${result.checkpointPath}`,
      );
      return 0;
    }
    if (command === "sample") {
      const args = parseArgs(rest);
      const checkpoint = loadCheckpoint(required(args, "checkpoint"));
      const files = sampleToDirectory(checkpoint, {
        count: Number(required(args, "count")),
        seed: Number(required(args, "seed")),
        outDir: required(args, "out"),
        threshold: args.has("threshold") ? Number(args.get("threshold")) : undefined,
      });
      console.log(`wrote ${files.length} scenes to ${required(args, "out")}`);
      return 0;
    }
    console.error("usage: citygan <train|sample> [options]");
    return 2;
  } catch (err) {
    console.error(`error: ${(err as Error).message}`);
    return 2;
  }
}

main().then((code) => process.exit(code));
