/**
 * Figure regeneration CLI.
 *
 * Usage:
 *   node dist/main.js --in RESULTS_DIR --out FIGURE_DIR [--kind regret,...]
 *
 * Reads every run CSV (plus .meta.json sidecars) in RESULTS_DIR and writes
 * one SVG per figure kind plus plot_summary.json with the aggregate numbers
 * the figures are drawn from.
 */

import { mkdirSync } from "fs";

import { readSweepDir } from "./csv.js";
import { FIGURE_KINDS, FigureKind, renderSuite } from "./plots.js";

function parseArgs(argv: string[]): { inDir: string; outDir: string; kinds?: FigureKind[] } {
  let inDir = "";
  let outDir = "";
  let kinds: FigureKind[] | undefined;
  for (let i = 0; i < argv.length; i++) {
    switch (argv[i]) {
      case "--in":
        inDir = argv[++i];
        break;
      case "--out":
        outDir = argv[++i];
        break;
      case "--kind": {
        const requested = argv[++i].split(",").filter((k) => k.length > 0);
        for (const k of requested) {
          if (!FIGURE_KINDS.includes(k as FigureKind)) {
            throw new Error(`unknown figure kind '${k}' (choose from ${FIGURE_KINDS.join(", ")})`);
          }
        }
        kinds = requested as FigureKind[];
        break;
      }
      default:
        throw new Error(`unknown argument '${argv[i]}'`);
    }
  }
  if (!inDir || !outDir) {
    throw new Error("usage: main.js --in RESULTS_DIR --out FIGURE_DIR [--kind a,b,...]");
  }
  return { inDir, outDir, kinds };
}

export function run(argv: string[]): number {
  const { inDir, outDir, kinds } = parseArgs(argv);
  const runs = readSweepDir(inDir);
  mkdirSync(outDir, { recursive: true });
  const result = renderSuite(runs, outDir, kinds);
  for (const f of result.written) {
    console.log(`wrote ${f}`);
  }
  return 0;
}

const isMain = process.argv[1]?.endsWith("main.js");
if (isMain) {
  try {
    process.exit(run(process.argv.slice(2)));
  } catch (err) {
    console.error(String(err instanceof Error ? err.message : err));
    process.exit(1);
  }
}
