/**
 * Reader for the simulator's run CSVs.
 *
 * The header is a fixed contract; any missing or reordered column raises a
 * schema error naming the offending column.
 */

import { readFileSync, readdirSync } from "fs";
import path from "path";

export const CSV_HEADER = [
  "period",
  "policy",
  "seed",
  "active_vehicles",
  "total_rate_bps",
  "reference_rate_bps",
  "cum_regret_bits",
  "handovers",
  "handover_rate",
  "noncompetitive_ratio",
  "misid_prob",
] as const;

export interface PeriodRecord {
  period: number;
  active_vehicles: number;
  total_rate_bps: number;
  reference_rate_bps: number;
  cum_regret_bits: number;
  handovers: number;
  handover_rate: number;
  noncompetitive_ratio: number;
  misid_prob: number;
}

export interface RunSeries {
  file: string;
  policy: string;
  seed: number;
  lambda?: number;
  txPowerDbm?: number;
  records: PeriodRecord[];
}

export class SchemaError extends Error {
  constructor(file: string, column: string, detail: string) {
    super(`${file}: column '${column}' ${detail}`);
    this.name = "SchemaError";
  }
}

export function readRunCsv(file: string): RunSeries {
  const text = readFileSync(file, "utf8");
  const lines = text.split(/\r?\n/).filter((l) => l.length > 0);
  if (lines.length === 0) {
    throw new SchemaError(file, CSV_HEADER[0], "missing (empty file)");
  }
  const header = lines[0].split(",");
  for (let i = 0; i < CSV_HEADER.length; i++) {
    if (header[i] !== CSV_HEADER[i]) {
      throw new SchemaError(
        file,
        CSV_HEADER[i],
        `expected at position ${i}, found '${header[i] ?? "(none)"}'`,
      );
    }
  }
  const records: PeriodRecord[] = [];
  let policy = "";
  let seed = 0;
  for (const line of lines.slice(1)) {
    const f = line.split(",");
    policy = f[1];
    seed = Number(f[2]);
    records.push({
      period: Number(f[0]),
      active_vehicles: Number(f[3]),
      total_rate_bps: Number(f[4]),
      reference_rate_bps: Number(f[5]),
      cum_regret_bits: Number(f[6]),
      handovers: Number(f[7]),
      handover_rate: Number(f[8]),
      noncompetitive_ratio: Number(f[9]),
      misid_prob: Number(f[10]),
    });
  }
  const series: RunSeries = { file, policy, seed, records };
  const metaPath = file.replace(/\.csv$/, ".meta.json");
  try {
    const meta = JSON.parse(readFileSync(metaPath, "utf8"));
    if (typeof meta.lambda === "number") series.lambda = meta.lambda;
    if (typeof meta.tx_power_dbm === "number") series.txPowerDbm = meta.tx_power_dbm;
  } catch {
    // runs without a sidecar group by policy alone
  }
  return series;
}

export function readSweepDir(dir: string): RunSeries[] {
  const files = readdirSync(dir)
    .filter((f) => f.endsWith(".csv"))
    .sort()
    .map((f) => path.join(dir, f));
  if (files.length === 0) {
    throw new Error(`${dir}: no run CSVs found`);
  }
  return files.map(readRunCsv);
}

/** Format a float the way Python's repr does for simple values. */
export function pyFloat(v: number): string {
  return Number.isInteger(v) ? `${v}.0` : String(v);
}

/** Group key mirroring the Python compare command. */
export function groupKey(s: RunSeries): string {
  const parts = [s.policy];
  if (s.lambda !== undefined) parts.push(`lambda=${pyFloat(s.lambda)}`);
  if (s.txPowerDbm !== undefined) parts.push(`tx_power_dbm=${pyFloat(s.txPowerDbm)}`);
  return parts.join("|");
}
