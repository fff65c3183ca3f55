/**
 * Aggregation shared by every figure: per-period mean curves with
 * across-seed bands, and the scalar run summaries that must agree with the
 * simulator's own `compare` output.
 */

import { PeriodRecord, RunSeries, groupKey } from "./csv.js";

export interface RunSummary {
  policy: string;
  seed: number;
  periods: number;
  final_cum_regret_bits: number;
  mean_per_vehicle_rate_bps: number;
  mean_reference_per_vehicle_rate_bps: number;
  mean_handover_rate: number;
  final_noncompetitive_ratio: number;
  mean_misid_prob: number;
}

export const SUMMARY_FIELDS = [
  "final_cum_regret_bits",
  "mean_per_vehicle_rate_bps",
  "mean_reference_per_vehicle_rate_bps",
  "mean_handover_rate",
  "final_noncompetitive_ratio",
  "mean_misid_prob",
] as const;

function mean(xs: number[]): number {
  if (xs.length === 0) return 0;
  let total = 0;
  for (const x of xs) total += x;
  return total / xs.length;
}

function sampleStd(xs: number[]): number {
  if (xs.length < 2) return 0;
  const m = mean(xs);
  let total = 0;
  for (const x of xs) total += (x - m) * (x - m);
  return Math.sqrt(total / (xs.length - 1));
}

function tail(records: PeriodRecord[]): PeriodRecord[] {
  const n = records.length;
  return n >= 4 ? records.slice(n - Math.floor(n / 4)) : records.slice();
}

export function summarizeRun(series: RunSeries): RunSummary {
  const t = tail(series.records);
  const perVeh = t
    .filter((r) => r.active_vehicles > 0)
    .map((r) => r.total_rate_bps / r.active_vehicles);
  const refPerVeh = t
    .filter((r) => r.active_vehicles > 0)
    .map((r) => r.reference_rate_bps / r.active_vehicles);
  const last = series.records[series.records.length - 1];
  return {
    policy: series.policy,
    seed: series.seed,
    periods: series.records.length,
    final_cum_regret_bits: last ? last.cum_regret_bits : 0,
    mean_per_vehicle_rate_bps: mean(perVeh),
    mean_reference_per_vehicle_rate_bps: mean(refPerVeh),
    mean_handover_rate: mean(t.map((r) => r.handover_rate)),
    final_noncompetitive_ratio: last ? last.noncompetitive_ratio : 0,
    mean_misid_prob: mean(t.map((r) => r.misid_prob)),
  };
}

export type GroupSummary = Record<string, { mean: number; std: number } | number[] | number>;

/** Across-seed mean/std per group, in the compare command's shape. */
export function compareSummaries(runs: RunSeries[]): Record<string, GroupSummary> {
  const groups = new Map<string, RunSummary[]>();
  for (const run of runs) {
    const key = groupKey(run);
    if (!groups.has(key)) groups.set(key, []);
    groups.get(key)!.push(summarizeRun(run));
  }
  const out: Record<string, GroupSummary> = {};
  for (const [key, summaries] of groups) {
    const entry: GroupSummary = {
      n_runs: summaries.length,
      seeds: summaries.map((s) => s.seed).sort((a, b) => a - b),
    };
    for (const field of SUMMARY_FIELDS) {
      const vals = summaries.map((s) => s[field]);
      entry[field] = { mean: mean(vals), std: sampleStd(vals) };
    }
    out[key] = entry;
  }
  return out;
}

export interface Band {
  x: number[];
  mean: number[];
  lo: number[];
  hi: number[];
}

/**
 * Per-period across-seed mean with a +-std band, decimated to at most
 * `maxPoints` bucket means so the SVG stays small.
 */
export function meanBand(
  group: RunSeries[],
  value: (r: PeriodRecord) => number,
  maxPoints = 400,
): Band {
  const n = Math.min(...group.map((g) => g.records.length));
  const step = Math.max(1, Math.ceil(n / maxPoints));
  const x: number[] = [];
  const m: number[] = [];
  const lo: number[] = [];
  const hi: number[] = [];
  for (let start = 0; start < n; start += step) {
    const end = Math.min(start + step, n);
    const perSeed = group.map((g) => {
      const vals = [];
      for (let t = start; t < end; t++) vals.push(value(g.records[t]));
      return mean(vals);
    });
    const mu = mean(perSeed);
    const sd = sampleStd(perSeed);
    x.push(group[0].records[Math.floor((start + end - 1) / 2)].period);
    m.push(mu);
    lo.push(mu - sd);
    hi.push(mu + sd);
  }
  return { x, mean: m, lo, hi };
}

export function perVehicleRate(r: PeriodRecord): number {
  return r.active_vehicles > 0 ? r.total_rate_bps / r.active_vehicles : 0;
}

export function groupRuns(runs: RunSeries[]): Map<string, RunSeries[]> {
  const groups = new Map<string, RunSeries[]>();
  for (const run of runs) {
    const key = groupKey(run);
    if (!groups.has(key)) groups.set(key, []);
    groups.get(key)!.push(run);
  }
  return groups;
}
