/**
 * The five figure kinds regenerated from a sweep directory:
 * regret, ratio (non-competitive + misid), throughput, handover, and
 * the per-arrival-rate sweep.
 */

import { writeFileSync } from "fs";
import path from "path";

import {
  compareSummaries,
  groupRuns,
  meanBand,
  perVehicleRate,
} from "./aggregate.js";
import { RunSeries, pyFloat } from "./csv.js";
import { ChartSpec, Series, color, renderChart } from "./svg.js";

export const FIGURE_KINDS = ["regret", "ratio", "throughput", "handover", "sweep"] as const;
export type FigureKind = (typeof FIGURE_KINDS)[number];

function bandsPerGroup(
  runs: RunSeries[],
  value: (r: import("./csv.js").PeriodRecord) => number,
  dash?: string,
  suffix = "",
): Series[] {
  const out: Series[] = [];
  let i = 0;
  for (const [key, group] of groupRuns(runs)) {
    const band = meanBand(group, value);
    out.push({
      label: key + suffix,
      color: color(i),
      x: band.x,
      y: band.mean,
      band: { lo: band.lo, hi: band.hi },
      dash,
    });
    i += 1;
  }
  return out;
}

export function buildChart(kind: FigureKind, runs: RunSeries[]): ChartSpec {
  switch (kind) {
    case "regret":
      return {
        title: "Cumulative regret vs the reference association",
        xLabel: "period",
        yLabel: "cumulative regret [bits]",
        series: bandsPerGroup(runs, (r) => r.cum_regret_bits),
      };
    case "ratio": {
      const nc = bandsPerGroup(runs, (r) => r.noncompetitive_ratio, undefined, " non-competitive");
      const mis = bandsPerGroup(runs, (r) => r.misid_prob, "6 3", " misid");
      mis.forEach((s, i) => (s.color = nc[i % nc.length].color));
      return {
        title: "Non-competitive arm ratio and misidentification probability",
        xLabel: "period",
        yLabel: "fraction",
        series: nc.concat(mis),
      };
    }
    case "throughput":
      return {
        title: "Average transmission rate per vehicle",
        xLabel: "period",
        yLabel: "rate [bit/s]",
        series: bandsPerGroup(runs, perVehicleRate),
      };
    case "handover":
      return {
        title: "Average handover rate per vehicle",
        xLabel: "period",
        yLabel: "handovers per vehicle per period",
        series: bandsPerGroup(runs, (r) => r.handover_rate),
      };
    case "sweep": {
      const swept = runs.filter((r) => r.lambda !== undefined);
      if (swept.length === 0) {
        throw new Error("sweep figure needs runs with a swept arrival rate (lambda meta)");
      }
      const summary = compareSummaries(swept);
      const byPolicy = new Map<string, { lam: number; rate: number; std: number }[]>();
      for (const run of swept) {
        if (!byPolicy.has(run.policy)) byPolicy.set(run.policy, []);
      }
      for (const [key, entry] of Object.entries(summary)) {
        const policy = key.split("|")[0];
        const lam = Number(key.match(/lambda=([-0-9.e]+)/)?.[1]);
        const field = entry["mean_per_vehicle_rate_bps"] as { mean: number; std: number };
        byPolicy.get(policy)!.push({ lam, rate: field.mean, std: field.std });
      }
      const series: Series[] = [];
      let i = 0;
      for (const [policy, pts] of byPolicy) {
        pts.sort((a, b) => a.lam - b.lam);
        series.push({
          label: policy,
          color: color(i),
          x: pts.map((p) => p.lam),
          y: pts.map((p) => p.rate),
          band: {
            lo: pts.map((p) => p.rate - p.std),
            hi: pts.map((p) => p.rate + p.std),
          },
          markers: true,
        });
        i += 1;
      }
      return {
        title: "Per-vehicle rate vs vehicle arrival rate",
        xLabel: "arrival rate [vehicles/period]",
        yLabel: "mean rate over last quarter [bit/s]",
        series,
      };
    }
  }
}

export interface SuiteResult {
  written: string[];
  /** compare-shaped summary recomputed from the CSVs (emitted alongside). */
  summary: Record<string, unknown>;
}

export function renderSuite(runs: RunSeries[], outDir: string, kinds?: FigureKind[]): SuiteResult {
  const written: string[] = [];
  for (const kind of kinds ?? FIGURE_KINDS) {
    const chart = buildChart(kind, runs);
    const file = path.join(outDir, `${kind}.svg`);
    writeFileSync(file, renderChart(chart));
    written.push(file);
  }
  const summary = compareSummaries(runs);
  const summaryFile = path.join(outDir, "plot_summary.json");
  writeFileSync(summaryFile, JSON.stringify(summary, jsonStable, 2));
  written.push(summaryFile);
  return { written, summary };
}

function jsonStable(_key: string, value: unknown): unknown {
  if (value && typeof value === "object" && !Array.isArray(value)) {
    return Object.fromEntries(Object.entries(value as Record<string, unknown>).sort());
  }
  return value;
}

export { pyFloat };
