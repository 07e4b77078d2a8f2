// Fine-grained view models: the top-K trajectory table and the
// bi-directional per-timestep bar chart. Pure projections of API
// payloads; no attribution math happens here.

import type { TrajectoryRow } from "./api.js";

export interface TableRow {
  rank: number;
  trajectoryId: string;
  total: number;
  totalIn: number;
  totalOut: number;
  sign: "positive" | "negative";
}

/** Table rows in exactly the order the API returned them. */
export function tableRows(trajectories: TrajectoryRow[]): TableRow[] {
  return trajectories.map((t, i) => ({
    rank: i + 1,
    trajectoryId: t.trajectory_id,
    total: t.total,
    totalIn: t.total_in,
    totalOut: t.total_out,
    sign: t.total >= 0 ? "positive" : "negative",
  }));
}

export interface Bar {
  tau: number;
  value: number;
  /** bar length as a fraction of the largest |value| across the chart */
  extent: number;
  direction: "up" | "down";
}

/**
 * Bi-directional bar chart for one trajectory: one bar per historical
 * timestep, positive bars up, negative bars down. Values are the
 * served per-timestep sums; their total equals the listed score.
 */
export function barChart(perTau: number[]): Bar[] {
  const maxAbs = Math.max(...perTau.map(Math.abs), 0) || 1;
  return perTau.map((v, tau) => ({
    tau,
    value: v,
    extent: Math.abs(v) / maxAbs,
    direction: v >= 0 ? "up" : "down",
  }));
}

export function barChartTotal(bars: Bar[]): number {
  return bars.reduce((acc, b) => acc + b.value, 0);
}

export interface HeatmapCell {
  m: number;
  n: number;
  value: number;
  /** 0..1 position on the sequential flow color scale */
  t: number;
}

/** Sequential color scale position per grid cell for the flow heatmap. */
export function heatmapCells(values: number[][]): HeatmapCell[] {
  let max = 0;
  for (const row of values) for (const v of row) max = Math.max(max, v);
  const cells: HeatmapCell[] = [];
  values.forEach((row, m) =>
    row.forEach((v, n) => cells.push({ m, n, value: v, t: max > 0 ? v / max : 0 })),
  );
  return cells;
}
