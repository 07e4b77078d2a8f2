import { describe, expect, it } from "vitest";

import type { TrajectoryRow } from "../src/api.js";
import { barChart, barChartTotal, heatmapCells, tableRows } from "../src/table.js";

function row(id: string, total: number, perTau: number[]): TrajectoryRow {
  const totalIn = total * 0.7;
  return {
    trajectory_id: id,
    total,
    total_in: totalIn,
    total_out: total - totalIn,
    per_tau: perTau,
    shares: {},
    coordinates: [],
  };
}

describe("top-K table", () => {
  it("preserves the API response order exactly", () => {
    const served = [
      row("b", 0.5, [0.5]),
      row("a", -0.9, [-0.9]),
      row("c", 0.1, [0.1]),
    ];
    const rows = tableRows(served);
    expect(rows.map((r) => r.trajectoryId)).toEqual(["b", "a", "c"]);
    expect(rows.map((r) => r.rank)).toEqual([1, 2, 3]);
  });

  it("copies totals verbatim and tags the sign", () => {
    const rows = tableRows([row("x", -0.25, [-0.25])]);
    expect(rows[0].total).toBe(-0.25);
    expect(rows[0].sign).toBe("negative");
    expect(rows[0].totalIn + rows[0].totalOut).toBeCloseTo(-0.25, 12);
  });
});

describe("bi-directional bar chart", () => {
  it("bar values sum to the trajectory's listed score", () => {
    const trajectory = row("t", 0.289, [0.0, 0.289]);
    const bars = barChart(trajectory.per_tau);
    expect(barChartTotal(bars)).toBeCloseTo(trajectory.total, 12);
  });

  it("positive bars go up and negative bars go down", () => {
    const bars = barChart([0.2, -0.1, 0.0]);
    expect(bars.map((b) => b.direction)).toEqual(["up", "down", "up"]);
  });

  it("extents normalize to the largest magnitude", () => {
    const bars = barChart([0.5, -1.0, 0.25]);
    expect(bars.map((b) => b.extent)).toEqual([0.5, 1.0, 0.25]);
  });

  it("all-zero chart stays finite", () => {
    for (const bar of barChart([0, 0])) {
      expect(bar.extent).toBe(0);
    }
  });
});

describe("flow heatmap scale", () => {
  it("positions cells on a 0..1 sequential scale", () => {
    const cells = heatmapCells([[0, 5], [10, 2]]);
    const byCell = new Map(cells.map((c) => [`${c.m},${c.n}`, c.t]));
    expect(byCell.get("1,0")).toBe(1);
    expect(byCell.get("0,0")).toBe(0);
    expect(byCell.get("0,1")).toBe(0.5);
  });

  it("empty grid yields zero positions", () => {
    expect(heatmapCells([[0, 0]]).every((c) => c.t === 0)).toBe(true);
  });
});
