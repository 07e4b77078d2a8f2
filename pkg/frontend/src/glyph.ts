// Radar glyph geometry. The documented scale: a sector's polygon is a
// wedge whose radius uses square-root area scaling,
//
//   radius(v) = maxRadius * sqrt(v / maxValue)
//
// so polygon AREA is proportional to the served sum (a wedge's area
// grows with radius squared). maxValue is the largest positive or
// negative sector sum across all glyphs on screen, keeping glyphs
// comparable. Zero-sum sectors emit no polygon at all.

import type { GlyphPayload, GlyphSector } from "./api.js";

export const N_SECTORS = 8;

export function sectorRadius(value: number, maxValue: number, maxRadius: number): number {
  if (value <= 0 || maxValue <= 0) return 0;
  return maxRadius * Math.sqrt(value / maxValue);
}

/** Largest positive/negative sector sum over a set of glyph payloads. */
export function maxSectorValue(glyphs: GlyphPayload[]): number {
  let max = 0;
  for (const g of glyphs) {
    for (const s of g.sectors) {
      max = Math.max(max, s.positive_sum, s.negative_sum);
    }
  }
  return max;
}

export interface WedgePoint {
  x: number;
  y: number;
}

/**
 * Wedge polygon for one sector: center plus an arc approximated by
 * `arcSteps + 1` points. Sector 0 is centered on north (up, -y in SVG)
 * and sectors advance clockwise in 45 degree increments.
 */
export function sectorWedge(
  sector: number,
  radius: number,
  cx: number,
  cy: number,
  arcSteps = 6,
): WedgePoint[] {
  if (radius <= 0) return [];
  const width = (2 * Math.PI) / N_SECTORS;
  const start = sector * width - width / 2 - Math.PI / 2;
  const points: WedgePoint[] = [{ x: cx, y: cy }];
  for (let i = 0; i <= arcSteps; i++) {
    const angle = start + (width * i) / arcSteps;
    points.push({ x: cx + radius * Math.cos(angle), y: cy + radius * Math.sin(angle) });
  }
  return points;
}

export interface SectorPolygon {
  sector: number;
  sign: "positive" | "negative";
  value: number;
  radius: number;
  points: WedgePoint[];
}

/** All drawable polygons for one glyph, positives and negatives apart. */
export function glyphPolygons(
  sectors: GlyphSector[],
  maxValue: number,
  maxRadius: number,
  cx = 0,
  cy = 0,
): SectorPolygon[] {
  const polygons: SectorPolygon[] = [];
  sectors.forEach((s, i) => {
    for (const sign of ["positive", "negative"] as const) {
      const value = sign === "positive" ? s.positive_sum : s.negative_sum;
      const radius = sectorRadius(value, maxValue, maxRadius);
      if (radius > 0) {
        polygons.push({ sector: i, sign, value, radius, points: sectorWedge(i, radius, cx, cy) });
      }
    }
  });
  return polygons;
}

export interface LineChartPoint {
  x: number;
  y: number;
  highlighted: boolean;
}

/**
 * Inner line chart of the glyph: current value plus future steps,
 * scaled into a width x height box, with the selected-horizon point
 * flagged for the highlight dot. Index 0 is "now"; the horizon is
 * 1-based into the future steps.
 */
export function glyphSeriesPoints(
  series: number[],
  horizon: number,
  width: number,
  height: number,
): LineChartPoint[] {
  if (series.length === 0) return [];
  const lo = Math.min(...series);
  const hi = Math.max(...series);
  const span = hi - lo || 1;
  return series.map((v, i) => ({
    x: series.length === 1 ? width / 2 : (i / (series.length - 1)) * width,
    y: height - ((v - lo) / span) * height,
    highlighted: i === horizon,
  }));
}
