// DOM wiring: three coordinated views (map + glyphs, fine-grained
// panel, controls) driven by the presenter. All numerics shown here are
// copied verbatim from API payloads.

import { ApiClient, GeometryResponse, GlyphsResponse, TrajectoriesResponse } from "../api.js";
import { glyphPolygons, glyphSeriesPoints, maxSectorValue } from "../glyph.js";
import { Presenter } from "../presenter.js";
import { decodeState } from "../state.js";
import { barChart, heatmapCells, tableRows } from "../table.js";

const SVG_NS = "http://www.w3.org/2000/svg";
const MAP_W = 720;
const MAP_H = 640;
const GLYPH_RADIUS = 34;

// fixed, documented color scales: diverging for attribution, sequential
// for flow volume
const PHI_POSITIVE = "#c0392b";
const PHI_NEGATIVE = "#2471a3";
const FLOW_SCALE = (t: number) => `rgba(230, 126, 34, ${0.08 + 0.92 * t})`;

interface Projection {
  x: (lon: number) => number;
  y: (lat: number) => number;
}

function projectionFor(geometry: GeometryResponse): Projection {
  const g = geometry.grid;
  return {
    x: (lon) => ((lon - g.lon_min) / (g.lon_max - g.lon_min)) * MAP_W,
    y: (lat) => MAP_H - ((lat - g.lat_min) / (g.lat_max - g.lat_min)) * MAP_H,
  };
}

function el<K extends keyof HTMLElementTagNameMap>(tag: K, parent: Element, cls?: string) {
  const node = document.createElement(tag);
  if (cls) node.className = cls;
  parent.appendChild(node);
  return node;
}

function svgEl(tag: string, parent: Element, attrs: Record<string, string | number>) {
  const node = document.createElementNS(SVG_NS, tag);
  for (const [key, value] of Object.entries(attrs)) node.setAttribute(key, String(value));
  parent.appendChild(node);
  return node;
}

function ringToPath(ring: Array<[number, number]>, proj: Projection): string {
  return ring
    .map(([lon, lat], i) => `${i ? "L" : "M"}${proj.x(lon).toFixed(1)},${proj.y(lat).toFixed(1)}`)
    .join(" ") + " Z";
}

function polygonPaths(geometry: { type: string; coordinates: unknown }, proj: Projection): string {
  // merged regions are Polygon or MultiPolygon; draw outer rings only
  const coords = geometry.coordinates as unknown[];
  const polys = geometry.type === "MultiPolygon"
    ? (coords as Array<Array<Array<[number, number]>>>)
    : [coords as Array<Array<[number, number]>>];
  return polys.map((rings) => ringToPath(rings[0], proj)).join(" ");
}

export async function boot(root: HTMLElement, api = new ApiClient()): Promise<void> {
  const geometry = await api.geometry();
  const proj = projectionFor(geometry);
  const grid = geometry.grid;

  const controls = el("div", root, "controls");
  const mapPane = el("div", root, "map-pane");
  const finePane = el("div", root, "fine-pane");

  const svg = svgEl("svg", mapPane, { width: MAP_W, height: MAP_H, class: "map" });
  const heatLayer = svgEl("g", svg, { class: "heat-layer" });
  const regionLayer = svgEl("g", svg, { class: "region-layer" });
  const routeLayer = svgEl("g", svg, { class: "route-layer" });
  const glyphLayer = svgEl("g", svg, { class: "glyph-layer" });

  const slider = el("input", controls) as HTMLInputElement;
  slider.type = "range";
  slider.min = "0";
  slider.max = "40";
  const sliceLabel = el("span", controls, "slice-label");

  const horizonSelect = el("select", controls) as HTMLSelectElement;
  for (let h = 1; h <= 6; h++) {
    const opt = el("option", horizonSelect) as HTMLOptionElement;
    opt.value = String(h);
    opt.textContent = `${h * (grid.slice_seconds / 60)} min`;
  }

  const heatToggle = el("button", controls);
  heatToggle.textContent = "prediction heatmap";

  const jobBadge = el("span", controls, "job-badge");
  jobBadge.textContent = "idle";

  const tableHost = el("div", finePane, "traj-table");
  const barsHost = el("div", finePane, "tau-bars");
  const matrixHost = el("div", finePane, "grid-matrix");

  const presenter = new Presenter(api, {
    onState(state) {
      slider.value = String(state.k);
      sliceLabel.textContent = `slice ${state.k}`;
      horizonSelect.value = String(state.horizon);
      heatToggle.classList.toggle("active", state.heatmap);
    },
    onFragment(fragment) {
      history.replaceState(null, "", "#" + fragment);
    },
    onGlyphs: renderGlyphs,
    onJobState(state) {
      jobBadge.textContent = state;
      jobBadge.className = `job-badge job-${state}`;
    },
    onTrajectories: renderTrajectories,
    onError(message) {
      jobBadge.textContent = "error";
      console.error(message);
    },
  }, decodeState(location.hash));

  // region borders replace grid lines on the base map
  for (const feature of geometry.regions.features) {
    const path = svgEl("path", regionLayer, {
      d: polygonPaths(feature.geometry, proj),
      class: "region",
    });
    path.addEventListener("click", () => {
      void presenter.selectRegion(feature.properties.region_id);
      void renderMatrix(feature.properties.region_id);
    });
  }

  slider.addEventListener("input", () => void presenter.setSlice(Number(slider.value)));
  horizonSelect.addEventListener("change", () =>
    void presenter.setHorizon(Number(horizonSelect.value)));
  heatToggle.addEventListener("click", () => {
    presenter.toggleHeatmap();
    void renderHeatmap();
  });

  async function renderHeatmap(): Promise<void> {
    heatLayer.replaceChildren();
    if (!presenter.state.heatmap) return;
    const prediction = await api.predict(presenter.state.k, presenter.state.horizon);
    const channelIdx = presenter.state.channel === "in" ? 0 : 1;
    const tensor = prediction.predictions[prediction.predictions.length - 1];
    const cw = MAP_W / grid.cols;
    const ch = MAP_H / grid.rows;
    for (const cell of heatmapCells(tensor.values[channelIdx])) {
      svgEl("rect", heatLayer, {
        x: cell.n * cw,
        y: MAP_H - (cell.m + 1) * ch,
        width: cw,
        height: ch,
        fill: FLOW_SCALE(cell.t),
      });
    }
  }

  function renderGlyphs(glyphs: GlyphsResponse): void {
    glyphLayer.replaceChildren();
    const maxValue = maxSectorValue(glyphs.glyphs);
    for (const payload of glyphs.glyphs) {
      const feature = geometry.regions.features.find(
        (f) => f.properties.region_id === payload.region_id);
      if (!feature) continue;
      // region centroid approximated from the outer ring
      const ring = (feature.geometry.type === "MultiPolygon"
        ? (feature.geometry.coordinates as number[][][][])[0][0]
        : (feature.geometry.coordinates as number[][][])[0]) as Array<[number, number]>;
      const cx = proj.x(ring.reduce((a, p) => a + p[0], 0) / ring.length);
      const cy = proj.y(ring.reduce((a, p) => a + p[1], 0) / ring.length);

      const group = svgEl("g", glyphLayer, { class: "glyph" });
      for (const poly of glyphPolygons(payload.sectors, maxValue, GLYPH_RADIUS, cx, cy)) {
        svgEl("polygon", group, {
          points: poly.points.map((p) => `${p.x.toFixed(1)},${p.y.toFixed(1)}`).join(" "),
          fill: poly.sign === "positive" ? PHI_POSITIVE : PHI_NEGATIVE,
          "fill-opacity": 0.55,
        });
      }
      const chartW = GLYPH_RADIUS;
      const chartH = GLYPH_RADIUS * 0.5;
      const points = glyphSeriesPoints(
        payload.predicted_series, payload.selected_horizon, chartW, chartH);
      svgEl("polyline", group, {
        points: points
          .map((p) => `${(cx - chartW / 2 + p.x).toFixed(1)},${(cy - chartH / 2 + p.y).toFixed(1)}`)
          .join(" "),
        class: "glyph-series",
      });
      const dot = points.find((p) => p.highlighted);
      if (dot) {
        svgEl("circle", group, {
          cx: cx - chartW / 2 + dot.x,
          cy: cy - chartH / 2 + dot.y,
          r: 2.5,
          class: "glyph-dot",
        });
      }
      group.addEventListener("click", () => {
        void presenter.selectRegion(payload.region_id);
        void renderMatrix(payload.region_id);
      });
    }
  }

  async function renderMatrix(regionId: number): Promise<void> {
    const grids = await api.regionGrids(
      regionId, presenter.state.k, presenter.state.channel, 6);
    matrixHost.replaceChildren();
    const maxFlow = Math.max(...grids.cells.map((c) => c.series[0]), 1);
    for (const cell of grids.cells) {
      const box = el("button", matrixHost, "matrix-cell");
      box.style.background = FLOW_SCALE(cell.series[0] / maxFlow);
      box.title = `(${cell.m},${cell.n}) in ${cell.current.in} out ${cell.current.out}`;
      box.textContent = String(cell.series[0]);
      box.addEventListener("click", () => {
        matrixHost.querySelectorAll(".selected").forEach((n) => n.classList.remove("selected"));
        box.classList.add("selected");
        void presenter.selectCell(cell.m, cell.n);
      });
    }
  }

  function renderTrajectories(payload: TrajectoriesResponse): void {
    tableHost.replaceChildren();
    routeLayer.replaceChildren();
    barsHost.replaceChildren();
    const table = el("table", tableHost);
    const head = el("tr", el("thead", table));
    for (const label of ["#", "trajectory", "total", "in", "out"]) {
      el("th", head).textContent = label;
    }
    const body = el("tbody", table);
    const rows = tableRows(payload.trajectories);
    rows.forEach((row, i) => {
      const tr = el("tr", body);
      tr.classList.add(row.sign);
      el("td", tr).textContent = String(row.rank);
      el("td", tr).textContent = row.trajectoryId;
      el("td", tr).textContent = row.total.toFixed(4);
      el("td", tr).textContent = row.totalIn.toFixed(4);
      el("td", tr).textContent = row.totalOut.toFixed(4);
      tr.addEventListener("click", () => renderBars(payload.trajectories[i].per_tau));

      // route overlay colored by attribution sign
      const source = payload.trajectories[i];
      if (source.coordinates.length > 1) {
        svgEl("polyline", routeLayer, {
          points: source.coordinates
            .map(([lon, lat]) => `${proj.x(lon).toFixed(1)},${proj.y(lat).toFixed(1)}`)
            .join(" "),
          class: "route",
          stroke: row.sign === "positive" ? PHI_POSITIVE : PHI_NEGATIVE,
        });
      }
    });
    if (rows.length > 0) renderBars(payload.trajectories[0].per_tau);
  }

  function renderBars(perTau: number[]): void {
    barsHost.replaceChildren();
    for (const bar of barChart(perTau)) {
      const column = el("div", barsHost, `bar bar-${bar.direction}`);
      column.style.height = `${Math.round(bar.extent * 60)}px`;
      column.title = `tau ${bar.tau}: ${bar.value.toFixed(4)}`;
    }
  }

  await presenter.setSlice(presenter.state.k);
}
