// Typed client for the flow service. Every number the UI shows comes
// straight out of one of these response payloads.

export interface GridSpecJson {
  lon_min: number;
  lon_max: number;
  lat_min: number;
  lat_max: number;
  rows: number;
  cols: number;
  slice_seconds: number;
  epoch_origin: number;
}

export interface GeometryResponse {
  dataset_id: string;
  grid: GridSpecJson;
  regions: {
    type: "FeatureCollection";
    features: Array<{
      type: "Feature";
      geometry: { type: string; coordinates: unknown };
      properties: { region_id: number; intersections: number[]; adjacent: number[] };
    }>;
  };
}

export interface TensorJson {
  dims: number[];
  values: number[][][];
}

export interface FlowsResponse extends TensorJson {
  k: number;
}

export interface PredictResponse {
  k: number;
  steps: number;
  predictions: TensorJson[];
}

export interface GlyphSector {
  positive_sum: number;
  negative_sum: number;
}

export interface GlyphPayload {
  region_id: number;
  predicted_series: number[];
  selected_horizon: number;
  sectors: GlyphSector[];
}

export interface GlyphsResponse {
  k: number;
  horizon: number;
  channel: string;
  glyphs: GlyphPayload[];
}

export interface AttributionRequest {
  kind: "cell" | "region";
  cell?: [number, number];
  region_id?: number;
  channel: "in" | "out";
  horizon: number;
  grouping: "cell" | "region";
  nsamples: number;
  seed: number;
  k: number;
  split_mode?: "equal" | "proportional";
}

export type JobState = "queued" | "running" | "done" | "failed";

export interface JobStatus {
  job_id: string;
  kind: string;
  state: JobState;
  params: Record<string, unknown>;
  result?: {
    phi: Record<string, number>;
    base_value: number;
    full_value: number;
    efficiency_residual: number;
    trajectory_residual?: number;
    trajectory_count?: number;
  };
  error?: string;
}

export interface TrajectoryRow {
  trajectory_id: string;
  total: number;
  total_in: number;
  total_out: number;
  per_tau: number[];
  shares: Record<string, number>;
  coordinates: Array<[number, number]>;
}

export interface TrajectoriesResponse {
  job_id: string;
  k: number;
  residual: number;
  trajectories: TrajectoryRow[];
}

export interface RegionGridsResponse {
  region_id: number;
  k: number;
  channel: string;
  steps: number;
  cells: Array<{
    m: number;
    n: number;
    current: { in: number; out: number };
    series: number[];
  }>;
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

export class ApiClient {
  constructor(
    private base: string = "",
    private fetchImpl: FetchLike = (u, i) => fetch(u, i),
  ) {}

  private async get<T>(path: string): Promise<T> {
    const resp = await this.fetchImpl(this.base + path);
    if (!resp.ok) throw new ApiError(resp.status, await resp.text());
    return (await resp.json()) as T;
  }

  geometry(): Promise<GeometryResponse> {
    return this.get("/api/geometry");
  }

  flows(k: number): Promise<FlowsResponse> {
    return this.get(`/api/flows?k=${k}`);
  }

  predict(k: number, steps: number): Promise<PredictResponse> {
    return this.get(`/api/predict?k=${k}&steps=${steps}`);
  }

  glyphs(k: number, horizon: number, channel: string, steps: number): Promise<GlyphsResponse> {
    return this.get(
      `/api/glyphs?k=${k}&horizon=${horizon}&channel=${channel}&steps=${steps}`,
    );
  }

  regionGrids(regionId: number, k: number, channel: string, steps: number): Promise<RegionGridsResponse> {
    return this.get(
      `/api/region/${regionId}/grids?k=${k}&channel=${channel}&steps=${steps}`,
    );
  }

  async submitAttribution(req: AttributionRequest): Promise<string> {
    const resp = await this.fetchImpl(this.base + "/api/attribution", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(req),
    });
    if (!resp.ok) throw new ApiError(resp.status, await resp.text());
    const body = (await resp.json()) as { job_id: string };
    return body.job_id;
  }

  jobStatus(jobId: string): Promise<JobStatus> {
    return this.get(`/api/attribution/${jobId}`);
  }

  jobTrajectories(jobId: string, topK: number): Promise<TrajectoriesResponse> {
    return this.get(`/api/attribution/${jobId}/trajectories?k=${topK}`);
  }
}
