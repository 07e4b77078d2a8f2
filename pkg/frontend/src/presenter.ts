// The workbench presenter: owns the ViewState, talks to the API, and
// notifies the rendering layer. Keeping this DOM-free makes the
// interaction contracts directly testable.

import {
  ApiClient,
  GlyphsResponse,
  JobStatus,
  TrajectoriesResponse,
} from "./api.js";
import { DEFAULT_STATE, RevisionGate, ViewState, encodeState } from "./state.js";

export interface PresenterEvents {
  onState?: (state: ViewState) => void;
  onGlyphs?: (glyphs: GlyphsResponse) => void;
  onJobState?: (state: JobStatus["state"] | "idle", detail?: JobStatus) => void;
  onTrajectories?: (payload: TrajectoriesResponse) => void;
  onFragment?: (fragment: string) => void;
  onError?: (message: string) => void;
}

const DEFAULT_STEPS = 6;

export class Presenter {
  state: ViewState;
  private gate = new RevisionGate();
  private pollDelayMs: number;

  constructor(
    private api: ApiClient,
    private events: PresenterEvents = {},
    initial: ViewState = { ...DEFAULT_STATE },
    pollDelayMs = 300,
  ) {
    this.state = initial;
    this.pollDelayMs = pollDelayMs;
  }

  private emitState(): void {
    this.events.onState?.(this.state);
    this.events.onFragment?.(encodeState(this.state));
  }

  async setSlice(k: number): Promise<void> {
    this.state = { ...this.state, k };
    this.emitState();
    await this.refreshGlyphs();
    if (this.state.selectedCell) await this.requestAttribution();
  }

  /** Horizon changes re-request glyphs AND re-run the attribution for
   * the selected cell, since both depend on it. */
  async setHorizon(horizon: number): Promise<void> {
    this.state = { ...this.state, horizon };
    this.emitState();
    await this.refreshGlyphs();
    if (this.state.selectedCell) await this.requestAttribution();
  }

  async selectRegion(regionId: number | null): Promise<void> {
    this.state = { ...this.state, selectedRegion: regionId, selectedCell: null };
    this.emitState();
  }

  async selectCell(m: number, n: number): Promise<void> {
    this.state = { ...this.state, selectedCell: [m, n] };
    this.emitState();
    await this.requestAttribution();
  }

  toggleHeatmap(): void {
    // deliberately does not touch k or any selection
    this.state = { ...this.state, heatmap: !this.state.heatmap };
    this.emitState();
  }

  async refreshGlyphs(): Promise<void> {
    const revision = this.gate.bump();
    try {
      const glyphs = await this.api.glyphs(
        this.state.k, this.state.horizon, this.state.channel, DEFAULT_STEPS);
      if (this.gate.isCurrent(revision)) this.events.onGlyphs?.(glyphs);
    } catch (e) {
      if (this.gate.isCurrent(revision)) this.events.onError?.(String(e));
    }
  }

  async requestAttribution(): Promise<void> {
    const cell = this.state.selectedCell;
    if (!cell) return;
    const revision = this.gate.bump();
    this.events.onJobState?.("queued");
    try {
      const jobId = await this.api.submitAttribution({
        kind: "cell",
        cell,
        channel: this.state.channel,
        horizon: this.state.horizon,
        grouping: "cell",
        nsamples: 2048,
        seed: 7,
        k: this.state.k,
      });
      const status = await this.pollJob(jobId, revision);
      if (!this.gate.isCurrent(revision) || status === null) return;
      if (status.state === "failed") {
        this.events.onError?.(status.error ?? "attribution failed");
        return;
      }
      const trajectories = await this.api.jobTrajectories(jobId, this.state.topK);
      if (this.gate.isCurrent(revision)) {
        this.events.onTrajectories?.(trajectories);
      }
    } catch (e) {
      if (this.gate.isCurrent(revision)) this.events.onError?.(String(e));
    }
  }

  private async pollJob(jobId: string, revision: number): Promise<JobStatus | null> {
    for (;;) {
      const status = await this.api.jobStatus(jobId);
      if (!this.gate.isCurrent(revision)) return null;
      this.events.onJobState?.(status.state, status);
      if (status.state === "done" || status.state === "failed") return status;
      await new Promise((resolve) => setTimeout(resolve, this.pollDelayMs));
    }
  }
}
