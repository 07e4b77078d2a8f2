// ViewState and its URL-fragment serialization. Every selection the
// analyst makes is captured here so a shared link restores the exact
// view.

export interface ViewState {
  k: number;
  playing: boolean;
  /** prediction horizon in steps; 2 steps of 10 min = the 20 min default */
  horizon: number;
  selectedRegion: number | null;
  selectedCell: [number, number] | null;
  topK: number;
  channel: "in" | "out";
  heatmap: boolean;
}

export const DEFAULT_STATE: ViewState = {
  k: 0,
  playing: false,
  horizon: 2,
  selectedRegion: null,
  selectedCell: null,
  topK: 5,
  channel: "in",
  heatmap: false,
};

export function encodeState(s: ViewState): string {
  const parts: string[] = [
    `k=${s.k}`,
    `h=${s.horizon}`,
    `top=${s.topK}`,
    `ch=${s.channel}`,
  ];
  if (s.playing) parts.push("play=1");
  if (s.heatmap) parts.push("hm=1");
  if (s.selectedRegion !== null) parts.push(`r=${s.selectedRegion}`);
  if (s.selectedCell !== null) parts.push(`c=${s.selectedCell[0]},${s.selectedCell[1]}`);
  return parts.join("&");
}

export function decodeState(fragment: string): ViewState {
  const s: ViewState = { ...DEFAULT_STATE };
  const clean = fragment.startsWith("#") ? fragment.slice(1) : fragment;
  for (const part of clean.split("&")) {
    const [key, value] = part.split("=");
    if (value === undefined) continue;
    switch (key) {
      case "k": s.k = parseInt(value, 10); break;
      case "h": s.horizon = parseInt(value, 10); break;
      case "top": s.topK = parseInt(value, 10); break;
      case "ch": s.channel = value === "out" ? "out" : "in"; break;
      case "play": s.playing = value === "1"; break;
      case "hm": s.heatmap = value === "1"; break;
      case "r": s.selectedRegion = parseInt(value, 10); break;
      case "c": {
        const [m, n] = value.split(",").map((x) => parseInt(x, 10));
        s.selectedCell = [m, n];
        break;
      }
    }
  }
  return s;
}

/**
 * Monotone revision counter: each state change bumps the revision and
 * responses tagged with an older revision are dropped, so a slow
 * request can never overwrite a newer view.
 */
export class RevisionGate {
  private revision = 0;

  bump(): number {
    return ++this.revision;
  }

  isCurrent(revision: number): boolean {
    return revision === this.revision;
  }
}
