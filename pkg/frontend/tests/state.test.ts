import { describe, expect, it } from "vitest";

import { DEFAULT_STATE, RevisionGate, ViewState, decodeState, encodeState } from "../src/state.js";

describe("view state fragment", () => {
  it("round-trips every field", () => {
    const state: ViewState = {
      k: 17,
      playing: true,
      horizon: 4,
      selectedRegion: 6,
      selectedCell: [3, 9],
      topK: 8,
      channel: "out",
      heatmap: true,
    };
    expect(decodeState(encodeState(state))).toEqual(state);
  });

  it("round-trips the defaults", () => {
    expect(decodeState(encodeState(DEFAULT_STATE))).toEqual(DEFAULT_STATE);
  });

  it("tolerates a leading hash and junk keys", () => {
    const state = decodeState("#k=3&bogus=1&h=2");
    expect(state.k).toBe(3);
    expect(state.horizon).toBe(2);
  });

  it("the default horizon is 20 minutes of 10-minute slices", () => {
    expect(DEFAULT_STATE.horizon).toBe(2);
  });
});

describe("revision gate", () => {
  it("discards responses from a superseded request", () => {
    const gate = new RevisionGate();
    const first = gate.bump();
    const second = gate.bump();
    expect(gate.isCurrent(first)).toBe(false);
    expect(gate.isCurrent(second)).toBe(true);
  });
});
