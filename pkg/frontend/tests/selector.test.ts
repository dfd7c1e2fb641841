import { describe, expect, it } from "vitest";

import { boxSelect, hitTest, toggle, unassignedIds } from "../src/selector.js";
import type { PreviewPath } from "../src/protocol.js";

const PATHS: PreviewPath[] = [
  { id: 0, kind: "outline", points: [[0, 0.2], [1.6, 0.2]] },
  { id: 1, kind: "infill", points: [[0.4, 1.0], [1.2, 1.0]] },
  { id: 2, kind: "outline", points: [[0.4, 1.4], [0.4, 1.9]] },
];

describe("hit testing", () => {
  it("selects the nearest path within tolerance", () => {
    expect(hitTest(PATHS, [0.8, 0.22])).toBe(0);
    expect(hitTest(PATHS, [0.8, 1.03])).toBe(1);
  });

  it("misses when farther than the tolerance", () => {
    expect(hitTest(PATHS, [0.8, 0.6])).toBeNull();
  });

  it("prefers the closer of two nearby paths", () => {
    expect(hitTest(PATHS, [0.41, 1.45], 0.8)).toBe(2);
  });
});

describe("box selection", () => {
  it("selects paths fully inside the box", () => {
    expect(boxSelect(PATHS, [0.3, 0.9], [1.3, 2.0])).toEqual([1, 2]);
  });

  it("corner order does not matter", () => {
    expect(boxSelect(PATHS, [1.3, 2.0], [0.3, 0.9])).toEqual([1, 2]);
  });

  it("excludes partially covered paths", () => {
    expect(boxSelect(PATHS, [0.3, 0.9], [1.0, 2.0])).toEqual([2]);
  });
});

describe("selection upkeep", () => {
  it("toggle adds and removes", () => {
    const sel = new Set<number>();
    toggle(sel, 1);
    expect([...sel]).toEqual([1]);
    toggle(sel, 1);
    expect(sel.size).toBe(0);
  });

  it("unassigned ids exclude every assigned id", () => {
    expect(unassignedIds(PATHS, { d1: [0], d2: [2] })).toEqual([1]);
    expect(unassignedIds(PATHS, {})).toEqual([0, 1, 2]);
  });
});
