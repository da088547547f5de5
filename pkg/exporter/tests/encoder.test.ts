import { describe, expect, it } from "vitest";

import { DeterministicEncoder, JobError, loadEncoder } from "../src/encoder.js";
import { applyCropPolicy } from "../src/crop.js";
import { dropAmbiguousLabels } from "../src/labels.js";
import { syntheticImage } from "../src/export.js";

const encoder = new DeterministicEncoder("synthetic-test", {
  embedDim: 8,
  valueDim: 6,
  featureDim: 10,
  stride: 16,
});

describe("deterministic encoder", () => {
  it("identical inputs give identical embeddings", () => {
    const img = syntheticImage("twin");
    const a = encoder.encodeImage(img);
    const b = encoder.encodeImage(syntheticImage("twin"));
    expect([...a]).toEqual([...b]);
  });

  it("different content gives different embeddings", () => {
    const a = encoder.encodeImage(syntheticImage("one"));
    const b = encoder.encodeImage(syntheticImage("two"));
    expect([...a]).not.toEqual([...b]);
  });

  it("produces a 20x20 grid for a 320px crop at stride 16", () => {
    const cropped = applyCropPolicy(syntheticImage("any"), { size: 320 });
    expect([cropped.height, cropped.width]).toEqual([320, 320]);
    const grid = encoder.denseFeatures(cropped);
    expect([grid.channels, grid.height, grid.width]).toEqual([10, 20, 20]);
  });

  it("dense feature columns are unit norm", () => {
    const grid = encoder.denseFeatures(applyCropPolicy(syntheticImage("norm")));
    for (let y = 0; y < grid.height; y++) {
      for (let x = 0; x < grid.width; x++) {
        let sq = 0;
        for (let c = 0; c < grid.channels; c++) {
          sq += grid.data[(c * grid.height + y) * grid.width + x] ** 2;
        }
        expect(Math.abs(Math.sqrt(sq) - 1)).toBeLessThan(1e-12);
      }
    }
  });

  it("projection is fixed per model and has the declared shape", () => {
    const a = encoder.projection();
    const b = new DeterministicEncoder("synthetic-test", {
      embedDim: 8,
      valueDim: 6,
    }).projection();
    expect(a.length).toBe(8 * 6);
    expect([...a]).toEqual([...b]);
  });

  it("unknown checkpoints fail with a job error", () => {
    expect(() => loadEncoder("ViT-L/14@336px")).toThrow(JobError);
    expect(() => loadEncoder("ViT-L/14@336px")).toThrow(/checkpoint/);
  });
});

describe("crop policy", () => {
  it("center-crops after resizing the shorter side", () => {
    const wide = syntheticImage("wide", 100, 300);
    const out = applyCropPolicy(wide, { size: 64 });
    expect([out.height, out.width]).toEqual([64, 64]);
  });

  it("upscales smaller images instead of failing", () => {
    const tiny = syntheticImage("tiny", 32, 48);
    const out = applyCropPolicy(tiny, { size: 64 });
    expect([out.height, out.width]).toEqual([64, 64]);
  });
});

describe("ambiguous label filtering", () => {
  it("drops every class whose name repeats", () => {
    const classes = Array.from({ length: 1000 }, (_, classId) => ({
      classId,
      label: `class_${classId}`,
    }));
    // two names each used by two different classes
    classes[7].label = "crane";
    classes[512].label = "crane";
    classes[40].label = "maillot";
    classes[900].label = "maillot";
    const result = dropAmbiguousLabels(classes);
    expect(result.kept.length).toBe(996);
    expect(result.droppedLabels).toEqual(["crane", "maillot"]);
    expect(result.kept.some((c) => c.label === "crane")).toBe(false);
  });

  it("keeps everything when names are unique", () => {
    const classes = [
      { classId: 0, label: "cat" },
      { classId: 1, label: "dog" },
    ];
    const result = dropAmbiguousLabels(classes);
    expect(result.kept.length).toBe(2);
    expect(result.droppedLabels).toEqual([]);
  });
});
