/**
 * Component tests in a DOM: parent-arc clicks select exactly the node's
 * leaf set, and the rendered views never show a reward number anywhere.
 */
// @vitest-environment jsdom
import { readFileSync } from "node:fs";
import { join } from "node:path";
import { beforeEach, describe, expect, it } from "vitest";
import { ExplorationView } from "../src/exploration.js";
import { polarToScreen } from "../src/radial.js";
import { LayoutScene, LayoutSceneSchema } from "../src/schemas.js";
import { emptySelection } from "../src/selection.js";
import { SessionControls } from "../src/controls.js";

// import.meta.url is an http: URL under jsdom; resolve from the package root
const fixtures = JSON.parse(
  readFileSync(join(process.cwd(), "test", "fixtures", "payloads.json"), "utf-8"),
);
const scene: LayoutScene = LayoutSceneSchema.parse(fixtures.layout);

function makeCanvas(): HTMLCanvasElement {
  const canvas = document.createElement("canvas");
  canvas.width = 640;
  canvas.height = 640;
  // jsdom has no 2d context; interaction logic must not depend on drawing
  (canvas as unknown as { getContext: () => null }).getContext = () => null;
  return canvas;
}

const viewport = { cx: 320, cy: 320, scale: 312 };

describe("exploration interactions on the fixture scene", () => {
  let view: ExplorationView;

  beforeEach(() => {
    view = new ExplorationView(makeCanvas());
    view.setScene(scene);
  });

  it("clicking a parent arc selects exactly its leaf set", () => {
    const parent = scene.arcs.find((a) => a.ring === 2)!;
    const midAngle = (parent.start_angle + parent.end_angle) / 2;
    const midRadius = (parent.inner_radius + parent.outer_radius) / 2;
    const [x, y] = polarToScreen(midRadius, midAngle, viewport);
    const next = view.handleClick(x, y, emptySelection());

    const expected = scene.arcs
      .filter(
        (a) =>
          a.ring === 0 &&
          a.leaf_behavior &&
          (a.start_angle + a.end_angle) / 2 >= parent.start_angle &&
          (a.start_angle + a.end_angle) / 2 < parent.end_angle,
      )
      .map((a) => a.leaf_behavior!);
    expect([...next.left].sort()).toEqual(expected.sort());
    expect(expected.length).toBeGreaterThan(1);
  });

  it("clicking a leaf toggles membership", () => {
    const leaf = scene.arcs.find((a) => a.ring === 0 && a.leaf_behavior)!;
    const midAngle = (leaf.start_angle + leaf.end_angle) / 2;
    const midRadius = (leaf.inner_radius + leaf.outer_radius) / 2;
    const [x, y] = polarToScreen(midRadius, midAngle, viewport);
    const once = view.handleClick(x, y, emptySelection());
    expect(once.left.has(leaf.leaf_behavior!)).toBe(true);
    const twice = view.handleClick(x, y, once);
    expect(twice.left.has(leaf.leaf_behavior!)).toBe(false);
  });
});

describe("DOM hygiene", () => {
  it("session controls render no reward numbers", () => {
    const root = document.createElement("div");
    document.body.append(root);
    const controls = new SessionControls(
      root,
      // the controls only touch the api when advancing; not exercised here
      {} as never,
      () => "s0001",
      () => undefined,
    );
    controls.recordComparison({
      comparisonId: "#1",
      sizes: [2, 3],
      verdict: "g1_preferred",
      queriesGenerated: 3,
    });
    controls.render("collecting_feedback", 0.0);
    const text = document.body.textContent ?? "";
    for (const word of ["reward", "return", "score", "predicted"]) {
      expect(text.toLowerCase().includes(word), word).toBe(false);
    }
    expect(root.querySelectorAll(".history-panel li")).toHaveLength(1);
    document.body.removeChild(root);
  });

  it("scene payload carries no reward-like attribute to render", () => {
    const banned = ["reward", "return", "score", "true_", "predicted"];
    const walk = (doc: unknown): string[] =>
      Array.isArray(doc)
        ? doc.flatMap(walk)
        : doc && typeof doc === "object"
          ? Object.entries(doc).flatMap(([k, v]) => [k, ...walk(v)])
          : [];
    for (const key of walk(scene)) {
      for (const word of banned) {
        expect(key.toLowerCase().includes(word), key).toBe(false);
      }
    }
  });
});
