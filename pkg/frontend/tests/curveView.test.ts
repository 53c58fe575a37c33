import { readFileSync } from "node:fs";
import { fileURLToPath } from "node:url";
import { describe, expect, it } from "vitest";

import { curveGeometry, renderCurveSvg, xOfTau, yOfProbability, DEFAULT_FRAME } from "../src/curveView.js";
import type { CurvePayload } from "../src/types.js";

const curvePayload: CurvePayload = JSON.parse(
  readFileSync(fileURLToPath(new URL("./fixtures/payloads/curve.json", import.meta.url)), "utf-8"),
);

describe("curve view geometry", () => {
  it("places markers exactly at the served crossing times", () => {
    const geom = curveGeometry(curvePayload);
    const markers = Object.fromEntries(geom.markers.map((m) => [m.label, m.x]));
    expect(markers["tau50"]).toBe(xOfTau(curvePayload.summary.tau50!, DEFAULT_FRAME));
    expect(markers["tau70"]).toBe(xOfTau(curvePayload.summary.tau70!, DEFAULT_FRAME));
  });

  it("shades the recommended band between the served bounds", () => {
    const geom = curveGeometry(curvePayload);
    const [lo, hi] = curvePayload.recommended_band;
    expect(geom.recommendedBand.yBottom).toBe(yOfProbability(lo, DEFAULT_FRAME));
    expect(geom.recommendedBand.yTop).toBe(yOfProbability(hi, DEFAULT_FRAME));
    expect(geom.recommendedBand.yTop).toBeLessThan(geom.recommendedBand.yBottom);
  });

  it("draws one polyline vertex per defined grid point", () => {
    const geom = curveGeometry(curvePayload);
    const definedRows = curvePayload.rows.filter((r) => Number(r.n) > 0);
    expect(geom.linePoints.split(" ").length).toBe(definedRows.length);
    expect(geom.bandPath.startsWith("M ")).toBe(true);
  });

  it("renders selection level and chosen step into the svg", () => {
    const svg = renderCurveSvg(curvePayload, { probability: 0.6, stepK: 4, tau: 0.6 });
    expect(svg).toContain("selection-level");
    expect(svg).toContain("selection-step");
    expect(svg).toContain("marker-tau50");
    expect(svg).toContain("recommended-band");
  });

  it("omits selection markup when nothing is selected", () => {
    const svg = renderCurveSvg(curvePayload, null);
    expect(svg).not.toContain("selection-step");
  });
});
