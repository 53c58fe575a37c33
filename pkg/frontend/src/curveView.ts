/**
 * Curve rendering: success estimate vs normalized time, Wilson band,
 * crossing-time markers, the recommended probability band, and the
 * currently selected probability.
 *
 * Everything here is presentation geometry over served values; the numbers
 * printed next to the plot come from format.ts, not from these floats.
 */
import { parseRows } from "./mapping.js";
import type { CurvePayload } from "./types.js";

export interface Frame {
  width: number;
  height: number;
  pad: number;
}

export const DEFAULT_FRAME: Frame = { width: 640, height: 320, pad: 36 };

export function xOfTau(tau: number, frame: Frame): number {
  return frame.pad + tau * (frame.width - 2 * frame.pad);
}

export function yOfProbability(p: number, frame: Frame): number {
  return frame.height - frame.pad - p * (frame.height - 2 * frame.pad);
}

export interface CurveGeometry {
  linePoints: string;
  bandPath: string;
  markers: { label: string; x: number }[];
  recommendedBand: { yTop: number; yBottom: number };
}

export function curveGeometry(payload: CurvePayload, frame: Frame = DEFAULT_FRAME): CurveGeometry {
  const defined = parseRows(payload.rows)
    .filter((point) => point.n > 0 && point.estimate !== null)
    .sort((a, b) => a.tau - b.tau);
  const linePoints = defined
    .map((point) => `${xOfTau(point.tau, frame)},${yOfProbability(point.estimate!, frame)}`)
    .join(" ");

  const rowsByTau = payload.rows
    .map((row) => ({
      tau: Number(row.tau),
      lo: row.wilson_lo === "" ? null : Number(row.wilson_lo),
      hi: row.wilson_hi === "" ? null : Number(row.wilson_hi),
    }))
    .filter((row) => row.lo !== null && row.hi !== null)
    .sort((a, b) => a.tau - b.tau);
  const upper = rowsByTau.map((r) => `${xOfTau(r.tau, frame)},${yOfProbability(r.hi!, frame)}`);
  const lower = [...rowsByTau].reverse().map((r) => `${xOfTau(r.tau, frame)},${yOfProbability(r.lo!, frame)}`);
  const bandPath = upper.length > 0 ? `M ${upper.join(" L ")} L ${lower.join(" L ")} Z` : "";

  const markers: { label: string; x: number }[] = [];
  if (payload.summary.tau50 !== null) {
    markers.push({ label: "tau50", x: xOfTau(payload.summary.tau50, frame) });
  }
  if (payload.summary.tau70 !== null) {
    markers.push({ label: "tau70", x: xOfTau(payload.summary.tau70, frame) });
  }

  const [bandLo, bandHi] = payload.recommended_band;
  return {
    linePoints,
    bandPath,
    markers,
    recommendedBand: {
      yTop: yOfProbability(bandHi, frame),
      yBottom: yOfProbability(bandLo, frame),
    },
  };
}

export interface Selection {
  probability: number;
  stepK: number;
  tau: number;
}

/** Assemble the full SVG for the curve view. */
export function renderCurveSvg(
  payload: CurvePayload,
  selection: Selection | null,
  frame: Frame = DEFAULT_FRAME,
): string {
  const geom = curveGeometry(payload, frame);
  const parts: string[] = [];
  parts.push(
    `<svg viewBox="0 0 ${frame.width} ${frame.height}" xmlns="http://www.w3.org/2000/svg" class="curve-svg">`,
  );
  // advisory operating band
  parts.push(
    `<rect class="recommended-band" x="${frame.pad}" y="${geom.recommendedBand.yTop}" ` +
      `width="${frame.width - 2 * frame.pad}" height="${geom.recommendedBand.yBottom - geom.recommendedBand.yTop}"/>`,
  );
  if (geom.bandPath !== "") {
    parts.push(`<path class="wilson-band" d="${geom.bandPath}"/>`);
  }
  if (geom.linePoints !== "") {
    parts.push(`<polyline class="curve-line" fill="none" points="${geom.linePoints}"/>`);
  }
  for (const marker of geom.markers) {
    parts.push(
      `<line class="marker marker-${marker.label}" x1="${marker.x}" x2="${marker.x}" ` +
        `y1="${frame.pad}" y2="${frame.height - frame.pad}"/>`,
    );
    parts.push(
      `<text class="marker-label" x="${marker.x}" y="${frame.pad - 6}">${marker.label}</text>`,
    );
  }
  if (selection !== null) {
    const y = yOfProbability(selection.probability, frame);
    const x = xOfTau(selection.tau, frame);
    parts.push(`<line class="selection-level" x1="${frame.pad}" x2="${frame.width - frame.pad}" y1="${y}" y2="${y}"/>`);
    parts.push(`<circle class="selection-step" cx="${x}" cy="${y}" r="5"/>`);
  }
  // axes
  parts.push(
    `<line class="axis" x1="${frame.pad}" y1="${frame.height - frame.pad}" x2="${frame.width - frame.pad}" y2="${frame.height - frame.pad}"/>`,
  );
  parts.push(
    `<line class="axis" x1="${frame.pad}" y1="${frame.pad}" x2="${frame.pad}" y2="${frame.height - frame.pad}"/>`,
  );
  parts.push("</svg>");
  return parts.join("");
}
