/**
 * Client-side probability-to-step mapping.
 *
 * Must stay bit-for-bit equivalent to the server's rule so the slider
 * preview and the submitted job always agree: among defined grid points,
 * minimize |estimate - p|, resolving ties toward larger tau (the earlier,
 * noisier intervention). Parity is enforced by recorded fixtures and by a
 * dry-run contract test against the live service.
 */
import type { CurveRow } from "./types.js";

export interface GridPoint {
  stepK: number;
  tau: number;
  n: number;
  estimate: number | null;
}

export function parseRows(rows: CurveRow[]): GridPoint[] {
  return rows.map((row) => ({
    stepK: Number(row.step_k),
    tau: Number(row.tau),
    n: Number(row.n),
    estimate: row.estimate === "" ? null : Number(row.estimate),
  }));
}

export function probabilityToStep(rows: CurveRow[], p: number): number {
  if (!(p >= 0 && p <= 1)) {
    throw new RangeError(`probability ${p} outside [0, 1]`);
  }
  let best: GridPoint | null = null;
  let bestDist = Infinity;
  for (const point of parseRows(rows)) {
    if (point.n === 0 || point.estimate === null) continue;
    const dist = Math.abs(point.estimate - p);
    if (dist < bestDist || (dist === bestDist && best !== null && point.tau > best.tau)) {
      best = point;
      bestDist = dist;
    }
  }
  if (best === null) {
    throw new Error("curve has no defined points");
  }
  return best.stepK;
}

/** The curve's value at the proposed step, shown before any job is submitted. */
export function predictedEstimate(rows: CurveRow[], stepK: number): number | null {
  const point = parseRows(rows).find((candidate) => candidate.stepK === stepK);
  return point === undefined ? null : point.estimate;
}
