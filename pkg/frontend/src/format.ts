/**
 * Display strings for statistics, sourced verbatim from payload text.
 *
 * The studio never recomputes or reformats a statistic: each card shows the
 * exact bytes the service emitted for that value (null renders as
 * "undefined"). Anything needing arithmetic (plot geometry, slider
 * positions) lives elsewhere and is presentation-only.
 */
import { rawLiteral, type JsonPath } from "./rawjson.js";

export interface StatCard {
  label: string;
  /** Byte-exact value text from the service payload. */
  value: string;
}

export function statFromPayload(payloadText: string, label: string, path: JsonPath): StatCard {
  const raw = rawLiteral(payloadText, path);
  return { label, value: raw === "null" ? "undefined" : raw };
}

/** The cards shown next to a curve: crossing times, bandwidth, provenance. */
export function curveStatCards(payloadText: string): StatCard[] {
  return [
    statFromPayload(payloadText, "tau50", ["summary", "tau50"]),
    statFromPayload(payloadText, "tau70", ["summary", "tau70"]),
    statFromPayload(payloadText, "bandwidth", ["summary", "bandwidth"]),
    statFromPayload(payloadText, "monotonicity violations", ["monotonicity_violations"]),
    statFromPayload(payloadText, "scorer", ["scorer_id"]),
  ];
}

/** Metric cards for one completed edit job. */
export function editReportCards(jobText: string): StatCard[] {
  return [
    statFromPayload(jobText, "clip_img", ["report", "clip_img"]),
    statFromPayload(jobText, "clip_txt", ["report", "clip_txt"]),
    statFromPayload(jobText, "clip_dir", ["report", "clip_dir"]),
    statFromPayload(jobText, "tau", ["report", "tau"]),
  ];
}
