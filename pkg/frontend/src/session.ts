/**
 * Edit session: slider selection, job submission, and the append-only
 * history that powers the side-by-side comparison grid.
 *
 * One edit job is in flight per session at a time; curve numbers shown in
 * the proposal come from the already-fetched curve payload, and the final
 * metrics come from the job payload, so nothing is computed UI-side.
 */
import type { ApiClient, RawResponse } from "./api.js";
import { probabilityToStep, predictedEstimate } from "./mapping.js";
import type { CurvePayload, EditJobPayload } from "./types.js";

export interface InterventionProposal {
  probability: number;
  stepK: number;
  tau: number;
  predicted: number | null;
}

export interface HistoryEntry {
  probability: number;
  stepK: number;
  jobId: string;
  status: "completed" | "failed";
  imageRef?: string;
  baseImageRef?: string;
  report?: EditJobPayload["report"];
  /** Verbatim job payload text for byte-faithful metric cards. */
  jobText?: string;
  error?: string;
}

const POLL_INTERVAL_MS = 50;

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

export class EditSession {
  private readonly entries: HistoryEntry[] = [];
  private inFlight = false;

  constructor(
    readonly api: ApiClient,
    readonly pair: string,
    readonly seed: number,
    readonly manifestId?: string,
  ) {}

  get history(): readonly HistoryEntry[] {
    return this.entries;
  }

  /** Preview only: the step the server would pick and the curve value there. */
  selectIntervention(curve: CurvePayload, probability: number): InterventionProposal {
    const stepK = probabilityToStep(curve.rows, probability);
    const row = curve.rows[stepK];
    if (row === undefined) throw new Error(`curve has no row for step ${stepK}`);
    return {
      probability,
      stepK,
      tau: Number(row.tau),
      predicted: predictedEstimate(curve.rows, stepK),
    };
  }

  /** Submit the edit, poll to completion, and append a history card. */
  async runEdit(probability: number, timeoutMs = 10_000): Promise<HistoryEntry> {
    if (this.inFlight) {
      throw new Error("an edit is already in flight for this session");
    }
    this.inFlight = true;
    try {
      const posted = await this.api.postEdit({
        pair: this.pair,
        probability,
        seed: this.seed,
        ...(this.manifestId === undefined ? {} : { manifest_id: this.manifestId }),
      });
      const jobId = posted.json.edit_id;
      if (jobId === undefined) throw new Error("service did not return an edit id");
      const final = await this.pollJob(jobId, timeoutMs);
      const entry: HistoryEntry =
        final.json.status === "completed"
          ? {
              probability,
              stepK: posted.json.step_k,
              jobId,
              status: "completed",
              imageRef: final.json.image_ref,
              baseImageRef: final.json.base_image_ref,
              report: final.json.report,
              jobText: final.text,
            }
          : {
              probability,
              stepK: posted.json.step_k,
              jobId,
              status: "failed",
              error: final.json.error ?? "edit job failed",
            };
      this.entries.push(entry);
      return entry;
    } finally {
      this.inFlight = false;
    }
  }

  private async pollJob(jobId: string, timeoutMs: number): Promise<RawResponse<EditJobPayload>> {
    const deadline = Date.now() + timeoutMs;
    while (true) {
      const job = await this.api.edit(jobId);
      if (job.json.status === "completed" || job.json.status === "failed") {
        return job;
      }
      if (Date.now() > deadline) {
        throw new Error(`edit ${jobId} did not finish within ${timeoutMs}ms`);
      }
      await sleep(POLL_INTERVAL_MS);
    }
  }
}
