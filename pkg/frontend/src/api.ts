/** Typed client for the switchpoint HTTP API. */
import type {
  CurvePayload,
  EditJobPayload,
  EditProposalPayload,
  ManifestInfo,
  TaxonomyPayload,
} from "./types.js";

export const API_SCHEMA_VERSION = 1;

export class ApiError extends Error {
  constructor(message: string, readonly status?: number) {
    super(message);
  }
}

export interface RawResponse<T> {
  /** Verbatim response body; stat rendering reads literals out of this. */
  text: string;
  json: T;
}

export class ApiClient {
  constructor(readonly baseUrl: string, readonly fetchImpl: typeof fetch = fetch) {}

  private async request(path: string, init?: RequestInit): Promise<string> {
    let response: Response;
    try {
      response = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    } catch (err) {
      throw new ApiError(`service unreachable: ${String(err)}`);
    }
    const text = await response.text();
    if (!response.ok) {
      throw new ApiError(`${path} failed (${response.status}): ${text}`, response.status);
    }
    return text;
  }

  private checkSchema(json: { schema_version?: number }, path: string): void {
    if (json.schema_version !== API_SCHEMA_VERSION) {
      throw new ApiError(`${path}: unexpected schema_version ${json.schema_version}`);
    }
  }

  async getRaw<T extends { schema_version?: number }>(path: string): Promise<RawResponse<T>> {
    const text = await this.request(path);
    const json = JSON.parse(text) as T;
    this.checkSchema(json, path);
    return { text, json };
  }

  async post<T extends { schema_version?: number }>(path: string, body: unknown): Promise<RawResponse<T>> {
    const text = await this.request(path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    const json = JSON.parse(text) as T;
    this.checkSchema(json, path);
    return { text, json };
  }

  taxonomy(): Promise<RawResponse<TaxonomyPayload>> {
    return this.getRaw("/taxonomy");
  }

  async manifests(): Promise<ManifestInfo[]> {
    const { json } = await this.getRaw<{ schema_version: number; manifests: ManifestInfo[] }>("/manifests");
    return json.manifests;
  }

  curve(manifestId: string, pair: string, direction = "insertion"): Promise<RawResponse<CurvePayload>> {
    const params = new URLSearchParams({ pair, direction });
    return this.getRaw(`/manifests/${manifestId}/curves?${params}`);
  }

  summary(manifestId: string): Promise<RawResponse<{ schema_version: number; pairs: unknown[] }>> {
    return this.getRaw(`/manifests/${manifestId}/summary`);
  }

  postEdit(body: {
    pair: string;
    probability: number;
    seed: number;
    manifest_id?: string;
    dry_run?: boolean;
  }): Promise<RawResponse<EditProposalPayload>> {
    return this.post("/edits", body);
  }

  edit(editId: string): Promise<RawResponse<EditJobPayload>> {
    return this.getRaw(`/edits/${editId}`);
  }

  imageUrl(ref: string): string {
    return `${this.baseUrl}/images/${ref}`;
  }
}
