/** Typed client for the service API.
 *
 * Probabilities shown in the UI must be the service's bytes, never a
 * client-side reformat, so trial and log responses carry the exact numeric
 * literal extracted from the response text alongside the parsed number.
 */

import type {
  ClustersDocument,
  DonorSummary,
  RegionRow,
  SweepResponse,
  TrialLogDocument,
  TrialResponse,
} from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<{
  ok: boolean;
  status: number;
  text(): Promise<string>;
}>;

export class ServiceUnavailable extends Error {}

export class RequestFailed extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
  }
}

/** Exact numeric literals of a JSON field, in order of appearance. */
export function extractNumericLiterals(body: string, field: string): string[] {
  const pattern = new RegExp(
    `"${field}"\\s*:\\s*(-?\\d+(?:\\.\\d+)?(?:[eE][+-]?\\d+)?)`,
    "g",
  );
  const out: string[] = [];
  for (const match of body.matchAll(pattern)) out.push(match[1]);
  return out;
}

export class ApiClient {
  constructor(
    private baseUrl: string,
    private fetchImpl: FetchLike = fetch as unknown as FetchLike,
  ) {}

  private async request(path: string, init?: RequestInit): Promise<string> {
    let response;
    try {
      response = await this.fetchImpl(this.baseUrl + path, init);
    } catch (err) {
      throw new ServiceUnavailable(String(err));
    }
    const body = await response.text();
    if (!response.ok) {
      let code = "unknown";
      let message = body;
      try {
        const parsed = JSON.parse(body);
        code = parsed.code ?? code;
        message = parsed.message ?? message;
      } catch {
        /* non-JSON error body */
      }
      throw new RequestFailed(response.status, code, message);
    }
    return body;
  }

  async regions(): Promise<RegionRow[]> {
    return JSON.parse(await this.request("/regions"));
  }

  async clusters(): Promise<ClustersDocument> {
    return JSON.parse(await this.request("/clusters"));
  }

  async donors(label: string, indicator: string): Promise<DonorSummary> {
    const params = new URLSearchParams({ label, indicator });
    return JSON.parse(await this.request(`/donors?${params}`));
  }

  async submitTrial(
    session: string,
    payload: {
      base_region?: string;
      base_year?: number;
      overrides: Record<string, number>;
      cumulative?: boolean;
    },
  ): Promise<TrialResponse> {
    const body = await this.request(
      `/whatif/${encodeURIComponent(session)}/trial`,
      {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(payload),
      },
    );
    const parsed = JSON.parse(body) as TrialResponse;
    parsed.probabilityRaw = extractNumericLiterals(body, "probability")[0];
    return parsed;
  }

  async sessionLog(session: string): Promise<TrialLogDocument> {
    const body = await this.request(
      `/whatif/${encodeURIComponent(session)}/log`,
    );
    const parsed = JSON.parse(body) as TrialLogDocument;
    const raws = extractNumericLiterals(body, "probability");
    parsed.entries.forEach((entry, i) => {
      entry.probabilityRaw = raws[i];
    });
    return parsed;
  }

  async sweep(
    base: string,
    indicator: string,
    from: number,
    to: number,
    steps: number,
    overrides: Record<string, number>,
  ): Promise<SweepResponse> {
    const params = new URLSearchParams({
      base,
      indicator,
      from: String(from),
      to: String(to),
      steps: String(steps),
    });
    if (Object.keys(overrides).length > 0) {
      params.set("overrides", JSON.stringify(overrides));
    }
    return JSON.parse(await this.request(`/sweep?${params}`));
  }
}
