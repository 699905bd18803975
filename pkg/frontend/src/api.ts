/** Typed client for the cartoprompt service endpoints. */

export interface Descriptor {
  center: { lat: number; lon: number };
  radius_m: number;
  provinces: string[];
  districts: string[];
  amenity_counts: Record<string, number>;
  building_count: number;
  building_coverage_pct: number;
  coverage_entries: { category: string; value: number; pct: number }[];
  road_lengths_m: Record<string, number>;
  rail_lengths_m: Record<string, number>;
}

export interface PrepromptPayload {
  descriptor: Descriptor;
  preprompt: string;
}

export interface AskReply {
  preprompt: string;
  answer: string;
  model: string;
  latency_ms: number;
}

export interface EmbeddingFeature {
  type: "Feature";
  geometry: { type: "Point"; coordinates: [number, number] };
  properties: { id: string; color: string } & Record<string, unknown>;
}

export interface EmbeddingCollection {
  type: "FeatureCollection";
  features: EmbeddingFeature[];
}

/** A non-2xx response, carrying the service's error envelope. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

async function raise(res: Response): Promise<never> {
  let code = "unknown_error";
  let message = `HTTP ${res.status}`;
  try {
    const body = await res.json();
    if (typeof body.code === "string") code = body.code;
    if (typeof body.message === "string") message = body.message;
  } catch {
    // non-JSON error body; keep the status-line message
  }
  throw new ApiError(res.status, code, message);
}

export class ServiceClient {
  constructor(readonly baseUrl: string = "") {}

  async preprompt(
    lat: number,
    lon: number,
    radiusM: number,
    signal?: AbortSignal,
  ): Promise<PrepromptPayload> {
    const params = new URLSearchParams({
      lat: String(lat),
      lon: String(lon),
      radius_m: String(radiusM),
    });
    const res = await fetch(`${this.baseUrl}/v1/preprompt?${params}`, { signal });
    if (!res.ok) await raise(res);
    return res.json();
  }

  async ask(
    lat: number,
    lon: number,
    question: string,
    radiusM?: number,
  ): Promise<AskReply> {
    const body: Record<string, unknown> = { lat, lon, question };
    if (radiusM !== undefined) body.radius_m = radiusM;
    const res = await fetch(`${this.baseUrl}/v1/ask`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!res.ok) await raise(res);
    return res.json();
  }

  async embeddings(): Promise<EmbeddingCollection> {
    const res = await fetch(`${this.baseUrl}/v1/embeddings`);
    if (!res.ok) await raise(res);
    return res.json();
  }
}
