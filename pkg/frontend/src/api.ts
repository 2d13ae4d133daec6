// Typed client for the generation service JSON API.

export interface Artist {
  id: number;
  name: string;
  genre: string | null;
}

export interface ModelInfo {
  mode: string;
  checkpoint_id: string;
}

export interface GenerateParams {
  artist_id: number;
  mode: string;
  count: number;
  temperature: number;
  seed?: number;
}

export interface GenerateResult {
  lines: string[];
  seed_used: number;
}

export interface FieldError {
  field: string;
  message: string;
}

export class ApiError extends Error {
  status: number;
  fields: FieldError[];

  constructor(status: number, message: string, fields: FieldError[] = []) {
    super(message);
    this.status = status;
    this.fields = fields;
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

async function parseError(res: Response): Promise<ApiError> {
  let fields: FieldError[] = [];
  let message = `request failed with status ${res.status}`;
  try {
    const body = await res.json();
    if (Array.isArray(body.detail)) {
      fields = body.detail as FieldError[];
      message = fields.map((f) => `${f.field}: ${f.message}`).join("; ");
    } else if (typeof body.detail === "string") {
      message = body.detail;
    }
  } catch {
    // non-JSON error body; keep the status message
  }
  return new ApiError(res.status, message, fields);
}

export class ApiClient {
  constructor(
    private baseUrl: string = "",
    private fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async get<T>(path: string): Promise<T> {
    const res = await this.fetchFn(this.baseUrl + path);
    if (!res.ok) throw await parseError(res);
    return (await res.json()) as T;
  }

  health(): Promise<{ status: string }> {
    return this.get("/api/health");
  }

  artists(): Promise<Artist[]> {
    return this.get("/api/artists");
  }

  models(): Promise<ModelInfo[]> {
    return this.get("/api/models");
  }

  async generate(params: GenerateParams): Promise<GenerateResult> {
    const res = await this.fetchFn(this.baseUrl + "/api/generate", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(params),
    });
    if (!res.ok) throw await parseError(res);
    return (await res.json()) as GenerateResult;
  }
}
