import type { KappaResult, PendingResponse, SubmitAck, Tallies, Task } from "./types.js";

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/** Thin typed client for the annotation service; the single source of truth. */
export class ApiClient {
  private readonly fetchFn: FetchLike;

  constructor(
    private readonly baseUrl: string = "",
    fetchFn?: FetchLike,
  ) {
    this.fetchFn = fetchFn ?? ((input, init) => globalThis.fetch(input, init));
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(this.baseUrl + path, init);
    const body = await response.json().catch(() => ({}));
    if (!response.ok) {
      const message =
        typeof body === "object" && body !== null && "error" in body
          ? String((body as { error: unknown }).error)
          : `request failed with status ${response.status}`;
      throw new ApiError(response.status, message);
    }
    return body as T;
  }

  fetchTask(session: string): Promise<Task> {
    return this.request<Task>(`/api/task?session=${encodeURIComponent(session)}`);
  }

  submitResponse(response: PendingResponse): Promise<SubmitAck> {
    return this.request<SubmitAck>("/api/response", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(response),
    });
  }

  fetchTallies(): Promise<Tallies> {
    return this.request<Tallies>("/api/admin/tallies");
  }

  fetchKappa(a: string, b: string): Promise<KappaResult> {
    return this.request<KappaResult>(
      `/api/admin/kappa?a=${encodeURIComponent(a)}&b=${encodeURIComponent(b)}`,
    );
  }

  uploadSource(name: string, annotations: Record<string, string | null>): Promise<unknown> {
    return this.request("/api/admin/source", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ name, annotations }),
    });
  }
}
