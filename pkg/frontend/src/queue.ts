import type { ApiClient } from "./api.js";
import type { PendingResponse } from "./types.js";

/** Minimal slice of the Storage interface, so tests can pass a stub. */
export interface KeyValueStore {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
  removeItem(key: string): void;
}

/**
 * Holds at most one not-yet-acknowledged response.
 *
 * A response is saved before it is sent and cleared only on server
 * acknowledgment, so a reload (or a network failure) between selection and
 * ack never loses it; the server treats resubmission idempotently.
 */
export class PendingQueue {
  constructor(
    private readonly store: KeyValueStore,
    private readonly key: string = "unaware.pending",
  ) {}

  save(response: PendingResponse): void {
    this.store.setItem(this.key, JSON.stringify(response));
  }

  load(): PendingResponse | null {
    const raw = this.store.getItem(this.key);
    if (raw === null) return null;
    try {
      return JSON.parse(raw) as PendingResponse;
    } catch {
      this.store.removeItem(this.key);
      return null;
    }
  }

  clear(): void {
    this.store.removeItem(this.key);
  }

  /** Resend the pending response, if any; true when the queue is empty after. */
  async flush(client: ApiClient): Promise<boolean> {
    const pending = this.load();
    if (pending === null) return true;
    try {
      await client.submitResponse(pending);
      this.clear();
      return true;
    } catch {
      return false;
    }
  }
}
