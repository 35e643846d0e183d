import { ApiClient } from "./api.js";
import { PendingQueue } from "./queue.js";
import type { PendingResponse, Task } from "./types.js";
import {
  EMPTY_SELECTION,
  Selection,
  canSubmit,
  renderRetryBanner,
  renderTaskView,
} from "./views.js";

/**
 * State machine for the annotator page.
 *
 * Rendering goes through the injected callback so the controller stays
 * DOM-free and testable; the page bootstrap wires the callback to
 * innerHTML and routes click events to `handle`.
 */
export class AnnotateController {
  private task: Task | null = null;
  private selection: Selection = { ...EMPTY_SELECTION };
  private banner = "";

  constructor(
    private readonly client: ApiClient,
    private readonly queue: PendingQueue,
    private readonly session: string,
    private readonly render: (html: string) => void,
  ) {}

  async start(): Promise<void> {
    // a response stranded by a reload or network failure goes out first
    const flushed = await this.queue.flush(this.client);
    if (!flushed) {
      this.banner = "Could not reach the service. Your last answer is saved locally.";
      this.render(renderRetryBanner(this.banner));
      return;
    }
    await this.loadTask();
  }

  async loadTask(): Promise<void> {
    try {
      this.task = await this.client.fetchTask(this.session);
      this.selection = { ...EMPTY_SELECTION };
      this.banner = "";
      this.paint();
    } catch {
      this.banner = "Could not load the next task.";
      this.render(renderRetryBanner(this.banner));
    }
  }

  private paint(): void {
    if (this.task === null) return;
    this.render(renderTaskView(this.task, this.selection));
  }

  /** Route a data-action click from the page. */
  async handle(action: string, value: string): Promise<void> {
    if (action === "choose") {
      this.selection = { ...this.selection, choice: value };
      this.paint();
    } else if (action === "rate") {
      this.selection = { ...this.selection, likert: Number(value) };
      this.paint();
    } else if (action === "submit") {
      await this.submit();
    } else if (action === "retry") {
      await this.start();
    }
  }

  private async submit(): Promise<void> {
    if (this.task === null || this.task.done || this.task.word === undefined) return;
    if (!canSubmit(this.selection)) return;
    const response: PendingResponse = {
      session: this.session,
      word: this.task.word,
      category_choice: this.selection.choice as string,
      likert: this.selection.likert as number,
    };
    this.selection = { ...this.selection, submitting: true };
    this.paint();
    this.queue.save(response);
    try {
      await this.client.submitResponse(response);
      this.queue.clear();
      await this.loadTask();
    } catch {
      this.banner = "Submission failed. Nothing was lost; retry when back online.";
      this.selection = { ...this.selection, submitting: false };
      this.render(renderRetryBanner(this.banner));
    }
  }
}

export interface ScriptedAnswer {
  choice: string;
  likert: number;
}

/**
 * Drive a whole session headlessly through the same client the page uses:
 * fetch a task, answer it via `answerFor`, repeat until the queue is done.
 * Returns the words answered, in order.
 */
export async function runScriptedSession(
  client: ApiClient,
  session: string,
  answerFor: (word: string) => ScriptedAnswer,
  maxItems = 200,
): Promise<string[]> {
  const answered: string[] = [];
  for (let i = 0; i < maxItems; i += 1) {
    const task = await client.fetchTask(session);
    if (task.done || task.word === undefined) return answered;
    const answer = answerFor(task.word);
    const ack = await client.submitResponse({
      session,
      word: task.word,
      category_choice: answer.choice,
      likert: answer.likert,
    });
    if (!ack.ok) throw new Error(`submission rejected for ${task.word}`);
    answered.push(task.word);
  }
  throw new Error("session did not finish within the item budget");
}

export function newSessionToken(): string {
  return `s-${Date.now().toString(36)}-${Math.random().toString(36).slice(2, 10)}`;
}
