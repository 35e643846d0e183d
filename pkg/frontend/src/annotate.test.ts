import { describe, expect, it } from "vitest";

import { AnnotateController } from "./annotate.js";
import { ApiClient } from "./api.js";
import { KeyValueStore, PendingQueue } from "./queue.js";
import type { Task } from "./types.js";

class MemoryStore implements KeyValueStore {
  private data = new Map<string, string>();
  getItem(key: string): string | null {
    return this.data.has(key) ? (this.data.get(key) as string) : null;
  }
  setItem(key: string, value: string): void {
    this.data.set(key, value);
  }
  removeItem(key: string): void {
    this.data.delete(key);
  }
}

function task(word: string | undefined, answered: number): Task {
  return {
    session: "s1",
    done: word === undefined,
    word,
    question: word ? `Is the word ${word} referring to:` : undefined,
    options: ["Age", "Race", "None of the above"],
    trap_question: word ? `Does the word ${word} suggest toxic language?` : undefined,
    likert: [1, 2, 3, 4, 5].map((value) => ({ value, label: `L${value}` })),
    progress: { answered, words_total: 2 },
  };
}

interface Script {
  tasks: Task[];
  submitFails?: number;
}

function harness(script: Script) {
  const htmls: string[] = [];
  let taskIndex = 0;
  let submitFailures = script.submitFails ?? 0;
  const submitted: string[] = [];
  const client = new ApiClient("", async (url, init) => {
    if (url.startsWith("/api/task")) {
      const current = script.tasks[Math.min(taskIndex, script.tasks.length - 1)];
      taskIndex += 1;
      return new Response(JSON.stringify(current), { status: 200 });
    }
    if (url === "/api/response") {
      if (submitFailures > 0) {
        submitFailures -= 1;
        throw new Error("offline");
      }
      submitted.push(String(init?.body));
      return new Response(JSON.stringify({ ok: true, duplicate: false }), { status: 200 });
    }
    throw new Error(`unexpected request: ${url}`);
  });
  const store = new MemoryStore();
  const queue = new PendingQueue(store);
  const controller = new AnnotateController(client, queue, "s1", (html) => htmls.push(html));
  return { controller, htmls, submitted, queue, store };
}

describe("AnnotateController", () => {
  it("walks choose -> rate -> submit -> next task", async () => {
    const { controller, htmls, submitted } = harness({
      tasks: [task("alpha", 0), task(undefined, 1)],
    });
    await controller.start();
    expect(htmls.at(-1)).toContain("alpha");
    expect(htmls.at(-1)).toContain('data-action="submit" disabled');

    await controller.handle("choose", "Race");
    expect(htmls.at(-1)).toContain('data-action="submit" disabled'); // likert still missing
    await controller.handle("rate", "4");
    expect(htmls.at(-1)).not.toContain("disabled");

    await controller.handle("submit", "");
    expect(submitted).toHaveLength(1);
    expect(JSON.parse(submitted[0] as string)).toMatchObject({
      word: "alpha",
      category_choice: "Race",
      likert: 4,
    });
    expect(htmls.at(-1)).toContain("All done");
  });

  it("ignores submit until both answers are present", async () => {
    const { controller, submitted } = harness({ tasks: [task("alpha", 0)] });
    await controller.start();
    await controller.handle("submit", "");
    expect(submitted).toHaveLength(0);
  });

  it("shows a retry banner when the service is down, keeping the answer", async () => {
    const { controller, htmls, queue } = harness({
      tasks: [task("alpha", 0), task(undefined, 1)],
      submitFails: 1,
    });
    await controller.start();
    await controller.handle("choose", "Race");
    await controller.handle("rate", "3");
    await controller.handle("submit", "");
    expect(htmls.at(-1)).toContain("retry-banner");
    expect(queue.load()).toMatchObject({ word: "alpha", likert: 3 });

    // retry flushes the saved response first, then advances
    await controller.handle("retry", "");
    expect(queue.load()).toBeNull();
    expect(htmls.at(-1)).toContain("All done");
  });

  it("renders a retry banner when the first task fetch fails", async () => {
    const htmls: string[] = [];
    const client = new ApiClient("", async () => {
      throw new Error("down");
    });
    const controller = new AnnotateController(
      client,
      new PendingQueue(new MemoryStore()),
      "s1",
      (html) => htmls.push(html),
    );
    await controller.start();
    expect(htmls.at(-1)).toContain("retry-banner");
  });
});
