import type { KappaResult, Progress, Tallies, Task, WordTally } from "./types.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export interface Selection {
  choice: string | null;
  likert: number | null;
  submitting: boolean;
}

export const EMPTY_SELECTION: Selection = { choice: null, likert: null, submitting: false };

/** True only when both the category choice and the Likert answer are set. */
export function canSubmit(selection: Selection): boolean {
  return selection.choice !== null && selection.likert !== null && !selection.submitting;
}

export function renderProgress(progress: Progress): string {
  return `<p class="progress">${progress.answered} answered · ${progress.words_total} words in study</p>`;
}

/**
 * The annotation task: the word, the ten category options exactly as the
 * server ordered them, and the Likert question. Options are radio-style
 * buttons carrying data-action attributes for the page controller.
 */
export function renderTaskView(task: Task, selection: Selection): string {
  if (task.done || task.word === undefined) {
    return renderCompletion(task.progress);
  }
  const options = (task.options ?? [])
    .map((option) => {
      const active = selection.choice === option ? " selected" : "";
      return `<button class="option${active}" data-action="choose" data-value="${escapeHtml(option)}">${escapeHtml(option)}</button>`;
    })
    .join("\n");
  const likert = (task.likert ?? [])
    .map((item) => {
      const active = selection.likert === item.value ? " selected" : "";
      return `<button class="likert${active}" data-action="rate" data-value="${item.value}">${item.value}<span>${escapeHtml(item.label)}</span></button>`;
    })
    .join("\n");
  const disabled = canSubmit(selection) ? "" : " disabled";
  return `
<section class="task">
  <h2>${escapeHtml(task.question ?? "")}</h2>
  <div class="options">${options}</div>
  <h3>${escapeHtml(task.trap_question ?? "")}</h3>
  <div class="likert-row">${likert}</div>
  <button class="submit" data-action="submit"${disabled}>Submit</button>
  ${renderProgress(task.progress)}
</section>`;
}

export function renderCompletion(progress: Progress): string {
  return `
<section class="done">
  <h2>All done. Thank you!</h2>
  <p>You answered ${progress.answered} item(s).</p>
</section>`;
}

export function renderRetryBanner(message: string): string {
  return `
<div class="retry-banner">
  <p>${escapeHtml(message)}</p>
  <button data-action="retry">Retry</button>
</div>`;
}

// ---------------------------------------------------------------------------
// Admin view

const BAR_BUCKETS = [
  "age",
  "disability",
  "gender_reassignment",
  "marriage_civil_partnership",
  "pregnancy_maternity",
  "race",
  "religion_belief",
  "sex",
  "sexual_orientation",
  "none_of_the_above",
];

export function renderVoteBar(tally: WordTally): string {
  if (tally.total === 0) {
    return '<div class="bar empty">no votes yet</div>';
  }
  const segments = BAR_BUCKETS.filter((bucket) => (tally.votes[bucket] ?? 0) > 0)
    .map((bucket) => {
      const count = tally.votes[bucket] ?? 0;
      const width = Math.round((100 * count) / tally.total);
      return `<span class="segment ${bucket}" style="width:${width}%" title="${bucket}: ${count}">${count}</span>`;
    })
    .join("");
  return `<div class="bar">${segments}</div>`;
}

/** Decision badge: a pure echo of the server's majority-vote result. */
export function renderDecisionBadge(tally: WordTally): string {
  if (tally.decision === null) {
    return '<span class="badge pending">pending</span>';
  }
  if (!tally.decision.protected) {
    return '<span class="badge none">None</span>';
  }
  return `<span class="badge protected">${escapeHtml(tally.decision.category ?? "")} · ${tally.decision.reliability}%</span>`;
}

export function renderTallies(tallies: Tallies): string {
  const rows = tallies.words
    .map(
      (tally) => `
<tr>
  <td class="word">${escapeHtml(tally.word)}</td>
  <td>${renderVoteBar(tally)}</td>
  <td>${renderDecisionBadge(tally)}</td>
  <td class="count">${tally.total}</td>
</tr>`,
    )
    .join("");
  const sessions = tallies.sessions;
  return `
<p class="sessions">sessions: ${sessions.counted} counted · ${sessions.rejected} rejected · ${sessions.total} total</p>
<table class="tallies">
  <thead><tr><th>word</th><th>votes</th><th>decision</th><th>n</th></tr></thead>
  <tbody>${rows}</tbody>
</table>`;
}

export function kappaCellKey(a: string, b: string): string {
  return `${a}|${b}`;
}

export function renderKappaMatrix(
  sources: string[],
  cells: Map<string, KappaResult | null>,
): string {
  const header = sources.map((source) => `<th>${escapeHtml(source)}</th>`).join("");
  const rows = sources
    .map((rowSource) => {
      const cellsHtml = sources
        .map((columnSource) => {
          if (rowSource === columnSource) return '<td class="diag">1.00</td>';
          const result =
            cells.get(kappaCellKey(rowSource, columnSource)) ??
            cells.get(kappaCellKey(columnSource, rowSource));
          if (!result) return '<td class="missing">–</td>';
          return `<td>${result.display.toFixed(2)}</td>`;
        })
        .join("");
      return `<tr><th>${escapeHtml(rowSource)}</th>${cellsHtml}</tr>`;
    })
    .join("");
  return `
<table class="kappa">
  <thead><tr><th></th>${header}</tr></thead>
  <tbody>${rows}</tbody>
</table>`;
}
