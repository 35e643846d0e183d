import { ApiClient } from "./api.js";
import type { KappaResult, Tallies } from "./types.js";
import { kappaCellKey, renderKappaMatrix, renderTallies } from "./views.js";

/**
 * Live admin dashboard: polls tallies and the pairwise agreement matrix.
 * Decisions and kappa values are displayed exactly as the server reports
 * them; the page computes nothing itself.
 */
export class AdminController {
  private timer: ReturnType<typeof setInterval> | null = null;

  constructor(
    private readonly client: ApiClient,
    private readonly render: (html: string) => void,
    private readonly pollMs = 2000,
  ) {}

  async refresh(): Promise<void> {
    let tallies: Tallies;
    try {
      tallies = await this.client.fetchTallies();
    } catch {
      this.render('<p class="error">service unreachable</p>');
      return;
    }
    const cells = await this.collectKappa(tallies.sources);
    this.render(
      `<h2>Tallies</h2>${renderTallies(tallies)}` +
        `<h2>Agreement (Cohen's kappa)</h2>${renderKappaMatrix(tallies.sources, cells)}`,
    );
  }

  private async collectKappa(sources: string[]): Promise<Map<string, KappaResult | null>> {
    const cells = new Map<string, KappaResult | null>();
    for (let i = 0; i < sources.length; i += 1) {
      for (let j = i + 1; j < sources.length; j += 1) {
        const a = sources[i] as string;
        const b = sources[j] as string;
        try {
          cells.set(kappaCellKey(a, b), await this.client.fetchKappa(a, b));
        } catch {
          cells.set(kappaCellKey(a, b), null); // fewer than 2 common words yet
        }
      }
    }
    return cells;
  }

  start(): void {
    void this.refresh();
    this.timer = setInterval(() => void this.refresh(), this.pollMs);
  }

  stop(): void {
    if (this.timer !== null) clearInterval(this.timer);
    this.timer = null;
  }
}
