import { ApiClient, ApiError } from './api.js';
import { EditedRule, Predicate, SubgroupRow } from './types.js';

export interface EditorElements {
  input: HTMLInputElement;
  evaluateBtn: HTMLButtonElement;
  error: HTMLElement;
  metrics: HTMLElement;
  chips: HTMLElement;
}

function metricsSummary(row: SubgroupRow): string {
  const ev = row.metrics.evaluation;
  const parts = [
    `<span data-field="size_fraction" data-value="${ev.size_fraction}">size ${(ev.size_fraction * 100).toFixed(1)}%</span>`,
  ];
  for (const [name, stats] of Object.entries(ev.outcomes)) {
    if (stats.rate !== undefined) {
      parts.push(
        `<span data-field="rate:${name}" data-value="${stats.rate}">${name} ${
          stats.rate === null ? '–' : (stats.rate * 100).toFixed(1) + '%'
        }</span>`,
      );
    }
  }
  return parts.join(' · ');
}

/** Rule editor: free-text evaluation plus per-feature toggle chips.
 *
 * A toggled-off feature stays visible as a dormant chip so it can be
 * toggled back with its original values; both states round-trip through
 * the server's edit endpoint, never local rule algebra. */
export class RuleEditor {
  private readonly api: ApiClient;
  private readonly sessionId: string;
  private readonly el: EditorElements;
  private current: { predicates: Predicate[]; dormant: Predicate[] } | null =
    null;

  constructor(api: ApiClient, sessionId: string, el: EditorElements) {
    this.api = api;
    this.sessionId = sessionId;
    this.el = el;
    el.evaluateBtn.addEventListener('click', () => void this.evaluate());
  }

  async evaluate(): Promise<void> {
    this.el.error.textContent = '';
    try {
      const row = await this.api.evaluateRule(
        this.sessionId,
        this.el.input.value,
      );
      this.current = { predicates: row.predicates, dormant: [] };
      this.render(row, []);
    } catch (err) {
      this.showError(err);
    }
  }

  async toggle(feature: string): Promise<void> {
    if (!this.current) return;
    try {
      const edited = await this.api.editRule(this.sessionId, this.current, {
        op: 'toggle',
        feature,
      });
      this.current = {
        predicates: edited.predicates,
        dormant: edited.dormant,
      };
      this.el.input.value = edited.rule;
      this.render(edited, edited.dormant);
    } catch (err) {
      this.showError(err);
    }
  }

  async setValues(feature: string, values: string[]): Promise<void> {
    if (!this.current) return;
    try {
      const edited = await this.api.editRule(this.sessionId, this.current, {
        op: 'set-values',
        feature,
        values,
      });
      this.current = {
        predicates: edited.predicates,
        dormant: edited.dormant,
      };
      this.el.input.value = edited.rule;
      this.render(edited, edited.dormant);
    } catch (err) {
      this.showError(err);
    }
  }

  private render(row: SubgroupRow | EditedRule, dormant: Predicate[]): void {
    this.el.metrics.innerHTML = metricsSummary(row);
    this.el.chips.textContent = '';
    for (const pred of row.predicates) {
      this.el.chips.appendChild(this.chip(pred, false));
    }
    for (const pred of dormant) {
      this.el.chips.appendChild(this.chip(pred, true));
    }
  }

  private chip(pred: Predicate, dormant: boolean): HTMLButtonElement {
    const chip = document.createElement('button');
    chip.type = 'button';
    chip.className = dormant ? 'chip dormant' : 'chip';
    chip.dataset.feature = pred.feature;
    chip.textContent = `${pred.feature} = ${pred.values.join(' | ')}`;
    chip.title = dormant ? 'toggle back on' : 'toggle off';
    chip.addEventListener('click', () => void this.toggle(pred.feature));
    return chip;
  }

  private showError(err: unknown): void {
    if (err instanceof ApiError) {
      this.el.error.textContent =
        err.position !== undefined
          ? `${err.message} (at position ${err.position})`
          : err.message;
    } else {
      this.el.error.textContent = String(err);
    }
  }
}
