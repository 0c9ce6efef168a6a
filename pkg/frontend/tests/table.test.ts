import { describe, expect, it } from 'vitest';

import { ApiClient } from '../src/api.js';
import { renderTable, renderWeightSliders } from '../src/table.js';
import { SubgroupRow } from '../src/types.js';
import { makeRows, OUTCOMES, scriptedFetch, SPECS } from './fixtures.js';

function displayedNumbers(container: HTMLElement): Record<string, string>[] {
  return Array.from(container.querySelectorAll('tr.subgroup-row')).map((tr) => {
    const out: Record<string, string> = {};
    for (const cell of tr.querySelectorAll<HTMLElement>('[data-field]')) {
      out[cell.dataset.field as string] = cell.dataset.value as string;
    }
    return out;
  });
}

function expectedNumbers(rows: SubgroupRow[]): Record<string, string>[] {
  // straight from the payload: the view must not do metric arithmetic
  return rows.map((row) => ({
    size_fraction: String(row.metrics.evaluation.size_fraction),
    'rate:churned': String(row.metrics.evaluation.outcomes.churned.rate),
    score_total: String(row.scores.total),
  }));
}

describe('subgroup table', () => {
  it('shows a zero-state when there are no results', () => {
    const container = document.createElement('div');
    renderTable(container, [], SPECS, OUTCOMES);
    expect(container.querySelector('.zero-state')).not.toBeNull();
    expect(container.querySelector('table')).toBeNull();
  });

  it('every displayed number equals the server payload field (snapshot diff)', () => {
    const rows = makeRows(25);
    const container = document.createElement('div');
    renderTable(container, rows, SPECS, OUTCOMES, {});
    expect(displayedNumbers(container)).toEqual(expectedNumbers(rows));
  });

  it('preserves the server sort order', () => {
    const rows = makeRows(10).reverse();
    const container = document.createElement('div');
    renderTable(container, rows, SPECS, OUTCOMES, {});
    const rendered = Array.from(
      container.querySelectorAll<HTMLElement>('tr.subgroup-row'),
    ).map((tr) => tr.dataset.rule);
    expect(rendered).toEqual(rows.map((r) => r.rule));
  });

  it('rule chips toggle their feature on click', () => {
    const rows = makeRows(1);
    const container = document.createElement('div');
    const toggled: string[] = [];
    renderTable(container, rows, SPECS, OUTCOMES, {
      onToggleFeature: (_row, feature) => toggled.push(feature),
    });
    const chip = container.querySelector<HTMLButtonElement>('.chip');
    chip?.click();
    expect(toggled).toEqual(['plan']);
  });

  it('marks the base rate on each outcome bar', () => {
    const rows = makeRows(2);
    const container = document.createElement('div');
    renderTable(container, rows, SPECS, OUTCOMES, {});
    const bars = container.querySelectorAll('[data-field="rate:churned"] svg line');
    expect(bars).toHaveLength(2);
    // marker position is base_rate * bar width (60)
    expect(bars[0].getAttribute('x1')).toBe((OUTCOMES[0].base_rate * 60).toFixed(1));
  });

  it('slider change reorders the table in under 300 ms at 1,000 candidates', async () => {
    const rows = makeRows(1000);
    const reordered = [...rows].reverse();
    const script = scriptedFetch(() => ({ specs: SPECS, results: reordered }));
    const api = new ApiClient('', script.fetch);
    const container = document.createElement('div');
    renderTable(container, rows, SPECS, OUTCOMES, {});
    // untimed warm-up so the measurement reflects the steady-state
    // slider interaction, not first-call JIT costs
    renderTable(container, reordered, SPECS, OUTCOMES, {});
    renderTable(container, rows, SPECS, OUTCOMES, {});

    const start = performance.now();
    const payload = await api.rerank('s1', SPECS);
    renderTable(container, payload.results, payload.specs, OUTCOMES, {});
    const elapsed = performance.now() - start;

    expect(container.querySelectorAll('tr.subgroup-row')).toHaveLength(1000);
    expect(
      container.querySelector<HTMLElement>('tr.subgroup-row')?.dataset.rule,
    ).toBe(reordered[0].rule);
    expect(elapsed).toBeLessThan(300);
  });
});

describe('weight sliders', () => {
  it('emits the spec identity and new weight on input', () => {
    const container = document.createElement('div');
    const seen: [string, string | null, number][] = [];
    renderWeightSliders(container, SPECS, (kind, outcome, weight) =>
      seen.push([kind, outcome, weight]),
    );
    const sliders = container.querySelectorAll<HTMLInputElement>('input[type=range]');
    expect(sliders).toHaveLength(2);
    sliders[1].value = '3';
    sliders[1].dispatchEvent(new Event('input'));
    expect(seen).toEqual([['group-size', null, 3]]);
  });
});
