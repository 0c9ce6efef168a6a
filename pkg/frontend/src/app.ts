import { ApiClient, ApiError } from './api.js';
import { RuleEditor } from './editor.js';
import { CanvasMap, computeScene, renderIntersections } from './map.js';
import { specKey, ViewState } from './state.js';
import { renderTable, renderWeightSliders } from './table.js';
import {
  DatasetInfo,
  MapPayload,
  RankSpec,
  ResultsPayload,
  SubgroupRow,
} from './types.js';

const MAP_W = 640;
const MAP_H = 480;

/** Single-page controller wiring the table, sliders, editor, favorites, and
 * the subgroup map to one server session. */
export class App {
  private readonly api: ApiClient;
  private readonly root: HTMLElement;
  private readonly state = new ViewState();
  private sessionId = '';
  private dataset: DatasetInfo | null = null;
  private results: SubgroupRow[] = [];
  private map: CanvasMap | null = null;
  private lastLayout: MapPayload | null = null;
  private lassoBubbles: number[] = [];
  private rerankSeq = 0;

  constructor(root: HTMLElement, api = new ApiClient()) {
    this.root = root;
    this.api = api;
  }

  private el<T extends HTMLElement>(selector: string): T {
    const found = this.root.querySelector<T>(selector);
    if (!found) throw new Error(`missing element ${selector}`);
    return found;
  }

  async open(data: string, schema: string): Promise<void> {
    const info = await this.api.createSession(data, schema);
    this.sessionId = info.session_id;
    this.dataset = info.dataset;
    this.state.weights = this.defaultSpecs();
    renderWeightSliders(
      this.el('#weights'),
      this.state.weights,
      (kind, outcome, weight) => {
        this.state.setWeight(specKey({ kind, outcome, weight }), weight);
        void this.rerank();
      },
    );
    this.map = new CanvasMap(this.el<HTMLCanvasElement>('#map-canvas'), {
      onLasso: (bubbles) => this.onLasso(bubbles),
    });
    new RuleEditor(this.api, this.sessionId, {
      input: this.el('#editor-input'),
      evaluateBtn: this.el('#editor-evaluate'),
      error: this.el('#editor-error'),
      metrics: this.el('#editor-metrics'),
      chips: this.el('#editor-chips'),
    });
    this.el('#discover-btn').addEventListener('click', () =>
      void this.discover(),
    );
    this.el('#lasso-search').addEventListener('click', () =>
      void this.searchInSelection(),
    );
    this.renderResults({ specs: this.state.weights, results: [] });
  }

  private defaultSpecs(): RankSpec[] {
    const outcome = this.dataset?.outcomes.find((o) => o.kind === 'binary');
    const specs: RankSpec[] = [{ kind: 'group-size', outcome: null, weight: 1 }];
    if (outcome) {
      specs.unshift({
        kind: 'outcome-rate-high',
        outcome: outcome.name,
        weight: 2,
      });
    }
    return specs;
  }

  async discover(): Promise<void> {
    this.setBanner('searching…');
    try {
      const { job_id } = await this.api.startDiscover(this.sessionId, {
        specs: this.state.weights,
      });
      const status = await this.api.waitForJob(this.sessionId, job_id);
      if (status.status === 'error') throw new Error(status.detail);
      if (status.status === 'done') this.renderResults(status);
      this.setBanner('');
    } catch (err) {
      this.setBanner(`discovery failed: ${message(err)}`, true);
    }
  }

  /** Latest-wins: stale responses (aborted or out of order) never render. */
  async rerank(): Promise<void> {
    const seq = ++this.rerankSeq;
    try {
      const payload = await this.api.rerank(this.sessionId, this.state.weights);
      if (seq === this.rerankSeq) this.renderResults(payload);
    } catch (err) {
      if (err instanceof DOMException && err.name === 'AbortError') return;
      this.setBanner(`rerank failed: ${message(err)}`, true);
    }
  }

  private renderResults(payload: ResultsPayload): void {
    this.results = payload.results;
    renderTable(
      this.el('#table'),
      payload.results,
      payload.specs,
      this.dataset?.outcomes ?? [],
      {
        onSelect: (poolIndex, row) => void this.toggleSelect(poolIndex, row),
        onHover: (rule) => void this.onHover(rule),
        onToggleFeature: (row, feature) => void this.toggleFeature(row, feature),
        onFavorite: (row) => void this.addFavorite(row),
      },
    );
  }

  async toggleSelect(poolIndex: number, row: SubgroupRow): Promise<void> {
    if (this.state.isSelected(poolIndex)) {
      this.state.deselect(poolIndex);
    } else {
      const res = this.state.select(poolIndex, row.rule);
      if (!res.ok) {
        this.setBanner(res.notice, true);
        return;
      }
    }
    await this.refreshMap();
  }

  async refreshMap(): Promise<void> {
    const selection = this.state.selectionIndices();
    try {
      const payload = await this.api.getMap(this.sessionId, selection);
      // selection may have moved on while the layout was computed
      if (selection.join(',') !== this.state.selectionIndices().join(',')) {
        return;
      }
      this.lastLayout = payload;
      this.drawMap(null);
      renderIntersections(
        this.el('#intersections'),
        payload.intersections,
        payload.unassigned,
        this.state.selected.map((s) => s.color),
      );
      const readout = this.el('#distinguishing');
      readout.textContent = payload.distinguishing
        ? `${payload.distinguishing.feature} = ${payload.distinguishing.value}`
        : '';
    } catch (err) {
      this.setBanner(`map failed: ${message(err)}`, true);
    }
  }

  private drawMap(matching: number[] | null): void {
    if (!this.lastLayout || !this.map) return;
    const scene = computeScene(
      this.lastLayout,
      this.state.selected.map((s) => s.color),
      matching,
      MAP_W,
      MAP_H,
    );
    this.map.setScene(scene);
  }

  async onHover(rule: string | null): Promise<void> {
    this.state.hoveredRule = rule;
    if (!this.lastLayout) return;
    if (rule === null) {
      this.drawMap(null);
      return;
    }
    try {
      const matching = await this.api.matchingBubbles(
        this.sessionId,
        this.state.selectionIndices(),
        rule,
      );
      if (this.state.hoveredRule === rule) this.drawMap(matching);
    } catch {
      // hover highlight is best-effort; keep the last drawn state
    }
  }

  private onLasso(bubbles: number[]): void {
    this.lassoBubbles = bubbles;
    const btn = this.el<HTMLButtonElement>('#lasso-search');
    btn.disabled = bubbles.length === 0;
  }

  async searchInSelection(): Promise<void> {
    if (!this.lassoBubbles.length) return;
    try {
      const payload = await this.api.searchInSelection(
        this.sessionId,
        this.state.selectionIndices(),
        this.lassoBubbles,
      );
      this.renderResults(payload);
    } catch (err) {
      this.setBanner(`targeted search failed: ${message(err)}`, true);
    }
  }

  async toggleFeature(row: SubgroupRow, feature: string): Promise<void> {
    try {
      const edited = await this.api.editRule(
        this.sessionId,
        { rule: row.rule },
        { op: 'toggle', feature },
      );
      const at = this.results.findIndex((r) => r.rule === row.rule);
      if (at >= 0) {
        // metrics update in place; ranking position is preserved until the
        // next rerank, matching the server's pool semantics
        this.results[at] = edited;
        this.renderResults({ specs: this.state.weights, results: this.results });
      }
    } catch (err) {
      this.setBanner(`edit failed: ${message(err)}`, true);
    }
  }

  async addFavorite(row: SubgroupRow): Promise<void> {
    const favorites = [...this.state.favorites, { rule: row.rule, note: '' }];
    try {
      const saved = await this.api.putFavorites(this.sessionId, favorites);
      this.state.favorites = saved.favorites;
      this.renderFavorites();
    } catch (err) {
      this.setBanner(`favorite failed: ${message(err)}`, true);
    }
  }

  private renderFavorites(): void {
    const panel = this.el('#favorites');
    panel.textContent = '';
    for (const fav of this.state.favorites) {
      const item = document.createElement('div');
      item.className = 'favorite';
      item.textContent = fav.rule;
      panel.appendChild(item);
    }
  }

  private setBanner(text: string, isError = false): void {
    const banner = this.el('#banner');
    banner.textContent = text;
    banner.className = isError ? 'banner error' : 'banner';
  }
}

function message(err: unknown): string {
  return err instanceof ApiError || err instanceof Error
    ? err.message
    : String(err);
}
