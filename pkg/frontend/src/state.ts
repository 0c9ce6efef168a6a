import { Favorite, RankSpec } from './types.js';

// 8 categorical colors, one per selectable subgroup; assigned in selection
// order and returned to the pool on deselect.
export const PALETTE = [
  '#4e79a7',
  '#f28e2b',
  '#59a14f',
  '#e15759',
  '#b07aa1',
  '#76b7b2',
  '#edc948',
  '#9c755f',
] as const;

export const MAX_SELECTED = 8;

export interface Selected {
  poolIndex: number;
  rule: string;
  color: string;
}

export type SelectResult =
  | { ok: true; selected: Selected }
  | { ok: false; notice: string };

/** Client-side view state: selections with stable colors, hovered rule,
 * active weights, favorites. Holds no metrics; those stay server-side. */
export class ViewState {
  readonly selected: Selected[] = [];
  hoveredRule: string | null = null;
  weights: RankSpec[] = [];
  favorites: Favorite[] = [];

  private freeColors: string[] = [...PALETTE];

  isSelected(poolIndex: number): boolean {
    return this.selected.some((s) => s.poolIndex === poolIndex);
  }

  select(poolIndex: number, rule: string): SelectResult {
    if (this.isSelected(poolIndex)) {
      return { ok: false, notice: 'already selected' };
    }
    if (this.selected.length >= MAX_SELECTED) {
      return {
        ok: false,
        notice: `at most ${MAX_SELECTED} subgroups can be selected`,
      };
    }
    const color = this.freeColors.shift();
    if (!color) return { ok: false, notice: 'no colors left' };
    const entry = { poolIndex, rule, color };
    this.selected.push(entry);
    return { ok: true, selected: entry };
  }

  deselect(poolIndex: number): void {
    const at = this.selected.findIndex((s) => s.poolIndex === poolIndex);
    if (at < 0) return;
    const [removed] = this.selected.splice(at, 1);
    this.freeColors.unshift(removed.color);
  }

  /** Pool indices in selection order: the wire format of a selection. */
  selectionIndices(): number[] {
    return this.selected.map((s) => s.poolIndex);
  }

  colorOf(positionInSelection: number): string {
    return this.selected[positionInSelection]?.color ?? '#888';
  }

  setWeight(key: string, weight: number): void {
    this.weights = this.weights.map((s) =>
      specKey(s) === key ? { ...s, weight } : s,
    );
  }
}

/** Stable identity of a ranking spec, mirroring the server's spec key. */
export function specKey(spec: RankSpec): string {
  return spec.outcome ? `${spec.kind}:${spec.outcome}` : spec.kind;
}
