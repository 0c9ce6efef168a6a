// Canned server payloads shaped exactly like the session service's JSON,
// plus a scriptable fetch stub for driving the ApiClient in tests.

import { FetchLike } from '../src/api.js';
import {
  MapPayload,
  OutcomeInfo,
  RankSpec,
  SubgroupRow,
} from '../src/types.js';

export const OUTCOMES: OutcomeInfo[] = [
  { name: 'churned', kind: 'binary', base_rate: 0.31 },
];

export const SPECS: RankSpec[] = [
  { kind: 'outcome-rate-high', outcome: 'churned', weight: 2 },
  { kind: 'group-size', outcome: null, weight: 1 },
];

export function makeRow(i: number, overrides: Partial<SubgroupRow> = {}): SubgroupRow {
  const rate = ((i * 37) % 100) / 100;
  const fraction = 0.01 + ((i * 13) % 50) / 100;
  return {
    rule: `"plan" = "tier${i}"`,
    predicates: [{ feature: 'plan', values: [`tier${i}`] }],
    size: { discovery: 100 + i, evaluation: 200 + i },
    metrics: {
      discovery: {
        size: 100 + i,
        size_fraction: fraction,
        outcomes: { churned: { rate, coverage: rate / 2 } },
      },
      evaluation: {
        size: 200 + i,
        size_fraction: fraction,
        outcomes: { churned: { rate, coverage: rate / 2 } },
      },
    },
    scores: {
      raw: { 'outcome-rate-high:churned': rate, 'group-size': fraction },
      normalized: { 'outcome-rate-high:churned': rate, 'group-size': fraction },
      total: 2 * rate + fraction,
    },
    provenance: [0],
    ...overrides,
  };
}

export function makeRows(n: number): SubgroupRow[] {
  return Array.from({ length: n }, (_, i) => makeRow(i));
}

export const MAP_PAYLOAD: MapPayload = {
  bubbles: [
    { x: 0, y: 0, r: 1, count: 100, outcome: 0.2, signature: [0] },
    { x: 4, y: 0, r: 2, count: 400, outcome: 0.8, signature: [0, 1, 2] },
    { x: 0, y: 4, r: 1.5, count: 225, outcome: 0.5, signature: [1, 2] },
    { x: 4, y: 4, r: 0.5, count: 25, outcome: 0.0, signature: [] },
  ],
  extent: [-2, -2, 6, 6],
  overlays: [
    { signature: [0], arc_fraction: 1 },
    { signature: [0, 1, 2], arc_fraction: 1 / 3 },
    { signature: [1, 2], arc_fraction: 0.5 },
    { signature: [], arc_fraction: 0 },
  ],
  intersections: [
    { signature: [0], size: 100, outcome_rate: 0.2 },
    { signature: [0, 1, 2], size: 400, outcome_rate: 0.8 },
    { signature: [1, 2], size: 225, outcome_rate: 0.5 },
  ],
  unassigned: 25,
  distinguishing: null,
};

export interface FetchCall {
  url: string;
  init?: RequestInit;
}

export interface FetchScript {
  calls: FetchCall[];
  fetch: FetchLike;
}

/** Fetch stub honoring AbortSignal; ``respond`` maps a request to a JSON
 * body, ``delay`` (ms, may vary per call) holds the response so aborts can
 * land first. */
export function scriptedFetch(
  respond: (call: FetchCall, index: number) => unknown,
  delay: (index: number) => number = () => 0,
): FetchScript {
  const calls: FetchCall[] = [];
  const fetchFn: FetchLike = (url, init) => {
    const index = calls.length;
    calls.push({ url, init });
    return new Promise((resolve, reject) => {
      const timer = setTimeout(() => {
        resolve(
          new Response(JSON.stringify(respond({ url, init }, index)), {
            status: 200,
            headers: { 'content-type': 'application/json' },
          }),
        );
      }, delay(index));
      init?.signal?.addEventListener('abort', () => {
        clearTimeout(timer);
        reject(new DOMException('aborted', 'AbortError'));
      });
    });
  };
  return { calls, fetch: fetchFn };
}
