// Wire types for the slicekit session service. Every field mirrors a JSON
// field produced by the server; the UI never derives metrics of its own.

export interface RankSpec {
  kind: string;
  outcome: string | null;
  weight: number;
  params?: Record<string, number>;
}

export interface Predicate {
  feature: string;
  values: string[];
}

export interface OutcomeStats {
  rate?: number | null;
  coverage?: number | null;
  mean?: number | null;
  mean_difference?: number | null;
}

export interface SplitMetrics {
  size: number;
  size_fraction: number;
  outcomes: Record<string, OutcomeStats>;
}

export interface SubgroupRow {
  rule: string;
  predicates: Predicate[];
  size: { discovery: number; evaluation: number };
  metrics: { discovery: SplitMetrics; evaluation: SplitMetrics };
  scores: {
    raw: Record<string, number | null>;
    normalized: Record<string, number>;
    total: number;
  };
  provenance: number[];
}

export interface ResultsPayload {
  specs: RankSpec[];
  results: SubgroupRow[];
}

export interface OutcomeInfo {
  name: string;
  kind: string;
  base_rate: number;
}

export interface DatasetInfo {
  n_rows: number;
  n_features: number;
  features: { name: string; values: string[] }[];
  outcomes: OutcomeInfo[];
  discovery_rows: number;
  evaluation_rows: number;
}

export interface SessionInfo {
  session_id: string;
  dataset: DatasetInfo;
  pool_size: number;
}

export type JobStatus =
  | { status: 'running' }
  | { status: 'error'; detail: string }
  | ({ status: 'done' } & ResultsPayload);

export interface MapBubble {
  x: number;
  y: number;
  r: number;
  count: number;
  outcome: number;
  signature: number[];
}

export interface MapOverlay {
  signature: number[];
  arc_fraction: number;
}

export interface IntersectionEntry {
  signature: number[];
  size: number;
  outcome_rate: number | null;
}

export interface Distinguishing {
  feature: string;
  value: string;
  precision: number;
  recall: number;
}

export interface MapPayload {
  bubbles: MapBubble[];
  extent: [number, number, number, number];
  overlays: MapOverlay[];
  intersections: IntersectionEntry[];
  unassigned: number | null;
  distinguishing: Distinguishing | null;
}

export interface EditOp {
  op: 'toggle' | 'set-values';
  feature: string;
  values?: string[];
}

export interface EditedRule extends SubgroupRow {
  dormant: Predicate[];
}

export interface Favorite {
  rule: string;
  note: string;
}
