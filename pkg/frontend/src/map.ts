import { IntersectionEntry, MapPayload } from './types.js';

export interface Arc {
  start: number; // radians
  end: number;
  color: string;
}

export interface SceneBubble {
  cx: number;
  cy: number;
  r: number;
  fill: string;
  greyed: boolean;
  arcs: Arc[];
}

export interface Scene {
  bubbles: SceneBubble[];
  scale: number;
}

export interface Point {
  x: number;
  y: number;
}

// outcome shading: 0 → cool blue, 1 → warm red
export function outcomeColor(outcome: number): string {
  const t = Math.max(0, Math.min(1, outcome));
  const r = Math.round(70 + t * (214 - 70));
  const g = Math.round(130 - t * (130 - 45));
  const b = Math.round(180 - t * (180 - 40));
  return `rgb(${r},${g},${b})`;
}

/** Map the layout extent onto the canvas with a uniform scale so the server
 * geometry (including the non-overlap guarantee) survives untouched. */
export function extentTransform(
  extent: [number, number, number, number],
  width: number,
  height: number,
  padding = 12,
): { scale: number; toScreen: (x: number, y: number) => Point } {
  const [x0, y0, x1, y1] = extent;
  const spanX = Math.max(x1 - x0, 1e-12);
  const spanY = Math.max(y1 - y0, 1e-12);
  const scale = Math.min(
    (width - 2 * padding) / spanX,
    (height - 2 * padding) / spanY,
  );
  const offX = (width - spanX * scale) / 2;
  const offY = (height - spanY * scale) / 2;
  return {
    scale,
    toScreen: (x, y) => ({
      x: offX + (x - x0) * scale,
      y: offY + (y - y0) * scale,
    }),
  };
}

/** Pure scene computation: positions, radii, shading, selection arcs, and
 * hover grey-out. ``matching`` is the server-computed bubble set for the
 * hovered rule (null = no hover). */
export function computeScene(
  payload: MapPayload,
  selectionColors: string[],
  matching: number[] | null,
  width: number,
  height: number,
): Scene {
  const { scale, toScreen } = extentTransform(payload.extent, width, height);
  const matchSet = matching === null ? null : new Set(matching);
  const bubbles = payload.bubbles.map((b, i) => {
    const pos = toScreen(b.x, b.y);
    const overlay = payload.overlays[i];
    const arcs: Arc[] =
      overlay && overlay.arc_fraction > 0
        ? overlay.signature.map((sigIndex, at) => ({
            start: at * overlay.arc_fraction * 2 * Math.PI - Math.PI / 2,
            end: (at + 1) * overlay.arc_fraction * 2 * Math.PI - Math.PI / 2,
            color: selectionColors[sigIndex] ?? '#888',
          }))
        : [];
    return {
      cx: pos.x,
      cy: pos.y,
      r: b.r * scale,
      fill: outcomeColor(b.outcome),
      greyed: matchSet !== null && !matchSet.has(i),
      arcs,
    };
  });
  return { bubbles, scale };
}

export function pointInPolygon(p: Point, polygon: Point[]): boolean {
  let inside = false;
  for (let i = 0, j = polygon.length - 1; i < polygon.length; j = i++) {
    const a = polygon[i];
    const b = polygon[j];
    const crosses =
      a.y > p.y !== b.y > p.y &&
      p.x < ((b.x - a.x) * (p.y - a.y)) / (b.y - a.y) + a.x;
    if (crosses) inside = !inside;
  }
  return inside;
}

/** Bubble indices whose centers fall inside the lasso polygon. */
export function bubblesInLasso(scene: Scene, polygon: Point[]): number[] {
  if (polygon.length < 3) return [];
  const picked: number[] = [];
  scene.bubbles.forEach((b, i) => {
    if (pointInPolygon({ x: b.cx, y: b.cy }, polygon)) picked.push(i);
  });
  return picked;
}

export interface MapCallbacks {
  onLasso?: (bubbleIndices: number[]) => void;
}

/** Canvas renderer for a computed scene plus lasso interaction. Drawing is a
 * straight readout of the scene; all geometry decisions live in
 * computeScene so they stay testable without a canvas. */
export class CanvasMap {
  private readonly canvas: HTMLCanvasElement;
  private readonly callbacks: MapCallbacks;
  private scene: Scene | null = null;
  private lassoPath: Point[] = [];
  private lassoActive = false;

  constructor(canvas: HTMLCanvasElement, callbacks: MapCallbacks = {}) {
    this.canvas = canvas;
    this.callbacks = callbacks;
    canvas.addEventListener('mousedown', (e) => this.lassoStart(e));
    canvas.addEventListener('mousemove', (e) => this.lassoMove(e));
    canvas.addEventListener('mouseup', () => this.lassoEnd());
  }

  setScene(scene: Scene): void {
    this.scene = scene;
    this.draw();
  }

  private eventPoint(e: MouseEvent): Point {
    const rect = this.canvas.getBoundingClientRect();
    return { x: e.clientX - rect.left, y: e.clientY - rect.top };
  }

  private lassoStart(e: MouseEvent): void {
    this.lassoActive = true;
    this.lassoPath = [this.eventPoint(e)];
  }

  private lassoMove(e: MouseEvent): void {
    if (!this.lassoActive) return;
    this.lassoPath.push(this.eventPoint(e));
    this.draw();
  }

  private lassoEnd(): void {
    if (!this.lassoActive) return;
    this.lassoActive = false;
    if (this.scene) {
      this.callbacks.onLasso?.(bubblesInLasso(this.scene, this.lassoPath));
    }
    this.lassoPath = [];
    this.draw();
  }

  draw(): void {
    let ctx: CanvasRenderingContext2D | null;
    try {
      ctx = this.canvas.getContext('2d');
    } catch {
      return; // no 2d context in headless test environments
    }
    if (!ctx || !this.scene) return;
    ctx.clearRect(0, 0, this.canvas.width, this.canvas.height);
    for (const b of this.scene.bubbles) {
      ctx.beginPath();
      ctx.arc(b.cx, b.cy, b.r, 0, 2 * Math.PI);
      ctx.fillStyle = b.greyed ? '#d0d0d0' : b.fill;
      ctx.fill();
      for (const arc of b.arcs) {
        ctx.beginPath();
        ctx.arc(b.cx, b.cy, b.r, arc.start, arc.end);
        ctx.strokeStyle = b.greyed ? '#b0b0b0' : arc.color;
        ctx.lineWidth = Math.max(2, b.r * 0.18);
        ctx.stroke();
      }
    }
    if (this.lassoPath.length > 1) {
      ctx.beginPath();
      ctx.moveTo(this.lassoPath[0].x, this.lassoPath[0].y);
      for (const p of this.lassoPath.slice(1)) ctx.lineTo(p.x, p.y);
      ctx.strokeStyle = '#333';
      ctx.setLineDash([4, 3]);
      ctx.stroke();
      ctx.setLineDash([]);
    }
  }
}

function signatureGlyph(signature: number[], colors: string[]): string {
  return signature
    .map(
      (i) =>
        `<span class="glyph-dot" style="background:${colors[i] ?? '#888'}"></span>`,
    )
    .join('');
}

function pct(fraction: number): string {
  return `${(fraction * 100).toFixed(1)}%`;
}

/** Intersection panel: one row per membership signature with server-provided
 * size and outcome rate. */
export function renderIntersections(
  container: HTMLElement,
  entries: IntersectionEntry[],
  unassigned: number | null,
  colors: string[],
): void {
  container.textContent = '';
  const list = document.createElement('ul');
  list.className = 'intersections';
  for (const entry of entries) {
    const item = document.createElement('li');
    item.dataset.signature = entry.signature.join(',');
    item.dataset.size = String(entry.size);
    item.dataset.rate = String(entry.outcome_rate);
    const rate =
      entry.outcome_rate === null ? '–' : pct(entry.outcome_rate);
    item.innerHTML =
      `${signatureGlyph(entry.signature, colors)}` +
      `<span class="int-size">${entry.size}</span>` +
      `<span class="int-rate">${rate}</span>`;
    list.appendChild(item);
  }
  container.appendChild(list);
  if (unassigned !== null) {
    const note = document.createElement('div');
    note.className = 'unassigned';
    note.dataset.size = String(unassigned);
    note.textContent = `${unassigned} rows outside every selection`;
    container.appendChild(note);
  }
}
