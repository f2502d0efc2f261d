// Graph layouts, computed locally (layout is presentation, not semantics).

import type { ModelGraph, ModuleGraph } from './api.js';

export interface Point {
  x: number;
  y: number;
}

export type Positions = Map<string, Point>;

/** Layered top-down layout for the module graph: base, then by depth. */
export function layeredLayout(graph: ModuleGraph, width = 800, rowHeight = 90): Positions {
  const depth = new Map<string, number>();
  const succ = new Map<string, string[]>();
  for (const e of graph.edges) {
    const list = succ.get(e.from) ?? [];
    list.push(e.to);
    succ.set(e.from, list);
  }
  const queue: string[] = [];
  for (const n of graph.nodes) {
    if (n.kind === 'base') {
      depth.set(n.id, 0);
      queue.push(n.id);
    }
  }
  while (queue.length > 0) {
    const id = queue.shift()!;
    const d = depth.get(id)!;
    for (const next of succ.get(id) ?? []) {
      const known = depth.get(next);
      if (known === undefined || known < d + 1) {
        depth.set(next, d + 1);
        queue.push(next);
      }
    }
  }
  const layers = new Map<number, string[]>();
  for (const n of graph.nodes) {
    const d = depth.get(n.id) ?? 0;
    const layer = layers.get(d) ?? [];
    layer.push(n.id);
    layers.set(d, layer);
  }
  const out: Positions = new Map();
  for (const [d, ids] of [...layers.entries()].sort((a, b) => a[0] - b[0])) {
    ids.sort();
    ids.forEach((id, i) => {
      out.set(id, { x: ((i + 1) * width) / (ids.length + 1), y: 40 + d * rowHeight });
    });
  }
  return out;
}

function hashAngle(id: string): number {
  let h = 2166136261;
  for (let i = 0; i < id.length; i++) {
    h ^= id.charCodeAt(i);
    h = Math.imul(h, 16777619);
  }
  return ((h >>> 0) % 3600) / 3600 * 2 * Math.PI;
}

/** Deterministic force-directed layout for the model graph. */
export function forceLayout(
  graph: ModelGraph,
  width = 800,
  height = 600,
  iterations = 200,
): Positions {
  const ids = graph.nodes.map((n) => n.id);
  const pos: Positions = new Map();
  const cx = width / 2;
  const cy = height / 2;
  const r = Math.min(width, height) / 3;
  for (const id of ids) {
    const a = hashAngle(id);
    pos.set(id, { x: cx + r * Math.cos(a), y: cy + r * Math.sin(a) });
  }
  const k = Math.sqrt((width * height) / Math.max(1, ids.length));
  for (let it = 0; it < iterations; it++) {
    const disp = new Map<string, Point>(ids.map((id) => [id, { x: 0, y: 0 }]));
    for (let i = 0; i < ids.length; i++) {
      for (let j = i + 1; j < ids.length; j++) {
        const a = pos.get(ids[i])!;
        const b = pos.get(ids[j])!;
        let dx = a.x - b.x;
        let dy = a.y - b.y;
        const dist = Math.max(0.01, Math.hypot(dx, dy));
        const force = (k * k) / dist / dist;
        dx *= force;
        dy *= force;
        const da = disp.get(ids[i])!;
        const db = disp.get(ids[j])!;
        da.x += dx;
        da.y += dy;
        db.x -= dx;
        db.y -= dy;
      }
    }
    for (const e of graph.edges) {
      const a = pos.get(e.a);
      const b = pos.get(e.b);
      if (!a || !b) continue;
      const dx = b.x - a.x;
      const dy = b.y - a.y;
      const dist = Math.max(0.01, Math.hypot(dx, dy));
      const force = (dist * dist) / k / dist;
      const da = disp.get(e.a)!;
      const db = disp.get(e.b)!;
      da.x += dx * force * 0.05;
      da.y += dy * force * 0.05;
      db.x -= dx * force * 0.05;
      db.y -= dy * force * 0.05;
    }
    const temp = 10 * (1 - it / iterations) + 1;
    for (const id of ids) {
      const d = disp.get(id)!;
      const len = Math.max(0.01, Math.hypot(d.x, d.y));
      const p = pos.get(id)!;
      p.x += (d.x / len) * Math.min(len, temp);
      p.y += (d.y / len) * Math.min(len, temp);
      p.x = Math.min(width - 30, Math.max(30, p.x));
      p.y = Math.min(height - 30, Math.max(30, p.y));
    }
  }
  return pos;
}
