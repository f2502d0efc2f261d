// SVG rendering of the two graphs plus the side panels. Pure DOM, no
// framework; every displayed fact comes from an API payload.

import type { Diagnostic, ModelGraph, ModuleGraph } from './api.js';
import { forceLayout, layeredLayout } from './layout.js';

const SVG_NS = 'http://www.w3.org/2000/svg';

function svgEl<K extends keyof SVGElementTagNameMap>(
  doc: Document,
  tag: K,
  attrs: Record<string, string>,
): SVGElementTagNameMap[K] {
  const el = doc.createElementNS(SVG_NS, tag);
  for (const [k, v] of Object.entries(attrs)) el.setAttribute(k, v);
  return el;
}

export interface ModuleGraphHandlers {
  onImplClick?: (hole: string, impl: string) => void;
}

/** Hole/impl ids arrive as "Hole:impl" for impl nodes. */
function splitImplId(id: string): { hole: string; impl: string } | null {
  const idx = id.indexOf(':');
  if (idx <= 0) return null;
  return { hole: id.slice(0, idx), impl: id.slice(idx + 1) };
}

export function renderModuleGraph(
  doc: Document,
  container: Element,
  graph: ModuleGraph,
  selected: Map<string, string>,
  handlers: ModuleGraphHandlers = {},
): void {
  container.textContent = '';
  const width = 860;
  const pos = layeredLayout(graph, width);
  const maxY = Math.max(120, ...[...pos.values()].map((p) => p.y + 60));
  const svg = svgEl(doc, 'svg', {
    viewBox: `0 0 ${width} ${maxY}`,
    width: '100%',
    class: 'module-graph',
  });
  for (const e of graph.edges) {
    const a = pos.get(e.from);
    const b = pos.get(e.to);
    if (!a || !b) continue;
    svg.appendChild(
      svgEl(doc, 'line', {
        x1: String(a.x),
        y1: String(a.y),
        x2: String(b.x),
        y2: String(b.y),
        stroke: '#aab',
      }),
    );
  }
  for (const n of graph.nodes) {
    const p = pos.get(n.id);
    if (!p) continue;
    const g = svgEl(doc, 'g', { class: `mg-node mg-${n.kind}`, 'data-id': n.id });
    const parts = splitImplId(n.id);
    const isSelected = n.kind === 'impl' && parts !== null && selected.get(parts.hole) === parts.impl;
    if (n.kind === 'hole') {
      g.appendChild(
        svgEl(doc, 'rect', {
          x: String(p.x - 46),
          y: String(p.y - 14),
          width: '92',
          height: '28',
          rx: '3',
          fill: '#fff',
          stroke: '#456',
        }),
      );
    } else {
      g.appendChild(
        svgEl(doc, 'ellipse', {
          cx: String(p.x),
          cy: String(p.y),
          rx: n.kind === 'base' ? '40' : '46',
          ry: '16',
          fill: n.kind === 'base' ? '#dde6f2' : isSelected ? '#ffd76e' : '#eef3ee',
          stroke: isSelected ? '#c88a00' : '#567',
        }),
      );
    }
    const label = svgEl(doc, 'text', {
      x: String(p.x),
      y: String(p.y + 4),
      'text-anchor': 'middle',
      'font-size': '10',
    });
    label.textContent = n.kind === 'impl' && parts ? parts.impl : n.id;
    g.appendChild(label);
    if (n.kind === 'impl' && parts && handlers.onImplClick) {
      (g as unknown as HTMLElement).addEventListener('click', () =>
        handlers.onImplClick!(parts.hole, parts.impl),
      );
      g.setAttribute('cursor', 'pointer');
    }
    svg.appendChild(g);
  }
  container.appendChild(svg);
}

export interface ModelGraphHandlers {
  onModelClick?: (nodeId: string, selection: { hole: string; impl: string }[]) => void;
}

export function renderModelGraph(
  doc: Document,
  container: Element,
  graph: ModelGraph,
  highlighted: Set<string>,
  currentId: string | null,
  labels: Map<string, string>,
  handlers: ModelGraphHandlers = {},
): void {
  container.textContent = '';
  const width = 860;
  const height = Math.max(300, Math.min(640, 120 + graph.nodes.length * 14));
  const pos = forceLayout(graph, width, height);
  const svg = svgEl(doc, 'svg', {
    viewBox: `0 0 ${width} ${height}`,
    width: '100%',
    class: 'model-graph',
  });
  for (const e of graph.edges) {
    const a = pos.get(e.a);
    const b = pos.get(e.b);
    if (!a || !b) continue;
    const line = svgEl(doc, 'line', {
      x1: String(a.x),
      y1: String(a.y),
      x2: String(b.x),
      y2: String(b.y),
      stroke: '#ccd',
    });
    const title = svgEl(doc, 'title', {});
    title.textContent = `differs by ${e.hole}: ${e.impls.join(' vs ')}`;
    line.appendChild(title);
    svg.appendChild(line);
  }
  for (const n of graph.nodes) {
    const p = pos.get(n.id);
    if (!p) continue;
    const lit = highlighted.has(n.id) || highlighted.has(n.display ?? '');
    const isCurrent = currentId !== null && n.id === currentId;
    const g = svgEl(doc, 'g', { class: 'model-node', 'data-id': n.id });
    g.appendChild(
      svgEl(doc, 'circle', {
        cx: String(p.x),
        cy: String(p.y),
        r: isCurrent ? '11' : '8',
        fill: isCurrent ? '#d43' : lit ? '#4a90d9' : '#d8dde6',
        stroke: '#345',
        'data-highlighted': lit ? 'true' : 'false',
      }),
    );
    const label = labels.get(n.display ?? n.id);
    if (label) {
      const text = svgEl(doc, 'text', {
        x: String(p.x),
        y: String(p.y - 12),
        'text-anchor': 'middle',
        'font-size': '9',
      });
      text.textContent = label;
      g.appendChild(text);
    }
    const title = svgEl(doc, 'title', {});
    title.textContent = n.display ?? n.id;
    g.appendChild(title);
    if (handlers.onModelClick) {
      (g as unknown as HTMLElement).addEventListener('click', () =>
        handlers.onModelClick!(n.id, n.selection),
      );
      g.setAttribute('cursor', 'pointer');
    }
    svg.appendChild(g);
  }
  container.appendChild(svg);
}

export function renderDiagnostics(doc: Document, container: Element, diags: Diagnostic[]): void {
  container.textContent = '';
  if (diags.length === 0) return;
  const list = doc.createElement('ul');
  list.className = 'diagnostics';
  for (const d of diags) {
    const li = doc.createElement('li');
    const where = d.span && d.span.line ? `${d.span.line}:${d.span.col}: ` : '';
    li.textContent = `${where}${d.code}: ${d.message}`;
    list.appendChild(li);
  }
  container.appendChild(list);
}

export function renderViolations(doc: Document, container: Element, violations: string[]): void {
  container.textContent = '';
  const list = doc.createElement('ul');
  list.className = 'violations';
  for (const v of violations) {
    const li = doc.createElement('li');
    li.textContent = v;
    list.appendChild(li);
  }
  container.appendChild(list);
}
