import { describe, expect, it } from 'vitest';

import type { ModelGraph, ModuleGraph } from '../src/api.js';
import { forceLayout, layeredLayout } from '../src/layout.js';

const moduleGraph: ModuleGraph = {
  nodes: [
    { id: 'base', kind: 'base' },
    { id: 'Mean', kind: 'hole' },
    { id: 'Stddev', kind: 'hole' },
    { id: 'Mean:normal', kind: 'impl' },
    { id: 'Mean:standard', kind: 'impl' },
  ],
  edges: [
    { from: 'base', to: 'Mean' },
    { from: 'base', to: 'Stddev' },
    { from: 'Mean', to: 'Mean:normal' },
    { from: 'Mean', to: 'Mean:standard' },
  ],
};

describe('layered layout', () => {
  it('places base above holes above implementations', () => {
    const pos = layeredLayout(moduleGraph);
    expect(pos.get('base')!.y).toBeLessThan(pos.get('Mean')!.y);
    expect(pos.get('Mean')!.y).toBeLessThan(pos.get('Mean:normal')!.y);
    expect(pos.get('Mean')!.y).toBe(pos.get('Stddev')!.y);
  });

  it('spreads layer members horizontally', () => {
    const pos = layeredLayout(moduleGraph);
    expect(pos.get('Mean:normal')!.x).not.toBe(pos.get('Mean:standard')!.x);
  });
});

const modelGraph: ModelGraph = {
  nodes: [
    { id: 'a', selection: [] },
    { id: 'b', selection: [] },
    { id: 'c', selection: [] },
  ],
  edges: [
    { a: 'a', b: 'b', hole: 'H', impls: ['x', 'y'] },
    { a: 'b', b: 'c', hole: 'H', impls: ['y', 'z'] },
  ],
};

describe('force layout', () => {
  it('returns finite in-bounds positions for every node', () => {
    const pos = forceLayout(modelGraph, 400, 300, 50);
    for (const id of ['a', 'b', 'c']) {
      const p = pos.get(id)!;
      expect(Number.isFinite(p.x)).toBe(true);
      expect(Number.isFinite(p.y)).toBe(true);
      expect(p.x).toBeGreaterThanOrEqual(0);
      expect(p.x).toBeLessThanOrEqual(400);
    }
  });

  it('is deterministic', () => {
    const a = forceLayout(modelGraph, 400, 300, 50);
    const b = forceLayout(modelGraph, 400, 300, 50);
    expect([...a.entries()]).toEqual([...b.entries()]);
  });

  it('keeps connected nodes nearer than the diagonal', () => {
    const pos = forceLayout(modelGraph, 400, 300, 150);
    const d = (u: string, v: string) =>
      Math.hypot(pos.get(u)!.x - pos.get(v)!.x, pos.get(u)!.y - pos.get(v)!.y);
    expect(d('a', 'b')).toBeLessThan(500);
  });
});
