import { describe, expect, it } from 'vitest';

import {
  formatSelection,
  highlightSet,
  parseSelectionString,
  SelectionState,
  splitTopLevel,
} from '../src/state.js';

describe('selection string parsing', () => {
  it('splits on top-level commas only', () => {
    expect(splitTopLevel('A:x,B:[1,2],C:(a,b)')).toEqual(['A:x', 'B:[1,2]', 'C:(a,b)']);
  });

  it('parses plain bindings', () => {
    expect(parseSelectionString('Mean:normal, Stddev:standard')).toEqual([
      { hole: 'Mean', payload: 'normal' },
      { hole: 'Stddev', payload: 'standard' },
    ]);
  });

  it('keeps macro payloads opaque', () => {
    const parsed = parseSelectionString('Feature:[1,2,3],Theta*Col:[(t,1)]');
    expect(parsed[0].payload).toBe('[1,2,3]');
    expect(parsed[1].hole).toBe('Theta*Col');
  });

  it('rejects duplicates and malformed bindings', () => {
    expect(() => parseSelectionString('A:x,A:y')).toThrow(/duplicate/);
    expect(() => parseSelectionString('justahole')).toThrow(/malformed/);
  });

  it('round-trips through format', () => {
    for (const text of ['', 'Mean:normal', 'B:[1,2],A:x', 'PSuccess:angle_success,NSuccesses:binomial']) {
      const parsed = parseSelectionString(text);
      const formatted = formatSelection(parsed);
      expect(parseSelectionString(formatted)).toEqual(
        [...parsed].sort((a, b) => (a.hole < b.hole ? -1 : 1)),
      );
      // formatting is canonical: a second round trip is the identity
      expect(formatSelection(parseSelectionString(formatted))).toBe(formatted);
    }
  });
});

describe('selection state', () => {
  it('toggles implementations per hole', () => {
    const s = new SelectionState();
    s.toggle('Mean', 'normal');
    expect(s.toString()).toBe('Mean:normal');
    s.toggle('Mean', 'standard');
    expect(s.toString()).toBe('Mean:standard');
    s.toggle('Mean', 'standard');
    expect(s.toString()).toBe('');
  });

  it('box text and state are interchangeable', () => {
    const s = new SelectionState();
    s.setFromString('Stddev:lognormal,Mean:normal');
    expect(s.toString()).toBe('Mean:normal,Stddev:lognormal');
    const t = new SelectionState();
    t.setFromString(s.toString());
    expect(t.toString()).toBe(s.toString());
  });

  it('adopts model-node selections', () => {
    const s = new SelectionState();
    s.setFromModelNode([
      { hole: 'Mean', impl: 'standard' },
      { hole: 'Stddev', impl: 'standard' },
    ]);
    expect(s.toString()).toBe('Mean:standard,Stddev:standard');
  });

  it('notifies subscribers', () => {
    const s = new SelectionState();
    let calls = 0;
    s.subscribe(() => (calls += 1));
    s.toggle('A', 'x');
    s.clear();
    expect(calls).toBe(2);
  });
});

describe('highlighting', () => {
  const ids = ['m1', 'm2', 'm3'];

  it('everything lights up for the empty selection', () => {
    expect(highlightSet(ids, null, true)).toEqual(new Set(ids));
  });

  it('uses the compatible set from the service', () => {
    expect(highlightSet(ids, ['m2'], false)).toEqual(new Set(['m2']));
  });

  it('nothing lights up when the service cannot materialize', () => {
    expect(highlightSet(ids, null, false)).toEqual(new Set());
  });
});
