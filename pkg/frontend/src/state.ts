// Selection state: a partial map from hole to implementation payload.
// The string box is the source of truth for formatting, so the state must
// round-trip exactly through parse/format.

export interface Binding {
  hole: string;
  payload: string;
}

/** Split a selection string on top-level commas (brackets and parens nest). */
export function splitTopLevel(text: string): string[] {
  const parts: string[] = [];
  let depth = 0;
  let current = '';
  for (const ch of text) {
    if (ch === '[' || ch === '(') depth += 1;
    if (ch === ']' || ch === ')') depth -= 1;
    if (ch === ',' && depth === 0) {
      parts.push(current);
      current = '';
    } else {
      current += ch;
    }
  }
  if (current.trim() !== '') parts.push(current);
  return parts.map((p) => p.trim()).filter((p) => p !== '');
}

export function parseSelectionString(text: string): Binding[] {
  const out: Binding[] = [];
  for (const part of splitTopLevel(text)) {
    const idx = part.indexOf(':');
    if (idx <= 0) throw new Error(`malformed binding: '${part}'`);
    const hole = part.slice(0, idx).trim();
    const payload = part.slice(idx + 1).trim();
    if (payload === '' && !payload.startsWith('[')) throw new Error(`empty payload for '${hole}'`);
    if (out.some((b) => b.hole === hole)) throw new Error(`duplicate binding for '${hole}'`);
    out.push({ hole, payload });
  }
  return out;
}

export function formatSelection(bindings: Binding[]): string {
  return [...bindings]
    .sort((a, b) => (a.hole < b.hole ? -1 : a.hole > b.hole ? 1 : 0))
    .map((b) => `${b.hole}:${b.payload}`)
    .join(',');
}

export type StateListener = (state: SelectionState) => void;

export class SelectionState {
  private bindings = new Map<string, string>();
  private listeners: StateListener[] = [];

  subscribe(fn: StateListener): void {
    this.listeners.push(fn);
  }

  private emit(): void {
    for (const fn of this.listeners) fn(this);
  }

  get(hole: string): string | undefined {
    return this.bindings.get(hole);
  }

  entries(): Binding[] {
    return [...this.bindings.entries()].map(([hole, payload]) => ({ hole, payload }));
  }

  isEmpty(): boolean {
    return this.bindings.size === 0;
  }

  /** Clicking an implementation binds its hole; clicking it again unbinds. */
  toggle(hole: string, impl: string): void {
    if (this.bindings.get(hole) === impl) {
      this.bindings.delete(hole);
    } else {
      this.bindings.set(hole, impl);
    }
    this.emit();
  }

  setFromString(text: string): void {
    const parsed = parseSelectionString(text);
    this.bindings = new Map(parsed.map((b) => [b.hole, b.payload]));
    this.emit();
  }

  setFromModelNode(selection: { hole: string; impl: string }[]): void {
    this.bindings = new Map(selection.map((s) => [s.hole, s.impl]));
    this.emit();
  }

  clear(): void {
    this.bindings.clear();
    this.emit();
  }

  toString(): string {
    return formatSelection(this.entries());
  }
}

/**
 * Which model nodes to highlight for the current selection: the compatible
 * set from the service, or everything when the selection is empty.
 */
export function highlightSet(
  nodeIds: string[],
  compatible: string[] | null | undefined,
  selectionEmpty: boolean,
): Set<string> {
  if (selectionEmpty) return new Set(nodeIds);
  if (!compatible) return new Set();
  return new Set(compatible);
}
