// End-to-end workflow against a live compiler service: compile the golf
// program, steer the selection by clicking graph nodes, read the synthesized
// program, and round-trip annotations. The DOM runs under jsdom; every
// displayed fact is cross-checked against an independent API call.

import { spawn, type ChildProcess } from 'node:child_process';
import { readFileSync, rmSync } from 'node:fs';
import { dirname, join } from 'node:path';
import { fileURLToPath } from 'node:url';

import { afterAll, beforeAll, describe, expect, it } from 'vitest';

import { ApiClient } from '../src/api.js';
import { bootstrap, type ExplorerApp } from '../src/main.js';

const here = dirname(fileURLToPath(import.meta.url));
const repoRoot = join(here, '..', '..');
const golfPath = join(repoRoot, 'fixtures', 'golf.mstan');
const port = 18000 + Math.floor(Math.random() * 1000);
const baseUrl = `http://127.0.0.1:${port}`;

let service: ChildProcess;
let app: ExplorerApp;
const api = new ApiClient(baseUrl);

async function waitFor(fn: () => boolean | Promise<boolean>, ms = 20000): Promise<void> {
  const deadline = Date.now() + ms;
  for (;;) {
    try {
      if (await fn()) return;
    } catch {
      // not ready yet
    }
    if (Date.now() > deadline) throw new Error('timed out waiting');
    await new Promise((r) => setTimeout(r, 120));
  }
}

function panelHtml(): string {
  const html = readFileSync(join(here, '..', 'index.html'), 'utf-8');
  const body = html.slice(html.indexOf('<body>') + 6, html.indexOf('</body>'));
  return body.replace(/<script[^>]*><\/script>/, '');
}

function click(el: Element): void {
  el.dispatchEvent(new MouseEvent('click', { bubbles: true }));
}

beforeAll(async () => {
  rmSync(join(repoRoot, 'fixtures', 'golf.annotations.json'), { force: true });
  service = spawn('python3', ['-m', 'modstan.cli', 'serve', golfPath, '--port', String(port)], {
    cwd: repoRoot,
    stdio: 'ignore',
  });
  await waitFor(async () => (await fetch(`${baseUrl}/module-graph`)).ok);
  document.body.innerHTML = panelHtml();
  app = bootstrap(document, baseUrl);
  (document.getElementById('source') as HTMLTextAreaElement).value = readFileSync(golfPath, 'utf-8');
  await app.compile();
}, 60000);

afterAll(() => {
  service?.kill();
  rmSync(join(repoRoot, 'fixtures', 'golf.annotations.json'), { force: true });
});

describe('explorer workflow against the running service', () => {
  it('renders the module graph for the golf program', () => {
    const moduleGraph = document.getElementById('module-graph')!;
    const ids = [...moduleGraph.querySelectorAll('g.mg-node')].map((g) => g.getAttribute('data-id'));
    expect(ids).toContain('NSuccesses');
    expect(ids).toContain('PSuccess');
    expect(ids).toContain('PSuccess:angle_success');
  });

  it('clicking an implementation highlights exactly the compatible models', async () => {
    const impl = document.querySelector('[data-id="PSuccess:angle_success"]')!;
    click(impl);
    await waitFor(() =>
      (document.getElementById('selection-box') as HTMLInputElement).value ===
      'PSuccess:angle_success',
    );
    const expected = await api.concretize('PSuccess:angle_success');
    await waitFor(() => {
      const lit = document.querySelectorAll('#model-graph circle[data-highlighted="true"]');
      return lit.length === (expected.compatibleModels ?? []).length;
    });
    const litIds = [...document.querySelectorAll('#model-graph circle[data-highlighted="true"]')]
      .map((c) => c.closest('g')!.getAttribute('data-id'));
    expect(new Set(litIds)).toEqual(new Set(expected.compatibleModels));
    // selection incomplete: violations shown, no program yet
    expect(document.getElementById('program')!.textContent).toBe('');
  });

  it('completing the selection shows the exact program text from the service', async () => {
    click(document.querySelector('[data-id="NSuccesses:binomial"]')!);
    await waitFor(() => document.getElementById('program')!.textContent !== '');
    const fromService = await api.concretize('NSuccesses:binomial,PSuccess:angle_success');
    expect(document.getElementById('program')!.textContent).toBe(fromService.program);
    expect(fromService.program).toContain('y ~ binomial(n, p_angle);');
  });

  it('clicking a model node adopts its full selection', async () => {
    const target = document.querySelector(
      '#model-graph [data-id="NSuccesses:binomial,PSuccess:logistic"]',
    )!;
    click(target);
    await waitFor(() =>
      document.getElementById('program')!.textContent!.includes('logit(a + b*x)'),
    );
    const box = document.getElementById('selection-box') as HTMLInputElement;
    expect(box.value).toBe('NSuccesses:binomial,PSuccess:logistic');
  });

  it('the selection box round-trips the state', async () => {
    const box = document.getElementById('selection-box') as HTMLInputElement;
    box.value = 'PSuccess:logistic,NSuccesses:binomial';
    box.dispatchEvent(new Event('change'));
    await waitFor(() => box.value === 'NSuccesses:binomial,PSuccess:logistic');
    expect(app.state.toString()).toBe('NSuccesses:binomial,PSuccess:logistic');
  });

  it('annotations save, persist and rehydrate', async () => {
    const box = document.getElementById('selection-box') as HTMLInputElement;
    box.value = 'NSuccesses:binomial,PSuccess:angle_success';
    box.dispatchEvent(new Event('change'));
    await waitFor(() => document.getElementById('program')!.textContent!.includes('p_angle'));
    (document.getElementById('annotation-label') as HTMLInputElement).value = 'model 2';
    (document.getElementById('annotation-notes') as HTMLTextAreaElement).value = 'angle model';
    click(document.getElementById('annotation-save')!);
    await waitFor(async () => {
      const res = await fetch(
        `${baseUrl}/annotations/${encodeURIComponent('NSuccesses:binomial,PSuccess:angle_success')}`,
      );
      return res.ok && (await res.json()).label === 'model 2';
    });

    // a fresh page load sees the saved label
    document.body.innerHTML = panelHtml();
    const fresh = bootstrap(document, baseUrl);
    (document.getElementById('source') as HTMLTextAreaElement).value = readFileSync(golfPath, 'utf-8');
    await fresh.compile();
    fresh.renderAnnotationList();
    expect(document.getElementById('annotation-list')!.textContent).toContain('model 2');
    app = fresh;
  });

  it('rejects a malformed annotations upload without clobbering state', async () => {
    const input = document.getElementById('annotation-upload') as HTMLInputElement;
    const bad = new File(['{"nope": 1}'], 'bad.json', { type: 'application/json' });
    Object.defineProperty(input, 'files', { value: [bad], configurable: true });
    input.dispatchEvent(new Event('change'));
    await waitFor(() => document.getElementById('toast')!.textContent!.includes('could not load'));
    const doc = await api.annotations();
    expect(doc.models['NSuccesses:binomial,PSuccess:angle_success'].label).toBe('model 2');
  });

  it('a broken source shows diagnostics and no graphs', async () => {
    (document.getElementById('source') as HTMLTextAreaElement).value = 'data {';
    await app.compile();
    expect(document.getElementById('diagnostics')!.textContent).toContain('PARSE_ERROR');
    expect(document.getElementById('module-graph')!.textContent).toBe('');
  });
});

describe('initial source loading', () => {
  it('pre-fills the editor from the service and compiles', async () => {
    const { loadInitialSource } = await import('../src/main.js');
    document.body.innerHTML = panelHtml();
    const fresh = bootstrap(document, baseUrl);
    await loadInitialSource(fresh, document, baseUrl);
    const text = (document.getElementById('source') as HTMLTextAreaElement).value;
    expect(text).toContain('y ~ NSuccesses(n, PSuccess(x));');
    expect(document.querySelectorAll('#module-graph g.mg-node').length).toBeGreaterThan(0);
  });
});
