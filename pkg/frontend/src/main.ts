// Application wiring: one compiled program, one live selection, panels that
// follow it. Stale responses are dropped via a request sequence number.

import { ApiClient, type AnnotationsDocument, type ModelGraph, type ModuleGraph } from './api.js';
import { SelectionState, highlightSet } from './state.js';
import {
  renderDiagnostics,
  renderModelGraph,
  renderModuleGraph,
  renderViolations,
} from './render.js';

interface Panels {
  source: HTMLTextAreaElement;
  compileButton: HTMLButtonElement;
  diagnostics: HTMLElement;
  moduleGraph: HTMLElement;
  modelGraph: HTMLElement;
  modelGraphNote: HTMLElement;
  selectionBox: HTMLInputElement;
  selectionError: HTMLElement;
  program: HTMLElement;
  annotationEditor: HTMLElement;
  annotationLabel: HTMLInputElement;
  annotationNotes: HTMLTextAreaElement;
  annotationSave: HTMLButtonElement;
  annotationList: HTMLElement;
  annotationDownload: HTMLButtonElement;
  annotationUpload: HTMLInputElement;
  toast: HTMLElement;
}

export class ExplorerApp {
  readonly state = new SelectionState();
  private moduleGraph: ModuleGraph | null = null;
  private modelGraph: ModelGraph | null = null;
  private annotations: AnnotationsDocument = { models: {} };
  private currentValidSelection: string | null = null;
  private requestSeq = 0;

  constructor(
    private api: ApiClient,
    private doc: Document,
    private panels: Panels,
  ) {
    this.state.subscribe(() => {
      void this.onSelectionChanged();
    });
    panels.compileButton.addEventListener('click', () => void this.compile());
    panels.selectionBox.addEventListener('change', () => {
      try {
        this.state.setFromString(panels.selectionBox.value);
        panels.selectionError.textContent = '';
      } catch (err) {
        panels.selectionError.textContent = String(err instanceof Error ? err.message : err);
      }
    });
    panels.annotationSave.addEventListener('click', () => void this.saveAnnotation());
    panels.annotationDownload.addEventListener('click', () => this.downloadAnnotations());
    panels.annotationUpload.addEventListener('change', () => void this.uploadAnnotations());
  }

  async compile(): Promise<void> {
    const res = await this.api.compile(this.panels.source.value);
    renderDiagnostics(this.doc, this.panels.diagnostics, res.diagnostics);
    if (!res.ok || !res.moduleGraph) {
      this.moduleGraph = null;
      this.modelGraph = null;
      this.panels.moduleGraph.textContent = '';
      this.panels.modelGraph.textContent = '';
      return;
    }
    this.moduleGraph = res.moduleGraph;
    const graphRes = await this.api.modelGraph();
    if (graphRes.kind === 'graph') {
      this.modelGraph = graphRes.graph;
      this.panels.modelGraphNote.textContent = '';
    } else {
      this.modelGraph = null;
      this.panels.modelGraphNote.textContent =
        'model space too large to draw: ' + JSON.stringify(graphRes.count) + ' models';
    }
    this.annotations = await this.api.annotations();
    this.state.clear();
  }

  labelsByModel(): Map<string, string> {
    return new Map(
      Object.entries(this.annotations.models)
        .filter(([, v]) => v.label !== '')
        .map(([k, v]) => [k, v.label]),
    );
  }

  private async onSelectionChanged(): Promise<void> {
    const seq = ++this.requestSeq;
    const panels = this.panels;
    panels.selectionBox.value = this.state.toString();
    if (this.moduleGraph) {
      renderModuleGraph(
        this.doc,
        panels.moduleGraph,
        this.moduleGraph,
        new Map(this.state.entries().map((b) => [b.hole, b.payload])),
        { onImplClick: (hole, impl) => this.state.toggle(hole, impl) },
      );
    }
    if (this.state.isEmpty()) {
      this.currentValidSelection = null;
      panels.program.textContent = '';
      panels.annotationEditor.classList.add('disabled');
      this.redrawModelGraph(new Set(this.modelGraph?.nodes.map((n) => n.id) ?? []), null);
      return;
    }
    let res;
    try {
      res = await this.api.concretize(this.state.toString());
    } catch (err) {
      panels.selectionError.textContent = String(err instanceof Error ? err.message : err);
      return;
    }
    if (seq !== this.requestSeq) return; // a newer edit superseded this call
    const ids = this.modelGraph?.nodes.map((n) => n.id) ?? [];
    const lit = highlightSet(ids, res.compatibleModels, false);
    if (res.ok && res.program) {
      this.currentValidSelection = res.selection ?? this.state.toString();
      panels.program.textContent = res.program;
      panels.annotationEditor.classList.remove('disabled');
      const existing = this.annotations.models[this.currentValidSelection];
      panels.annotationLabel.value = existing?.label ?? '';
      panels.annotationNotes.value = existing?.notes ?? '';
      renderViolations(this.doc, panels.selectionError, []);
      this.redrawModelGraph(lit, this.currentValidSelection);
    } else {
      this.currentValidSelection = null;
      panels.program.textContent = '';
      panels.annotationEditor.classList.add('disabled');
      renderViolations(this.doc, panels.selectionError, res.violations ?? []);
      this.redrawModelGraph(lit, null);
    }
  }

  private redrawModelGraph(highlighted: Set<string>, currentId: string | null): void {
    if (!this.modelGraph) return;
    renderModelGraph(
      this.doc,
      this.panels.modelGraph,
      this.modelGraph,
      highlighted,
      currentId,
      this.labelsByModel(),
      {
        onModelClick: (_id, selection) => this.state.setFromModelNode(selection),
      },
    );
  }

  private async saveAnnotation(): Promise<void> {
    if (!this.currentValidSelection) return;
    const entry = {
      label: this.panels.annotationLabel.value,
      notes: this.panels.annotationNotes.value,
    };
    await this.api.putAnnotation(this.currentValidSelection, entry);
    this.annotations.models[this.currentValidSelection] = entry;
    this.renderAnnotationList();
    this.redrawModelGraph(
      new Set([this.currentValidSelection]),
      this.currentValidSelection,
    );
  }

  renderAnnotationList(): void {
    const panel = this.panels.annotationList;
    panel.textContent = '';
    for (const [key, entry] of Object.entries(this.annotations.models)) {
      const row = this.doc.createElement('div');
      row.className = 'annotation-row';
      const link = this.doc.createElement('a');
      link.textContent = entry.label || key;
      link.href = '#';
      link.addEventListener('click', (ev) => {
        ev.preventDefault();
        this.state.setFromString(key);
      });
      row.appendChild(link);
      panel.appendChild(row);
    }
  }

  private downloadAnnotations(): void {
    const blob = new Blob([JSON.stringify(this.annotations, null, 2)], {
      type: 'application/json',
    });
    const url = URL.createObjectURL(blob);
    const a = this.doc.createElement('a');
    a.href = url;
    a.download = 'annotations.json';
    a.click();
    URL.revokeObjectURL(url);
  }

  private async uploadAnnotations(): Promise<void> {
    const file = this.panels.annotationUpload.files?.[0];
    if (!file) return;
    try {
      const doc = JSON.parse(await file.text()) as AnnotationsDocument;
      if (typeof doc !== 'object' || doc === null || typeof doc.models !== 'object') {
        throw new Error('annotations file must contain a "models" object');
      }
      await this.api.putAnnotations(doc);
      this.annotations = doc;
      this.renderAnnotationList();
      this.showToast(`loaded ${Object.keys(doc.models).length} annotations`);
    } catch (err) {
      this.showToast(`could not load annotations: ${err instanceof Error ? err.message : err}`);
    }
  }

  private showToast(message: string): void {
    this.panels.toast.textContent = message;
    this.panels.toast.classList.add('visible');
    setTimeout(() => this.panels.toast.classList.remove('visible'), 4000);
  }
}

/** Pre-fill the editor with the program the service was started on. */
export async function loadInitialSource(app: ExplorerApp, doc: Document, baseUrl = ''): Promise<void> {
  const res = await fetch(baseUrl + '/source');
  if (!res.ok) return;
  const body = (await res.json()) as { source: string };
  if (body.source) {
    (doc.getElementById('source') as HTMLTextAreaElement).value = body.source;
    await app.compile();
    app.renderAnnotationList();
  }
}

export function bootstrap(doc: Document, baseUrl = ''): ExplorerApp {
  const byId = <T extends HTMLElement>(id: string) => doc.getElementById(id) as T;
  const app = new ExplorerApp(new ApiClient(baseUrl), doc, {
    source: byId('source'),
    compileButton: byId('compile'),
    diagnostics: byId('diagnostics'),
    moduleGraph: byId('module-graph'),
    modelGraph: byId('model-graph'),
    modelGraphNote: byId('model-graph-note'),
    selectionBox: byId('selection-box'),
    selectionError: byId('selection-error'),
    program: byId('program'),
    annotationEditor: byId('annotation-editor'),
    annotationLabel: byId('annotation-label'),
    annotationNotes: byId('annotation-notes'),
    annotationSave: byId('annotation-save'),
    annotationList: byId('annotation-list'),
    annotationDownload: byId('annotation-download'),
    annotationUpload: byId('annotation-upload'),
    toast: byId('toast'),
  });
  return app;
}

declare global {
  interface Window {
    explorer?: ExplorerApp;
  }
}

if (typeof window !== 'undefined' && typeof document !== 'undefined' && document.getElementById('compile')) {
  window.explorer = bootstrap(document);
  void loadInitialSource(window.explorer, document);
}
