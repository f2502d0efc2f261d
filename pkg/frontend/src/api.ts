// Typed client for the compiler service. The UI never computes graph
// semantics locally: everything it shows originates from these calls.

export interface Diagnostic {
  code: string;
  message: string;
  span?: { line: number; col: number; len: number } | null;
}

export interface ModuleGraphNode {
  id: string;
  kind: 'base' | 'hole' | 'impl';
}

export interface ModuleGraph {
  nodes: ModuleGraphNode[];
  edges: { from: string; to: string }[];
}

export interface ModelGraphNode {
  id: string;
  selection: { hole: string; impl: string }[];
  display?: string;
}

export interface ModelGraphEdge {
  a: string;
  b: string;
  hole: string;
  impls: string[];
}

export interface ModelGraph {
  nodes: ModelGraphNode[];
  edges: ModelGraphEdge[];
}

export interface CompileResponse {
  ok: boolean;
  diagnostics: Diagnostic[];
  moduleGraph?: ModuleGraph;
  isMacro?: boolean;
}

export interface ConcretizeResponse {
  ok: boolean;
  program?: string;
  selection?: string;
  violations?: string[];
  compatibleModels?: string[] | null;
}

export interface AnnotationEntry {
  label: string;
  notes: string;
}

export interface AnnotationsDocument {
  models: Record<string, AnnotationEntry>;
}

export type ModelGraphResult =
  | { kind: 'graph'; graph: ModelGraph }
  | { kind: 'too-large'; count: unknown };

export class ApiError extends Error {
  constructor(
    message: string,
    public status: number,
    public detail?: unknown,
  ) {
    super(message);
  }
}

export class ApiClient {
  constructor(private baseUrl: string = '') {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const res = await fetch(this.baseUrl + path, {
      headers: { 'Content-Type': 'application/json' },
      ...init,
    });
    const body = await res.json().catch(() => null);
    if (!res.ok) {
      throw new ApiError(`${path} failed with ${res.status}`, res.status, body?.detail ?? body);
    }
    return body as T;
  }

  compile(source: string): Promise<CompileResponse> {
    return this.request('/compile', { method: 'POST', body: JSON.stringify({ source }) });
  }

  async modelGraph(): Promise<ModelGraphResult> {
    try {
      const graph = await this.request<ModelGraph>('/model-graph');
      return { kind: 'graph', graph };
    } catch (err) {
      if (err instanceof ApiError && err.status === 404) {
        const detail = err.detail as { count?: unknown } | undefined;
        return { kind: 'too-large', count: detail?.count };
      }
      throw err;
    }
  }

  moduleGraph(): Promise<ModuleGraph> {
    return this.request('/module-graph');
  }

  concretize(selection: string): Promise<ConcretizeResponse> {
    return this.request('/concretize', { method: 'POST', body: JSON.stringify({ selection }) });
  }

  neighbors(selection: string): Promise<{ neighbors: string[] }> {
    return this.request('/neighbors', { method: 'POST', body: JSON.stringify({ selection }) });
  }

  annotations(): Promise<AnnotationsDocument> {
    return this.request('/annotations');
  }

  putAnnotations(doc: AnnotationsDocument): Promise<{ ok: boolean }> {
    return this.request('/annotations', { method: 'PUT', body: JSON.stringify(doc) });
  }

  putAnnotation(modelId: string, entry: AnnotationEntry): Promise<{ ok: boolean }> {
    return this.request(`/annotations/${encodeURIComponent(modelId)}`, {
      method: 'PUT',
      body: JSON.stringify(entry),
    });
  }
}
