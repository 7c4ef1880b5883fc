import type {
  AnnotationRequest,
  ConflictView,
  OntologyView,
  SessionView,
  StateView,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
    readonly details: unknown = undefined,
  ) {
    super(message);
    this.name = "ApiError";
  }

  get isVersionConflict(): boolean {
    return this.status === 412 && this.code === "version_conflict";
  }
}

export type AnnotateResult =
  | { kind: "accepted"; state: StateView; version: number }
  | { kind: "conflict"; conflict: ConflictView; version: number };

interface RequestOptions {
  method?: string;
  body?: unknown;
}

/** Thin typed client; every piece of reviewer state comes through here. */
export class ApiClient {
  constructor(readonly baseUrl: string) {}

  private async request<T>(path: string, options: RequestOptions = {}): Promise<T> {
    const response = await fetch(this.baseUrl + path, {
      method: options.method ?? "GET",
      headers: options.body !== undefined ? { "content-type": "application/json" } : {},
      body: options.body !== undefined ? JSON.stringify(options.body) : undefined,
    });
    const text = await response.text();
    const data = text ? JSON.parse(text) : {};
    if (!response.ok) {
      const err = (data as { error?: { code?: string; message?: string; details?: unknown } }).error;
      throw new ApiError(
        response.status,
        err?.code ?? "unknown",
        err?.message ?? `request failed with ${response.status}`,
        err?.details,
      );
    }
    return data as T;
  }

  getOntology(): Promise<OntologyView> {
    return this.request("/ontology");
  }

  listSessions(): Promise<{ sessions: string[] }> {
    return this.request("/sessions");
  }

  createSession(body: Record<string, unknown>): Promise<SessionView> {
    return this.request("/sessions", { method: "POST", body });
  }

  getSession(id: string): Promise<SessionView> {
    return this.request(`/sessions/${id}`);
  }

  getState(id: string): Promise<{ state: StateView; version: number }> {
    return this.request(`/sessions/${id}/state`);
  }

  propose(id: string, expectedVersion: number, instruction?: string): Promise<SessionView> {
    return this.request(`/sessions/${id}/subdialogue:propose`, {
      method: "POST",
      body: { expected_version: expectedVersion, instruction },
    });
  }

  regenerate(id: string, expectedVersion: number, instruction?: string): Promise<SessionView> {
    return this.request(`/sessions/${id}/subdialogue:regenerate`, {
      method: "POST",
      body: { expected_version: expectedVersion, instruction },
    });
  }

  editTurn(id: string, index: number, text: string, expectedVersion: number): Promise<SessionView> {
    return this.request(`/sessions/${id}/turns/${index}`, {
      method: "PATCH",
      body: { text, expected_version: expectedVersion },
    });
  }

  deleteTurn(id: string, index: number, expectedVersion: number): Promise<SessionView> {
    return this.request(`/sessions/${id}/turns/${index}`, {
      method: "DELETE",
      body: { expected_version: expectedVersion },
    });
  }

  /**
   * 201 means accepted; a 409 with a "conflict" body is the three-choice
   * prompt, not an error, so this cannot reuse request().
   */
  async annotate(
    id: string,
    annotation: AnnotationRequest,
    expectedVersion: number,
  ): Promise<AnnotateResult> {
    const response = await fetch(`${this.baseUrl}/sessions/${id}/annotations`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ annotation, expected_version: expectedVersion }),
    });
    const data = (await response.json()) as Record<string, unknown>;
    if (response.status === 201) {
      return {
        kind: "accepted",
        state: data.state as StateView,
        version: data.version as number,
      };
    }
    if (response.status === 409 && data.conflict !== undefined) {
      return {
        kind: "conflict",
        conflict: data.conflict as ConflictView,
        version: data.version as number,
      };
    }
    const err = data.error as { code?: string; message?: string; details?: unknown } | undefined;
    throw new ApiError(
      response.status,
      err?.code ?? "unknown",
      err?.message ?? `annotation failed with ${response.status}`,
      err?.details,
    );
  }

  resolveConflict(
    id: string,
    conflictId: string,
    resolution: string,
    target: string | undefined,
    expectedVersion: number,
  ): Promise<{ state: StateView; version: number }> {
    return this.request(`/sessions/${id}/conflicts/${conflictId}:resolve`, {
      method: "POST",
      body: { resolution, target, expected_version: expectedVersion },
    });
  }

  commit(id: string, expectedVersion: number): Promise<SessionView> {
    return this.request(`/sessions/${id}:commit`, {
      method: "POST",
      body: { expected_version: expectedVersion },
    });
  }

  rejectEnding(id: string, expectedVersion: number): Promise<SessionView> {
    return this.request(`/sessions/${id}:reject-ending`, {
      method: "POST",
      body: { expected_version: expectedVersion },
    });
  }

  complete(id: string, expectedVersion: number, force = false): Promise<SessionView> {
    return this.request(`/sessions/${id}:complete`, {
      method: "POST",
      body: { expected_version: expectedVersion, force },
    });
  }
}
