import { ApiClient, ApiError } from "./api.js";
import type {
  AnnotationRequest,
  ConflictView,
  OntologyView,
  SessionView,
  StateView,
} from "./types.js";

/**
 * View-model for one reviewer session.
 *
 * Nothing in here is authoritative: every field is the body of the most
 * recent server response, and every action replaces those bodies wholesale.
 * Reloading the page and re-fetching must therefore produce an identical
 * render (the refresh-equivalence test pins this).
 */
export class SessionController {
  view: SessionView | null = null;
  state: StateView | null = null;
  ontology: OntologyView | null = null;

  /** Server version moved under us (another tab?); prompt a reload. */
  stale = false;
  /** Transient failure banner; cleared by the next successful call. */
  error: string | null = null;

  constructor(
    readonly api: ApiClient,
    readonly sessionId: string,
  ) {}

  get version(): number {
    return this.view?.version ?? 0;
  }

  get pendingConflict(): ConflictView | null {
    return this.view?.pending_conflict ?? null;
  }

  async load(): Promise<void> {
    this.ontology = await this.api.getOntology();
    await this.refresh();
  }

  /** Re-fetch everything; also clears the stale prompt. */
  async refresh(): Promise<void> {
    this.view = await this.api.getSession(this.sessionId);
    this.state = (await this.api.getState(this.sessionId)).state;
    this.stale = false;
    this.error = null;
  }

  /** Everything a render reads, for equivalence checks. */
  snapshot(): { view: SessionView | null; state: StateView | null } {
    return JSON.parse(JSON.stringify({ view: this.view, state: this.state }));
  }

  private async mutate(action: () => Promise<unknown>): Promise<boolean> {
    try {
      await action();
      await this.refresh();
      return true;
    } catch (err) {
      if (err instanceof ApiError && err.isVersionConflict) {
        this.stale = true;
        return false;
      }
      if (err instanceof ApiError) {
        this.error = `${err.code}: ${err.message}`;
        return false;
      }
      this.error = err instanceof Error ? err.message : String(err);
      return false;
    }
  }

  propose(instruction?: string): Promise<boolean> {
    return this.mutate(() => this.api.propose(this.sessionId, this.version, instruction));
  }

  /**
   * Regeneration replaces the whole draft; a selected turn range rides along
   * inside the steering instruction so the generator sees the focus.
   */
  regenerate(instruction: string, range?: { from: number; to: number }): Promise<boolean> {
    const full = range
      ? `${instruction} (focus on turns ${range.from}-${range.to})`.trim()
      : instruction;
    return this.mutate(() => this.api.regenerate(this.sessionId, this.version, full));
  }

  editTurn(index: number, text: string): Promise<boolean> {
    return this.mutate(() => this.api.editTurn(this.sessionId, index, text, this.version));
  }

  deleteTurn(index: number): Promise<boolean> {
    return this.mutate(() => this.api.deleteTurn(this.sessionId, index, this.version));
  }

  /**
   * Post one span annotation. Returns "accepted", or "conflict" when the
   * slot already holds a different value and the reviewer must choose.
   */
  async annotate(annotation: AnnotationRequest): Promise<"accepted" | "conflict" | "failed"> {
    try {
      const result = await this.api.annotate(this.sessionId, annotation, this.version);
      await this.refresh();
      return result.kind;
    } catch (err) {
      if (err instanceof ApiError && err.isVersionConflict) {
        this.stale = true;
        return "failed";
      }
      this.error = err instanceof Error ? err.message : String(err);
      return "failed";
    }
  }

  resolveConflict(choice: string, target?: string): Promise<boolean> {
    const conflict = this.pendingConflict;
    if (!conflict) return Promise.resolve(false);
    return this.mutate(() =>
      this.api.resolveConflict(this.sessionId, conflict.conflict_id, choice, target, this.version),
    );
  }

  commit(): Promise<boolean> {
    return this.mutate(() => this.api.commit(this.sessionId, this.version));
  }

  rejectEnding(): Promise<boolean> {
    return this.mutate(() => this.api.rejectEnding(this.sessionId, this.version));
  }

  complete(force = false): Promise<boolean> {
    return this.mutate(() => this.api.complete(this.sessionId, this.version, force));
  }
}
