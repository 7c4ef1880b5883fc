import { ApiClient } from "./api.js";
import { esc } from "./html.js";
import { SessionController } from "./store.js";
import { renderEdit } from "./views/edit.js";
import { renderLabel } from "./views/label.js";

export interface Route {
  page: "home" | "edit" | "label";
  sessionId: string | null;
}

/** `#/edit/<id>` and `#/label/<id>`; anything else is the session list. */
export function parseRoute(hash: string): Route {
  const match = /^#\/(edit|label)\/(.+)$/.exec(hash);
  if (match && match[1] && match[2]) {
    return { page: match[1] as "edit" | "label", sessionId: decodeURIComponent(match[2]) };
  }
  return { page: "home", sessionId: null };
}

export class App {
  controller: SessionController | null = null;
  route: Route = { page: "home", sessionId: null };

  constructor(
    readonly api: ApiClient,
    readonly root: HTMLElement,
  ) {}

  async navigate(hash: string): Promise<void> {
    this.route = parseRoute(hash);
    const id = this.route.sessionId;
    if (id && this.controller?.sessionId !== id) {
      this.controller = new SessionController(this.api, id);
      try {
        await this.controller.load();
      } catch (err) {
        this.controller.error = err instanceof Error ? err.message : String(err);
      }
    }
    await this.render();
  }

  async render(): Promise<void> {
    const rerender = () => void this.render();
    if (this.route.page === "edit" && this.controller) {
      renderEdit(this.root, this.controller, rerender);
      return;
    }
    if (this.route.page === "label" && this.controller) {
      renderLabel(this.root, this.controller, rerender);
      return;
    }
    await this.renderHome();
  }

  private async renderHome(): Promise<void> {
    let ids: string[] = [];
    let note = "";
    try {
      ids = (await this.api.listSessions()).sessions;
    } catch (err) {
      note = err instanceof Error ? err.message : String(err);
    }
    const rows = ids
      .map(
        (id) =>
          `<li data-session="${esc(id)}">${esc(id)} ` +
          `<a href="#/edit/${encodeURIComponent(id)}">edit</a> ` +
          `<a href="#/label/${encodeURIComponent(id)}">label</a></li>`,
      )
      .join("");
    this.root.innerHTML =
      `<section data-view="home"><h2>sessions</h2>` +
      (note ? `<div data-error class="banner error">${esc(note)}</div>` : "") +
      `<ul data-sessions>${rows}</ul>` +
      `<button data-new-session>new session</button></section>`;
    this.root.querySelector("[data-new-session]")?.addEventListener("click", () => {
      void this.api.createSession({}).then((view) => {
        window.location.hash = `#/edit/${encodeURIComponent(view.session_id)}`;
      });
    });
  }
}

export function bootstrap(): App | null {
  const root = document.getElementById("app");
  if (!root) return null;
  const api = new ApiClient(window.location.origin.replace(/\/$/, ""));
  const app = new App(api, root);
  window.addEventListener("hashchange", () => {
    void app.navigate(window.location.hash);
  });
  void app.navigate(window.location.hash);
  return app;
}

bootstrap();
