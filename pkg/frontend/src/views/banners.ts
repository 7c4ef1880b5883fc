import { esc } from "../html.js";
import type { SessionController } from "../store.js";

/** Stale-version prompt and transient-error banner, shared by both pages. */
export function banners(ctl: SessionController): string {
  const parts: string[] = [];
  if (ctl.stale) {
    parts.push(
      `<div data-reload-prompt class="banner warn">` +
        `<span>this session changed somewhere else; reload to continue</span>` +
        `<button data-reload>reload</button></div>`,
    );
  }
  if (ctl.error) {
    parts.push(
      `<div data-error class="banner error"><span>${esc(ctl.error)}</span>` +
        `<button data-retry>dismiss</button></div>`,
    );
  }
  return parts.join("");
}

export function bindBanners(root: HTMLElement, ctl: SessionController, rerender: () => void): void {
  root.querySelector("[data-reload]")?.addEventListener("click", () => {
    void ctl.refresh().then(rerender);
  });
  root.querySelector("[data-retry]")?.addEventListener("click", () => {
    ctl.error = null;
    rerender();
  });
}
