import { esc } from "../html.js";
import type { SessionController } from "../store.js";
import type { SessionView, TurnView } from "../types.js";
import { banners, bindBanners } from "./banners.js";
import { tuplesPanel } from "./tuples.js";

function speakerName(view: SessionView, speaker: TurnView["speaker"]): string {
  const roles = view.scenario?.role_map;
  if (speaker === "agent") return roles?.agent_name ?? "Agent";
  return roles?.user_name ?? "Caller";
}

function scenarioBlock(view: SessionView): string {
  const sc = view.scenario;
  if (!sc) return `<div data-scenario><p class="empty">no scenario</p></div>`;
  const rows = sc.triplets
    .map(
      (t) =>
        `<tr data-scenario-row><td>${esc(t.referent)}</td><td>${esc(t.domain)}</td>` +
        `<td>${esc(t.slot)}</td><td>${esc(t.value)}</td></tr>`,
    )
    .join("");
  return (
    `<div data-scenario>` +
    `<table><thead><tr><th>referent</th><th>domain</th><th>slot</th><th>value</th></tr></thead>` +
    `<tbody>${rows}</tbody></table>` +
    `<p data-agent-persona>agent: ${esc(sc.agent_persona)}</p>` +
    `<p data-caller-persona>caller: ${esc(sc.caller_persona)}</p></div>`
  );
}

function historyBlock(view: SessionView): string {
  const committed = view.turns.filter((t) => t.committed);
  if (committed.length === 0) {
    return `<ol data-history><p class="empty">nothing committed yet</p></ol>`;
  }
  const items = committed
    .map(
      (t) =>
        `<li data-turn="${t.index}"><span class="speaker">${esc(speakerName(view, t.speaker))}:</span> ` +
        `<span class="text">${esc(t.text)}</span></li>`,
    )
    .join("");
  return `<ol data-history>${items}</ol>`;
}

function draftBlock(view: SessionView): string {
  const draft = view.turns.filter((t) => !t.committed);
  if (draft.length === 0) {
    return `<div data-draft><p class="empty">no draft; propose a subdialogue</p></div>`;
  }
  const rows = draft
    .map(
      (t) =>
        `<div class="draft-turn" data-turn="${t.index}" data-provenance="${esc(t.provenance ?? "")}">` +
        `<label><input type="checkbox" data-range value="${t.index}"> ${t.index}</label>` +
        `<span class="speaker">${esc(speakerName(view, t.speaker))}:</span>` +
        `<input data-edit-text="${t.index}" value="${esc(t.text)}">` +
        `<button data-save="${t.index}">save</button>` +
        `<button data-remove="${t.index}">delete</button></div>`,
    )
    .join("");
  return `<div data-draft>${rows}</div>`;
}

function endingBlock(view: SessionView): string {
  if (view.phase === "completed") {
    return `<div data-completed><p>dialogue finalized</p></div>`;
  }
  if (view.phase !== "ending_proposed") return "";
  return (
    `<div data-ending><p>the agent proposed to end the call</p>` +
    `<button data-accept-ending>accept and finish</button>` +
    `<button data-reject-ending>keep going</button></div>`
  );
}

function editHtml(ctl: SessionController): string {
  const view = ctl.view;
  if (!view) return `<section data-view="edit">${banners(ctl)}<p class="empty">loading</p></section>`;
  return (
    `<section data-view="edit">${banners(ctl)}` +
    `<header><h2>session ${esc(view.session_id)}</h2>` +
    `<span data-phase="${esc(view.phase)}">${esc(view.phase)}</span></header>` +
    `<div class="columns"><aside>` +
    `<h3>scenario</h3>${scenarioBlock(view)}` +
    `<h3>story</h3><p data-story>${esc(view.story)}</p>` +
    `<h3>extracted tuples</h3>${tuplesPanel(ctl.state)}` +
    `</aside><main>` +
    `<h3>dialogue history</h3>${historyBlock(view)}` +
    `<h3>current subdialogue</h3>${draftBlock(view)}` +
    `<div class="controls">` +
    `<input data-instruction placeholder="extra instructions for the generator">` +
    `<button data-propose>propose</button>` +
    `<button data-regenerate>regenerate</button></div>` +
    endingBlock(view) +
    `</main></div></section>`
  );
}

/** Paint the editing page into `root` and wire its controls. */
export function renderEdit(root: HTMLElement, ctl: SessionController, rerender: () => void): void {
  root.innerHTML = editHtml(ctl);
  bindBanners(root, ctl, rerender);

  const instruction = (): string | undefined => {
    const box = root.querySelector<HTMLInputElement>("[data-instruction]");
    const text = box?.value.trim() ?? "";
    return text ? text : undefined;
  };

  const checkedRange = (): { from: number; to: number } | undefined => {
    const boxes = Array.from(root.querySelectorAll<HTMLInputElement>("[data-range]"));
    const picked = boxes.filter((b) => b.checked).map((b) => Number(b.value));
    if (picked.length === 0) return undefined;
    return { from: Math.min(...picked), to: Math.max(...picked) };
  };

  root.querySelector("[data-propose]")?.addEventListener("click", () => {
    void ctl.propose(instruction()).then(rerender);
  });
  root.querySelector("[data-regenerate]")?.addEventListener("click", () => {
    void ctl.regenerate(instruction() ?? "", checkedRange()).then(rerender);
  });
  root.querySelector("[data-accept-ending]")?.addEventListener("click", () => {
    void ctl.complete().then(rerender);
  });
  root.querySelector("[data-reject-ending]")?.addEventListener("click", () => {
    void ctl.rejectEnding().then(rerender);
  });

  for (const button of root.querySelectorAll<HTMLButtonElement>("[data-save]")) {
    button.addEventListener("click", () => {
      const index = Number(button.getAttribute("data-save"));
      const field = root.querySelector<HTMLInputElement>(`[data-edit-text="${index}"]`);
      if (!field) return;
      void ctl.editTurn(index, field.value).then(rerender);
    });
  }
  for (const button of root.querySelectorAll<HTMLButtonElement>("[data-remove]")) {
    button.addEventListener("click", () => {
      const index = Number(button.getAttribute("data-remove"));
      void ctl.deleteTurn(index).then(rerender);
    });
  }
}
