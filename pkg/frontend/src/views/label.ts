import { esc, options } from "../html.js";
import { snapToTrimmed, spanText } from "../span.js";
import type { SessionController } from "../store.js";
import type { OntologyView, SessionView, SlotDefView, TurnView } from "../types.js";
import { banners, bindBanners } from "./banners.js";
import { tuplesPanel } from "./tuples.js";

function speakerName(view: SessionView, speaker: TurnView["speaker"]): string {
  const roles = view.scenario?.role_map;
  if (speaker === "agent") return roles?.agent_name ?? "Agent";
  return roles?.user_name ?? "Caller";
}

function slotsOf(ontology: OntologyView, domain: string): SlotDefView[] {
  return ontology.domains.find((d) => d.name === domain)?.slots ?? [];
}

/** Categorical slots get a dropdown of permissible values; free text otherwise. */
function valueControl(def: SlotDefView | undefined): string {
  if (def && def.kind === "categorical") {
    return `<select data-f-value>${options(def.values)}</select>`;
  }
  return `<input data-f-value placeholder="value (defaults to the span text)">`;
}

function turnsBlock(view: SessionView): string {
  const items = view.turns
    .map(
      (t) =>
        `<li data-turn="${t.index}" data-committed="${t.committed}">` +
        `<span class="speaker">${esc(speakerName(view, t.speaker))}:</span> ` +
        `<span data-turn-text="${t.index}">${esc(t.text)}</span></li>`,
    )
    .join("");
  return `<ol data-turns>${items}</ol>`;
}

function formBlock(ctl: SessionController): string {
  const ontology = ctl.ontology;
  if (!ontology) return `<div data-annotate-form><p class="empty">ontology not loaded</p></div>`;
  const firstDomain = ontology.domains[0];
  const slots = firstDomain ? firstDomain.slots : [];
  return (
    `<div data-annotate-form>` +
    `<label>turn <input data-f-turn type="number" min="1" value="1"></label>` +
    `<label>start <input data-f-start type="number" min="0" value="0"></label>` +
    `<label>end <input data-f-end type="number" min="0" value="0"></label>` +
    `<label>referent <select data-f-referent>${options(ontology.referents)}</select></label>` +
    `<label>domain <select data-f-domain>${options(ontology.domains.map((d) => d.name))}</select></label>` +
    `<label>slot <select data-f-slot>${options(slots.map((s) => s.name))}</select></label>` +
    `<span data-f-value-wrap>${valueControl(slots[0])}</span>` +
    `<button data-annotate>add label</button>` +
    `<p data-form-error></p></div>`
  );
}

function annotationsBlock(view: SessionView): string {
  if (view.annotations.length === 0) {
    return `<ol data-annotations><p class="empty">no labels yet</p></ol>`;
  }
  const byIndex = new Map(view.turns.map((t) => [t.index, t.text]));
  const items = view.annotations
    .map((a) => {
      const text = byIndex.get(a.turn_index) ?? "";
      const span = esc(text.slice(a.char_start, a.char_end));
      const note = a.resolution ? ` <em data-resolution>${esc(a.resolution)}</em>` : "";
      return (
        `<li data-annotation data-turn="${a.turn_index}">` +
        `<span class="span">&quot;${span}&quot;</span> ` +
        `(${esc(a.referent)}, ${esc(a.domain)}, ${esc(a.slot)}, ${esc(a.value)})${note}</li>`
      );
    })
    .join("");
  return `<ol data-annotations>${items}</ol>`;
}

function conflictBlock(ctl: SessionController): string {
  const conflict = ctl.pendingConflict;
  if (!conflict) return "";
  const existing = conflict.existing_values
    .map((v) => `<li data-existing-value>${esc(v)}</li>`)
    .join("");
  const choices = conflict.options
    .map((o) => `<button data-choice="${esc(o)}">${esc(o)}</button>`)
    .join("");
  const a = conflict.annotation;
  return (
    `<div data-conflict-dialog>` +
    `<p>${esc(a.slot)} already has a value; what should happen with ` +
    `<strong data-incoming>${esc(a.value)}</strong>?</p>` +
    `<ul data-existing>${existing}</ul>` +
    `<div class="choices">${choices}</div></div>`
  );
}

function labelHtml(ctl: SessionController): string {
  const view = ctl.view;
  if (!view) return `<section data-view="label">${banners(ctl)}<p class="empty">loading</p></section>`;
  return (
    `<section data-view="label">${banners(ctl)}` +
    `<header><h2>session ${esc(view.session_id)}</h2>` +
    `<span data-phase="${esc(view.phase)}">${esc(view.phase)}</span></header>` +
    `<div class="columns"><main>` +
    `<h3>turns</h3>${turnsBlock(view)}` +
    `<h3>add annotation</h3>${formBlock(ctl)}` +
    `<h3>labels</h3>${annotationsBlock(view)}` +
    conflictBlock(ctl) +
    `</main><aside><h3>extracted tuples</h3>${tuplesPanel(ctl.state)}</aside>` +
    `</div></section>`
  );
}

function bindForm(root: HTMLElement, ctl: SessionController, rerender: () => void): void {
  const ontology = ctl.ontology;
  const view = ctl.view;
  if (!ontology || !view) return;

  const pick = <T extends HTMLElement>(sel: string) => root.querySelector<T>(sel);
  const domainSel = pick<HTMLSelectElement>("[data-f-domain]");
  const slotSel = pick<HTMLSelectElement>("[data-f-slot]");
  const valueWrap = pick<HTMLElement>("[data-f-value-wrap]");
  if (!domainSel || !slotSel || !valueWrap) return;

  const refreshValueControl = () => {
    const def = slotsOf(ontology, domainSel.value).find((s) => s.name === slotSel.value);
    valueWrap.innerHTML = valueControl(def);
  };
  domainSel.addEventListener("change", () => {
    slotSel.innerHTML = options(slotsOf(ontology, domainSel.value).map((s) => s.name));
    refreshValueControl();
  });
  slotSel.addEventListener("change", refreshValueControl);

  pick<HTMLButtonElement>("[data-annotate]")?.addEventListener("click", () => {
    const error = pick<HTMLElement>("[data-form-error]");
    const fail = (msg: string) => {
      if (error) error.textContent = msg;
    };
    const turnIndex = Number(pick<HTMLInputElement>("[data-f-turn]")?.value);
    const turn = view.turns.find((t) => t.index === turnIndex);
    if (!turn) return fail(`no turn ${turnIndex}`);
    const start = Number(pick<HTMLInputElement>("[data-f-start]")?.value);
    const end = Number(pick<HTMLInputElement>("[data-f-end]")?.value);
    // spans never cross turns: offsets index into this one turn's text
    const span = snapToTrimmed(turn.text, start, end);
    if (!span) return fail("selection is blank; pick a non-empty span");
    const valueField = pick<HTMLInputElement | HTMLSelectElement>("[data-f-value]");
    const value = valueField?.value.trim() || spanText(turn.text, span);
    const referent = pick<HTMLSelectElement>("[data-f-referent]")?.value ?? "";
    void ctl
      .annotate({
        turn_index: turnIndex,
        char_start: span.start,
        char_end: span.end,
        referent,
        domain: domainSel.value,
        slot: slotSel.value,
        value,
      })
      .then(rerender);
  });
}

/** Paint the labeling page into `root` and wire its controls. */
export function renderLabel(root: HTMLElement, ctl: SessionController, rerender: () => void): void {
  root.innerHTML = labelHtml(ctl);
  bindBanners(root, ctl, rerender);
  bindForm(root, ctl, rerender);
  for (const button of root.querySelectorAll<HTMLButtonElement>("[data-choice]")) {
    button.addEventListener("click", () => {
      const choice = button.getAttribute("data-choice") ?? "";
      void ctl.resolveConflict(choice).then(rerender);
    });
  }
}
