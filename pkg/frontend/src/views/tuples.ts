import { esc } from "../html.js";
import type { StateView } from "../types.js";

/**
 * Extracted-tuples panel: the running cumulative state, one block per
 * referent. Rendered identically on the editing and labeling pages.
 */
export function tuplesPanel(state: StateView | null): string {
  if (!state) return `<div data-tuples><p class="empty">no state yet</p></div>`;
  const referents = Object.keys(state.entries).sort();
  if (referents.length === 0) {
    return `<div data-tuples><p class="empty">no tuples extracted yet</p></div>`;
  }
  const blocks = referents.map((referent) => {
    const fills = state.entries[referent] ?? [];
    const rows = fills
      .map(
        (f) =>
          `<tr data-tuple data-domain="${esc(f.domain)}" data-slot="${esc(f.slot)}">` +
          `<td>${esc(f.domain)}</td><td>${esc(f.slot)}</td>` +
          `<td data-values>${esc(f.values.join(", "))}</td></tr>`,
      )
      .join("");
    return (
      `<div data-referent="${esc(referent)}"><h4>${esc(referent)}</h4>` +
      `<table><thead><tr><th>domain</th><th>slot</th><th>values</th></tr></thead>` +
      `<tbody>${rows}</tbody></table></div>`
    );
  });
  return `<div data-tuples data-as-of-turn="${state.as_of_turn}">${blocks.join("")}</div>`;
}
