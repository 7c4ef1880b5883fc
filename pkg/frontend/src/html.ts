/** Tiny string-template helpers; no framework, so escaping is on us. */

const REPLACEMENTS: Record<string, string> = {
  "&": "&amp;",
  "<": "&lt;",
  ">": "&gt;",
  '"': "&quot;",
  "'": "&#39;",
};

export function esc(text: string | number): string {
  return String(text).replace(/[&<>"']/g, (ch) => REPLACEMENTS[ch] ?? ch);
}

/** <option> list with an optional preselected value. */
export function options(values: readonly string[], selected?: string): string {
  return values
    .map((v) => {
      const sel = v === selected ? " selected" : "";
      return `<option value="${esc(v)}"${sel}>${esc(v)}</option>`;
    })
    .join("");
}
