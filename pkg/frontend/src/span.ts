/** Character-offset span helpers for the labeling view. */

export interface Span {
  start: number;
  end: number;
}

/**
 * Snap a raw selection to trimmed boundaries: leading and trailing
 * whitespace moves inside-out until the span hugs visible characters.
 * Returns null when nothing visible remains (whitespace-only selections
 * are blocked client-side).
 */
export function snapToTrimmed(text: string, start: number, end: number): Span | null {
  let a = Math.max(0, Math.min(start, text.length));
  let b = Math.max(0, Math.min(end, text.length));
  if (a > b) [a, b] = [b, a];
  while (a < b && /\s/.test(text[a]!)) a++;
  while (b > a && /\s/.test(text[b - 1]!)) b--;
  if (a === b) return null;
  return { start: a, end: b };
}

/** The text a snapped span covers. */
export function spanText(text: string, span: Span): string {
  return text.slice(span.start, span.end);
}
