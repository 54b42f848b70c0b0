/** Pure presentation of wire values.  Nothing here computes relational
 * results: every string is a rendering of exactly one payload value. */

import { Frac, JsonCell, isFrac } from "./types.js";

export function formatFrac(f: Frac): string {
  if (f.den === 1) return `${f.num}`;
  const dec = f.num / f.den;
  const short = Math.round(dec * 1000) / 1000;
  return `${f.num}/${f.den} (${short})`;
}

export function formatCell(cell: JsonCell): string {
  if (isFrac(cell)) return formatFrac(cell);
  if (Array.isArray(cell)) {
    return "{" + cell.map(formatCell).join(", ") + "}";
  }
  return String(cell);
}
