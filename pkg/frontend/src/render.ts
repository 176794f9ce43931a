/** HTML fragments for the non-chart panels (pure string builders). */

import { escapeAttr, escapeHtml } from "./charts.js";
import { sliderRange } from "./state.js";
import type { HistoryRow } from "./state.js";
import type { DonorSummary, IndicatorRange } from "./types.js";

export function historyTableHtml(rows: HistoryRow[]): string {
  if (rows.length === 0) {
    return '<p class="empty">No trials yet - adjust a slider and submit.</p>';
  }
  const body = rows
    .map((row) => {
      const diff = Object.entries(row.overrides)
        .map(([k, v]) => `${escapeHtml(k)} &rarr; ${v}`)
        .join(", ");
      const flag = row.outOfRange.length
        ? ' <span class="flag" title="outside training range">!</span>'
        : "";
      return (
        `<tr><td>${row.number}</td><td>${diff || "<em>no change</em>"}</td>` +
        `<td class="prob">${escapeHtml(row.probabilityRaw)}${flag}</td></tr>`
      );
    })
    .join("");
  return (
    "<table><thead><tr><th>#</th><th>changes</th>" +
    "<th>membership probability</th></tr></thead>" +
    `<tbody>${body}</tbody></table>`
  );
}

export function slidersHtml(
  indicators: string[],
  ranges: Record<string, IndicatorRange>,
  values: number[] | null,
): string {
  if (values === null) {
    return '<p class="empty">Select a region on the map to load its indicators.</p>';
  }
  return indicators
    .map((code, i) => {
      const range = ranges[code];
      if (!range) return "";
      const { min, max } = sliderRange(range);
      const step = (max - min) / 400;
      return (
        `<div class="slider-row" data-indicator="${escapeAttr(code)}">` +
        `<label title="${escapeAttr(range.name)}">${escapeHtml(code)}</label>` +
        `<input type="range" min="${min}" max="${max}" step="${step}" ` +
        `value="${values[i]}" data-indicator="${escapeAttr(code)}">` +
        `<output>${formatValue(values[i])}</output></div>`
      );
    })
    .join("");
}

export function donorsHtml(summary: DonorSummary): string {
  const chips = summary.exemplars
    .slice(0, 6)
    .map(
      (d) =>
        `<button class="donor" data-indicator="${escapeAttr(summary.indicator)}" ` +
        `data-value="${d.value}">${escapeHtml(d.region)} ${d.year}: ` +
        `${formatValue(d.value)}</button>`,
    )
    .join(" ");
  return (
    `<p>${escapeHtml(summary.label)} members, ${escapeHtml(summary.indicator)}: ` +
    `min ${formatValue(summary.min)}, median ${formatValue(summary.median)}, ` +
    `max ${formatValue(summary.max)}</p><div class="chips">${chips}</div>`
  );
}

export function formatValue(value: number): string {
  return Math.abs(value) >= 100
    ? value.toFixed(0)
    : Math.abs(value) >= 10
      ? value.toFixed(1)
      : value.toFixed(2);
}
