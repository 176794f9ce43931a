/** Pure chart geometry: data in, SVG fragments out. No DOM access here so
 * the mapping logic is testable in node. */

import type { ClusterInfo, RegionRow } from "./types.js";

export interface Viewport {
  width: number;
  height: number;
  pad: number;
}

export interface LinearScale {
  (value: number): number;
}

export function linearScale(
  domainMin: number,
  domainMax: number,
  rangeMin: number,
  rangeMax: number,
): LinearScale {
  const span = domainMax - domainMin || 1;
  return (value: number) =>
    rangeMin + ((value - domainMin) / span) * (rangeMax - rangeMin);
}

export const CLUSTER_COLORS = ["#c23f3f", "#d99a2b", "#3f78c2", "#2f9e62"];

export interface ScatterGeometry {
  x: LinearScale;
  y: LinearScale;
  points: {
    cx: number;
    cy: number;
    row: RegionRow;
    color: string;
    selected: boolean;
  }[];
  centroids: { cx: number; cy: number; info: ClusterInfo }[];
}

export function scatterGeometry(
  rows: RegionRow[],
  clusters: ClusterInfo[],
  view: Viewport,
  selected: { region: string; year: number } | null,
): ScatterGeometry {
  const xs = rows.map((r) => r.coords[0]);
  const ys = rows.map((r) => r.coords[1]);
  const x = linearScale(
    Math.min(...xs),
    Math.max(...xs),
    view.pad,
    view.width - view.pad,
  );
  // screen y grows downward
  const y = linearScale(
    Math.min(...ys),
    Math.max(...ys),
    view.height - view.pad,
    view.pad,
  );
  return {
    x,
    y,
    points: rows.map((row) => ({
      cx: x(row.coords[0]),
      cy: y(row.coords[1]),
      row,
      color: CLUSTER_COLORS[row.cluster % CLUSTER_COLORS.length],
      selected:
        selected !== null &&
        row.region === selected.region &&
        row.year === selected.year,
    })),
    centroids: clusters.map((info) => ({
      cx: x(info.centroid[0]),
      cy: y(info.centroid[1]),
      info,
    })),
  };
}

export function scatterSvg(geometry: ScatterGeometry, view: Viewport): string {
  const parts: string[] = [];
  for (const p of geometry.points) {
    const r = p.selected ? 6 : 2.6;
    const stroke = p.selected ? ' stroke="#111" stroke-width="2"' : "";
    parts.push(
      `<circle class="pt" data-region="${escapeAttr(p.row.region)}" ` +
        `data-year="${p.row.year}" cx="${p.cx.toFixed(1)}" ` +
        `cy="${p.cy.toFixed(1)}" r="${r}" fill="${p.color}" ` +
        `fill-opacity="0.55"${stroke}></circle>`,
    );
  }
  for (const c of geometry.centroids) {
    parts.push(
      `<g class="centroid"><circle cx="${c.cx.toFixed(1)}" ` +
        `cy="${c.cy.toFixed(1)}" r="9" fill="none" stroke="#111" ` +
        `stroke-width="2"></circle>` +
        `<text x="${(c.cx + 12).toFixed(1)}" y="${(c.cy + 4).toFixed(1)}" ` +
        `font-size="11">${escapeHtml(c.info.label)}</text></g>`,
    );
  }
  return (
    `<svg viewBox="0 0 ${view.width} ${view.height}" ` +
    `width="${view.width}" height="${view.height}">${parts.join("")}</svg>`
  );
}

export interface SweepGeometry {
  path: string;
  markerX: number | null;
  points: number;
}

export function sweepGeometry(
  values: number[],
  probabilities: number[],
  current: number | null,
  view: Viewport,
): SweepGeometry {
  if (values.length === 0) return { path: "", markerX: null, points: 0 };
  const x = linearScale(
    values[0],
    values[values.length - 1],
    view.pad,
    view.width - view.pad,
  );
  const y = linearScale(0, 1, view.height - view.pad, view.pad);
  const path = values
    .map(
      (v, i) =>
        `${i === 0 ? "M" : "L"}${x(v).toFixed(1)},${y(probabilities[i]).toFixed(1)}`,
    )
    .join(" ");
  return {
    path,
    markerX: current === null ? null : x(current),
    points: values.length,
  };
}

export function sweepSvg(geometry: SweepGeometry, view: Viewport): string {
  const marker =
    geometry.markerX === null
      ? ""
      : `<line x1="${geometry.markerX.toFixed(1)}" y1="${view.pad}" ` +
        `x2="${geometry.markerX.toFixed(1)}" y2="${view.height - view.pad}" ` +
        `stroke="#888" stroke-dasharray="4 3"></line>`;
  return (
    `<svg viewBox="0 0 ${view.width} ${view.height}" width="${view.width}" ` +
    `height="${view.height}"><path d="${geometry.path}" fill="none" ` +
    `stroke="#2f9e62" stroke-width="2"></path>${marker}</svg>`
  );
}

export function escapeHtml(value: string): string {
  return value
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;");
}

export function escapeAttr(value: string): string {
  return escapeHtml(value).replace(/"/g, "&quot;");
}
