/** Explorer state machine.
 *
 * Slider values always reflect either the last server-acknowledged trial or
 * pending local edits layered on top of it - never a stale mix: editing
 * writes to `pending`, an acknowledged trial replaces `baseline` with the
 * resolved vector the server returned and clears `pending`.
 */

import type {
  IndicatorRange,
  TrialLogEntry,
  TrialResponse,
  TrialLogDocument,
} from "./types.js";

export interface HistoryRow {
  number: number;
  overrides: Record<string, number>;
  /** the service's probability bytes, displayed verbatim */
  probabilityRaw: string;
  probability: number;
  outOfRange: string[];
}

export interface ExplorerState {
  base: { region: string; year: number } | null;
  targetCluster: string | null;
  baseline: number[] | null;
  pending: Map<string, number>;
  history: HistoryRow[];
  indicators: string[];
}

export function initialState(indicators: string[]): ExplorerState {
  return {
    base: null,
    targetCluster: null,
    baseline: null,
    pending: new Map(),
    history: [],
    indicators: [...indicators],
  };
}

export function selectBase(
  state: ExplorerState,
  region: string,
  year: number,
): ExplorerState {
  return {
    ...state,
    base: { region, year },
    baseline: null,
    pending: new Map(),
    history: [],
    targetCluster: null,
  };
}

export function editSlider(
  state: ExplorerState,
  indicator: string,
  value: number,
): ExplorerState {
  const pending = new Map(state.pending);
  const idx = state.indicators.indexOf(indicator);
  if (state.baseline !== null && idx >= 0 && state.baseline[idx] === value) {
    pending.delete(indicator); // back on the acknowledged value
  } else {
    pending.set(indicator, value);
  }
  return { ...state, pending };
}

/** Current slider positions: acknowledged baseline with pending edits. */
export function sliderValues(state: ExplorerState): number[] | null {
  if (state.baseline === null) return null;
  const values = [...state.baseline];
  for (const [indicator, value] of state.pending) {
    const idx = state.indicators.indexOf(indicator);
    if (idx >= 0) values[idx] = value;
  }
  return values;
}

/** Overrides to submit: only sliders that differ from the baseline. */
export function pendingOverrides(state: ExplorerState): Record<string, number> {
  const overrides: Record<string, number> = {};
  for (const [indicator, value] of state.pending) {
    const idx = state.indicators.indexOf(indicator);
    if (idx < 0) continue;
    if (state.baseline === null || state.baseline[idx] !== value) {
      overrides[indicator] = value;
    }
  }
  return overrides;
}

function toHistoryRow(entry: {
  number: number;
  overrides: Record<string, number>;
  probability: number;
  probabilityRaw: string;
  out_of_range: string[];
}): HistoryRow {
  return {
    number: entry.number,
    overrides: { ...entry.overrides },
    probabilityRaw: entry.probabilityRaw,
    probability: entry.probability,
    outOfRange: [...entry.out_of_range],
  };
}

export function acknowledgeTrial(
  state: ExplorerState,
  response: TrialResponse,
): ExplorerState {
  return {
    ...state,
    targetCluster: response.target_cluster,
    baseline: [...response.vector],
    pending: new Map(),
    history: [...state.history, toHistoryRow(response)],
  };
}

/** Rebuild state from a persisted session log (page reload / shared URL). */
export function restoreFromLog(
  state: ExplorerState,
  log: TrialLogDocument,
): ExplorerState {
  const entries: TrialLogEntry[] = log.entries;
  const last = entries[entries.length - 1];
  return {
    ...state,
    base: { region: log.base_region, year: log.base_year },
    targetCluster: log.target_cluster,
    baseline: last ? [...last.vector] : null,
    pending: new Map(),
    history: entries.map(toHistoryRow),
  };
}

export function sliderRange(range: IndicatorRange): {
  min: number;
  max: number;
} {
  // observed range with 25% headroom: policy targets may exceed history
  const spread = range.max - range.min;
  return { min: range.min - 0.25 * spread, max: range.max + 0.25 * spread };
}
