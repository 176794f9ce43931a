/** DOM wiring: everything interactive delegates to the pure modules. */

import { ApiClient, RequestFailed, ServiceUnavailable } from "./api.js";
import {
  scatterGeometry,
  scatterSvg,
  sweepGeometry,
  sweepSvg,
} from "./charts.js";
import { donorsHtml, historyTableHtml, slidersHtml } from "./render.js";
import {
  acknowledgeTrial,
  editSlider,
  initialState,
  pendingOverrides,
  restoreFromLog,
  selectBase,
  sliderValues,
  type ExplorerState,
} from "./state.js";
import {
  randomSessionId,
  sessionFromUrl,
  urlWithSession,
} from "./session.js";
import type { ClustersDocument, RegionRow } from "./types.js";

const SCATTER_VIEW = { width: 560, height: 420, pad: 30 };
const SWEEP_VIEW = { width: 560, height: 160, pad: 24 };
const SWEEP_STEPS = 41;

const $ = <T extends HTMLElement>(sel: string): T => {
  const el = document.querySelector(sel);
  if (!el) throw new Error(`missing element ${sel}`);
  return el as T;
};

const api = new ApiClient("");
let state: ExplorerState = initialState([]);
let regions: RegionRow[] = [];
let clustersDoc: ClustersDocument | null = null;
let sweepIndicator: string | null = null;
let session = sessionFromUrl(location.search) ?? randomSessionId();
history.replaceState(null, "", urlWithSession(location.search, session));

function setBanner(text: string | null): void {
  const banner = $("#banner");
  banner.textContent = text ?? "";
  banner.style.display = text ? "block" : "none";
}

function indicatorCodes(): string[] {
  return clustersDoc ? Object.keys(clustersDoc.indicator_ranges).sort() : [];
}

function renderScatter(): void {
  if (!clustersDoc) return;
  const geometry = scatterGeometry(
    regions,
    clustersDoc.clusters,
    SCATTER_VIEW,
    state.base,
  );
  $("#scatter").innerHTML = scatterSvg(geometry, SCATTER_VIEW);
  document.querySelectorAll("#scatter .pt").forEach((el) => {
    el.addEventListener("click", () => {
      const region = (el as SVGElement).dataset.region!;
      const year = Number((el as SVGElement).dataset.year);
      void chooseBase(region, year);
    });
  });
}

function renderSliders(): void {
  if (!clustersDoc) return;
  $("#sliders").innerHTML = slidersHtml(
    state.indicators,
    clustersDoc.indicator_ranges,
    sliderValues(state),
  );
  document
    .querySelectorAll<HTMLInputElement>("#sliders input[type=range]")
    .forEach((input) => {
      input.addEventListener("input", () => {
        state = editSlider(state, input.dataset.indicator!, Number(input.value));
        const output = input.parentElement?.querySelector("output");
        if (output) output.textContent = input.value;
      });
      input.addEventListener("change", () => void refreshSweep());
    });
}

function renderHistory(): void {
  $("#history").innerHTML = historyTableHtml(state.history);
  const last = state.history[state.history.length - 1];
  $("#probability").textContent = last ? last.probabilityRaw : "-";
  $("#target").textContent = state.targetCluster ?? "";
}

async function chooseBase(region: string, year: number): Promise<void> {
  state = selectBase(state, region, year);
  renderScatter();
  try {
    // the empty first trial binds the session and returns the base vector
    const response = await api.submitTrial(session, {
      base_region: region,
      base_year: year,
      overrides: {},
      cumulative: true,
    });
    state = acknowledgeTrial(state, response);
    setBanner(null);
  } catch (err) {
    handleError(err);
    return;
  }
  $("#base").textContent = `${region} (${year})`;
  renderSliders();
  renderHistory();
  await refreshSweep();
}

async function submit(): Promise<void> {
  if (!state.base) return;
  const overrides = pendingOverrides(state);
  try {
    const response = await api.submitTrial(session, { overrides });
    state = acknowledgeTrial(state, response);
    setBanner(null);
  } catch (err) {
    handleError(err);
    return;
  }
  renderSliders();
  renderHistory();
  await refreshSweep();
}

async function refreshSweep(): Promise<void> {
  if (!state.base || !clustersDoc || !sweepIndicator) return;
  const range = clustersDoc.indicator_ranges[sweepIndicator];
  if (!range) return;
  const spread = range.max - range.min;
  const values = sliderValues(state);
  const idx = state.indicators.indexOf(sweepIndicator);
  const overrides = pendingOverrides(state);
  // the sweep reflects every *other* current slider position
  delete overrides[sweepIndicator];
  if (values && state.baseline) {
    for (let i = 0; i < state.indicators.length; i++) {
      if (i !== idx && values[i] !== state.baseline[i]) {
        overrides[state.indicators[i]] = values[i];
      }
    }
  }
  try {
    const sweep = await api.sweep(
      `${state.base.region}::${state.base.year}`,
      sweepIndicator,
      range.min - 0.25 * spread,
      range.max + 0.25 * spread,
      SWEEP_STEPS,
      overrides,
    );
    const current = values && idx >= 0 ? values[idx] : null;
    const geometry = sweepGeometry(
      sweep.values,
      sweep.probabilities,
      current,
      SWEEP_VIEW,
    );
    $("#sweep").innerHTML = sweepSvg(geometry, SWEEP_VIEW);
    $("#sweep-label").textContent =
      `${sweepIndicator} response (${geometry.points} points)`;
  } catch (err) {
    handleError(err);
  }
}

async function loadDonors(): Promise<void> {
  if (!sweepIndicator || !state.targetCluster) return;
  try {
    const summary = await api.donors(state.targetCluster, sweepIndicator);
    $("#donors").innerHTML = donorsHtml(summary);
    document.querySelectorAll<HTMLButtonElement>("#donors .donor").forEach(
      (button) => {
        button.addEventListener("click", () => {
          const indicator = button.dataset.indicator!;
          const value = Number(button.dataset.value);
          state = editSlider(state, indicator, value);
          renderSliders();
          void refreshSweep();
        });
      },
    );
  } catch (err) {
    handleError(err);
  }
}

function handleError(err: unknown): void {
  if (err instanceof ServiceUnavailable) {
    setBanner("Service unreachable - the explorer is offline.");
  } else if (err instanceof RequestFailed) {
    setBanner(`${err.code}: ${err.message}`);
  } else {
    setBanner(String(err));
  }
}

async function boot(): Promise<void> {
  try {
    clustersDoc = await api.clusters();
    regions = await api.regions();
  } catch (err) {
    handleError(err);
    return;
  }
  state = initialState(indicatorCodes());
  sweepIndicator = state.indicators[0] ?? null;
  const picker = $("#sweep-indicator") as HTMLSelectElement;
  picker.innerHTML = state.indicators
    .map((code) => `<option value="${code}">${code}</option>`)
    .join("");
  picker.addEventListener("change", () => {
    sweepIndicator = picker.value;
    void refreshSweep();
    void loadDonors();
  });
  $("#submit").addEventListener("click", () => void submit());
  renderScatter();
  renderSliders();
  renderHistory();

  // restoring a shared session replays the persisted history
  try {
    const log = await api.sessionLog(session);
    state = { ...restoreFromLog(state, log), indicators: state.indicators };
    $("#base").textContent = `${log.base_region} (${log.base_year})`;
    renderScatter();
    renderSliders();
    renderHistory();
    await refreshSweep();
    await loadDonors();
  } catch (err) {
    if (!(err instanceof RequestFailed && err.status === 404)) handleError(err);
  }
}

void boot();
