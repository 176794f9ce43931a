/** Acceptance checks against a live service over the bundled panel.
 *
 * Run with INNOSCOPE_SERVICE_URL pointing at `innoscope serve` on a bundle
 * built from the packaged fixture; skipped otherwise.
 */

import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import {
  acknowledgeTrial,
  initialState,
  restoreFromLog,
  selectBase,
} from "../src/state.js";

const BASE_URL = process.env.INNOSCOPE_SERVICE_URL ?? "";
const live = BASE_URL ? describe : describe.skip;

function sessionId(): string {
  return "it" + Math.random().toString(36).slice(2, 10);
}

live("explorer against a live fixture service", () => {
  const api = new ApiClient(BASE_URL);

  it("select, override, submit: history probability equals the POST bytes",
     async () => {
       const regions = await api.regions();
       const clusters = await api.clusters();
       expect(clusters.clusters).toHaveLength(4);
       const indicators = Object.keys(clusters.indicator_ranges).sort();

       const session = sessionId();
       let state = initialState(indicators);
       const base = regions[0];
       state = selectBase(state, base.region, base.year);
       const bind = await api.submitTrial(session, {
         base_region: base.region,
         base_year: base.year,
         overrides: {},
       });
       state = acknowledgeTrial(state, bind);

       const trial = await api.submitTrial(session, {
         overrides: { "2.3.2": 11.8 },
       });
       state = acknowledgeTrial(state, trial);

       const shown = state.history[state.history.length - 1].probabilityRaw;
       expect(shown).toBe(trial.probabilityRaw);
       // the displayed string is literally a byte sequence of the response
       expect(JSON.stringify(trial.probability)).toBe(
         JSON.stringify(JSON.parse(shown)),
       );
     });

  it("replaying a session URL restores identical history", async () => {
    const regions = await api.regions();
    const session = sessionId();
    const base = regions[3];
    await api.submitTrial(session, {
      base_region: base.region,
      base_year: base.year,
      overrides: {},
    });
    const second = await api.submitTrial(session, {
      overrides: { "2.2.1": 1.22 },
    });

    // a fresh client (new page load) restores from the log endpoint
    const log = await new ApiClient(BASE_URL).sessionLog(session);
    const restored = restoreFromLog(initialState([]), log);
    expect(restored.history).toHaveLength(2);
    expect(restored.history[1].probabilityRaw).toBe(second.probabilityRaw);
    expect(restored.base).toEqual({ region: base.region, year: base.year });
  });

  it("sweep point count equals the requested steps", async () => {
    const regions = await api.regions();
    const base = regions[0];
    const sweep = await api.sweep(
      `${base.region}::${base.year}`,
      "2.3.2",
      1.0,
      12.0,
      17,
      {},
    );
    expect(sweep.values).toHaveLength(17);
    expect(sweep.probabilities).toHaveLength(17);
  });
});
