import { afterEach, beforeEach, describe, expect, it } from "vitest";

import { FieldsClient } from "../src/api.js";
import { createApp, type App } from "../src/app.js";
import { decodeEnergy, renderOverlay } from "../src/overlay.js";
import {
  FIXED_GRID,
  FIXED_REPORT,
  sleep,
  startMockServer,
  type MockServer,
} from "./mock-server.js";

const VIEW = { minLon: -122.43, minLat: 37.77, maxLon: -122.41, maxLat: 37.79, nx: 3, ny: 3 };
const SETTLE_MS = 25;

let server: MockServer;
let app: App;

beforeEach(async () => {
  server = await startMockServer();
  app = createApp({
    client: new FieldsClient({ baseUrl: server.url, apiKey: "test-key" }),
    settleMs: SETTLE_MS,
  });
});

afterEach(async () => {
  app.dispose();
  await server.close();
});

async function settled(): Promise<void> {
  await sleep(SETTLE_MS * 4);
}

describe("overlay pipeline", () => {
  it("shows exactly the injected grid and its bucket colors", async () => {
    app.viewportChanged(VIEW);
    await settled();

    // the state holds the injected payload untouched
    expect(app.state().grid).toEqual(FIXED_GRID);
    expect(app.state().gridStale).toBe(false);

    // and the rendered pixels decode back to the injected energy buckets
    const out = renderOverlay(app.state().grid!, 0.6);
    const bucket = (e: number) => Math.round(e * 20);
    for (let row = 0; row < 3; row++) {
      for (let col = 0; col < 3; col++) {
        const at = (row * 3 + col) * 4;
        const decoded = decodeEnergy(
          out.data[at]!,
          out.data[at + 1]!,
          out.data[at + 2]!,
        );
        expect(bucket(decoded)).toBe(bucket(FIXED_GRID.values[2 - row]![col]!));
      }
    }
  });

  it("debounces pans into one grid request and marks the old tile stale", async () => {
    app.viewportChanged(VIEW);
    await settled();
    expect(server.state.gridCalls).toBe(1);

    for (let i = 0; i < 6; i++) {
      app.viewportChanged({ ...VIEW, minLon: VIEW.minLon + i * 1e-3 });
      expect(app.state().gridStale).toBe(true); // old overlay marked stale
    }
    await settled();
    expect(server.state.gridCalls).toBe(2);
    expect(app.state().gridStale).toBe(false);
  });

  it("raises the error banner and keeps the overlay stale on failure", async () => {
    server.state.failGrid = 503;
    app.viewportChanged(VIEW);
    await settled();
    expect(app.state().banner).toContain("503");
    expect(app.state().grid).toBeNull();
  });
});

describe("plan loop", () => {
  it("issues exactly one plan request per goal-drag settle", async () => {
    app.setStartPin([-122.43, 37.77]);
    for (let i = 0; i < 7; i++) {
      app.dragGoalPin([-122.41 + i * 1e-4, 37.79]);
    }
    await settled();
    expect(server.state.planCalls).toBe(1);

    for (let i = 0; i < 4; i++) {
      app.dragGoalPin([-122.405 + i * 1e-4, 37.788]);
    }
    await settled();
    expect(server.state.planCalls).toBe(2);
  });

  it("panel shows the injected report verbatim", async () => {
    app.setStartPin([-122.43, 37.77]);
    app.dragGoalPin([-122.41, 37.79]);
    await settled();

    expect(app.state().route).toEqual(server.state.planRoute);
    expect(app.state().report).toEqual(FIXED_REPORT);
    expect(app.state().panel).toEqual({
      verdict: "Compliant",
      length: String(FIXED_REPORT.length),
      energyCost: String(FIXED_REPORT.energy_cost),
      peakEnergy: String(FIXED_REPORT.peak_energy),
      peakLocation: "-122.42, 37.78",
    });
    expect(app.state().peakMarker).toBeNull();
  });

  it("no-route answers surface as a non-blocking notice", async () => {
    server.state.failPlan = 409;
    app.setStartPin([-122.43, 37.77]);
    app.dragGoalPin([-122.41, 37.79]);
    await settled();
    expect(app.state().notice).toContain("409");
    expect(app.state().banner).toBeNull();
  });
});

describe("hand-drawn validation", () => {
  it("violations highlight the reported peak and pass numbers through", async () => {
    await app.validateDrawn([
      [-122.43, 37.77],
      [-122.41, 37.79],
    ]);
    const s = app.state();
    expect(s.report).toEqual(server.state.validateReport);
    expect(s.panel?.verdict).toBe("Violation");
    expect(s.panel?.energyCost).toBe("inf");
    expect(s.peakMarker).toEqual(server.state.validateReport.peak_location);
    expect(server.state.validateCalls).toBe(1);
  });
});
