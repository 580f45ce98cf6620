import { ApiError, FieldsClient } from "./api.js";
import { reportPanel, type PanelModel } from "./panel.js";
import { createSettle, LatestWins, type Settle } from "./settle.js";
import type {
  ComplianceReport,
  GridResponse,
  LonLat,
  Viewport,
} from "./types.js";

export interface AppState {
  /** Latest grid drawn under the map; stale while a newer viewport waits. */
  grid: GridResponse | null;
  gridStale: boolean;
  route: LonLat[] | null;
  report: ComplianceReport | null;
  panel: PanelModel | null;
  /** Violation peak to highlight on the map, if any. */
  peakMarker: LonLat | null;
  /** Blocking error banner (auth/validation/server failures). */
  banner: string | null;
  /** Non-blocking notice (e.g. no route between the pins). */
  notice: string | null;
}

export interface AppOptions {
  client: FieldsClient;
  /** Pan/zoom and pin-drag settle delay in ms. */
  settleMs?: number;
  dbs?: string[];
}

export interface App {
  state(): Readonly<AppState>;
  subscribe(fn: (s: Readonly<AppState>) => void): () => void;
  /** Map moved or zoomed; the overlay refetches once the view settles. */
  viewportChanged(view: Viewport): void;
  setStartPin(p: LonLat): void;
  /** Goal pin dragged; one re-plan fires per settle. */
  dragGoalPin(p: LonLat): void;
  /** Score a hand-drawn route immediately. */
  validateDrawn(route: LonLat[]): Promise<void>;
  dispose(): void;
}

export function createApp(opts: AppOptions): App {
  const settleMs = opts.settleMs ?? 250;
  const state: AppState = {
    grid: null,
    gridStale: false,
    route: null,
    report: null,
    panel: null,
    peakMarker: null,
    banner: null,
    notice: null,
  };
  const listeners = new Set<(s: Readonly<AppState>) => void>();
  const emit = () => {
    for (const fn of listeners) fn(state);
  };

  let view: Viewport | null = null;
  let startPin: LonLat | null = null;
  let goalPin: LonLat | null = null;
  const gridFlight = new LatestWins();

  async function refetchGrid(): Promise<void> {
    if (!view) return;
    const wanted = view;
    try {
      const grid = await gridFlight.run((signal) =>
        opts.client.fieldGrid(wanted, { dbs: opts.dbs, signal }),
      );
      if (!grid) return; // superseded by a newer viewport
      state.grid = grid;
      state.gridStale = false;
      state.banner = null;
    } catch (err) {
      state.banner = describe(err);
    }
    emit();
  }

  async function replan(): Promise<void> {
    if (!startPin || !goalPin) return;
    try {
      const plan = await opts.client.planRoute(startPin, goalPin, {
        dbs: opts.dbs,
      });
      state.route = plan.route;
      applyReport(plan.report);
      state.notice = null;
      state.banner = null;
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        state.notice = err.message; // no route: non-blocking
      } else {
        state.banner = describe(err);
      }
    }
    emit();
  }

  function applyReport(report: ComplianceReport): void {
    state.report = report;
    state.panel = reportPanel(report);
    state.peakMarker = report.verdict === "Violation" ? report.peak_location : null;
  }

  const gridSettle: Settle = createSettle(settleMs, () => void refetchGrid());
  const planSettle: Settle = createSettle(settleMs, () => void replan());

  return {
    state: () => state,
    subscribe(fn) {
      listeners.add(fn);
      return () => listeners.delete(fn);
    },
    viewportChanged(v) {
      view = v;
      state.gridStale = state.grid !== null;
      emit();
      gridSettle.poke();
    },
    setStartPin(p) {
      startPin = p;
    },
    dragGoalPin(p) {
      goalPin = p;
      planSettle.poke();
    },
    async validateDrawn(route) {
      try {
        applyReport(await opts.client.validateRoute(route, { dbs: opts.dbs }));
        state.route = route;
        state.banner = null;
      } catch (err) {
        state.banner = describe(err);
      }
      emit();
    },
    dispose() {
      gridSettle.cancel();
      planSettle.cancel();
    },
  };
}

function describe(err: unknown): string {
  if (err instanceof ApiError) return `${err.status}: ${err.message}`;
  return err instanceof Error ? err.message : String(err);
}
