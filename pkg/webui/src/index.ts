export { ApiError, FieldsClient } from "./api.js";
export type { ClientOptions } from "./api.js";
export { createApp } from "./app.js";
export type { App, AppOptions, AppState } from "./app.js";
export { drawOverlay } from "./dom.js";
export { decodeEnergy, energyColor, renderOverlay } from "./overlay.js";
export type { RenderedOverlay } from "./overlay.js";
export { reportPanel } from "./panel.js";
export type { PanelModel } from "./panel.js";
export { createSettle, LatestWins } from "./settle.js";
export type * from "./types.js";
