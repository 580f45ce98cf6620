import type { ComplianceReport } from "./types.js";

/** Report panel text. Values pass through verbatim — the panel does no math,
 * so every displayed number is traceable to the server response. */
export interface PanelModel {
  verdict: string;
  length: string;
  energyCost: string;
  peakEnergy: string;
  peakLocation: string;
}

export function reportPanel(report: ComplianceReport): PanelModel {
  return {
    verdict: report.verdict,
    length: String(report.length),
    energyCost: String(report.energy_cost),
    peakEnergy: String(report.peak_energy),
    peakLocation: `${report.peak_location[0]}, ${report.peak_location[1]}`,
  };
}
