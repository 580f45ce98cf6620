/** Wire contracts of the fieldspace REST service. Positions are [lon, lat]. */

export type LonLat = [number, number];

/** Infinite costs travel as the JSON string "inf". */
export type WireNumber = number | "inf" | "-inf";

export interface GridResponse {
  bbox: [number, number, number, number]; // min_lon, min_lat, max_lon, max_lat
  nx: number;
  ny: number;
  /** Row 0 is the south (minimum latitude) edge. */
  values: number[][];
}

export interface ComplianceReport {
  verdict: "Compliant" | "Violation";
  energy_cost: WireNumber;
  peak_energy: number;
  length: number;
  peak_location: LonLat;
}

export interface PlanResponse {
  route: LonLat[];
  report: ComplianceReport;
}

export interface Viewport {
  minLon: number;
  minLat: number;
  maxLon: number;
  maxLat: number;
  /** Grid sampling resolution requested for the overlay. */
  nx: number;
  ny: number;
}
