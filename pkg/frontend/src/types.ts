/** Shapes of the service API documents the explorer consumes. */

export interface RegionRow {
  region: string;
  year: number;
  coords: [number, number];
  cluster: number;
  fkm_label: string;
  euris_code: number;
  euris_label: string;
  distance: number;
  pivot: boolean;
}

export interface ClusterInfo {
  cluster: number;
  label: string;
  rank: number;
  size: number;
  centroid: [number, number];
  distance_to_leader: number;
  pivot_share: number;
}

export interface IndicatorRange {
  name: string;
  min: number;
  max: number;
}

export interface ClustersDocument {
  clusters: ClusterInfo[];
  indicator_ranges: Record<string, IndicatorRange>;
  axis_names: string[];
}

export interface TrialResponse {
  session: string;
  target_cluster: string;
  number: number;
  overrides: Record<string, number>;
  vector: number[];
  probability: number;
  /** exact numeric literal as it appeared in the response body */
  probabilityRaw: string;
  timestamp: string;
  out_of_range: string[];
}

export interface TrialLogEntry {
  number: number;
  overrides: Record<string, number>;
  vector: number[];
  probability: number;
  probabilityRaw: string;
  timestamp: string;
  out_of_range: string[];
}

export interface TrialLogDocument {
  base_region: string;
  base_year: number;
  target_cluster: string;
  cumulative: boolean;
  entries: TrialLogEntry[];
}

export interface DonorSummary {
  indicator: string;
  label: string;
  min: number;
  median: number;
  max: number;
  exemplars: { region: string; year: number; value: number }[];
}

export interface SweepResponse {
  base: string;
  indicator: string;
  values: number[];
  probabilities: number[];
}

export interface ApiError {
  code: string;
  stage: string;
  message: string;
}
