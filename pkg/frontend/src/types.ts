// JSON payload shapes of the /v1 service API. Field names follow the wire
// format exactly; everything the UI shows is reconstructable from these.

export type SeverityLabel = 'Healthy' | 'Stage 2' | 'Stage 2.5' | 'Stage 3';

export const SEVERITY_LABELS: readonly SeverityLabel[] = [
  'Healthy',
  'Stage 2',
  'Stage 2.5',
  'Stage 3',
];

export type ContestKind = 'Factual Error' | 'Normative Conflict' | 'Reasoning Flaw';

export const CONTEST_KINDS: readonly ContestKind[] = [
  'Factual Error',
  'Normative Conflict',
  'Reasoning Flaw',
];

export type CaseStateName =
  | 'Predicted'
  | 'UnderReview'
  | 'Contested'
  | 'Justified'
  | 'Finalized(accepted)'
  | 'Finalized(overridden)';

export function isFinalized(state: CaseStateName): boolean {
  return state === 'Finalized(accepted)' || state === 'Finalized(overridden)';
}

export interface Health {
  status: string;
  model_loaded: boolean;
  subjects: number;
  cases: number;
}

export interface SubjectSummary {
  subject_id: string;
  label: string | null;
  n_samples: number;
  duration_s: number;
  window_count: number;
}

export interface PhaseInterval {
  start: number;
  end: number;
  phase: 'stance' | 'swing';
}

export interface GaitMetrics {
  mean_stride_time_s: number;
  stance_percentage: number;
  swing_percentage: number;
  n_strides: number;
}

export interface WindowView {
  subject_id: string;
  window_index: number;
  start_frame: number;
  frames: number;
  sample_rate_hz: number;
  label: string | null;
  channels: Record<string, number[]>;
  heel_strikes: Record<string, number[]>;
  phases: Record<string, PhaseInterval[]>;
  metrics: GaitMetrics | null;
}

export interface PredictionDict {
  logits: number[];
  probabilities: number[];
  predicted_class: SeverityLabel;
  confidence: number;
}

export interface DiscrepancyDict {
  per_point_delta: number[];
  flagged: boolean[];
  regions: number[][];
  discrepancy_percentage: number;
  alert: boolean;
  threshold: number;
  merge_gap: number;
  alert_threshold_pct: number;
}

export interface AdjudicationDict {
  final_class: SeverityLabel;
  justification_text: string;
  response_time_s: number;
  output_tokens: number;
  overturned: boolean;
  tokens_approximate: boolean;
  attempts: unknown[];
}

export interface DialogueTurnDict {
  system_message: string;
  user_message: string;
  response_text: string;
  result: AdjudicationDict;
  timestamp: string;
}

export interface ContestationDict {
  kind: string;
  free_text: string;
  author: string;
  timestamp: string;
}

export interface AuditEntry {
  case_id: string;
  seq: number;
  timestamp: string;
  actor: string;
  action: string;
  payload: Record<string, unknown>;
  prev_hash: string;
  hash: string;
}

export interface CaseDict {
  case_id: string;
  window_ref: { subject_id?: string; window_index?: number; start_frame?: number };
  prediction: PredictionDict;
  discrepancy: DiscrepancyDict;
  gait_metrics: GaitMetrics | null;
  explanations: { gradcam: number[]; lrp: number[]; target_class: string } | null;
  state: CaseStateName;
  dialogue: DialogueTurnDict[];
  contestations: ContestationDict[];
  final_label: SeverityLabel | null;
  audit_entries: AuditEntry[];
}

export interface CaseSummary {
  case_id: string;
  state: CaseStateName;
  subject_id: string | null;
  window_index: number | null;
  predicted_class: SeverityLabel;
  alert: boolean;
  final_label: SeverityLabel | null;
}

export interface AuditTrail {
  case_id: string;
  entries: AuditEntry[];
  verified: boolean;
}
