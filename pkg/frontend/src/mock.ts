import { ApiError } from './api';
import type { Api } from './api';
import type {
  AuditEntry,
  AuditTrail,
  CaseDict,
  CaseSummary,
  CaseStateName,
  ContestKind,
  Health,
  PhaseInterval,
  SeverityLabel,
  SubjectSummary,
  WindowView,
} from './types';
import { SEVERITY_LABELS, isFinalized } from './types';

const FRAMES = 1000;
const SAMPLE_RATE_HZ = 100;
const CONTACT_THRESHOLD_N = 20;

const SENSOR_NAMES: string[] = [];
for (let i = 1; i <= 8; i++) SENSOR_NAMES.push(`L${i}`);
for (let i = 1; i <= 8; i++) SENSOR_NAMES.push(`R${i}`);
export const CHANNEL_NAMES = ['time', ...SENSOR_NAMES, 'total_left', 'total_right'];

interface MockSubject {
  summary: SubjectSummary;
  strideFrames: number;
  stanceFraction: number;
  peakNewtons: number;
  logits: number[];
}

export interface MockOptions {
  /** When false, generated discrepancy stays under the alert threshold. */
  alertCase?: boolean;
  /** Final classes for successive adjudications of each case. */
  decisionScript?: SeverityLabel[];
}

function softmax(logits: number[]): number[] {
  const m = Math.max(...logits);
  const exps = logits.map((v) => Math.exp(v - m));
  const total = exps.reduce((a, b) => a + b, 0);
  return exps.map((v) => v / total);
}

/** Deterministic stand-in digest; chain shape only, not cryptographic. */
function pseudoHash(text: string): string {
  let h = 0x811c9dc5;
  for (let i = 0; i < text.length; i++) {
    h ^= text.charCodeAt(i);
    h = Math.imul(h, 0x01000193) >>> 0;
  }
  let out = '';
  for (let k = 0; k < 8; k++) {
    out += ((h >>> 0).toString(16)).padStart(8, '0');
    h = Math.imul(h ^ 0x9e3779b9, 0x85ebca6b) >>> 0;
  }
  return out;
}

const GENESIS = pseudoHash('genesis');

/**
 * In-memory double of the service API with deterministic fixture data.
 * Used by the test suite and by `?mock` dev mode; it follows the same case
 * state machine and error statuses as the real service so views cannot tell
 * the difference.
 */
export class MockApi implements Api {
  /** Every call in order, for asserting that interactions do not refetch. */
  readonly calls: { method: string; path: string }[] = [];

  private readonly subjects = new Map<string, MockSubject>();
  private readonly cases = new Map<string, CaseDict>();
  private readonly auditLog: AuditEntry[] = [];
  private readonly tampered = new Set<string>();
  private readonly adjudicationCount = new Map<string, number>();
  private readonly alertCase: boolean;
  private readonly decisionScript: SeverityLabel[] | null;
  private caseCounter = 0;
  private conflictsPending = 0;

  constructor(options: MockOptions = {}) {
    this.alertCase = options.alertCase ?? true;
    this.decisionScript = options.decisionScript ?? null;
    this.addSubject('S01', 'Healthy', 104, 0.6, 540, [2.6, 0.4, 0.2, 0.1]);
    this.addSubject('S07', 'Stage 2', 118, 0.63, 610, [0.1, 2.9, 1.2, 0.2]);
  }

  private addSubject(
    id: string,
    label: SeverityLabel,
    strideFrames: number,
    stanceFraction: number,
    peakNewtons: number,
    logits: number[],
  ): void {
    this.subjects.set(id, {
      summary: {
        subject_id: id,
        label,
        n_samples: 3 * FRAMES,
        duration_s: (3 * FRAMES) / SAMPLE_RATE_HZ,
        window_count: 3,
      },
      strideFrames,
      stanceFraction,
      peakNewtons,
      logits,
    });
  }

  // -- test hooks -------------------------------------------------------------

  /** Corrupt one stored entry so the chain no longer verifies. */
  tamperAudit(caseId: string): void {
    this.tampered.add(caseId);
    const entry = this.auditLog.find((e) => e.case_id === caseId);
    if (entry) entry.hash = pseudoHash(entry.hash + 'tampered');
  }

  /** Make the next mutating call fail with 409, as a competing writer would. */
  failNextMutationWithConflict(): void {
    this.conflictsPending += 1;
  }

  countCalls(pathPart: string): number {
    return this.calls.filter((c) => c.path.includes(pathPart)).length;
  }

  // -- internals --------------------------------------------------------------

  private record(method: string, path: string): void {
    this.calls.push({ method, path });
  }

  private takeConflict(): void {
    if (this.conflictsPending > 0) {
      this.conflictsPending -= 1;
      throw new ApiError(409, 'WriterBusy', 'case is being modified by another writer');
    }
  }

  private subject(id: string): MockSubject {
    const s = this.subjects.get(id);
    if (!s) throw new ApiError(404, 'NotFound', `unknown subject '${id}'`);
    return s;
  }

  private caseById(id: string): CaseDict {
    const c = this.cases.get(id);
    if (!c) throw new ApiError(404, 'NotFound', `unknown case '${id}'`);
    return c;
  }

  private appendAudit(caseId: string, actor: string, action: string, payload: Record<string, unknown>): void {
    const seq = this.auditLog.filter((e) => e.case_id === caseId).length;
    const prev = [...this.auditLog].reverse().find((e) => e.case_id === caseId);
    const prevHash = prev ? prev.hash : GENESIS;
    const timestamp = new Date(1700000000000 + this.auditLog.length * 1000).toISOString();
    const hash = pseudoHash([caseId, seq, timestamp, actor, action, prevHash].join('|'));
    this.auditLog.push({
      case_id: caseId,
      seq,
      timestamp,
      actor,
      action,
      payload,
      prev_hash: prevHash,
      hash,
    });
  }

  private requireState(kase: CaseDict, allowed: CaseStateName[], op: string): void {
    if (isFinalized(kase.state)) {
      throw new ApiError(409, 'AlreadyFinalized', `case ${kase.case_id} is finalized`);
    }
    if (!allowed.includes(kase.state)) {
      throw new ApiError(
        409,
        'InvalidStateTransition',
        `${op} requires state in (${allowed.join(', ')}), case is ${kase.state}`,
      );
    }
  }

  private channelSeries(subject: MockSubject, name: string, startFrame: number): number[] {
    const out = new Array<number>(FRAMES);
    if (name === 'time') {
      for (let i = 0; i < FRAMES; i++) out[i] = (startFrame + i) / SAMPLE_RATE_HZ;
      return out;
    }
    const right = name === 'total_right' || name.startsWith('R');
    const sensorIndex = name.startsWith('L') || name.startsWith('R') ? Number(name.slice(1)) : 0;
    const scale = name.startsWith('total') ? 1 : 0.09 + 0.01 * sensorIndex;
    const stride = subject.strideFrames;
    const halfShift = right ? Math.floor(stride / 2) : 0;
    for (let i = 0; i < FRAMES; i++) {
      const phase = ((startFrame + i + halfShift) % stride) / stride;
      const inStance = phase < subject.stanceFraction;
      const lobe = inStance ? Math.sin((Math.PI * phase) / subject.stanceFraction) : 0;
      out[i] = subject.peakNewtons * scale * lobe;
    }
    return out;
  }

  private phaseIntervals(force: number[]): PhaseInterval[] {
    const contact = force.map((v) => v > CONTACT_THRESHOLD_N);
    const intervals: PhaseInterval[] = [];
    let start = 0;
    for (let i = 1; i < contact.length; i++) {
      if (contact[i] !== contact[i - 1]) {
        intervals.push({ start, end: i - 1, phase: contact[i - 1] ? 'stance' : 'swing' });
        start = i;
      }
    }
    intervals.push({
      start,
      end: contact.length - 1,
      phase: contact[contact.length - 1] ? 'stance' : 'swing',
    });
    return intervals;
  }

  private heelStrikes(force: number[]): number[] {
    const strikes: number[] = [];
    for (let i = 1; i < force.length; i++) {
      if (force[i] > CONTACT_THRESHOLD_N && force[i - 1] <= CONTACT_THRESHOLD_N) strikes.push(i);
    }
    return strikes;
  }

  private explanationMaps(): { gradcam: number[]; lrp: number[] } {
    const gradcam = new Array<number>(FRAMES).fill(0.04);
    const lrp = new Array<number>(FRAMES).fill(0.04);
    const peak = this.alertCase ? 0.95 : 0.4;
    for (let i = 400; i <= 455; i++) {
      gradcam[i] = peak;
      lrp[i] = 0.12;
    }
    for (let i = 700; i <= 730; i++) {
      gradcam[i] = 0.3;
      lrp[i] = 0.3;
    }
    return { gradcam, lrp };
  }

  private discrepancyFrom(gradcam: number[], lrp: number[]) {
    const threshold = 0.5;
    const mergeGap = 10;
    const alertPct = 3.0;
    const delta = gradcam.map((g, i) => Math.abs(g - lrp[i]));
    const flagged = delta.map((d) => d > threshold);
    const regions: number[][] = [];
    let runStart = -1;
    for (let i = 0; i <= FRAMES; i++) {
      const on = i < FRAMES && flagged[i];
      if (on && runStart < 0) runStart = i;
      if (!on && runStart >= 0) {
        const last = regions[regions.length - 1];
        if (last && runStart - last[1] - 1 <= mergeGap) last[1] = i - 1;
        else regions.push([runStart, i - 1]);
        runStart = -1;
      }
    }
    const pct = (100 * flagged.filter(Boolean).length) / FRAMES;
    return {
      per_point_delta: delta,
      flagged,
      regions,
      discrepancy_percentage: pct,
      alert: pct > alertPct,
      threshold,
      merge_gap: mergeGap,
      alert_threshold_pct: alertPct,
    };
  }

  private adjudicationFor(kase: CaseDict): { final: SeverityLabel; text: string } {
    const n = this.adjudicationCount.get(kase.case_id) ?? 0;
    this.adjudicationCount.set(kase.case_id, n + 1);
    const predicted = kase.prediction.predicted_class;
    let final: SeverityLabel;
    if (this.decisionScript) {
      final = this.decisionScript[Math.min(n, this.decisionScript.length - 1)];
    } else if (n === 0) {
      final = predicted;
    } else {
      const idx = SEVERITY_LABELS.indexOf(predicted);
      final = SEVERITY_LABELS[(idx + 1) % SEVERITY_LABELS.length];
    }
    const metrics = kase.gait_metrics;
    const stride = metrics ? metrics.mean_stride_time_s.toFixed(2) : 'n/a';
    const stance = metrics ? metrics.stance_percentage.toFixed(1) : 'n/a';
    const text =
      n === 0
        ? `The stride time of ${stride} s and stance share of ${stance}% are consistent with the ` +
          `model output, and the flagged segment does not change the picture. ` +
          `Final decision: ${final}.`
        : `The dissent is well taken: the flagged segment covers the loading response, where the ` +
          `stride time of ${stride} s reads differently. Final decision: ${final}.`;
    return { final, text };
  }

  // -- Api: reads -------------------------------------------------------------

  async health(): Promise<Health> {
    this.record('GET', '/v1/health');
    return {
      status: 'ok',
      model_loaded: true,
      subjects: this.subjects.size,
      cases: this.cases.size,
    };
  }

  async listSubjects(): Promise<SubjectSummary[]> {
    this.record('GET', '/v1/subjects');
    return [...this.subjects.values()]
      .map((s) => ({ ...s.summary }))
      .sort((a, b) => a.subject_id.localeCompare(b.subject_id));
  }

  async getWindowView(subjectId: string, index: number, channels?: string[]): Promise<WindowView> {
    this.record('GET', `/v1/subjects/${subjectId}/windows/${index}`);
    const subject = this.subject(subjectId);
    if (index < 0 || index >= subject.summary.window_count) {
      throw new ApiError(404, 'NotFound', `subject '${subjectId}' has no window ${index}`);
    }
    const names = channels && channels.length ? channels : ['total_left', 'total_right'];
    for (const name of names) {
      if (!CHANNEL_NAMES.includes(name)) {
        throw new ApiError(404, 'NotFound', `unknown channel '${name}'`);
      }
    }
    const startFrame = index * FRAMES;
    const series: Record<string, number[]> = {};
    for (const name of names) series[name] = this.channelSeries(subject, name, startFrame);
    const heelStrikes: Record<string, number[]> = {};
    const phases: Record<string, PhaseInterval[]> = {};
    for (const foot of ['left', 'right']) {
      const force = this.channelSeries(subject, `total_${foot}`, startFrame);
      heelStrikes[foot] = this.heelStrikes(force);
      phases[foot] = this.phaseIntervals(force);
    }
    return {
      subject_id: subjectId,
      window_index: index,
      start_frame: startFrame,
      frames: FRAMES,
      sample_rate_hz: SAMPLE_RATE_HZ,
      label: subject.summary.label,
      channels: series,
      heel_strikes: heelStrikes,
      phases,
      metrics: {
        mean_stride_time_s: subject.strideFrames / SAMPLE_RATE_HZ,
        stance_percentage: subject.stanceFraction * 100,
        swing_percentage: 100 - subject.stanceFraction * 100,
        n_strides: Math.floor(FRAMES / subject.strideFrames),
      },
    };
  }

  async listCases(): Promise<CaseSummary[]> {
    this.record('GET', '/v1/cases');
    return [...this.cases.values()]
      .map((c) => ({
        case_id: c.case_id,
        state: c.state,
        subject_id: c.window_ref.subject_id ?? null,
        window_index: c.window_ref.window_index ?? null,
        predicted_class: c.prediction.predicted_class,
        alert: c.discrepancy.alert,
        final_label: c.final_label,
      }))
      .sort((a, b) => a.case_id.localeCompare(b.case_id));
  }

  async getCase(caseId: string): Promise<CaseDict> {
    this.record('GET', `/v1/cases/${caseId}`);
    return structuredClone(this.caseById(caseId));
  }

  async getAudit(caseId: string): Promise<AuditTrail> {
    this.record('GET', `/v1/cases/${caseId}/audit`);
    this.caseById(caseId);
    const entries = this.auditLog
      .filter((e) => e.case_id === caseId)
      .sort((a, b) => a.seq - b.seq)
      .map((e) => structuredClone(e));
    return { case_id: caseId, entries, verified: !this.tampered.has(caseId) };
  }

  // -- Api: the four mutating endpoints ----------------------------------------

  async createCase(subjectId: string, windowIndex: number, actor = 'clinician'): Promise<CaseDict> {
    this.record('POST', '/v1/cases');
    this.takeConflict();
    const subject = this.subject(subjectId);
    if (windowIndex < 0 || windowIndex >= subject.summary.window_count) {
      throw new ApiError(404, 'NotFound', `subject '${subjectId}' has no window ${windowIndex}`);
    }
    this.caseCounter += 1;
    const caseId = `case-${String(this.caseCounter).padStart(4, '0')}`;
    const probabilities = softmax(subject.logits);
    const k = probabilities.indexOf(Math.max(...probabilities));
    const { gradcam, lrp } = this.explanationMaps();
    const kase: CaseDict = {
      case_id: caseId,
      window_ref: {
        subject_id: subjectId,
        window_index: windowIndex,
        start_frame: windowIndex * FRAMES,
      },
      prediction: {
        logits: [...subject.logits],
        probabilities,
        predicted_class: SEVERITY_LABELS[k],
        confidence: probabilities[k],
      },
      discrepancy: this.discrepancyFrom(gradcam, lrp),
      gait_metrics: {
        mean_stride_time_s: subject.strideFrames / SAMPLE_RATE_HZ,
        stance_percentage: subject.stanceFraction * 100,
        swing_percentage: 100 - subject.stanceFraction * 100,
        n_strides: Math.floor(FRAMES / subject.strideFrames),
      },
      explanations: { gradcam, lrp, target_class: SEVERITY_LABELS[k] },
      state: 'UnderReview',
      dialogue: [],
      contestations: [],
      final_label: null,
      audit_entries: [],
    };
    this.cases.set(caseId, kase);
    this.appendAudit(caseId, actor, 'created', {
      subject_id: subjectId,
      window_index: windowIndex,
      predicted_class: kase.prediction.predicted_class,
    });
    this.appendAudit(caseId, actor, 'review_opened', {});
    return structuredClone(kase);
  }

  async contestCase(caseId: string, kind: ContestKind, freeText: string, author = 'clinician'): Promise<CaseDict> {
    this.record('POST', `/v1/cases/${caseId}/contest`);
    this.takeConflict();
    const kase = this.caseById(caseId);
    this.requireState(kase, ['UnderReview', 'Justified'], 'contest');
    if (!freeText.trim()) {
      throw new ApiError(422, 'ValueError', 'contestation free_text must be non-empty');
    }
    kase.contestations.push({
      kind,
      free_text: freeText,
      author,
      timestamp: new Date().toISOString(),
    });
    kase.state = 'Contested';
    this.appendAudit(caseId, author, 'contested', { kind, free_text: freeText });
    return structuredClone(kase);
  }

  async adjudicateCase(caseId: string, actor = 'adjudicator'): Promise<CaseDict> {
    this.record('POST', `/v1/cases/${caseId}/adjudicate`);
    this.takeConflict();
    const kase = this.caseById(caseId);
    this.requireState(kase, ['UnderReview', 'Contested'], 'adjudicate');
    const { final, text } = this.adjudicationFor(kase);
    const overturned = final !== kase.prediction.predicted_class;
    kase.dialogue.push({
      system_message: 'You are reviewing one gait severity assessment.',
      user_message: 'Review the prediction, the evidence, and any dissent on record.',
      response_text: text,
      result: {
        final_class: final,
        justification_text: text,
        response_time_s: 1.7 + 0.3 * kase.dialogue.length,
        output_tokens: 48 + 14 * kase.dialogue.length,
        overturned,
        tokens_approximate: false,
        attempts: [],
      },
      timestamp: new Date().toISOString(),
    });
    kase.state = 'Justified';
    this.appendAudit(caseId, actor, 'adjudicated', { final_class: final, overturned });
    return structuredClone(kase);
  }

  async finalizeCase(
    caseId: string,
    decision: 'accept' | 'override',
    overrideLabel?: SeverityLabel,
  ): Promise<CaseDict> {
    this.record('POST', `/v1/cases/${caseId}/finalize`);
    this.takeConflict();
    const kase = this.caseById(caseId);
    this.requireState(kase, ['Justified'], 'finalize');
    if (decision === 'accept') {
      const last = kase.dialogue[kase.dialogue.length - 1];
      kase.final_label = last.result.final_class;
      kase.state = 'Finalized(accepted)';
    } else if (decision === 'override') {
      if (!overrideLabel) {
        throw new ApiError(422, 'ValueError', 'override requires an override_label');
      }
      kase.final_label = overrideLabel;
      kase.state = 'Finalized(overridden)';
    } else {
      throw new ApiError(422, 'ValueError', `unknown decision '${decision}'`);
    }
    this.appendAudit(caseId, 'clinician', 'finalized', {
      decision,
      final_label: kase.final_label,
    });
    return structuredClone(kase);
  }
}
