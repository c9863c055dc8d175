import type {
  AuditTrail,
  CaseDict,
  CaseSummary,
  ContestKind,
  Health,
  SeverityLabel,
  SubjectSummary,
  WindowView,
} from './types';

/** Error payload the service attaches to non-2xx responses. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly errorType: string,
    detail: string,
  ) {
    super(detail);
    this.name = 'ApiError';
  }
}

export function isConflict(err: unknown): boolean {
  return err instanceof ApiError && err.status === 409;
}

/**
 * The service surface the UI is allowed to touch. Reads are GETs; the four
 * mutating calls map one-to-one onto the POST endpoints. Nothing else in the
 * app changes server state.
 */
export interface Api {
  health(): Promise<Health>;
  listSubjects(): Promise<SubjectSummary[]>;
  getWindowView(subjectId: string, index: number, channels?: string[]): Promise<WindowView>;
  listCases(): Promise<CaseSummary[]>;
  getCase(caseId: string): Promise<CaseDict>;
  getAudit(caseId: string): Promise<AuditTrail>;
  createCase(subjectId: string, windowIndex: number, actor?: string): Promise<CaseDict>;
  contestCase(caseId: string, kind: ContestKind, freeText: string, author?: string): Promise<CaseDict>;
  adjudicateCase(caseId: string, actor?: string): Promise<CaseDict>;
  finalizeCase(
    caseId: string,
    decision: 'accept' | 'override',
    overrideLabel?: SeverityLabel,
    actor?: string,
  ): Promise<CaseDict>;
}

export class HttpApi implements Api {
  constructor(private readonly baseUrl: string = '') {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method, headers: {} };
    if (body !== undefined) {
      init.headers = { 'Content-Type': 'application/json' };
      init.body = JSON.stringify(body);
    }
    const response = await fetch(this.baseUrl + path, init);
    if (!response.ok) {
      let errorType = 'HttpError';
      let detail = `${response.status} ${response.statusText}`;
      try {
        const payload = await response.json();
        if (payload && typeof payload.error === 'string') errorType = payload.error;
        if (payload && typeof payload.detail === 'string') detail = payload.detail;
      } catch {
        // non-JSON error body; keep the status line
      }
      throw new ApiError(response.status, errorType, detail);
    }
    return (await response.json()) as T;
  }

  health(): Promise<Health> {
    return this.request('GET', '/v1/health');
  }

  listSubjects(): Promise<SubjectSummary[]> {
    return this.request('GET', '/v1/subjects');
  }

  getWindowView(subjectId: string, index: number, channels?: string[]): Promise<WindowView> {
    const query = channels && channels.length
      ? `?channels=${encodeURIComponent(channels.join(','))}`
      : '';
    return this.request('GET', `/v1/subjects/${encodeURIComponent(subjectId)}/windows/${index}${query}`);
  }

  listCases(): Promise<CaseSummary[]> {
    return this.request('GET', '/v1/cases');
  }

  getCase(caseId: string): Promise<CaseDict> {
    return this.request('GET', `/v1/cases/${encodeURIComponent(caseId)}`);
  }

  getAudit(caseId: string): Promise<AuditTrail> {
    return this.request('GET', `/v1/cases/${encodeURIComponent(caseId)}/audit`);
  }

  createCase(subjectId: string, windowIndex: number, actor = 'clinician'): Promise<CaseDict> {
    return this.request('POST', '/v1/cases', {
      subject_id: subjectId,
      window_index: windowIndex,
      actor,
    });
  }

  contestCase(caseId: string, kind: ContestKind, freeText: string, author = 'clinician'): Promise<CaseDict> {
    return this.request('POST', `/v1/cases/${encodeURIComponent(caseId)}/contest`, {
      kind,
      free_text: freeText,
      author,
    });
  }

  adjudicateCase(caseId: string, actor = 'adjudicator'): Promise<CaseDict> {
    return this.request('POST', `/v1/cases/${encodeURIComponent(caseId)}/adjudicate`, { actor });
  }

  finalizeCase(
    caseId: string,
    decision: 'accept' | 'override',
    overrideLabel?: SeverityLabel,
    actor = 'clinician',
  ): Promise<CaseDict> {
    return this.request('POST', `/v1/cases/${encodeURIComponent(caseId)}/finalize`, {
      decision,
      override_label: overrideLabel ?? null,
      actor,
    });
  }
}
