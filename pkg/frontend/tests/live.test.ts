import { describe, expect, it } from 'vitest';

import { HttpApi } from '../src/api';

// Full-lifecycle contract check against a running service. Point
// GAITCONTEST_SERVICE_URL at one (its adjudication backend must answer) and
// this walks the same endpoints the app uses; without the variable the
// whole file is skipped and the suite stays hermetic.

const serviceUrl = process.env.GAITCONTEST_SERVICE_URL;

describe.skipIf(!serviceUrl)('live service contract', () => {
  const api = new HttpApi(serviceUrl ?? '');

  it('serves health, subjects, and window views', async () => {
    const health = await api.health();
    expect(health.status).toBe('ok');
    expect(health.model_loaded).toBe(true);

    const subjects = await api.listSubjects();
    expect(subjects.length).toBeGreaterThan(0);

    const first = subjects[0];
    const view = await api.getWindowView(first.subject_id, 0, ['total_left', 'total_right']);
    expect(view.channels.total_left).toHaveLength(view.frames);
    expect(Object.keys(view.phases).sort()).toEqual(['left', 'right']);
  }, 30000);

  it('walks a case from prediction to finalization', async () => {
    const subjects = await api.listSubjects();
    const created = await api.createCase(subjects[0].subject_id, 0);
    expect(created.state).toBe('UnderReview');
    expect(created.explanations?.gradcam).toHaveLength(1000);

    const contested = await api.contestCase(
      created.case_id,
      'Reasoning Flaw',
      'The cadence is steady; the flagged segment looks like a sensor artifact.',
    );
    expect(contested.state).toBe('Contested');

    const justified = await api.adjudicateCase(created.case_id);
    expect(justified.state).toBe('Justified');
    const result = justified.dialogue[justified.dialogue.length - 1].result;
    expect(result.justification_text.length).toBeGreaterThan(0);
    expect(result.output_tokens).toBeGreaterThan(0);

    const finalized = await api.finalizeCase(created.case_id, 'accept');
    expect(finalized.state).toBe('Finalized(accepted)');
    expect(finalized.final_label).toBe(result.final_class);

    const trail = await api.getAudit(created.case_id);
    expect(trail.verified).toBe(true);
    const actions = trail.entries.map((e) => e.action);
    for (const expected of ['created', 'review_opened', 'contested', 'adjudicated', 'finalized']) {
      expect(actions).toContain(expected);
    }
  }, 60000);
});
