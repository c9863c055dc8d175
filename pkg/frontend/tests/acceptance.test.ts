import { describe, expect, it } from 'vitest';

import { MockApi } from '../src/mock';
import { AuditView } from '../src/views/audit';
import { ContestPanel } from '../src/views/contest';
import { ReviewView } from '../src/views/review';

// Release gate for the review console: each test pins one shipping
// requirement, driven end to end against the fixture service.

async function settle() {
  for (let i = 0; i < 6; i++) await new Promise((resolve) => setTimeout(resolve, 0));
}

describe('review console release gate', () => {
  it('shows the mandatory-review banner exactly when the report alerts', async () => {
    for (const alertCase of [true, false]) {
      const api = new MockApi({ alertCase });
      const kase = await api.createCase('S07', 0);
      expect(kase.discrepancy.alert).toBe(alertCase);

      const view = new ReviewView();
      view.render(kase);
      const banner = view.el.querySelector('.alert-banner');
      if (alertCase) expect(banner).not.toBeNull();
      else expect(banner).toBeNull();
    }
  });

  it('disables dissent submission while the free text is empty', async () => {
    const api = new MockApi();
    const kase = await api.createCase('S07', 0);
    const panel = new ContestPanel(api);
    panel.render(await api.getCase(kase.case_id));

    const textarea = panel.el.querySelector<HTMLTextAreaElement>('textarea.dissent-text')!;
    const submit = panel.el.querySelector<HTMLButtonElement>('button.submit-contest')!;

    expect(submit.disabled).toBe(true);
    for (const [value, disabled] of [
      ['model misses the festination', false],
      ['', true],
      ['   \n  ', true],
      ['x', false],
    ] as const) {
      textarea.value = value;
      textarea.dispatchEvent(new Event('input'));
      expect(submit.disabled).toBe(disabled);
    }
  });

  it('renders finalized cases read-only on both closing paths', async () => {
    for (const path of ['accept', 'override'] as const) {
      const api = new MockApi();
      const created = await api.createCase('S07', 0);
      await api.contestCase(created.case_id, 'Reasoning Flaw', 'regular cadence, no freezing');
      await api.adjudicateCase(created.case_id);
      if (path === 'accept') await api.finalizeCase(created.case_id, 'accept');
      else await api.finalizeCase(created.case_id, 'override', 'Healthy');

      // Rebuild purely from GETs, as a fresh browser session would.
      const kase = await api.getCase(created.case_id);
      const review = new ReviewView();
      review.render(kase);
      const panel = new ContestPanel(api);
      panel.render(kase);

      for (const section of [review.el, panel.el]) {
        expect(section.querySelector('form')).toBeNull();
        expect(section.querySelector('textarea')).toBeNull();
        expect(section.querySelector('button')).toBeNull();
        expect(section.querySelector('select')).toBeNull();
        expect(section.querySelector('input')).toBeNull();
      }
      expect(panel.el.querySelector('.finalized-note')).not.toBeNull();
      expect(review.el.querySelector('.final-line')!.textContent).toContain(
        kase.final_label as string,
      );

      const mutationsBefore = api.calls.filter((c) => c.method === 'POST').length;
      await settle();
      expect(api.calls.filter((c) => c.method === 'POST').length).toBe(mutationsBefore);
    }
  });

  it('mirrors the chain verification verdict in the audit badge', async () => {
    const api = new MockApi();
    const kase = await api.createCase('S01', 0);
    const view = new AuditView();

    const intact = await api.getAudit(kase.case_id);
    expect(intact.verified).toBe(true);
    view.render(intact);
    expect(view.el.querySelector('.audit-badge.valid')).not.toBeNull();
    expect(view.el.querySelector('.audit-badge.tampered')).toBeNull();

    api.tamperAudit(kase.case_id);
    const broken = await api.getAudit(kase.case_id);
    expect(broken.verified).toBe(false);
    view.render(broken);
    expect(view.el.querySelector('.audit-badge.tampered')).not.toBeNull();
    expect(view.el.querySelector('.audit-badge.valid')).toBeNull();
  });
});
