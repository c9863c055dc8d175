import type { Api } from '../api';
import { isConflict } from '../api';
import type { CaseDict, ContestKind, SeverityLabel } from '../types';
import { CONTEST_KINDS, SEVERITY_LABELS, isFinalized } from '../types';

/**
 * Structured dissent and sign-off. While a case is open this renders the
 * typed contest form, the adjudication history with overturn badges, and the
 * finalize controls; once a case is finalized it renders the same history
 * read-only, with no mutating controls at all.
 *
 * All writes go through the four POST endpoints; after each one the panel
 * asks its owner to refresh from GETs, so what is on screen never depends on
 * transient client state. A 409 from a competing writer triggers the same
 * refresh instead of an error.
 */
export class ContestPanel {
  readonly el: HTMLElement;
  onMutated?: () => Promise<void> | void;
  private busy = false;

  constructor(private readonly api: Api, private readonly doc: Document = document) {
    this.el = doc.createElement('section');
    this.el.className = 'contest-panel';
  }

  render(kase: CaseDict): void {
    const doc = this.doc;
    this.el.replaceChildren();

    if (kase.contestations.length) {
      this.el.appendChild(this.renderContestations(kase));
    }
    if (kase.dialogue.length) {
      this.el.appendChild(this.renderDialogue(kase));
    }

    if (isFinalized(kase.state)) {
      const note = doc.createElement('p');
      note.className = 'finalized-note';
      const how = kase.state === 'Finalized(overridden)' ? 'overridden by clinician' : 'accepted';
      note.textContent = `This case is closed (${how}). Final label: ${kase.final_label ?? 'n/a'}.`;
      this.el.appendChild(note);
      return;
    }

    if (kase.state === 'UnderReview' || kase.state === 'Justified') {
      this.el.appendChild(this.renderContestForm(kase));
    }
    if (kase.state === 'Contested') {
      this.el.appendChild(this.renderAdjudicateButton(kase));
    }
    if (kase.state === 'Justified') {
      this.el.appendChild(this.renderFinalizeControls(kase));
    }
  }

  private async mutate(action: () => Promise<unknown>): Promise<void> {
    if (this.busy) return;
    this.busy = true;
    try {
      await action();
    } catch (err) {
      if (!isConflict(err)) {
        this.showError(err);
        return;
      }
      // Another writer got there first; the refresh below shows their result.
    } finally {
      this.busy = false;
    }
    await this.onMutated?.();
  }

  private showError(err: unknown): void {
    this.busy = false;
    const note = this.doc.createElement('p');
    note.className = 'error-note';
    note.textContent = err instanceof Error ? err.message : String(err);
    this.el.appendChild(note);
  }

  private renderContestations(kase: CaseDict): HTMLElement {
    const doc = this.doc;
    const wrap = doc.createElement('div');
    wrap.className = 'contestation-history';
    const heading = doc.createElement('h3');
    heading.textContent = 'Dissent on record';
    wrap.appendChild(heading);
    for (const c of kase.contestations) {
      const entry = doc.createElement('div');
      entry.className = 'contestation-entry';
      const kind = doc.createElement('span');
      kind.className = 'contestation-kind';
      kind.textContent = c.kind;
      const text = doc.createElement('p');
      text.className = 'contestation-text';
      text.textContent = `"${c.free_text}" (${c.author})`;
      entry.appendChild(kind);
      entry.appendChild(text);
      wrap.appendChild(entry);
    }
    return wrap;
  }

  private renderDialogue(kase: CaseDict): HTMLElement {
    const doc = this.doc;
    const wrap = doc.createElement('div');
    wrap.className = 'adjudication-history';
    const heading = doc.createElement('h3');
    heading.textContent = 'Adjudication';
    wrap.appendChild(heading);
    kase.dialogue.forEach((turn, i) => {
      const result = turn.result;
      const entry = doc.createElement('div');
      entry.className = 'adjudication-turn';
      entry.dataset.turn = String(i);

      const badge = doc.createElement('span');
      badge.className = `decision-badge ${result.overturned ? 'overturned' : 'retained'}`;
      badge.textContent = result.overturned ? 'overturned' : 'retained';
      entry.appendChild(badge);

      const decision = doc.createElement('p');
      decision.className = 'decision-line';
      decision.textContent = `Final decision: ${result.final_class}`;
      entry.appendChild(decision);

      const justification = doc.createElement('p');
      justification.className = 'justification';
      justification.textContent = result.justification_text;
      entry.appendChild(justification);

      const stats = doc.createElement('p');
      stats.className = 'turn-stats';
      stats.dataset.rt = String(result.response_time_s);
      stats.dataset.ot = String(result.output_tokens);
      const tok = result.tokens_approximate ? `~${result.output_tokens}` : String(result.output_tokens);
      stats.textContent = `RT ${result.response_time_s.toFixed(1)} s, OT ${tok} tok`;
      entry.appendChild(stats);

      wrap.appendChild(entry);
    });
    return wrap;
  }

  private renderContestForm(kase: CaseDict): HTMLElement {
    const doc = this.doc;
    const form = doc.createElement('form');
    form.className = 'contest-form';

    const heading = doc.createElement('h3');
    heading.textContent = kase.dialogue.length ? 'Contest the adjudicated decision' : 'Contest this assessment';
    form.appendChild(heading);

    const kinds = doc.createElement('fieldset');
    kinds.className = 'kind-choices';
    CONTEST_KINDS.forEach((kind, i) => {
      const label = doc.createElement('label');
      label.className = 'kind-choice';
      const radio = doc.createElement('input');
      radio.type = 'radio';
      radio.name = 'contest-kind';
      radio.className = 'kind-radio';
      radio.value = kind;
      radio.checked = i === 0;
      label.appendChild(radio);
      label.appendChild(doc.createTextNode(` ${kind}`));
      kinds.appendChild(label);
    });
    form.appendChild(kinds);

    const text = doc.createElement('textarea');
    text.className = 'dissent-text';
    text.rows = 3;
    text.placeholder = 'Describe the disagreement in clinical terms';
    form.appendChild(text);

    const submit = doc.createElement('button');
    submit.type = 'submit';
    submit.className = 'submit-contest';
    submit.textContent = 'Submit dissent';
    submit.disabled = true;
    form.appendChild(submit);

    text.addEventListener('input', () => {
      submit.disabled = text.value.trim().length === 0;
    });

    form.addEventListener('submit', (event) => {
      event.preventDefault();
      const freeText = text.value.trim();
      if (!freeText) return;
      const picked = form.querySelector<HTMLInputElement>('input[name="contest-kind"]:checked');
      const kind = (picked ? picked.value : CONTEST_KINDS[0]) as ContestKind;
      submit.disabled = true;
      void this.mutate(async () => {
        await this.api.contestCase(kase.case_id, kind, freeText);
        await this.api.adjudicateCase(kase.case_id);
      });
    });

    return form;
  }

  private renderAdjudicateButton(kase: CaseDict): HTMLElement {
    const doc = this.doc;
    const wrap = doc.createElement('div');
    wrap.className = 'adjudicate-retry';
    const note = doc.createElement('p');
    note.textContent = 'Dissent recorded; the case is waiting for adjudication.';
    wrap.appendChild(note);
    const button = doc.createElement('button');
    button.type = 'button';
    button.className = 'adjudicate-btn';
    button.textContent = 'Request adjudication';
    button.addEventListener('click', () => {
      void this.mutate(() => this.api.adjudicateCase(kase.case_id));
    });
    wrap.appendChild(button);
    return wrap;
  }

  private renderFinalizeControls(kase: CaseDict): HTMLElement {
    const doc = this.doc;
    const wrap = doc.createElement('div');
    wrap.className = 'finalize-controls';
    const heading = doc.createElement('h3');
    heading.textContent = 'Close the case';
    wrap.appendChild(heading);

    const last = kase.dialogue[kase.dialogue.length - 1];
    const accept = doc.createElement('button');
    accept.type = 'button';
    accept.className = 'accept-btn';
    accept.textContent = last
      ? `Accept adjudicated label (${last.result.final_class})`
      : 'Accept adjudicated label';
    accept.addEventListener('click', () => {
      void this.mutate(() => this.api.finalizeCase(kase.case_id, 'accept'));
    });
    wrap.appendChild(accept);

    const overrideRow = doc.createElement('div');
    overrideRow.className = 'override-row';
    const select = doc.createElement('select');
    select.className = 'override-label';
    for (const label of SEVERITY_LABELS) {
      const option = doc.createElement('option');
      option.value = label;
      option.textContent = label;
      select.appendChild(option);
    }
    overrideRow.appendChild(select);
    const override = doc.createElement('button');
    override.type = 'button';
    override.className = 'override-btn';
    override.textContent = 'Override with selected label';
    override.addEventListener('click', () => {
      const label = select.value as SeverityLabel;
      void this.mutate(() => this.api.finalizeCase(kase.case_id, 'override', label));
    });
    overrideRow.appendChild(override);
    wrap.appendChild(overrideRow);

    return wrap;
  }
}
