import type { Api } from './api';
import { ExplorerView } from './views/explorer';
import { ReviewView } from './views/review';
import { ContestPanel } from './views/contest';
import { AuditView } from './views/audit';

/**
 * Hash-routed single page shell over the /v1 API. Every page is rendered
 * from GET responses, so reloading any URL reproduces the same view; the
 * only writes are the four case mutations issued by the contest panel.
 */
export class App {
  constructor(
    private readonly api: Api,
    private readonly root: HTMLElement,
    private readonly doc: Document = document,
  ) {}

  start(): void {
    window.addEventListener('hashchange', () => void this.route());
    void this.route();
  }

  async route(): Promise<void> {
    const hash = location.hash.replace(/^#\/?/, '');
    const parts = hash.split('/').filter(Boolean);
    try {
      if (parts.length === 0) await this.showHome();
      else if (parts[0] === 'cases' && parts.length === 1) await this.showCases();
      else if (parts[0] === 'cases') await this.showCase(decodeURIComponent(parts[1]));
      else if (parts[0] === 'subjects' && parts[2] === 'windows') {
        await this.showExplorer(decodeURIComponent(parts[1]), Number(parts[3]));
      } else await this.showHome();
    } catch (err) {
      this.showError(err);
    }
  }

  private page(title: string): HTMLElement {
    const doc = this.doc;
    this.root.replaceChildren();
    const nav = doc.createElement('nav');
    nav.className = 'top-nav';
    const home = doc.createElement('a');
    home.href = '#/';
    home.textContent = 'Subjects';
    const cases = doc.createElement('a');
    cases.href = '#/cases';
    cases.textContent = 'Cases';
    nav.appendChild(home);
    nav.appendChild(cases);
    this.root.appendChild(nav);
    const h1 = doc.createElement('h1');
    h1.textContent = title;
    this.root.appendChild(h1);
    const body = doc.createElement('main');
    body.className = 'page-body';
    this.root.appendChild(body);
    return body;
  }

  private showError(err: unknown): void {
    const body = this.page('Something went wrong');
    const note = this.doc.createElement('p');
    note.className = 'error-note';
    note.textContent = err instanceof Error ? err.message : String(err);
    body.appendChild(note);
  }

  private async showHome(): Promise<void> {
    const subjects = await this.api.listSubjects();
    const body = this.page('Subjects');
    const doc = this.doc;
    const table = doc.createElement('table');
    table.className = 'subject-table';
    const head = doc.createElement('tr');
    for (const column of ['subject', 'label', 'duration', 'windows']) {
      const th = doc.createElement('th');
      th.textContent = column;
      head.appendChild(th);
    }
    table.appendChild(head);
    for (const s of subjects) {
      const row = doc.createElement('tr');
      const id = doc.createElement('td');
      id.textContent = s.subject_id;
      const label = doc.createElement('td');
      label.textContent = s.label ?? 'unlabeled';
      const duration = doc.createElement('td');
      duration.textContent = `${s.duration_s.toFixed(0)} s`;
      const windows = doc.createElement('td');
      for (let i = 0; i < s.window_count; i++) {
        const link = doc.createElement('a');
        link.className = 'window-link';
        link.href = `#/subjects/${encodeURIComponent(s.subject_id)}/windows/${i}`;
        link.textContent = `${i}`;
        windows.appendChild(link);
        windows.appendChild(doc.createTextNode(' '));
      }
      row.appendChild(id);
      row.appendChild(label);
      row.appendChild(duration);
      row.appendChild(windows);
      table.appendChild(row);
    }
    body.appendChild(table);
  }

  private async showCases(): Promise<void> {
    const cases = await this.api.listCases();
    const body = this.page('Cases');
    const doc = this.doc;
    if (!cases.length) {
      const empty = doc.createElement('p');
      empty.textContent = 'No cases yet. Open a window and start one.';
      body.appendChild(empty);
      return;
    }
    const list = doc.createElement('ul');
    list.className = 'case-list';
    for (const c of cases) {
      const item = doc.createElement('li');
      const link = doc.createElement('a');
      link.href = `#/cases/${encodeURIComponent(c.case_id)}`;
      link.textContent = `${c.case_id}: ${c.predicted_class}, ${c.state}`;
      item.appendChild(link);
      if (c.alert) {
        const chip = doc.createElement('span');
        chip.className = 'alert-chip';
        chip.textContent = 'review required';
        item.appendChild(chip);
      }
      list.appendChild(item);
    }
    body.appendChild(list);
  }

  private async showExplorer(subjectId: string, index: number): Promise<void> {
    const body = this.page('Window explorer');
    const explorer = new ExplorerView(this.api, this.doc);
    await explorer.load(subjectId, index);
    body.appendChild(explorer.el);

    const open = this.doc.createElement('button');
    open.type = 'button';
    open.className = 'open-case-btn';
    open.textContent = 'Open a review case for this window';
    open.addEventListener('click', () => {
      open.disabled = true;
      this.api
        .createCase(subjectId, index)
        .then((kase) => {
          location.hash = `#/cases/${encodeURIComponent(kase.case_id)}`;
        })
        .catch((err) => {
          open.disabled = false;
          this.showError(err);
        });
    });
    body.appendChild(open);
  }

  async showCase(caseId: string): Promise<void> {
    const body = this.page('Case review');
    const review = new ReviewView(this.doc);
    const contest = new ContestPanel(this.api, this.doc);
    const audit = new AuditView(this.doc);
    body.appendChild(review.el);
    body.appendChild(contest.el);
    body.appendChild(audit.el);

    const refresh = async () => {
      const [kase, trail] = await Promise.all([
        this.api.getCase(caseId),
        this.api.getAudit(caseId),
      ]);
      let signal: number[] | null = null;
      const ref = kase.window_ref;
      if (ref.subject_id !== undefined && ref.window_index !== undefined) {
        try {
          const view = await this.api.getWindowView(ref.subject_id, ref.window_index, ['total_left']);
          signal = view.channels['total_left'] ?? null;
        } catch {
          signal = null;
        }
      }
      review.render(kase, signal);
      contest.render(kase);
      audit.render(trail);
    };
    contest.onMutated = refresh;
    await refresh();
  }
}
