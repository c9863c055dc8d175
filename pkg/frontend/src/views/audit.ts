import type { AuditTrail } from '../types';

/**
 * Chronological audit trail for one case with a chain-verification badge.
 * The verdict comes from the service's own hash-chain check; the view only
 * reports it.
 */
export class AuditView {
  readonly el: HTMLElement;

  constructor(private readonly doc: Document = document) {
    this.el = doc.createElement('section');
    this.el.className = 'audit-view';
  }

  render(trail: AuditTrail): void {
    const doc = this.doc;
    this.el.replaceChildren();

    const head = doc.createElement('header');
    head.className = 'audit-head';
    const title = doc.createElement('h3');
    title.textContent = 'Audit trail';
    head.appendChild(title);

    const badge = doc.createElement('span');
    badge.className = `audit-badge ${trail.verified ? 'valid' : 'tampered'}`;
    badge.style.backgroundColor = trail.verified ? '#1e7a34' : '#b91c1c';
    badge.textContent = trail.verified ? 'chain verified' : 'chain broken';
    head.appendChild(badge);
    this.el.appendChild(head);

    const table = doc.createElement('table');
    table.className = 'audit-table';
    const headRow = doc.createElement('tr');
    for (const column of ['seq', 'timestamp', 'actor', 'action']) {
      const th = doc.createElement('th');
      th.textContent = column;
      headRow.appendChild(th);
    }
    table.appendChild(headRow);

    const ordered = [...trail.entries].sort((a, b) => a.seq - b.seq);
    for (const entry of ordered) {
      const row = doc.createElement('tr');
      row.className = 'audit-row';
      row.dataset.seq = String(entry.seq);
      for (const value of [String(entry.seq), entry.timestamp, entry.actor, entry.action]) {
        const td = doc.createElement('td');
        td.textContent = value;
        row.appendChild(td);
      }
      table.appendChild(row);
    }
    this.el.appendChild(table);
  }
}
