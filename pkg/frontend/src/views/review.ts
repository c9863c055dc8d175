import type { CaseDict } from '../types';
import { heatColor, heatLegend } from '../heat';
import { frameScale, svgEl } from '../svg';

const STRIP_W = 1000;
const STRIP_H = 26;
const SIGNAL_H = 120;

/**
 * Case review: the model's call with its confidence, both saliency strips
 * aligned under the signal on one shared color scale, the disagreement
 * regions shaded across all three, and the mandatory-review banner whenever
 * the discrepancy report raised an alert.
 */
export class ReviewView {
  readonly el: HTMLElement;

  constructor(private readonly doc: Document = document) {
    this.el = doc.createElement('section');
    this.el.className = 'case-review';
  }

  render(kase: CaseDict, signal?: number[] | null): void {
    const doc = this.doc;
    this.el.replaceChildren();

    const head = doc.createElement('header');
    head.className = 'review-head';
    const title = doc.createElement('h2');
    title.textContent = `Case ${kase.case_id}`;
    head.appendChild(title);
    const stateChip = doc.createElement('span');
    stateChip.className = 'state-chip';
    stateChip.dataset.state = kase.state;
    stateChip.textContent = kase.state;
    head.appendChild(stateChip);
    this.el.appendChild(head);

    if (kase.discrepancy.alert) {
      const banner = doc.createElement('div');
      banner.className = 'alert-banner';
      banner.setAttribute('role', 'alert');
      banner.textContent =
        `Explanation methods disagree on ${kase.discrepancy.discrepancy_percentage.toFixed(1)}% ` +
        'of this window. Mandatory clinical review.';
      this.el.appendChild(banner);
    }

    const prediction = doc.createElement('p');
    prediction.className = 'prediction-line';
    prediction.textContent =
      `Model assessment: ${kase.prediction.predicted_class} ` +
      `(confidence ${(kase.prediction.confidence * 100).toFixed(1)}%)`;
    this.el.appendChild(prediction);

    this.el.appendChild(this.renderProbabilities(kase));

    if (signal && signal.length) {
      this.el.appendChild(this.renderSignal(signal, kase));
    }

    if (kase.explanations) {
      this.el.appendChild(this.renderStrip('Grad-CAM', 'gradcam', kase.explanations.gradcam, kase));
      this.el.appendChild(this.renderStrip('LRP', 'lrp', kase.explanations.lrp, kase));
      this.el.appendChild(heatLegend(doc));
    } else {
      const note = doc.createElement('p');
      note.className = 'missing-note';
      note.textContent = 'No saliency maps were stored for this case.';
      this.el.appendChild(note);
    }

    const m = kase.gait_metrics;
    if (m) {
      const metrics = doc.createElement('p');
      metrics.className = 'metrics-line';
      metrics.textContent =
        `Gait metrics: mean stride ${m.mean_stride_time_s.toFixed(2)} s, ` +
        `stance ${m.stance_percentage.toFixed(1)}%, swing ${m.swing_percentage.toFixed(1)}%, ` +
        `${m.n_strides} strides`;
      this.el.appendChild(metrics);
    }

    if (kase.final_label) {
      const final = doc.createElement('p');
      final.className = 'final-line';
      final.textContent = `Final label on record: ${kase.final_label}`;
      this.el.appendChild(final);
    }
  }

  private renderProbabilities(kase: CaseDict): HTMLElement {
    const doc = this.doc;
    const bars = doc.createElement('div');
    bars.className = 'probability-bars';
    kase.prediction.probabilities.forEach((p, i) => {
      const row = doc.createElement('div');
      row.className = 'probability-row';
      const label = doc.createElement('span');
      label.className = 'probability-label';
      label.textContent = ['Healthy', 'Stage 2', 'Stage 2.5', 'Stage 3'][i] ?? `class ${i}`;
      const track = doc.createElement('span');
      track.className = 'probability-track';
      const fill = doc.createElement('span');
      fill.className = 'probability-fill';
      fill.style.width = `${(p * 100).toFixed(1)}%`;
      track.appendChild(fill);
      const value = doc.createElement('span');
      value.className = 'probability-value';
      value.textContent = `${(p * 100).toFixed(1)}%`;
      row.appendChild(label);
      row.appendChild(track);
      row.appendChild(value);
      bars.appendChild(row);
    });
    return bars;
  }

  private renderSignal(signal: number[], kase: CaseDict): SVGSVGElement {
    const doc = this.doc;
    const svg = svgEl(doc, 'svg', {
      class: 'review-signal',
      viewBox: `0 0 ${STRIP_W} ${SIGNAL_H}`,
      preserveAspectRatio: 'none',
    });
    const n = signal.length;
    const x = frameScale(0, n - 1, STRIP_W);
    let yMax = 1;
    for (const v of signal) if (v > yMax) yMax = v;
    const parts: string[] = [];
    for (let i = 0; i < n; i++) {
      const y = SIGNAL_H - (signal[i] / yMax) * (SIGNAL_H - 8) - 4;
      parts.push(`${x(i).toFixed(2)},${y.toFixed(2)}`);
    }
    svg.appendChild(
      svgEl(doc, 'polyline', {
        class: 'series',
        points: parts.join(' '),
        fill: 'none',
        stroke: '#2563ad',
        'stroke-width': 1.2,
      }),
    );
    this.appendRegions(svg, kase, SIGNAL_H);
    return svg;
  }

  private renderStrip(label: string, method: string, values: number[], kase: CaseDict): HTMLElement {
    const doc = this.doc;
    const row = doc.createElement('div');
    row.className = 'strip-row';
    const caption = doc.createElement('span');
    caption.className = 'strip-label';
    caption.textContent = label;
    row.appendChild(caption);

    const svg = svgEl(doc, 'svg', {
      class: 'heat-strip',
      viewBox: `0 0 ${STRIP_W} ${STRIP_H}`,
      preserveAspectRatio: 'none',
    });
    svg.dataset.method = method;
    const n = values.length;
    const cellW = STRIP_W / n;
    for (let i = 0; i < n; i++) {
      const cell = svgEl(doc, 'rect', {
        class: 'heat-cell',
        x: (i * cellW).toFixed(3),
        y: 0,
        width: cellW.toFixed(3),
        height: STRIP_H,
        fill: heatColor(values[i]),
      });
      cell.dataset.frame = String(i);
      svg.appendChild(cell);
    }
    this.appendRegions(svg, kase, STRIP_H);
    row.appendChild(svg);
    return row;
  }

  /** Shade each disagreement region across the full strip height, ends inclusive. */
  private appendRegions(svg: SVGSVGElement, kase: CaseDict, height: number): void {
    const doc = this.doc;
    for (const region of kase.discrepancy.regions) {
      const [start, end] = region;
      const rect = svgEl(doc, 'rect', {
        class: 'xmed-region',
        x: start,
        y: 0,
        width: end - start + 1,
        height,
        fill: 'rgba(204,48,32,0.22)',
        stroke: 'rgba(204,48,32,0.75)',
        'stroke-width': 0.5,
      });
      rect.dataset.start = String(start);
      rect.dataset.end = String(end);
      svg.appendChild(rect);
    }
  }
}
