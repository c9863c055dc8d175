import type { Api } from '../api';
import type { WindowView } from '../types';
import { frameScale, svgEl } from '../svg';

const PLOT_W = 1000;
const PLOT_H = 240;
const LANE_H = 14;
const LANE_GAP = 6;

const SERIES_COLORS = [
  '#2563ad',
  '#c2410c',
  '#15803d',
  '#7c3aed',
  '#be185d',
  '#0e7490',
  '#a16207',
  '#4338ca',
];

const PHASE_COLORS: Record<string, string> = {
  stance: '#b7dfc0',
  swing: '#f6d8a0',
};

export const DEFAULT_CHANNELS = ['total_left', 'total_right', 'L4', 'R4'];

/**
 * Ten-second window explorer: multi-channel force traces with per-channel
 * visibility toggles, stride boundary markers, stance/swing lanes, and a
 * drag-to-zoom time segment. One fetch per window; every later interaction
 * (toggle, zoom, reset) re-renders from the cached payload.
 */
export class ExplorerView {
  readonly el: HTMLElement;
  private view: WindowView | null = null;
  private hidden = new Set<string>();
  private domain: [number, number] | null = null;
  private dragStart: number | null = null;

  constructor(private readonly api: Api, private readonly doc: Document = document) {
    this.el = doc.createElement('section');
    this.el.className = 'explorer';
  }

  async load(subjectId: string, index: number, channels: string[] = DEFAULT_CHANNELS): Promise<void> {
    this.view = await this.api.getWindowView(subjectId, index, channels);
    this.hidden.clear();
    this.domain = null;
    this.render();
  }

  channelNames(): string[] {
    return this.view ? Object.keys(this.view.channels) : [];
  }

  toggleChannel(name: string): void {
    if (this.hidden.has(name)) this.hidden.delete(name);
    else this.hidden.add(name);
    this.render();
  }

  /** Zoom to a window-relative frame segment; data stays as fetched. */
  zoomTo(startFrame: number, endFrame: number): void {
    if (!this.view) return;
    const last = this.view.frames - 1;
    const lo = Math.max(0, Math.min(startFrame, endFrame));
    const hi = Math.min(last, Math.max(startFrame, endFrame));
    if (hi - lo < 2) return;
    this.domain = [Math.floor(lo), Math.ceil(hi)];
    this.render();
  }

  resetZoom(): void {
    this.domain = null;
    this.render();
  }

  currentDomain(): [number, number] {
    if (this.domain) return this.domain;
    return [0, this.view ? this.view.frames - 1 : 0];
  }

  private render(): void {
    const view = this.view;
    this.el.replaceChildren();
    if (!view) return;
    const doc = this.doc;

    const head = doc.createElement('header');
    head.className = 'explorer-head';
    const title = doc.createElement('h2');
    title.textContent = `${view.subject_id} / window ${view.window_index}`;
    head.appendChild(title);
    const sub = doc.createElement('p');
    sub.className = 'explorer-sub';
    const seconds = view.frames / view.sample_rate_hz;
    sub.textContent =
      `frames ${view.start_frame} to ${view.start_frame + view.frames - 1}` +
      ` (${seconds.toFixed(0)} s at ${view.sample_rate_hz} Hz)` +
      (view.label ? `, recorded label ${view.label}` : '');
    head.appendChild(sub);
    this.el.appendChild(head);

    this.el.appendChild(this.renderToggles());
    this.el.appendChild(this.renderPlot());
    this.el.appendChild(this.renderLegend());
    if (view.metrics) this.el.appendChild(this.renderMetrics());
  }

  private renderToggles(): HTMLElement {
    const doc = this.doc;
    const bar = doc.createElement('div');
    bar.className = 'channel-toggles';
    for (const name of this.channelNames()) {
      const label = doc.createElement('label');
      label.className = 'channel-toggle-label';
      const box = doc.createElement('input');
      box.type = 'checkbox';
      box.className = 'channel-toggle';
      box.dataset.channel = name;
      box.checked = !this.hidden.has(name);
      box.addEventListener('change', () => this.toggleChannel(name));
      label.appendChild(box);
      label.appendChild(doc.createTextNode(` ${name}`));
      bar.appendChild(label);
    }
    const reset = doc.createElement('button');
    reset.type = 'button';
    reset.className = 'zoom-reset';
    reset.textContent = 'Reset zoom';
    reset.addEventListener('click', () => this.resetZoom());
    bar.appendChild(reset);
    return bar;
  }

  private renderPlot(): SVGSVGElement {
    const doc = this.doc;
    const view = this.view as WindowView;
    const [lo, hi] = this.currentDomain();
    const laneCount = Object.keys(view.phases).length;
    const totalH = PLOT_H + LANE_GAP + laneCount * (LANE_H + 4);
    const svg = svgEl(doc, 'svg', {
      class: 'signal-plot',
      viewBox: `0 0 ${PLOT_W} ${totalH}`,
      preserveAspectRatio: 'none',
    });
    svg.dataset.domain = `${lo}:${hi}`;

    const cellW = PLOT_W / (hi - lo + 1);
    const x = frameScale(lo, hi, PLOT_W);

    const visible = this.channelNames().filter((n) => !this.hidden.has(n));
    let yMax = 1;
    for (const name of visible) {
      for (let i = lo; i <= hi; i++) {
        const v = view.channels[name][i];
        if (v > yMax) yMax = v;
      }
    }

    const frame = svgEl(doc, 'rect', {
      class: 'plot-frame',
      x: 0,
      y: 0,
      width: PLOT_W,
      height: PLOT_H,
      fill: '#fcfcf8',
      stroke: '#c9c9bd',
    });
    svg.appendChild(frame);

    // Stance/swing lanes below the traces, one per foot, inclusive intervals.
    let laneY = PLOT_H + LANE_GAP;
    for (const [foot, intervals] of Object.entries(view.phases)) {
      for (const interval of intervals) {
        const a = Math.max(interval.start, lo);
        const b = Math.min(interval.end, hi);
        if (a > b) continue;
        const band = svgEl(doc, 'rect', {
          class: `phase-band phase-${interval.phase}`,
          x: ((a - lo) * cellW).toFixed(2),
          y: laneY,
          width: ((b - a + 1) * cellW).toFixed(2),
          height: LANE_H,
          fill: PHASE_COLORS[interval.phase],
        });
        band.dataset.foot = foot;
        band.dataset.phase = interval.phase;
        band.dataset.start = String(interval.start);
        band.dataset.end = String(interval.end);
        svg.appendChild(band);
      }
      const laneLabel = svgEl(doc, 'text', {
        class: 'lane-label',
        x: 4,
        y: laneY + LANE_H - 3,
        'font-size': 10,
        fill: '#555',
      });
      laneLabel.textContent = foot;
      svg.appendChild(laneLabel);
      laneY += LANE_H + 4;
    }

    // Stride boundaries: one marker per heel strike inside the domain.
    for (const [foot, strikes] of Object.entries(view.heel_strikes)) {
      for (const strike of strikes) {
        if (strike < lo || strike > hi) continue;
        const line = svgEl(doc, 'line', {
          class: 'stride-marker',
          x1: x(strike).toFixed(2),
          x2: x(strike).toFixed(2),
          y1: 0,
          y2: PLOT_H,
          stroke: foot === 'left' ? '#7c3aed' : '#be185d',
          'stroke-dasharray': '4 3',
        });
        line.dataset.foot = foot;
        line.dataset.frame = String(strike);
        svg.appendChild(line);
      }
    }

    for (const name of visible) {
      const color = SERIES_COLORS[this.channelNames().indexOf(name) % SERIES_COLORS.length];
      const series = view.channels[name];
      const parts: string[] = [];
      for (let i = lo; i <= hi; i++) {
        const yv = PLOT_H - (Math.min(series[i], yMax) / yMax) * (PLOT_H - 8) - 4;
        parts.push(`${x(i).toFixed(2)},${yv.toFixed(2)}`);
      }
      const poly = svgEl(doc, 'polyline', {
        class: 'series',
        points: parts.join(' '),
        fill: 'none',
        stroke: color,
        'stroke-width': 1.4,
      });
      poly.dataset.channel = name;
      svg.appendChild(poly);
    }

    this.attachDragZoom(svg, lo, hi);
    return svg;
  }

  private attachDragZoom(svg: SVGSVGElement, lo: number, hi: number): void {
    const frameAt = (event: MouseEvent): number | null => {
      const rect = svg.getBoundingClientRect();
      if (rect.width <= 0) return null;
      const f = lo + ((event.clientX - rect.left) / rect.width) * (hi - lo);
      return Math.round(f);
    };
    svg.addEventListener('mousedown', (event) => {
      this.dragStart = frameAt(event as MouseEvent);
    });
    svg.addEventListener('mouseup', (event) => {
      const end = frameAt(event as MouseEvent);
      if (this.dragStart !== null && end !== null && Math.abs(end - this.dragStart) >= 5) {
        this.zoomTo(this.dragStart, end);
      }
      this.dragStart = null;
    });
  }

  private renderLegend(): HTMLElement {
    const doc = this.doc;
    const legend = doc.createElement('div');
    legend.className = 'marker-legend';
    const items: [string, string][] = [
      ['Stride boundary', '#7c3aed'],
      ['Stance', PHASE_COLORS.stance],
      ['Swing', PHASE_COLORS.swing],
    ];
    for (const [text, color] of items) {
      const chip = doc.createElement('span');
      chip.className = 'legend-chip';
      chip.style.backgroundColor = color;
      const label = doc.createElement('span');
      label.className = 'legend-text';
      label.textContent = text;
      legend.appendChild(chip);
      legend.appendChild(label);
    }
    return legend;
  }

  private renderMetrics(): HTMLElement {
    const doc = this.doc;
    const view = this.view as WindowView;
    const m = view.metrics;
    const p = doc.createElement('p');
    p.className = 'window-metrics';
    if (m) {
      p.textContent =
        `mean stride ${m.mean_stride_time_s.toFixed(2)} s, ` +
        `stance ${m.stance_percentage.toFixed(1)}%, ` +
        `swing ${m.swing_percentage.toFixed(1)}%, ` +
        `${m.n_strides} strides`;
    }
    return p;
  }
}
