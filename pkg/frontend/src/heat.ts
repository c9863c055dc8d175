// Single color scale shared by every saliency strip so equal attribution
// values always read as the same color, whichever method produced them.

const STOPS: [number, [number, number, number]][] = [
  [0.0, [22, 30, 80]],
  [0.25, [29, 92, 152]],
  [0.5, [38, 160, 120]],
  [0.75, [222, 184, 48]],
  [1.0, [204, 48, 32]],
];

export function heatColor(value: number): string {
  const v = Math.min(1, Math.max(0, value));
  for (let i = 1; i < STOPS.length; i++) {
    const [t1, c1] = STOPS[i];
    const [t0, c0] = STOPS[i - 1];
    if (v <= t1) {
      const f = (v - t0) / (t1 - t0);
      const mix = c0.map((a, k) => Math.round(a + f * (c1[k] - a)));
      return `rgb(${mix[0]},${mix[1]},${mix[2]})`;
    }
  }
  const last = STOPS[STOPS.length - 1][1];
  return `rgb(${last[0]},${last[1]},${last[2]})`;
}

/** Legend strip for the scale above; one per page is enough. */
export function heatLegend(doc: Document): HTMLElement {
  const legend = doc.createElement('div');
  legend.className = 'scale-legend';
  for (let i = 0; i < 24; i++) {
    const cell = doc.createElement('span');
    cell.className = 'scale-cell';
    cell.style.backgroundColor = heatColor(i / 23);
    legend.appendChild(cell);
  }
  const lo = doc.createElement('span');
  lo.className = 'scale-label';
  lo.textContent = '0';
  const hi = doc.createElement('span');
  hi.className = 'scale-label';
  hi.textContent = '1';
  legend.prepend(lo);
  legend.appendChild(hi);
  return legend;
}
