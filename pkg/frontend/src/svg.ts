// Small helpers for building SVG plots without a charting dependency.

export const SVG_NS = 'http://www.w3.org/2000/svg';

export function svgEl<K extends keyof SVGElementTagNameMap>(
  doc: Document,
  tag: K,
  attrs: Record<string, string | number> = {},
): SVGElementTagNameMap[K] {
  const el = doc.createElementNS(SVG_NS, tag);
  for (const [key, value] of Object.entries(attrs)) {
    el.setAttribute(key, String(value));
  }
  return el;
}

/** Maps frame index within [lo, hi] onto [0, width]. */
export function frameScale(lo: number, hi: number, width: number) {
  const span = Math.max(1, hi - lo);
  return (frame: number) => ((frame - lo) / span) * width;
}

/**
 * Polyline points for series[lo..hi] drawn into a width x height box,
 * y growing downward, values scaled against yMax.
 */
export function seriesPoints(
  series: number[],
  lo: number,
  hi: number,
  width: number,
  height: number,
  yMax: number,
): string {
  const x = frameScale(lo, hi, width);
  const parts: string[] = [];
  const safeMax = yMax > 0 ? yMax : 1;
  for (let i = lo; i <= hi && i < series.length; i++) {
    const y = height - (Math.min(series[i], safeMax) / safeMax) * height;
    parts.push(`${x(i).toFixed(2)},${y.toFixed(2)}`);
  }
  return parts.join(' ');
}
