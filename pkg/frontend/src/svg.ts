/** Minimal hand-rolled SVG line charts: axes, unit labels, mean lines with
 * shaded across-seed bands, and a legend. No DOM required. */

export interface Series {
  label: string;
  color: string;
  x: number[];
  y: number[];
  band?: { lo: number[]; hi: number[] };
  dash?: string;
  markers?: boolean;
}

export interface ChartSpec {
  title: string;
  xLabel: string;
  yLabel: string;
  series: Series[];
  width?: number;
  height?: number;
}

const PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"];

export function color(i: number): string {
  return PALETTE[i % PALETTE.length];
}

function extent(values: number[]): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (Number.isFinite(v)) {
      lo = Math.min(lo, v);
      hi = Math.max(hi, v);
    }
  }
  if (!Number.isFinite(lo)) return [0, 1];
  if (lo === hi) return [lo - 1, hi + 1];
  return [lo, hi];
}

function ticks(lo: number, hi: number, n = 5): number[] {
  const span = hi - lo;
  const raw = span / n;
  const mag = Math.pow(10, Math.floor(Math.log10(raw)));
  const step = [1, 2, 5, 10].map((m) => m * mag).find((s) => span / s <= n) ?? mag * 10;
  const start = Math.ceil(lo / step) * step;
  const out: number[] = [];
  for (let v = start; v <= hi + 1e-12 * span; v += step) out.push(v);
  return out;
}

function fmtTick(v: number): string {
  const a = Math.abs(v);
  if (a >= 1e9) return `${(v / 1e9).toPrecision(3)}G`;
  if (a >= 1e6) return `${(v / 1e6).toPrecision(3)}M`;
  if (a >= 1e3) return `${(v / 1e3).toPrecision(3)}k`;
  if (a > 0 && a < 0.01) return v.toExponential(1);
  return String(Math.round(v * 1000) / 1000);
}

export function renderChart(spec: ChartSpec): string {
  const W = spec.width ?? 760;
  const H = spec.height ?? 460;
  const m = { left: 78, right: 16, top: 40, bottom: 56 };
  const iw = W - m.left - m.right;
  const ih = H - m.top - m.bottom;

  const xs = spec.series.flatMap((s) => s.x);
  const ys = spec.series.flatMap((s) => (s.band ? s.y.concat(s.band.lo, s.band.hi) : s.y));
  const [x0, x1] = extent(xs);
  let [y0, y1] = extent(ys);
  if (y0 > 0 && y0 < 0.25 * (y1 - y0)) y0 = 0;
  const sx = (v: number) => m.left + ((v - x0) / (x1 - x0)) * iw;
  const sy = (v: number) => m.top + ih - ((v - y0) / (y1 - y0)) * ih;

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${W}" height="${H}" viewBox="0 0 ${W} ${H}" font-family="sans-serif" font-size="12">`,
    `<rect width="${W}" height="${H}" fill="white"/>`,
    `<text x="${W / 2}" y="20" text-anchor="middle" font-size="15">${esc(spec.title)}</text>`,
  );
  for (const t of ticks(x0, x1)) {
    const px = sx(t);
    parts.push(
      `<line x1="${px}" y1="${m.top}" x2="${px}" y2="${m.top + ih}" stroke="#eee"/>`,
      `<text x="${px}" y="${m.top + ih + 18}" text-anchor="middle">${fmtTick(t)}</text>`,
    );
  }
  for (const t of ticks(y0, y1)) {
    const py = sy(t);
    parts.push(
      `<line x1="${m.left}" y1="${py}" x2="${m.left + iw}" y2="${py}" stroke="#eee"/>`,
      `<text x="${m.left - 8}" y="${py + 4}" text-anchor="end">${fmtTick(t)}</text>`,
    );
  }
  parts.push(
    `<rect x="${m.left}" y="${m.top}" width="${iw}" height="${ih}" fill="none" stroke="#333"/>`,
    `<text x="${m.left + iw / 2}" y="${H - 14}" text-anchor="middle">${esc(spec.xLabel)}</text>`,
    `<text x="20" y="${m.top + ih / 2}" text-anchor="middle" transform="rotate(-90 20 ${m.top + ih / 2})">${esc(spec.yLabel)}</text>`,
  );

  for (const s of spec.series) {
    if (s.band) {
      const fwd = s.x.map((x, i) => `${sx(x)},${sy(s.band!.hi[i])}`);
      const back = s.x.map((x, i) => `${sx(x)},${sy(s.band!.lo[i])}`).reverse();
      parts.push(
        `<polygon points="${fwd.concat(back).join(" ")}" fill="${s.color}" opacity="0.15"/>`,
      );
    }
    const pts = s.x.map((x, i) => `${sx(x)},${sy(s.y[i])}`).join(" ");
    const dash = s.dash ? ` stroke-dasharray="${s.dash}"` : "";
    parts.push(
      `<polyline points="${pts}" fill="none" stroke="${s.color}" stroke-width="1.8"${dash}/>`,
    );
    if (s.markers) {
      for (let i = 0; i < s.x.length; i++) {
        parts.push(`<circle cx="${sx(s.x[i])}" cy="${sy(s.y[i])}" r="3.2" fill="${s.color}"/>`);
      }
    }
  }

  spec.series.forEach((s, i) => {
    const ly = m.top + 10 + 16 * i;
    const dash = s.dash ? ` stroke-dasharray="${s.dash}"` : "";
    parts.push(
      `<line x1="${m.left + 10}" y1="${ly}" x2="${m.left + 34}" y2="${ly}" stroke="${s.color}" stroke-width="2"${dash}/>`,
      `<text x="${m.left + 40}" y="${ly + 4}">${esc(s.label)}</text>`,
    );
  });
  parts.push("</svg>");
  return parts.join("\n");
}

function esc(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}
