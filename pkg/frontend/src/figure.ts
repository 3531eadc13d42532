/**
 * A tiny declarative figure model with SVG and PNG backends.
 *
 * Every mark keeps its source data in data-* attributes of the emitted SVG,
 * so the figures can be checked by parsing those arrays rather than pixels.
 * Rendering is fully deterministic: no timestamps, no randomness.
 */

export interface Series {
  role: string;
  x: number[];
  y: number[];
  stroke: string;
}

export interface HLine {
  role: string;
  y: number;
  label: string;
  stroke: string;
}

export interface Band {
  role: string;
  x0: number;
  x1: number;
  fill: string;
}

export interface Figure {
  title: string;
  xLabel: string;
  yLabel: string;
  series: Series[];
  hlines: HLine[];
  bands: Band[];
}

export const WIDTH = 840;
export const HEIGHT = 520;
const MARGIN = { left: 70, right: 24, top: 40, bottom: 52 };

interface Scale {
  x0: number;
  x1: number;
  y0: number;
  y1: number;
}

function dataRange(fig: Figure): Scale {
  let xs: number[] = [];
  let ys: number[] = [];
  for (const s of fig.series) {
    xs = xs.concat(s.x);
    ys = ys.concat(s.y);
  }
  for (const h of fig.hlines) ys.push(h.y);
  const x0 = Math.min(...xs);
  const x1 = Math.max(...xs);
  let y0 = Math.min(...ys);
  let y1 = Math.max(...ys);
  const pad = 0.05 * (y1 - y0 || 1);
  y0 -= pad;
  y1 += pad;
  return { x0, x1, y0, y1 };
}

function px(scale: Scale, x: number): number {
  const w = WIDTH - MARGIN.left - MARGIN.right;
  return MARGIN.left + ((x - scale.x0) / (scale.x1 - scale.x0)) * w;
}

function py(scale: Scale, y: number): number {
  const h = HEIGHT - MARGIN.top - MARGIN.bottom;
  return MARGIN.top + ((scale.y1 - y) / (scale.y1 - scale.y0)) * h;
}

function ticks(a: number, b: number, count = 5): number[] {
  const out: number[] = [];
  for (let i = 0; i < count; i++) out.push(a + ((b - a) * i) / (count - 1));
  return out;
}

function fmtTick(v: number): string {
  const a = Math.abs(v);
  if (a !== 0 && (a >= 1e4 || a < 1e-2)) return v.toExponential(1);
  return String(Math.round(v * 100) / 100);
}

function esc(s: string): string {
  return s.replace(/&/g, '&amp;').replace(/</g, '&lt;').replace(/>/g, '&gt;');
}

export function renderSvg(fig: Figure): string {
  const scale = dataRange(fig);
  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" ` +
      `viewBox="0 0 ${WIDTH} ${HEIGHT}" font-family="Helvetica, Arial, sans-serif">`
  );
  parts.push(`<rect width="${WIDTH}" height="${HEIGHT}" fill="white"/>`);

  for (const band of fig.bands) {
    const bx0 = px(scale, band.x0);
    const bx1 = px(scale, band.x1);
    parts.push(
      `<rect class="band" data-role="${band.role}" data-x0="${band.x0}" data-x1="${band.x1}" ` +
        `x="${bx0.toFixed(2)}" y="${MARGIN.top}" width="${(bx1 - bx0).toFixed(2)}" ` +
        `height="${HEIGHT - MARGIN.top - MARGIN.bottom}" fill="${band.fill}" opacity="0.25"/>`
    );
  }

  // axes and ticks
  const axisY = HEIGHT - MARGIN.bottom;
  parts.push(
    `<line x1="${MARGIN.left}" y1="${axisY}" x2="${WIDTH - MARGIN.right}" y2="${axisY}" stroke="black"/>`,
    `<line x1="${MARGIN.left}" y1="${MARGIN.top}" x2="${MARGIN.left}" y2="${axisY}" stroke="black"/>`
  );
  for (const t of ticks(scale.x0, scale.x1)) {
    const tx = px(scale, t);
    parts.push(
      `<line x1="${tx.toFixed(2)}" y1="${axisY}" x2="${tx.toFixed(2)}" y2="${axisY + 6}" stroke="black"/>`,
      `<text x="${tx.toFixed(2)}" y="${axisY + 22}" text-anchor="middle" font-size="13">${fmtTick(t)}</text>`
    );
  }
  for (const t of ticks(scale.y0, scale.y1)) {
    const ty = py(scale, t);
    parts.push(
      `<line x1="${MARGIN.left - 6}" y1="${ty.toFixed(2)}" x2="${MARGIN.left}" y2="${ty.toFixed(2)}" stroke="black"/>`,
      `<text x="${MARGIN.left - 10}" y="${(ty + 4).toFixed(2)}" text-anchor="end" font-size="13">${fmtTick(t)}</text>`
    );
  }

  for (const h of fig.hlines) {
    const hy = py(scale, h.y);
    parts.push(
      `<line class="hline" data-role="${h.role}" data-y="${h.y}" x1="${MARGIN.left}" ` +
        `y1="${hy.toFixed(2)}" x2="${WIDTH - MARGIN.right}" y2="${hy.toFixed(2)}" ` +
        `stroke="${h.stroke}" stroke-dasharray="7,5" stroke-width="1.5"/>`,
      `<text class="hline-label" data-role="${h.role}" x="${WIDTH - MARGIN.right - 4}" ` +
        `y="${(hy - 6).toFixed(2)}" text-anchor="end" font-size="13" fill="${h.stroke}">${esc(h.label)}</text>`
    );
  }

  for (const s of fig.series) {
    const pts = s.x.map((x, i) => `${px(scale, x).toFixed(2)},${py(scale, s.y[i]).toFixed(2)}`);
    parts.push(
      `<polyline class="series" data-role="${s.role}" data-x="${s.x.join(' ')}" ` +
        `data-y="${s.y.join(' ')}" points="${pts.join(' ')}" fill="none" ` +
        `stroke="${s.stroke}" stroke-width="1.8"/>`
    );
  }

  parts.push(
    `<text x="${WIDTH / 2}" y="24" text-anchor="middle" font-size="16">${esc(fig.title)}</text>`,
    `<text x="${WIDTH / 2}" y="${HEIGHT - 14}" text-anchor="middle" font-size="14">${esc(fig.xLabel)}</text>`,
    `<text x="18" y="${HEIGHT / 2}" text-anchor="middle" font-size="14" ` +
      `transform="rotate(-90 18 ${HEIGHT / 2})">${esc(fig.yLabel)}</text>`,
    `</svg>`
  );
  return parts.join('\n') + '\n';
}

// PNG rasterization: the same figure drawn on an RGBA buffer.

type Rgb = [number, number, number];

function parseColor(c: string): Rgb {
  const named: Record<string, Rgb> = {
    black: [0, 0, 0],
    white: [255, 255, 255],
    green: [34, 139, 34],
    orange: [230, 126, 34],
    steelblue: [70, 130, 180],
    crimson: [220, 20, 60],
  };
  if (c in named) return named[c];
  if (c.startsWith('#') && c.length === 7) {
    return [
      parseInt(c.slice(1, 3), 16),
      parseInt(c.slice(3, 5), 16),
      parseInt(c.slice(5, 7), 16),
    ];
  }
  return [0, 0, 0];
}

class Raster {
  data: Uint8Array;

  constructor(public width: number, public height: number) {
    this.data = new Uint8Array(width * height * 4).fill(255);
  }

  set(x: number, y: number, rgb: Rgb, alpha = 1) {
    const xi = Math.round(x);
    const yi = Math.round(y);
    if (xi < 0 || yi < 0 || xi >= this.width || yi >= this.height) return;
    const o = 4 * (yi * this.width + xi);
    for (let k = 0; k < 3; k++) {
      this.data[o + k] = Math.round(alpha * rgb[k] + (1 - alpha) * this.data[o + k]);
    }
    this.data[o + 3] = 255;
  }

  fillRect(x0: number, y0: number, x1: number, y1: number, rgb: Rgb, alpha: number) {
    for (let y = Math.round(y0); y <= Math.round(y1); y++) {
      for (let x = Math.round(x0); x <= Math.round(x1); x++) {
        this.set(x, y, rgb, alpha);
      }
    }
  }

  line(x0: number, y0: number, x1: number, y1: number, rgb: Rgb) {
    const steps = Math.max(Math.abs(x1 - x0), Math.abs(y1 - y0), 1);
    for (let i = 0; i <= steps; i++) {
      const t = i / steps;
      this.set(x0 + t * (x1 - x0), y0 + t * (y1 - y0), rgb);
      this.set(x0 + t * (x1 - x0) + 0.5, y0 + t * (y1 - y0) + 0.5, rgb);
    }
  }
}

const CRC_TABLE = (() => {
  const table = new Uint32Array(256);
  for (let n = 0; n < 256; n++) {
    let c = n;
    for (let k = 0; k < 8; k++) c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
    table[n] = c >>> 0;
  }
  return table;
})();

function crc32(buf: Uint8Array): number {
  let c = 0xffffffff;
  for (let i = 0; i < buf.length; i++) c = CRC_TABLE[(c ^ buf[i]) & 0xff] ^ (c >>> 8);
  return (c ^ 0xffffffff) >>> 0;
}

function chunk(type: string, body: Uint8Array): Buffer {
  const head = Buffer.alloc(8);
  head.writeUInt32BE(body.length, 0);
  head.write(type, 4, 'ascii');
  const crcInput = Buffer.concat([Buffer.from(type, 'ascii'), Buffer.from(body)]);
  const tail = Buffer.alloc(4);
  tail.writeUInt32BE(crc32(crcInput), 0);
  return Buffer.concat([head, Buffer.from(body), tail]);
}

function encodePng(raster: Raster): Buffer {
  const { width, height, data } = raster;
  const zlib = require('zlib') as typeof import('zlib');
  const ihdr = Buffer.alloc(13);
  ihdr.writeUInt32BE(width, 0);
  ihdr.writeUInt32BE(height, 4);
  ihdr[8] = 8; // bit depth
  ihdr[9] = 6; // RGBA
  const scanlines = Buffer.alloc(height * (1 + width * 4));
  for (let y = 0; y < height; y++) {
    const o = y * (1 + width * 4);
    scanlines[o] = 0; // filter: none
    Buffer.from(data.buffer, y * width * 4, width * 4).copy(scanlines, o + 1);
  }
  const idat = zlib.deflateSync(scanlines, { level: 9 });
  return Buffer.concat([
    Buffer.from([0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a]),
    chunk('IHDR', ihdr),
    chunk('IDAT', idat),
    chunk('IEND', new Uint8Array(0)),
  ]);
}

export function renderPng(fig: Figure): Buffer {
  const scale = dataRange(fig);
  const raster = new Raster(WIDTH, HEIGHT);
  for (const band of fig.bands) {
    raster.fillRect(
      px(scale, band.x0),
      MARGIN.top,
      px(scale, band.x1),
      HEIGHT - MARGIN.bottom,
      parseColor(band.fill),
      0.25
    );
  }
  const axisY = HEIGHT - MARGIN.bottom;
  raster.line(MARGIN.left, axisY, WIDTH - MARGIN.right, axisY, [0, 0, 0]);
  raster.line(MARGIN.left, MARGIN.top, MARGIN.left, axisY, [0, 0, 0]);
  for (const h of fig.hlines) {
    const hy = py(scale, h.y);
    const rgb = parseColor(h.stroke);
    for (let x = MARGIN.left; x < WIDTH - MARGIN.right; x += 12) {
      raster.line(x, hy, Math.min(x + 7, WIDTH - MARGIN.right), hy, rgb);
    }
  }
  for (const s of fig.series) {
    const rgb = parseColor(s.stroke);
    for (let i = 1; i < s.x.length; i++) {
      raster.line(
        px(scale, s.x[i - 1]),
        py(scale, s.y[i - 1]),
        px(scale, s.x[i]),
        py(scale, s.y[i]),
        rgb
      );
    }
  }
  return encodePng(raster);
}
