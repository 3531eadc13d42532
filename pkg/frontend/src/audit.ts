/**
 * Loaders for the verification artifacts this package consumes: the mesh
 * audit CSV and the certificate JSON. Everything is validated up front so
 * the plotting code can assume clean, finite, one-dimensional data.
 */

import { readFileSync } from 'fs';

export interface AuditRow {
  x: number;
  b: number;
  regionTag: string;
  expectedNextB: number;
  martingaleSlack: number;
}

export interface AuditFrame {
  rows: AuditRow[];
  /** growth allowance recovered from (expectedNextB - b) - martingaleSlack */
  c: number;
}

export interface Certificate {
  dimension: number;
  degree: number;
  coefficients: number[];
  lam: number;
  c: number;
  kappa: number;
}

const EXPECTED_HEADER = 'x,B,region_tag,expected_next_B,martingale_slack';

export class AuditFormatError extends Error {}

export function loadAudit(path: string): AuditFrame {
  const text = readFileSync(path, 'utf8');
  const lines = text.split('\n').filter((l) => l.trim().length > 0);
  if (lines.length === 0) {
    throw new AuditFormatError(`${path}: empty audit file`);
  }
  const header = lines[0].trim();
  if (header.startsWith('x0,')) {
    throw new AuditFormatError(
      `${path}: multi-dimensional audit meshes are not supported by these plots`
    );
  }
  if (header !== EXPECTED_HEADER) {
    throw new AuditFormatError(
      `${path}: unexpected header ${JSON.stringify(header)}, ` +
        `expected ${JSON.stringify(EXPECTED_HEADER)}`
    );
  }
  if (lines.length === 1) {
    throw new AuditFormatError(`${path}: audit file has a header but no rows`);
  }
  const rows: AuditRow[] = [];
  for (let i = 1; i < lines.length; i++) {
    const parts = lines[i].trim().split(',');
    if (parts.length !== 5) {
      throw new AuditFormatError(`${path}:${i + 1}: expected 5 columns, got ${parts.length}`);
    }
    const row: AuditRow = {
      x: Number(parts[0]),
      b: Number(parts[1]),
      regionTag: parts[2],
      expectedNextB: Number(parts[3]),
      martingaleSlack: Number(parts[4]),
    };
    for (const v of [row.x, row.b, row.expectedNextB, row.martingaleSlack]) {
      if (!Number.isFinite(v)) {
        throw new AuditFormatError(`${path}:${i + 1}: non-finite value in ${lines[i]}`);
      }
    }
    rows.push(row);
  }
  const c = rows[0].expectedNextB - rows[0].b - rows[0].martingaleSlack;
  for (const row of rows) {
    const rowC = row.expectedNextB - row.b - row.martingaleSlack;
    if (Math.abs(rowC - c) > 1e-9 * Math.max(1, Math.abs(c))) {
      throw new AuditFormatError(
        `${path}: inconsistent growth allowance across rows (${c} vs ${rowC})`
      );
    }
  }
  return { rows, c };
}

export function loadCertificate(path: string): Certificate {
  const data = JSON.parse(readFileSync(path, 'utf8'));
  for (const key of ['dimension', 'degree', 'coefficients', 'lam', 'c', 'kappa']) {
    if (!(key in data)) {
      throw new AuditFormatError(`${path}: certificate is missing ${JSON.stringify(key)}`);
    }
  }
  if (!Number.isFinite(data.lam) || data.lam <= 1) {
    throw new AuditFormatError(`${path}: certificate lam must be a finite number > 1`);
  }
  return data as Certificate;
}

/** Contiguous runs of a region tag, as inclusive x-intervals. */
export function regionBands(rows: AuditRow[], tag: string): Array<[number, number]> {
  const bands: Array<[number, number]> = [];
  let start: number | null = null;
  let last = 0;
  for (const row of rows) {
    if (row.regionTag === tag) {
      if (start === null) start = row.x;
      last = row.x;
    } else if (start !== null) {
      bands.push([start, last]);
      start = null;
    }
  }
  if (start !== null) bands.push([start, last]);
  return bands;
}
