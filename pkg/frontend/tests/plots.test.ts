import assert from 'node:assert/strict';
import { execFileSync } from 'node:child_process';
import { existsSync, mkdtempSync, readFileSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { join } from 'node:path';
import { test } from 'node:test';

import { loadCertificate } from '../src/audit';
import { plotExpectation, plotLevels } from '../src/plots';

const GOLDEN = join(__dirname, '..', '..', 'tests', 'fixtures', 'golden');
const AUDIT = join(GOLDEN, 'audit.csv');
const CERT = join(GOLDEN, 'certificate.json');

function tempBase(name: string): string {
  return join(mkdtempSync(join(tmpdir(), 'plots-')), name);
}

/** Pull a mark's source data arrays back out of the SVG text. */
function seriesData(svg: string, role: string): { x: number[]; y: number[] } {
  const re = new RegExp(
    `<polyline class="series" data-role="${role}" data-x="([^"]*)" data-y="([^"]*)"`
  );
  const match = svg.match(re);
  assert.ok(match, `series ${role} not found`);
  return {
    x: match![1].split(' ').map(Number),
    y: match![2].split(' ').map(Number),
  };
}

function hlineValue(svg: string, role: string): number {
  const match = svg.match(new RegExp(`<line class="hline" data-role="${role}" data-y="([^"]*)"`));
  assert.ok(match, `hline ${role} not found`);
  return Number(match![1]);
}

function bandRanges(svg: string, role: string): Array<[number, number]> {
  const out: Array<[number, number]> = [];
  const re = new RegExp(
    `<rect class="band" data-role="${role}" data-x0="([^"]*)" data-x1="([^"]*)"`,
    'g'
  );
  for (const m of svg.matchAll(re)) out.push([Number(m[1]), Number(m[2])]);
  return out;
}

test('level plot reproduces the certificate topology', () => {
  const rendered = plotLevels(AUDIT, CERT, tempBase('levels'));
  const svg = readFileSync(rendered.svgPath, 'utf8');
  const cert = loadCertificate(CERT);
  const curve = seriesData(svg, 'certificate');

  const lam = hlineValue(svg, 'unsafe-level');
  assert.equal(lam, cert.lam);
  assert.equal(hlineValue(svg, 'initial-level'), 1);

  // topology: below 1 on the initial interval, above lambda on the unsafe one
  for (let i = 0; i < curve.x.length; i++) {
    if (curve.x[i] >= 17 && curve.x[i] <= 18) {
      assert.ok(curve.y[i] < 1, `B(${curve.x[i]}) = ${curve.y[i]} should be < 1`);
    }
    if (curve.x[i] >= 28 && curve.x[i] <= 30) {
      assert.ok(curve.y[i] > lam, `B(${curve.x[i]}) = ${curve.y[i]} should be > ${lam}`);
    }
  }

  const initialBands = bandRanges(svg, 'initial-region');
  const unsafeBands = bandRanges(svg, 'unsafe-region');
  assert.equal(initialBands.length, 1);
  assert.equal(unsafeBands.length, 1);
});

test('lambda label matches the certificate to 4 decimals', () => {
  const rendered = plotLevels(AUDIT, CERT, tempBase('levels'));
  const svg = readFileSync(rendered.svgPath, 'utf8');
  const cert = loadCertificate(CERT);
  const label = svg.match(/<text class="hline-label" data-role="unsafe-level"[^>]*>([^<]*)</);
  assert.ok(label);
  assert.ok(label![1].includes(cert.lam.toFixed(4)));
});

test('expectation plot shows nonpositive slack across the mesh', () => {
  const rendered = plotExpectation(AUDIT, tempBase('expectation'));
  const svg = readFileSync(rendered.svgPath, 'utf8');
  const curve = seriesData(svg, 'expected-increase');
  const allowance = hlineValue(svg, 'growth-allowance');
  for (let i = 0; i < curve.x.length; i++) {
    assert.ok(
      curve.y[i] <= allowance + 1e-12,
      `expected increase ${curve.y[i]} at x=${curve.x[i]} exceeds c=${allowance}`
    );
  }
});

test('deterministic slack plot for a synthetic deterministic audit', () => {
  // expected_next_B - B - c with slack identically -c: curve must sit at 0.
  const fs = require('node:fs') as typeof import('node:fs');
  const dir = mkdtempSync(join(tmpdir(), 'plots-'));
  const audit = join(dir, 'audit.csv');
  const rows = ['x,B,region_tag,expected_next_B,martingale_slack'];
  for (let i = 0; i <= 10; i++) {
    const x = i / 10;
    rows.push(`${x},${1 + x},state,${1 + x + 0.25},${0.25 - 0.25}`);
  }
  fs.writeFileSync(audit, rows.join('\n') + '\n');
  const rendered = plotExpectation(audit, join(dir, 'expectation'));
  const svg = readFileSync(rendered.svgPath, 'utf8');
  const curve = seriesData(svg, 'expected-increase');
  for (const y of curve.y) assert.ok(Math.abs(y - 0.25) < 1e-12);
  assert.equal(hlineValue(svg, 'growth-allowance'), 0.25);
});

test('figures regenerate byte-identically', () => {
  const first = plotLevels(AUDIT, CERT, tempBase('levels'));
  const second = plotLevels(AUDIT, CERT, tempBase('levels'));
  assert.deepEqual(readFileSync(first.svgPath), readFileSync(second.svgPath));
  assert.deepEqual(readFileSync(first.pngPath), readFileSync(second.pngPath));
  const e1 = plotExpectation(AUDIT, tempBase('expectation'));
  const e2 = plotExpectation(AUDIT, tempBase('expectation'));
  assert.deepEqual(readFileSync(e1.svgPath), readFileSync(e2.svgPath));
  assert.deepEqual(readFileSync(e1.pngPath), readFileSync(e2.pngPath));
});

test('png output carries the PNG signature and IHDR', () => {
  const rendered = plotLevels(AUDIT, CERT, tempBase('levels'));
  const png = readFileSync(rendered.pngPath);
  assert.deepEqual(
    [...png.subarray(0, 8)],
    [0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a]
  );
  assert.equal(png.subarray(12, 16).toString('ascii'), 'IHDR');
  assert.equal(png.readUInt32BE(16), 840); // width
});

test('cli writes all four files', () => {
  const out = mkdtempSync(join(tmpdir(), 'plots-cli-'));
  execFileSync('node', [
    join(__dirname, '..', 'src', 'cli.js'),
    '--audit', AUDIT,
    '--certificate', CERT,
    '--out', out,
  ]);
  for (const name of ['levels.svg', 'levels.png', 'expectation.svg', 'expectation.png']) {
    assert.ok(existsSync(join(out, name)), `${name} missing`);
  }
});

test('cli reports malformed input with exit 1', () => {
  const out = mkdtempSync(join(tmpdir(), 'plots-cli-'));
  const fs = require('node:fs') as typeof import('node:fs');
  const bad = join(out, 'bad.csv');
  fs.writeFileSync(bad, '');
  assert.throws(() =>
    execFileSync('node', [
      join(__dirname, '..', 'src', 'cli.js'),
      '--audit', bad,
      '--certificate', CERT,
      '--out', out,
    ])
  );
});
