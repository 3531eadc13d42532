import assert from 'node:assert/strict';
import { mkdtempSync, writeFileSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { join } from 'node:path';
import { test } from 'node:test';

import { AuditFormatError, loadAudit, loadCertificate, regionBands } from '../src/audit';

const GOLDEN = join(__dirname, '..', '..', 'tests', 'fixtures', 'golden');

function writeTemp(name: string, content: string): string {
  const dir = mkdtempSync(join(tmpdir(), 'plots-'));
  const path = join(dir, name);
  writeFileSync(path, content);
  return path;
}

const HEADER = 'x,B,region_tag,expected_next_B,martingale_slack';

test('golden audit loads with consistent growth allowance', () => {
  const frame = loadAudit(join(GOLDEN, 'audit.csv'));
  const cert = loadCertificate(join(GOLDEN, 'certificate.json'));
  assert.ok(frame.rows.length > 100);
  assert.ok(Math.abs(frame.c - cert.c) < 1e-9);
  for (const row of frame.rows) {
    assert.ok(['initial', 'unsafe', 'state'].includes(row.regionTag));
  }
});

test('region bands cover the tagged intervals', () => {
  const frame = loadAudit(join(GOLDEN, 'audit.csv'));
  const initial = regionBands(frame.rows, 'initial');
  const unsafe = regionBands(frame.rows, 'unsafe');
  assert.equal(initial.length, 1);
  assert.equal(unsafe.length, 1);
  assert.ok(Math.abs(initial[0][0] - 17) < 0.05);
  assert.ok(Math.abs(initial[0][1] - 18) < 0.05);
  assert.ok(Math.abs(unsafe[0][0] - 28) < 0.05);
  assert.ok(Math.abs(unsafe[0][1] - 30) < 0.05);
});

test('empty audit file is rejected', () => {
  const path = writeTemp('empty.csv', '');
  assert.throws(() => loadAudit(path), AuditFormatError);
});

test('header-only audit file is rejected', () => {
  const path = writeTemp('header.csv', HEADER + '\n');
  assert.throws(() => loadAudit(path), AuditFormatError);
});

test('multi-dimensional audit is rejected with a clear message', () => {
  const path = writeTemp(
    'two-d.csv',
    'x0,x1,B,region_tag,expected_next_B,martingale_slack\n0,0,1,state,1,0\n'
  );
  assert.throws(() => loadAudit(path), /multi-dimensional/);
});

test('non-finite rows are rejected', () => {
  const path = writeTemp('nan.csv', `${HEADER}\n1,nan,state,2,0.5\n`);
  assert.throws(() => loadAudit(path), /non-finite/);
});

test('wrong column count is rejected', () => {
  const path = writeTemp('short.csv', `${HEADER}\n1,2,state,3\n`);
  assert.throws(() => loadAudit(path), /5 columns/);
});

test('unknown header is rejected', () => {
  const path = writeTemp('odd.csv', 'a,b,c,d,e\n1,2,x,3,4\n');
  assert.throws(() => loadAudit(path), /unexpected header/);
});

test('inconsistent allowance across rows is rejected', () => {
  const path = writeTemp(
    'drift.csv',
    `${HEADER}\n1,1,state,1.5,0.2\n2,1,state,1.5,0.4\n`
  );
  assert.throws(() => loadAudit(path), /inconsistent growth allowance/);
});

test('certificate loader validates fields', () => {
  const good = loadCertificate(join(GOLDEN, 'certificate.json'));
  assert.equal(good.degree, 2);
  assert.equal(good.coefficients.length, 3);
  const bad = writeTemp('cert.json', JSON.stringify({ lam: 2 }));
  assert.throws(() => loadCertificate(bad), /missing/);
  const lamLow = writeTemp(
    'cert-low.json',
    JSON.stringify({ dimension: 1, degree: 2, coefficients: [0, 0, 0], lam: 0.5, c: 0, kappa: 0 })
  );
  assert.throws(() => loadCertificate(lamLow), /lam/);
});
