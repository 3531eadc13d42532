/**
 * The two figures: certificate level sets over the state interval, and the
 * expected one-step increase against the growth allowance. Both are derived
 * purely from the audit CSV and certificate JSON; nothing is recomputed.
 */

import { writeFileSync } from 'fs';

import { AuditFormatError, loadAudit, loadCertificate, regionBands } from './audit';
import { Figure, renderPng, renderSvg } from './figure';

export interface RenderedFigure {
  figure: Figure;
  svgPath: string;
  pngPath: string;
}

function writeFigure(fig: Figure, outBase: string): RenderedFigure {
  const svgPath = `${outBase}.svg`;
  const pngPath = `${outBase}.png`;
  writeFileSync(svgPath, renderSvg(fig));
  writeFileSync(pngPath, renderPng(fig));
  return { figure: fig, svgPath, pngPath };
}

/** Certificate curve with the level-1 and level-lambda lines and region bands. */
export function plotLevels(
  auditPath: string,
  certificatePath: string,
  outBase: string
): RenderedFigure {
  const frame = loadAudit(auditPath);
  const cert = loadCertificate(certificatePath);
  const fig: Figure = {
    title: 'Barrier certificate level sets',
    xLabel: 'state x',
    yLabel: 'B(x)',
    series: [
      {
        role: 'certificate',
        x: frame.rows.map((r) => r.x),
        y: frame.rows.map((r) => r.b),
        stroke: 'steelblue',
      },
    ],
    hlines: [
      { role: 'initial-level', y: 1, label: 'initial level = 1', stroke: 'green' },
      {
        role: 'unsafe-level',
        y: cert.lam,
        label: `unsafe level = ${cert.lam.toFixed(4)}`,
        stroke: 'orange',
      },
    ],
    bands: [
      ...regionBands(frame.rows, 'initial').map(([x0, x1]) => ({
        role: 'initial-region',
        x0,
        x1,
        fill: 'green',
      })),
      ...regionBands(frame.rows, 'unsafe').map(([x0, x1]) => ({
        role: 'unsafe-region',
        x0,
        x1,
        fill: 'orange',
      })),
    ],
  };
  return writeFigure(fig, outBase);
}

/** Expected one-step increase E[B(next)] - B(x) against the allowance c. */
export function plotExpectation(auditPath: string, outBase: string): RenderedFigure {
  const frame = loadAudit(auditPath);
  if (frame.rows.some((r) => !Number.isFinite(r.expectedNextB))) {
    throw new AuditFormatError(`${auditPath}: expected_next_B column is not finite`);
  }
  const fig: Figure = {
    title: 'Expected one-step change of the certificate',
    xLabel: 'state x',
    yLabel: 'E[B(f(x,w)) | x] - B(x)',
    series: [
      {
        role: 'expected-increase',
        x: frame.rows.map((r) => r.x),
        y: frame.rows.map((r) => r.expectedNextB - r.b),
        stroke: 'crimson',
      },
    ],
    hlines: [
      {
        role: 'growth-allowance',
        y: frame.c,
        label: `allowance c = ${frame.c.toFixed(4)}`,
        stroke: 'black',
      },
    ],
    bands: [],
  };
  return writeFigure(fig, outBase);
}
