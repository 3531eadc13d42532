/**
 * Figure generation entry point.
 *
 *   node dist/src/cli.js --audit out/audit.csv --certificate out/certificate.json --out figs/
 *
 * Writes figs/levels.{svg,png} and figs/expectation.{svg,png}.
 */

import { mkdirSync } from 'fs';
import { join } from 'path';

import { AuditFormatError } from './audit';
import { plotExpectation, plotLevels } from './plots';

function parseArgs(argv: string[]): Map<string, string> {
  const args = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) {
    const key = argv[i];
    const value = argv[i + 1];
    if (!key.startsWith('--') || value === undefined) {
      throw new Error(`expected --flag value pairs, got ${JSON.stringify(argv)}`);
    }
    args.set(key.slice(2), value);
  }
  return args;
}

export function main(argv: string[]): number {
  let args: Map<string, string>;
  try {
    args = parseArgs(argv);
  } catch (err) {
    console.error(String(err));
    return 1;
  }
  const audit = args.get('audit');
  const certificate = args.get('certificate');
  const out = args.get('out');
  if (!audit || !certificate || !out) {
    console.error('usage: plots --audit <audit.csv> --certificate <certificate.json> --out <dir>');
    return 1;
  }
  mkdirSync(out, { recursive: true });
  try {
    const levels = plotLevels(audit, certificate, join(out, 'levels'));
    const expectation = plotExpectation(audit, join(out, 'expectation'));
    console.log(`wrote ${levels.svgPath}, ${levels.pngPath}`);
    console.log(`wrote ${expectation.svgPath}, ${expectation.pngPath}`);
    return 0;
  } catch (err) {
    if (err instanceof AuditFormatError) {
      console.error(`error: ${err.message}`);
      return 1;
    }
    throw err;
  }
}

if (require.main === module) {
  process.exit(main(process.argv.slice(2)));
}
