#!/usr/bin/env node
// plot <vcurve|convergence|tau_evolution> --in FILE [--in FILE ...]
//      [--summary FILE] --out FILE [--title TEXT] [--log]

import { FigureKind, FigureSpec, render } from './figures.js';

const KINDS: FigureKind[] = ['vcurve', 'convergence', 'tau_evolution'];

export function parseArgs(argv: string[]): FigureSpec {
  if (argv.length === 0) throw new Error(`usage: plot <${KINDS.join('|')}> --in FILE --out FILE`);
  const kind = argv[0] as FigureKind;
  if (!KINDS.includes(kind)) throw new Error(`unknown figure kind '${argv[0]}'; expected one of ${KINDS.join(', ')}`);
  const spec: FigureSpec = { kind, inputs: [], out: '' };
  for (let i = 1; i < argv.length; i++) {
    const flag = argv[i];
    const needsValue = flag !== '--log';
    const value = needsValue ? argv[++i] : '';
    if (needsValue && value === undefined) throw new Error(`missing value for ${flag}`);
    switch (flag) {
      case '--in':
        spec.inputs.push(value);
        break;
      case '--summary':
        spec.summary = value;
        break;
      case '--out':
        spec.out = value;
        break;
      case '--title':
        spec.title = value;
        break;
      case '--log':
        spec.logY = true;
        break;
      default:
        throw new Error(`unknown flag '${flag}'`);
    }
  }
  if (spec.inputs.length === 0) throw new Error('need at least one --in file');
  if (!spec.out) throw new Error('need --out file');
  return spec;
}

export function main(argv: string[]): number {
  try {
    const spec = parseArgs(argv);
    render(spec);
    console.log(`wrote ${spec.out}`);
    return 0;
  } catch (err) {
    console.error(`error: ${err instanceof Error ? err.message : err}`);
    return 1;
  }
}

if (process.argv[1] && process.argv[1].endsWith('cli.js')) {
  process.exit(main(process.argv.slice(2)));
}
