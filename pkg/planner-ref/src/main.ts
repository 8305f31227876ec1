/**
 * CLI entry: `node dist/main.js --plans <plans.json> --bind <host:port>`.
 *
 * Defaults serve the plan table generated next to the executor's golden
 * fixtures.
 */

import { dirname, join } from 'node:path';
import { fileURLToPath } from 'node:url';

import { loadPlans } from './plans.js';
import { serveScripted } from './server.js';

const HERE = dirname(fileURLToPath(import.meta.url));

export function defaultPlansPath(): string {
  return join(HERE, '..', '..', 'src', 'skillbench', 'fixtures', 'golden', 'plans.json');
}

function parseArgs(argv: string[]): { plans: string; host: string; port: number } {
  let plans = defaultPlansPath();
  let host = '127.0.0.1';
  let port = 0;
  for (let i = 0; i < argv.length; i += 1) {
    if (argv[i] === '--plans') {
      plans = argv[++i];
    } else if (argv[i] === '--bind') {
      const value = argv[++i];
      const sep = value.lastIndexOf(':');
      if (sep < 0) {
        throw new Error(`--bind expects host:port, got '${value}'`);
      }
      host = value.slice(0, sep);
      port = Number(value.slice(sep + 1));
    } else {
      throw new Error(`unknown argument '${argv[i]}'`);
    }
  }
  return { plans, host, port };
}

async function main(): Promise<void> {
  const args = parseArgs(process.argv.slice(2));
  const table = loadPlans(args.plans);
  const service = await serveScripted(table, args.host, args.port);
  console.log(
    `scripted planner serving ${Object.keys(table).length} plans on ${args.host}:${service.port}`,
  );
}

main().catch((err) => {
  console.error(err instanceof Error ? err.message : err);
  process.exit(1);
});
