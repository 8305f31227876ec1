/**
 * End-to-end: the Python executor drives its episode loop against this
 * service and must produce a transcript byte-identical to its in-process
 * oracle on the matched fixture task.
 */

import { execFile } from 'node:child_process';
import { mkdtempSync, readFileSync, readdirSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { join } from 'node:path';
import { promisify } from 'node:util';
import { afterAll, beforeAll, describe, expect, it } from 'vitest';

import { loadPlans } from '../src/plans';
import { serveScripted, type RunningService } from '../src/server';

const run = promisify(execFile);

const REPO = join(__dirname, '..', '..');
const GOLDEN = join(REPO, 'src', 'skillbench', 'fixtures', 'golden');

let service: RunningService;

beforeAll(async () => {
  service = await serveScripted(loadPlans(join(GOLDEN, 'plans.json')));
});

afterAll(async () => {
  await service.close();
});

async function runEngine(task: string, planner: string, outDir: string): Promise<Buffer> {
  await run(
    'python3',
    [
      '-m',
      'skillbench.cli',
      'run',
      '--task',
      task,
      '--planner',
      planner,
      '--trials',
      '1',
      '--seed',
      '7',
      '--out',
      outDir,
    ],
    { cwd: REPO },
  );
  const transcript = readdirSync(outDir).find((f) => f.startsWith(`${task}_seed`));
  expect(transcript).toBeDefined();
  return readFileSync(join(outDir, transcript as string));
}

describe('executor against the scripted service', () => {
  it('drives pick_object to success, transcript-identical to the oracle', async () => {
    const base = mkdtempSync(join(tmpdir(), 'planner-ref-'));
    const oracleBytes = await runEngine('pick_object', 'oracle', join(base, 'oracle'));
    const wireBytes = await runEngine(
      'pick_object',
      `endpoint=127.0.0.1:${service.port}`,
      join(base, 'wire'),
    );
    expect(wireBytes.equals(oracleBytes)).toBe(true);

    const doc = JSON.parse(wireBytes.toString('utf8'));
    expect(doc.success).toBe(true);
    expect(doc.terminal).toBe('done');
  }, 120_000);

  it('matches the oracle on stack_blocks as well', async () => {
    const base = mkdtempSync(join(tmpdir(), 'planner-ref-'));
    const oracleBytes = await runEngine('stack_blocks', 'oracle', join(base, 'oracle'));
    const wireBytes = await runEngine(
      'stack_blocks',
      `endpoint=127.0.0.1:${service.port}`,
      join(base, 'wire'),
    );
    expect(wireBytes.equals(oracleBytes)).toBe(true);
  }, 120_000);
});
