import { readFileSync } from 'node:fs';
import { join } from 'node:path';
import { describe, expect, it } from 'vitest';

import {
  DecodeError,
  VersionError,
  canonicalJson,
  decodeRequest,
  decodeResponse,
  encodeRequest,
  encodeResponse,
} from '../src/protocol';

const GOLDEN = join(__dirname, '..', '..', 'src', 'skillbench', 'fixtures', 'golden');

function goldenLines(name: string): string[] {
  return readFileSync(join(GOLDEN, name), 'utf8').split('\n').filter((l) => l.length > 0);
}

describe('codec', () => {
  it('re-encodes every golden request byte-for-byte', () => {
    for (const line of goldenLines('requests.jsonl')) {
      expect(encodeRequest(decodeRequest(line))).toBe(line + '\n');
    }
  });

  it('re-encodes every golden response byte-for-byte', () => {
    for (const line of goldenLines('responses.jsonl')) {
      expect(encodeResponse(decodeResponse(line))).toBe(line + '\n');
    }
  });

  it('sorts keys canonically', () => {
    expect(canonicalJson({ b: 1, a: { d: 2, c: [ { f: 3, e: 4 } ] } })).toBe(
      '{"a":{"c":[{"e":4,"f":3}],"d":2},"b":1}',
    );
  });

  it('rejects unknown protocol versions', () => {
    const line = goldenLines('requests.jsonl')[0].replace(
      '"protocol_version":1',
      '"protocol_version":999',
    );
    expect(() => decodeRequest(line)).toThrow(VersionError);
  });

  it('rejects malformed lines with DecodeError', () => {
    expect(() => decodeRequest('{half a request')).toThrow(DecodeError);
    expect(() => decodeResponse('[]')).toThrow(DecodeError);
  });

  it('ignores unknown fields for forward compatibility', () => {
    const line = goldenLines('requests.jsonl')[0];
    const doc = JSON.parse(line);
    doc.future_extension = { anything: true };
    const decoded = decodeRequest(JSON.stringify(doc));
    expect(encodeRequest(decoded)).toBe(line + '\n');
  });
});
