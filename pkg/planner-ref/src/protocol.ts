/**
 * Wire protocol codec (version 1).
 *
 * One JSON object per newline-terminated line. Encoding is canonical:
 * recursively sorted keys, no whitespace, ASCII content — byte-compatible
 * with the executor's encoder, which the golden fixtures assert.
 */

export const PROTOCOL_VERSION = 1;

export type Triplet = [number, number, number];

export interface ObjectView {
  id: string;
  category: string;
  attributes: string[];
  image_position: Triplet;
}

export interface PlanRequest {
  protocol_version: number;
  task_description: string;
  history: string[];
  arm_image_position: Triplet;
  object_views: ObjectView[];
  frame_id: number;
  scene_description?: string;
  image_bytes?: string;
}

export interface PlanResponse {
  decision: string;
  destination?: Triplet;
  diagnostics?: string;
}

export class DecodeError extends Error {}

export class VersionError extends DecodeError {}

function sortKeys(value: unknown): unknown {
  if (Array.isArray(value)) {
    return value.map(sortKeys);
  }
  if (value !== null && typeof value === 'object') {
    const src = value as Record<string, unknown>;
    const out: Record<string, unknown> = {};
    for (const key of Object.keys(src).sort()) {
      out[key] = sortKeys(src[key]);
    }
    return out;
  }
  return value;
}

export function canonicalJson(value: unknown): string {
  return JSON.stringify(sortKeys(value));
}

function asTriplet(value: unknown, what: string): Triplet {
  if (!Array.isArray(value) || value.length !== 3 || !value.every((v) => typeof v === 'number')) {
    throw new DecodeError(`bad ${what} triplet`);
  }
  return value as Triplet;
}

export function decodeRequest(line: string): PlanRequest {
  let doc: unknown;
  try {
    doc = JSON.parse(line);
  } catch (err) {
    throw new DecodeError(`malformed JSON: ${(err as Error).message}`);
  }
  if (doc === null || typeof doc !== 'object' || Array.isArray(doc)) {
    throw new DecodeError('request must be a JSON object');
  }
  const raw = doc as Record<string, unknown>;
  if (raw.protocol_version !== PROTOCOL_VERSION) {
    throw new VersionError(`unsupported protocol_version ${String(raw.protocol_version)}`);
  }
  if (typeof raw.task_description !== 'string' || typeof raw.frame_id !== 'number') {
    throw new DecodeError('missing task_description or frame_id');
  }
  const history = Array.isArray(raw.history) ? raw.history.map(String) : [];
  const views: ObjectView[] = [];
  for (const entry of Array.isArray(raw.object_views) ? raw.object_views : []) {
    const view = entry as Record<string, unknown>;
    views.push({
      id: String(view.id),
      category: String(view.category),
      attributes: Array.isArray(view.attributes) ? view.attributes.map(String) : [],
      image_position: asTriplet(view.image_position, 'image_position'),
    });
  }
  const request: PlanRequest = {
    protocol_version: PROTOCOL_VERSION,
    task_description: raw.task_description,
    history,
    arm_image_position: asTriplet(raw.arm_image_position, 'arm_image_position'),
    object_views: views,
    frame_id: raw.frame_id,
  };
  if (typeof raw.scene_description === 'string') {
    request.scene_description = raw.scene_description;
  }
  if (typeof raw.image_bytes === 'string') {
    request.image_bytes = raw.image_bytes;
  }
  return request;
}

export function encodeRequest(request: PlanRequest): string {
  const doc: Record<string, unknown> = {
    protocol_version: request.protocol_version,
    task_description: request.task_description,
    history: request.history,
    arm_image_position: request.arm_image_position,
    object_views: request.object_views,
    frame_id: request.frame_id,
  };
  if (request.scene_description !== undefined) {
    doc.scene_description = request.scene_description;
  }
  if (request.image_bytes !== undefined) {
    doc.image_bytes = request.image_bytes;
  }
  return canonicalJson(doc) + '\n';
}

export function decodeResponse(line: string): PlanResponse {
  let doc: unknown;
  try {
    doc = JSON.parse(line);
  } catch (err) {
    throw new DecodeError(`malformed JSON: ${(err as Error).message}`);
  }
  const raw = doc as Record<string, unknown>;
  if (typeof raw.decision !== 'string') {
    throw new DecodeError('response needs a decision string');
  }
  const response: PlanResponse = { decision: raw.decision };
  if (raw.destination !== undefined && raw.destination !== null) {
    response.destination = asTriplet(raw.destination, 'destination');
  }
  if (typeof raw.diagnostics === 'string') {
    response.diagnostics = raw.diagnostics;
  }
  return response;
}

export function encodeResponse(response: PlanResponse): string {
  const doc: Record<string, unknown> = { decision: response.decision };
  if (response.destination !== undefined) {
    doc.destination = response.destination;
  }
  if (response.diagnostics !== undefined) {
    doc.diagnostics = response.diagnostics;
  }
  return canonicalJson(doc) + '\n';
}
