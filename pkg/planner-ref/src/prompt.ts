/**
 * Example prompt rendering: the adapter seam for a VLM-backed planner.
 *
 * A real planner would send this text (plus the request's images) to a
 * vision-language model and parse the reply into a decision. No model is
 * called here; the renderer exists to pin down exactly what such an adapter
 * would feed it. The in-context-learning template is the versioned text
 * asset shared with the executor package (vendored under assets/, checked
 * byte-identical in the tests).
 */

import { readFileSync } from 'node:fs';
import { dirname, join } from 'node:path';
import { fileURLToPath } from 'node:url';

import type { PlanRequest, Triplet } from './protocol.js';

const HERE = dirname(fileURLToPath(import.meta.url));

export function templatePath(): string {
  return join(HERE, '..', 'assets', 'gpt4v_icl.txt');
}

export function formatTriplet([x, y, d]: Triplet): string {
  return `[${x.toFixed(3)}, ${y.toFixed(3)}, ${d.toFixed(3)}]`;
}

export function renderExamplePrompt(request: PlanRequest): string {
  const template = readFileSync(templatePath(), 'utf8').trimEnd();
  const history = request.history.length > 0 ? request.history.join(', ') : 'none';
  const lines = [
    template,
    '',
    `Task description: ${request.task_description}`,
    `Historical decisions: ${history}`,
    `Current gripper position: ${formatTriplet(request.arm_image_position)}`,
  ];
  if (request.scene_description !== undefined) {
    lines.push(`Scene description: ${request.scene_description}`);
  }
  return lines.join('\n');
}
