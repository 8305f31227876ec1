/**
 * Table-driven scripted plans.
 *
 * A plan is an ordered list of decisions keyed by task description. The step
 * to serve is simply the request's history length, so handlers are stateless
 * and replaying a request yields the identical response. A step grounds its
 * destination either by copying the named object's image_position out of the
 * request's object_views (passing the numbers through untouched keeps the
 * response byte-identical to the ground-truth oracle) or with a literal
 * triplet recorded from the canonical demonstration.
 */

import { readFileSync } from 'node:fs';

import type { PlanRequest, PlanResponse, Triplet } from './protocol.js';

export interface PlanStep {
  decision: string;
  destination_from_view?: string;
  destination?: Triplet;
}

export type PlanTable = Record<string, PlanStep[]>;

export function loadPlans(path: string): PlanTable {
  const table = JSON.parse(readFileSync(path, 'utf8')) as PlanTable;
  for (const [task, steps] of Object.entries(table)) {
    for (const step of steps) {
      if (typeof step.decision !== 'string') {
        throw new Error(`plan for ${task}: step without a decision`);
      }
      const needsPos = step.decision.includes('<pos>');
      const hasSource = step.destination_from_view !== undefined || step.destination !== undefined;
      if (needsPos !== hasSource) {
        throw new Error(`plan for ${task}: '${step.decision}' and its destination source disagree`);
      }
    }
  }
  return table;
}

export function nextResponse(table: PlanTable, request: PlanRequest): PlanResponse {
  const steps = table[request.task_description];
  if (steps === undefined) {
    return {
      decision: 'done',
      diagnostics: `no scripted plan for task '${request.task_description}'`,
    };
  }
  const cursor = request.history.length;
  if (cursor >= steps.length) {
    return { decision: 'done' };
  }
  const step = steps[cursor];
  if (step.destination_from_view !== undefined) {
    const view = request.object_views.find((v) => v.id === step.destination_from_view);
    if (view === undefined) {
      return {
        decision: 'done',
        diagnostics: `object '${step.destination_from_view}' is not in view`,
      };
    }
    return { decision: step.decision, destination: view.image_position };
  }
  if (step.destination !== undefined) {
    return { decision: step.decision, destination: step.destination };
  }
  return { decision: step.decision };
}
