// Thin fetch client for the review-service endpoints.

import type { ProgramListEntry, ProgramView } from './types.js';

export class ConflictError extends Error {
  constructor(detail: string) {
    super(detail || 'revision conflict');
    this.name = 'ConflictError';
  }
}

export class ApiError extends Error {
  constructor(public status: number, detail: string) {
    super(`HTTP ${status}: ${detail}`);
    this.name = 'ApiError';
  }
}

async function getJson<T>(url: string): Promise<T> {
  const resp = await fetch(url, { headers: { accept: 'application/json' } });
  if (!resp.ok) {
    throw new ApiError(resp.status, await resp.text());
  }
  return (await resp.json()) as T;
}

export function listPrograms(): Promise<ProgramListEntry[]> {
  return getJson<ProgramListEntry[]>('/api/programs');
}

export function loadProgram(id: string): Promise<ProgramView> {
  return getJson<ProgramView>(`/api/programs/${encodeURIComponent(id)}`);
}

export interface SaveResult {
  source: string;
  revision: string;
}

/** POST pending label edits; rejects with ConflictError on a stale revision. */
export async function saveLabels(
  id: string,
  revision: string,
  edits: ReadonlyMap<number, string[]>,
): Promise<SaveResult> {
  const labels: Record<string, string[]> = {};
  for (const [blockId, labs] of edits) {
    labels[String(blockId)] = labs;
  }
  const resp = await fetch(`/api/programs/${encodeURIComponent(id)}/labels`, {
    method: 'POST',
    headers: { 'content-type': 'application/json' },
    body: JSON.stringify({ revision, labels }),
  });
  if (resp.status === 409) {
    throw new ConflictError(await resp.text());
  }
  if (!resp.ok) {
    throw new ApiError(resp.status, await resp.text());
  }
  return (await resp.json()) as SaveResult;
}
