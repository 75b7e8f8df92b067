// Edit-session state: pure functions over immutable snapshots, so the UI is
// a function of (last fetched ProgramView, EditSession).

import type { ProgramView } from './types.js';
import { UNLABELED } from './types.js';

export interface EditSession {
  pending: ReadonlyMap<number, string[]>;
  dirty: boolean;
  selectedBlock: number | null;
  selectedView: number;
  multiMode: boolean;
}

export function newSession(): EditSession {
  return {
    pending: new Map(),
    dirty: false,
    selectedBlock: null,
    selectedView: 0,
    multiMode: false,
  };
}

/** Labels currently shown for a block: pending edits win over server state. */
export function labelsFor(program: ProgramView, session: EditSession, blockId: number): string[] {
  const pending = session.pending.get(blockId);
  if (pending !== undefined) {
    return pending;
  }
  const block = program.blocks.find((b) => b.id === blockId);
  return block && block.labels.length > 0 ? block.labels : [UNLABELED];
}

export function selectBlock(session: EditSession, blockId: number | null): EditSession {
  return { ...session, selectedBlock: blockId };
}

export function selectView(session: EditSession, view: number): EditSession {
  return { ...session, selectedView: view };
}

export function toggleMultiMode(session: EditSession): EditSession {
  return { ...session, multiMode: !session.multiMode };
}

/** Label for a numeric hotkey: "1".."9" pick from the label set, else null. */
export function hotkeyLabel(program: ProgramView, key: string): string | null {
  if (!/^[1-9]$/.test(key)) {
    return null;
  }
  return program.label_set[Number(key) - 1] ?? null;
}

/**
 * Assign a label to the selected block.  Single mode replaces the list; in
 * multi mode assigning toggles membership (repeated assignment removes).
 * Empty input is rejected (state unchanged).
 */
export function assignLabel(
  program: ProgramView,
  session: EditSession,
  rawLabel: string,
): EditSession {
  const label = rawLabel.trim().toLowerCase();
  if (session.selectedBlock === null || label === '') {
    return session;
  }
  const blockId = session.selectedBlock;
  const current = labelsFor(program, session, blockId).filter((l) => l !== UNLABELED);
  let next: string[];
  if (session.multiMode) {
    next = current.includes(label)
      ? current.filter((l) => l !== label)
      : [...current, label];
    if (next.length === 0) {
      next = [label]; // toggling the last label off would leave nothing
    }
  } else {
    next = [label];
  }
  const pending = new Map(session.pending);
  pending.set(blockId, next);
  return { ...session, pending, dirty: true };
}

export function isCustomLabel(program: ProgramView, label: string): boolean {
  return !program.label_set.includes(label);
}

export function canSave(session: EditSession): boolean {
  return session.dirty && session.pending.size > 0;
}

/** After a successful save the pending edits are the new server state. */
export function afterSave(session: EditSession): EditSession {
  return { ...session, pending: new Map(), dirty: false };
}
