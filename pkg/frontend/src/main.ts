// Application wiring: fetch program state, route events into the session,
// persist on save, and re-render after every transition.

import { ConflictError, listPrograms, loadProgram, saveLabels } from './api.js';
import {
  afterSave,
  assignLabel,
  canSave,
  hotkeyLabel,
  newSession,
  selectBlock,
  selectView,
  toggleMultiMode,
  type EditSession,
} from './state.js';
import { blockAtMaskPixel, innermostBlockAtLine, type MaskBitmap } from './selection.js';
import { renderApp, type Handlers } from './view.js';
import type { ProgramView } from './types.js';

interface AppState {
  program: ProgramView | null;
  session: EditSession;
  banner: string | null;
  conflict: boolean;
  maskBitmaps: Map<number, MaskBitmap>;
}

const state: AppState = {
  program: null,
  session: newSession(),
  banner: null,
  conflict: false,
  maskBitmaps: new Map(),
};

function rerender(): void {
  const root = document.getElementById('app');
  if (!root || !state.program) {
    return;
  }
  renderApp(root, state.program, state.session, handlers, state.banner, state.conflict);
}

async function decodeMask(url: string): Promise<MaskBitmap> {
  const img = new Image();
  img.src = url;
  await img.decode();
  const canvas = document.createElement('canvas');
  canvas.width = img.naturalWidth;
  canvas.height = img.naturalHeight;
  const ctx = canvas.getContext('2d')!;
  ctx.drawImage(img, 0, 0);
  const data = ctx.getImageData(0, 0, canvas.width, canvas.height).data;
  const bits = new Uint8Array(canvas.width * canvas.height);
  for (let i = 0; i < bits.length; i++) {
    bits[i] = data[i * 4]! >= 128 ? 1 : 0;
  }
  return { width: canvas.width, height: canvas.height, bits };
}

async function loadMaskBitmaps(): Promise<void> {
  state.maskBitmaps = new Map();
  const program = state.program;
  if (!program) {
    return;
  }
  const render = program.renders[state.session.selectedView];
  if (!render) {
    return;
  }
  for (const [blockId, url] of Object.entries(render.masks)) {
    try {
      state.maskBitmaps.set(Number(blockId), await decodeMask(url));
    } catch {
      // overlay stays non-clickable when its PNG fails to decode
    }
  }
}

async function load(id: string): Promise<void> {
  try {
    state.program = await loadProgram(id);
    state.session = newSession();
    state.banner = null;
    state.conflict = false;
    rerender();
    await loadMaskBitmaps();
  } catch (err) {
    state.banner = `failed to load program ${id}: ${(err as Error).message}`;
    rerender();
  }
}

const handlers: Handlers = {
  onLineClick(line) {
    if (!state.program) return;
    state.session = selectBlock(state.session, innermostBlockAtLine(state.program, line));
    rerender();
  },
  onLegendClick(blockId) {
    state.session = selectBlock(state.session, blockId);
    rerender();
  },
  onImageClick(x, y) {
    if (!state.program) return;
    const hit = blockAtMaskPixel(state.program, state.maskBitmaps, x, y);
    state.session = selectBlock(state.session, hit);
    rerender();
  },
  onViewChange(view) {
    state.session = selectView(state.session, view);
    rerender();
    void loadMaskBitmaps();
  },
  onLabelInput(text) {
    if (!state.program) return;
    if (!text.trim()) {
      state.banner = 'empty label rejected';
      rerender();
      return;
    }
    state.banner = null;
    state.session = assignLabel(state.program, state.session, text);
    rerender();
  },
  onMultiToggle() {
    state.session = toggleMultiMode(state.session);
    rerender();
  },
  onSave() {
    void save();
  },
  onReload() {
    if (state.program) {
      void load(state.program.id);
    }
  },
};

async function save(): Promise<void> {
  const program = state.program;
  if (!program || !canSave(state.session)) {
    return;
  }
  try {
    await saveLabels(program.id, program.revision, state.session.pending);
    state.session = afterSave(state.session);
    await load(program.id);
  } catch (err) {
    if (err instanceof ConflictError) {
      state.conflict = true; // edits stay in the session; dialog offers reload
    } else {
      state.banner = `save failed, edits kept locally: ${(err as Error).message}`;
    }
    rerender();
  }
}

function onKeydown(ev: KeyboardEvent): void {
  if (!state.program || ev.target instanceof HTMLInputElement) {
    return;
  }
  const label = hotkeyLabel(state.program, ev.key);
  if (label !== null) {
    state.session = assignLabel(state.program, state.session, label);
    rerender();
  } else if (ev.key === 'm') {
    state.session = toggleMultiMode(state.session);
    rerender();
  } else if (ev.key === 's' && (ev.ctrlKey || ev.metaKey)) {
    ev.preventDefault();
    void save();
  }
}

async function boot(): Promise<void> {
  document.addEventListener('keydown', onKeydown);
  const id = window.location.hash.slice(1);
  if (id) {
    await load(id);
    return;
  }
  try {
    const programs = await listPrograms();
    if (programs.length > 0) {
      await load(programs[0]!.id);
    } else {
      const root = document.getElementById('app');
      if (root) root.textContent = 'no programs in the data directory';
    }
  } catch (err) {
    const root = document.getElementById('app');
    if (root) root.textContent = `failed to list programs: ${(err as Error).message}`;
  }
}

void boot();
