// DOM rendering: code pane with block highlights, legend, image pane with
// mask overlays, banner, and the save/conflict controls.

import type { ProgramView } from './types.js';
import type { EditSession } from './state.js';
import { canSave, labelsFor } from './state.js';
import { computeHighlights, innermostBlockAtLine } from './selection.js';

const PALETTE = [
  '#e6194b', '#3cb44b', '#4363d8', '#f58231', '#911eb4',
  '#46f0f0', '#f032e6', '#bcf60c', '#008080', '#9a6324',
];

export function blockColor(blockId: number): string {
  return PALETTE[blockId % PALETTE.length]!;
}

export interface Handlers {
  onLineClick(line: number): void;
  onLegendClick(blockId: number): void;
  onImageClick(x: number, y: number): void;
  onViewChange(view: number): void;
  onLabelInput(text: string): void;
  onMultiToggle(): void;
  onSave(): void;
  onReload(): void;
}

export function renderApp(
  root: HTMLElement,
  program: ProgramView,
  session: EditSession,
  handlers: Handlers,
  banner: string | null,
  conflict: boolean,
): void {
  root.innerHTML = '';
  if (banner) {
    const div = el('div', 'banner');
    div.textContent = banner;
    root.appendChild(div);
  }
  if (conflict) {
    root.appendChild(conflictDialog(handlers));
  }
  const layout = el('div', 'layout');
  layout.appendChild(codePane(program, session, handlers));
  layout.appendChild(imagePane(program, session, handlers));
  layout.appendChild(sidebar(program, session, handlers));
  root.appendChild(layout);
}

function el(tag: string, cls: string): HTMLElement {
  const node = document.createElement(tag);
  node.className = cls;
  return node;
}

function codePane(program: ProgramView, session: EditSession, handlers: Handlers): HTMLElement {
  const pane = el('div', 'code-pane');
  const highlights = computeHighlights(program);
  const lines = program.source.split('\n');
  lines.forEach((text, idx) => {
    const line = idx + 1;
    const row = el('div', 'code-line');
    row.dataset.line = String(line);
    const owner = innermostBlockAtLine(program, line);
    if (owner !== null) {
      row.style.borderLeft = `4px solid ${blockColor(owner)}`;
      const h = highlights.find((x) => x.blockId === owner);
      row.style.paddingLeft = `${8 + (h ? h.depth * 6 : 0)}px`;
      if (owner === session.selectedBlock) {
        row.classList.add('selected');
      }
    }
    const num = el('span', 'line-no');
    num.textContent = String(line).padStart(3, ' ');
    const code = el('span', 'line-text');
    code.textContent = text;
    row.append(num, code);
    row.addEventListener('click', () => handlers.onLineClick(line));
    pane.appendChild(row);
  });
  return pane;
}

function imagePane(program: ProgramView, session: EditSession, handlers: Handlers): HTMLElement {
  const pane = el('div', 'image-pane');
  const render = program.renders[session.selectedView];
  if (!render) {
    return pane;
  }
  const stack = el('div', 'image-stack');
  const depth = document.createElement('img');
  depth.src = render.depth_url;
  depth.className = 'depth';
  stack.appendChild(depth);
  for (const [blockId, url] of Object.entries(render.masks)) {
    const overlay = document.createElement('img');
    overlay.src = url;
    overlay.className = 'overlay';
    overlay.dataset.block = blockId;
    overlay.style.opacity = Number(blockId) === session.selectedBlock ? '0.65' : '0.25';
    stack.appendChild(overlay);
  }
  stack.addEventListener('click', (ev) => {
    const rect = stack.getBoundingClientRect();
    const x = Math.floor(((ev.clientX - rect.left) / rect.width) * depth.naturalWidth);
    const y = Math.floor(((ev.clientY - rect.top) / rect.height) * depth.naturalHeight);
    handlers.onImageClick(x, y);
  });
  pane.appendChild(stack);

  const picker = el('div', 'view-picker');
  program.renders.forEach((r) => {
    const btn = document.createElement('button');
    btn.textContent = `view ${r.view}`;
    if (r.view === session.selectedView) {
      btn.classList.add('active');
    }
    btn.addEventListener('click', () => handlers.onViewChange(r.view));
    picker.appendChild(btn);
  });
  pane.appendChild(picker);
  return pane;
}

function sidebar(program: ProgramView, session: EditSession, handlers: Handlers): HTMLElement {
  const bar = el('div', 'sidebar');
  const legend = el('ul', 'legend');
  for (const block of program.blocks) {
    const item = el('li', 'legend-entry');
    if (block.id === session.selectedBlock) {
      item.classList.add('selected');
    }
    const swatch = el('span', 'swatch');
    swatch.style.background = blockColor(block.id);
    const text = el('span', 'legend-text');
    const labels = labelsFor(program, session, block.id);
    text.textContent = `#${block.id} ${block.kind} [${block.span[0]}-${block.span[1]}]: ${labels.join(', ')}`;
    if (session.pending.has(block.id)) {
      item.classList.add('edited');
    }
    item.append(swatch, text);
    item.addEventListener('click', () => handlers.onLegendClick(block.id));
    legend.appendChild(item);
  }
  bar.appendChild(legend);

  const hint = el('div', 'hint');
  hint.textContent =
    `keys 1-${Math.min(program.label_set.length, 9)}: ` +
    program.label_set.map((l, i) => `${i + 1}=${l}`).join(' ');
  bar.appendChild(hint);

  const input = document.createElement('input');
  input.placeholder = 'custom label, press Enter';
  input.addEventListener('keydown', (ev) => {
    if (ev.key === 'Enter') {
      handlers.onLabelInput(input.value);
      input.value = '';
    }
    ev.stopPropagation();
  });
  bar.appendChild(input);

  const multi = document.createElement('label');
  const checkbox = document.createElement('input');
  checkbox.type = 'checkbox';
  checkbox.checked = session.multiMode;
  checkbox.addEventListener('change', () => handlers.onMultiToggle());
  multi.append(checkbox, document.createTextNode(' multi-label mode'));
  bar.appendChild(multi);

  const save = document.createElement('button');
  save.className = 'save';
  save.textContent = 'Save';
  save.disabled = !canSave(session);
  save.addEventListener('click', () => handlers.onSave());
  bar.appendChild(save);
  return bar;
}

function conflictDialog(handlers: Handlers): HTMLElement {
  const dialog = el('div', 'conflict-dialog');
  const message = el('p', 'conflict-text');
  message.textContent =
    'This program changed on the server while you were editing. ' +
    'Reload to pick up the latest revision (your unsaved edits are kept in memory).';
  const reload = document.createElement('button');
  reload.textContent = 'Reload';
  reload.addEventListener('click', () => handlers.onReload());
  dialog.append(message, reload);
  return dialog;
}
